#pragma once

// Thin FFTW wrapper for 2-D transforms.
//
// Plans are created with FFTW_ESTIMATE so the chosen algorithm (and therefore
// floating-point summation order) is reproducible run to run.  Plan creation
// is serialized behind a mutex and plans are cached for the process lifetime;
// execution uses the new-array interface and is re-entrant, so independent
// trials may transform concurrently.

#include <complex>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include <fftw3.h>

namespace oamsim {

class Fft2 {
 public:
  // Unnormalized forward transform, in place, row-major n x n.
  static void forward(std::complex<double>* data, int n) {
    execute(data, n, n, FFTW_FORWARD);
  }

  // Inverse transform, in place, scaled by 1/n^2 so forward+inverse = identity.
  static void inverse(std::complex<double>* data, int n) {
    execute(data, n, n, FFTW_BACKWARD);
    const double s = 1.0 / (static_cast<double>(n) * n);
    const std::size_t total = static_cast<std::size_t>(n) * n;
    for (std::size_t i = 0; i < total; ++i) data[i] *= s;
  }

  // Unnormalized backward transform on a rows x cols array (row-major):
  // out_r = sum_k in_k e^{+2 pi i k.r/N}.  Used by spectral synthesis.
  static void backward_raw(std::complex<double>* data, int rows, int cols) {
    execute(data, rows, cols, FFTW_BACKWARD);
  }

 private:
  static void execute(std::complex<double>* data, int rows, int cols,
                      int sign) {
    const fftw_plan plan = plan_for(rows, cols, sign);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(data),
                     reinterpret_cast<fftw_complex*>(data));
  }

  static fftw_plan plan_for(int rows, int cols, int sign) {
    static std::mutex mu;
    static std::map<std::tuple<int, int, int>, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(mu);
    const auto key = std::make_tuple(rows, cols, sign);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<std::complex<double>> dummy(static_cast<std::size_t>(rows) *
                                            cols);
    // FFTW_UNALIGNED keeps the plan valid for any caller buffer alignment.
    fftw_plan p = fftw_plan_dft_2d(
        rows, cols, reinterpret_cast<fftw_complex*>(dummy.data()),
        reinterpret_cast<fftw_complex*>(dummy.data()), sign,
        FFTW_ESTIMATE | FFTW_UNALIGNED);
    cache.emplace(key, p);
    return p;
  }
};

// FFT frequency (cycles per meter) for index k on an n-point axis.
inline double fft_freq(int k, int n, double pitch) {
  const int kk = (k < n / 2) ? k : k - n;
  return kk / (n * pitch);
}

}  // namespace oamsim
