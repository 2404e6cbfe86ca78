#pragma once

// Square sampling grid shared by fields and phase screens.

#include <cmath>
#include <stdexcept>
#include <string>

namespace oamsim {

struct GridSpec {
  int n = 256;               // samples per side, power of two, >= 32
  double pitch = 31.25e-6;   // meters per sample
  double wavelength = 633e-9;  // meters

  // Physical coordinate of sample index i along either axis.  The origin sits
  // on the sample at index n/2 so that FFT conventions need no shifting.
  double coord(int i) const { return (i - n / 2) * pitch; }

  double side() const { return n * pitch; }

  bool operator==(const GridSpec& o) const {
    return n == o.n && pitch == o.pitch && wavelength == o.wavelength;
  }

  void validate() const {
    if (n < 32 || (n & (n - 1)) != 0)
      throw std::invalid_argument("grid n must be a power of two >= 32, got " +
                                  std::to_string(n));
    if (pitch <= 0.0) throw std::invalid_argument("grid pitch must be > 0");
    if (wavelength <= 0.0)
      throw std::invalid_argument("grid wavelength must be > 0");
  }
};

// Default grid: the receiver aperture D = 4*w0 spans half the grid side.
inline GridSpec default_grid(double w0 = 1.0e-3, int n = 256,
                             double wavelength = 633e-9) {
  GridSpec g;
  g.n = n;
  g.pitch = 8.0 * w0 / n;
  g.wavelength = wavelength;
  return g;
}

inline void require_same_grid(const GridSpec& a, const GridSpec& b,
                              const char* what) {
  if (!(a == b))
    throw std::invalid_argument(std::string(what) + ": grid specs differ");
}

}  // namespace oamsim
