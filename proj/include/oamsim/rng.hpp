#pragma once

// Deterministic random number utilities.
//
// Seeding follows a counter-based split: a master seed plus a stream tag and a
// trial counter are mixed through splitmix64 to give independent per-trial
// seeds.  Changing the trial count never perturbs the seeds of earlier trials.
//
// The raw mt19937_64 sequence is fully specified by the C++ standard, but the
// stdlib *distributions* are not, so uniform and normal deviates are derived
// here by hand (53-bit uniforms, Box-Muller normals) to keep artifacts
// byte-identical across toolchains.

#include <cmath>
#include <cstdint>
#include <random>

namespace oamsim {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Mix a master seed with a stream tag and a counter (e.g. trial index).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t counter = 0) {
  std::uint64_t s = splitmix64(master ^ 0x243f6a8885a308d3ULL);
  s = splitmix64(s ^ splitmix64(stream));
  s = splitmix64(s ^ splitmix64(counter ^ 0x13198a2e03707344ULL));
  return s;
}

// Stream tags for the experiment harness (arbitrary distinct constants).
namespace stream {
inline constexpr std::uint64_t screens = 0x5343524eULL;      // turbulence screens
inline constexpr std::uint64_t trials = 0x5452494cULL;       // per-trial channels
inline constexpr std::uint64_t aberrations = 0x41424552ULL;  // synthetic aberrations
inline constexpr std::uint64_t wind = 0x57494e44ULL;         // series re-synthesis
}  // namespace stream

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // Uniform in [0,1) with 53 random bits (platform-independent).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; consumes exactly two uniforms per pair.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * M_PI * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace oamsim
