#pragma once

// Channel propagation: angular-spectrum free-space steps, thin phase screens,
// and composition of the source -> cell -> receiver path.

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "oamsim/field.hpp"
#include "oamsim/turbulence.hpp"

namespace oamsim {

// Maximum free-space step for which the sampled transfer function is free of
// aliasing over the band the field can occupy.  Confined fields on these
// grids stay band-limited well inside Nyquist, so the bound is evaluated at
// half the Nyquist frequency rather than the full-grid worst case.
inline double max_safe_propagation(const GridSpec& grid) {
  const double f_band = 1.0 / (4.0 * grid.pitch);  // half Nyquist
  const double lf = grid.wavelength * f_band;
  if (lf >= 1.0) return 0.0;
  return grid.side() * std::sqrt(1.0 - lf * lf) /
         (2.0 * grid.wavelength * f_band);
}

// Exact transfer-function propagation over distance z (either sign).
// Power is conserved; evanescent components cannot occur within the sampled
// band on supported grids.
inline ComplexField propagate_free(const ComplexField& field, double z) {
  if (z == 0.0) return field;
  const GridSpec& g = field.grid();
  const double zmax = max_safe_propagation(g);
  if (std::abs(z) > zmax)
    throw std::invalid_argument(
        "propagate_free: step " + std::to_string(std::abs(z)) +
        " m violates the anti-aliasing bound; max safe z = " +
        std::to_string(zmax) + " m for this grid");
  ComplexField out = field;
  out.fft_forward();
  const double inv_l2 = 1.0 / (g.wavelength * g.wavelength);
  auto& s = out.samples();
  for (int ky = 0; ky < g.n; ++ky) {
    const double fy = fft_freq(ky, g.n, g.pitch);
    for (int kx = 0; kx < g.n; ++kx) {
      const double fx = fft_freq(kx, g.n, g.pitch);
      const double arg = inv_l2 - fx * fx - fy * fy;
      std::size_t idx = static_cast<std::size_t>(ky) * g.n + kx;
      if (arg <= 0.0) {
        s[idx] = 0.0;  // evanescent; unreachable for optical pitches
        continue;
      }
      const double kz = 2.0 * M_PI * std::sqrt(arg);
      s[idx] *= std::polar(1.0, kz * z);
    }
  }
  out.fft_inverse();
  return out;
}

// Thin phase element: samples multiplied by e^{i phase}.
inline ComplexField apply_screen(const ComplexField& field,
                                 const PhaseScreen& screen) {
  require_same_grid(field.grid(), screen.grid, "apply_screen");
  ComplexField out = field;
  auto& s = out.samples();
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] *= std::polar(1.0, screen.phase[i]);
  return out;
}

// One channel segment: either a free-space step or a thin phase screen.
struct FreeSpaceSegment {
  double z = 0.0;
};
struct ScreenSegment {
  std::shared_ptr<const PhaseScreen> screen;
};
using ChannelSegment = std::variant<FreeSpaceSegment, ScreenSegment>;

struct ChannelSpec {
  std::vector<ChannelSegment> segments;
  double aperture_diameter = 0.0;  // receiver pupil; 0 disables the mask

  void add_free_space(double z) {
    if (z < 0.0)
      throw std::invalid_argument("ChannelSpec: distances must be >= 0");
    segments.push_back(FreeSpaceSegment{z});
  }
  void add_screen(std::shared_ptr<const PhaseScreen> s) {
    if (!s) throw std::invalid_argument("ChannelSpec: null screen");
    segments.push_back(ScreenSegment{std::move(s)});
  }

  double total_distance() const {
    double z = 0.0;
    for (const auto& seg : segments)
      if (const auto* fs = std::get_if<FreeSpaceSegment>(&seg)) z += fs->z;
    return z;
  }
};

// Left-to-right composition of the declared segments, then the receiver
// aperture mask (when configured).
inline ComplexField run_channel(const ComplexField& field,
                                const ChannelSpec& spec) {
  ComplexField out = field;
  for (const auto& seg : spec.segments) {
    if (const auto* fs = std::get_if<FreeSpaceSegment>(&seg)) {
      out = propagate_free(out, fs->z);
    } else {
      out = apply_screen(out, *std::get<ScreenSegment>(seg).screen);
    }
  }
  if (spec.aperture_diameter > 0.0)
    out = apply_circular_aperture(out, spec.aperture_diameter);
  return out;
}

}  // namespace oamsim
