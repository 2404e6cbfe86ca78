#pragma once

// ComplexField: a sampled transverse optical field on a square grid.

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "oamsim/fft.hpp"
#include "oamsim/grid.hpp"

namespace oamsim {

using cplx = std::complex<double>;

class ComplexField {
 public:
  ComplexField() = default;
  explicit ComplexField(const GridSpec& grid)
      : grid_(grid), samples_(static_cast<std::size_t>(grid.n) * grid.n) {
    grid_.validate();
  }

  const GridSpec& grid() const { return grid_; }
  int n() const { return grid_.n; }
  double pitch() const { return grid_.pitch; }
  double wavelength() const { return grid_.wavelength; }

  cplx& at(int row, int col) {
    return samples_[static_cast<std::size_t>(row) * grid_.n + col];
  }
  cplx at(int row, int col) const {
    return samples_[static_cast<std::size_t>(row) * grid_.n + col];
  }

  std::vector<cplx>& samples() { return samples_; }
  const std::vector<cplx>& samples() const { return samples_; }

  // Total power sum(|f|^2) * pitch^2.
  double power() const {
    double acc = 0.0;
    for (const cplx& v : samples_) acc += std::norm(v);
    return acc * grid_.pitch * grid_.pitch;
  }

  // Scale to unit power.  Throws if the field is identically zero.
  void normalize() {
    const double p = power();
    if (!(p > 0.0)) throw std::runtime_error("cannot normalize a zero field");
    const double s = 1.0 / std::sqrt(p);
    for (cplx& v : samples_) v *= s;
  }

  // Rotate the global phase so the largest-magnitude sample is real positive.
  // Ties break toward the first sample in row-major order, which makes
  // constructed modes reproducible fixtures.
  void fix_global_phase() {
    std::size_t best = 0;
    double best_mag = -1.0;
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const double m = std::norm(samples_[i]);
      if (m > best_mag) {
        best_mag = m;
        best = i;
      }
    }
    if (best_mag <= 0.0) return;
    const cplx ph = samples_[best] / std::abs(samples_[best]);
    const cplx corr = std::conj(ph);
    for (cplx& v : samples_) v *= corr;
  }

  // Intensity centroid (meters).  Throws on zero power.
  void centroid(double& cx, double& cy) const {
    double w = 0.0, sx = 0.0, sy = 0.0;
    for (int r = 0; r < grid_.n; ++r) {
      const double y = grid_.coord(r);
      for (int c = 0; c < grid_.n; ++c) {
        const double I = std::norm(at(r, c));
        w += I;
        sx += I * grid_.coord(c);
        sy += I * y;
      }
    }
    if (!(w > 0.0)) throw std::runtime_error("centroid of a zero field");
    cx = sx / w;
    cy = sy / w;
  }

  // Root-mean-square intensity radius about the origin (meters).
  double rms_radius() const {
    double w = 0.0, s = 0.0;
    for (int r = 0; r < grid_.n; ++r) {
      const double y = grid_.coord(r);
      for (int c = 0; c < grid_.n; ++c) {
        const double I = std::norm(at(r, c));
        const double x = grid_.coord(c);
        w += I;
        s += I * (x * x + y * y);
      }
    }
    if (!(w > 0.0)) throw std::runtime_error("rms_radius of a zero field");
    return std::sqrt(s / w);
  }

  void fft_forward() { Fft2::forward(samples_.data(), grid_.n); }
  void fft_inverse() { Fft2::inverse(samples_.data(), grid_.n); }

 private:
  GridSpec grid_;
  std::vector<cplx> samples_;
};

// <a|b> = sum conj(a)*b*pitch^2.
inline cplx overlap(const ComplexField& a, const ComplexField& b) {
  require_same_grid(a.grid(), b.grid(), "overlap");
  cplx acc(0.0, 0.0);
  const auto& va = a.samples();
  const auto& vb = b.samples();
  for (std::size_t i = 0; i < va.size(); ++i) acc += std::conj(va[i]) * vb[i];
  return acc * (a.pitch() * a.pitch());
}

// Hard circular mask of the given diameter, centered on the grid origin.
// Power outside the disk is discarded (non-unitary).
inline ComplexField apply_circular_aperture(const ComplexField& f,
                                            double diameter) {
  if (!(diameter > 0.0))
    throw std::invalid_argument("aperture diameter must be > 0");
  ComplexField out = f;
  const double r2max = 0.25 * diameter * diameter;
  for (int r = 0; r < f.n(); ++r) {
    const double y = f.grid().coord(r);
    for (int c = 0; c < f.n(); ++c) {
      const double x = f.grid().coord(c);
      if (x * x + y * y > r2max) out.at(r, c) = 0.0;
    }
  }
  return out;
}

}  // namespace oamsim
