#pragma once

// OAM mode construction and the mode bases used by the QKD and tomography
// experiments: the logical (OAM) basis, its Fourier-conjugate angular (ANG)
// basis, and arbitrary superpositions for MUB state preparation.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "oamsim/field.hpp"

namespace oamsim {

// Upper regularized incomplete gamma Q(k, x) for integer k >= 1:
// the fraction of an OAM ring's power beyond a given radius.
inline double gamma_q_int(int k, double x) {
  double term = 1.0, sum = 1.0;
  for (int i = 1; i < k; ++i) {
    term *= x / i;
    sum += term;
  }
  return std::exp(-x) * sum;
}

// Laguerre-Gauss (p=0) mode: G(rho)*e^{i*ell*phi} with
// G(rho) ~ (sqrt(2)*rho/w0)^|ell| * exp(-rho^2/w0^2).
inline ComplexField make_oam_mode(int ell, double w0, const GridSpec& grid) {
  grid.validate();
  if (std::abs(ell) > 16)
    throw std::invalid_argument("make_oam_mode: |ell| must be <= 16");
  if (!(w0 > 0.0)) throw std::invalid_argument("make_oam_mode: w0 must be > 0");
  if (!(w0 * std::sqrt(1.0 + std::abs(ell)) < grid.n * grid.pitch / 4.0))
    throw std::invalid_argument(
        "make_oam_mode: waist too large for grid at ell=" +
        std::to_string(ell));
  // Reject when the ring carries non-negligible power past the grid edge.
  const double r_edge = 0.5 * grid.n * grid.pitch;
  const double tail =
      gamma_q_int(std::abs(ell) + 1, 2.0 * r_edge * r_edge / (w0 * w0));
  if (tail > 1e-4)
    throw std::invalid_argument(
        "make_oam_mode: grid too small for ell=" + std::to_string(ell) +
        " (relative power beyond edge " + std::to_string(tail) + ")");

  ComplexField f(grid);
  const int a = std::abs(ell);
  for (int r = 0; r < grid.n; ++r) {
    const double y = grid.coord(r);
    for (int c = 0; c < grid.n; ++c) {
      const double x = grid.coord(c);
      const double rho = std::hypot(x, y);
      double g = std::exp(-rho * rho / (w0 * w0));
      if (a > 0) g *= std::pow(std::sqrt(2.0) * rho / w0, a);
      const double phi = std::atan2(y, x);
      f.at(r, c) = std::polar(g, ell * phi);
    }
  }
  f.normalize();
  f.fix_global_phase();
  return f;
}

enum class BasisKind { LogicalOam, Ang, Superposition };

struct ModeBasis {
  int d = 0;
  BasisKind kind = BasisKind::LogicalOam;
  std::vector<int> ell_list;  // empty for generic superposition bases
  std::vector<ComplexField> modes;
  double w0 = 0.0;
};

// OAM charges for dimension d, ascending.  Even d excludes ell=0; odd d
// (tomography only) includes it.  The ascending order realizes the Heaviside
// index map j = d/2 + (ell-1)*Theta(ell) + ell*Theta(-ell) for even d.
inline std::vector<int> ell_list_for_dimension(int d) {
  if (d < 2 || d > 16)
    throw std::invalid_argument("dimension must be in [2,16]");
  std::vector<int> ells;
  if (d % 2 == 0) {
    for (int l = -d / 2; l <= d / 2; ++l)
      if (l != 0) ells.push_back(l);
  } else {
    for (int l = -(d - 1) / 2; l <= (d - 1) / 2; ++l) ells.push_back(l);
  }
  return ells;
}

inline ModeBasis make_logical_basis(int d, double w0, const GridSpec& grid) {
  ModeBasis b;
  b.d = d;
  b.kind = BasisKind::LogicalOam;
  b.ell_list = ell_list_for_dimension(d);
  b.w0 = w0;
  b.modes.reserve(d);
  for (int l : b.ell_list) b.modes.push_back(make_oam_mode(l, w0, grid));
  return b;
}

// Build a basis whose k-th mode is sum_j coeffs[k][j] * source.modes[j].
inline ModeBasis superpose_basis(const ModeBasis& source,
                                 const std::vector<std::vector<cplx>>& coeffs,
                                 BasisKind kind) {
  ModeBasis b;
  b.d = source.d;
  b.kind = kind;
  b.ell_list = source.ell_list;
  b.w0 = source.w0;
  b.modes.reserve(coeffs.size());
  for (const auto& row : coeffs) {
    if (static_cast<int>(row.size()) != source.d)
      throw std::invalid_argument("superpose_basis: coefficient length");
    ComplexField m(source.modes.front().grid());
    auto& out = m.samples();
    for (int j = 0; j < source.d; ++j) {
      const auto& in = source.modes[j].samples();
      const cplx c = row[j];
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * in[i];
    }
    // No per-mode phase fix here: superposed modes must keep the phase
    // relations their coefficients define (Fourier duality with the source
    // basis depends on them).  normalize() is a positive real scale.
    m.normalize();
    b.modes.push_back(std::move(m));
  }
  return b;
}

// Single raw superposition sum_j coeffs[j] * source.modes[j], without the
// per-mode renormalization above.
inline ComplexField superpose_state(const ModeBasis& source,
                                    const std::vector<cplx>& coeffs) {
  if (static_cast<int>(coeffs.size()) != source.d)
    throw std::invalid_argument("superpose_state: coefficient length");
  ComplexField m(source.modes.front().grid());
  auto& out = m.samples();
  for (int j = 0; j < source.d; ++j) {
    const auto& in = source.modes[j].samples();
    const cplx c = coeffs[j];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * in[i];
  }
  return m;
}

// ANG basis: quantum Fourier transform of the logical OAM basis,
// mode_k = (1/sqrt(d)) * sum_j e^{2*pi*i*j*k/d} |j>.  Works from any
// rendering of the logical basis (free propagation commutes with the
// superposition).
inline ModeBasis make_ang_basis(const ModeBasis& logical) {
  const int d = logical.d;
  if (d % 2 != 0)
    throw std::invalid_argument(
        "make_ang_basis: odd d rejected (index map requires integer d/2)");
  std::vector<std::vector<cplx>> coeffs(d, std::vector<cplx>(d));
  const double norm = 1.0 / std::sqrt(static_cast<double>(d));
  for (int k = 0; k < d; ++k)
    for (int j = 0; j < d; ++j)
      coeffs[k][j] = std::polar(norm, 2.0 * M_PI * j * k / d);
  return superpose_basis(logical, coeffs, BasisKind::Ang);
}

inline ModeBasis make_ang_basis(int d, double w0, const GridSpec& grid) {
  if (d % 2 != 0)
    throw std::invalid_argument(
        "make_ang_basis: odd d rejected (index map requires integer d/2)");
  return make_ang_basis(make_logical_basis(d, w0, grid));
}

// eta = |<G_fiber|field>|^2 for the fundamental Gaussian fiber mode.
inline double fiber_coupling(const ComplexField& field, double fiber_w0) {
  const ComplexField g = make_oam_mode(0, fiber_w0, field.grid());
  const cplx ov = overlap(g, field);
  return std::norm(ov);
}

// Unnormalized projection probabilities onto each basis mode.
inline std::vector<double> projective_probability(const ComplexField& field,
                                                  const ModeBasis& basis) {
  std::vector<double> p;
  p.reserve(basis.modes.size());
  for (const ComplexField& m : basis.modes)
    p.push_back(std::norm(overlap(m, field)));
  return p;
}

// Projection amplitudes <mode_j|field> (used by tomography to evaluate all
// MUB projectors from one set of mode overlaps).
inline std::vector<cplx> projection_amplitudes(const ComplexField& field,
                                               const ModeBasis& basis) {
  std::vector<cplx> a;
  a.reserve(basis.modes.size());
  for (const ComplexField& m : basis.modes) a.push_back(overlap(m, field));
  return a;
}

}  // namespace oamsim
