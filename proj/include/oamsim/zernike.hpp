#pragma once

// Zernike polynomials in ANSI single-index convention (1-based: j=1 piston),
// supported through radial order 10 (j <= 66), plus least-squares wavefront
// decomposition over a circular aperture.
//
// Normalization: sqrt(n+1) for m=0 and sqrt(2(n+1)) otherwise, making the
// family orthonormal under the uniform disk measure (1/pi)*dA.  Negative m
// carries sin(|m|*phi), non-negative m carries cos(m*phi).

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oamsim/grid.hpp"

namespace oamsim {

inline constexpr int kZernikeMaxIndex = 66;  // radial order 10

struct ZernikeNm {
  int n;
  int m;
};

// ANSI 1-based index -> (n, m).
inline ZernikeNm zernike_nm(int j) {
  if (j < 1 || j > kZernikeMaxIndex)
    throw std::invalid_argument("zernike index out of range: " +
                                std::to_string(j));
  const int j0 = j - 1;
  // smallest n with j0 <= n(n+3)/2, i.e. the radial order containing j0
  int n = 0;
  while (n * (n + 3) / 2 < j0) ++n;
  const int m = 2 * j0 - n * (n + 2);
  return {n, m};
}

// Radial polynomial coefficients of R_n^{|m|}: coeffs[k] multiplies rho^(n-2k).
inline std::vector<double> zernike_radial_coeffs(int n, int m_abs) {
  const int kmax = (n - m_abs) / 2;
  std::vector<double> coeffs(kmax + 1);
  auto fact = [](int v) {
    double r = 1.0;
    for (int i = 2; i <= v; ++i) r *= i;
    return r;
  };
  for (int k = 0; k <= kmax; ++k) {
    const double num = fact(n - k);
    const double den =
        fact(k) * fact((n + m_abs) / 2 - k) * fact((n - m_abs) / 2 - k);
    coeffs[k] = ((k % 2 == 0) ? 1.0 : -1.0) * num / den;
  }
  return coeffs;
}

inline double zernike_eval(int j, double rho, double phi) {
  const ZernikeNm nm = zernike_nm(j);
  const int ma = std::abs(nm.m);
  const auto coeffs = zernike_radial_coeffs(nm.n, ma);
  // Horner in rho^2, overall factor rho^|m|.
  double acc = 0.0;
  const double r2 = rho * rho;
  for (double c : coeffs) acc = acc * r2 + c;
  double radial = acc;
  for (int i = 0; i < ma; ++i) radial *= rho;
  const double norm =
      (nm.m == 0) ? std::sqrt(nm.n + 1.0) : std::sqrt(2.0 * (nm.n + 1.0));
  double ang = 1.0;
  if (nm.m > 0) ang = std::cos(ma * phi);
  if (nm.m < 0) ang = std::sin(ma * phi);
  return norm * radial * ang;
}

// Human-readable names: the first ten per the ANSI table, generic beyond.
inline std::string zernike_name(int j) {
  static const char* first10[] = {
      "Piston",  "Tip Y",  "Tip X",  "Astigmatism +45d", "Defocus",
      "Astigmatism 0/90d", "Trefoil Y", "Coma X", "Coma Y", "Trefoil X"};
  if (j >= 1 && j <= 10) return first10[j - 1];
  const ZernikeNm nm = zernike_nm(j);
  return "Z(n=" + std::to_string(nm.n) + ",m=" + std::to_string(nm.m) + ")";
}

struct ZernikeSpectrum {
  std::vector<double> coeffs;  // coeffs[j-1] = a_j, radians
  double aperture_radius = 0.0;  // meters

  double a(int j) const {
    if (j < 1 || j > static_cast<int>(coeffs.size()))
      throw std::invalid_argument("spectrum index out of range");
    return coeffs[j - 1];
  }
};

// Least-squares projection of a sampled phase map onto Z_1..Z_jmax over the
// aperture disk of radius R.  Solving the Gram system (rather than assuming
// grid orthonormality) makes reconstruct-then-decompose idempotent.
inline ZernikeSpectrum zernike_decompose(const std::vector<double>& phase,
                                         const GridSpec& grid, double R,
                                         int jmax) {
  if (jmax < 1 || jmax > kZernikeMaxIndex)
    throw std::invalid_argument("zernike_decompose: jmax out of range");
  if (!(R > 0.0) || R > 0.5 * grid.side())
    throw std::invalid_argument(
        "zernike_decompose: aperture not inscribed in grid");
  // Collect in-aperture samples.
  std::vector<int> rows, cols;
  for (int r = 0; r < grid.n; ++r) {
    const double y = grid.coord(r);
    for (int c = 0; c < grid.n; ++c) {
      const double x = grid.coord(c);
      if (x * x + y * y <= R * R) {
        rows.push_back(r);
        cols.push_back(c);
      }
    }
  }
  const int npix = static_cast<int>(rows.size());
  if (npix < jmax)
    throw std::invalid_argument("zernike_decompose: aperture under-sampled");
  Eigen::MatrixXd Z(npix, jmax);
  Eigen::VectorXd b(npix);
  for (int i = 0; i < npix; ++i) {
    const double x = grid.coord(cols[i]);
    const double y = grid.coord(rows[i]);
    const double rho = std::hypot(x, y) / R;
    const double phi = std::atan2(y, x);
    for (int j = 1; j <= jmax; ++j) Z(i, j - 1) = zernike_eval(j, rho, phi);
    b(i) = phase[static_cast<std::size_t>(rows[i]) * grid.n + cols[i]];
  }
  const Eigen::MatrixXd G = Z.transpose() * Z;
  const Eigen::VectorXd rhs = Z.transpose() * b;
  const Eigen::VectorXd a = G.ldlt().solve(rhs);
  ZernikeSpectrum s;
  s.aperture_radius = R;
  s.coeffs.assign(a.data(), a.data() + jmax);
  return s;
}

// Evaluate sum_j a_j Z_j over the whole grid (polynomial extension beyond the
// aperture keeps the surface smooth; the beam lives inside the aperture).
inline std::vector<double> zernike_reconstruct(const ZernikeSpectrum& s,
                                               const GridSpec& grid) {
  std::vector<double> phase(static_cast<std::size_t>(grid.n) * grid.n, 0.0);
  const double R = s.aperture_radius;
  if (!(R > 0.0)) throw std::invalid_argument("spectrum lacks aperture radius");
  const int jmax = static_cast<int>(s.coeffs.size());
  for (int r = 0; r < grid.n; ++r) {
    const double y = grid.coord(r);
    for (int c = 0; c < grid.n; ++c) {
      const double x = grid.coord(c);
      const double rho = std::hypot(x, y) / R;
      const double phi = std::atan2(y, x);
      double acc = 0.0;
      for (int j = 1; j <= jmax; ++j)
        if (s.coeffs[j - 1] != 0.0)
          acc += s.coeffs[j - 1] * zernike_eval(j, rho, phi);
      phase[static_cast<std::size_t>(r) * grid.n + c] = acc;
    }
  }
  return phase;
}

}  // namespace oamsim
