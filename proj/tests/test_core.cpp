#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "oamsim/field.hpp"
#include "oamsim/grid.hpp"
#include "oamsim/modes.hpp"
#include "oamsim/rng.hpp"
#include "oamsim/turbulence.hpp"
#include "oamsim/zernike.hpp"

using namespace oamsim;

namespace {

GridSpec small_grid(int n = 128) {
  GridSpec g;
  g.n = n;
  g.pitch = 8.0e-3 / n;
  g.wavelength = 633e-9;
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("grid validation", "[grid]") {
  GridSpec g = small_grid();
  REQUIRE_NOTHROW(g.validate());
  g.n = 100;
  REQUIRE_THROWS_AS(g.validate(), std::invalid_argument);
  g.n = 16;
  REQUIRE_THROWS_AS(g.validate(), std::invalid_argument);
  g = small_grid();
  g.pitch = 0.0;
  REQUIRE_THROWS_AS(g.validate(), std::invalid_argument);
  g = small_grid();
  g.wavelength = -1.0;
  REQUIRE_THROWS_AS(g.validate(), std::invalid_argument);
}

TEST_CASE("grid centering and default sizing", "[grid]") {
  const GridSpec g = small_grid();
  REQUIRE(g.coord(g.n / 2) == 0.0);
  REQUIRE(g.coord(g.n / 2 + 1) == g.pitch);
  const GridSpec d = default_grid(1.0e-3);
  REQUIRE_THAT(d.side(), Catch::Matchers::WithinRel(8.0e-3, 1e-12));
}

// ---------------------------------------------------------------------------

TEST_CASE("spectral round trip conserves power and samples", "[field]") {
  const GridSpec g = small_grid();
  ComplexField f = make_oam_mode(2, 1.0e-3, g);
  const std::vector<cplx> before = f.samples();
  const double p0 = f.power();
  f.fft_forward();
  f.fft_inverse();
  REQUIRE_THAT(f.power(), Catch::Matchers::WithinRel(p0, 1e-10));
  double max_dev = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i)
    max_dev = std::max(max_dev, std::abs(f.samples()[i] - before[i]));
  REQUIRE(max_dev < 1e-12);
}

TEST_CASE("overlap basics", "[field]") {
  const GridSpec g = small_grid();
  const ComplexField m = make_oam_mode(0, 1.0e-3, g);
  const cplx self = overlap(m, m);
  REQUIRE(std::abs(self - cplx(1.0, 0.0)) < 1e-9);

  const ComplexField l2 = make_oam_mode(2, 0.9e-3, g);
  const ComplexField l3 = make_oam_mode(3, 0.9e-3, g);
  REQUIRE(std::abs(overlap(l2, l3)) < 1e-6);

  ComplexField rotated = m;
  const cplx phase = std::polar(1.0, 0.7);
  for (cplx& v : rotated.samples()) v *= phase;
  REQUIRE(std::abs(overlap(m, rotated) - phase) < 1e-9);

  REQUIRE(overlap(l2, l3) == std::conj(overlap(l3, l2)));

  GridSpec other = small_grid(64);
  REQUIRE_THROWS_AS(overlap(m, ComplexField(other)), std::invalid_argument);
}

TEST_CASE("aperture mask discards outside power only", "[field]") {
  const GridSpec g = small_grid();
  const ComplexField m = make_oam_mode(0, 1.0e-3, g);
  const ComplexField wide = apply_circular_aperture(m, g.side());
  REQUIRE_THAT(wide.power(), Catch::Matchers::WithinRel(m.power(), 1e-9));
  const ComplexField tight = apply_circular_aperture(m, 1.0e-3);
  REQUIRE(tight.power() < m.power());
  REQUIRE(tight.power() > 0.0);
}

TEST_CASE("centroid of a centered mode is the origin", "[field]") {
  const GridSpec g = small_grid();
  const ComplexField m = make_oam_mode(0, 1.0e-3, g);
  double cx = 0.0, cy = 0.0;
  m.centroid(cx, cy);
  REQUIRE(std::abs(cx) < 1e-9);
  REQUIRE(std::abs(cy) < 1e-9);
  ComplexField z{g};
  REQUIRE_THROWS(z.centroid(cx, cy));
}

// ---------------------------------------------------------------------------

TEST_CASE("fundamental mode is a flat-phase Gaussian", "[modes]") {
  const GridSpec g = small_grid();
  const ComplexField m = make_oam_mode(0, 1.0e-3, g);
  REQUIRE(std::abs(m.power() - 1.0) < 1e-9);
  // Phase flat wherever the envelope carries power.
  const int c = g.n / 2;
  for (int off : {0, 3, 10, 20}) {
    const cplx v = m.at(c, c + off);
    REQUIRE(std::abs(std::arg(v)) < 1e-9);
  }
}

TEST_CASE("unit charge winds by one turn", "[modes]") {
  const GridSpec g = small_grid();
  const ComplexField m = make_oam_mode(1, 1.0e-3, g);
  const double r = 1.0e-3;
  double prev = 0.0, total = 0.0;
  const int steps = 64;
  for (int k = 0; k <= steps; ++k) {
    const double phi = 2.0 * M_PI * k / steps;
    const int col = g.n / 2 + static_cast<int>(std::lround(r * std::cos(phi) / g.pitch));
    const int row = g.n / 2 + static_cast<int>(std::lround(r * std::sin(phi) / g.pitch));
    const double a = std::arg(m.at(row, col));
    if (k > 0) {
      double d = a - prev;
      while (d > M_PI) d -= 2.0 * M_PI;
      while (d < -M_PI) d += 2.0 * M_PI;
      total += d;
    }
    prev = a;
  }
  REQUIRE_THAT(total, Catch::Matchers::WithinAbs(2.0 * M_PI, 0.3));
}

TEST_CASE("opposite charges are orthogonal", "[modes]") {
  const GridSpec g = small_grid();
  const ComplexField p = make_oam_mode(1, 1.0e-3, g);
  const ComplexField n = make_oam_mode(-1, 1.0e-3, g);
  REQUIRE(std::abs(overlap(p, n)) < 1e-8);
}

TEST_CASE("mode construction preconditions", "[modes]") {
  const GridSpec g = small_grid();
  REQUIRE_THROWS_AS(make_oam_mode(17, 1.0e-3, g), std::invalid_argument);
  // w0*sqrt(1+|l|) must stay under a quarter of the side.
  REQUIRE_THROWS_AS(make_oam_mode(3, 1.1e-3, g), std::invalid_argument);
  REQUIRE_NOTHROW(make_oam_mode(3, 0.9e-3, g));
}

TEST_CASE("charge lists per dimension", "[modes]") {
  const GridSpec g = small_grid();
  const ModeBasis even = make_logical_basis(6, 0.8e-3, g);
  REQUIRE(even.ell_list == std::vector<int>{-3, -2, -1, 1, 2, 3});
  const ModeBasis odd = make_logical_basis(5, 0.8e-3, g);
  REQUIRE(odd.ell_list == std::vector<int>{-2, -1, 0, 1, 2});
}

TEST_CASE("logical basis is orthonormal", "[modes]") {
  const GridSpec g = small_grid();
  const ModeBasis b = make_logical_basis(6, 0.8e-3, g);
  for (int i = 0; i < b.d; ++i)
    for (int j = 0; j < b.d; ++j) {
      const cplx ov = overlap(b.modes[i], b.modes[j]);
      const double want = i == j ? 1.0 : 0.0;
      REQUIRE(std::abs(ov - cplx(want, 0.0)) < 1e-6);
    }
}

TEST_CASE("angular basis coefficients follow the Fourier kernel", "[modes]") {
  const GridSpec g = small_grid();
  const int d = 4;
  const ModeBasis logical = make_logical_basis(d, 0.8e-3, g);
  const ModeBasis ang = make_ang_basis(d, 0.8e-3, g);
  REQUIRE(ang.kind == BasisKind::Ang);
  for (int k = 0; k < d; ++k) {
    const std::vector<cplx> a = projection_amplitudes(ang.modes[k], logical);
    for (int j = 0; j < d; ++j) {
      const cplx want = std::polar(1.0 / std::sqrt(double(d)),
                                   2.0 * M_PI * j * k / d);
      // amplitude of charge-ascending mode j inside angular mode k
      REQUIRE(std::abs(a[j] - want) < 1e-6);
    }
  }
}

TEST_CASE("angular basis is orthonormal and rejects odd d", "[modes]") {
  const GridSpec g = small_grid();
  const ModeBasis ang = make_ang_basis(4, 0.8e-3, g);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double want = i == j ? 1.0 : 0.0;
      REQUIRE(std::abs(overlap(ang.modes[i], ang.modes[j]) - cplx(want, 0)) <
              1e-6);
    }
  REQUIRE_THROWS_AS(make_ang_basis(3, 0.8e-3, g), std::invalid_argument);
}

TEST_CASE("two-dimensional angular mode shows two lobes", "[modes]") {
  const GridSpec g = small_grid();
  const ModeBasis ang = make_ang_basis(2, 1.0e-3, g);
  const ComplexField& m = ang.modes[0];
  // Equal superposition of charge -1 and +1: intensity ~ cos^2(phi).
  const ModeBasis logical = make_logical_basis(2, 1.0e-3, g);
  const std::vector<double> p = projective_probability(m, logical);
  REQUIRE_THAT(p[0], Catch::Matchers::WithinAbs(0.5, 1e-6));
  REQUIRE_THAT(p[1], Catch::Matchers::WithinAbs(0.5, 1e-6));
  double imax = 0.0, imin = 1e300;
  const double r = 0.7e-3;
  for (int k = 0; k < 64; ++k) {
    const double phi = 2.0 * M_PI * k / 64;
    const int col = g.n / 2 + static_cast<int>(std::lround(r * std::cos(phi) / g.pitch));
    const int row = g.n / 2 + static_cast<int>(std::lround(r * std::sin(phi) / g.pitch));
    const double I = std::norm(m.at(row, col));
    imax = std::max(imax, I);
    imin = std::min(imin, I);
  }
  REQUIRE(imax > 20.0 * imin);
}

TEST_CASE("duality between charge and angular coordinates", "[modes]") {
  const GridSpec g = small_grid();
  const int d = 6;
  const ModeBasis logical = make_logical_basis(d, 0.8e-3, g);
  const ModeBasis ang = make_ang_basis(d, 0.8e-3, g);
  for (int j0 = 0; j0 < d; ++j0) {
    const std::vector<cplx> c = projection_amplitudes(logical.modes[j0], ang);
    // inverse transform of the angular amplitudes
    for (int j = 0; j < d; ++j) {
      cplx acc = 0.0;
      for (int k = 0; k < d; ++k)
        acc += std::polar(1.0 / std::sqrt(double(d)), 2.0 * M_PI * j * k / d) *
               c[k];
      const double want = j == j0 ? 1.0 : 0.0;
      REQUIRE(std::abs(acc - cplx(want, 0.0)) < 1e-6);
    }
  }
}

TEST_CASE("superposition probabilities stay complete", "[modes]") {
  const GridSpec g = small_grid();
  const int d = 4;
  const ModeBasis logical = make_logical_basis(d, 0.8e-3, g);
  std::vector<cplx> coeffs = {cplx(0.5, 0.0), cplx(0.0, 0.5),
                              cplx(-0.5, 0.0), cplx(0.0, -0.5)};
  const ComplexField f = superpose_state(logical, coeffs);
  const std::vector<double> p = projective_probability(f, logical);
  double sum = 0.0;
  for (double v : p) sum += v;
  REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-6));
  REQUIRE_THAT(p[1], Catch::Matchers::WithinAbs(0.25, 1e-6));
}

TEST_CASE("balanced superposition splits evenly", "[modes]") {
  const GridSpec g = small_grid();
  const ModeBasis b = make_logical_basis(4, 0.8e-3, g);
  const double s = 1.0 / std::sqrt(2.0);
  const ComplexField f =
      superpose_state(b, {cplx(s, 0), cplx(s, 0), cplx(0, 0), cplx(0, 0)});
  const std::vector<double> p = projective_probability(f, b);
  REQUIRE_THAT(p[0], Catch::Matchers::WithinAbs(0.5, 1e-6));
  REQUIRE_THAT(p[1], Catch::Matchers::WithinAbs(0.5, 1e-6));
  REQUIRE(p[2] < 1e-6);
}

TEST_CASE("fiber coupling of matched and orthogonal fields", "[modes]") {
  const GridSpec g = small_grid();
  const ComplexField gauss = make_oam_mode(0, 1.0e-3, g);
  REQUIRE_THAT(fiber_coupling(gauss, 1.0e-3),
               Catch::Matchers::WithinAbs(1.0, 1e-6));
  const ComplexField l1 = make_oam_mode(1, 1.0e-3, g);
  REQUIRE(fiber_coupling(l1, 1.0e-3) < 1e-6);
}

TEST_CASE("fiber coupling under a fixed random aberration", "[modes]") {
  const GridSpec g = small_grid();
  const ComplexField gauss = make_oam_mode(0, 1.0e-3, g);
  // lambda/4 RMS aberration: sigma on a handful of low-order terms
  const std::vector<double> sigma = {0.0, 0.7, 0.7, 0.5, 0.5, 0.5};
  const PhaseScreen scr = gen_screen_zernike(sigma, g, 99, 4.0e-3);
  ComplexField ab = gauss;
  auto& s = ab.samples();
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] *= std::polar(1.0, scr.phase[i]);
  const double eta = fiber_coupling(ab, 1.0e-3);
  REQUIRE(eta < 1.0);
  REQUIRE(eta > 0.0);
  // reproducible under the same seed
  const PhaseScreen scr2 = gen_screen_zernike(sigma, g, 99, 4.0e-3);
  REQUIRE(scr.phase == scr2.phase);
}

TEST_CASE("projection spread matches a finer-grid quadrature", "[modes]") {
  // Tilt-induced neighbor spread computed at twice the resolution (same
  // physical window) must agree, confirming the quadrature has converged.
  const double w0 = 0.8e-3;
  std::vector<double> coarse, fine;
  for (int n : {128, 256}) {
    GridSpec g;
    g.n = n;
    g.pitch = 8.0e-3 / n;
    g.wavelength = 633e-9;
    const ModeBasis b = make_logical_basis(6, w0, g);
    ComplexField f = make_oam_mode(1, w0, g);
    auto& s = f.samples();
    const double tilt = 600.0;  // rad per meter
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        s[static_cast<std::size_t>(r) * n + c] *=
            std::polar(1.0, tilt * g.coord(c));
    const std::vector<double> p = projective_probability(f, b);
    auto& dst = n == 128 ? coarse : fine;
    dst = p;
  }
  for (std::size_t j = 0; j < coarse.size(); ++j)
    REQUIRE_THAT(coarse[j], Catch::Matchers::WithinAbs(fine[j], 1e-3));
}

// ---------------------------------------------------------------------------

TEST_CASE("piston and defocus sample values", "[zernike]") {
  REQUIRE(zernike_eval(1, 0.3, 1.2) == 1.0);
  REQUIRE(zernike_eval(1, 0.9, -2.0) == 1.0);
  // defocus root at rho = 1/sqrt(2)
  REQUIRE(std::abs(zernike_eval(5, 1.0 / std::sqrt(2.0), 0.4)) < 1e-12);
  REQUIRE_THROWS_AS(zernike_eval(0, 0.1, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(zernike_eval(67, 0.1, 0.0), std::invalid_argument);
}

TEST_CASE("low-order names", "[zernike]") {
  REQUIRE(zernike_name(1) == "Piston");
  REQUIRE(zernike_name(5) == "Defocus");
  REQUIRE(zernike_name(4) == "Astigmatism +45d");
  REQUIRE(zernike_name(6) == "Astigmatism 0/90d");
  REQUIRE(zernike_name(8) == "Coma X");
}

TEST_CASE("disk orthonormality by quadrature", "[zernike]") {
  // Simpson radial rule x uniform azimuthal grid; exact to well below the
  // tolerance for polynomials through radial order 10.
  const int nr = 1024;  // Simpson intervals (even)
  const int na = 64;
  const int jmax = kZernikeMaxIndex;
  std::vector<double> gram(static_cast<std::size_t>(jmax) * jmax, 0.0);
  std::vector<double> z(jmax);
  for (int ir = 0; ir <= nr; ++ir) {
    const double rho = static_cast<double>(ir) / nr;
    double wr = (ir == 0 || ir == nr) ? 1.0 : (ir % 2 ? 4.0 : 2.0);
    wr *= 1.0 / (3.0 * nr);
    for (int ia = 0; ia < na; ++ia) {
      const double phi = 2.0 * M_PI * ia / na;
      const double w = wr * (2.0 * M_PI / na) * rho / M_PI;
      for (int j = 1; j <= jmax; ++j) z[j - 1] = zernike_eval(j, rho, phi);
      for (int a = 0; a < jmax; ++a) {
        const double za = z[a] * w;
        for (int b = a; b < jmax; ++b)
          gram[static_cast<std::size_t>(a) * jmax + b] += za * z[b];
      }
    }
  }
  for (int a = 0; a < jmax; ++a)
    for (int b = a; b < jmax; ++b) {
      const double want = a == b ? 1.0 : 0.0;
      REQUIRE_THAT(gram[static_cast<std::size_t>(a) * jmax + b],
                   Catch::Matchers::WithinAbs(want, 1e-6));
    }
}

TEST_CASE("decomposition picks out a planted coefficient", "[zernike]") {
  const GridSpec g = small_grid();
  const double R = 3.0e-3;
  std::vector<double> phase(static_cast<std::size_t>(g.n) * g.n, 0.0);
  for (int r = 0; r < g.n; ++r)
    for (int c = 0; c < g.n; ++c) {
      const double x = g.coord(c), y = g.coord(r);
      const double rho = std::hypot(x, y) / R;
      if (rho <= 1.0)
        phase[static_cast<std::size_t>(r) * g.n + c] =
            0.3 * zernike_eval(4, rho, std::atan2(y, x));
    }
  const ZernikeSpectrum s = zernike_decompose(phase, g, R, 15);
  REQUIRE_THAT(s.a(4), Catch::Matchers::WithinAbs(0.3, 1e-6));
  for (int j = 1; j <= 15; ++j)
    if (j != 4) REQUIRE(std::abs(s.a(j)) < 1e-6);
}

TEST_CASE("reconstruct then decompose is idempotent", "[zernike]") {
  const GridSpec g = small_grid();
  Rng rng(31);
  ZernikeSpectrum s;
  s.aperture_radius = 3.0e-3;
  for (int j = 0; j < 21; ++j) s.coeffs.push_back(rng.normal() * 0.4);
  const std::vector<double> phase = zernike_reconstruct(s, g);
  const ZernikeSpectrum back = zernike_decompose(phase, g, s.aperture_radius, 21);
  for (int j = 1; j <= 21; ++j)
    REQUIRE_THAT(back.a(j), Catch::Matchers::WithinAbs(s.a(j), 1e-8));
}

TEST_CASE("projection never exceeds total power", "[zernike]") {
  const GridSpec g = small_grid();
  const PhaseScreen scr = gen_screen_fft(1.2e-3, g, 7, 6.0e-3);
  const double R = 3.0e-3;
  const ZernikeSpectrum s = zernike_decompose(scr.phase, g, R, kZernikeMaxIndex);
  // mean square of the screen inside the aperture
  double total = 0.0;
  long count = 0;
  for (int r = 0; r < g.n; ++r)
    for (int c = 0; c < g.n; ++c) {
      const double x = g.coord(c), y = g.coord(r);
      if (x * x + y * y <= R * R) {
        total += scr.at(r, c) * scr.at(r, c);
        ++count;
      }
    }
  total /= count;
  double modal = 0.0;
  for (double a : s.coeffs) modal += a * a;
  REQUIRE(modal <= total * (1.0 + 1e-9));
}
