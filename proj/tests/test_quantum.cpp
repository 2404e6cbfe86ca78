#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "oamsim/experiments.hpp"
#include "oamsim/modes.hpp"
#include "oamsim/qkd.hpp"
#include "oamsim/quantum.hpp"
#include "oamsim/rng.hpp"

using namespace oamsim;
using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// [mub]

TEST_CASE("mub sets are complete and unbiased", "[mub]") {
  for (int d : {2, 3, 4, 5}) {
    const MubSet set = build_mub_set(d);
    REQUIRE(set.d == d);
    REQUIRE(set.basis_count() == d + 1);
    const double invd = 1.0 / d;
    for (int a = 0; a < set.basis_count(); ++a) {
      for (int b = 0; b < set.basis_count(); ++b) {
        for (int s = 0; s < d; ++s) {
          for (int t = 0; t < d; ++t) {
            const double p = std::norm(
                cplx(set.vec(a, s).dot(set.vec(b, t))));
            const double want = a == b ? (s == t ? 1.0 : 0.0) : invd;
            REQUIRE(p == Catch::Approx(want).margin(1e-12));
          }
        }
      }
    }
  }
}

TEST_CASE("the canonical basis leads each set", "[mub]") {
  for (int d : {2, 3, 5}) {
    const MubSet set = build_mub_set(d);
    REQUIRE((set.bases[0] - Eigen::MatrixXcd::Identity(d, d)).norm() < 1e-15);
  }
}

TEST_CASE("composite dimensions are rejected", "[mub]") {
  REQUIRE_THROWS_AS(build_mubs(6), std::invalid_argument);
  REQUIRE_THROWS_AS(build_mubs(4), std::invalid_argument);
  REQUIRE_THROWS_AS(build_mub_set(6), std::invalid_argument);
}

TEST_CASE("dimension four uses the tabulated construction", "[mub]") {
  const MubSet set = build_mub_set(4);
  REQUIRE(set.basis_count() == 5);
  const Eigen::VectorXcd v = set.vec(1, 0);
  for (int j = 0; j < 4; ++j)
    REQUIRE(std::abs(v(j) - cplx(0.5, 0.0)) < 1e-12);
}

TEST_CASE("the operator basis is trace-orthonormal", "[mub]") {
  for (int d : {2, 3, 4, 5}) {
    const GellMannBasis gm = make_gell_mann(d);
    const int D = d * d;
    REQUIRE(static_cast<int>(gm.sigma.size()) == D);
    for (int a = 0; a < D; ++a) {
      REQUIRE((gm.sigma[a] - gm.sigma[a].adjoint()).norm() < 1e-15);
      for (int b = 0; b < D; ++b) {
        const cplx tr = (gm.sigma[a].adjoint() * gm.sigma[b]).trace();
        REQUIRE(std::abs(tr - (a == b ? 1.0 : 0.0)) < 1e-12);
      }
    }
    Eigen::MatrixXcd completeness = Eigen::MatrixXcd::Zero(d, d);
    for (const auto& s : gm.sigma) completeness += s.adjoint() * s;
    REQUIRE((completeness - static_cast<double>(d) *
                                Eigen::MatrixXcd::Identity(d, d))
                .norm() < 1e-12);
  }
}

// ---------------------------------------------------------------------------
// [chi]

TEST_CASE("identity and depolarizing channels act as advertised", "[chi]") {
  Rng rng(101);
  for (int d : {2, 3, 4}) {
    const GellMannBasis gm = make_gell_mann(d);
    const Eigen::MatrixXcd rho = random_density_matrix(d, rng);

    const Eigen::MatrixXcd same = apply_channel(chi_identity(d), rho, gm);
    REQUIRE((same - rho).norm() < 1e-12);

    const double p = 0.37;
    const Eigen::MatrixXcd mixed =
        apply_channel(chi_depolarizing(d, p), rho, gm);
    const Eigen::MatrixXcd want =
        (1.0 - p) * rho +
        (p / d) * Eigen::MatrixXcd::Identity(d, d);
    REQUIRE((mixed - want).norm() < 1e-10);
  }
}

TEST_CASE("unitary channels conjugate the state", "[chi]") {
  Rng rng(102);
  for (int d : {2, 3, 4}) {
    const GellMannBasis gm = make_gell_mann(d);
    const Eigen::MatrixXcd U = random_unitary(d, rng);
    const Eigen::MatrixXcd rho = random_density_matrix(d, rng);
    const ProcessMatrix chi = chi_of_unitary(U, gm);
    REQUIRE(std::abs(chi.chi.trace() - cplx(1.0)) < 1e-10);
    const Eigen::MatrixXcd out = apply_channel(chi, rho, gm);
    REQUIRE((out - U * rho * U.adjoint()).norm() < 1e-10);
  }
}

TEST_CASE("channels preserve the trace", "[chi]") {
  Rng rng(103);
  const int d = 3;
  const GellMannBasis gm = make_gell_mann(d);
  const ProcessMatrix chi = chi_of_unitary(random_unitary(d, rng), gm);
  const ProcessMatrix dep = chi_depolarizing(d, 0.6);
  for (int k = 0; k < 20; ++k) {
    const Eigen::MatrixXcd rho = random_density_matrix(d, rng);
    REQUIRE(std::abs(apply_channel(chi, rho, gm).trace() - cplx(1.0)) < 1e-10);
    REQUIRE(std::abs(apply_channel(dep, rho, gm).trace() - cplx(1.0)) < 1e-10);
  }
}

TEST_CASE("tomography round-trips random unitaries", "[chi]") {
  Rng rng(104);
  for (int d : {2, 3, 4, 5}) {
    const GellMannBasis gm = make_gell_mann(d);
    const MubSet mubs = build_mub_set(d);
    for (int k = 0; k < 2; ++k) {
      const ProcessMatrix truth = chi_of_unitary(random_unitary(d, rng), gm);
      const ProbTable tab = synth_table(truth, mubs, gm);
      const ProcessMatrix rec = reconstruct_chi(tab, mubs, gm);
      REQUIRE((rec.chi - truth.chi).norm() < 1e-6);
      REQUIRE(process_fidelity(rec, truth) > 1.0 - 1e-6);
    }
  }
}

TEST_CASE("full depolarization reconstructs at fidelity 1/d^2", "[chi]") {
  const int d = 3;
  const GellMannBasis gm = make_gell_mann(d);
  const MubSet mubs = build_mub_set(d);
  const ProbTable tab = synth_table(chi_depolarizing(d, 1.0), mubs, gm);
  const ProcessMatrix rec = reconstruct_chi(tab, mubs, gm);
  REQUIRE(process_fidelity(rec, chi_identity(d)) ==
          Catch::Approx(1.0 / (d * d)).margin(1e-3));
}

TEST_CASE("fidelity to identity decays monotonically with noise", "[chi]") {
  const int d = 4;
  const ProcessMatrix id = chi_identity(d);
  double prev = 2.0;
  for (int k = 0; k < 10; ++k) {
    const double p = k / 9.0;
    const double f = process_fidelity(chi_depolarizing(d, p), id);
    REQUIRE(f < prev);
    prev = f;
  }
  REQUIRE(process_fidelity(chi_depolarizing(d, 1.0), id) ==
          Catch::Approx(1.0 / (d * d)).margin(1e-12));
}

TEST_CASE("process fidelity is symmetric and bounded", "[chi]") {
  Rng rng(105);
  const int d = 3;
  const GellMannBasis gm = make_gell_mann(d);
  const ProcessMatrix a = chi_of_unitary(random_unitary(d, rng), gm);
  const ProcessMatrix b = chi_depolarizing(d, 0.4);
  const double fab = process_fidelity(a, b);
  const double fba = process_fidelity(b, a);
  REQUIRE(fab == Catch::Approx(fba).margin(1e-9));
  REQUIRE(fab >= 0.0);
  REQUIRE(fab <= 1.0);
  REQUIRE(process_fidelity(a, a) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("a clean optical channel reconstructs the identity", "[chi]") {
  const int d = 3;
  GridSpec g;
  g.n = 128;
  g.pitch = 8e-3 / g.n;
  g.wavelength = 633e-9;
  const GellMannBasis gm = make_gell_mann(d);
  const MubSet mubs = build_mub_set(d);
  const ModeBasis basis = make_logical_basis(d, 1e-3, g);
  const ProbTable tab = channel_from_simulation(
      mubs, basis, basis.modes, [](const ComplexField& f) { return f; });
  const ProcessMatrix rec = reconstruct_chi(tab, mubs, gm);
  REQUIRE(process_fidelity(rec, chi_identity(d)) > 0.999);
}

// ---------------------------------------------------------------------------
// [qkd]

namespace {

double threshold_by_bisection(int d) {
  auto rate = [&](double q) {
    const double h =
        q == 0.0 ? 0.0
                 : -q * std::log2(q / (d - 1)) - (1.0 - q) * std::log2(1.0 - q);
    return std::log2(static_cast<double>(d)) - 2.0 * h;
  };
  double lo = 0.0, hi = 1.0 - 1.0 / d;
  for (int k = 0; k < 60; ++k) {
    const double mid = 0.5 * (lo + hi);
    (rate(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("error thresholds grow with dimension", "[qkd]") {
  const std::vector<std::pair<int, double>> table = {
      {2, 0.110}, {4, 0.189}, {6, 0.225}, {8, 0.247}, {10, 0.262}};
  for (const auto& [d, want] : table) {
    const double got = qder_threshold(d);
    REQUIRE(got == Catch::Approx(want).margin(5e-4));
    REQUIRE(got == Catch::Approx(threshold_by_bisection(d)).margin(1e-8));
    REQUIRE(std::abs(key_rate(got, d)) < 1e-6);
  }
}

TEST_CASE("key rate starts at log2 d and rejects bad inputs", "[qkd]") {
  REQUIRE(key_rate(0.0, 4) == Catch::Approx(2.0).margin(1e-15));
  REQUIRE(dit_entropy(0.0, 4) == 0.0);
  REQUIRE_THROWS_AS(key_rate(-0.1, 4), std::invalid_argument);
  REQUIRE_THROWS_AS(key_rate(1.0, 4), std::invalid_argument);
  REQUIRE_THROWS_AS(key_rate(0.1, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(qder_threshold(1), std::invalid_argument);
}

TEST_CASE("an identity channel yields a diagonal crosstalk matrix", "[qkd]") {
  GridSpec g;
  g.n = 128;
  g.pitch = 8e-3 / g.n;
  g.wavelength = 633e-9;
  const ModeBasis basis = make_logical_basis(4, 0.8e-3, g);
  const CrosstalkMatrix c = crosstalk(
      basis, [](const ComplexField& f, int) { return f; }, basis.modes, 2);
  REQUIRE(c.d == 4);
  REQUIRE(c.trials == 2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      REQUIRE(c.C(i, j) == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-6));
      REQUIRE(c.std_err(i, j) < 1e-12);
    }
  REQUIRE(qder(c) == Catch::Approx(0.0).margin(1e-6));
}

TEST_CASE("a mode-space rotation shows the analytic crosstalk", "[qkd]") {
  GridSpec g;
  g.n = 128;
  g.pitch = 8e-3 / g.n;
  g.wavelength = 633e-9;
  const ModeBasis basis = make_logical_basis(2, 0.8e-3, g);
  const double th = 0.3;
  auto rotate = [&](const ComplexField& f, int) {
    const std::vector<cplx> a = projection_amplitudes(f, basis);
    const std::vector<cplx> mixed = {
        std::cos(th) * a[0] - std::sin(th) * a[1],
        std::sin(th) * a[0] + std::cos(th) * a[1]};
    return superpose_state(basis, mixed);
  };
  const CrosstalkMatrix c = crosstalk(basis, rotate, basis.modes, 1);
  const double s2 = std::sin(th) * std::sin(th);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      REQUIRE(c.C(i, j) ==
              Catch::Approx(i == j ? 1.0 - s2 : s2).margin(1e-6));
  REQUIRE(qder(c) == Catch::Approx(s2).margin(1e-6));
}

TEST_CASE("a uniform scrambler saturates the error rate", "[qkd]") {
  GridSpec g;
  g.n = 128;
  g.pitch = 8e-3 / g.n;
  g.wavelength = 633e-9;
  const int d = 4;
  const ModeBasis basis = make_logical_basis(d, 0.8e-3, g);
  const std::vector<cplx> flat(d, cplx(1.0 / std::sqrt(double(d)), 0.0));
  auto scramble = [&](const ComplexField&, int) {
    return superpose_state(basis, flat);
  };
  const CrosstalkMatrix c = crosstalk(basis, scramble, basis.modes, 1);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      REQUIRE(c.C(i, j) == Catch::Approx(1.0 / d).margin(1e-6));
  REQUIRE(qder(c) == Catch::Approx(double(d - 1) / d).margin(1e-6));
}

TEST_CASE("ensemble scatter follows the welford rule", "[qkd]") {
  GridSpec g;
  g.n = 128;
  g.pitch = 8e-3 / g.n;
  g.wavelength = 633e-9;
  const ModeBasis basis = make_logical_basis(2, 0.8e-3, g);
  // Alternate identity and swap; diagonal entries are 1,0,1,0.
  auto chan = [&](const ComplexField& f, int t) {
    if (t % 2 == 0) return f;
    const std::vector<cplx> a = projection_amplitudes(f, basis);
    return superpose_state(basis, {a[1], a[0]});
  };
  const CrosstalkMatrix c = crosstalk(basis, chan, basis.modes, 4);
  REQUIRE(c.C(0, 0) == Catch::Approx(0.5).margin(1e-6));
  REQUIRE(c.std_err(0, 0) == Catch::Approx(std::sqrt(1.0 / 12.0)).margin(1e-6));
}

TEST_CASE("reports aggregate both bases", "[qkd]") {
  GridSpec g;
  g.n = 128;
  g.pitch = 8e-3 / g.n;
  g.wavelength = 633e-9;
  const int d = 4;
  const ModeBasis logical = make_logical_basis(d, 0.8e-3, g);
  const ModeBasis ang = make_ang_basis(d, 0.8e-3, g);
  auto id = [](const ComplexField& f, int) { return f; };
  const CrosstalkMatrix cl = crosstalk(logical, id, logical.modes, 2);
  const CrosstalkMatrix ca = crosstalk(ang, id, ang.modes, 2);
  const QkdReport rep = make_qkd_report(cl, ca);
  REQUIRE(rep.d == d);
  REQUIRE(rep.threshold == Catch::Approx(qder_threshold(d)).margin(1e-12));
  REQUIRE(rep.logical.secure);
  REQUIRE(rep.ang.secure);
  REQUIRE(rep.secure);
  REQUIRE(rep.logical.key_rate == Catch::Approx(2.0).margin(1e-3));
  REQUIRE(rep.average_qder ==
          Catch::Approx(0.5 * (rep.logical.qder + rep.ang.qder)).margin(1e-15));

  const CrosstalkMatrix bad = crosstalk(
      make_logical_basis(2, 0.8e-3, g), id,
      make_logical_basis(2, 0.8e-3, g).modes, 1);
  REQUIRE_THROWS_AS(make_qkd_report(cl, bad), std::invalid_argument);
}

TEST_CASE("crosstalk guards its inputs", "[qkd]") {
  GridSpec g;
  g.n = 128;
  g.pitch = 8e-3 / g.n;
  g.wavelength = 633e-9;
  const ModeBasis basis = make_logical_basis(2, 0.8e-3, g);
  auto id = [](const ComplexField& f, int) { return f; };
  REQUIRE_THROWS_AS(crosstalk(basis, id, basis.modes, 0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(
      crosstalk(basis, id, std::vector<ComplexField>{basis.modes[0]}, 1),
      std::invalid_argument);
}

TEST_CASE("correction lowers every error rate and favors the logical basis",
          "[qkd]") {
  RunConfig cfg;
  cfg.trials = 12;
  cfg.qkd_dims = {4, 10};
  cfg.seed = 4242;
  cfg.receiver_aperture = 2.0e-3;
  const QkdSweepResult qr = run_qkd(cfg);

  double drop = 0.0;
  int cases = 0;
  for (const QkdPoint& pt : qr.points) {
    REQUIRE(pt.on.logical.qder < pt.off.logical.qder);
    REQUIRE(pt.on.ang.qder < pt.off.ang.qder);
    drop += (pt.off.logical.qder - pt.on.logical.qder) +
            (pt.off.ang.qder - pt.on.ang.qder);
    cases += 2;
  }
  drop /= cases;
  REQUIRE(drop > 0.20);
  REQUIRE(drop < 0.45);

  const QkdPoint& ten = qr.points.back();
  REQUIRE(ten.d == 10);
  const double gain_log = ten.off.logical.qder - ten.on.logical.qder;
  const double gain_ang = ten.off.ang.qder - ten.on.ang.qder;
  REQUIRE(gain_log > gain_ang);
}

TEST_CASE("corrected d4 logical errors are small but nonzero", "[qkd]") {
  RunConfig cfg;
  cfg.trials = 12;
  cfg.qkd_dims = {4};
  cfg.seed = 777;
  cfg.ao_pupil = 6e-3;
  cfg.receiver_aperture = 2.8e-3;
  // Run on the grid the full sweep would use, so the d=4 figures match it.
  RunConfig wide = cfg;
  wide.qkd_dims = {4, 10};
  cfg.pitch = qkd_grid(wide).pitch;
  const QkdSweepResult qr = run_qkd(cfg);

  const QkdPoint& pt = qr.points.front();
  REQUIRE(pt.off.logical.qder > pt.off.threshold);
  REQUIRE(pt.on.logical.qder > 0.013);
  REQUIRE(pt.on.logical.qder < 0.095);
}

TEST_CASE("a hard mask confines spreading to neighboring charges", "[qkd]") {
  RunConfig cfg;
  cfg.qkd_dims = {4};
  cfg.receiver_aperture = 2.0e-3;
  const GridSpec grid = qkd_grid(cfg);
  const int d = 4;
  const ModeBasis basis0 = make_logical_basis(d, cfg.waist, grid);
  const ModeBasis tx = propagate_basis(basis0, cfg.z_before);
  const ModeBasis det = propagate_basis(basis0, cfg.z_before + cfg.z_after);

  const int trials = 40;
  std::vector<PhaseScreen> screens;
  screens.reserve(trials);
  for (int t = 0; t < trials; ++t)
    screens.push_back(gen_screen_fft(cfg.r0, grid,
                                     derive_seed(987654, stream::trials, t),
                                     cfg.ao_pupil));
  auto chan = [&](const ComplexField& f, int t) {
    return maybe_aperture(through_screen(f, screens[t], cfg.z_after), cfg);
  };
  const CrosstalkMatrix c = crosstalk(tx, chan, det.modes, trials);

  // Mean coupling per charge distance, and the block split between
  // positive and negative charges.
  double sum[5] = {};
  int cnt[5] = {};
  double cross = 0.0, adjacent = 0.0;
  int ncross = 0, nadjacent = 0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      const int dl = std::abs(basis0.ell_list[i] - basis0.ell_list[j]);
      sum[dl] += c.C(i, j);
      ++cnt[dl];
      if ((basis0.ell_list[i] > 0) != (basis0.ell_list[j] > 0)) {
        cross += c.C(i, j);
        ++ncross;
      } else {
        adjacent += c.C(i, j);
        ++nadjacent;
      }
    }
  const double m1 = sum[1] / cnt[1];
  const double m2 = sum[2] / cnt[2];
  const double m3 = sum[3] / cnt[3];
  const double m4 = sum[4] / cnt[4];
  REQUIRE(m1 > m2);
  REQUIRE(m2 > m3);
  REQUIRE(m3 > m4);
  REQUIRE(m4 < 0.10);
  REQUIRE(cross / ncross < 0.6 * adjacent / nadjacent);
}
