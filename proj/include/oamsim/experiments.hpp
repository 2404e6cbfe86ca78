#pragma once

// Experiment drivers shared by the CLI and the acceptance suite: fiber
// coupling with mid-run AO switch-on, static-screen loop convergence,
// channel process tomography, the crosstalk/QDER sweep, Zernike statistics,
// and Fried-parameter estimation from beam wander.

#include <array>
#include <cstdint>
#include <vector>

#include "oamsim/ao.hpp"
#include "oamsim/config.hpp"
#include "oamsim/modes.hpp"
#include "oamsim/propagation.hpp"
#include "oamsim/qkd.hpp"
#include "oamsim/quantum.hpp"
#include "oamsim/turbulence.hpp"
#include "oamsim/zernike.hpp"

namespace oamsim {

// Free-space transport over any distance: split into steps inside the
// anti-aliasing bound (angular-spectrum steps compose exactly).
inline ComplexField propagate_total(ComplexField field, double z) {
  const double zmax = 0.9 * max_safe_propagation(field.grid());
  double remaining = std::abs(z);
  const double sign = z < 0.0 ? -1.0 : 1.0;
  while (remaining > 0.0) {
    const double step = std::min(remaining, zmax);
    field = propagate_free(field, sign * step);
    remaining -= step;
  }
  return field;
}

inline ModeBasis propagate_basis(const ModeBasis& b, double z) {
  ModeBasis out = b;
  for (ComplexField& m : out.modes) m = propagate_total(m, z);
  return out;
}

inline ComplexField through_screen(const ComplexField& at_screen,
                                   const PhaseScreen& scr, double z_after) {
  return propagate_total(apply_screen(at_screen, scr), z_after);
}

inline ComplexField maybe_aperture(ComplexField field, const RunConfig& cfg) {
  if (cfg.receiver_aperture > 0.0)
    field = apply_circular_aperture(field, cfg.receiver_aperture);
  return field;
}

// The sensing/correction chain shared by every AO experiment: a broad
// reference Gaussian, its turbulence-free receiver rendering (the calibration
// beam and WFS zero point), the subaperture geometry, and a calibrated
// mirror/reconstructor pair used as the per-trial starting state.
struct AoRig {
  ComplexField ref_at_screen;
  ComplexField ref_calib;
  WfsGeometry geom;
  DmModel dm0;
  LoopState loop0;

  AoRig(const RunConfig& cfg, const GridSpec& grid)
      : ref_at_screen(
            propagate_total(make_oam_mode(0, cfg.ref_waist, grid), cfg.z_before)),
        ref_calib(propagate_total(ref_at_screen, cfg.z_after)),
        geom(make_wfs_geometry(ref_calib, cfg.ao_pupil, cfg.wfs_nsub,
                               cfg.wfs_flux_threshold)),
        dm0(grid, cfg.ao_pupil, 0.3, cfg.stroke),
        loop0(calibrate(dm0, geom, ref_calib, cfg.tau)) {
    loop0.gain = cfg.gain;
    loop0.leak = cfg.leak;
    loop0.f_loop = cfg.f_loop;
  }

  void settle(DmModel& dm, LoopState& st, const ComplexField& ref_out,
              int iterations) const {
    for (int i = 0; i < iterations; ++i) loop_update(st, dm, geom, ref_out);
  }
};

// ---------------------------------------------------------------------------
// Fiber-coupling time series (AO switches on mid-run)

struct CouplingResult {
  std::vector<double> t;
  std::vector<double> coupling;
  std::vector<double> residual;  // DM-space residual estimate, rad
  std::vector<int> ao_on;
  double mean_off = 0.0;
  double mean_on = 0.0;
  double greenwood = 0.0;
  bool undersampled = false;
};

inline CouplingResult run_coupling(const RunConfig& cfg) {
  cfg.validate();
  const GridSpec grid = cfg.grid();
  const double dt = 1.0 / cfg.f_loop;
  const int frames = static_cast<int>(std::lround(cfg.duration * cfg.f_loop));
  const int on_frame = static_cast<int>(std::lround(cfg.t_on * cfg.f_loop));

  const ComplexField sig_at_screen =
      propagate_total(make_oam_mode(0, cfg.waist, grid), cfg.z_before);
  // Collection mode: the fiber's Gaussian as delivered by matched optics,
  // i.e. the unaberrated propagation of a fiber-waist beam.  With the default
  // fiber this couples the clean channel at exactly 1.
  const ComplexField fiber_det =
      propagate_total(make_oam_mode(0, cfg.effective_fiber_waist(), grid),
                     cfg.z_before + cfg.z_after);

  CouplingResult res;
  res.t.reserve(frames);
  res.coupling.reserve(frames);
  res.residual.reserve(frames);
  res.ao_on.reserve(frames);

  if (cfg.r0 <= 0.0) {
    for (int i = 0; i < frames; ++i) {
      res.t.push_back(i * dt);
      res.coupling.push_back(1.0);
      res.residual.push_back(0.0);
      res.ao_on.push_back(i >= on_frame ? 1 : 0);
    }
    res.mean_off = res.mean_on = 1.0;
    return res;
  }

  AoRig rig(cfg, grid);
  DmModel dm = rig.dm0;
  LoopState st = rig.loop0;
  TurbulenceSeries series(cfg.r0, grid, cfg.wind_speed, dt,
                          derive_seed(cfg.seed, stream::screens, 0),
                          cfg.ao_pupil);
  res.greenwood = series.greenwood_frequency();
  res.undersampled = loop_undersampled(res.greenwood, cfg.f_loop);

  double sum_off = 0.0, sum_on = 0.0;
  for (int i = 0; i < frames; ++i) {
    const PhaseScreen scr = series.advance();
    const ComplexField ref_out = through_screen(rig.ref_at_screen, scr, cfg.z_after);
    const ComplexField sig_out = through_screen(sig_at_screen, scr, cfg.z_after);
    ComplexField corrected(grid);
    double residual;
    if (i >= on_frame) {
      corrected = loop_step(st, dm, rig.geom, ref_out, sig_out);
      residual = st.residual_rms_history.back();
    } else {
      corrected = sig_out;  // mirror at rest
      residual = slope_residual(st, rig.geom, ref_out);
    }
    corrected = maybe_aperture(std::move(corrected), cfg);
    const double eta = std::norm(overlap(fiber_det, corrected));
    res.t.push_back(i * dt);
    res.coupling.push_back(eta);
    res.residual.push_back(residual);
    res.ao_on.push_back(i >= on_frame ? 1 : 0);
    (i >= on_frame ? sum_on : sum_off) += eta;
  }
  res.mean_off = on_frame > 0 ? sum_off / on_frame : 0.0;
  res.mean_on = frames > on_frame ? sum_on / (frames - on_frame) : 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// Static-screen convergence

struct StaticAoResult {
  std::vector<double> residual_rms;  // piston-removed pupil RMS per frame, rad
  double initial_rms = 0.0;
  double converged_rms = 0.0;
  double fit_floor = 0.0;  // least-squares projection of the screen onto the
                           // mirror's influence basis
  int retained_modes = 0;
};

// Piston-removed RMS of (phase - surface) over the centered pupil disk.
inline double pupil_residual_rms(const std::vector<double>& phase,
                                 const std::vector<double>& surface,
                                 const GridSpec& grid, double pupil_diameter) {
  const double r2max = 0.25 * pupil_diameter * pupil_diameter;
  double sum = 0.0, sum2 = 0.0;
  long count = 0;
  for (int r = 0; r < grid.n; ++r) {
    const double y = grid.coord(r);
    for (int c = 0; c < grid.n; ++c) {
      const double x = grid.coord(c);
      if (x * x + y * y > r2max) continue;
      const double v = phase[static_cast<std::size_t>(r) * grid.n + c] -
                       surface[static_cast<std::size_t>(r) * grid.n + c];
      sum += v;
      sum2 += v * v;
      ++count;
    }
  }
  const double mean = sum / count;
  return std::sqrt(std::max(sum2 / count - mean * mean, 0.0));
}

// Unweighted least-squares fit of the screen onto the 97 influence functions
// over the pupil; the residual RMS is the mirror's fitting-error floor.
inline double dm_fit_floor(const PhaseScreen& scr, const DmModel& dm) {
  const GridSpec& g = scr.grid;
  const double r2max = 0.25 * dm.pupil_diameter() * dm.pupil_diameter();
  std::vector<double> phi;
  std::vector<std::pair<double, double>> xy;
  for (int r = 0; r < g.n; ++r) {
    const double y = g.coord(r);
    for (int c = 0; c < g.n; ++c) {
      const double x = g.coord(c);
      if (x * x + y * y > r2max) continue;
      phi.push_back(scr.at(r, c));
      xy.emplace_back(x, y);
    }
  }
  const int npix = static_cast<int>(phi.size());
  Eigen::MatrixXd B(npix, 97);
  for (int p = 0; p < npix; ++p)
    for (int a = 0; a < 97; ++a)
      B(p, a) = dm.influence(a, xy[p].first, xy[p].second);
  const Eigen::Map<const Eigen::VectorXd> f(phi.data(), npix);
  const Eigen::VectorXd c = (B.transpose() * B)
                                .ldlt()
                                .solve(B.transpose() * f);
  Eigen::VectorXd resid = f - B * c;
  resid.array() -= resid.mean();
  return std::sqrt(resid.squaredNorm() / npix);
}

inline StaticAoResult run_static_ao(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.r0 <= 0.0)
    throw std::invalid_argument("static ao: r0 must be > 0");
  const GridSpec grid = cfg.grid();
  const ComplexField ref0 = make_oam_mode(0, cfg.ref_waist, grid);
  const WfsGeometry geom = make_wfs_geometry(ref0, cfg.ao_pupil, cfg.wfs_nsub,
                                             cfg.wfs_flux_threshold);
  DmModel dm(grid, cfg.ao_pupil, 0.3, cfg.stroke);
  LoopState st = calibrate(dm, geom, ref0, cfg.tau);
  st.gain = cfg.gain;
  st.leak = cfg.leak;

  const PhaseScreen scr = gen_screen_fft(
      cfg.r0, grid, derive_seed(cfg.seed, stream::screens, 0), cfg.ao_pupil);
  const ComplexField ref_ab = apply_screen(ref0, scr);

  StaticAoResult res;
  res.retained_modes = st.retained_modes;
  res.initial_rms = pupil_residual_rms(
      scr.phase, std::vector<double>(scr.phase.size(), 0.0), grid,
      cfg.ao_pupil);
  res.fit_floor = dm_fit_floor(scr, dm);
  res.residual_rms.reserve(cfg.settle_iterations);
  for (int i = 0; i < cfg.settle_iterations; ++i) {
    loop_update(st, dm, geom, ref_ab);
    res.residual_rms.push_back(
        pupil_residual_rms(scr.phase, dm.surface(), grid, cfg.ao_pupil));
  }
  res.converged_rms = res.residual_rms.back();
  return res;
}

// ---------------------------------------------------------------------------
// Process tomography

struct TomoCondition {
  bool turbulence = false;
  bool ao = false;
  double fidelity = 0.0;
  ProcessMatrix chi;
};

struct TomoResult {
  int d = 0;
  std::array<TomoCondition, 4> conditions;  // (turb, ao) in row-major order

  const TomoCondition& condition(bool turbulence, bool ao) const {
    return conditions[(turbulence ? 2 : 0) + (ao ? 1 : 0)];
  }
};

inline TomoResult run_tomography(const RunConfig& cfg) {
  cfg.validate();
  const int d = cfg.tomo_d;
  const GridSpec grid = cfg.grid();
  const MubSet mubs = build_mub_set(d);
  const GellMannBasis gm = make_gell_mann(d);
  const ProcessMatrix ideal = chi_identity(d);

  const ModeBasis basis0 = make_logical_basis(d, cfg.waist, grid);
  const ModeBasis tx = propagate_basis(basis0, cfg.z_before);
  const std::vector<ComplexField> det =
      propagate_basis(basis0, cfg.z_before + cfg.z_after).modes;
  AoRig rig(cfg, grid);

  TomoResult res;
  res.d = d;
  int slot = 0;
  for (bool turb : {false, true}) {
    for (bool ao : {false, true}) {
      ProbTable table;
      if (!turb) {
        DmModel dm = rig.dm0;
        LoopState st = rig.loop0;
        if (ao) rig.settle(dm, st, rig.ref_calib, cfg.settle_iterations);
        auto chan = [&](const ComplexField& f) {
          ComplexField out = propagate_total(f, cfg.z_after);
          if (ao) out = dm.apply(out);
          return maybe_aperture(std::move(out), cfg);
        };
        table = channel_from_simulation(mubs, tx, det, chan);
      } else {
        std::vector<ProbTable> tables;
        tables.reserve(cfg.ensemble);
        for (int k = 0; k < cfg.ensemble; ++k) {
          const PhaseScreen scr =
              gen_screen_fft(cfg.r0, grid,
                             derive_seed(cfg.seed, stream::screens, k),
                             cfg.ao_pupil);
          DmModel dm = rig.dm0;
          LoopState st = rig.loop0;
          if (ao) {
            const ComplexField ref_out =
                through_screen(rig.ref_at_screen, scr, cfg.z_after);
            rig.settle(dm, st, ref_out, cfg.settle_iterations);
          }
          auto chan = [&](const ComplexField& f) {
            ComplexField out = through_screen(f, scr, cfg.z_after);
            if (ao) out = dm.apply(out);
            return maybe_aperture(std::move(out), cfg);
          };
          tables.push_back(channel_from_simulation(mubs, tx, det, chan));
        }
        table = average_tables(tables);
      }
      TomoCondition& cond = res.conditions[slot++];
      cond.turbulence = turb;
      cond.ao = ao;
      cond.chi = reconstruct_chi(table, mubs, gm);
      cond.fidelity = process_fidelity(cond.chi, ideal);
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Crosstalk / QDER sweep

struct QkdPoint {
  int d = 0;
  CrosstalkMatrix logical_off, logical_on, ang_off, ang_on;
  QkdReport off, on;
};

struct QkdSweepResult {
  GridSpec grid;
  std::vector<QkdPoint> points;
};

// Grid for the sweep: when no pitch is configured, widen the window until the
// largest |ell| mode fits the mode-size preconditions.
inline GridSpec qkd_grid(const RunConfig& cfg) {
  GridSpec g = cfg.grid();
  if (cfg.pitch > 0.0) return g;
  int lmax = 1;
  for (int d : cfg.qkd_dims) lmax = std::max(lmax, d / 2);
  const double side_needed = 4.4 * cfg.waist * std::sqrt(1.0 + lmax);
  if (side_needed > g.side()) g.pitch = side_needed / g.n;
  return g;
}

inline QkdSweepResult run_qkd(const RunConfig& cfg) {
  cfg.validate();
  QkdSweepResult res;
  res.grid = qkd_grid(cfg);
  const GridSpec& grid = res.grid;
  AoRig rig(cfg, grid);

  // One screen set and one converged mirror state per trial, shared by every
  // dimension and basis.
  struct TrialState {
    PhaseScreen scr;
    std::vector<double> commands;
  };
  std::vector<TrialState> trial_states;
  trial_states.reserve(cfg.trials);
  for (int t = 0; t < cfg.trials; ++t) {
    TrialState ts;
    ts.scr = gen_screen_fft(cfg.r0, grid,
                            derive_seed(cfg.seed, stream::trials, t),
                            cfg.ao_pupil);
    DmModel dm = rig.dm0;
    LoopState st = rig.loop0;
    const ComplexField ref_out =
        through_screen(rig.ref_at_screen, ts.scr, cfg.z_after);
    rig.settle(dm, st, ref_out, cfg.settle_iterations);
    ts.commands = dm.commands();
    trial_states.push_back(std::move(ts));
  }

  for (int d : cfg.qkd_dims) {
    const ModeBasis basis0 = make_logical_basis(d, cfg.waist, grid);
    const ModeBasis tx_log = propagate_basis(basis0, cfg.z_before);
    const ModeBasis tx_ang = make_ang_basis(tx_log);
    const ModeBasis det_basis =
        propagate_basis(basis0, cfg.z_before + cfg.z_after);
    const std::vector<ComplexField> det_log = det_basis.modes;
    const std::vector<ComplexField> det_ang = make_ang_basis(det_basis).modes;

    DmModel dm_work = rig.dm0;
    int loaded_trial = -1;
    auto chan = [&](bool ao) {
      return std::function<ComplexField(const ComplexField&, int)>(
          [&, ao](const ComplexField& f, int t) {
            const TrialState& ts = trial_states[t];
            ComplexField out = through_screen(f, ts.scr, cfg.z_after);
            if (ao) {
              if (loaded_trial != t) {
                dm_work.set_commands(ts.commands);
                loaded_trial = t;
              }
              out = dm_work.apply(out);
            }
            return maybe_aperture(std::move(out), cfg);
          });
    };

    QkdPoint pt;
    pt.d = d;
    pt.logical_off = crosstalk(tx_log, chan(false), det_log, cfg.trials);
    pt.ang_off = crosstalk(tx_ang, chan(false), det_ang, cfg.trials);
    loaded_trial = -1;
    pt.logical_on = crosstalk(tx_log, chan(true), det_log, cfg.trials);
    loaded_trial = -1;
    pt.ang_on = crosstalk(tx_ang, chan(true), det_ang, cfg.trials);
    pt.off = make_qkd_report(pt.logical_off, pt.ang_off);
    pt.on = make_qkd_report(pt.logical_on, pt.ang_on);
    res.points.push_back(std::move(pt));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Zernike statistics

struct ZernikeStatsResult {
  std::vector<std::string> names;        // per index, 1-based ANSI order
  std::vector<double> run_sigma;         // configured generator
  std::vector<int> sweep_settings;       // 0..3
  std::vector<std::vector<double>> sweep_sigma;  // [setting][j-1]
};

namespace detail {

inline std::vector<double> screen_sigma_over_trials(
    const RunConfig& cfg, const GridSpec& grid, bool use_sigma_list,
    double r0) {
  std::vector<std::vector<double>> coeffs(
      kZernikeMaxIndex, std::vector<double>(cfg.trials, 0.0));
  for (int t = 0; t < cfg.trials; ++t) {
    const std::uint64_t seed = derive_seed(cfg.seed, stream::aberrations, t);
    const PhaseScreen scr =
        use_sigma_list
            ? gen_screen_zernike(cfg.zernike_sigma, grid, seed, cfg.ao_pupil)
            : gen_screen_fft(r0, grid, seed, cfg.ao_pupil);
    const ZernikeSpectrum spec = zernike_decompose(
        scr.phase, grid, 0.5 * cfg.ao_pupil, kZernikeMaxIndex);
    for (int j = 1; j <= kZernikeMaxIndex; ++j)
      coeffs[j - 1][t] = spec.a(j);
  }
  std::vector<double> sigma(kZernikeMaxIndex, 0.0);
  if (cfg.trials < 2) return sigma;
  for (int j = 0; j < kZernikeMaxIndex; ++j) {
    double mean = 0.0;
    for (double v : coeffs[j]) mean += v;
    mean /= cfg.trials;
    double var = 0.0;
    for (double v : coeffs[j]) var += (v - mean) * (v - mean);
    sigma[j] = std::sqrt(var / (cfg.trials - 1));
  }
  return sigma;
}

}  // namespace detail

// Per-index scatter of Zernike coefficients over the screen ensemble, for the
// configured generator and for a four-step turbulence-strength sweep
// (setting 0 = off, then r0 scaled by 2, 1, 1/2).
inline ZernikeStatsResult run_zernike_stats(const RunConfig& cfg) {
  cfg.validate();
  const GridSpec grid = cfg.grid();
  ZernikeStatsResult res;
  for (int j = 1; j <= kZernikeMaxIndex; ++j)
    res.names.push_back(zernike_name(j));
  const bool use_list = !cfg.zernike_sigma.empty();
  if (!use_list && cfg.r0 <= 0.0)
    throw std::invalid_argument("zernike stats: need r0 > 0 or a sigma list");
  res.run_sigma =
      detail::screen_sigma_over_trials(cfg, grid, use_list, cfg.r0);
  const std::array<double, 4> scale = {0.0, 2.0, 1.0, 0.5};
  for (int s = 0; s < 4; ++s) {
    res.sweep_settings.push_back(s);
    if (s == 0 || cfg.r0 <= 0.0) {
      res.sweep_sigma.emplace_back(kZernikeMaxIndex, 0.0);
      continue;
    }
    res.sweep_sigma.push_back(detail::screen_sigma_over_trials(
        cfg, grid, false, cfg.r0 * scale[s]));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Fried estimation from beam wander

struct FriedResult {
  double r0_est = 0.0;
  double d_over_r0 = 0.0;
  double s_mean = 0.0;  // mean centroid displacement, m
  int frames = 0;
};

inline FriedResult run_fried(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.r0 <= 0.0) throw std::invalid_argument("fried: r0 must be > 0");
  const GridSpec grid = cfg.grid();
  const ComplexField sig_at_screen =
      propagate_total(make_oam_mode(0, cfg.waist, grid), cfg.z_before);
  std::vector<std::pair<double, double>> displacements;
  displacements.reserve(cfg.trials);
  double s_sum = 0.0;
  for (int k = 0; k < cfg.trials; ++k) {
    const PhaseScreen scr = gen_screen_fft(
        cfg.r0, grid, derive_seed(cfg.seed, stream::screens, k));
    const ComplexField out = through_screen(sig_at_screen, scr, cfg.z_after);
    double cx = 0.0, cy = 0.0;
    out.centroid(cx, cy);
    displacements.emplace_back(cx, cy);
    s_sum += std::hypot(cx, cy);
  }
  FriedResult res;
  res.frames = cfg.trials;
  res.s_mean = s_sum / cfg.trials;
  res.r0_est =
      estimate_fried(displacements, cfg.cell_length, cfg.wavelength);
  res.d_over_r0 = 2.0 * cfg.waist / res.r0_est;
  return res;
}

}  // namespace oamsim
