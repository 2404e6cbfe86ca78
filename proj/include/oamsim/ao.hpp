#pragma once

// Closed-loop adaptive optics: Shack-Hartmann wavefront sensing on a broad
// reference beam, a 97-actuator deformable mirror with Gaussian influence
// functions, truncated-SVD reconstructor calibration, and a leaky-integrator
// controller.  The same correction surface is applied to reference and signal
// (common path).

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "oamsim/field.hpp"

namespace oamsim {

// ---------------------------------------------------------------------------
// Wavefront sensor

struct WfsGeometry {
  GridSpec grid;
  double pupil_diameter = 0.0;
  int nsub = 16;  // subapertures per side across the pupil
  std::vector<int> valid;  // row-major subaperture indices kept by the mask
  // Per valid subaperture: pixel bounding box [r0,r1) x [c0,c1).
  struct Patch {
    int r0, r1, c0, c1;
  };
  std::vector<Patch> patches;
};

// Build the subaperture layout and validity mask.  A subaperture is valid when
// its center lies inside the pupil and the reference beam deposits at least
// flux_threshold of the brightest subaperture's flux in it.
inline WfsGeometry make_wfs_geometry(const ComplexField& reference,
                                     double pupil_diameter, int nsub = 16,
                                     double flux_threshold = 0.05) {
  if (!(pupil_diameter > 0.0))
    throw std::invalid_argument("wfs: pupil diameter must be > 0");
  const GridSpec& g = reference.grid();
  if (pupil_diameter > g.side())
    throw std::invalid_argument("wfs: pupil exceeds grid");
  WfsGeometry geom;
  geom.grid = g;
  geom.pupil_diameter = pupil_diameter;
  geom.nsub = nsub;
  const double sub = pupil_diameter / nsub;
  const double half = 0.5 * pupil_diameter;

  // Pixel bounding boxes and fluxes for all nsub^2 subapertures.
  std::vector<WfsGeometry::Patch> boxes(nsub * nsub, {0, 0, 0, 0});
  std::vector<double> flux(nsub * nsub, 0.0);
  std::vector<bool> inside(nsub * nsub, false);
  for (int sy = 0; sy < nsub; ++sy) {
    for (int sx = 0; sx < nsub; ++sx) {
      const double x0 = -half + sx * sub;
      const double y0 = -half + sy * sub;
      const double cx = x0 + 0.5 * sub;
      const double cy = y0 + 0.5 * sub;
      inside[sy * nsub + sx] = (cx * cx + cy * cy) <= half * half;
      // convert physical extents to pixel ranges (coord(i) = (i-n/2)*pitch)
      auto px = [&](double v) {
        return static_cast<int>(std::ceil(v / g.pitch)) + g.n / 2;
      };
      WfsGeometry::Patch p;
      p.c0 = std::max(0, px(x0));
      p.c1 = std::min(g.n, px(x0 + sub));
      p.r0 = std::max(0, px(y0));
      p.r1 = std::min(g.n, px(y0 + sub));
      boxes[sy * nsub + sx] = p;
    }
  }
  for (int s = 0; s < nsub * nsub; ++s) {
    const auto& p = boxes[s];
    double acc = 0.0;
    for (int r = p.r0; r < p.r1; ++r)
      for (int c = p.c0; c < p.c1; ++c) acc += std::norm(reference.at(r, c));
    flux[s] = acc;
  }
  double max_flux = 0.0;
  for (double v : flux) max_flux = std::max(max_flux, v);
  if (!(max_flux > 0.0))
    throw std::runtime_error("wfs: reference power below threshold everywhere");
  for (int s = 0; s < nsub * nsub; ++s) {
    if (inside[s] && flux[s] >= flux_threshold * max_flux) {
      geom.valid.push_back(s);
      geom.patches.push_back(boxes[s]);
    }
  }
  if (geom.valid.empty())
    throw std::runtime_error("wfs: no valid subapertures");
  return geom;
}

// Per-subaperture wavefront gradient (rad/m), x then y interleaved.
//
// The focal-spot centroid of a Shack-Hartmann lenslet equals the
// intensity-weighted mean phase gradient over its subaperture (Fourier
// centroid identity), so the slopes are evaluated directly as
// sum Im(conj(u) * grad u) / sum |u|^2 with central differences.
inline std::vector<double> wfs_measure(const ComplexField& field,
                                       const WfsGeometry& geom) {
  require_same_grid(field.grid(), geom.grid, "wfs_measure");
  const int n = geom.grid.n;
  const double inv2h = 1.0 / (2.0 * geom.grid.pitch);
  std::vector<double> slopes(2 * geom.patches.size(), 0.0);
  double total_flux = 0.0;
  for (std::size_t k = 0; k < geom.patches.size(); ++k) {
    const auto& p = geom.patches[k];
    double wsum = 0.0, gx = 0.0, gy = 0.0;
    for (int r = p.r0; r < p.r1; ++r) {
      for (int c = p.c0; c < p.c1; ++c) {
        const cplx u = field.at(r, c);
        const double w = std::norm(u);
        if (w == 0.0) continue;
        wsum += w;
        const cplx du_x =
            (field.at(r, std::min(c + 1, n - 1)) -
             field.at(r, std::max(c - 1, 0))) *
            inv2h;
        const cplx du_y =
            (field.at(std::min(r + 1, n - 1), c) -
             field.at(std::max(r - 1, 0), c)) *
            inv2h;
        gx += std::imag(std::conj(u) * du_x);
        gy += std::imag(std::conj(u) * du_y);
      }
    }
    total_flux += wsum;
    if (wsum > 0.0) {
      slopes[2 * k] = gx / wsum;
      slopes[2 * k + 1] = gy / wsum;
    }
  }
  if (!(total_flux > 0.0))
    throw std::runtime_error("wfs_measure: no reference power in any subaperture");
  return slopes;
}

// ---------------------------------------------------------------------------
// Deformable mirror

class DmModel {
 public:
  // 11x11 actuator grid over the pupil with 6 actuators cut from each corner
  // (97 total); Gaussian influence with the given coupling at neighbor pitch.
  DmModel(const GridSpec& grid, double pupil_diameter, double coupling = 0.3,
          double stroke_limit = 20.0)
      : grid_(grid),
        pupil_(pupil_diameter),
        coupling_(coupling),
        stroke_(stroke_limit) {
    if (!(pupil_diameter > 0.0))
      throw std::invalid_argument("dm: pupil diameter must be > 0");
    if (!(coupling > 0.0 && coupling < 1.0))
      throw std::invalid_argument("dm: coupling must be in (0,1)");
    pitch_act_ = pupil_ / 10.0;
    // corner cut: drop positions with taxicab distance < 3 from each corner
    for (int r = 0; r < 11; ++r) {
      for (int c = 0; c < 11; ++c) {
        const int d1 = r + c, d2 = r + (10 - c), d3 = (10 - r) + c,
                  d4 = (10 - r) + (10 - c);
        if (d1 < 3 || d2 < 3 || d3 < 3 || d4 < 3) continue;
        act_x_.push_back((c - 5) * pitch_act_);
        act_y_.push_back((r - 5) * pitch_act_);
      }
    }
    if (act_x_.size() != 97)
      throw std::logic_error("dm: actuator layout must have 97 actuators");
    commands_.assign(97, 0.0);
    // influence(r) = coupling^{(r/pitch)^2}, truncated where it falls
    // below 1e-4 so each actuator touches only a local patch
    alpha_ = -std::log(coupling_) / (pitch_act_ * pitch_act_);
    const double r_cut =
        pitch_act_ * std::sqrt(std::log(1e4) / -std::log(coupling_));
    cut_px_ = static_cast<int>(std::ceil(r_cut / grid_.pitch));
    build_patches();
    surface_.assign(static_cast<std::size_t>(grid_.n) * grid_.n, 0.0);
  }

  const GridSpec& grid() const { return grid_; }
  int actuator_count() const { return 97; }
  double actuator_pitch() const { return pitch_act_; }
  double pupil_diameter() const { return pupil_; }
  const std::vector<double>& actuator_x() const { return act_x_; }
  const std::vector<double>& actuator_y() const { return act_y_; }
  const std::vector<double>& commands() const { return commands_; }
  bool stroke_clipped() const { return clipped_; }
  double stroke_limit() const { return stroke_; }

  // Influence of actuator a at physical position (x, y) for a unit command.
  double influence(int a, double x, double y) const {
    const double dx = x - act_x_[a];
    const double dy = y - act_y_[a];
    return std::exp(-alpha_ * (dx * dx + dy * dy));
  }

  void set_commands(const std::vector<double>& cmd) {
    if (cmd.size() != 97) throw std::invalid_argument("dm: need 97 commands");
    clipped_ = false;
    for (int a = 0; a < 97; ++a) {
      double v = cmd[a];
      if (v > stroke_) {
        v = stroke_;
        clipped_ = true;
      } else if (v < -stroke_) {
        v = -stroke_;
        clipped_ = true;
      }
      commands_[a] = v;
    }
    rebuild_surface();
  }

  void reset() {
    commands_.assign(97, 0.0);
    clipped_ = false;
    surface_.assign(surface_.size(), 0.0);
  }

  // Surface phase (radians), linear in commands.
  const std::vector<double>& surface() const { return surface_; }

  // Apply the correction: field * e^{-i surface}.
  ComplexField apply(const ComplexField& field) const {
    require_same_grid(field.grid(), grid_, "dm_apply");
    ComplexField out = field;
    auto& s = out.samples();
    for (std::size_t i = 0; i < s.size(); ++i)
      if (surface_[i] != 0.0) s[i] *= std::polar(1.0, -surface_[i]);
    return out;
  }

 private:
  struct Patch {
    int r0, r1, c0, c1;
    std::vector<double> w;  // influence weights, row-major within the box
  };

  void build_patches() {
    patches_.resize(97);
    for (int a = 0; a < 97; ++a) {
      const int pc = static_cast<int>(std::round(act_x_[a] / grid_.pitch)) +
                     grid_.n / 2;
      const int pr = static_cast<int>(std::round(act_y_[a] / grid_.pitch)) +
                     grid_.n / 2;
      Patch p;
      p.r0 = std::max(0, pr - cut_px_);
      p.r1 = std::min(grid_.n, pr + cut_px_ + 1);
      p.c0 = std::max(0, pc - cut_px_);
      p.c1 = std::min(grid_.n, pc + cut_px_ + 1);
      p.w.reserve(static_cast<std::size_t>(p.r1 - p.r0) * (p.c1 - p.c0));
      for (int r = p.r0; r < p.r1; ++r)
        for (int c = p.c0; c < p.c1; ++c)
          p.w.push_back(influence(a, grid_.coord(c), grid_.coord(r)));
      patches_[a] = std::move(p);
    }
  }

  void rebuild_surface() {
    std::fill(surface_.begin(), surface_.end(), 0.0);
    for (int a = 0; a < 97; ++a) {
      const double cmd = commands_[a];
      if (cmd == 0.0) continue;
      const Patch& p = patches_[a];
      std::size_t k = 0;
      for (int r = p.r0; r < p.r1; ++r) {
        double* line = surface_.data() + static_cast<std::size_t>(r) * grid_.n;
        for (int c = p.c0; c < p.c1; ++c) line[c] += cmd * p.w[k++];
      }
    }
  }

  GridSpec grid_;
  double pupil_;
  double coupling_;
  double stroke_;
  double pitch_act_ = 0.0;
  double alpha_ = 0.0;
  int cut_px_ = 0;
  std::vector<double> act_x_, act_y_;
  std::vector<double> commands_;
  std::vector<double> surface_;
  std::vector<Patch> patches_;
  bool clipped_ = false;
};

inline ComplexField dm_apply(const ComplexField& field, const DmModel& dm) {
  return dm.apply(field);
}

// ---------------------------------------------------------------------------
// Calibration and the control loop

struct LoopState {
  Eigen::MatrixXd M;  // interaction matrix: slopes per unit command
  Eigen::MatrixXd R;  // truncated-SVD reconstructor
  Eigen::VectorXd slope_ref;  // WFS zero point: the unaberrated beam's slopes
  int retained_modes = 0;
  double condition_number = 0.0;
  double gain = 0.4;
  double leak = 0.99;
  double f_loop = 200.0;
  int iterations = 0;
  std::vector<double> residual_rms_history;  // DM-space residual estimate, rad
};

// Poke each actuator on the (flat-wavefront) calibration reference and build
// the truncated-SVD reconstructor.  Singular values below tau*sigma_max are
// discarded (waffle-like modes the sensor cannot see).
inline LoopState calibrate(DmModel& dm, const WfsGeometry& geom,
                           const ComplexField& calibration_reference,
                           double tau = 1e-3) {
  const int ns = static_cast<int>(2 * geom.patches.size());
  LoopState st;
  st.M.resize(ns, 97);
  const std::vector<double> zero(97, 0.0);
  std::vector<double> cmd(97, 0.0);
  const std::vector<double> base = wfs_measure(calibration_reference, geom);
  for (int a = 0; a < 97; ++a) {
    cmd.assign(97, 0.0);
    cmd[a] = 1.0;
    dm.set_commands(cmd);
    const std::vector<double> s =
        wfs_measure(dm.apply(calibration_reference), geom);
    for (int i = 0; i < ns; ++i) st.M(i, a) = s[i] - base[i];
  }
  dm.set_commands(zero);
  st.slope_ref = Eigen::Map<const Eigen::VectorXd>(base.data(), base.size());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      st.M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  if (!(smax > 0.0)) throw std::runtime_error("calibrate: rank collapse");
  int keep = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) >= tau * smax) ++keep;
  if (keep == 0) throw std::runtime_error("calibrate: rank collapse");
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (int i = 0; i < keep; ++i) inv(i) = 1.0 / sv(i);
  st.R = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  st.retained_modes = keep;
  st.condition_number = smax / sv(keep - 1);
  return st;
}

// One control-loop measurement/update: the sensor sees the reference through
// the current mirror, slopes are taken against the calibration zero point,
// and the commands update as a leaky integrator.
inline void loop_update(LoopState& st, DmModel& dm, const WfsGeometry& geom,
                        const ComplexField& reference) {
  const std::vector<double> slopes = wfs_measure(dm.apply(reference), geom);
  Eigen::Map<const Eigen::VectorXd> s(slopes.data(), slopes.size());
  Eigen::VectorXd delta;
  if (st.slope_ref.size() == s.size())
    delta = st.R * (s - st.slope_ref);
  else
    delta = st.R * s;
  std::vector<double> cmd(97);
  for (int a = 0; a < 97; ++a)
    cmd[a] = st.leak * dm.commands()[a] - st.gain * delta(a);
  dm.set_commands(cmd);
  st.iterations += 1;
  st.residual_rms_history.push_back(
      std::sqrt(delta.squaredNorm() / delta.size()));
}

// One full control-loop frame; the refreshed correction is applied to the
// signal beam over the same path as the reference.  The measurement is one
// mirror-state behind the applied correction.
inline ComplexField loop_step(LoopState& st, DmModel& dm,
                              const WfsGeometry& geom,
                              const ComplexField& reference,
                              const ComplexField& signal) {
  loop_update(st, dm, geom, reference);
  return dm.apply(signal);
}

// DM-space residual estimate from a single measurement, without updating the
// loop; matches the quantity loop_update records per frame.
inline double slope_residual(const LoopState& st, const WfsGeometry& geom,
                             const ComplexField& reference_through_dm) {
  const std::vector<double> slopes = wfs_measure(reference_through_dm, geom);
  Eigen::Map<const Eigen::VectorXd> s(slopes.data(), slopes.size());
  Eigen::VectorXd delta;
  if (st.slope_ref.size() == s.size())
    delta = st.R * (s - st.slope_ref);
  else
    delta = st.R * s;
  return std::sqrt(delta.squaredNorm() / delta.size());
}

// A loop running slower than twice the Greenwood frequency under-samples the
// turbulence; the harness flags such configurations.
inline bool loop_undersampled(double f_greenwood, double f_loop) {
  return f_greenwood > 0.5 * f_loop;
}

}  // namespace oamsim
