#pragma once

// QKD-facing metrics: crosstalk matrices over a mode basis, the quantum dit
// error rate, the d-dimensional secret-key rate, and its zero-rate security
// threshold.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "oamsim/modes.hpp"

namespace oamsim {

struct CrosstalkMatrix {
  int d = 0;
  BasisKind basis = BasisKind::LogicalOam;
  int trials = 0;
  Eigen::MatrixXd C;        // row i: Alice's input, column j: Bob's projection
  Eigen::MatrixXd std_err;  // per-entry standard error over the ensemble
};

// Ensemble-averaged crosstalk: for each trial the channel realization is
// applied to every input mode, each row is normalized by that input's total
// detected power, and the row-stochastic per-trial matrices are averaged.
// The channel functor receives the trial index so the caller can vary the
// turbulence realization deterministically.
inline CrosstalkMatrix crosstalk(
    const ModeBasis& basis,
    const std::function<ComplexField(const ComplexField&, int)>& channel,
    const std::vector<ComplexField>& detection_modes, int trials) {
  if (trials < 1) throw std::invalid_argument("crosstalk: trials must be >= 1");
  const int d = basis.d;
  if (static_cast<int>(detection_modes.size()) != d)
    throw std::invalid_argument("crosstalk: need d detection modes");
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd row(d, d);
  for (int t = 0; t < trials; ++t) {
    for (int i = 0; i < d; ++i) {
      const ComplexField out = channel(basis.modes[i], t);
      double row_sum = 0.0;
      for (int j = 0; j < d; ++j) {
        const double p = std::norm(overlap(detection_modes[j], out));
        row(i, j) = p;
        row_sum += p;
      }
      if (!(row_sum > 1e-30))
        throw std::runtime_error("crosstalk: zero detected power for an input mode");
      row.row(i) /= row_sum;
    }
    // Welford update, entrywise
    const Eigen::MatrixXd delta = row - mean;
    mean += delta / (t + 1);
    m2 += delta.cwiseProduct(row - mean);
  }
  CrosstalkMatrix out;
  out.d = d;
  out.basis = basis.kind;
  out.trials = trials;
  out.C = mean;
  if (trials > 1)
    out.std_err =
        (m2 / (static_cast<double>(trials) * (trials - 1))).cwiseSqrt();
  else
    out.std_err = Eigen::MatrixXd::Zero(d, d);
  return out;
}

// QDER = 1 - Tr(C)/d.
inline double qder(const CrosstalkMatrix& c) {
  if (c.d < 1) throw std::invalid_argument("qder: empty matrix");
  return 1.0 - c.C.trace() / c.d;
}

// d-ary entropy-like term of the key-rate formula; h(0) = 0 by continuity.
inline double dit_entropy(double x, int d) {
  if (x == 0.0) return 0.0;
  const double t1 = -x * std::log2(x / (d - 1));
  const double t2 = (1.0 - x) >= 1.0 ? 0.0 : -(1.0 - x) * std::log2(1.0 - x);
  return t1 + t2;
}

// R(Q) = log2(d) - 2 h(Q), bits of secret key per sifted photon.  May be
// negative; clamping is the caller's choice.
inline double key_rate(double q, int d) {
  if (d < 2) throw std::invalid_argument("key_rate: d must be >= 2");
  if (!(q >= 0.0 && q < 1.0))
    throw std::invalid_argument("key_rate: Q must be in [0, 1)");
  return std::log2(static_cast<double>(d)) - 2.0 * dit_entropy(q, d);
}

// Zero of R(Q) on (0, (d-1)/d) by bisection.
inline double qder_threshold(int d) {
  if (d < 2) throw std::invalid_argument("qder_threshold: d must be >= 2");
  double lo = 0.0;
  double hi = static_cast<double>(d - 1) / d;
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    if (key_rate(mid, d) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct BasisQkdResult {
  BasisKind basis = BasisKind::LogicalOam;
  double qder = 0.0;
  double qder_std_err = 0.0;
  double key_rate = 0.0;
  bool secure = false;
};

struct QkdReport {
  int d = 0;
  BasisQkdResult logical;
  BasisQkdResult ang;
  double average_qder = 0.0;
  double threshold = 0.0;
  bool secure = false;  // both bases' mean QDER below threshold
};

// Variance of 1 - Tr(C)/d from the entrywise standard errors: the diagonal
// entries enter with weight 1/d and independent-trial scatter.
inline double qder_std_err(const CrosstalkMatrix& c) {
  double var = 0.0;
  for (int i = 0; i < c.d; ++i) {
    const double s = c.std_err(i, i);
    var += s * s;
  }
  return std::sqrt(var) / c.d;
}

inline QkdReport make_qkd_report(const CrosstalkMatrix& logical,
                                 const CrosstalkMatrix& ang) {
  if (logical.d != ang.d)
    throw std::invalid_argument("make_qkd_report: dimension mismatch");
  QkdReport rep;
  rep.d = logical.d;
  rep.threshold = qder_threshold(rep.d);
  auto fill = [&](const CrosstalkMatrix& c) {
    BasisQkdResult r;
    r.basis = c.basis;
    r.qder = qder(c);
    r.qder_std_err = qder_std_err(c);
    r.key_rate = key_rate(std::min(r.qder, 1.0 - 1e-12), rep.d);
    r.secure = r.qder < rep.threshold;
    return r;
  };
  rep.logical = fill(logical);
  rep.ang = fill(ang);
  rep.average_qder = 0.5 * (rep.logical.qder + rep.ang.qder);
  rep.secure = rep.logical.secure && rep.ang.secure;
  return rep;
}

}  // namespace oamsim
