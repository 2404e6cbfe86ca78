#pragma once

// Quantum process tomography over mutually unbiased bases: generalized
// Gell-Mann operator bases, complete MUB sets for prime d and for d=4,
// prepare-all/measure-all probability tables, least-squares inversion to the
// process matrix chi, and the Uhlmann process fidelity.

#include <cmath>
#include <array>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "oamsim/modes.hpp"
#include "oamsim/rng.hpp"

namespace oamsim {

inline bool is_prime(int d) {
  if (d < 2) return false;
  for (int k = 2; k * k <= d; ++k)
    if (d % k == 0) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Generalized Gell-Mann basis
//
// Trace-orthonormal Hermitian basis of d x d matrices: Tr(sigma_a sigma_b) =
// delta_ab, with sigma_0 = I/sqrt(d).  Ordering: identity, then for each index
// pair j<k the symmetric and antisymmetric generators, then the d-1 diagonal
// generators.  Completeness with this normalization reads
// sum_a sigma_a^dagger sigma_a = d * I.

struct GellMannBasis {
  int d = 0;
  std::vector<Eigen::MatrixXcd> sigma;  // d^2 matrices
};

inline GellMannBasis make_gell_mann(int d) {
  if (d < 2) throw std::invalid_argument("gell-mann: d must be >= 2");
  GellMannBasis b;
  b.d = d;
  b.sigma.reserve(static_cast<std::size_t>(d) * d);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  b.sigma.push_back(Eigen::MatrixXcd::Identity(d, d) * inv_sqrt_d);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int j = 0; j < d; ++j) {
    for (int k = j + 1; k < d; ++k) {
      Eigen::MatrixXcd sym = Eigen::MatrixXcd::Zero(d, d);
      sym(j, k) = inv_sqrt2;
      sym(k, j) = inv_sqrt2;
      b.sigma.push_back(sym);
      Eigen::MatrixXcd anti = Eigen::MatrixXcd::Zero(d, d);
      anti(j, k) = cplx(0.0, -inv_sqrt2);
      anti(k, j) = cplx(0.0, inv_sqrt2);
      b.sigma.push_back(anti);
    }
  }
  for (int l = 1; l < d; ++l) {
    Eigen::MatrixXcd diag = Eigen::MatrixXcd::Zero(d, d);
    const double norm = 1.0 / std::sqrt(static_cast<double>(l) * (l + 1));
    for (int j = 0; j < l; ++j) diag(j, j) = norm;
    diag(l, l) = -static_cast<double>(l) * norm;
    b.sigma.push_back(diag);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Mutually unbiased bases

struct MubSet {
  int d = 0;
  // bases[alpha] is d x d with orthonormal state vectors as columns;
  // bases[0] is the canonical basis.
  std::vector<Eigen::MatrixXcd> bases;

  int basis_count() const { return static_cast<int>(bases.size()); }
  Eigen::VectorXcd vec(int alpha, int t) const {
    return bases.at(alpha).col(t);
  }
  Eigen::MatrixXcd projector(int alpha, int t) const {
    const Eigen::VectorXcd v = vec(alpha, t);
    return v * v.adjoint();
  }
};

// d+1 bases for prime d.  The canonical basis plus, for each alpha, the basis
// with components psi_t[j] = (omega^t)^{p-j} (omega^{-alpha})^{s_j} / sqrt(p),
// s_j = j + (j+1) + ... + (p-1), omega = e^{2 pi i / p}.  For p = 2 the s_j
// are all equal and the formula collapses to a single extra basis, so the set
// is completed with the remaining Pauli eigenbasis {(1,i), (1,-i)}/sqrt(2).
inline MubSet build_mubs(int d) {
  if (!is_prime(d)) {
    if (d == 4)
      throw std::invalid_argument("build_mubs: d=4 is not prime, use build_mubs_dim4");
    throw std::invalid_argument("build_mubs: d must be prime");
  }
  MubSet set;
  set.d = d;
  set.bases.push_back(Eigen::MatrixXcd::Identity(d, d));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  if (d == 2) {
    Eigen::MatrixXcd bx(2, 2), by(2, 2);
    bx << 1, 1, 1, -1;
    by << 1, 1, cplx(0, 1), cplx(0, -1);
    set.bases.push_back(bx * inv_sqrt_d);
    set.bases.push_back(by * inv_sqrt_d);
    return set;
  }
  std::vector<long> s(d);
  for (int j = 0; j < d; ++j) {
    long acc = 0;
    for (int k = j; k < d; ++k) acc += k;
    s[j] = acc;
  }
  const double two_pi_over_d = 2.0 * M_PI / d;
  auto omega_pow = [&](long e) {
    const long r = ((e % d) + d) % d;
    return std::polar(1.0, two_pi_over_d * r);
  };
  for (int alpha = 0; alpha < d; ++alpha) {
    Eigen::MatrixXcd basis(d, d);
    for (int t = 0; t < d; ++t)
      for (int j = 0; j < d; ++j)
        basis(j, t) = inv_sqrt_d * omega_pow(static_cast<long>(t) * (d - j)) *
                      omega_pow(-static_cast<long>(alpha) * s[j]);
    set.bases.push_back(basis);
  }
  return set;
}

// The explicit complete set of 5 bases for d = 4.
inline MubSet build_mubs_dim4() {
  MubSet set;
  set.d = 4;
  const cplx i(0.0, 1.0);
  using Row = std::array<cplx, 4>;
  const std::array<std::array<Row, 4>, 4> tables = {{
      {{{1, 1, 1, 1}, {1, -1, -1, 1}, {1, 1, -1, -1}, {1, -1, 1, -1}}},
      {{{1, i, i, -1}, {1, -i, -i, -1}, {1, i, -i, 1}, {1, -i, i, 1}}},
      {{{1, 1, -i, i}, {1, -1, i, i}, {1, 1, i, -i}, {1, -1, -i, -i}}},
      {{{1, -i, 1, i}, {1, i, -1, i}, {1, i, 1, -i}, {1, -i, -1, -i}}},
  }};
  set.bases.push_back(Eigen::MatrixXcd::Identity(4, 4));
  for (const auto& tab : tables) {
    Eigen::MatrixXcd basis(4, 4);
    for (int t = 0; t < 4; ++t)
      for (int j = 0; j < 4; ++j) basis(j, t) = 0.5 * tab[t][j];
    set.bases.push_back(basis);
  }
  return set;
}

inline MubSet build_mub_set(int d) {
  return d == 4 ? build_mubs_dim4() : build_mubs(d);
}

// ---------------------------------------------------------------------------
// Process matrix

// chi over the Gell-Mann ordering, stored trace-normalized: Tr(chi) = 1 and
// the identity channel is the rank-1 unit entry at (0, 0).  The physical
// channel action carries a factor d: E(rho) = d * sum_ab chi_ab sigma_a rho
// sigma_b^dagger.
struct ProcessMatrix {
  int d = 0;
  Eigen::MatrixXcd chi;  // d^2 x d^2 Hermitian PSD, trace 1
};

inline ProcessMatrix chi_identity(int d) {
  ProcessMatrix p;
  p.d = d;
  p.chi = Eigen::MatrixXcd::Zero(d * d, d * d);
  p.chi(0, 0) = 1.0;
  return p;
}

// E(rho) = (1-strength) rho + strength I/d.
inline ProcessMatrix chi_depolarizing(int d, double strength) {
  ProcessMatrix p;
  p.d = d;
  const int D = d * d;
  p.chi = (strength / D) * Eigen::MatrixXcd::Identity(D, D);
  p.chi(0, 0) += 1.0 - strength;
  return p;
}

// Rank-1 chi of the unitary channel rho -> U rho U^dagger.
inline ProcessMatrix chi_of_unitary(const Eigen::MatrixXcd& U,
                                    const GellMannBasis& gm) {
  const int d = gm.d;
  const int D = d * d;
  Eigen::VectorXcd c(D);
  for (int a = 0; a < D; ++a) c(a) = (gm.sigma[a].adjoint() * U).trace();
  ProcessMatrix p;
  p.d = d;
  p.chi = (c * c.adjoint()) / static_cast<double>(d);
  return p;
}

inline Eigen::MatrixXcd apply_channel(const ProcessMatrix& p,
                                      const Eigen::MatrixXcd& rho,
                                      const GellMannBasis& gm) {
  const int D = p.d * p.d;
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(p.d, p.d);
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b)
      out += p.chi(a, b) * gm.sigma[a] * rho * gm.sigma[b].adjoint();
  return static_cast<double>(p.d) * out;
}

// ---------------------------------------------------------------------------
// Probability tables

// p(alpha, m, beta, n) = Tr(Pi_m^alpha E(Pi_n^beta)): input state n of basis
// beta, measured against projector m of basis alpha.
struct ProbTable {
  int d = 0;
  int nbases = 0;
  std::vector<double> p;

  ProbTable() = default;
  ProbTable(int dim, int bases)
      : d(dim),
        nbases(bases),
        p(static_cast<std::size_t>(bases) * dim * bases * dim, 0.0) {}
  double& at(int alpha, int m, int beta, int n) {
    return p[idx(alpha, m, beta, n)];
  }
  double at(int alpha, int m, int beta, int n) const {
    return p[idx(alpha, m, beta, n)];
  }
  std::size_t idx(int alpha, int m, int beta, int n) const {
    return ((static_cast<std::size_t>(beta) * d + n) * nbases + alpha) * d + m;
  }
};

inline ProbTable average_tables(const std::vector<ProbTable>& tables) {
  if (tables.empty()) throw std::invalid_argument("average_tables: empty");
  ProbTable out = tables[0];
  for (std::size_t t = 1; t < tables.size(); ++t) {
    if (tables[t].p.size() != out.p.size())
      throw std::invalid_argument("average_tables: mismatched tables");
    for (std::size_t i = 0; i < out.p.size(); ++i) out.p[i] += tables[t].p[i];
  }
  const double inv = 1.0 / tables.size();
  for (double& v : out.p) v *= inv;
  return out;
}

// Analytic table for a known process matrix (noiseless forward model).
inline ProbTable synth_table(const ProcessMatrix& chi, const MubSet& mubs,
                             const GellMannBasis& gm) {
  const int d = mubs.d;
  const int nb = mubs.basis_count();
  const int D = d * d;
  ProbTable tab(d, nb);
  for (int beta = 0; beta < nb; ++beta) {
    for (int n = 0; n < d; ++n) {
      const Eigen::VectorXcd psi = mubs.vec(beta, n);
      for (int alpha = 0; alpha < nb; ++alpha) {
        for (int m = 0; m < d; ++m) {
          const Eigen::VectorXcd phi = mubs.vec(alpha, m);
          Eigen::VectorXcd w(D);
          for (int a = 0; a < D; ++a)
            w(a) = (psi.adjoint() * gm.sigma[a] * phi).value();
          const cplx val =
              (w.adjoint() * (static_cast<double>(d) * chi.chi) * w).value();
          tab.at(alpha, m, beta, n) = std::real(val);
        }
      }
    }
  }
  return tab;
}

// Run the prepare-all/measure-all sweep through a simulated channel.  Each MUB
// state is rendered as a superposition of the ideal transmit modes, sent
// through the channel, and measured against superpositions of the detection
// modes; every input's row block is normalized by the power captured in the
// detection subspace.
inline ProbTable channel_from_simulation(
    const MubSet& mubs, const ModeBasis& transmit_basis,
    const std::vector<ComplexField>& detection_modes,
    const std::function<ComplexField(const ComplexField&)>& channel) {
  const int d = mubs.d;
  if (transmit_basis.d != d)
    throw std::invalid_argument("channel_from_simulation: basis dimension mismatch");
  if (static_cast<int>(detection_modes.size()) != d)
    throw std::invalid_argument("channel_from_simulation: need d detection modes");
  const int nb = mubs.basis_count();
  ProbTable tab(d, nb);
  for (int beta = 0; beta < nb; ++beta) {
    for (int n = 0; n < d; ++n) {
      const Eigen::VectorXcd psi = mubs.vec(beta, n);
      std::vector<cplx> coeffs(psi.data(), psi.data() + d);
      const ComplexField input = superpose_state(transmit_basis, coeffs);
      const ComplexField output = channel(input);
      Eigen::VectorXcd a(d);
      for (int j = 0; j < d; ++j) a(j) = overlap(detection_modes[j], output);
      const double captured = a.squaredNorm();
      if (!(captured > 1e-30))
        throw std::runtime_error(
            "channel_from_simulation: zero detected power for an input state");
      for (int alpha = 0; alpha < nb; ++alpha) {
        for (int m = 0; m < d; ++m) {
          const cplx amp = mubs.vec(alpha, m).dot(a);
          tab.at(alpha, m, beta, n) = std::norm(amp) / captured;
        }
      }
    }
  }
  return tab;
}

// ---------------------------------------------------------------------------
// Reconstruction

// Least-squares inversion of p = w^dagger chi w with w_a = psi^dagger sigma_a
// phi over all prepare/measure pairs, followed by Hermitization, eigenvalue
// clipping to the PSD cone, and trace renormalization.
inline ProcessMatrix reconstruct_chi(const ProbTable& table, const MubSet& mubs,
                                     const GellMannBasis& gm) {
  const int d = mubs.d;
  if (gm.d != d)
    throw std::invalid_argument("reconstruct_chi: basis dimension mismatch");
  const int nb = mubs.basis_count();
  if (table.d != d || table.nbases != nb)
    throw std::invalid_argument("reconstruct_chi: table shape mismatch");
  const int D = d * d;
  const int unknowns = D * D;  // Hermitian chi: D diag + 2 per off-diag pair
  const int rows = nb * d * nb * d;

  Eigen::MatrixXd A(rows, unknowns);
  Eigen::VectorXd rhs(rows);
  int row = 0;
  Eigen::VectorXcd w(D);
  for (int beta = 0; beta < nb; ++beta) {
    for (int n = 0; n < d; ++n) {
      const Eigen::VectorXcd psi = mubs.vec(beta, n);
      for (int alpha = 0; alpha < nb; ++alpha) {
        for (int m = 0; m < d; ++m) {
          const Eigen::VectorXcd phi = mubs.vec(alpha, m);
          for (int a = 0; a < D; ++a)
            w(a) = (psi.adjoint() * gm.sigma[a] * phi).value();
          int col = 0;
          for (int a = 0; a < D; ++a) A(row, col++) = std::norm(w(a));
          for (int a = 0; a < D; ++a) {
            for (int b = a + 1; b < D; ++b) {
              const cplx t = std::conj(w(a)) * w(b);
              A(row, col++) = std::sqrt(2.0) * std::real(t);
              A(row, col++) = -std::sqrt(2.0) * std::imag(t);
            }
          }
          rhs(row) = table.at(alpha, m, beta, n);
          ++row;
        }
      }
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < unknowns)
    throw std::runtime_error("reconstruct_chi: rank-deficient design (incomplete table)");
  const Eigen::VectorXd x = qr.solve(rhs);

  Eigen::MatrixXcd chi = Eigen::MatrixXcd::Zero(D, D);
  int col = 0;
  for (int a = 0; a < D; ++a) chi(a, a) = x(col++);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int a = 0; a < D; ++a) {
    for (int b = a + 1; b < D; ++b) {
      const cplx v(x(col) * inv_sqrt2, x(col + 1) * inv_sqrt2);
      col += 2;
      chi(a, b) = v;
      chi(b, a) = std::conj(v);
    }
  }
  chi = 0.5 * (chi + chi.adjoint().eval());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(chi);
  Eigen::VectorXd lam = eig.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) lam(i) = std::max(lam(i), 0.0);
  chi = eig.eigenvectors() * lam.asDiagonal() *
        eig.eigenvectors().adjoint();
  const double tr = std::real(chi.trace());
  if (!(tr > 0.0))
    throw std::runtime_error("reconstruct_chi: zero-trace process matrix");
  ProcessMatrix out;
  out.d = d;
  out.chi = chi / tr;
  return out;
}

// ---------------------------------------------------------------------------
// Fidelity

namespace detail {

inline Eigen::MatrixXcd psd_sqrt(const Eigen::MatrixXcd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(m);
  Eigen::VectorXd lam = eig.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) {
    if (lam(i) < -1e-10)
      throw std::invalid_argument(std::string(what) + ": matrix is not PSD");
    lam(i) = std::sqrt(std::max(lam(i), 0.0));
  }
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().adjoint();
}

}  // namespace detail

// Uhlmann fidelity F = [Tr sqrt(sqrt(a) b sqrt(a))]^2 between trace-1 process
// matrices.
inline double process_fidelity(const ProcessMatrix& a, const ProcessMatrix& b) {
  if (a.d != b.d)
    throw std::invalid_argument("process_fidelity: dimension mismatch");
  const Eigen::MatrixXcd ra = detail::psd_sqrt(a.chi, "process_fidelity");
  const Eigen::MatrixXcd inner = ra * b.chi * ra;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(inner);
  double tr = 0.0;
  for (int i = 0; i < eig.eigenvalues().size(); ++i)
    tr += std::sqrt(std::max(eig.eigenvalues()(i), 0.0));
  const double f = tr * tr;
  return std::min(std::max(f, 0.0), 1.0);
}

// Random dimension-d unitary (QR of a complex Gaussian matrix); exercised by
// tomography round-trip checks.
inline Eigen::MatrixXcd random_unitary(int d, Rng& rng) {
  Eigen::MatrixXcd g(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) g(r, c) = cplx(rng.normal(), rng.normal());
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
  Eigen::MatrixXcd q = qr.householderQ();
  const Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int c = 0; c < d; ++c) {
    const cplx rc = r(c, c);
    const cplx phase = rc == cplx(0.0) ? cplx(1.0) : rc / std::abs(rc);
    q.col(c) *= std::conj(phase);
  }
  return q;
}

inline Eigen::MatrixXcd random_density_matrix(int d, Rng& rng) {
  Eigen::MatrixXcd g(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) g(r, c) = cplx(rng.normal(), rng.normal());
  Eigen::MatrixXcd rho = g * g.adjoint();
  return rho / rho.trace();
}

}  // namespace oamsim
