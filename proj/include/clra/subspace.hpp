#pragma once

// Deterministic linear-algebra kernel: truncated SVD, low-rank costs,
// the projector-distance recourse metric, spectral band masses and
// append-row SVD updates.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "clra/errors.hpp"

namespace clra {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Singular values below kRelRankTol * sigma_1 (or kAbsRankTol when
// sigma_1 == 0) are treated as zero.
inline constexpr double kRelRankTol = 1e-10;
inline constexpr double kAbsRankTol = 1e-12;

// Full re-orthonormalization cadence for SvdState updates.
inline constexpr int kReorthEvery = 64;

inline double rank_cutoff(double sigma_max) {
  return sigma_max > 0.0 ? std::max(kRelRankTol * sigma_max, kAbsRankTol) : kAbsRankTol;
}

inline Index ceil_sqrt(Index k) {
  auto r = static_cast<Index>(std::sqrt(static_cast<double>(k)));
  while (r * r < k) ++r;
  while (r > 0 && (r - 1) * (r - 1) >= k) --r;
  return r;
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw InputError(std::string(what) + " has non-finite entries");
}

inline void require_rank(Index k) {
  if (k < 1) throw ParameterError("rank k must be >= 1, got " + std::to_string(k));
}

// Orthonormal rows spanning the row space of `rows`, rank decided with the
// declared tolerance.
inline Matrix orthonormal_rows(const Matrix& rows) {
  if (rows.rows() == 0) return Matrix(0, rows.cols());
  Eigen::JacobiSVD<Matrix> svd(rows, Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cut = rank_cutoff(s.size() ? s(0) : 0.0);
  Index r = 0;
  while (r < s.size() && s(r) > cut) ++r;
  return svd.matrixV().leftCols(r).transpose();
}

/// A set of at most k vectors in R^d whose span is the output subspace.
///
/// The vectors need not be orthonormal (the relative-error algorithm swaps
/// raw rows in); every subspace-level query orthonormalizes on demand.
class FactorBasis {
 public:
  FactorBasis() = default;

  FactorBasis(Matrix vectors, Index target_rank)
      : vectors_(std::move(vectors)), ambient_dim_(vectors_.cols()), target_rank_(target_rank) {
    require_rank(target_rank_);
    require_finite(vectors_, "factor basis");
    if (vectors_.rows() > target_rank_)
      throw ParameterError("factor basis holds " + std::to_string(vectors_.rows()) +
                           " vectors, more than target rank " + std::to_string(target_rank_));
  }

  static FactorBasis empty(Index ambient_dim, Index target_rank) {
    return FactorBasis(Matrix(0, ambient_dim), target_rank);
  }

  const Matrix& vectors() const noexcept { return vectors_; }
  Index size() const noexcept { return vectors_.rows(); }
  bool is_empty() const noexcept { return vectors_.rows() == 0; }
  Index ambient_dim() const noexcept { return ambient_dim_; }
  Index target_rank() const noexcept { return target_rank_; }

  Matrix orthonormal() const { return orthonormal_rows(vectors_); }
  Index dimension() const { return orthonormal().rows(); }

  void replace(Index i, const RowVector& v) {
    if (i < 0 || i >= size()) throw ParameterError("basis index out of range");
    if (v.size() != ambient_dim_) throw ParameterError("replacement vector dimension mismatch");
    require_finite(v, "replacement vector");
    vectors_.row(i) = v;
  }

 private:
  Matrix vectors_{0, 0};
  Index ambient_dim_ = 0;
  Index target_rank_ = 1;
};

/// Full spectrum of a matrix: d singular values (zero padded, nonincreasing)
/// and a d x d orthonormal set of right singular vectors stored as rows.
struct SpectrumView {
  Vector singular_values;
  Matrix right_vectors;
};

inline SpectrumView spectrum(const Matrix& a) {
  require_finite(a, "matrix");
  const Index d = a.cols();
  SpectrumView out{Vector::Zero(d), Matrix::Identity(d, d)};
  if (a.rows() == 0 || d == 0) return out;
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  out.singular_values.head(svd.singularValues().size()) = svd.singularValues();
  out.right_vectors = svd.matrixV().transpose();
  return out;
}

/// Sum of sigma_i^2 over the band i in [max(1, k - ceil(sqrt k)), k]
/// (1-based indices).
inline double tail_band_mass(std::span<const double> sigma, Index k) {
  require_rank(k);
  const Index lo = std::max<Index>(1, k - ceil_sqrt(k));
  double mass = 0.0;
  for (Index i = lo; i <= k && i <= static_cast<Index>(sigma.size()); ++i)
    mass += sigma[static_cast<std::size_t>(i - 1)] * sigma[static_cast<std::size_t>(i - 1)];
  return mass;
}

inline double tail_band_mass(const SpectrumView& s, Index k) {
  return tail_band_mass(std::span<const double>(s.singular_values.data(),
                                                static_cast<std::size_t>(s.singular_values.size())),
                        k);
}

/// Thin SVD A = U diag(sigma) V of a growing row-stacked matrix.
///
/// V holds right singular vectors as rows. Only singular values above the
/// rank cutoff are kept, so rank() is the numerical rank. The left factor is
/// optional; streaming algorithms that only need the right subspace skip it.
struct SvdState {
  Matrix U{0, 0};
  Vector sigma{0};
  Matrix V{0, 0};
  Index rows = 0;
  Index dim = 0;
  bool track_left = true;
  int updates_since_reorth = 0;

  static SvdState empty(Index d, bool track_left = true) {
    SvdState s;
    s.U = Matrix(0, 0);
    s.V = Matrix(0, d);
    s.dim = d;
    s.track_left = track_left;
    return s;
  }

  static SvdState from_matrix(const Matrix& a, bool track_left = true);

  Index rank() const noexcept { return sigma.size(); }
  double frob_sq() const { return sigma.squaredNorm(); }

  // diag(sigma) * V; its row space and Gram matrix equal the prefix's.
  Matrix scaled_right() const { return sigma.asDiagonal() * V; }

  Matrix reconstruct() const {
    if (!track_left) throw ParameterError("left factor not tracked");
    return U * sigma.asDiagonal() * V;
  }

  std::span<const double> singular_values() const {
    return {sigma.data(), static_cast<std::size_t>(sigma.size())};
  }
};

namespace detail {

// Drop trailing singular triplets below the rank cutoff.
inline void truncate(SvdState& s) {
  const double cut = rank_cutoff(s.rank() ? s.sigma(0) : 0.0);
  Index r = 0;
  while (r < s.rank() && s.sigma(r) > cut) ++r;
  if (r == s.rank()) return;
  s.sigma.conservativeResize(r);
  s.V.conservativeResize(r, Eigen::NoChange);
  if (s.track_left) s.U.conservativeResize(Eigen::NoChange, r);
}

inline void reorthonormalize(SvdState& s) {
  const Index r = s.rank();
  if (r == 0) return;
  Eigen::HouseholderQR<Matrix> qv(s.V.transpose());
  const Matrix qv_thin = qv.householderQ() * Matrix::Identity(s.dim, r);
  const Matrix rv = qv.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  Matrix core = s.sigma.asDiagonal() * rv.transpose();
  Matrix qu_thin;
  if (s.track_left) {
    Eigen::HouseholderQR<Matrix> qu(s.U);
    qu_thin = qu.householderQ() * Matrix::Identity(s.U.rows(), r);
    const Matrix ru = qu.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    core = ru * core;
  }
  Eigen::JacobiSVD<Matrix> svd(core, Eigen::ComputeFullU | Eigen::ComputeFullV);
  s.sigma = svd.singularValues();
  s.V = svd.matrixV().transpose() * qv_thin.transpose();
  if (s.track_left) s.U = qu_thin * svd.matrixU();
  truncate(s);
}

}  // namespace detail

/// Returns the SVD of the old matrix with row `a` appended.
///
/// Projects `a` onto the current right subspace, re-diagonalizes the
/// (r+1) x (r+1) core and rotates the factors. Every kReorthEvery updates the
/// factors are re-orthonormalized to bound drift.
inline SvdState rank_one_update(SvdState state, const RowVector& a) {
  if (a.size() != state.dim)
    throw ParameterError("row dimension " + std::to_string(a.size()) + " != " +
                         std::to_string(state.dim));
  require_finite(a, "row");
  const Index r = state.rank();
  const Index n = state.rows;

  const Vector p = state.V * a.transpose();
  RowVector residual = a - p.transpose() * state.V;
  const double rho = residual.norm();
  const double scale = std::max(r ? state.sigma(0) : 0.0, a.norm());
  const bool grows = rho > rank_cutoff(scale);

  const Index cols = grows ? r + 1 : r;
  Matrix core = Matrix::Zero(r + 1, cols);
  for (Index i = 0; i < r; ++i) core(i, i) = state.sigma(i);
  core.block(r, 0, 1, r) = p.transpose();
  if (grows) core(r, r) = rho;

  SvdState next;
  next.dim = state.dim;
  next.rows = n + 1;
  next.track_left = state.track_left;
  next.updates_since_reorth = state.updates_since_reorth + 1;

  if (cols == 0) {
    // Zero row appended to an empty (all-zero) matrix.
    next.sigma = Vector(0);
    next.V = Matrix(0, state.dim);
    if (next.track_left) next.U = Matrix(n + 1, 0);
    return next;
  }

  Eigen::JacobiSVD<Matrix> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
  next.sigma = svd.singularValues();
  if (grows) {
    Matrix basis(r + 1, state.dim);
    basis.topRows(r) = state.V;
    basis.row(r) = residual / rho;
    next.V = svd.matrixV().transpose() * basis;
  } else {
    next.V = svd.matrixV().transpose() * state.V;
  }
  if (next.track_left) {
    Matrix left = Matrix::Zero(n + 1, r + 1);
    left.topLeftCorner(n, r) = state.U;
    left(n, r) = 1.0;
    next.U = left * svd.matrixU();
  }
  detail::truncate(next);
  if (next.updates_since_reorth >= kReorthEvery) {
    detail::reorthonormalize(next);
    next.updates_since_reorth = 0;
  }
  return next;
}

inline SvdState SvdState::from_matrix(const Matrix& a, bool track_left) {
  SvdState s = SvdState::empty(a.cols(), track_left);
  for (Index i = 0; i < a.rows(); ++i) s = rank_one_update(std::move(s), a.row(i));
  return s;
}

/// Top min(rank(A), k) right singular vectors of A as orthonormal rows.
inline FactorBasis recluster(const Matrix& a, Index k) {
  require_rank(k);
  require_finite(a, "matrix");
  if (a.rows() == 0) return FactorBasis::empty(a.cols(), k);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cut = rank_cutoff(s.size() ? s(0) : 0.0);
  Index r = 0;
  while (r < s.size() && s(r) > cut) ++r;
  return FactorBasis(svd.matrixV().leftCols(std::min(r, k)).transpose(), k);
}

inline FactorBasis recluster(const SvdState& s, Index k) {
  require_rank(k);
  return FactorBasis(s.V.topRows(std::min(s.rank(), k)), k);
}

namespace detail {

inline double residual_sq(const Matrix& a, const FactorBasis& v) {
  if (v.ambient_dim() != a.cols())
    throw ParameterError("basis dimension " + std::to_string(v.ambient_dim()) +
                         " != matrix columns " + std::to_string(a.cols()));
  const Matrix q = v.orthonormal();
  if (q.rows() == 0) return a.squaredNorm();
  return (a - (a * q.transpose()) * q).squaredNorm();
}

inline double opt_from_sigma(const Vector& sigma, Index k) {
  double tail = 0.0;
  for (Index i = k; i < sigma.size(); ++i) tail += sigma(i) * sigma(i);
  return tail;
}

}  // namespace detail

/// ||A - A P_V||_F^2 for the orthogonal projector onto span(V).
inline double lra_cost(const Matrix& a, const FactorBasis& v) {
  require_finite(a, "matrix");
  return detail::residual_sq(a, v);
}

// Same cost evaluated on the compact factor diag(sigma) V of a prefix.
inline double lra_cost(const SvdState& s, const FactorBasis& v) {
  return detail::residual_sq(s.scaled_right(), v);
}

/// Sum of sigma_i^2 for i > k (Eckart-Young optimum), numerically-zero
/// singular values excluded.
inline double opt_cost(const Matrix& a, Index k) {
  require_rank(k);
  require_finite(a, "matrix");
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  Vector s = svd.singularValues();
  const double cut = rank_cutoff(s.size() ? s(0) : 0.0);
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) <= cut) s(i) = 0.0;
  return detail::opt_from_sigma(s, k);
}

inline double opt_cost(const SvdState& s, Index k) {
  require_rank(k);
  return detail::opt_from_sigma(s.sigma, k);
}

/// Orthogonal projector onto span(V) as an explicit d x d matrix.
inline Matrix projector(const FactorBasis& v) {
  const Matrix q = v.orthonormal();
  return q.transpose() * q;
}

/// ||P_1 - P_2||_F^2 via Tr(P_1) + Tr(P_2) - 2 Tr(P_1 P_2).
inline double recourse(const FactorBasis& a, const FactorBasis& b) {
  if (a.ambient_dim() != b.ambient_dim())
    throw ParameterError("recourse between bases of dimension " +
                         std::to_string(a.ambient_dim()) + " and " +
                         std::to_string(b.ambient_dim()));
  // An unchanged spanning set must cost exactly nothing, not rounding noise.
  if (a.vectors().rows() == b.vectors().rows() && a.vectors() == b.vectors()) return 0.0;
  const Matrix qa = a.orthonormal();
  const Matrix qb = b.orthonormal();
  const double cross = (qa * qb.transpose()).squaredNorm();
  return std::max(0.0, static_cast<double>(qa.rows() + qb.rows()) - 2.0 * cross);
}

// Explicit-projector route; used to cross-check the trace formula.
inline double recourse_dense(const FactorBasis& a, const FactorBasis& b) {
  if (a.ambient_dim() != b.ambient_dim()) throw ParameterError("recourse dimension mismatch");
  return (projector(a) - projector(b)).squaredNorm();
}

/// Per-step and cumulative recourse plus the recluster-event log.
class RecourseLedger {
 public:
  struct Entry {
    Index t;
    double recourse;
    bool recluster_event;
  };

  void record(Index t, double value, bool recluster_event) {
    if (!(value >= 0.0)) throw InternalError("negative or NaN recourse recorded");
    entries_.push_back({t, value, recluster_event});
    cumulative_ += value;
    if (recluster_event) ++recluster_events_;
  }

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  double cumulative() const noexcept { return cumulative_; }
  Index recluster_events() const noexcept { return recluster_events_; }

 private:
  std::vector<Entry> entries_;
  double cumulative_ = 0.0;
  Index recluster_events_ = 0;
};

}  // namespace clra
