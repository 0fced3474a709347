#pragma once

// Online ridge leverage score sampling. The reweighted sampled rows form a
// projection-cost preserving sketch of the stream seen so far.

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "clra/subspace.hpp"

namespace clra {

inline constexpr double kDefaultOversampling = 10.0;
inline constexpr double kLambdaFloor = 1e-9;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Counter-based uniform draw in [0, 1): a pure function of (seed, index).
inline double uniform_at(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t bits = detail::splitmix64(detail::splitmix64(seed) ^ index);
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

struct SketchOptions {
  Index k = 1;
  double eps = 0.5;
  double oversampling = kDefaultOversampling;
  double lambda_floor = kLambdaFloor;
  Index lambda_refresh_every = 1;
  std::uint64_t seed = 0;
};

struct SampledRow {
  RowVector row;  // raw arrival, unweighted
  double weight;  // 1 / sqrt(p)
  Index arrival;  // 0-based stream index
};

struct SampleDecision {
  bool sampled = false;
  double probability = 0.0;
  double weight = 0.0;
  double score = 0.0;
};

/// State of the online sampler. Sampled rows are only ever appended.
struct SketchState {
  SketchOptions options;
  std::vector<SampledRow> sampled_rows;
  Matrix gram;          // M^T M of the reweighted sketch
  SvdState sketch_svd;  // right factor of M, used for the ridge
  double lambda = kLambdaFloor;
  Index rows_seen = 0;
  Index samples_since_refresh = 0;

  static SketchState start(Index d, SketchOptions options) {
    require_rank(options.k);
    if (d < 1) throw ParameterError("dimension must be >= 1");
    if (!(options.eps > 0.0)) throw ParameterError("sketch accuracy eps must be > 0");
    if (!(options.oversampling > 0.0)) throw ParameterError("oversampling constant must be > 0");
    if (!(options.lambda_floor > 0.0)) throw ParameterError("lambda floor must be > 0");
    if (options.lambda_refresh_every < 1) throw ParameterError("lambda refresh cadence must be >= 1");
    SketchState s;
    s.options = options;
    s.gram = Matrix::Zero(d, d);
    s.sketch_svd = SvdState::empty(d, false);
    s.lambda = options.lambda_floor;
    return s;
  }

  Index dim() const noexcept { return gram.rows(); }
  Index size() const noexcept { return static_cast<Index>(sampled_rows.size()); }
};

/// Online ridge leverage score of `a` against the sketch extended by `a`:
/// q / (1 + q) with q = a (M^T M + lambda I)^{-1} a^T, clamped to [0, 1].
inline double ridge_leverage_score(const SketchState& state, const RowVector& a) {
  if (a.size() != state.dim()) throw ParameterError("row dimension mismatch in leverage score");
  require_finite(a, "row");
  if (!(state.lambda > 0.0)) throw InternalError("ridge must be positive");
  Matrix regularized = state.gram;
  regularized.diagonal().array() += state.lambda;
  Eigen::LLT<Matrix> llt(regularized);
  if (llt.info() != Eigen::Success) throw InternalError("ridge system is not positive definite");
  const Vector x = llt.solve(a.transpose());
  const double q = std::max(0.0, a.dot(x.transpose()));
  return std::clamp(q / (1.0 + q), 0.0, 1.0);
}

inline double sampling_probability(const SketchOptions& o, double score, Index rows_seen) {
  const double raw = o.oversampling * score * static_cast<double>(o.k) *
                     std::log(static_cast<double>(rows_seen) + 2.0) / (o.eps * o.eps);
  return std::min(1.0, raw);
}

/// Scores the arriving row, draws the seeded Bernoulli, and appends the
/// reweighted row when sampled.
inline std::pair<SketchState, SampleDecision> observe(SketchState state, const RowVector& a) {
  SampleDecision decision;
  decision.score = ridge_leverage_score(state, a);
  decision.probability = sampling_probability(state.options, decision.score, state.rows_seen);
  const double u = uniform_at(state.options.seed, static_cast<std::uint64_t>(state.rows_seen));
  decision.sampled = decision.probability > 0.0 && u < decision.probability;
  if (decision.sampled) {
    decision.weight = 1.0 / std::sqrt(decision.probability);
    const RowVector weighted = decision.weight * a;
    state.sampled_rows.push_back({a, decision.weight, state.rows_seen});
    state.gram.noalias() += weighted.transpose() * weighted;
    state.sketch_svd = rank_one_update(std::move(state.sketch_svd), weighted);
    if (++state.samples_since_refresh >= state.options.lambda_refresh_every) {
      const double opt = opt_cost(state.sketch_svd, state.options.k);
      state.lambda = std::max(opt / static_cast<double>(state.options.k), state.options.lambda_floor);
      state.samples_since_refresh = 0;
    }
  }
  ++state.rows_seen;
  return {std::move(state), decision};
}

/// Reweighted sampled rows stacked in arrival order (m x d).
inline Matrix sketch_matrix(const SketchState& state) {
  Matrix m(state.size(), state.dim());
  for (Index i = 0; i < state.size(); ++i) {
    const auto& s = state.sampled_rows[static_cast<std::size_t>(i)];
    m.row(i) = s.weight * s.row;
  }
  return m;
}

}  // namespace clra
