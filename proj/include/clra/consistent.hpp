#pragma once

// Streaming state machines that maintain a rank-k factor subspace with low
// cumulative recourse:
//   additive_step  - eps * ||A||_F^2 additive error, reclusters on Frobenius growth
//   relative_step  - (1 + eps/2) relative error with heavy/light casework
//   full_step      - relative_step driven by an online ridge-leverage sketch
//   kappa_step     - exact top-k tracker via append-row SVD updates

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "clra/online_sketch.hpp"
#include "clra/subspace.hpp"

namespace clra {

template <typename State>
struct Step {
  State state;
  FactorBasis basis;
};

namespace detail {

inline void require_row(const RowVector& a, Index d) {
  if (a.size() != d)
    throw ParameterError("row dimension " + std::to_string(a.size()) + " != " + std::to_string(d));
  require_finite(a, "row");
}

inline void require_unit_eps(double eps) {
  if (!(eps > 0.0 && eps < 1.0))
    throw ParameterError("relative-error accuracy eps must lie in (0, 1), got " + std::to_string(eps));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Additive error

struct AdditiveState {
  double threshold = 0.0;  // ||A^(s)||_F^2 at the last recluster
  double frob_sq = 0.0;
  FactorBasis basis;
  SvdState prefix;
  double eps = 0.5;
  Index k = 1;
  Index recluster_count = 0;
  Index rows_seen = 0;
  bool last_reclustered = false;

  static AdditiveState start(Index d, Index k, double eps) {
    require_rank(k);
    if (d < 1) throw ParameterError("dimension must be >= 1");
    if (!(eps > 0.0) || !std::isfinite(eps)) throw ParameterError("additive accuracy eps must be > 0");
    AdditiveState s;
    s.basis = FactorBasis::empty(d, k);
    s.prefix = SvdState::empty(d, false);
    s.eps = eps;
    s.k = k;
    return s;
  }
};

/// Recomputes the top-k subspace whenever ||A^(t)||_F^2 has grown by a
/// (1 + eps) factor since the last recompute. Nothing happens while the
/// prefix is entirely zero.
inline Step<AdditiveState> additive_step(AdditiveState state, const RowVector& a) {
  detail::require_row(a, state.basis.ambient_dim());
  state.prefix = rank_one_update(std::move(state.prefix), a);
  state.frob_sq += a.squaredNorm();
  ++state.rows_seen;
  state.last_reclustered = false;
  if (state.frob_sq > 0.0 && state.frob_sq >= (1.0 + state.eps) * state.threshold) {
    state.basis = recluster(state.prefix, state.k);
    state.threshold = state.frob_sq;
    ++state.recluster_count;
    state.last_reclustered = true;
  }
  FactorBasis out = state.basis;
  return {std::move(state), std::move(out)};
}

// ---------------------------------------------------------------------------
// Relative error

enum class RelativeAction {
  kSkippedZeroRow,
  kEpochReset,      // threshold / counter triggered recluster, c <- 0
  kLightReplace,    // one snapshot vector swapped for the new row
  kHeavyRecluster,  // heavy epoch, current basis no longer (1 + eps/2)-good
  kHeavyKeep,
};

struct RelativeState {
  double baseline = 0.0;  // C: OPT at the start of the epoch
  Index counter = 0;      // c
  bool heavy = true;
  FactorBasis basis;
  // diag(sigma_s) V_s of the prefix at the most recent epoch reset; its
  // Gram matrix equals A^(s)^T A^(s).
  Matrix snapshot;
  std::vector<bool> replaced;  // snapshot basis vectors already swapped out
  SvdState prefix;
  double eps = 0.5;
  Index k = 1;
  Index rows_seen = 0;
  Index recluster_count = 0;
  Index heavy_light_transitions = 0;
  RelativeAction last_action = RelativeAction::kSkippedZeroRow;

  static RelativeState start(Index d, Index k, double eps) {
    require_rank(k);
    if (d < 1) throw ParameterError("dimension must be >= 1");
    detail::require_unit_eps(eps);
    RelativeState s;
    s.basis = FactorBasis::empty(d, k);
    s.snapshot = Matrix(0, d);
    s.prefix = SvdState::empty(d, false);
    s.eps = eps;
    s.k = k;
    return s;
  }

  Index light_budget() const { return ceil_sqrt(k); }
};

/// One arrival of the relative-error algorithm.
///
/// State persists across arrivals (C = 0, c = 0, HEAVY = true initially).
/// In the light branch the replaced vector is the surviving snapshot vector
/// with the least mass ||A^(s) v||^2; rows swapped in earlier are never
/// swapped out again within the same epoch.
inline Step<RelativeState> relative_step(RelativeState state, const RowVector& a) {
  detail::require_row(a, state.basis.ambient_dim());
  ++state.rows_seen;
  const double norm_sq = a.squaredNorm();
  if (norm_sq == 0.0) {
    state.last_action = RelativeAction::kSkippedZeroRow;
    FactorBasis out = state.basis;
    return {std::move(state), std::move(out)};
  }

  state.prefix = rank_one_update(std::move(state.prefix), a);
  const double opt = opt_cost(state.prefix, state.k);
  const Index budget = state.light_budget();
  const bool reset = opt >= (1.0 + state.eps / 4.0) * state.baseline ||
                     (state.counter == budget && !state.heavy) ||
                     (state.counter == state.k && state.heavy);

  if (reset) {
    state.baseline = opt;
    state.counter = 0;
    state.basis = recluster(state.prefix, state.k);
    ++state.recluster_count;
    state.snapshot = state.prefix.scaled_right();
    state.replaced.assign(static_cast<std::size_t>(state.basis.size()), false);
    const bool was_heavy = state.heavy;
    state.heavy = tail_band_mass(state.prefix.singular_values(), state.k) >=
                  (state.eps / 3.0) * state.baseline;
    if (was_heavy != state.heavy) ++state.heavy_light_transitions;
    state.last_action = RelativeAction::kEpochReset;
  } else if (!state.heavy) {
    Index victim = -1;
    double least = 0.0;
    for (Index i = 0; i < state.basis.size(); ++i) {
      if (state.replaced[static_cast<std::size_t>(i)]) continue;
      const double mass = (state.snapshot * state.basis.vectors().row(i).transpose()).squaredNorm();
      if (victim < 0 || mass < least) {
        victim = i;
        least = mass;
      }
    }
    if (victim < 0) throw InternalError("light branch has no replaceable basis vector");
    state.basis.replace(victim, a / std::sqrt(norm_sq));
    state.replaced[static_cast<std::size_t>(victim)] = true;
    ++state.counter;
    state.last_action = RelativeAction::kLightReplace;
  } else if (lra_cost(state.prefix, state.basis) >= (1.0 + state.eps / 2.0) * opt) {
    state.basis = recluster(state.prefix, state.k);
    ++state.counter;
    ++state.recluster_count;
    state.last_action = RelativeAction::kHeavyRecluster;
  } else {
    state.last_action = RelativeAction::kHeavyKeep;
  }
  FactorBasis out = state.basis;
  return {std::move(state), std::move(out)};
}

inline bool is_recluster(RelativeAction a) {
  return a == RelativeAction::kEpochReset || a == RelativeAction::kHeavyRecluster;
}

// ---------------------------------------------------------------------------
// Sketched pipeline

struct PipelineState {
  SketchState sketch;
  RelativeState inner;
  SampleDecision last_decision;

  static PipelineState start(Index d, Index k, double eps, double oversampling, std::uint64_t seed) {
    detail::require_unit_eps(eps);
    SketchOptions o;
    o.k = k;
    o.eps = eps;
    o.oversampling = oversampling;
    o.seed = seed;
    return {SketchState::start(d, o), RelativeState::start(d, k, eps), {}};
  }
};

/// Samples the arrival; only sampled rows (reweighted by 1/sqrt(p)) reach
/// the relative-error machine, so unsampled steps incur zero recourse.
inline Step<PipelineState> full_step(PipelineState state, const RowVector& a) {
  detail::require_row(a, state.inner.basis.ambient_dim());
  auto [sketch, decision] = observe(std::move(state.sketch), a);
  state.sketch = std::move(sketch);
  state.last_decision = decision;
  if (decision.sampled) {
    auto inner = relative_step(std::move(state.inner), decision.weight * a);
    state.inner = std::move(inner.state);
  }
  FactorBasis out = state.inner.basis;
  return {std::move(state), std::move(out)};
}

// ---------------------------------------------------------------------------
// Exact tracker

struct KappaState {
  SvdState svd;
  FactorBasis basis;
  Index k = 1;

  static KappaState start(Index d, Index k) {
    require_rank(k);
    if (d < 1) throw ParameterError("dimension must be >= 1");
    return {SvdState::empty(d, false), FactorBasis::empty(d, k), k};
  }
};

/// Appends the row to the prefix SVD and reports its top-k right subspace.
inline Step<KappaState> kappa_step(KappaState state, const RowVector& a) {
  detail::require_row(a, state.basis.ambient_dim());
  state.svd = rank_one_update(std::move(state.svd), a);
  state.basis = recluster(state.svd, state.k);
  FactorBasis out = state.basis;
  return {std::move(state), std::move(out)};
}

}  // namespace clra
