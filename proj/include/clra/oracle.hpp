#pragma once

#include <utility>
#include <vector>

#include "clra/streams.hpp"
#include "clra/subspace.hpp"

namespace clra {

/// Exact per-prefix optimum: OPT_t, an optimal basis and the spectrum of
/// every prefix A^(t), t = 1..n (stored 0-based).
struct OracleTrace {
  std::vector<double> opt;
  std::vector<FactorBasis> basis;
  std::vector<Vector> spectrum;  // d singular values, zero padded

  Index size() const noexcept { return static_cast<Index>(opt.size()); }
};

// Cost grows as n * (d^2 r) through the append-row updates; meant for desk-scale
// streams.
inline OracleTrace oracle_trace(const Matrix& rows, Index k) {
  require_rank(k);
  require_finite(rows, "stream");
  const Index d = rows.cols();
  OracleTrace trace;
  trace.opt.reserve(static_cast<std::size_t>(rows.rows()));
  trace.basis.reserve(static_cast<std::size_t>(rows.rows()));
  trace.spectrum.reserve(static_cast<std::size_t>(rows.rows()));
  SvdState prefix = SvdState::empty(d, false);
  for (Index t = 0; t < rows.rows(); ++t) {
    prefix = rank_one_update(std::move(prefix), rows.row(t));
    trace.opt.push_back(opt_cost(prefix, k));
    trace.basis.push_back(recluster(prefix, k));
    Vector s = Vector::Zero(d);
    s.head(prefix.rank()) = prefix.sigma;
    trace.spectrum.push_back(std::move(s));
  }
  return trace;
}

inline OracleTrace oracle_trace(const StreamSource& stream, Index k) {
  return oracle_trace(stream.rows(), k);
}

}  // namespace clra
