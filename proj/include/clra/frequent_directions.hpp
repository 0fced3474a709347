#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "clra/consistent.hpp"
#include "clra/subspace.hpp"

namespace clra {

/// Frequent Directions sketch (insert, then shrink when the buffer fills).
struct FdState {
  Matrix buffer;      // ell x d
  Index next_free = 0;  // first zero row
  Index ell = 0;
  Index k = 1;
  FactorBasis basis;
  Index shrinks = 0;
  double shrunk_mass = 0.0;  // sum of subtracted sigma_ell^2

  static FdState start(Index d, Index k, Index ell = 0) {
    require_rank(k);
    if (d < 1) throw ParameterError("dimension must be >= 1");
    if (ell == 0) ell = 2 * k + 1;
    if (ell <= k)
      throw ParameterError("FD sketch size ell = " + std::to_string(ell) + " must exceed k = " +
                           std::to_string(k));
    FdState s;
    s.buffer = Matrix::Zero(ell, d);
    s.ell = ell;
    s.k = k;
    s.basis = FactorBasis::empty(d, k);
    return s;
  }
};

inline Step<FdState> fd_step(FdState state, const RowVector& a) {
  detail::require_row(a, state.buffer.cols());
  state.buffer.row(state.next_free++) = a;
  if (state.next_free == state.ell) {
    Eigen::JacobiSVD<Matrix> svd(state.buffer, Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double delta = s.size() >= state.ell ? s(state.ell - 1) * s(state.ell - 1) : 0.0;
    state.buffer.setZero();
    Index kept = 0;
    for (Index i = 0; i < s.size(); ++i) {
      const double shrunk = s(i) * s(i) - delta;
      if (shrunk <= 0.0) continue;
      state.buffer.row(kept++) = std::sqrt(shrunk) * svd.matrixV().col(i).transpose();
    }
    state.next_free = kept;
    state.shrunk_mass += delta;
    ++state.shrinks;
  }
  state.basis = recluster(Matrix(state.buffer.topRows(state.next_free)), state.k);
  FactorBasis out = state.basis;
  return {std::move(state), std::move(out)};
}

inline Matrix fd_sketch(const FdState& state) { return state.buffer.topRows(state.next_free); }

}  // namespace clra
