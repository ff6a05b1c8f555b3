#pragma once

#include <cmath>

#include "forumcp/cp_als.hpp"

namespace forumcp {

/// Generalized KL divergence between counts X and the model D:
/// sum_nz (x log(x/d) - x) + sum_all d. Zero only for an exact fit.
template <typename Scalar>
Scalar poisson_objective(const SparseTensor3<Scalar>& x, const CPModel<Scalar>& model) {
  const Scalar mass = (model.U.colwise().sum().array() * model.T.colwise().sum().array() *
                       model.W.colwise().sum().array())
                          .sum();
  Scalar s(0);
  for (const auto& e : x.entries()) {
    const Scalar d = std::max(reconstruct(model, e.i, e.j, e.k), std::numeric_limits<Scalar>::min());
    s += e.value * std::log(e.value / d) - e.value;
  }
  return s + mass;
}

namespace detail {

// `iterations` multiplicative KL updates of one factor (Lee-Seung). Each
// never increases the divergence and keeps positive entries positive. The
// Khatri-Rao rows of the two fixed factors are formed once per call.
template <typename Scalar>
void apr_update(const SparseTensor3<Scalar>& x, CPModel<Scalar>& model, Mode mode, int iterations) {
  const auto [ma, mb] = other_modes(mode);
  const Index R = model.rank();
  const auto& entries = x.entries();
  const Index nnz = static_cast<Index>(entries.size());
  Matrix<Scalar> kr(R, nnz);
  {
    const Matrix<Scalar> At = model.factor(ma).transpose();
    const Matrix<Scalar> Bt = model.factor(mb).transpose();
    for (Index e = 0; e < nnz; ++e) {
      kr.col(e) = At.col(coord(entries[e], ma)).cwiseProduct(Bt.col(coord(entries[e], mb)));
    }
  }
  const Eigen::Array<Scalar, Eigen::Dynamic, 1> denom =
      (model.factor(ma).colwise().sum().array() * model.factor(mb).colwise().sum().array()).transpose();
  Matrix<Scalar>& F = model.factor(mode);
  Matrix<Scalar> Ft = F.transpose();
  Matrix<Scalar> phi_t(R, F.rows());
  for (int it = 0; it < iterations; ++it) {
    phi_t.setZero();
    for (Index e = 0; e < nnz; ++e) {
      const Index n = coord(entries[e], mode);
      const Scalar d = Ft.col(n).dot(kr.col(e));
      if (d > Scalar(0)) phi_t.col(n).noalias() += (entries[e].value / d) * kr.col(e);
    }
    for (Index r = 0; r < R; ++r) {
      if (denom(r) > Scalar(0)) Ft.row(r).array() *= phi_t.row(r).array() / denom(r);
    }
  }
  F = Ft.transpose();
}

// Rescales user and thread columns to unit sum, moving the weight into the
// week factor. The represented tensor is unchanged.
template <typename Scalar>
void normalize_columns(CPModel<Scalar>& model) {
  for (Index r = 0; r < model.rank(); ++r) {
    for (Mode m : {Mode::user, Mode::thread}) {
      const Scalar s = model.factor(m).col(r).sum();
      if (s > Scalar(0)) {
        model.factor(m).col(r) /= s;
        model.W.col(r) *= s;
      }
    }
  }
}

}  // namespace detail

/// Poisson CP fit by multiplicative updates starting from `initial`. Each
/// sweep applies `opts.inner_iterations` updates per mode, then normalizes
/// the columns. Zero entries of `initial` stay zero.
template <typename Scalar>
CPModel<Scalar> cp_apr(const SparseTensor3<Scalar>& x, CPModel<Scalar> initial, const SolverOptions& opts) {
  opts.validate();
  CPModel<Scalar> model = std::move(initial);
  model.objective_trace.clear();
  model.sweeps = 0;
  model.converged = false;
  if (model.rank() < 1) throw ValidationError("rank must be >= 1");
  if (x.empty() || !(x.sum() > Scalar(0))) throw SolverFailure("degenerate Poisson fit: tensor has no mass");
  check_shape(x, model);

  detail::normalize_columns(model);
  Scalar prev = poisson_objective(x, model);
  detail::check_finite(prev, 0);
  model.objective_trace.push_back(prev);
  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    for (Mode m : kModes) detail::apr_update(x, model, m, opts.inner_iterations);
    detail::normalize_columns(model);
    const Scalar obj = poisson_objective(x, model);
    detail::check_finite(obj, sweep);
    model.objective_trace.push_back(obj);
    model.sweeps = sweep;
    const Scalar scale = std::max(std::abs(prev), std::numeric_limits<Scalar>::min());
    if (std::abs(prev - obj) / scale < static_cast<Scalar>(opts.tolerance)) {
      model.converged = true;
      break;
    }
    prev = obj;
  }
  return model;
}

/// Strictly positive random start (uniform [0,1) plus 1e-3) whose total mass
/// matches the data.
template <typename Scalar>
CPModel<Scalar> random_poisson_model(const SparseTensor3<Scalar>& x, Index rank, std::uint64_t seed) {
  CPModel<Scalar> model = random_model<Scalar>(x.shape(), rank, seed);
  for (Mode m : kModes) model.factor(m).array() += Scalar(1e-3);
  detail::normalize_columns(model);
  const Scalar mass = model.W.sum();
  if (mass > Scalar(0)) model.W *= x.sum() / mass;
  return model;
}

/// Poisson CP fit from a random positive start seeded by `opts.seed`.
template <typename Scalar>
CPModel<Scalar> cp_apr(const SparseTensor3<Scalar>& x, Index rank, const SolverOptions& opts) {
  if (rank < 1) throw ValidationError("rank must be >= 1");
  if (x.empty() || !(x.sum() > Scalar(0))) throw SolverFailure("degenerate Poisson fit: tensor has no mass");
  return cp_apr(x, random_poisson_model(x, rank, opts.seed), opts);
}

}  // namespace forumcp
