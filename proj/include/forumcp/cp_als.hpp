#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "forumcp/tensor.hpp"

namespace forumcp {

struct SolverOptions {
  double lambda = 1.0;       ///< L1 penalty weight.
  int max_sweeps = 200;
  double tolerance = 1e-6;   ///< Relative objective change that ends the fit.
  std::uint64_t seed = 0;
  int inner_iterations = 10;  ///< Multiplicative updates per mode (Poisson fits).

  void validate() const {
    if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
    if (max_sweeps < 1) throw ValidationError("max_sweeps must be >= 1");
    if (!(tolerance > 0.0)) throw ValidationError("tolerance must be > 0");
    if (inner_iterations < 1) throw ValidationError("inner_iterations must be >= 1");
  }
};

/// Factors drawn uniformly from [0,1) in U, T, W order, column-major.
template <typename Scalar>
CPModel<Scalar> random_model(const std::array<Index, 3>& shape, Index rank, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  CPModel<Scalar> m;
  for (Mode mode : kModes) {
    Matrix<Scalar>& A = m.factor(mode);
    A.resize(shape[static_cast<int>(mode)], rank);
    for (Index c = 0; c < rank; ++c)
      for (Index r = 0; r < A.rows(); ++r) A(r, c) = static_cast<Scalar>(uniform01(gen));
  }
  return m;
}

/// Greedy nonnegative rank-one components of X. Each component starts from
/// uniform [0,1) vectors drawn from the seeded stream, is refined by
/// alternating power iterations on the remaining data and scaled to its
/// least-squares weight split evenly over the modes; its fit is then
/// subtracted from the remaining data, clamping at zero. Components are
/// produced one at a time; a rank r start is a prefix of a rank r+1 start.
template <typename Scalar>
class PowerStart {
 public:
  PowerStart(const SparseTensor3<Scalar>& x, std::uint64_t seed, int iterations = 30)
      : x_(x), gen_(seed), iterations_(iterations), rest_(x.nnz()) {
    for (std::size_t e = 0; e < rest_.size(); ++e) rest_[e] = x.entries()[e].value;
  }

  /// Next component as (u, t, w); all zero once nothing is left to explain.
  std::array<Vector<Scalar>, 3> next() {
    std::array<Vector<Scalar>, 3> v;
    for (Mode m : kModes) {
      Vector<Scalar>& c = v[static_cast<int>(m)];
      c.resize(x_.dim(m));
      for (Index n = 0; n < c.size(); ++n) c(n) = static_cast<Scalar>(uniform01(gen_));
    }
    const auto& entries = x_.entries();
    for (int it = 0; it < iterations_; ++it) {
      for (Mode m : kModes) {
        const auto [ma, mb] = detail::other_modes(m);
        Vector<Scalar>& c = v[static_cast<int>(m)];
        const Vector<Scalar>& a = v[static_cast<int>(ma)];
        const Vector<Scalar>& b = v[static_cast<int>(mb)];
        c.setZero();
        for (std::size_t e = 0; e < entries.size(); ++e) {
          c(detail::coord(entries[e], m)) += rest_[e] * a(detail::coord(entries[e], ma)) * b(detail::coord(entries[e], mb));
        }
        const Scalar norm = c.norm();
        if (!(norm > Scalar(0))) {
          for (auto& z : v) z.setZero();
          return v;
        }
        c /= norm;
      }
    }
    Scalar weight(0);
    for (std::size_t e = 0; e < entries.size(); ++e) weight += rest_[e] * value(v, entries[e]);
    for (std::size_t e = 0; e < entries.size(); ++e) {
      rest_[e] = std::max(Scalar(0), rest_[e] - weight * value(v, entries[e]));
    }
    const Scalar scale = std::cbrt(weight);
    for (auto& c : v) c *= scale;
    return v;
  }

 private:
  static Scalar value(const std::array<Vector<Scalar>, 3>& v, const Entry<Scalar>& e) {
    return v[0](e.i) * v[1](e.j) * v[2](e.k);
  }

  const SparseTensor3<Scalar>& x_;
  std::mt19937_64 gen_;
  int iterations_;
  std::vector<Scalar> rest_;
};

/// The first `rank` PowerStart components as a model.
template <typename Scalar>
CPModel<Scalar> power_start_model(const SparseTensor3<Scalar>& x, Index rank, std::uint64_t seed) {
  CPModel<Scalar> m;
  for (Mode mode : kModes) m.factor(mode) = Matrix<Scalar>::Zero(x.dim(mode), rank);
  PowerStart<Scalar> start(x, seed);
  for (Index r = 0; r < rank; ++r) {
    auto v = start.next();
    for (Mode mode : kModes) m.factor(mode).col(r) = v[static_cast<int>(mode)];
  }
  return m;
}

/// ||X - D||^2 + lambda * (sum U + sum T + sum W) for nonnegative factors.
template <typename Scalar>
Scalar nn_l1_objective(const SparseTensor3<Scalar>& x, const CPModel<Scalar>& model, Scalar lambda) {
  return residual_squared_norm(x, model) + lambda * (model.U.sum() + model.T.sum() + model.W.sum());
}

namespace detail {

// One block of column-wise coordinate descent for a single mode. Each column
// update is the exact minimizer of the objective in that column: the L1
// term shifts the numerator by lambda/2 before clamping at zero.
template <typename Scalar>
void hals_update(const SparseTensor3<Scalar>& x, CPModel<Scalar>& model, Mode mode, Scalar lambda) {
  const Matrix<Scalar> M = mttkrp(x, model, mode);
  const Matrix<Scalar> G = gram_except(model, mode);
  Matrix<Scalar>& A = model.factor(mode);
  const Scalar shift = lambda / Scalar(2);
  for (Index r = 0; r < A.cols(); ++r) {
    const Scalar g = G(r, r);
    if (!(g > Scalar(0))) {
      // The component is dead in another mode; only the penalty sees this column.
      if (lambda > Scalar(0)) A.col(r).setZero();
      continue;
    }
    Vector<Scalar> numer = M.col(r) - A * G.col(r) + g * A.col(r);
    A.col(r) = ((numer.array() - shift) / g).cwiseMax(Scalar(0)).matrix();
  }
}

// Rescales each component so its three columns carry equal L1 mass. The
// product, and so D, is unchanged while the penalty sum_m s_m drops to its
// minimum 3 * (s_u s_t s_w)^(1/3) over all scalings with unit product. A
// component that is zero in one mode is zeroed in all three.
template <typename Scalar>
void balance_components(CPModel<Scalar>& model) {
  for (Index r = 0; r < model.rank(); ++r) {
    const Scalar su = model.U.col(r).sum(), st = model.T.col(r).sum(), sw = model.W.col(r).sum();
    if (!(su > Scalar(0) && st > Scalar(0) && sw > Scalar(0))) {
      for (Mode m : kModes) model.factor(m).col(r).setZero();
      continue;
    }
    const Scalar target = std::cbrt(su * st * sw);
    model.U.col(r) *= target / su;
    model.T.col(r) *= target / st;
    model.W.col(r) *= target / sw;
  }
}

template <typename Scalar>
void check_finite(Scalar objective, int sweep) {
  if (!std::isfinite(static_cast<double>(objective))) {
    throw SolverFailure("non-finite objective at sweep " + std::to_string(sweep));
  }
}

}  // namespace detail

/// Nonnegative CP decomposition with an L1 penalty on every factor entry,
/// fitted by alternating block updates over users, threads and weeks. The
/// objective is non-increasing sweep over sweep and entries that the penalty
/// pushes to zero are exactly zero. With a positive penalty every sweep ends
/// by balancing the L1 mass of each component across its three modes.
/// Fit starting from `initial` (its factors set the rank and shape).
template <typename Scalar>
CPModel<Scalar> cp_als_nn_l1(const SparseTensor3<Scalar>& x, CPModel<Scalar> initial, const SolverOptions& opts) {
  opts.validate();
  CPModel<Scalar> model = std::move(initial);
  model.objective_trace.clear();
  model.sweeps = 0;
  model.converged = false;
  const Index rank = model.rank();
  if (rank < 1) throw ValidationError("rank must be >= 1");
  if (x.empty()) throw ValidationError("cannot decompose an empty tensor");
  check_shape(x, model);
  if ((model.U.array() < Scalar(0)).any() || (model.T.array() < Scalar(0)).any() || (model.W.array() < Scalar(0)).any()) {
    throw ValidationError("initial factors must be nonnegative");
  }
  const Index min_dim = std::min({x.shape()[0], x.shape()[1], x.shape()[2]});
  if (rank > min_dim) {
    model.warnings.push_back("rank " + std::to_string(rank) + " exceeds smallest tensor dimension " +
                             std::to_string(min_dim));
  }
  const Scalar lambda = static_cast<Scalar>(opts.lambda);
  Scalar prev = nn_l1_objective(x, model, lambda);
  detail::check_finite(prev, 0);
  model.objective_trace.push_back(prev);

  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    for (Mode m : kModes) detail::hals_update(x, model, m, lambda);
    if (lambda > Scalar(0)) detail::balance_components(model);
    const Scalar obj = nn_l1_objective(x, model, lambda);
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

/// Fit from power_start_model(x, rank, opts.seed).
template <typename Scalar>
CPModel<Scalar> cp_als_nn_l1(const SparseTensor3<Scalar>& x, Index rank, const SolverOptions& opts) {
  if (rank < 1) throw ValidationError("rank must be >= 1");
  if (x.empty()) throw ValidationError("cannot decompose an empty tensor");
  return cp_als_nn_l1(x, power_start_model(x, rank, opts.seed), opts);
}

}  // namespace forumcp
