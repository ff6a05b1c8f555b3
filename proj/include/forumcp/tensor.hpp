#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "forumcp/error.hpp"

namespace forumcp {

using Index = Eigen::Index;

/// The three tensor modes: who posted, where, and when.
enum class Mode : int { user = 0, thread = 1, week = 2 };

inline constexpr std::array<Mode, 3> kModes = {Mode::user, Mode::thread, Mode::week};

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::user: return "user";
    case Mode::thread: return "thread";
    case Mode::week: return "week";
  }
  return "?";
}

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct Entry {
  Index i, j, k;
  Scalar value;
};

/// Coordinate-format 3-mode tensor. Entries are kept sorted by (i, j, k),
/// unique, strictly positive and inside `shape`.
template <typename Scalar>
class SparseTensor3 {
 public:
  SparseTensor3() = default;

  /// Builds from unsorted triplets; duplicates are summed and non-positive
  /// sums dropped, like Eigen's setFromTriplets.
  static SparseTensor3 from_triplets(std::array<Index, 3> shape, std::vector<Entry<Scalar>> triplets) {
    for (Index d : shape) {
      if (d < 0) throw ValidationError("negative tensor dimension");
    }
    for (const auto& e : triplets) {
      if (e.i < 0 || e.i >= shape[0] || e.j < 0 || e.j >= shape[1] || e.k < 0 || e.k >= shape[2]) {
        throw IndexError("tensor entry (" + std::to_string(e.i) + "," + std::to_string(e.j) + "," +
                         std::to_string(e.k) + ") outside shape");
      }
      if (e.value < Scalar(0)) throw ValidationError("negative tensor entry");
    }
    std::sort(triplets.begin(), triplets.end(), [](const Entry<Scalar>& a, const Entry<Scalar>& b) {
      return std::tie(a.i, a.j, a.k) < std::tie(b.i, b.j, b.k);
    });
    SparseTensor3 t;
    t.shape_ = shape;
    t.entries_.reserve(triplets.size());
    for (const auto& e : triplets) {
      if (!t.entries_.empty()) {
        auto& last = t.entries_.back();
        if (last.i == e.i && last.j == e.j && last.k == e.k) {
          last.value += e.value;
          continue;
        }
      }
      t.entries_.push_back(e);
    }
    std::erase_if(t.entries_, [](const Entry<Scalar>& e) { return !(e.value > Scalar(0)); });
    return t;
  }

  /// Sparse view of a dense column-major I*J*K array (i fastest).
  static SparseTensor3 from_dense(std::array<Index, 3> shape, const Vector<Scalar>& dense) {
    std::vector<Entry<Scalar>> triplets;
    for (Index k = 0; k < shape[2]; ++k)
      for (Index j = 0; j < shape[1]; ++j)
        for (Index i = 0; i < shape[0]; ++i) {
          const Scalar v = dense(i + shape[0] * (j + shape[1] * k));
          if (v > Scalar(0)) triplets.push_back({i, j, k, v});
        }
    return from_triplets(shape, std::move(triplets));
  }

  const std::array<Index, 3>& shape() const { return shape_; }
  Index dim(Mode m) const { return shape_[static_cast<int>(m)]; }
  const std::vector<Entry<Scalar>>& entries() const { return entries_; }
  std::size_t nnz() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::uint64_t cell_count() const {
    return static_cast<std::uint64_t>(shape_[0]) * static_cast<std::uint64_t>(shape_[1]) *
           static_cast<std::uint64_t>(shape_[2]);
  }

  Scalar sum() const {
    Scalar s(0);
    for (const auto& e : entries_) s += e.value;
    return s;
  }

  Scalar squared_norm() const {
    Scalar s(0);
    for (const auto& e : entries_) s += e.value * e.value;
    return s;
  }

  /// Dense column-major copy (i fastest). Only for small tensors.
  Vector<Scalar> to_dense() const {
    Vector<Scalar> d = Vector<Scalar>::Zero(static_cast<Index>(cell_count()));
    for (const auto& e : entries_) d(e.i + shape_[0] * (e.j + shape_[1] * e.k)) = e.value;
    return d;
  }

 private:
  std::array<Index, 3> shape_{0, 0, 0};
  std::vector<Entry<Scalar>> entries_;
};

/// Rank-R CP model: X ~ sum_r U(:,r) o T(:,r) o W(:,r).
template <typename Scalar>
struct CPModel {
  Matrix<Scalar> U;  // users x R
  Matrix<Scalar> T;  // threads x R
  Matrix<Scalar> W;  // time slots x R
  std::vector<Scalar> objective_trace;
  int sweeps = 0;
  bool converged = false;
  std::vector<std::string> warnings;

  Index rank() const { return U.cols(); }
  std::array<Index, 3> shape() const { return {U.rows(), T.rows(), W.rows()}; }

  const Matrix<Scalar>& factor(Mode m) const {
    switch (m) {
      case Mode::user: return U;
      case Mode::thread: return T;
      case Mode::week: return W;
    }
    return U;
  }
  Matrix<Scalar>& factor(Mode m) { return const_cast<Matrix<Scalar>&>(std::as_const(*this).factor(m)); }

  /// Components whose column is identically zero in some mode.
  std::vector<Index> dead_components() const {
    std::vector<Index> dead;
    for (Index r = 0; r < rank(); ++r) {
      if (U.col(r).isZero(0) || T.col(r).isZero(0) || W.col(r).isZero(0)) dead.push_back(r);
    }
    return dead;
  }

  Index nonzero_count() const {
    return (U.array() != Scalar(0)).count() + (T.array() != Scalar(0)).count() + (W.array() != Scalar(0)).count();
  }
};

template <typename Scalar>
void check_shape(const SparseTensor3<Scalar>& x, const CPModel<Scalar>& model) {
  const auto s = model.shape();
  if (s != x.shape() || model.T.cols() != model.rank() || model.W.cols() != model.rank()) {
    throw ValidationError("model shape does not match tensor shape");
  }
}

/// D(i,j,k) = sum_r U(i,r) T(j,r) W(k,r).
template <typename Scalar>
Scalar reconstruct(const CPModel<Scalar>& model, Index i, Index j, Index k) {
  if (i < 0 || i >= model.U.rows() || j < 0 || j >= model.T.rows() || k < 0 || k >= model.W.rows()) {
    throw IndexError("coordinate (" + std::to_string(i) + "," + std::to_string(j) + "," + std::to_string(k) +
                     ") outside model shape");
  }
  return (model.U.row(i).array() * model.T.row(j).array() * model.W.row(k).array()).sum();
}

namespace detail {

// The two modes other than `m`, in increasing order.
inline std::array<Mode, 2> other_modes(Mode m) {
  switch (m) {
    case Mode::user: return {Mode::thread, Mode::week};
    case Mode::thread: return {Mode::user, Mode::week};
    case Mode::week: return {Mode::user, Mode::thread};
  }
  return {Mode::thread, Mode::week};
}

template <typename Scalar>
Index coord(const Entry<Scalar>& e, Mode m) {
  switch (m) {
    case Mode::user: return e.i;
    case Mode::thread: return e.j;
    case Mode::week: return e.k;
  }
  return e.i;
}

}  // namespace detail

/// Matricized tensor times Khatri-Rao product for `mode`, streamed over the
/// stored entries. Row n of the result is sum over entries with coordinate n
/// in `mode` of x * (hadamard product of the other two factor rows).
template <typename Scalar>
Matrix<Scalar> mttkrp(const SparseTensor3<Scalar>& x, const CPModel<Scalar>& model, Mode mode) {
  check_shape(x, model);
  const auto [ma, mb] = detail::other_modes(mode);
  const Index R = model.rank();
  // Transposed copies keep each factor row contiguous.
  const Matrix<Scalar> At = model.factor(ma).transpose();
  const Matrix<Scalar> Bt = model.factor(mb).transpose();
  Matrix<Scalar> out_t = Matrix<Scalar>::Zero(R, x.dim(mode));
  for (const auto& e : x.entries()) {
    out_t.col(detail::coord(e, mode)).array() +=
        e.value * At.col(detail::coord(e, ma)).array() * Bt.col(detail::coord(e, mb)).array();
  }
  return out_t.transpose();
}

/// Hadamard product of the Gram matrices of the two modes other than `mode`.
template <typename Scalar>
Matrix<Scalar> gram_except(const CPModel<Scalar>& model, Mode mode) {
  const auto [ma, mb] = detail::other_modes(mode);
  const Matrix<Scalar>& A = model.factor(ma);
  const Matrix<Scalar>& B = model.factor(mb);
  return (A.transpose() * A).cwiseProduct(B.transpose() * B);
}

/// ||D||_F^2 from the factor Gram matrices.
template <typename Scalar>
Scalar model_squared_norm(const CPModel<Scalar>& model) {
  return ((model.U.transpose() * model.U).cwiseProduct(model.T.transpose() * model.T))
      .cwiseProduct(model.W.transpose() * model.W)
      .sum();
}

/// ||X - D||_F^2. Small tensors are evaluated cell by cell; larger ones use
/// ||X||^2 - 2<X,D> + ||D||^2.
template <typename Scalar>
Scalar residual_squared_norm(const SparseTensor3<Scalar>& x, const CPModel<Scalar>& model) {
  check_shape(x, model);
  constexpr std::uint64_t kDenseCellLimit = std::uint64_t{1} << 18;
  const auto& shape = x.shape();
  if (x.cell_count() <= kDenseCellLimit) {
    const Vector<Scalar> dense = x.to_dense();
    Scalar s(0);
    for (Index k = 0; k < shape[2]; ++k)
      for (Index j = 0; j < shape[1]; ++j) {
        const Eigen::Array<Scalar, 1, Eigen::Dynamic> tw = model.T.row(j).array() * model.W.row(k).array();
        for (Index i = 0; i < shape[0]; ++i) {
          const Scalar d = (model.U.row(i).array() * tw).sum();
          const Scalar r = dense(i + shape[0] * (j + shape[1] * k)) - d;
          s += r * r;
        }
      }
    return s;
  }
  Scalar inner(0);
  for (const auto& e : x.entries()) inner += e.value * reconstruct(model, e.i, e.j, e.k);
  const Scalar s = x.squared_norm() - Scalar(2) * inner + model_squared_norm(model);
  return s > Scalar(0) ? s : Scalar(0);
}

/// Uniform [0,1) doubles from a 64-bit engine, identical on every standard
/// library (std::uniform_real_distribution is not).
template <typename Engine>
double uniform01(Engine& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

}  // namespace forumcp
