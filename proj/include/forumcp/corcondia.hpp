#pragma once

#include <Eigen/QR>

#include "forumcp/tensor.hpp"

namespace forumcp {

template <typename Scalar>
struct CoreConsistency {
  double score = 0.0;
  /// Some factor matrix was rank deficient; the core is the minimum-norm
  /// least-squares solution.
  bool pinv_fallback = false;
  /// R x R x R core, column-major (first index fastest).
  Vector<Scalar> core;
};

/// Least-squares core of X given fixed CP factors. Uses the identity
/// pinv(C kron B kron A) = pinv(C) kron pinv(B) kron pinv(A) together with
/// pinv(A) = pinv(A'A) A'. The data is read once, in the projection
/// X x1 A' x2 B' x3 C', accumulated per time slot.
template <typename Scalar>
Vector<Scalar> least_squares_core(const SparseTensor3<Scalar>& x, const CPModel<Scalar>& model, bool* rank_deficient = nullptr) {
  check_shape(x, model);
  const Index R = model.rank();
  const Index K = x.dim(Mode::week);
  const Matrix<Scalar> Ut = model.U.transpose();
  const Matrix<Scalar> Tt = model.T.transpose();

  // Column k holds vec(sum over slice k of x * U(i,:)' T(j,:)).
  Matrix<Scalar> slices = Matrix<Scalar>::Zero(R * R, K);
  for (const auto& e : x.entries()) {
    Eigen::Map<Matrix<Scalar>> Y(slices.col(e.k).data(), R, R);
    Y.noalias() += e.value * Ut.col(e.i) * Tt.col(e.j).transpose();
  }
  Matrix<Scalar> H = slices * model.W;  // (R*R) x R

  bool deficient = false;
  auto gram_pinv = [&](const Matrix<Scalar>& A) {
    Eigen::CompleteOrthogonalDecomposition<Matrix<Scalar>> cod(A.transpose() * A);
    if (cod.rank() < R) deficient = true;
    return Matrix<Scalar>(cod.pseudoInverse());
  };
  const Matrix<Scalar> Pu = gram_pinv(model.U);
  const Matrix<Scalar> Pt = gram_pinv(model.T);
  const Matrix<Scalar> Pw = gram_pinv(model.W);

  // Mode 3, then modes 1 and 2 slice by slice.
  H = (H * Pw.transpose()).eval();
  for (Index s = 0; s < R; ++s) {
    Eigen::Map<Matrix<Scalar>> slice(H.col(s).data(), R, R);
    slice = (Pu * slice * Pt.transpose()).eval();
  }
  if (rank_deficient) *rank_deficient = deficient;
  return Eigen::Map<const Vector<Scalar>>(H.data(), R * R * R);
}

/// Core consistency: 100 * (1 - sum (G - superdiagonal)^2 / R).
template <typename Scalar>
CoreConsistency<Scalar> corcondia(const SparseTensor3<Scalar>& x, const CPModel<Scalar>& model) {
  CoreConsistency<Scalar> out;
  out.core = least_squares_core(x, model, &out.pinv_fallback);
  const Index R = model.rank();
  Vector<Scalar> diff = out.core;
  for (Index r = 0; r < R; ++r) diff(r + R * (r + R * r)) -= Scalar(1);
  out.score = 100.0 * (1.0 - static_cast<double>(diff.squaredNorm()) / static_cast<double>(R));
  return out;
}

}  // namespace forumcp
