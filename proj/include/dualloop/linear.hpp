#pragma once

// Dense numeric kernels shared by the graph engine, the policy simulator and
// the cooperation model. Everything here is templated on the scalar type and
// accepts Eigen expressions, so callers can pass blocks, maps or plain
// matrices without copies.

#include <Eigen/Dense>

#include <cmath>

namespace dualloop {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using TernaryRows = Eigen::Matrix<Scalar, Eigen::Dynamic, 3>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

// Linear value propagation on a DAG whose nodes are indexed in topological
// order. `weights(i, j)` is the weight of edge j -> i, so the matrix is
// strictly lower triangular. Node values satisfy v = sources + W v, i.e.
// v = (I - W)^{-1} sources, solved by unit-lower forward substitution.
template <typename DerivedW, typename DerivedX>
Vector<typename DerivedW::Scalar> propagate(const Eigen::MatrixBase<DerivedW>& weights,
                                            const Eigen::MatrixBase<DerivedX>& sources) {
  using Scalar = typename DerivedW::Scalar;
  eigen_assert(weights.rows() == weights.cols());
  eigen_assert(sources.rows() == weights.rows());
  const Matrix<Scalar> system = Matrix<Scalar>::Identity(weights.rows(), weights.cols()) - weights;
  return system.template triangularView<Eigen::UnitLower>().solve(sources.template cast<Scalar>());
}

// Total-effect matrix T = (I - W)^{-1}. T(t, s) is d v_t / d v_s, which for a
// linear network equals the sum over all directed paths s -> t of the
// product of edge weights.
template <typename DerivedW>
Matrix<typename DerivedW::Scalar> total_effect(const Eigen::MatrixBase<DerivedW>& weights) {
  using Scalar = typename DerivedW::Scalar;
  eigen_assert(weights.rows() == weights.cols());
  const Matrix<Scalar> system = Matrix<Scalar>::Identity(weights.rows(), weights.cols()) - weights;
  return system.template triangularView<Eigen::UnitLower>().solve(Matrix<Scalar>::Identity(weights.rows(), weights.cols()));
}

enum class RangeScaling {
  Verbatim,  // y / (max - min), numerator left unshifted
  MinMax,    // (y - min) / (max - min)
};

// Per-column range scaling over policies (rows). Columns with zero range
// produce non-finite entries; callers check `column_ranges` first.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Derived::ColsAtCompileTime> scale_by_range(
    const Eigen::MatrixBase<Derived>& raw, RangeScaling mode = RangeScaling::Verbatim) {
  const auto lo = raw.colwise().minCoeff();
  const auto range = (raw.colwise().maxCoeff() - lo).eval();
  if (mode == RangeScaling::MinMax) {
    return (raw.rowwise() - lo).array().rowwise() / range.array();
  }
  return raw.array().rowwise() / range.array();
}

template <typename Derived>
auto column_ranges(const Eigen::MatrixBase<Derived>& raw) {
  return (raw.colwise().maxCoeff() - raw.colwise().minCoeff()).eval();
}

// Row-wise projection onto the simplex by dividing through the row sum.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Derived::ColsAtCompileTime> divide_by_row_sum(
    const Eigen::MatrixBase<Derived>& scaled) {
  return scaled.array().colwise() / scaled.rowwise().sum().array();
}

template <typename Scalar>
Scalar logistic(Scalar z) {
  using std::exp;
  // Branches keep exp() from overflowing for large |z|.
  if (z >= Scalar(0)) {
    return Scalar(1) / (Scalar(1) + exp(-z));
  }
  const Scalar e = exp(z);
  return e / (Scalar(1) + e);
}

}  // namespace dualloop
