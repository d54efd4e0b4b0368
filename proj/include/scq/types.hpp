#pragma once

#include <Eigen/Dense>

namespace scq {

// Dense types, templated on scalar. Everything numerical in this project is
// built on these; Eigen is the only math dependency.
template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVecX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using ArrX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using ArrXX = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Real = double;
using Matrix = MatX<Real>;
using Vector = VecX<Real>;
using RowVector = RowVecX<Real>;
using Array = ArrX<Real>;
using ArrayXX = ArrXX<Real>;

// 32-bit storage type used by the on-disk dataset and checkpoint formats.
using MatrixF = MatX<float>;
using VectorF = VecX<float>;

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

}  // namespace scq
