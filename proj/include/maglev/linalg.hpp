#pragma once

#include <Eigen/Dense>

#include "maglev/errors.hpp"

namespace maglev {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat12 = Eigen::Matrix<double, 12, 12>;
using Mat12x6 = Eigen::Matrix<double, 12, 6>;
using Mat6x12 = Eigen::Matrix<double, 6, 12>;

// Relative singular-value cut used by every pseudo-inverse in the toolkit.
inline constexpr double kPinvRelativeTolerance = 1e-10;

// Moore-Penrose pseudo-inverse via SVD. Throws RankDeficientInput when the
// smallest singular value falls below kPinvRelativeTolerance * largest, so
// callers never silently get a truncated (least-squares) inverse.
template <typename Derived>
Eigen::Matrix<double, Derived::ColsAtCompileTime, Derived::RowsAtCompileTime>
pseudo_inverse(const Eigen::MatrixBase<Derived>& a) {
    using Result =
        Eigen::Matrix<double, Derived::ColsAtCompileTime, Derived::RowsAtCompileTime>;
    using Plain = typename Derived::PlainObject;
    Eigen::JacobiSVD<Plain> svd(a.eval(), Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const Eigen::Index rank_needed = std::min(a.rows(), a.cols());
    if (rank_needed == 0) {
        return Result::Zero(a.cols(), a.rows());
    }
    const double largest = sv(0);
    if (!(largest > 0.0) || sv(rank_needed - 1) < kPinvRelativeTolerance * largest) {
        throw RankDeficientInput("pseudo-inverse: matrix is rank deficient (sigma_min/sigma_max = " +
                                 std::to_string(largest > 0.0 ? sv(rank_needed - 1) / largest : 0.0) +
                                 ")");
    }
    Result s_inv = Result::Zero(a.cols(), a.rows());
    for (Eigen::Index i = 0; i < rank_needed; ++i) {
        s_inv(i, i) = 1.0 / sv(i);
    }
    return svd.matrixV() * s_inv * svd.matrixU().transpose();
}

// Smallest eigenvalue of the symmetric part of a square matrix.
template <typename Derived>
double min_symmetric_eigenvalue(const Eigen::MatrixBase<Derived>& a) {
    using Plain = typename Derived::PlainObject;
    const Plain sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Plain> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

template <typename Derived>
bool is_positive_definite(const Eigen::MatrixBase<Derived>& a) {
    return min_symmetric_eigenvalue(a) > 0.0;
}

template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& a) {
    return a.cwiseAbs().maxCoeff();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
    return a.allFinite();
}

}  // namespace maglev
