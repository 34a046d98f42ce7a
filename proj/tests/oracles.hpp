// Test-side reference implementations, independent of the library code they
// check.
#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Dense>

#include "core/tensor.hpp"

namespace oracles {

// Least-squares solve via a hand-rolled one-sided Jacobi SVD. Deliberately
// avoids the normal-equations route used by the implementation.
inline Eigen::Vector3d svd_pinv_solve(Eigen::Matrix<double, 4, 3> A,
                                      const Eigen::Vector4d& y) {
    Eigen::Matrix<double, 4, 3> U = A;
    Eigen::Matrix3d V = Eigen::Matrix3d::Identity();
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                const double app = U.col(p).squaredNorm();
                const double aqq = U.col(q).squaredNorm();
                const double apq = U.col(p).dot(U.col(q));
                if (app * aqq > 0.0) {
                    off = std::max(off, std::abs(apq) / std::sqrt(app * aqq));
                }
                if (std::abs(apq) < 1e-300) continue;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                const Eigen::Vector4d up = U.col(p), uq = U.col(q);
                U.col(p) = c * up - s * uq;
                U.col(q) = s * up + c * uq;
                const Eigen::Vector3d vp = V.col(p), vq = V.col(q);
                V.col(p) = c * vp - s * vq;
                V.col(q) = s * vp + c * vq;
            }
        }
        if (off < 1e-15) break;
    }
    // Columns of U are now orthogonal; their norms are the singular values.
    Eigen::Vector3d x = Eigen::Vector3d::Zero();
    double sigma_max = 0.0;
    for (int i = 0; i < 3; ++i) sigma_max = std::max(sigma_max, U.col(i).norm());
    for (int i = 0; i < 3; ++i) {
        const double sigma = U.col(i).norm();
        if (sigma > 1e-12 * sigma_max) {
            x += V.col(i) * (U.col(i).dot(y) / (sigma * sigma));
        }
    }
    return x;
}

// Matrix exponential by scaling and squaring with a long Taylor tail.
template <int N>
Eigen::Matrix<double, N, N> expm(const Eigen::Matrix<double, N, N>& M) {
    using Mat = Eigen::Matrix<double, N, N>;
    const double norm = M.template lpNorm<1>();
    int squarings = 0;
    double scale = 1.0;
    while (norm * scale > 0.25) {
        scale *= 0.5;
        ++squarings;
    }
    const Mat A = M * scale;
    Mat result = Mat::Identity();
    Mat term = Mat::Identity();
    for (int r = 1; r <= 24; ++r) {
        term = term * A / static_cast<double>(r);
        result += term;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

// Central finite difference of a scalar function with respect to one
// coordinate of a tensor.
inline double finite_difference(const std::function<double()>& f,
                                stnav::ad::Tensor& param, long index, double h) {
    double* p = param.data();
    const double saved = p[index];
    p[index] = saved + h;
    const double fp = f();
    p[index] = saved - h;
    const double fm = f();
    p[index] = saved;
    return (fp - fm) / (2.0 * h);
}

// Relative-error gradient comparison with an absolute floor for near-zero
// gradients.
inline bool grad_close(double analytic, double fd, double rtol,
                       double atol = 1e-8) {
    return std::abs(analytic - fd) <=
           atol + rtol * std::max(std::abs(analytic), std::abs(fd));
}

}  // namespace oracles
