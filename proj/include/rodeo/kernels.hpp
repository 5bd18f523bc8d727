#pragma once

#include <Eigen/Core>
#include <cmath>

#include "rodeo/common.hpp"

namespace rodeo {

enum class Kernel { Gaussian, Epanechnikov };

struct KernelSpec {
    Kernel kind = Kernel::Gaussian;
};

/// Unnormalized kernel value. Gaussian K(u) = exp(-u^2/2); Epanechnikov
/// K(u) = (5 - u^2) on |u| <= sqrt(5) and 0 outside. No 1/h factor: the
/// determinant normalization cancels in every quantity built from these
/// weights, so it is dropped throughout.
inline double kernel_weight(KernelSpec kernel, double u) {
    switch (kernel.kind) {
        case Kernel::Gaussian:
            return std::exp(-0.5 * u * u);
        case Kernel::Epanechnikov:
            return u * u <= 5.0 ? 5.0 - u * u : 0.0;
    }
    return 0.0;
}

/// Diagonals of the product-kernel weight matrix W and of the per-variable
/// log-derivative matrices L_j, evaluated at a target point x with
/// per-coordinate bandwidths h.
///
///   w(i)     = prod_j K((X_ij - x_j)/h_j)
///   l(i, j)  = d/dh_j log K((X_ij - x_j)/h_j)
///   wl(i, j) = w(i) * l(i, j), evaluated jointly
///
/// wl matters for the Epanechnikov kernel, whose l diverges as the
/// coordinate approaches the support edge while w vanishes; the joint form
/// 2(X_ij - x_j)^2 / h_j^3 * prod_{k != j} K(u_ik) stays finite there.
struct WeightDiagonals {
    Eigen::VectorXd w;
    Eigen::MatrixXd l;
    Eigen::MatrixXd wl;
    Eigen::VectorXd h;
};

inline WeightDiagonals weight_and_logderiv(const Eigen::MatrixXd& X, const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& h, KernelSpec kernel) {
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    if (x.size() != d) throw std::invalid_argument("target point dimension mismatch");
    if (h.size() != d) throw std::invalid_argument("bandwidth dimension mismatch");
    for (Eigen::Index j = 0; j < d; ++j)
        if (!(h[j] > 0.0) || !std::isfinite(h[j]))
            throw std::invalid_argument("bandwidths must be positive and finite");

    WeightDiagonals out;
    out.h = h;
    out.w.resize(n);
    out.l.setZero(n, d);
    out.wl.setZero(n, d);

    if (kernel.kind == Kernel::Gaussian) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double sum_sq = 0.0;
            for (Eigen::Index j = 0; j < d; ++j) {
                const double diff = X(i, j) - x[j];
                const double u = diff / h[j];
                sum_sq += u * u;
                out.l(i, j) = diff * diff / (h[j] * h[j] * h[j]);
            }
            out.w[i] = std::exp(-0.5 * sum_sq);
            out.wl.row(i) = out.w[i] * out.l.row(i);
        }
        return out;
    }

    // Epanechnikov: prefix/suffix factor products give prod_{k != j} K
    // without dividing by a vanishing factor.
    Eigen::VectorXd factors(d), prefix(d + 1), suffix(d + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j)
            factors[j] = kernel_weight(kernel, (X(i, j) - x[j]) / h[j]);
        prefix[0] = 1.0;
        for (Eigen::Index j = 0; j < d; ++j) prefix[j + 1] = prefix[j] * factors[j];
        suffix[d] = 1.0;
        for (Eigen::Index j = d - 1; j >= 0; --j) suffix[j] = suffix[j + 1] * factors[j];
        out.w[i] = prefix[d];
        for (Eigen::Index j = 0; j < d; ++j) {
            const double diff = X(i, j) - x[j];
            const double u2 = diff * diff / (h[j] * h[j]);
            if (u2 > 5.0) continue;  // outside support: l and wl stay 0
            const double rest = prefix[j] * suffix[j + 1];
            out.wl(i, j) = 2.0 * diff * diff / (h[j] * h[j] * h[j]) * rest;
            if (factors[j] > 0.0) out.l(i, j) = 2.0 * diff * diff / (h[j] * h[j] * h[j] * (5.0 - u2));
        }
    }
    return out;
}

}  // namespace rodeo
