#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "rodeo/dataset.hpp"
#include "rodeo/kernels.hpp"

namespace rodeo {

/// Per-coordinate smoothing parameters; every entry must be positive and
/// finite. Validated at each operation boundary.
using BandwidthVector = Eigen::VectorXd;

enum class Smoother { LocalLinear, KernelRegression };

/// One local fit at a target point. coefficients is the (d+1)-vector
/// (intercept, slopes); the intercept is the estimate. effective_weights
/// holds the weight the smoother places on each observation, so
/// estimate = sum_i effective_weights[i] * Y[i], and for the local linear
/// smoother sum_i G_i = 1 and sum_i G_i (X_i - x) = 0 whenever the solve
/// did not hit the conditioning guard (condition_flag).
struct LocalFit {
    double estimate = 0.0;
    Eigen::VectorXd coefficients;
    Eigen::VectorXd effective_weights;
    bool condition_flag = false;
};

/// The bandwidth-derivative statistic for one coordinate:
/// z = d m_hat / d h_j = sum_i gj_weights[i] * Y[i], with conditional
/// standard deviation scale = sigma * ||gj_weights||.
struct DerivativeStat {
    double z = 0.0;
    double scale = 0.0;
    Eigen::VectorXd gj_weights;
};

/// Shared state for all per-coordinate statistics at one (x, h): kernel
/// weights, the weighted design, and a single symmetric factorization
/// reused by the fit and by each of the d derivative solves. This reuse is
/// what keeps a full sweep of derivatives at one factorization's cost.
class LocalSolve {
  public:
    LocalSolve(const Dataset& data, const Eigen::VectorXd& x, const BandwidthVector& h,
               KernelSpec kernel, Smoother smoother = Smoother::LocalLinear)
        : n_(data.n()), d_(data.d()), smoother_(smoother) {
        if (x.size() != d_) throw std::invalid_argument("target point dimension mismatch");
        weights_ = weight_and_logderiv(data.X, x, h, kernel);

        // Rows with zero weight contribute nothing and are dropped.
        active_.reserve(n_);
        for (Eigen::Index i = 0; i < n_; ++i)
            if (weights_.w[i] > 0.0) active_.push_back(i);

        double w_max = 0.0;
        for (Eigen::Index i : active_) w_max = std::max(w_max, weights_.w[i]);
        Eigen::Index support = 0;
        if (kernel.kind == Kernel::Gaussian) {
            for (Eigen::Index i : active_)
                if (weights_.w[i] > 1e-12 * w_max) ++support;
        } else {
            support = static_cast<Eigen::Index>(active_.size());
        }
        const Eigen::Index required = smoother_ == Smoother::LocalLinear ? d_ + 1 : 1;
        if (support < required)
            throw numerical_error("insufficient local support: " + std::to_string(support) +
                                  " weighted points, need " + std::to_string(required));

        const Eigen::Index m = static_cast<Eigen::Index>(active_.size());
        w_active_.resize(m);
        y_active_.resize(m);
        for (Eigen::Index a = 0; a < m; ++a) {
            w_active_[a] = weights_.w[active_[a]];
            y_active_[a] = data.Y[active_[a]];
        }

        if (smoother_ == Smoother::KernelRegression) {
            w_sum_ = w_active_.sum();
            fit_.estimate = w_active_.dot(y_active_) / w_sum_;
            fit_.coefficients = Eigen::VectorXd::Zero(d_ + 1);
            fit_.coefficients[0] = fit_.estimate;
            fit_.effective_weights = Eigen::VectorXd::Zero(n_);
            for (Eigen::Index a = 0; a < m; ++a)
                fit_.effective_weights[active_[a]] = w_active_[a] / w_sum_;
            return;
        }

        design_.resize(m, d_ + 1);
        design_.col(0).setOnes();
        for (Eigen::Index a = 0; a < m; ++a)
            design_.row(a).tail(d_) = (data.X.row(active_[a]).transpose() - x).transpose();

        // A = X^T W X with the ridge guard for near-singular windows.
        Eigen::MatrixXd wx = w_active_.asDiagonal() * design_;
        Eigen::MatrixXd a_mat = design_.transpose() * wx;
        ldlt_.compute(a_mat);
        // rcond() is blind to exact rank deficiency (LDLT's solve zeroes out
        // components on zero pivots), so the pivots are checked directly: A is
        // positive semidefinite, and a vanishing or negative pivot relative to
        // the largest signals a degenerate window.
        const double pivot_max = ldlt_.vectorD().maxCoeff();
        const double pivot_min = ldlt_.vectorD().minCoeff();
        if (ldlt_.info() != Eigen::Success || ldlt_.rcond() < 1e-12 ||
            pivot_min <= 1e-12 * pivot_max) {
            const double ridge = 1e-10 * a_mat.trace() / static_cast<double>(d_ + 1);
            a_mat.diagonal().array() += ridge;
            ldlt_.compute(a_mat);
            fit_.condition_flag = true;
            if (ldlt_.info() != Eigen::Success)
                throw numerical_error("local system singular beyond ridge guard");
        }

        Eigen::VectorXd rhs = wx.transpose() * y_active_;
        fit_.coefficients = ldlt_.solve(rhs);
        Eigen::VectorXd e1 = Eigen::VectorXd::Unit(d_ + 1, 0);
        inv_e1_ = ldlt_.solve(e1);
        if (!fit_.coefficients.allFinite() || !inv_e1_.allFinite())
            throw numerical_error("local system singular beyond ridge guard");

        fit_.estimate = fit_.coefficients[0];
        gtilde_ = design_ * inv_e1_;
        fit_.effective_weights = Eigen::VectorXd::Zero(n_);
        for (Eigen::Index a = 0; a < m; ++a)
            fit_.effective_weights[active_[a]] = w_active_[a] * gtilde_[a];
    }

    const LocalFit& fit() const { return fit_; }
    const WeightDiagonals& weights() const { return weights_; }

    /// Derivative statistic for coordinate j at the solve's (x, h), using
    /// the already-computed factorization.
    DerivativeStat derivative(Eigen::Index j, double sigma) const {
        if (j < 0 || j >= d_) throw std::invalid_argument("variable index out of range");
        if (sigma < 0.0) throw std::invalid_argument("sigma must be nonnegative");
        const Eigen::Index m = static_cast<Eigen::Index>(active_.size());

        Eigen::VectorXd gj_active(m);
        if (smoother_ == Smoother::KernelRegression) {
            // d/dh_j of sum(wY)/sum(w) expands to (WL_j - c_j W / D) / D.
            double c_j = 0.0;
            for (Eigen::Index a = 0; a < m; ++a) c_j += weights_.wl(active_[a], j);
            for (Eigen::Index a = 0; a < m; ++a)
                gj_active[a] = (weights_.wl(active_[a], j) - c_j * w_active_[a] / w_sum_) / w_sum_;
        } else {
            // Row vector e1^T B L_j (I - X B) assembled from the shared
            // factorization: one extra solve per coordinate.
            Eigen::VectorXd u(m);
            for (Eigen::Index a = 0; a < m; ++a) u[a] = gtilde_[a] * weights_.wl(active_[a], j);
            Eigen::VectorXd t = design_.transpose() * u;
            Eigen::VectorXd s = ldlt_.solve(t);
            Eigen::VectorXd proj = design_ * s;
            for (Eigen::Index a = 0; a < m; ++a) gj_active[a] = u[a] - w_active_[a] * proj[a];
        }

        DerivativeStat stat;
        stat.gj_weights = Eigen::VectorXd::Zero(n_);
        for (Eigen::Index a = 0; a < m; ++a) stat.gj_weights[active_[a]] = gj_active[a];
        stat.z = gj_active.dot(y_active_);
        stat.scale = sigma * gj_active.norm();
        return stat;
    }

  private:
    Eigen::Index n_;
    Eigen::Index d_;
    Smoother smoother_;
    WeightDiagonals weights_;
    std::vector<Eigen::Index> active_;
    Eigen::VectorXd w_active_;
    Eigen::VectorXd y_active_;
    Eigen::MatrixXd design_;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
    Eigen::VectorXd inv_e1_;
    Eigen::VectorXd gtilde_;
    LocalFit fit_;
    double w_sum_ = 0.0;
};

/// Local linear fit at x with bandwidths h.
inline LocalFit fit_local_linear(const Dataset& data, const Eigen::VectorXd& x,
                                 const BandwidthVector& h, KernelSpec kernel) {
    return LocalSolve(data, x, h, kernel, Smoother::LocalLinear).fit();
}

/// Local fit with the configured smoother.
inline LocalFit fit_point(const Dataset& data, const Eigen::VectorXd& x, const BandwidthVector& h,
                          KernelSpec kernel, Smoother smoother) {
    return LocalSolve(data, x, h, kernel, smoother).fit();
}

/// Bandwidth derivative of the local linear estimate with respect to h_j,
/// with its conditional scale for noise level sigma.
inline DerivativeStat derivative_stat(const Dataset& data, const Eigen::VectorXd& x,
                                      const BandwidthVector& h, Eigen::Index j, KernelSpec kernel,
                                      double sigma, Smoother smoother = Smoother::LocalLinear) {
    return LocalSolve(data, x, h, kernel, smoother).derivative(j, sigma);
}

}  // namespace rodeo
