#include "rodeo/loclin.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

namespace {

using rodeo::Dataset;
using rodeo::DerivativeStat;
using rodeo::fit_local_linear;
using rodeo::fit_point;
using rodeo::Kernel;
using rodeo::KernelSpec;
using rodeo::LocalFit;
using rodeo::LocalSolve;
using rodeo::Smoother;

constexpr KernelSpec kGauss{Kernel::Gaussian};
constexpr KernelSpec kEpan{Kernel::Epanechnikov};

Eigen::VectorXd constant_h(Eigen::Index d, double v) {
    return Eigen::VectorXd::Constant(d, v);
}

TEST(FitLocalLinear, ReproducesConstants) {
    const Dataset data = testsupport::make_dataset(
        30, 2, 101, 0, [](const Eigen::VectorXd&) { return 4.2; }, 0.0);
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 0.3);
    for (double hv : {0.2, 0.7, 3.0}) {
        const LocalFit fit = fit_local_linear(data, x, constant_h(2, hv), kGauss);
        EXPECT_NEAR(fit.estimate, 4.2, 1e-12);
        EXPECT_NEAR(fit.coefficients.tail(2).cwiseAbs().maxCoeff(), 0.0, 1e-10);
    }
}

TEST(FitLocalLinear, ReproducesAffineFunctions) {
    const auto affine = [](const Eigen::VectorXd& x) { return 1.0 + 2.0 * x[0] - 0.7 * x[2]; };
    const Dataset data = testsupport::make_dataset(50, 3, 102, 0, affine, 0.0);
    rodeo::SplitMix64 rng(rodeo::RngSeed{102, 1});
    for (int rep = 0; rep < 10; ++rep) {
        Eigen::VectorXd x(3), h(3);
        for (int j = 0; j < 3; ++j) {
            x[j] = rng.next_uniform();
            h[j] = rng.next_uniform(0.2, 1.5);
        }
        const LocalFit fit = fit_local_linear(data, x, h, kGauss);
        EXPECT_NEAR(fit.estimate, affine(x), 1e-10);
    }
}

TEST(FitLocalLinear, HugeBandwidthMatchesOrdinaryLeastSquares) {
    const Dataset data = testsupport::make_dataset(
        40, 2, 103, 0, [](const Eigen::VectorXd& x) { return std::sin(3.0 * x[0]) + x[1] * x[1]; },
        0.3);
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 0.4);
    const LocalFit fit = fit_local_linear(data, x, constant_h(2, 1e6), kGauss);
    EXPECT_NEAR(fit.estimate, testsupport::oracle_ols_at(data, x), 1e-6);
}

TEST(FitLocalLinear, MatchesIndependentWeightedSolver) {
    // SVD on the sqrt(W)-scaled system is a wholly different route to the
    // same weighted least-squares minimizer.
    for (int instance = 0; instance < 5; ++instance) {
        const Dataset data = testsupport::make_dataset(
            40, 3, 104, static_cast<std::uint64_t>(instance),
            [](const Eigen::VectorXd& x) { return 5.0 * x[0] * x[0] * x[1]; }, 0.5);
        rodeo::SplitMix64 rng(rodeo::RngSeed{104, 100 + static_cast<std::uint64_t>(instance)});
        Eigen::VectorXd x(3), h(3);
        for (int j = 0; j < 3; ++j) {
            x[j] = rng.next_uniform(0.2, 0.8);
            h[j] = rng.next_uniform(0.4, 1.0);
        }
        for (KernelSpec kernel : {kGauss, kEpan}) {
            const LocalFit fit = fit_local_linear(data, x, h, kernel);
            const Eigen::VectorXd oracle = testsupport::oracle_local_linear(data, x, h, kernel);
            EXPECT_NEAR(fit.estimate, oracle[0], 1e-8);
            for (Eigen::Index c = 0; c < 4; ++c)
                EXPECT_NEAR(fit.coefficients[c], oracle[c], 1e-7)
                    << "coefficient " << c;
        }
    }
}

TEST(EffectiveWeights, ReproductionIdentities) {
    const Dataset data = testsupport::make_dataset(
        60, 3, 105, 0, [](const Eigen::VectorXd& x) { return x[0] * x[1]; }, 0.4);
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 0.5);
    const Eigen::VectorXd h = constant_h(3, 0.6);
    const LocalFit fit = fit_local_linear(data, x, h, kGauss);
    ASSERT_FALSE(fit.condition_flag);

    EXPECT_NEAR(fit.effective_weights.sum(), 1.0, 1e-10);
    Eigen::VectorXd moment = Eigen::VectorXd::Zero(3);
    for (Eigen::Index i = 0; i < data.n(); ++i)
        moment += fit.effective_weights[i] * (data.X.row(i).transpose() - x);
    EXPECT_NEAR(moment.cwiseAbs().maxCoeff(), 0.0, 1e-10);
    EXPECT_NEAR(fit.effective_weights.dot(data.Y), fit.estimate, 1e-12);
}

TEST(DerivativeStat, MatchesFiniteDifferences) {
    // The cornerstone identity: the closed-form z is the derivative of the
    // estimate with respect to h_j.
    const Dataset data = testsupport::make_dataset(
        50, 3, 106, 0,
        [](const Eigen::VectorXd& x) { return 2.0 * std::sin(5.0 * x[0]) + x[1]; }, 0.5);
    rodeo::SplitMix64 rng(rodeo::RngSeed{106, 1});
    for (int rep = 0; rep < 10; ++rep) {
        Eigen::VectorXd x(3), h(3);
        for (int j = 0; j < 3; ++j) {
            x[j] = rng.next_uniform(0.2, 0.8);
            h[j] = rng.next_uniform(0.2, 1.0);
        }
        const LocalSolve solve(data, x, h, kGauss);
        for (Eigen::Index j = 0; j < 3; ++j) {
            const double z = solve.derivative(j, 1.0).z;
            const double fd =
                testsupport::finite_difference_z(data, x, h, j, kGauss, 1e-5 * h[j]);
            const double denom = std::max(std::abs(z), std::abs(fd));
            if (denom < 1e-4)
                EXPECT_NEAR(z, fd, 1e-9);
            else
                EXPECT_LE(std::abs(z - fd) / denom, 1e-5) << "rep " << rep << " j " << j;
        }
    }
}

TEST(DerivativeStat, ZeroForNoiselessLinearData) {
    const auto affine = [](const Eigen::VectorXd& x) { return 0.5 + x[0] - 2.0 * x[1]; };
    const Dataset data = testsupport::make_dataset(40, 2, 107, 0, affine, 0.0);
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 0.6);
    for (Eigen::Index j = 0; j < 2; ++j) {
        const DerivativeStat stat =
            rodeo::derivative_stat(data, x, constant_h(2, 0.5), j, kGauss, 1.0);
        EXPECT_NEAR(stat.z, 0.0, 1e-8);
    }
}

TEST(DerivativeStat, TypeInvariantsAndSigmaScaling) {
    const Dataset data = testsupport::make_dataset(
        40, 2, 108, 0, [](const Eigen::VectorXd& x) { return x[0] * x[0]; }, 0.3);
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 0.5);
    const Eigen::VectorXd h = constant_h(2, 0.5);
    const LocalSolve solve(data, x, h, kGauss);

    const DerivativeStat s1 = solve.derivative(0, 1.0);
    EXPECT_NEAR(s1.z, s1.gj_weights.dot(data.Y), 1e-13);
    EXPECT_NEAR(s1.scale, s1.gj_weights.norm(), 1e-13);

    const DerivativeStat s0 = solve.derivative(0, 0.0);
    EXPECT_DOUBLE_EQ(s0.scale, 0.0);
    EXPECT_DOUBLE_EQ(s0.z, s1.z);

    const DerivativeStat s2 = solve.derivative(0, 2.0);
    EXPECT_DOUBLE_EQ(s2.scale, 2.0 * s1.scale);
    EXPECT_DOUBLE_EQ(s2.z, s1.z);
}

TEST(DerivativeStat, InvariantToAddedAffineResponse) {
    const Dataset base = testsupport::make_dataset(
        50, 2, 109, 0, [](const Eigen::VectorXd& x) { return std::cos(4.0 * x[0]); }, 0.2);
    Dataset shifted = base;
    for (Eigen::Index i = 0; i < base.n(); ++i)
        shifted.Y[i] += 3.0 - 2.0 * base.X(i, 0) + 0.5 * base.X(i, 1);

    const Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 0.4);
    const Eigen::VectorXd h = constant_h(2, 0.6);
    for (Eigen::Index j = 0; j < 2; ++j) {
        const double za = rodeo::derivative_stat(base, x, h, j, kGauss, 1.0).z;
        const double zb = rodeo::derivative_stat(shifted, x, h, j, kGauss, 1.0).z;
        EXPECT_NEAR(za, zb, 1e-8 * std::max(1.0, std::abs(za)));
    }
}

TEST(DerivativeStat, ScaleMatchesMonteCarloStddev) {
    // With X and g_j fixed, Z = g_j . (m + eps) has stddev sigma * ||g_j||
    // over noise redraws; 2000 redraws pin the sample value within 5%.
    const Dataset data = testsupport::make_dataset(
        100, 3, 110, 0, [](const Eigen::VectorXd& x) { return 5.0 * x[0] * x[0] * x[1] * x[1]; },
        0.0);
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 0.5);
    const Eigen::VectorXd h = constant_h(3, 0.7);
    const LocalSolve solve(data, x, h, kGauss);
    rodeo::SplitMix64 rng(rodeo::RngSeed{110, 1});

    const int redraws = 2000;
    for (Eigen::Index j = 0; j < 3; ++j) {
        const DerivativeStat stat = solve.derivative(j, 1.0);
        double sum = 0.0, sum_sq = 0.0;
        for (int t = 0; t < redraws; ++t) {
            double z = 0.0;
            for (Eigen::Index i = 0; i < data.n(); ++i)
                z += stat.gj_weights[i] * (data.Y[i] + rng.next_normal());
            sum += z;
            sum_sq += z * z;
        }
        const double mean = sum / redraws;
        const double sd = std::sqrt(sum_sq / redraws - mean * mean);
        EXPECT_NEAR(sd / stat.scale, 1.0, 0.05) << "coordinate " << j;
    }
}

TEST(KernelRegression, EstimateAndDerivative) {
    const Dataset data = testsupport::make_dataset(
        50, 2, 111, 0, [](const Eigen::VectorXd& x) { return std::sin(6.0 * x[0]); }, 0.2);
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 0.5);
    const Eigen::VectorXd h = constant_h(2, 0.4);

    // Nadaraya-Watson estimate is the weight-normalized response average.
    const LocalFit fit = fit_point(data, x, h, kGauss, Smoother::KernelRegression);
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const double w = testsupport::oracle_weight(data.X.row(i), x, h, kGauss);
        num += w * data.Y[i];
        den += w;
    }
    EXPECT_NEAR(fit.estimate, num / den, 1e-12);
    EXPECT_NEAR(fit.effective_weights.sum(), 1.0, 1e-12);
    EXPECT_NEAR(fit.effective_weights.dot(data.Y), fit.estimate, 1e-12);

    // Derivative statistic differentiates the same quotient.
    const LocalSolve solve(data, x, h, kGauss, Smoother::KernelRegression);
    for (Eigen::Index j = 0; j < 2; ++j) {
        const double z = solve.derivative(j, 1.0).z;
        const double fd = testsupport::finite_difference_z(data, x, h, j, kGauss, 1e-5 * h[j],
                                                           Smoother::KernelRegression);
        const double denom = std::max({std::abs(z), std::abs(fd), 1e-4});
        EXPECT_LE(std::abs(z - fd) / denom, 1e-5) << "coordinate " << j;
    }
}

TEST(LocalSolve, SharedFactorizationMatchesFreeFunctions) {
    const Dataset data = testsupport::make_dataset(
        40, 3, 112, 0, [](const Eigen::VectorXd& x) { return x[0] + x[1] * x[2]; }, 0.3);
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 0.5);
    const Eigen::VectorXd h = constant_h(3, 0.6);
    const LocalSolve solve(data, x, h, kGauss);
    for (Eigen::Index j = 0; j < 3; ++j) {
        const DerivativeStat a = solve.derivative(j, 1.0);
        const DerivativeStat b = rodeo::derivative_stat(data, x, h, j, kGauss, 1.0);
        EXPECT_DOUBLE_EQ(a.z, b.z);
        EXPECT_DOUBLE_EQ(a.scale, b.scale);
    }
}

TEST(LocalSolve, InsufficientSupportRaisesNumericalError) {
    // Epanechnikov with a tiny window sees no points at all.
    const Dataset data = testsupport::make_dataset(
        50, 3, 113, 0, [](const Eigen::VectorXd&) { return 0.0; }, 1.0);
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 0.5);
    EXPECT_THROW(fit_local_linear(data, x, constant_h(3, 0.01), kEpan), rodeo::numerical_error);

    // Fewer rows than coefficients can never satisfy the rank requirement.
    Dataset tiny;
    tiny.X = Eigen::MatrixXd::Random(3, 3);
    tiny.Y = Eigen::VectorXd::Random(3);
    EXPECT_THROW(fit_local_linear(tiny, x, constant_h(3, 1.0), kGauss), rodeo::numerical_error);
}

TEST(LocalSolve, RidgeGuardFlagsDegenerateDesigns) {
    // A duplicated covariate makes X^T W X singular; the guard must flag
    // the solve and still return finite output.
    Dataset data = testsupport::make_dataset(
        40, 2, 114, 0, [](const Eigen::VectorXd& x) { return x[0]; }, 0.1);
    Dataset dup;
    dup.X.resize(40, 3);
    dup.X.leftCols(2) = data.X;
    dup.X.col(2) = data.X.col(0);
    dup.Y = data.Y;

    const Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 0.5);
    const LocalFit fit = fit_local_linear(dup, x, constant_h(3, 0.5), kGauss);
    EXPECT_TRUE(fit.condition_flag);
    EXPECT_TRUE(std::isfinite(fit.estimate));
}

TEST(LocalSolve, ArgumentValidation) {
    const Dataset data = testsupport::make_dataset(
        30, 2, 115, 0, [](const Eigen::VectorXd&) { return 0.0; }, 1.0);
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 0.5);
    const Eigen::VectorXd h = constant_h(2, 0.5);
    EXPECT_THROW(fit_local_linear(data, Eigen::VectorXd::Zero(3), h, kGauss),
                 std::invalid_argument);
    const LocalSolve solve(data, x, h, kGauss);
    EXPECT_THROW(solve.derivative(2, 1.0), std::invalid_argument);
    EXPECT_THROW(solve.derivative(-1, 1.0), std::invalid_argument);
    EXPECT_THROW(solve.derivative(0, -1.0), std::invalid_argument);
}

}  // namespace
