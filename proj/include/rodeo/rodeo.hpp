#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "rodeo/loclin.hpp"
#include "rodeo/sigma.hpp"

namespace rodeo {

/// How the noise level entering the thresholds is obtained: a known value,
/// or one of the nearest-pair estimators computed once from the data and
/// held fixed across steps.
struct SigmaPolicy {
    enum class Kind { Known, Rice, Median };
    Kind kind = Kind::Known;
    double value = 1.0;  // Known
    int pairs = 20;      // Rice / Median

    static SigmaPolicy known(double sigma) { return {Kind::Known, sigma, 20}; }
    static SigmaPolicy rice(int J) { return {Kind::Rice, 0.0, J}; }
    static SigmaPolicy median(int J) { return {Kind::Median, 0.0, J}; }
};

inline double resolve_sigma(const Dataset& data, const SigmaPolicy& policy) {
    switch (policy.kind) {
        case SigmaPolicy::Kind::Known:
            if (policy.value < 0.0) throw std::invalid_argument("known sigma must be nonnegative");
            return policy.value;
        case SigmaPolicy::Kind::Rice:
            return sigma_rice(data, policy.pairs).sigma;
        case SigmaPolicy::Kind::Median:
            return sigma_median(data, policy.pairs).sigma;
    }
    throw std::invalid_argument("unknown sigma policy");
}

struct RodeoConfig {
    double beta = 0.8;
    double c0 = 1.0;
    KernelSpec kernel;
    SigmaPolicy sigma_policy;
    int max_steps = 100;
    double h_floor = 1e-3;
    RngSeed seed;
    Smoother smoother = Smoother::LocalLinear;

    void validate() const {
        if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0,1)");
        if (!(c0 > 0.0)) throw std::invalid_argument("c0 must be positive");
        if (!(h_floor > 0.0)) throw std::invalid_argument("h_floor must be positive");
        if (h_floor >= c0) throw std::invalid_argument("h_floor must be below c0");
        if (max_steps < 1) throw std::invalid_argument("max_steps must be positive");
    }
};

/// Starting bandwidth h0 = c0 / log log n (natural logs). Requires n >= 16
/// so the double logarithm is safely above zero.
inline double initial_bandwidth(double c0, int n) {
    if (!(c0 > 0.0)) throw std::invalid_argument("c0 must be positive");
    if (n < 16) throw std::invalid_argument("n must be at least 16 for the double-log bandwidth");
    return c0 / std::log(std::log(static_cast<double>(n)));
}

/// Hard threshold lambda = scale * sqrt(2 log n), natural log.
inline double threshold(double scale, int n) {
    if (scale < 0.0) throw std::invalid_argument("scale must be nonnegative");
    if (n < 2) throw std::invalid_argument("n must be at least 2");
    return scale * std::sqrt(2.0 * std::log(static_cast<double>(n)));
}

enum class StepAction { Shrunk, Removed, Frozen };

inline const char* to_string(StepAction a) {
    switch (a) {
        case StepAction::Shrunk: return "shrunk";
        case StepAction::Removed: return "removed";
        case StepAction::Frozen: return "frozen";
    }
    return "?";
}

/// One per-variable decision in a sweep. Shrunk means the test fired and
/// the bandwidth stepped down; Removed means the test failed and the
/// variable left the active set; Frozen means the test fired but a guard
/// (bandwidth floor) stopped the shrink.
struct StepRecord {
    int step = 0;       // outer sweep index, 1-based
    int variable = 0;   // coordinate index, 0-based
    double h_before = 0.0;
    double z = 0.0;
    double lambda = 0.0;
    double scale = 0.0;
    StepAction action = StepAction::Removed;
};

struct RodeoResult {
    BandwidthVector h_star;
    double estimate = 0.0;
    std::vector<StepRecord> trace;
    int stopping_time = 0;
    double sigma_used = 0.0;
    double soft_correction = 0.0;  // nonzero only for the soft variant
};

/// How a variable's bandwidth path ended: deactivated by the test
/// (Removed), stopped by the bandwidth floor (Frozen), still shrinking when
/// the sweep limit hit (Active), or not subject to per-variable dynamics at
/// all (None, e.g. a fixed-bandwidth baseline).
enum class TerminalStatus { None, Active, Removed, Frozen };

inline const char* to_string(TerminalStatus s) {
    switch (s) {
        case TerminalStatus::None: return "none";
        case TerminalStatus::Active: return "active";
        case TerminalStatus::Removed: return "removed";
        case TerminalStatus::Frozen: return "frozen";
    }
    return "?";
}

/// Final per-variable status implied by a step trace: the last recorded
/// action decides (a trailing Shrunk means the variable was still active
/// when the run stopped).
inline std::vector<TerminalStatus> terminal_from_trace(const std::vector<StepRecord>& trace,
                                                       Eigen::Index d) {
    std::vector<TerminalStatus> out(static_cast<std::size_t>(d), TerminalStatus::Active);
    for (const StepRecord& rec : trace) {
        TerminalStatus s = rec.action == StepAction::Removed   ? TerminalStatus::Removed
                           : rec.action == StepAction::Frozen ? TerminalStatus::Frozen
                                                              : TerminalStatus::Active;
        out[static_cast<std::size_t>(rec.variable)] = s;
    }
    return out;
}

namespace detail {

/// Shared bandwidth dynamics for the hard and soft variants. Each sweep
/// recomputes all active derivative statistics at the current bandwidth
/// vector before any shrink (synchronous update), shrinks h_j by beta when
/// |Z_j| exceeds its threshold, and otherwise deactivates j. The soft
/// variant additionally accumulates the thresholded path correction
/// sum_t <D_hat(t), dh(t)> with D_hat_j = sign(Z_j)(|Z_j| - lambda_j)+ and
/// dh_j = (1 - beta) h_j at the pre-shrink bandwidth.
inline RodeoResult run_rodeo(const Dataset& data, const Eigen::VectorXd& x,
                             const RodeoConfig& config, bool soft) {
    config.validate();
    data.validate();
    const int n = static_cast<int>(data.n());
    const Eigen::Index d = data.d();

    RodeoResult result;
    result.sigma_used = resolve_sigma(data, config.sigma_policy);
    const double h0 = initial_bandwidth(config.c0, n);
    result.h_star = BandwidthVector::Constant(d, h0);

    double base_estimate = 0.0;
    if (soft)
        base_estimate =
            fit_point(data, x, result.h_star, config.kernel, config.smoother).estimate;

    std::vector<Eigen::Index> active(d);
    for (Eigen::Index j = 0; j < d; ++j) active[j] = j;

    int t = 0;
    while (!active.empty() && t < config.max_steps) {
        ++t;
        LocalSolve solve(data, x, result.h_star, config.kernel, config.smoother);
        std::vector<DerivativeStat> stats;
        stats.reserve(active.size());
        for (Eigen::Index j : active) stats.push_back(solve.derivative(j, result.sigma_used));

        std::vector<Eigen::Index> still_active;
        for (std::size_t idx = 0; idx < active.size(); ++idx) {
            const Eigen::Index j = active[idx];
            const double z = stats[idx].z;
            const double scale = stats[idx].scale;
            const double lambda = threshold(scale, n);
            const double h_before = result.h_star[j];

            StepRecord rec;
            rec.step = t;
            rec.variable = static_cast<int>(j);
            rec.h_before = h_before;
            rec.z = z;
            rec.lambda = lambda;
            rec.scale = scale;

            if (std::abs(z) > lambda) {
                if (config.beta * h_before >= config.h_floor) {
                    rec.action = StepAction::Shrunk;
                    result.h_star[j] = config.beta * h_before;
                    // The path correction pairs the thresholded derivative
                    // with the realized bandwidth decrement (1 - beta) h_j;
                    // a frozen coordinate moves by zero and contributes nothing.
                    if (soft)
                        result.soft_correction += std::copysign(std::abs(z) - lambda, z) *
                                                  (1.0 - config.beta) * h_before;
                    still_active.push_back(j);
                } else {
                    rec.action = StepAction::Frozen;
                }
            } else {
                rec.action = StepAction::Removed;
            }
            result.trace.push_back(rec);
        }
        active.swap(still_active);
    }
    result.stopping_time = t;

    if (soft) {
        result.estimate = base_estimate - result.soft_correction;
    } else {
        result.estimate =
            fit_point(data, x, result.h_star, config.kernel, config.smoother).estimate;
    }
    return result;
}

}  // namespace detail

/// Hard-thresholding rodeo at a single target point: all bandwidths start
/// at h0, each sweep shrinks the coordinates whose derivative statistic
/// exceeds its threshold and deactivates the rest, and the output is the
/// refit at the final bandwidths.
inline RodeoResult rodeo_hard(const Dataset& data, const Eigen::VectorXd& x,
                              const RodeoConfig& config) {
    return detail::run_rodeo(data, x, config, false);
}

/// Soft-thresholding variant: same bandwidth dynamics, but the output is
/// the initial fit minus the accumulated soft-thresholded derivative
/// corrections along the bandwidth path.
inline RodeoResult rodeo_soft(const Dataset& data, const Eigen::VectorXd& x,
                              const RodeoConfig& config) {
    return detail::run_rodeo(data, x, config, true);
}

}  // namespace rodeo
