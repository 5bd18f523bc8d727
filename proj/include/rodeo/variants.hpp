#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "rodeo/rodeo.hpp"

namespace rodeo {

/// Substream offsets off a replicate's stream, so evaluation-point and
/// test-point draws never collide with data generation (substream 0).
inline constexpr std::uint64_t kEvalPointSubstream = 1;
inline constexpr std::uint64_t kTestPointSubstream = 2;

// ---------------------------------------------------------------------------
// Linear prefit
// ---------------------------------------------------------------------------

/// Fitted linear component to subtract before running a bandwidth-selection
/// pass on the residuals. residual_data keeps X and the column names and
/// replaces Y with Y - intercept - X * coefficients, row-aligned.
struct LinearPrefit {
    double intercept = 0.0;
    Eigen::VectorXd coefficients;
    double penalty = 0.0;
    Dataset residual_data;
};

/// Minimizes (1/2) sum_i (Y_i - a - x_i' b)^2 + penalty * sum_j |b_j| by
/// cyclic coordinate descent with soft-threshold updates on centered data;
/// the intercept is unpenalized. penalty = 0 is an ordinary least squares
/// fit and requires a full-rank design with n > d.
inline LinearPrefit linear_prefit(const Dataset& data, double penalty) {
    data.validate();
    if (!(penalty >= 0.0)) throw std::invalid_argument("penalty must be nonnegative");
    const Eigen::Index n = data.n();
    const Eigen::Index d = data.d();
    if (penalty == 0.0 && n <= d)
        throw std::invalid_argument("unpenalized fit needs n > d observations");

    const Eigen::RowVectorXd x_mean = data.X.colwise().mean();
    const double y_mean = data.Y.mean();
    const Eigen::MatrixXd xc = data.X.rowwise() - x_mean;
    Eigen::VectorXd col_ss(d);
    for (Eigen::Index j = 0; j < d; ++j) col_ss[j] = xc.col(j).squaredNorm();

    if (penalty == 0.0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xc);
        if (qr.rank() < d)
            throw numerical_error("singular design: unpenalized linear fit is not identifiable");
    }

    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd resid = data.Y.array() - y_mean;  // residual at the current b
    constexpr int kMaxSweeps = 10000;
    constexpr double kTol = 1e-10;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            if (col_ss[j] == 0.0) continue;  // constant column: coefficient pinned at 0
            const double rho = xc.col(j).dot(resid) + col_ss[j] * b[j];
            const double shrunk = std::abs(rho) - penalty;
            const double b_new = shrunk > 0.0 ? std::copysign(shrunk, rho) / col_ss[j] : 0.0;
            const double change = b_new - b[j];
            if (change != 0.0) {
                resid -= xc.col(j) * change;
                b[j] = b_new;
            }
            max_change = std::max(max_change, std::abs(change));
        }
        if (max_change < kTol) break;
    }

    LinearPrefit out;
    out.coefficients = b;
    out.intercept = y_mean - x_mean.dot(b);
    out.penalty = penalty;
    out.residual_data.X = data.X;
    out.residual_data.Y = resid;
    out.residual_data.column_names = data.column_names;
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation points
// ---------------------------------------------------------------------------

/// k distinct row indices from [0, n), ascending, via a partial
/// Fisher-Yates shuffle on the given stream.
inline std::vector<Eigen::Index> sample_rows(Eigen::Index n, int k, SplitMix64& rng) {
    if (k < 1 || k > n) throw std::invalid_argument("need 1 <= k <= n evaluation points");
    std::vector<Eigen::Index> idx(n);
    for (Eigen::Index i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < k; ++i) {
        const Eigen::Index pick =
            i + static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[i], idx[pick]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

/// k data rows sampled without replacement, returned as a k x d matrix of
/// evaluation points. Uses a dedicated substream of the seed so the draw
/// is independent of data generation under the same seed.
inline Eigen::MatrixXd sample_eval_points(const Dataset& data, int k, RngSeed seed) {
    SplitMix64 rng(seed, kEvalPointSubstream);
    const std::vector<Eigen::Index> rows = sample_rows(data.n(), k, rng);
    Eigen::MatrixXd points(k, data.d());
    for (int i = 0; i < k; ++i) points.row(i) = data.X.row(rows[i]);
    return points;
}

namespace detail {

inline void check_eval_points(const Eigen::MatrixXd& eval_points, Eigen::Index d) {
    if (eval_points.rows() < 1) throw std::invalid_argument("need at least one evaluation point");
    if (eval_points.cols() != d)
        throw std::invalid_argument("evaluation point dimension mismatch");
    if (!eval_points.allFinite())
        throw std::invalid_argument("evaluation points must be finite");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Global statistics over evaluation points
// ---------------------------------------------------------------------------

/// Per-variable summary of the averaged squared derivative statistic
/// T_j = (1/k) sum_i Z_j(x_i)^2 over k evaluation points, together with the
/// traces of the implied quadratic form P_j = G_j G_j' (computed from the
/// n x k weight matrix G_j without materializing P_j), the null expectation
/// (sigma^2/k) tr(P_j), and the threshold
/// lambda_j = (sigma^2/k) tr(P_j) + 2 (sigma^2/k) sqrt(tr(P_j P_j) log n).
struct GlobalStats {
    Eigen::VectorXd t;
    Eigen::VectorXd trace_pj;
    Eigen::VectorXd trace_pjpj;
    Eigen::VectorXd expected_t_null;
    Eigen::VectorXd lambda;
    Eigen::MatrixXd eval_points;
    BandwidthVector h;
};

namespace detail {

/// T_j, tr(P_j) and tr(P_j P_j) for the requested variables at one
/// bandwidth vector. One factorization per evaluation point serves every
/// variable.
inline void global_accumulate(const Dataset& data, const Eigen::MatrixXd& eval_points,
                              const BandwidthVector& h, KernelSpec kernel, Smoother smoother,
                              const std::vector<Eigen::Index>& variables, Eigen::VectorXd& t,
                              Eigen::VectorXd& trace_pj, Eigen::VectorXd& trace_pjpj) {
    const Eigen::Index k = eval_points.rows();
    const Eigen::Index n = data.n();
    const std::size_t v = variables.size();

    std::vector<Eigen::MatrixXd> g(v, Eigen::MatrixXd(n, k));
    t = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(v));
    for (Eigen::Index i = 0; i < k; ++i) {
        LocalSolve solve(data, eval_points.row(i).transpose(), h, kernel, smoother);
        for (std::size_t a = 0; a < v; ++a) {
            const DerivativeStat stat = solve.derivative(variables[a], 0.0);
            g[a].col(i) = stat.gj_weights;
            t[static_cast<Eigen::Index>(a)] += stat.z * stat.z;
        }
    }
    t /= static_cast<double>(k);

    trace_pj.resize(static_cast<Eigen::Index>(v));
    trace_pjpj.resize(static_cast<Eigen::Index>(v));
    for (std::size_t a = 0; a < v; ++a) {
        const auto ai = static_cast<Eigen::Index>(a);
        trace_pj[ai] = g[a].squaredNorm();
        const Eigen::MatrixXd gram = g[a].transpose() * g[a];  // k x k
        trace_pjpj[ai] = gram.squaredNorm();
    }
}

inline double global_threshold(double sigma, Eigen::Index k, Eigen::Index n, double trace_pj,
                               double trace_pjpj) {
    const double s2k = sigma * sigma / static_cast<double>(k);
    return s2k * trace_pj + 2.0 * s2k * std::sqrt(trace_pjpj * std::log(static_cast<double>(n)));
}

}  // namespace detail

inline GlobalStats global_statistic(const Dataset& data, const Eigen::MatrixXd& eval_points,
                                    const BandwidthVector& h, KernelSpec kernel, double sigma,
                                    Smoother smoother = Smoother::LocalLinear) {
    data.validate();
    detail::check_eval_points(eval_points, data.d());
    if (sigma < 0.0) throw std::invalid_argument("sigma must be nonnegative");

    const Eigen::Index d = data.d();
    std::vector<Eigen::Index> all(d);
    for (Eigen::Index j = 0; j < d; ++j) all[j] = j;

    GlobalStats stats;
    detail::global_accumulate(data, eval_points, h, kernel, smoother, all, stats.t,
                              stats.trace_pj, stats.trace_pjpj);
    const Eigen::Index k = eval_points.rows();
    stats.expected_t_null = (sigma * sigma / static_cast<double>(k)) * stats.trace_pj;
    stats.lambda.resize(d);
    for (Eigen::Index j = 0; j < d; ++j)
        stats.lambda[j] =
            detail::global_threshold(sigma, k, data.n(), stats.trace_pj[j], stats.trace_pjpj[j]);
    stats.eval_points = eval_points;
    stats.h = h;
    return stats;
}

// ---------------------------------------------------------------------------
// Global rodeo
// ---------------------------------------------------------------------------

/// One bandwidth vector selected for the whole sample. The trace reuses the
/// per-point step schema with z carrying T_j, lambda the global threshold,
/// and scale the null expectation (sigma^2/k) tr(P_j) as a diagnostic.
struct GlobalRodeoResult {
    BandwidthVector h_star;
    std::vector<StepRecord> trace;
    int stopping_time = 0;
    double sigma_used = 0.0;
};

inline GlobalRodeoResult global_rodeo(const Dataset& data, const Eigen::MatrixXd& eval_points,
                                      const RodeoConfig& config) {
    config.validate();
    data.validate();
    detail::check_eval_points(eval_points, data.d());
    const int n = static_cast<int>(data.n());
    const Eigen::Index d = data.d();
    const Eigen::Index k = eval_points.rows();

    GlobalRodeoResult result;
    result.sigma_used = resolve_sigma(data, config.sigma_policy);
    result.h_star = BandwidthVector::Constant(d, initial_bandwidth(config.c0, n));

    std::vector<Eigen::Index> active(d);
    for (Eigen::Index j = 0; j < d; ++j) active[j] = j;

    int t = 0;
    while (!active.empty() && t < config.max_steps) {
        ++t;
        Eigen::VectorXd t_stat, trace_pj, trace_pjpj;
        detail::global_accumulate(data, eval_points, result.h_star, config.kernel,
                                  config.smoother, active, t_stat, trace_pj, trace_pjpj);

        std::vector<Eigen::Index> still_active;
        for (std::size_t idx = 0; idx < active.size(); ++idx) {
            const Eigen::Index j = active[idx];
            const auto ai = static_cast<Eigen::Index>(idx);
            const double lambda = detail::global_threshold(result.sigma_used, k, n, trace_pj[ai],
                                                           trace_pjpj[ai]);
            const double h_before = result.h_star[j];

            StepRecord rec;
            rec.step = t;
            rec.variable = static_cast<int>(j);
            rec.h_before = h_before;
            rec.z = t_stat[ai];
            rec.lambda = lambda;
            rec.scale = result.sigma_used * result.sigma_used / static_cast<double>(k) *
                        trace_pj[ai];

            if (t_stat[ai] > lambda) {
                if (config.beta * h_before >= config.h_floor) {
                    rec.action = StepAction::Shrunk;
                    result.h_star[j] = config.beta * h_before;
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
    return result;
}

// ---------------------------------------------------------------------------
// Greedy rodeo
// ---------------------------------------------------------------------------

/// One bandwidth shrink per record: the step it happened in, the variable
/// chosen, its normalized score at selection time, and the bandwidth after
/// the shrink.
struct GreedyEvent {
    int step = 0;
    int variable = 0;
    double score = 0.0;
    double h_after = 0.0;
};

struct GreedyTrace {
    std::vector<GreedyEvent> events;
    /// Per variable: 1 for the first variable ever shrunk, 2 for the
    /// second distinct one, and so on; 0 for variables never shrunk.
    std::vector<int> selection_order;
    /// Per variable: Removed when its score dropped to <= 1 after it had
    /// entered the path, Frozen when the bandwidth floor stopped it,
    /// Active if still in play at the sweep limit.
    std::vector<TerminalStatus> terminal;
    BandwidthVector h_final;
    int stopping_time = 0;
    double sigma_used = 0.0;
};

/// One-variable-at-a-time variant: each step scores every active variable
/// by the mean over evaluation points of |Z_j(x_i)| / lambda_j(x_i) and
/// shrinks only the highest-scoring one (ties broken toward the lowest
/// index). The score <= 1 cutoff is a per-variable stopping rule: it
/// retires a variable whose score has decayed once that variable has
/// entered the path, while a never-shrunk variable stays eligible, so
/// weak variables still receive a selection rank when the strong ones
/// are exhausted. A variable blocked by the bandwidth floor deactivates
/// without an event.
inline GreedyTrace greedy_rodeo(const Dataset& data, const Eigen::MatrixXd& eval_points,
                                const RodeoConfig& config) {
    config.validate();
    data.validate();
    detail::check_eval_points(eval_points, data.d());
    const int n = static_cast<int>(data.n());
    const Eigen::Index d = data.d();
    const Eigen::Index k = eval_points.rows();

    GreedyTrace trace;
    trace.sigma_used = resolve_sigma(data, config.sigma_policy);
    trace.h_final = BandwidthVector::Constant(d, initial_bandwidth(config.c0, n));
    trace.selection_order.assign(static_cast<std::size_t>(d), 0);
    trace.terminal.assign(static_cast<std::size_t>(d), TerminalStatus::Active);
    int next_rank = 1;

    std::vector<Eigen::Index> active(d);
    for (Eigen::Index j = 0; j < d; ++j) active[j] = j;

    int t = 0;
    while (!active.empty() && t < config.max_steps) {
        ++t;
        const std::size_t v = active.size();
        std::vector<double> score(v, 0.0);
        for (Eigen::Index i = 0; i < k; ++i) {
            LocalSolve solve(data, eval_points.row(i).transpose(), trace.h_final, config.kernel,
                             config.smoother);
            for (std::size_t a = 0; a < v; ++a) {
                const DerivativeStat stat = solve.derivative(active[a], trace.sigma_used);
                const double lambda = threshold(stat.scale, n);
                if (lambda > 0.0)
                    score[a] += std::abs(stat.z) / lambda;
                else if (std::abs(stat.z) > 0.0)
                    score[a] = std::numeric_limits<double>::infinity();
            }
        }
        for (double& s : score)
            if (std::isfinite(s)) s /= static_cast<double>(k);

        std::vector<Eigen::Index> survivors;
        std::size_t best = v;  // position into `active`/`score` of the chosen variable
        for (std::size_t a = 0; a < v; ++a) {
            const bool entered =
                trace.selection_order[static_cast<std::size_t>(active[a])] != 0;
            if (entered && score[a] <= 1.0) {
                trace.terminal[static_cast<std::size_t>(active[a])] = TerminalStatus::Removed;
                continue;
            }
            survivors.push_back(active[a]);
            if (best == v || score[a] > score[best]) best = a;
        }

        if (best != v) {
            const Eigen::Index j = active[best];
            const double h_before = trace.h_final[j];
            if (config.beta * h_before >= config.h_floor) {
                trace.h_final[j] = config.beta * h_before;
                trace.events.push_back(
                    {t, static_cast<int>(j), score[best], trace.h_final[j]});
                if (trace.selection_order[static_cast<std::size_t>(j)] == 0)
                    trace.selection_order[static_cast<std::size_t>(j)] = next_rank++;
            } else {
                survivors.erase(std::find(survivors.begin(), survivors.end(), j));
                trace.terminal[static_cast<std::size_t>(j)] = TerminalStatus::Frozen;
            }
        }
        active.swap(survivors);
    }
    trace.stopping_time = t;
    return trace;
}

}  // namespace rodeo
