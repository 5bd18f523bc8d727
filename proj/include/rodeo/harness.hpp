#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "rodeo/variants.hpp"

namespace rodeo {

// ---------------------------------------------------------------------------
// Names for config surfaces (CLI flags, meta output)
// ---------------------------------------------------------------------------

inline const char* to_string(SyntheticVariant v) {
    switch (v) {
        case SyntheticVariant::TwoRelevant: return "two-relevant";
        case SyntheticVariant::CubicSine: return "cubic-sine";
        case SyntheticVariant::OneDimSine: return "one-dim-sine";
        case SyntheticVariant::Turlach: return "turlach";
        case SyntheticVariant::Linear: return "linear";
        case SyntheticVariant::PureNoise: return "pure-noise";
    }
    return "?";
}

inline SyntheticVariant parse_variant(const std::string& name) {
    if (name == "two-relevant") return SyntheticVariant::TwoRelevant;
    if (name == "cubic-sine") return SyntheticVariant::CubicSine;
    if (name == "one-dim-sine") return SyntheticVariant::OneDimSine;
    if (name == "turlach") return SyntheticVariant::Turlach;
    if (name == "linear") return SyntheticVariant::Linear;
    if (name == "pure-noise") return SyntheticVariant::PureNoise;
    throw std::invalid_argument("unknown synthetic variant: " + name);
}

inline const char* to_string(Kernel k) {
    return k == Kernel::Gaussian ? "gaussian" : "epanechnikov";
}

inline Kernel parse_kernel(const std::string& name) {
    if (name == "gaussian") return Kernel::Gaussian;
    if (name == "epanechnikov") return Kernel::Epanechnikov;
    throw std::invalid_argument("unknown kernel: " + name);
}

inline const char* to_string(Smoother s) {
    return s == Smoother::LocalLinear ? "local-linear" : "kernel-regression";
}

inline Smoother parse_smoother(const std::string& name) {
    if (name == "local-linear") return Smoother::LocalLinear;
    if (name == "kernel-regression") return Smoother::KernelRegression;
    throw std::invalid_argument("unknown smoother: " + name);
}

inline std::string to_string(const SigmaPolicy& p) {
    switch (p.kind) {
        case SigmaPolicy::Kind::Known: return "known:" + format_double(p.value);
        case SigmaPolicy::Kind::Rice: return "rice:" + std::to_string(p.pairs);
        case SigmaPolicy::Kind::Median: return "median:" + std::to_string(p.pairs);
    }
    return "?";
}

/// Parses "known:V", "rice:J" or "median:J".
inline SigmaPolicy parse_sigma_policy(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("sigma policy must look like known:V, rice:J or median:J");
    const std::string kind = text.substr(0, colon);
    const std::string arg = text.substr(colon + 1);
    try {
        if (kind == "known") return SigmaPolicy::known(parse_double(arg, "sigma policy value"));
        if (kind == "rice") return SigmaPolicy::rice(std::stoi(arg));
        if (kind == "median") return SigmaPolicy::median(std::stoi(arg));
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument("bad sigma policy argument: " + text);
    }
    throw std::invalid_argument("unknown sigma policy kind: " + kind);
}

enum class Algorithm { Hard, Soft, Global, Greedy, Baseline };

inline const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::Hard: return "hard";
        case Algorithm::Soft: return "soft";
        case Algorithm::Global: return "global";
        case Algorithm::Greedy: return "greedy";
        case Algorithm::Baseline: return "baseline";
    }
    return "?";
}

inline Algorithm parse_algorithm(const std::string& name) {
    if (name == "hard") return Algorithm::Hard;
    if (name == "soft") return Algorithm::Soft;
    if (name == "global") return Algorithm::Global;
    if (name == "greedy") return Algorithm::Greedy;
    if (name == "baseline") return Algorithm::Baseline;
    throw std::invalid_argument("unknown algorithm: " + name);
}

// ---------------------------------------------------------------------------
// Single-bandwidth baseline selected by leave-one-out cross validation
// ---------------------------------------------------------------------------

/// 20 log-spaced scalar bandwidths spanning 0.05 to 1.5, the default grid
/// for the cross-validated baseline.
inline std::vector<double> default_cv_grid() {
    std::vector<double> grid(20);
    const double lo = std::log(0.05);
    const double hi = std::log(1.5);
    for (int i = 0; i < 20; ++i)
        grid[static_cast<std::size_t>(i)] = std::exp(lo + (hi - lo) * i / 19.0);
    return grid;
}

struct LoocvResult {
    double best_h = 0.0;
    /// Risk per grid entry, aligned with the input grid; NaN marks a
    /// disqualified bandwidth (insufficient support at some data point, or
    /// a self-weight of exactly 1).
    std::vector<double> risks;
    /// Fit at the query point using best_h in every coordinate.
    double estimate = 0.0;
};

/// Scores each scalar bandwidth h (used in all coordinates) by leave-one-out
/// risk (1/n) sum_i (Y_i - m^(-i)(X_i))^2, computed with the linear-smoother
/// shortcut (Y_i - m(X_i)) / (1 - G_ii) where G_ii is point i's weight in
/// its own fit. Returns the risk minimizer, breaking ties toward the largest
/// bandwidth, plus the fit at x under that choice.
inline LoocvResult loocv_bandwidth(const Dataset& data, const Eigen::VectorXd& x,
                                   const std::vector<double>& grid, KernelSpec kernel,
                                   Smoother smoother = Smoother::LocalLinear) {
    data.validate();
    const Eigen::Index n = data.n();
    const Eigen::Index d = data.d();
    if (x.size() != d) throw std::invalid_argument("query point dimension mismatch");
    if (grid.empty()) throw std::invalid_argument("bandwidth grid must be nonempty");
    for (double h : grid)
        if (!(h > 0.0) || !std::isfinite(h))
            throw std::invalid_argument("grid bandwidths must be positive and finite");
    if (n < d + 2) throw std::invalid_argument("leave-one-out needs n >= d + 2");

    const double nan = std::numeric_limits<double>::quiet_NaN();
    LoocvResult result;
    result.risks.assign(grid.size(), nan);

    bool have_best = false;
    double best_risk = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const BandwidthVector h = BandwidthVector::Constant(d, grid[g]);
        double sum = 0.0;
        bool ok = true;
        for (Eigen::Index i = 0; i < n && ok; ++i) {
            try {
                const LocalFit fit = fit_point(data, data.X.row(i).transpose(), h, kernel,
                                               smoother);
                const double denom = 1.0 - fit.effective_weights[i];
                if (denom == 0.0) {
                    ok = false;  // the point reproduces itself; no held-out residual
                    break;
                }
                const double loo = (data.Y[i] - fit.estimate) / denom;
                sum += loo * loo;
            } catch (const numerical_error&) {
                ok = false;  // insufficient support at this point disqualifies h
            }
        }
        if (!ok) continue;
        const double risk = sum / static_cast<double>(n);
        result.risks[g] = risk;
        if (!have_best || risk < best_risk ||
            (risk == best_risk && grid[g] > result.best_h)) {
            have_best = true;
            best_risk = risk;
            result.best_h = grid[g];
        }
    }
    if (!have_best)
        throw numerical_error("every grid bandwidth was disqualified by leave-one-out");

    result.estimate =
        fit_point(data, x, BandwidthVector::Constant(d, result.best_h), kernel, smoother)
            .estimate;
    return result;
}

// ---------------------------------------------------------------------------
// Experiment configuration and report
// ---------------------------------------------------------------------------

struct TestPointPolicy {
    /// When false, every replicate is evaluated at the rows of `fixed`.
    /// When true, each replicate draws `random_count` points of its own:
    /// fresh draws from the covariate law for synthetic data, rows sampled
    /// without replacement for a loaded dataset.
    bool random_per_replicate = false;
    Eigen::MatrixXd fixed;
    int random_count = 1;
};

struct ExperimentConfig {
    bool use_synthetic = true;
    SyntheticSpec synthetic;
    int n = 500;
    std::string data_path;  // used when use_synthetic is false
    std::string target = "y";
    Algorithm algorithm = Algorithm::Hard;
    int replicates = 1;
    TestPointPolicy test_points;
    RodeoConfig rodeo;
    int eval_count = 30;  // evaluation points for global/greedy: min(n, eval_count)
    bool prefit = false;
    double prefit_penalty = 0.0;
    std::vector<double> cv_grid;    // baseline grid; empty means default_cv_grid()
    std::string output_dir;         // empty means no files are written

    void validate() const {
        rodeo.validate();
        if (replicates < 1) throw std::invalid_argument("replicates must be at least 1");
        if (use_synthetic) {
            synthetic.validate();
            if (n < 2) throw std::invalid_argument("need n >= 2 observations");
        } else if (data_path.empty()) {
            throw std::invalid_argument("need either a dataset path or a synthetic spec");
        }
        if (test_points.random_per_replicate) {
            if (test_points.random_count < 1)
                throw std::invalid_argument("need at least one random test point");
        } else if (test_points.fixed.rows() < 1) {
            throw std::invalid_argument("need at least one fixed test point");
        }
        if (eval_count < 1) throw std::invalid_argument("eval_count must be at least 1");
        if (prefit_penalty < 0.0) throw std::invalid_argument("penalty must be nonnegative");
    }
};

/// One (replicate, test point) outcome. A nonempty error marks a failed
/// row: its numeric fields are unset and it is excluded from summaries.
struct ReplicateRow {
    int run = 0;
    int point = 0;
    Eigen::VectorXd x;
    double estimate = std::numeric_limits<double>::quiet_NaN();
    double truth = std::numeric_limits<double>::quiet_NaN();  // synthetic data only
    double sq_error = std::numeric_limits<double>::quiet_NaN();
    int stopping_time = 0;
    Eigen::VectorXd h_star;
    std::vector<TerminalStatus> terminal;
    std::string error;
};

/// One aggregate line: order statistics of a column over the successful
/// rows, plus removed/frozen termination counts for bandwidth columns
/// (-1 marks not-applicable, e.g. for the squared-error line).
struct SummaryRow {
    std::string name;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    int removed = -1;
    int frozen = -1;
};

struct TraceRow {
    int run = 0;
    StepRecord rec;
};

struct GreedyEventRow {
    int run = 0;
    GreedyEvent event;
};

struct SelectionRow {
    int run = 0;
    int variable = 0;  // 0-based here; written 1-based
    int rank = 0;
};

struct CvRiskRow {
    int run = 0;
    int point = 0;
    double h = 0.0;
    double risk = 0.0;
};

struct ExperimentReport {
    std::vector<ReplicateRow> rows;
    std::vector<SummaryRow> summary;
    std::vector<TraceRow> trace;
    std::vector<GreedyEventRow> greedy_events;
    std::vector<SelectionRow> selection;
    std::vector<CvRiskRow> cv_risks;
    int failed_rows = 0;
    Eigen::Index d = 0;
};

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

/// Order statistic at probability q of an ascending-sorted sample, using
/// the lower-middle convention: element floor(q * (m - 1)).
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
    const auto idx = static_cast<std::size_t>(
        std::floor(q * static_cast<double>(sorted.size() - 1)));
    return sorted[idx];
}

namespace detail {

inline SummaryRow quantile_row(std::string name, std::vector<double> values) {
    SummaryRow row;
    row.name = std::move(name);
    if (values.empty()) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.min = row.q1 = row.median = row.q3 = row.max = nan;
        return row;
    }
    std::sort(values.begin(), values.end());
    row.min = sorted_quantile(values, 0.0);
    row.q1 = sorted_quantile(values, 0.25);
    row.median = sorted_quantile(values, 0.5);
    row.q3 = sorted_quantile(values, 0.75);
    row.max = sorted_quantile(values, 1.0);
    return row;
}

}  // namespace detail

/// Aggregates successful rows into per-variable bandwidth quartiles (with
/// removed/frozen termination counts) and squared-error quartiles. A pure
/// function of the rows.
inline std::vector<SummaryRow> report_summary(const std::vector<ReplicateRow>& rows) {
    std::vector<const ReplicateRow*> ok;
    for (const ReplicateRow& row : rows)
        if (row.error.empty()) ok.push_back(&row);
    if (ok.empty()) throw std::invalid_argument("no successful rows to summarize");

    const Eigen::Index d = ok.front()->h_star.size();
    std::vector<SummaryRow> out;
    for (Eigen::Index j = 0; j < d; ++j) {
        std::vector<double> h;
        int removed = 0;
        int frozen = 0;
        h.reserve(ok.size());
        for (const ReplicateRow* row : ok) {
            h.push_back(row->h_star[j]);
            const auto sj = static_cast<std::size_t>(j);
            if (sj < row->terminal.size()) {
                if (row->terminal[sj] == TerminalStatus::Removed) ++removed;
                if (row->terminal[sj] == TerminalStatus::Frozen) ++frozen;
            }
        }
        SummaryRow row = detail::quantile_row("h_" + std::to_string(j + 1), std::move(h));
        row.removed = removed;
        row.frozen = frozen;
        out.push_back(std::move(row));
    }

    std::vector<double> sq;
    for (const ReplicateRow* row : ok)
        if (std::isfinite(row->sq_error)) sq.push_back(row->sq_error);
    out.push_back(detail::quantile_row("sq_error", std::move(sq)));
    return out;
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

namespace detail {

/// Commas and line breaks in free-text fields would break the unquoted CSV
/// format; fold them to semicolons.
inline std::string csv_safe(std::string text) {
    for (char& c : text)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return text;
}

inline std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);  // binary keeps LF endings everywhere
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    return out;
}

}  // namespace detail

inline void write_replicates_csv(const std::filesystem::path& path,
                                 const std::vector<ReplicateRow>& rows, Eigen::Index d) {
    std::ofstream out = detail::open_csv(path);
    out << "run,point";
    for (Eigen::Index j = 0; j < d; ++j) out << ",x_" << (j + 1);
    out << ",estimate,truth,sq_error,stopping_time";
    for (Eigen::Index j = 0; j < d; ++j) out << ",h_" << (j + 1);
    for (Eigen::Index j = 0; j < d; ++j) out << ",term_" << (j + 1);
    out << ",error\n";

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const ReplicateRow& row : rows) {
        out << row.run << ',' << row.point;
        for (Eigen::Index j = 0; j < d; ++j)
            out << ',' << format_double(j < row.x.size() ? row.x[j] : nan);
        out << ',' << format_double(row.estimate) << ',' << format_double(row.truth) << ','
            << format_double(row.sq_error) << ',' << row.stopping_time;
        for (Eigen::Index j = 0; j < d; ++j)
            out << ',' << format_double(j < row.h_star.size() ? row.h_star[j] : nan);
        for (Eigen::Index j = 0; j < d; ++j) {
            const auto sj = static_cast<std::size_t>(j);
            out << ','
                << to_string(sj < row.terminal.size() ? row.terminal[sj]
                                                      : TerminalStatus::None);
        }
        out << ',' << detail::csv_safe(row.error) << '\n';
    }
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& summary) {
    out << "name,min,q1,median,q3,max,removed,frozen\n";
    for (const SummaryRow& row : summary) {
        out << row.name << ',' << format_double(row.min) << ',' << format_double(row.q1) << ','
            << format_double(row.median) << ',' << format_double(row.q3) << ','
            << format_double(row.max) << ',';
        if (row.removed >= 0) out << row.removed;
        out << ',';
        if (row.frozen >= 0) out << row.frozen;
        out << '\n';
    }
}

inline void write_summary_csv(const std::filesystem::path& path,
                              const std::vector<SummaryRow>& summary) {
    std::ofstream out = detail::open_csv(path);
    write_summary_csv(out, summary);
}

inline void write_trace_csv(const std::filesystem::path& path,
                            const std::vector<TraceRow>& trace) {
    std::ofstream out = detail::open_csv(path);
    out << "run,step,variable,h_before,z,lambda,scale,action\n";
    for (const TraceRow& row : trace) {
        out << row.run << ',' << row.rec.step << ',' << (row.rec.variable + 1) << ','
            << format_double(row.rec.h_before) << ',' << format_double(row.rec.z) << ','
            << format_double(row.rec.lambda) << ',' << format_double(row.rec.scale) << ','
            << to_string(row.rec.action) << '\n';
    }
}

inline void write_greedy_trace_csv(const std::filesystem::path& path,
                                   const std::vector<GreedyEventRow>& events) {
    std::ofstream out = detail::open_csv(path);
    out << "run,step,variable,score,h_after\n";
    for (const GreedyEventRow& row : events) {
        out << row.run << ',' << row.event.step << ',' << (row.event.variable + 1) << ','
            << format_double(row.event.score) << ',' << format_double(row.event.h_after)
            << '\n';
    }
}

inline void write_selection_csv(const std::filesystem::path& path,
                                const std::vector<SelectionRow>& selection) {
    std::ofstream out = detail::open_csv(path);
    out << "run,variable,rank\n";
    for (const SelectionRow& row : selection)
        out << row.run << ',' << (row.variable + 1) << ',' << row.rank << '\n';
}

inline void write_cv_csv(const std::filesystem::path& path,
                         const std::vector<CvRiskRow>& risks) {
    std::ofstream out = detail::open_csv(path);
    out << "run,point,h,risk\n";
    for (const CvRiskRow& row : risks)
        out << row.run << ',' << row.point << ',' << format_double(row.h) << ','
            << format_double(row.risk) << '\n';
}

inline void write_meta_csv(const std::filesystem::path& path, const ExperimentConfig& config,
                           const ExperimentReport& report) {
    std::ofstream out = detail::open_csv(path);
    out << "key,value\n";
    out << "algorithm," << to_string(config.algorithm) << '\n';
    if (config.use_synthetic) {
        out << "synthetic," << to_string(config.synthetic.variant) << '\n';
        out << "n," << config.n << '\n';
        out << "sigma," << format_double(config.synthetic.sigma) << '\n';
    } else {
        out << "data," << detail::csv_safe(config.data_path) << '\n';
        out << "target," << detail::csv_safe(config.target) << '\n';
    }
    out << "d," << report.d << '\n';
    out << "replicates," << config.replicates << '\n';
    if (config.test_points.random_per_replicate)
        out << "test_points,random:" << config.test_points.random_count << '\n';
    else
        out << "test_points,fixed:" << config.test_points.fixed.rows() << '\n';
    out << "beta," << format_double(config.rodeo.beta) << '\n';
    out << "c0," << format_double(config.rodeo.c0) << '\n';
    out << "kernel," << to_string(config.rodeo.kernel.kind) << '\n';
    out << "smoother," << to_string(config.rodeo.smoother) << '\n';
    out << "sigma_policy," << to_string(config.rodeo.sigma_policy) << '\n';
    out << "max_steps," << config.rodeo.max_steps << '\n';
    out << "h_floor," << format_double(config.rodeo.h_floor) << '\n';
    out << "seed," << config.rodeo.seed.master_seed << '\n';
    out << "eval_count," << config.eval_count << '\n';
    out << "prefit," << (config.prefit ? "true" : "false") << '\n';
    out << "prefit_penalty," << format_double(config.prefit_penalty) << '\n';
    out << "cv_grid_size,"
        << (config.cv_grid.empty() ? default_cv_grid().size() : config.cv_grid.size()) << '\n';
    out << "rows," << report.rows.size() << '\n';
    out << "failed_rows," << report.failed_rows << '\n';
}

// ---------------------------------------------------------------------------
// Experiment driver
// ---------------------------------------------------------------------------

namespace detail {

inline Eigen::MatrixXd resolve_test_points(const ExperimentConfig& config, const Dataset& data,
                                           RngSeed rep_seed) {
    if (!config.test_points.random_per_replicate) {
        if (config.test_points.fixed.cols() != data.d())
            throw std::invalid_argument("test point dimension mismatch");
        return config.test_points.fixed;
    }
    SplitMix64 rng(rep_seed, kTestPointSubstream);
    const int count = config.test_points.random_count;
    Eigen::MatrixXd points(count, data.d());
    if (config.use_synthetic) {
        for (int i = 0; i < count; ++i)
            points.row(i) = sample_covariate(config.synthetic, rng).transpose();
    } else {
        const std::vector<Eigen::Index> rows = sample_rows(data.n(), count, rng);
        for (int i = 0; i < count; ++i) points.row(i) = data.X.row(rows[i]);
    }
    return points;
}

}  // namespace detail

/// Runs the configured algorithm over seeded replicates: replicate r draws
/// its data (and any random points) from stream_index r of the master seed,
/// so reruns with the same config reproduce every byte. Failed replicates
/// are kept as error rows, counted, and excluded from summaries. When
/// output_dir is set, writes replicates.csv, summary.csv, meta.csv and the
/// algorithm's trace files there.
inline ExperimentReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    ExperimentReport report;

    Dataset loaded;
    if (!config.use_synthetic) loaded = load_csv(config.data_path, config.target);

    const bool synthetic = config.use_synthetic;
    for (int r = 0; r < config.replicates; ++r) {
        const RngSeed rep_seed{config.rodeo.seed.master_seed, static_cast<std::uint64_t>(r)};
        RodeoConfig rcfg = config.rodeo;
        rcfg.seed = rep_seed;
        try {
            const Dataset data =
                synthetic ? gen_synthetic(config.synthetic, config.n, rep_seed) : loaded;
            const Eigen::Index d = data.d();
            if (report.d == 0) report.d = d;

            LinearPrefit pre;
            const Dataset* working = &data;
            if (config.prefit) {
                pre = linear_prefit(data, config.prefit_penalty);
                working = &pre.residual_data;
            }
            const auto add_back = [&](const Eigen::VectorXd& x, double est) {
                return config.prefit ? est + pre.intercept + pre.coefficients.dot(x) : est;
            };

            const Eigen::MatrixXd points = detail::resolve_test_points(config, data, rep_seed);

            // Work shared by all test points of the replicate.
            GlobalRodeoResult global_res;
            GreedyTrace greedy_res;
            std::vector<TerminalStatus> shared_terminal;
            if (config.algorithm == Algorithm::Global || config.algorithm == Algorithm::Greedy) {
                const int k = static_cast<int>(
                    std::min<Eigen::Index>(working->n(), config.eval_count));
                const Eigen::MatrixXd eval = sample_eval_points(*working, k, rep_seed);
                if (config.algorithm == Algorithm::Global) {
                    global_res = global_rodeo(*working, eval, rcfg);
                    shared_terminal = terminal_from_trace(global_res.trace, d);
                    for (const StepRecord& rec : global_res.trace)
                        report.trace.push_back({r, rec});
                } else {
                    greedy_res = greedy_rodeo(*working, eval, rcfg);
                    shared_terminal = greedy_res.terminal;
                    for (const GreedyEvent& ev : greedy_res.events)
                        report.greedy_events.push_back({r, ev});
                    for (Eigen::Index j = 0; j < d; ++j)
                        report.selection.push_back(
                            {r, static_cast<int>(j),
                             greedy_res.selection_order[static_cast<std::size_t>(j)]});
                }
            }

            for (Eigen::Index p = 0; p < points.rows(); ++p) {
                ReplicateRow row;
                row.run = r;
                row.point = static_cast<int>(p);
                row.x = points.row(p).transpose();
                try {
                    switch (config.algorithm) {
                        case Algorithm::Hard:
                        case Algorithm::Soft: {
                            const RodeoResult res = config.algorithm == Algorithm::Hard
                                                        ? rodeo_hard(*working, row.x, rcfg)
                                                        : rodeo_soft(*working, row.x, rcfg);
                            row.estimate = add_back(row.x, res.estimate);
                            row.stopping_time = res.stopping_time;
                            row.h_star = res.h_star;
                            row.terminal = terminal_from_trace(res.trace, d);
                            for (const StepRecord& rec : res.trace)
                                report.trace.push_back({r, rec});
                            break;
                        }
                        case Algorithm::Global: {
                            row.estimate = add_back(
                                row.x, fit_point(*working, row.x, global_res.h_star,
                                                 rcfg.kernel, rcfg.smoother)
                                           .estimate);
                            row.stopping_time = global_res.stopping_time;
                            row.h_star = global_res.h_star;
                            row.terminal = shared_terminal;
                            break;
                        }
                        case Algorithm::Greedy: {
                            row.estimate = add_back(
                                row.x, fit_point(*working, row.x, greedy_res.h_final,
                                                 rcfg.kernel, rcfg.smoother)
                                           .estimate);
                            row.stopping_time = greedy_res.stopping_time;
                            row.h_star = greedy_res.h_final;
                            row.terminal = shared_terminal;
                            break;
                        }
                        case Algorithm::Baseline: {
                            const std::vector<double> grid =
                                config.cv_grid.empty() ? default_cv_grid() : config.cv_grid;
                            const LoocvResult cv =
                                loocv_bandwidth(*working, row.x, grid, rcfg.kernel,
                                                rcfg.smoother);
                            row.estimate = add_back(row.x, cv.estimate);
                            row.h_star = BandwidthVector::Constant(d, cv.best_h);
                            row.terminal.assign(static_cast<std::size_t>(d),
                                                TerminalStatus::None);
                            for (std::size_t g = 0; g < grid.size(); ++g)
                                report.cv_risks.push_back(
                                    {r, static_cast<int>(p), grid[g], cv.risks[g]});
                            break;
                        }
                    }
                    if (synthetic) {
                        row.truth = true_function(config.synthetic, row.x);
                        const double err = row.estimate - row.truth;
                        row.sq_error = err * err;
                    }
                } catch (const numerical_error& e) {
                    row.error = e.what();
                }
                report.rows.push_back(std::move(row));
            }
        } catch (const numerical_error& e) {
            ReplicateRow row;
            row.run = r;
            row.error = e.what();
            report.rows.push_back(std::move(row));
        }
    }

    for (const ReplicateRow& row : report.rows)
        if (!row.error.empty()) ++report.failed_rows;
    const bool any_ok = report.failed_rows < static_cast<int>(report.rows.size());
    if (any_ok) report.summary = report_summary(report.rows);

    if (!config.output_dir.empty()) {
        const std::filesystem::path dir(config.output_dir);
        std::filesystem::create_directories(dir);
        write_replicates_csv(dir / "replicates.csv", report.rows, report.d);
        write_summary_csv(dir / "summary.csv", report.summary);
        write_meta_csv(dir / "meta.csv", config, report);
        switch (config.algorithm) {
            case Algorithm::Hard:
            case Algorithm::Soft:
            case Algorithm::Global:
                write_trace_csv(dir / "trace.csv", report.trace);
                break;
            case Algorithm::Greedy:
                write_greedy_trace_csv(dir / "greedy_trace.csv", report.greedy_events);
                write_selection_csv(dir / "ordering.csv", report.selection);
                break;
            case Algorithm::Baseline:
                write_cv_csv(dir / "cv_risks.csv", report.cv_risks);
                break;
        }
    }
    return report;
}

}  // namespace rodeo
