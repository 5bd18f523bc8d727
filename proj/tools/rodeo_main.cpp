// Command-line front end: one-shot fits, the bandwidth-selection
// algorithms, noise-level estimation, cross-validated baselines, and the
// seeded experiment driver. Results go to stdout as CSV; --out directs the
// larger artifacts (traces, per-replicate tables) to files.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rodeo/all.hpp"

namespace {

using namespace rodeo;

struct CommonOpts {
    std::string data_path;
    std::string synthetic_name;
    int n = 500;
    int d = 10;
    double sigma = 1.0;
    std::vector<double> linear_coefs;
    std::string target = "y";
    std::vector<std::string> x_texts;
    bool x_random = false;
    double beta = 0.8;
    double c0 = 1.0;
    std::string kernel_name = "gaussian";
    std::string smoother_name = "local-linear";
    std::string sigma_policy_text = "known:1";
    std::uint64_t seed = 0;
    int max_steps = 100;
    double h_floor = 1e-3;
    int eval_count = 30;
    bool prefit = false;
    double penalty = 0.0;
    std::string out_dir;
};

void add_data_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--data", o.data_path, "CSV dataset path (header row, target column)");
    cmd->add_option("--synthetic", o.synthetic_name,
                    "synthetic variant: two-relevant|cubic-sine|one-dim-sine|turlach|linear|"
                    "pure-noise");
    cmd->add_option("--n", o.n, "sample size for synthetic data");
    cmd->add_option("--d", o.d, "covariate count for synthetic data");
    cmd->add_option("--sigma", o.sigma, "noise level for synthetic data");
    cmd->add_option("--coef", o.linear_coefs,
                    "coefficients for the linear synthetic variant (one per covariate)");
    cmd->add_option("--target", o.target, "target column name in --data (default y)");
    cmd->add_option("--seed", o.seed, "master seed");
}

void add_point_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--x", o.x_texts, "target point \"v1,v2,...\" (repeatable for experiment)");
    cmd->add_flag("--x-random", o.x_random, "draw the target point from the covariate law");
}

// Returns the --beta option so callers can tell an explicit value from the
// default (the soft variant uses a gentler default decay).
CLI::Option* add_rodeo_flags(CLI::App* cmd, CommonOpts& o) {
    CLI::Option* beta =
        cmd->add_option("--beta", o.beta, "bandwidth decay factor in (0,1); default 0.8 "
                                          "(0.9 when the soft variant is selected)");
    cmd->add_option("--c0", o.c0, "initial bandwidth scale: h0 = c0 / log log n");
    cmd->add_option("--kernel", o.kernel_name, "gaussian|epanechnikov");
    cmd->add_option("--smoother", o.smoother_name, "local-linear|kernel-regression");
    cmd->add_option("--sigma-policy", o.sigma_policy_text, "known:V|rice:J|median:J");
    cmd->add_option("--max-steps", o.max_steps, "sweep limit");
    cmd->add_option("--h-floor", o.h_floor, "smallest allowed bandwidth");
    return beta;
}

SyntheticSpec make_spec(const CommonOpts& o) {
    SyntheticSpec spec;
    spec.variant = parse_variant(o.synthetic_name);
    spec.d = o.d;
    spec.sigma = o.sigma;
    if (!o.linear_coefs.empty())
        spec.linear_coefs = Eigen::Map<const Eigen::VectorXd>(
            o.linear_coefs.data(), static_cast<Eigen::Index>(o.linear_coefs.size()));
    spec.validate();
    return spec;
}

/// Loads --data or generates --synthetic (stream 0 of the seed, matching
/// experiment replicate 0).
Dataset make_data(const CommonOpts& o) {
    if (!o.data_path.empty() && !o.synthetic_name.empty())
        throw std::invalid_argument("--data and --synthetic are mutually exclusive");
    if (!o.data_path.empty()) return load_csv(o.data_path, o.target);
    if (o.synthetic_name.empty())
        throw std::invalid_argument("need --data PATH or --synthetic NAME");
    return gen_synthetic(make_spec(o), o.n, RngSeed{o.seed, 0});
}

RodeoConfig make_rodeo_config(const CommonOpts& o) {
    RodeoConfig cfg;
    cfg.beta = o.beta;
    cfg.c0 = o.c0;
    cfg.kernel.kind = parse_kernel(o.kernel_name);
    cfg.smoother = parse_smoother(o.smoother_name);
    cfg.sigma_policy = parse_sigma_policy(o.sigma_policy_text);
    cfg.max_steps = o.max_steps;
    cfg.h_floor = o.h_floor;
    cfg.seed = RngSeed{o.seed, 0};
    cfg.validate();
    return cfg;
}

Eigen::VectorXd parse_point(const std::string& text) {
    std::vector<double> vals;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = text.find(',', start);
        const std::string tok = text.substr(start, comma - start);
        vals.push_back(parse_double(tok, "--x component"));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return Eigen::Map<const Eigen::VectorXd>(vals.data(),
                                             static_cast<Eigen::Index>(vals.size()));
}

/// One target point from --x or --x-random (covariate law for synthetic
/// data, a random data row otherwise; substream shared with the
/// experiment's random test points).
Eigen::VectorXd resolve_point(const CommonOpts& o, const Dataset& data) {
    if (!o.x_texts.empty() && o.x_random)
        throw std::invalid_argument("--x and --x-random are mutually exclusive");
    if (!o.x_texts.empty()) {
        if (o.x_texts.size() != 1)
            throw std::invalid_argument("this subcommand takes exactly one --x point");
        Eigen::VectorXd x = parse_point(o.x_texts.front());
        if (x.size() != data.d())
            throw std::invalid_argument("--x has " + std::to_string(x.size()) +
                                        " components, data has " + std::to_string(data.d()));
        return x;
    }
    if (!o.x_random) throw std::invalid_argument("need --x or --x-random");
    SplitMix64 rng(RngSeed{o.seed, 0}, kTestPointSubstream);
    if (!o.synthetic_name.empty()) return sample_covariate(make_spec(o), rng);
    return data.X.row(static_cast<Eigen::Index>(
                          rng.next_below(static_cast<std::uint64_t>(data.n()))))
        .transpose();
}

BandwidthVector parse_bandwidths(const std::string& text, Eigen::Index d) {
    Eigen::VectorXd h = parse_point(text);
    if (h.size() == 1) return BandwidthVector::Constant(d, h[0]);
    if (h.size() != d)
        throw std::invalid_argument("--h needs 1 or " + std::to_string(d) + " values");
    return h;
}

std::vector<double> parse_grid(const std::string& text) {
    const Eigen::VectorXd v = parse_point(text);
    return std::vector<double>(v.data(), v.data() + v.size());
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write '" + path.string() + "'");
    return out;
}

std::filesystem::path ensure_dir(const std::string& dir) {
    const std::filesystem::path p(dir);
    std::filesystem::create_directories(p);
    return p;
}

void print_h_columns_header(std::ostream& out, Eigen::Index d) {
    for (Eigen::Index j = 0; j < d; ++j) out << ",h_" << (j + 1);
}

void print_h_columns(std::ostream& out, const BandwidthVector& h) {
    for (Eigen::Index j = 0; j < h.size(); ++j) out << ',' << format_double(h[j]);
}

// --- subcommand bodies -----------------------------------------------------

void cmd_fit(const CommonOpts& o, const std::string& h_text) {
    const Dataset data = make_data(o);
    const Eigen::VectorXd x = resolve_point(o, data);
    const BandwidthVector h = parse_bandwidths(h_text, data.d());
    const LocalFit fit = fit_point(data, x, h, KernelSpec{parse_kernel(o.kernel_name)},
                                   parse_smoother(o.smoother_name));
    std::cout << "estimate,condition";
    for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j) std::cout << ",b_" << j;
    std::cout << '\n' << format_double(fit.estimate) << ',' << (fit.condition_flag ? 1 : 0);
    for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j)
        std::cout << ',' << format_double(fit.coefficients[j]);
    std::cout << '\n';
}

void cmd_rodeo(const CommonOpts& o, const std::string& variant) {
    const Dataset data = make_data(o);
    const Eigen::VectorXd x = resolve_point(o, data);
    const RodeoConfig cfg = make_rodeo_config(o);

    RodeoResult res;
    if (variant == "hard")
        res = rodeo_hard(data, x, cfg);
    else if (variant == "soft")
        res = rodeo_soft(data, x, cfg);
    else
        throw std::invalid_argument("--variant must be hard or soft");

    std::cout << "estimate,stopping_time,sigma,soft_correction";
    print_h_columns_header(std::cout, data.d());
    std::cout << '\n'
              << format_double(res.estimate) << ',' << res.stopping_time << ','
              << format_double(res.sigma_used) << ',' << format_double(res.soft_correction);
    print_h_columns(std::cout, res.h_star);
    std::cout << '\n';

    if (!o.out_dir.empty()) {
        std::vector<TraceRow> rows;
        rows.reserve(res.trace.size());
        for (const StepRecord& rec : res.trace) rows.push_back({0, rec});
        write_trace_csv(ensure_dir(o.out_dir) / "trace.csv", rows);
    }
}

const Dataset* apply_prefit(const CommonOpts& o, const Dataset& data, LinearPrefit& pre) {
    if (!o.prefit) return &data;
    pre = linear_prefit(data, o.penalty);
    return &pre.residual_data;
}

Eigen::MatrixXd eval_points_for(const CommonOpts& o, const Dataset& working) {
    const int k = static_cast<int>(std::min<Eigen::Index>(working.n(), o.eval_count));
    return sample_eval_points(working, k, RngSeed{o.seed, 0});
}

void cmd_global(const CommonOpts& o) {
    const Dataset data = make_data(o);
    LinearPrefit pre;
    const Dataset* working = apply_prefit(o, data, pre);
    const RodeoConfig cfg = make_rodeo_config(o);
    const GlobalRodeoResult res = global_rodeo(*working, eval_points_for(o, *working), cfg);

    std::cout << "stopping_time,sigma";
    print_h_columns_header(std::cout, data.d());
    std::cout << '\n' << res.stopping_time << ',' << format_double(res.sigma_used);
    print_h_columns(std::cout, res.h_star);
    std::cout << '\n';

    if (!o.out_dir.empty()) {
        std::vector<TraceRow> rows;
        rows.reserve(res.trace.size());
        for (const StepRecord& rec : res.trace) rows.push_back({0, rec});
        write_trace_csv(ensure_dir(o.out_dir) / "trace.csv", rows);
    }
}

void cmd_greedy(const CommonOpts& o) {
    const Dataset data = make_data(o);
    LinearPrefit pre;
    const Dataset* working = apply_prefit(o, data, pre);
    const RodeoConfig cfg = make_rodeo_config(o);
    const GreedyTrace res = greedy_rodeo(*working, eval_points_for(o, *working), cfg);

    std::cout << "stopping_time,sigma";
    print_h_columns_header(std::cout, data.d());
    std::cout << '\n' << res.stopping_time << ',' << format_double(res.sigma_used);
    print_h_columns(std::cout, res.h_final);
    std::cout << '\n';

    if (!o.out_dir.empty()) {
        const std::filesystem::path dir = ensure_dir(o.out_dir);
        std::ofstream trace = open_out(dir / "greedy_trace.csv");
        trace << "step,variable,score,h_after\n";
        for (const GreedyEvent& ev : res.events)
            trace << ev.step << ',' << (ev.variable + 1) << ',' << format_double(ev.score)
                  << ',' << format_double(ev.h_after) << '\n';
        std::ofstream order = open_out(dir / "ordering.csv");
        order << "variable,rank\n";
        for (std::size_t j = 0; j < res.selection_order.size(); ++j)
            order << (j + 1) << ',' << res.selection_order[j] << '\n';
    }
}

void cmd_sigma(const CommonOpts& o, const std::string& method, int pairs) {
    const Dataset data = make_data(o);
    SigmaEstimate est;
    if (method == "rice")
        est = sigma_rice(data, pairs);
    else if (method == "median")
        est = sigma_median(data, pairs);
    else
        throw std::invalid_argument("--method must be rice or median");
    std::cout << "method,J,sigma,sigma2,D\n"
              << method << ',' << est.pairs << ',' << format_double(est.sigma) << ','
              << format_double(est.sigma2) << ',' << format_double(est.max_pair_distance)
              << '\n';
}

void cmd_loocv(const CommonOpts& o, const std::string& grid_text) {
    const Dataset data = make_data(o);
    const Eigen::VectorXd x = resolve_point(o, data);
    const std::vector<double> grid =
        grid_text.empty() ? default_cv_grid() : parse_grid(grid_text);
    const LoocvResult res = loocv_bandwidth(data, x, grid, KernelSpec{parse_kernel(o.kernel_name)},
                                            parse_smoother(o.smoother_name));
    std::cout << "best_h,estimate\n"
              << format_double(res.best_h) << ',' << format_double(res.estimate) << '\n';
    if (!o.out_dir.empty()) {
        std::ofstream out = open_out(ensure_dir(o.out_dir) / "cv_risks.csv");
        out << "h,risk\n";
        for (std::size_t g = 0; g < grid.size(); ++g)
            out << format_double(grid[g]) << ',' << format_double(res.risks[g]) << '\n';
    }
}

void cmd_experiment(const CommonOpts& o, const std::string& algorithm, int replicates,
                    int points, const std::string& grid_text) {
    ExperimentConfig cfg;
    cfg.use_synthetic = o.data_path.empty();
    if (!o.data_path.empty() && !o.synthetic_name.empty())
        throw std::invalid_argument("--data and --synthetic are mutually exclusive");
    if (cfg.use_synthetic) {
        if (o.synthetic_name.empty())
            throw std::invalid_argument("need --data PATH or --synthetic NAME");
        cfg.synthetic = make_spec(o);
        cfg.n = o.n;
    } else {
        cfg.data_path = o.data_path;
        cfg.target = o.target;
    }
    cfg.algorithm = parse_algorithm(algorithm);
    cfg.replicates = replicates;
    cfg.rodeo = make_rodeo_config(o);
    cfg.eval_count = o.eval_count;
    cfg.prefit = o.prefit;
    cfg.prefit_penalty = o.penalty;
    if (!grid_text.empty()) cfg.cv_grid = parse_grid(grid_text);
    cfg.output_dir = o.out_dir;

    if (!o.x_texts.empty() && o.x_random)
        throw std::invalid_argument("--x and --x-random are mutually exclusive");
    if (o.x_random) {
        cfg.test_points.random_per_replicate = true;
        cfg.test_points.random_count = points;
    } else {
        if (o.x_texts.empty()) throw std::invalid_argument("need --x (repeatable) or --x-random");
        Eigen::VectorXd first = parse_point(o.x_texts.front());
        cfg.test_points.fixed.resize(static_cast<Eigen::Index>(o.x_texts.size()), first.size());
        cfg.test_points.fixed.row(0) = first.transpose();
        for (std::size_t i = 1; i < o.x_texts.size(); ++i) {
            Eigen::VectorXd x = parse_point(o.x_texts[i]);
            if (x.size() != first.size())
                throw std::invalid_argument("--x points must share one dimension");
            cfg.test_points.fixed.row(static_cast<Eigen::Index>(i)) = x.transpose();
        }
    }

    const ExperimentReport report = run_experiment(cfg);
    write_summary_csv(std::cout, report.summary);
    if (report.failed_rows > 0)
        std::cerr << report.failed_rows << " of " << report.rows.size()
                  << " rows failed and were excluded from the summary\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Greedy bandwidth and variable selection for local regression"};
    app.require_subcommand(1);
    CommonOpts o;

    auto* fit = app.add_subcommand("fit", "one local fit at a point");
    std::string h_text = "0.5";
    add_data_flags(fit, o);
    add_point_flags(fit, o);
    fit->add_option("--bandwidth", h_text,
                    "bandwidths: one value or d comma-separated values");
    fit->add_option("--kernel", o.kernel_name, "gaussian|epanechnikov");
    fit->add_option("--smoother", o.smoother_name, "local-linear|kernel-regression");
    fit->callback([&] { cmd_fit(o, h_text); });

    auto* rodeo_cmd = app.add_subcommand("rodeo", "hard or soft bandwidth selection at a point");
    std::string variant = "hard";
    add_data_flags(rodeo_cmd, o);
    add_point_flags(rodeo_cmd, o);
    CLI::Option* rodeo_beta = add_rodeo_flags(rodeo_cmd, o);
    rodeo_cmd->add_option("--variant", variant, "hard|soft");
    rodeo_cmd->add_option("--out", o.out_dir, "directory for trace.csv");
    rodeo_cmd->callback([&] {
        if (variant == "soft" && rodeo_beta->count() == 0) o.beta = 0.9;
        cmd_rodeo(o, variant);
    });

    auto* global_cmd = app.add_subcommand("global", "one bandwidth vector for the whole sample");
    add_data_flags(global_cmd, o);
    add_rodeo_flags(global_cmd, o);
    global_cmd->add_option("--eval-count", o.eval_count, "evaluation points (default min(n,30))");
    global_cmd->add_flag("--prefit", o.prefit, "subtract a linear fit first");
    global_cmd->add_option("--penalty", o.penalty, "L1 penalty for the prefit (0 = least squares)");
    global_cmd->add_option("--out", o.out_dir, "directory for trace.csv");
    global_cmd->callback([&] { cmd_global(o); });

    auto* greedy_cmd = app.add_subcommand("greedy", "shrink one bandwidth per step");
    add_data_flags(greedy_cmd, o);
    add_rodeo_flags(greedy_cmd, o);
    greedy_cmd->add_option("--eval-count", o.eval_count, "evaluation points (default min(n,30))");
    greedy_cmd->add_flag("--prefit", o.prefit, "subtract a linear fit first");
    greedy_cmd->add_option("--penalty", o.penalty, "L1 penalty for the prefit (0 = least squares)");
    greedy_cmd->add_option("--out", o.out_dir, "directory for greedy_trace.csv and ordering.csv");
    greedy_cmd->callback([&] { cmd_greedy(o); });

    auto* sigma_cmd = app.add_subcommand("sigma", "noise level from nearest-pair differences");
    std::string method = "rice";
    int pairs = 20;
    add_data_flags(sigma_cmd, o);
    sigma_cmd->add_option("--method", method, "rice|median");
    sigma_cmd->add_option("--pairs", pairs, "number of nearest pairs J");
    sigma_cmd->callback([&] { cmd_sigma(o, method, pairs); });

    auto* loocv_cmd = app.add_subcommand("loocv", "single-bandwidth leave-one-out baseline");
    std::string grid_text;
    add_data_flags(loocv_cmd, o);
    add_point_flags(loocv_cmd, o);
    loocv_cmd->add_option("--grid", grid_text, "comma-separated bandwidth grid");
    loocv_cmd->add_option("--kernel", o.kernel_name, "gaussian|epanechnikov");
    loocv_cmd->add_option("--smoother", o.smoother_name, "local-linear|kernel-regression");
    loocv_cmd->add_option("--out", o.out_dir, "directory for cv_risks.csv");
    loocv_cmd->callback([&] { cmd_loocv(o, grid_text); });

    auto* exp_cmd = app.add_subcommand("experiment", "seeded replicates with CSV reports");
    std::string algorithm = "hard";
    int replicates = 1;
    int points = 1;
    std::string cv_grid_text;
    add_data_flags(exp_cmd, o);
    add_point_flags(exp_cmd, o);
    CLI::Option* exp_beta = add_rodeo_flags(exp_cmd, o);
    exp_cmd->add_option("--algorithm", algorithm, "hard|soft|global|greedy|baseline");
    exp_cmd->add_option("--replicates", replicates, "number of replicates");
    exp_cmd->add_option("--points", points, "random test points per replicate");
    exp_cmd->add_option("--eval-count", o.eval_count, "evaluation points for global/greedy");
    exp_cmd->add_flag("--prefit", o.prefit, "subtract a linear fit first");
    exp_cmd->add_option("--penalty", o.penalty, "L1 penalty for the prefit (0 = least squares)");
    exp_cmd->add_option("--grid", cv_grid_text, "bandwidth grid for the baseline");
    exp_cmd->add_option("--out", o.out_dir, "output directory for the report CSVs")->required();
    exp_cmd->callback([&] {
        if (algorithm == "soft" && exp_beta->count() == 0) o.beta = 0.9;
        cmd_experiment(o, algorithm, replicates, points, cv_grid_text);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Collapse CLI11's family of parse-error codes onto the documented
        // usage-error code, keeping --help and --version at 0.
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const rodeo::numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
