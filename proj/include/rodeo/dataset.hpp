#pragma once

#include <Eigen/Core>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rodeo/common.hpp"
#include "rodeo/rng.hpp"

namespace rodeo {

/// Regression sample: an n x d covariate matrix paired with an n-vector of
/// responses. All entries must be finite; n >= 2 and d >= 1.
struct Dataset {
    Eigen::MatrixXd X;
    Eigen::VectorXd Y;
    std::vector<std::string> column_names;

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index d() const { return X.cols(); }

    void validate() const {
        if (X.rows() < 2) throw std::invalid_argument("dataset needs at least 2 rows");
        if (X.cols() < 1) throw std::invalid_argument("dataset needs at least 1 covariate");
        if (Y.size() != X.rows()) throw std::invalid_argument("response length does not match row count");
        if (!X.allFinite() || !Y.allFinite())
            throw std::invalid_argument("dataset contains non-finite entries");
        if (!column_names.empty() && static_cast<Eigen::Index>(column_names.size()) != X.cols())
            throw std::invalid_argument("column name count does not match covariate count");
    }
};

enum class SyntheticVariant { TwoRelevant, CubicSine, OneDimSine, Turlach, Linear, PureNoise };

/// Recipe for a synthetic regression dataset. Covariates are sampled
/// uniformly on the unit cube, except OneDimSine whose single covariate is
/// Uniform(0,1) shifted by 1/2. The regression functions:
///
///   TwoRelevant  m(x) = 5 x1^2 x2^2                      (d >= 2)
///   CubicSine    m(x) = 2 (x1 + 1)^3 + 2 sin(10 x2)      (d >= 2)
///   OneDimSine   m(x) = (1/x) sin(15/x)                  (d == 1)
///   Turlach      m(x) = (x1 - 1/2)^2 + x2 + x3 + x4 + x5 (d >= 5)
///   Linear       m(x) = <linear_coefs, x>
///   PureNoise    m(x) = 0
struct SyntheticSpec {
    SyntheticVariant variant = SyntheticVariant::TwoRelevant;
    int d = 10;
    double sigma = 1.0;
    Eigen::VectorXd linear_coefs;  // Linear variant only

    void validate() const {
        if (d < 1) throw std::invalid_argument("dimension must be positive");
        if (sigma < 0.0) throw std::invalid_argument("sigma must be nonnegative");
        switch (variant) {
            case SyntheticVariant::TwoRelevant:
            case SyntheticVariant::CubicSine:
                if (d < 2) throw std::invalid_argument("variant requires d >= 2");
                break;
            case SyntheticVariant::OneDimSine:
                if (d != 1) throw std::invalid_argument("OneDimSine requires d = 1");
                break;
            case SyntheticVariant::Turlach:
                if (d < 5) throw std::invalid_argument("Turlach requires d >= 5");
                break;
            case SyntheticVariant::Linear:
                if (linear_coefs.size() != d)
                    throw std::invalid_argument("Linear variant needs a coefficient per covariate");
                break;
            case SyntheticVariant::PureNoise:
                break;
        }
    }
};

/// Noiseless regression function of the variant, evaluated at x.
inline double true_function(const SyntheticSpec& spec, const Eigen::VectorXd& x) {
    spec.validate();
    if (x.size() != spec.d) throw std::invalid_argument("point dimension does not match spec");
    switch (spec.variant) {
        case SyntheticVariant::TwoRelevant:
            return 5.0 * x[0] * x[0] * x[1] * x[1];
        case SyntheticVariant::CubicSine: {
            double c = x[0] + 1.0;
            return 2.0 * c * c * c + 2.0 * std::sin(10.0 * x[1]);
        }
        case SyntheticVariant::OneDimSine:
            return (1.0 / x[0]) * std::sin(15.0 / x[0]);
        case SyntheticVariant::Turlach: {
            double q = x[0] - 0.5;
            return q * q + x[1] + x[2] + x[3] + x[4];
        }
        case SyntheticVariant::Linear:
            return spec.linear_coefs.dot(x);
        case SyntheticVariant::PureNoise:
            return 0.0;
    }
    throw std::invalid_argument("unknown synthetic variant");
}

/// Draws one covariate vector from the variant's sampling law.
inline Eigen::VectorXd sample_covariate(const SyntheticSpec& spec, SplitMix64& rng) {
    Eigen::VectorXd x(spec.d);
    for (int j = 0; j < spec.d; ++j) x[j] = rng.next_uniform();
    if (spec.variant == SyntheticVariant::OneDimSine) x.array() += 0.5;
    return x;
}

/// Generates Y_i = m(X_i) + sigma * z_i with standard normal z_i. Pure in
/// (spec, n, seed): the covariate matrix is filled row by row, then the n
/// noise deviates are drawn, all from the stream named by seed.
inline Dataset gen_synthetic(const SyntheticSpec& spec, int n, RngSeed seed) {
    spec.validate();
    if (n < 2) throw std::invalid_argument("need n >= 2 observations");

    SplitMix64 rng(seed);
    Dataset data;
    data.X.resize(n, spec.d);
    data.Y.resize(n);
    for (int i = 0; i < n; ++i) data.X.row(i) = sample_covariate(spec, rng).transpose();
    for (int i = 0; i < n; ++i) {
        double noise = spec.sigma > 0.0 ? spec.sigma * rng.next_normal() : 0.0;
        data.Y[i] = true_function(spec, data.X.row(i).transpose()) + noise;
    }
    data.column_names.reserve(spec.d);
    for (int j = 0; j < spec.d; ++j) data.column_names.push_back("x" + std::to_string(j + 1));
    return data;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace detail

/// Reads a comma-separated file with a header row. The named target column
/// becomes the response; the remaining columns, in header order, become the
/// covariates. Row order is preserved.
inline Dataset load_csv(const std::string& path, const std::string& target = "y") {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("'" + path + "' is empty");
    std::vector<std::string> header = detail::split_csv_line(detail::strip_cr(line));

    int target_col = -1;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == target) {
            target_col = static_cast<int>(j);
            break;
        }
    }
    if (target_col < 0)
        throw std::invalid_argument("target column '" + target + "' not found in '" + path + "'");

    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        std::vector<std::string> cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw std::invalid_argument(path + ": row " + std::to_string(line_no) + " has " +
                                        std::to_string(cells.size()) + " cells, expected " +
                                        std::to_string(header.size()));
        std::vector<double> parsed(cells.size());
        for (std::size_t j = 0; j < cells.size(); ++j) {
            parsed[j] = parse_double(cells[j], path + ": row " + std::to_string(line_no) +
                                                   ", column '" + header[j] + "'");
        }
        rows.push_back(std::move(parsed));
    }
    if (rows.size() < 2) throw std::invalid_argument("'" + path + "' has fewer than 2 data rows");

    Dataset data;
    const int n = static_cast<int>(rows.size());
    const int d = static_cast<int>(header.size()) - 1;
    if (d < 1) throw std::invalid_argument("'" + path + "' has no covariate columns");
    data.X.resize(n, d);
    data.Y.resize(n);
    for (std::size_t j = 0; j < header.size(); ++j)
        if (static_cast<int>(j) != target_col) data.column_names.push_back(header[j]);
    for (int i = 0; i < n; ++i) {
        int k = 0;
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (static_cast<int>(j) == target_col)
                data.Y[i] = rows[i][j];
            else
                data.X(i, k++) = rows[i][j];
        }
    }
    data.validate();
    return data;
}

/// Writes the dataset as CSV: covariates in stored order, then the target
/// column. Floats carry 17 significant digits so load_csv round-trips the
/// data bit-exactly. LF line endings.
inline void write_csv(const Dataset& data, std::ostream& out, const std::string& target = "y") {
    for (Eigen::Index j = 0; j < data.d(); ++j) {
        const std::string name = static_cast<std::size_t>(j) < data.column_names.size()
                                     ? data.column_names[j]
                                     : "x" + std::to_string(j + 1);
        out << name << ',';
    }
    out << target << '\n';
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        for (Eigen::Index j = 0; j < data.d(); ++j) out << format_double(data.X(i, j)) << ',';
        out << format_double(data.Y[i]) << '\n';
    }
}

inline void write_csv(const Dataset& data, const std::string& path, const std::string& target = "y") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write '" + path + "'");
    write_csv(data, out, target);
}

}  // namespace rodeo
