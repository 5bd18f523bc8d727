#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "rodeo/dataset.hpp"

namespace rodeo {

enum class SigmaMethod { Rice, Median };

struct SigmaEstimate {
    double sigma = 0.0;
    double sigma2 = 0.0;
    int pairs = 0;                  // J, the number of nearest pairs used
    double max_pair_distance = 0.0; // D, the largest distance among them
    SigmaMethod method = SigmaMethod::Rice;
};

struct NeighborPair {
    int i;
    int l;
    double distance;
};

/// The J pairs (i < l) with smallest Euclidean covariate distance, sorted
/// ascending by (distance, i, l). Ties break lexicographically.
inline std::vector<NeighborPair> nearest_pairs(const Dataset& data, int J) {
    data.validate();
    const int n = static_cast<int>(data.n());
    const long total = static_cast<long>(n) * (n - 1) / 2;
    if (J < 1 || J > total)
        throw std::invalid_argument("J must lie in [1, n(n-1)/2] = [1, " + std::to_string(total) + "]");

    std::vector<NeighborPair> pairs;
    pairs.reserve(static_cast<std::size_t>(total));
    for (int i = 0; i < n; ++i)
        for (int l = i + 1; l < n; ++l)
            pairs.push_back({i, l, (data.X.row(i) - data.X.row(l)).norm()});

    auto less = [](const NeighborPair& a, const NeighborPair& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        if (a.i != b.i) return a.i < b.i;
        return a.l < b.l;
    };
    std::nth_element(pairs.begin(), pairs.begin() + (J - 1), pairs.end(), less);
    pairs.resize(J);
    std::sort(pairs.begin(), pairs.end(), less);
    return pairs;
}

/// Rice-style difference estimator: sigma2 = sum (Y_i - Y_l)^2 / (2J) over
/// the J nearest pairs.
inline SigmaEstimate sigma_rice(const Dataset& data, int J) {
    const auto pairs = nearest_pairs(data, J);
    double sum_sq = 0.0;
    for (const auto& p : pairs) {
        const double diff = data.Y[p.i] - data.Y[p.l];
        sum_sq += diff * diff;
    }
    SigmaEstimate est;
    est.method = SigmaMethod::Rice;
    est.pairs = J;
    est.sigma2 = sum_sq / (2.0 * J);
    est.sigma = std::sqrt(est.sigma2);
    est.max_pair_distance = pairs.back().distance;
    return est;
}

/// Robust variant: sigma = (sqrt(pi)/2) * median |Y_i - Y_l| over the J
/// nearest pairs. The median of an even count is the lower-middle order
/// statistic, keeping the estimator an exact order statistic.
inline SigmaEstimate sigma_median(const Dataset& data, int J) {
    const auto pairs = nearest_pairs(data, J);
    std::vector<double> abs_diffs;
    abs_diffs.reserve(pairs.size());
    for (const auto& p : pairs) abs_diffs.push_back(std::abs(data.Y[p.i] - data.Y[p.l]));
    const std::size_t mid = (abs_diffs.size() - 1) / 2;
    std::nth_element(abs_diffs.begin(), abs_diffs.begin() + mid, abs_diffs.end());

    SigmaEstimate est;
    est.method = SigmaMethod::Median;
    est.pairs = J;
    est.sigma = 0.5 * std::sqrt(M_PI) * abs_diffs[mid];
    est.sigma2 = est.sigma * est.sigma;
    est.max_pair_distance = pairs.back().distance;
    return est;
}

}  // namespace rodeo
