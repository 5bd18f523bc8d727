#pragma once

#include <cmath>
#include <cstdint>

namespace rodeo {

/// Identifies one reproducible random stream. The same
/// (master_seed, stream_index) always yields the same draws, bit for bit;
/// distinct stream indices give statistically independent streams, so
/// Monte Carlo replicate r conventionally uses stream_index = r.
struct RngSeed {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_index = 0;
};

/// Quantile of the standard normal distribution, evaluated by Acklam's
/// rational approximation followed by one Halley refinement step, which
/// brings the result to full double precision. p must lie in (0, 1).
inline double standard_normal_quantile(double p) {
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    static constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // Halley refinement against the exact CDF.
    static const double sqrt_2pi = std::sqrt(2.0 * M_PI);
    double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    double u = e * sqrt_2pi * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

/// Counter-based generator: SplitMix64 with the finalizer of Steele,
/// Lea and Flood. The initial state folds (master_seed, stream_index,
/// substream) through the same finalizer, so streams are cheap to derive
/// and well separated. Normal deviates come from the fixed inverse-CDF
/// above, one uniform per deviate, making every stream reproducible
/// across platforms and releases.
class SplitMix64 {
  public:
    explicit SplitMix64(RngSeed seed, std::uint64_t substream = 0) {
        std::uint64_t s = mix(seed.master_seed + kGamma);
        s = mix(s ^ (seed.stream_index + 0xD1B54A32D192ED03ULL));
        s = mix(s ^ (substream + 0x8CB92BA72F3D8DD7ULL));
        state_ = s;
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += kGamma);
        return mix(z);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on [low, high).
    double next_uniform(double low, double high) { return low + (high - low) * next_uniform(); }

    /// Standard normal via inverse CDF; the shift by half an ulp keeps the
    /// argument strictly inside (0, 1).
    double next_normal() {
        double p = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
        return standard_normal_quantile(p);
    }

    /// Uniform integer in [0, bound) by rejection, bound > 0.
    std::uint64_t next_below(std::uint64_t bound) {
        std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

  private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace rodeo
