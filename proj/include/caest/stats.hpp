#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "caest/ca_engine.hpp"
#include "caest/error.hpp"
#include "caest/normal.hpp"

namespace caest {

struct ShapiroWilkResult {
    double w = 0.0;
    double p_value = 0.0;
};

namespace detail {

// c[0] + c[1] x + ... + c[k-1] x^(k-1)
inline double poly(std::span<const double> c, double x)
{
    double r = 0.0;
    for (std::size_t i = c.size(); i-- > 0;)
        r = r * x + c[i];
    return r;
}

} // namespace detail

/**
 * Shapiro-Wilk W test, Royston's large-sample algorithm (AS R94), valid
 * for 3 <= k <= 5000.
 *
 * The half-vector of weights a_i comes from normal scores
 * m_i = Phi^-1((i - 3/8) / (k + 1/4)), with the two extreme weights replaced
 * by polynomial corrections in 1/sqrt(k). The p-value is the upper tail of a
 * normal approximation to log(1 - W) (k >= 12), or to
 * -log(gamma - log(1 - W)) for 4 <= k <= 11. k = 3 is exact.
 */
inline ShapiroWilkResult shapiro_wilk(std::span<const double> sample)
{
    const std::size_t n = sample.size();
    if (n < 3 || n > 5000)
        throw UsageError("shapiro_wilk: sample size " + std::to_string(n) + " outside [3, 5000]");

    std::vector<double> x(sample.begin(), sample.end());
    std::sort(x.begin(), x.end());
    const double range = x.back() - x.front();
    if (!(range > 1e-19 * std::max(1.0, std::fabs(x.front()))))
        throw DegenerateSampleError("shapiro_wilk: sample has zero variance");

    const std::size_t half = n / 2;
    const double an = static_cast<double>(n);
    std::vector<double> a(half);

    if (n == 3) {
        a[0] = std::numbers::sqrt2 / 2.0;
    } else {
        static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
        static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
        double summ2 = 0.0;
        for (std::size_t i = 0; i < half; ++i) {
            a[i] = normal_quantile((static_cast<double>(i + 1) - 0.375) / (an + 0.25));
            summ2 += a[i] * a[i];
        }
        summ2 *= 2.0;
        const double ssumm2 = std::sqrt(summ2);
        const double rsn = 1.0 / std::sqrt(an);
        const double a1 = detail::poly(c1, rsn) - a[0] / ssumm2;

        std::size_t first_scaled;
        double fac;
        if (n > 5) {
            first_scaled = 2;
            const double a2 = -a[1] / ssumm2 + detail::poly(c2, rsn);
            fac = std::sqrt((summ2 - 2.0 * a[0] * a[0] - 2.0 * a[1] * a[1]) /
                            (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
            a[1] = a2;
        } else {
            first_scaled = 1;
            fac = std::sqrt((summ2 - 2.0 * a[0] * a[0]) / (1.0 - 2.0 * a1 * a1));
        }
        a[0] = a1;
        for (std::size_t i = first_scaled; i < half; ++i)
            a[i] /= -fac;
    }

    // W as the squared correlation between the ordered sample and the
    // antisymmetric coefficient vector; data scaled by the range.
    double mean = 0.0;
    for (double v : x)
        mean += v / range;
    mean /= an;
    double ss = 0.0, num = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] / range - mean;
        ss += d * d;
    }
    for (std::size_t i = 0; i < half; ++i)
        num += a[i] * (x[n - 1 - i] - x[i]) / range;
    const double w = std::min(1.0, num * num / ss);

    ShapiroWilkResult res{w, 1.0};
    if (n == 3) {
        constexpr double pi6 = 6.0 / std::numbers::pi;
        constexpr double stqr = std::numbers::pi / 3.0;
        res.p_value = std::clamp(pi6 * (std::asin(std::sqrt(w)) - stqr), 0.0, 1.0);
        return res;
    }

    const double w1 = 1.0 - w;
    if (!(w1 > 0.0))
        return res;
    double y = std::log(w1);
    double mu, sigma;
    if (n <= 11) {
        static constexpr double g[] = {-2.273, 0.459};
        static constexpr double c3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
        static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
        const double gamma = detail::poly(g, an);
        if (y >= gamma) {
            res.p_value = 1e-99;
            return res;
        }
        y = -std::log(gamma - y);
        mu = detail::poly(c3, an);
        sigma = std::exp(detail::poly(c4, an));
    } else {
        static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
        static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
        const double ln = std::log(an);
        mu = detail::poly(c5, ln);
        sigma = std::exp(detail::poly(c6, ln));
    }
    res.p_value = normal_upper_tail((y - mu) / sigma);
    return res;
}

/// Empirical quantile with linear interpolation between order statistics
/// (position (k - 1) * prob on the sorted sample).
inline double empirical_quantile(std::span<const double> sorted, double prob)
{
    if (sorted.empty())
        throw UsageError("empirical_quantile: empty sample");
    const double h = static_cast<double>(sorted.size() - 1) * std::clamp(prob, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Central percentile interval at the given level, e.g. 0.95 -> (2.5%, 97.5%).
inline std::pair<double, double> percentile_interval(std::span<const double> samples, double level)
{
    if (samples.size() < 2)
        throw UsageError("percentile_interval: need at least two samples");
    if (!(level > 0.0 && level < 1.0))
        throw UsageError("percentile_interval: level must lie in (0, 1)");
    std::vector<double> s(samples.begin(), samples.end());
    std::sort(s.begin(), s.end());
    return {empirical_quantile(s, 0.5 * (1.0 - level)), empirical_quantile(s, 0.5 * (1.0 + level))};
}

/**
 * Direct lag-j covariance of a stored estimate sequence:
 * (1/t) * sum_{u=j+1..t} (th_u - mean)(th_{u-j} - mean)^T with mean over
 * all t estimates. Reference for the online recursion.
 */
inline SquareMatrix batch_lag_cov_oracle(std::span<const std::vector<double>> estimates, std::size_t lag)
{
    const std::size_t t = estimates.size();
    if (lag >= t)
        throw UsageError("batch_lag_cov_oracle: lag must be smaller than the sequence length");
    const std::size_t p = estimates[0].size();
    std::vector<double> mean(p, 0.0);
    for (const auto& e : estimates) {
        if (e.size() != p)
            throw UsageError("batch_lag_cov_oracle: ragged estimate sequence");
        for (std::size_t k = 0; k < p; ++k)
            mean[k] += e[k];
    }
    for (auto& v : mean)
        v /= static_cast<double>(t);

    SquareMatrix out(p);
    for (std::size_t u = lag; u < t; ++u)
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < p; ++b)
                out(a, b) += (estimates[u][a] - mean[a]) * (estimates[u - lag][b] - mean[b]);
    for (auto& v : out.data)
        v /= static_cast<double>(t);
    return out;
}

} // namespace caest
