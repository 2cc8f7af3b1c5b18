#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "caest/error.hpp"

namespace caest {

/// Per-window estimate of the p-vector parameter.
using ChunkEstimate = std::vector<double>;

// ---------------------------------------------------------------------------
// Simple linear regression

/**
 * Least-squares intercept and slope of y on x.
 *
 * Uses centered sums. The design is treated as degenerate when
 * S_xx <= 1e-12 * sum(x^2).
 */
inline ChunkEstimate ols_fit(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
        throw UsageError("ols_fit: x and y differ in length");
    const std::size_t n = x.size();
    if (n < 2)
        throw UsageError("ols_fit: need at least two points");

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double sxx = 0.0, sxy = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        sxx += dx * dx;
        sxy += dx * (y[i] - my);
        sum_sq += x[i] * x[i];
    }
    if (!(sxx > 1e-12 * sum_sq))
        throw EstimationError("ols_fit: degenerate design (x values are constant)");

    const double slope = sxy / sxx;
    return {my - slope * mx, slope};
}

// ---------------------------------------------------------------------------
// Location / scale

/// Sample median; even sizes average the two central order statistics.
inline double sample_median(std::span<const double> values)
{
    if (values.empty())
        throw UsageError("sample_median: empty sample");
    std::vector<double> v(values.begin(), values.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1)
        return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

/// Unbiased sample variance (divisor n - 1), two-pass.
inline double sample_variance(std::span<const double> values)
{
    const std::size_t n = values.size();
    if (n < 2)
        throw UsageError("sample_variance: need at least two values");
    double mean = 0.0;
    for (double v : values)
        mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0, comp = 0.0;
    for (double v : values) {
        const double d = v - mean;
        ss += d * d;
        comp += d;
    }
    return (ss - comp * comp / static_cast<double>(n)) / static_cast<double>(n - 1);
}

/// (median, S^2 / 2). For Laplace data the pair targets (location, scale^2).
inline ChunkEstimate median_and_half_variance(std::span<const double> values)
{
    if (values.size() < 2)
        throw UsageError("median_and_half_variance: need at least two values");
    return {sample_median(values), 0.5 * sample_variance(values)};
}

// ---------------------------------------------------------------------------
// Gaussian MA(1)

/// X_i = rho1 + E_i + rho2 * E_{i-1},  E_i ~ N(0, sigma2).
struct Ma1Params {
    double rho1 = 0.0;
    double rho2 = 0.0;
    double sigma2 = 1.0;
};

/// Boundary margin keeping the MA coefficient strictly inside (-1, 1).
inline constexpr double kMa1Boundary = 1e-4;

namespace detail {

/*
 * Innovations recursion for an MA(1) with unit innovation variance.
 *
 * With gamma(0) = 1 + theta^2 and gamma(1) = theta, the one-step prediction
 * variances scaled by sigma2 are
 *     r_1 = 1 + theta^2,   r_i = 1 + theta^2 - theta^2 / r_{i-1},
 * and the zero-mean prediction errors are
 *     e_1 = z_1,           e_i = z_i - (theta / r_{i-1}) e_{i-1}.
 * The log-density of z ~ N(0, sigma2 * Sigma) is then
 *     -0.5 * [n log(2 pi sigma2) + sum log r_i + sum e_i^2 / (r_i sigma2)].
 *
 * Running the same recursion on z = 1 yields weights a_i with
 * e_i(mu) = e_i(0) - mu * a_i, so the Gaussian likelihood is quadratic in
 * the mean and its maximizer is available in closed form.
 */
struct Ma1Sums {
    double log_det = 0.0; // sum log r_i
    double see = 0.0;     // sum e_i^2 / r_i     (mean zero)
    double sea = 0.0;     // sum e_i a_i / r_i
    double saa = 0.0;     // sum a_i^2 / r_i
};

inline Ma1Sums ma1_sums(std::span<const double> series, double theta, double shift)
{
    Ma1Sums s;
    const double g0 = 1.0 + theta * theta;
    double r = g0;
    double e = 0.0, a = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double z = series[i] - shift;
        if (i == 0) {
            r = g0;
            e = z;
            a = 1.0;
        } else {
            const double k = theta / r;
            r = g0 - theta * k;
            e = z - k * e;
            a = 1.0 - k * a;
        }
        s.log_det += std::log(r);
        s.see += e * e / r;
        s.sea += e * a / r;
        s.saa += a * a / r;
    }
    return s;
}

} // namespace detail

/// Exact Gaussian log-likelihood of an MA(1) model, O(n).
inline double ma1_loglik(std::span<const double> series, const Ma1Params& params)
{
    if (!(std::fabs(params.rho2) < 1.0))
        throw DomainError("ma1_loglik: |rho2| must be < 1");
    if (!(params.sigma2 > 0.0))
        throw DomainError("ma1_loglik: sigma2 must be positive");
    if (series.size() < 2)
        throw UsageError("ma1_loglik: need at least two observations");

    const auto s = detail::ma1_sums(series, params.rho2, params.rho1);
    const double n = static_cast<double>(series.size());
    return -0.5 * (n * std::log(2.0 * std::numbers::pi * params.sigma2) + s.log_det +
                   s.see / params.sigma2);
}

/// Maximized (over rho1 and sigma2) likelihood at a fixed MA coefficient.
struct Ma1Fit {
    double rho1 = 0.0;
    double rho2 = 0.0;
    double sigma2 = 0.0;
    double loglik = -std::numeric_limits<double>::infinity();
};

/**
 * Profile of the likelihood at MA coefficient `theta`: the mean is the GLS
 * solution and sigma2 = (prediction-error sum of squares) / n.
 * The series is centered at its first value before the recursion, which
 * leaves the fit unchanged but keeps the sums well scaled.
 */
inline Ma1Fit ma1_profile(std::span<const double> series, double theta)
{
    const double shift = series.empty() ? 0.0 : series[0];
    const auto s = detail::ma1_sums(series, theta, shift);
    const double n = static_cast<double>(series.size());
    Ma1Fit fit;
    fit.rho2 = theta;
    if (!(s.saa > 0.0))
        return fit;
    const double mu = s.sea / s.saa;
    const double ss = s.see - mu * s.sea;
    fit.rho1 = shift + mu;
    if (!(ss > 0.0) || !std::isfinite(ss))
        return fit;
    fit.sigma2 = ss / n;
    fit.loglik = -0.5 * (n * (std::log(2.0 * std::numbers::pi * fit.sigma2) + 1.0) + s.log_det);
    return fit;
}

/// Profile log-likelihood in (rho1, rho2) with sigma2 concentrated out.
inline double ma1_concentrated_loglik(std::span<const double> series, double rho1, double rho2)
{
    const auto s = detail::ma1_sums(series, rho2, rho1);
    const double n = static_cast<double>(series.size());
    const double sigma2 = s.see / n;
    if (!(sigma2 > 0.0))
        return -std::numeric_limits<double>::infinity();
    return -0.5 * (n * (std::log(2.0 * std::numbers::pi * sigma2) + 1.0) + s.log_det);
}

namespace detail {

/// Golden-section maximization of the MA(1) profile on [lo, hi].
inline Ma1Fit ma1_golden(std::span<const double> series, double lo, double hi, Ma1Fit best)
{
    constexpr double kInvPhi = 0.6180339887498949;
    constexpr int kMaxIter = 200;
    constexpr double kTol = 1e-10;

    double a = lo, b = hi;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    Ma1Fit fc = ma1_profile(series, c);
    Ma1Fit fd = ma1_profile(series, d);
    int iter = 0;
    for (; iter < kMaxIter && (b - a) > kTol; ++iter) {
        if (fc.loglik >= fd.loglik) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = ma1_profile(series, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = ma1_profile(series, d);
        }
    }
    if (iter == kMaxIter)
        throw EstimationError("ma1_mle: line search did not converge");
    for (const Ma1Fit* f : {&fc, &fd})
        if (f->loglik > best.loglik)
            best = *f;
    return best;
}

} // namespace detail

/**
 * Exact Gaussian maximum-likelihood fit of an MA(1) model.
 *
 * The mean and innovation variance are profiled out in closed form, leaving
 * a one-dimensional search over the MA coefficient on
 * [-1 + kMa1Boundary, 1 - kMa1Boundary]: a 101-node grid locates the best
 * basin and golden-section search refines inside the neighbouring nodes.
 * Solutions on the boundary are returned clamped.
 */
inline Ma1Fit ma1_mle_fit(std::span<const double> series)
{
    if (series.size() < 10)
        throw UsageError("ma1_mle: need at least 10 observations");
    for (double v : series)
        if (!std::isfinite(v))
            throw DataError("ma1_mle: non-finite observation");

    constexpr int kGrid = 101;
    const double lo = -1.0 + kMa1Boundary;
    const double hi = 1.0 - kMa1Boundary;
    const double step = (hi - lo) / (kGrid - 1);

    Ma1Fit best;
    int best_k = -1;
    for (int k = 0; k < kGrid; ++k) {
        const double theta = k == kGrid - 1 ? hi : lo + step * k;
        Ma1Fit f = ma1_profile(series, theta);
        if (f.loglik > best.loglik) {
            best = f;
            best_k = k;
        }
    }
    if (best_k < 0)
        throw EstimationError("ma1_mle: likelihood is not finite anywhere on the grid");

    const double a = std::max(lo, lo + step * (best_k - 1));
    const double b = std::min(hi, lo + step * (best_k + 1));
    return detail::ma1_golden(series, a, b, best);
}

/**
 * Warm-started fit: search only within `radius` of a previous solution.
 * Used when the series grows by appending and the optimum moves slowly.
 */
inline Ma1Fit ma1_mle_fit_near(std::span<const double> series, double rho2_start, double radius)
{
    if (series.size() < 10)
        throw UsageError("ma1_mle: need at least 10 observations");
    const double lo = -1.0 + kMa1Boundary;
    const double hi = 1.0 - kMa1Boundary;
    const double a = std::clamp(rho2_start - radius, lo, hi);
    const double b = std::clamp(rho2_start + radius, lo, hi);
    Ma1Fit start = ma1_profile(series, std::clamp(rho2_start, lo, hi));
    Ma1Fit fit = detail::ma1_golden(series, a, b, start);
    // An optimum pinned to an interior bracket edge means the warm start was
    // too far off; fall back to the global search.
    const bool at_edge = (fit.rho2 - a < 1e-6 && a > lo) || (b - fit.rho2 < 1e-6 && b < hi);
    if (at_edge || !std::isfinite(fit.loglik))
        return ma1_mle_fit(series);
    return fit;
}

inline ChunkEstimate ma1_mle(std::span<const double> series)
{
    const Ma1Fit fit = ma1_mle_fit(series);
    return {fit.rho1, fit.rho2};
}

} // namespace caest
