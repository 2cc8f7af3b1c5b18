#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "caest/error.hpp"
#include "caest/normal.hpp"

namespace caest {

/// Dense p x p matrix, row-major.
struct SquareMatrix {
    std::size_t dim = 0;
    std::vector<double> data;

    SquareMatrix() = default;
    explicit SquareMatrix(std::size_t p) : dim(p), data(p * p, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * dim + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * dim + j]; }

    bool operator==(const SquareMatrix&) const = default;
};

/// Assembled long-run covariance of the chunk estimates.
struct CovarianceEstimate {
    SquareMatrix matrix;
    std::vector<bool> diag_floored; // diagonal entry was negative and clamped to 0
};

struct ConfidenceInterval {
    std::vector<double> center;
    std::vector<double> half_width;
    double level = 0.0;

    double lower(std::size_t k) const { return center[k] - half_width[k]; }
    double upper(std::size_t k) const { return center[k] + half_width[k]; }
};

/**
 * Online chunked-and-averaged estimator.
 *
 * Holds the running mean of all chunk estimates, the previous mean, the
 * M + 1 most recent chunk estimates and M + 1 lag covariance matrices.
 * Nothing else is retained, so memory is independent of the stream length.
 *
 * The lag-j matrix follows the recursion
 *
 *   V_t^(j) = (t-1)/t * [ V_{t-1}^(j)
 *                         + (1/t) (th_t - mean_{t-1}) (th_{t-j} - mean_{t-1})^T ],
 *
 * which at j = 0 is Welford's update of the population covariance. For
 * j >= 1 both factors are centred at the previous mean, so the recursion
 * differs from the batch lag covariance by O(1/t). At t = 1 the previous
 * mean is taken to be th_1, so the first update adds nothing.
 */
class CaState {
public:
    CaState(std::size_t p, std::size_t dependence_order)
        : p_(p), order_(dependence_order), mean_(p, 0.0), prev_mean_(p, 0.0),
          recent_((dependence_order + 1) * p, 0.0),
          lag_covs_(dependence_order + 1, SquareMatrix(p))
    {
        if (p_ < 1)
            throw ConfigError("parameter dimension must be at least 1");
    }

    std::size_t dim() const noexcept { return p_; }
    std::size_t dependence_order() const noexcept { return order_; }
    std::size_t count() const noexcept { return t_; }
    std::size_t skipped() const noexcept { return skipped_; }

    const std::vector<double>& mean() const noexcept { return mean_; }
    const std::vector<double>& previous_mean() const noexcept { return prev_mean_; }

    /// Capacity of the estimate ring; always M + 1.
    std::size_t recent_capacity() const noexcept { return order_ + 1; }
    std::size_t recent_size() const noexcept { return std::min(t_, order_ + 1); }
    /// Number of lag covariance matrices held; always M + 1.
    std::size_t lag_cov_count() const noexcept { return lag_covs_.size(); }

    /// Chunk estimate from `lag` steps ago (0 = newest).
    std::span<const double> recent(std::size_t lag) const
    {
        if (lag >= recent_size())
            throw UsageError("recent: lag beyond stored estimates");
        const std::size_t slot = (newest_ + order_ + 1 - lag) % (order_ + 1);
        return {recent_.data() + slot * p_, p_};
    }

    const SquareMatrix& lag_cov(std::size_t lag) const { return lag_covs_.at(lag); }

    /**
     * Absorb one chunk estimate: mean update followed by the lag covariance
     * update. Non-finite estimates are counted and dropped without touching
     * any other field. Returns whether the estimate was absorbed.
     */
    bool step(std::span<const double> theta_hat)
    {
        if (!update_mean(theta_hat))
            return false;
        update_lag_covariances();
        return true;
    }

    /// First half of step(). Leaves the state waiting for
    /// update_lag_covariances(); any other mutation before that is an error.
    bool update_mean(std::span<const double> theta_hat)
    {
        if (pending_lag_update_)
            throw ContractError("update_mean called twice without update_lag_covariances");
        if (theta_hat.size() != p_)
            throw UsageError("estimate has dimension " + std::to_string(theta_hat.size()) +
                             ", expected " + std::to_string(p_));
        for (double v : theta_hat) {
            if (!std::isfinite(v)) {
                ++skipped_;
                return false;
            }
        }

        ++t_;
        const double t = static_cast<double>(t_);
        prev_mean_ = mean_;
        for (std::size_t k = 0; k < p_; ++k)
            mean_[k] = ((t - 1.0) * prev_mean_[k] + theta_hat[k]) / t;
        if (t_ == 1)
            prev_mean_.assign(theta_hat.begin(), theta_hat.end());

        newest_ = t_ == 1 ? 0 : (newest_ + 1) % (order_ + 1);
        std::copy(theta_hat.begin(), theta_hat.end(), recent_.begin() + newest_ * p_);
        pending_lag_update_ = true;
        return true;
    }

    /// Second half of step(); must follow update_mean() exactly once.
    void update_lag_covariances()
    {
        if (!pending_lag_update_)
            throw ContractError("update_lag_covariances called without a preceding update_mean");
        pending_lag_update_ = false;

        const double t = static_cast<double>(t_);
        const double shrink = (t - 1.0) / t;
        const auto newest = recent(0);
        std::vector<double> dn(p_), dl(p_);
        for (std::size_t k = 0; k < p_; ++k)
            dn[k] = newest[k] - prev_mean_[k];

        for (std::size_t j = 0; j <= order_ && j < t_; ++j) {
            const auto lagged = recent(j);
            for (std::size_t k = 0; k < p_; ++k)
                dl[k] = lagged[k] - prev_mean_[k];
            SquareMatrix& v = lag_covs_[j];
            for (std::size_t a = 0; a < p_; ++a)
                for (std::size_t b = 0; b < p_; ++b)
                    v(a, b) = shrink * (v(a, b) + dn[a] * dl[b] / t);
        }
    }

    /**
     * V = V^(0) + sum_{j=1..M} (V^(j) + V^(j)^T), filled one triangle at a
     * time so the result is exactly symmetric. Negative diagonal entries are
     * clamped to zero and flagged.
     */
    CovarianceEstimate assemble_covariance() const
    {
        if (t_ < 1)
            throw InsufficientDataError("assemble_covariance: no estimates absorbed");
        CovarianceEstimate out{SquareMatrix(p_), std::vector<bool>(p_, false)};
        for (std::size_t a = 0; a < p_; ++a) {
            for (std::size_t b = a; b < p_; ++b) {
                double s = a == b ? lag_covs_[0](a, a)
                                  : 0.5 * (lag_covs_[0](a, b) + lag_covs_[0](b, a));
                for (std::size_t j = 1; j <= order_; ++j)
                    s += lag_covs_[j](a, b) + lag_covs_[j](b, a);
                out.matrix(a, b) = s;
                out.matrix(b, a) = s;
            }
            if (out.matrix(a, a) < 0.0) {
                out.matrix(a, a) = 0.0;
                out.diag_floored[a] = true;
            }
        }
        return out;
    }

    /// Per-coordinate asymptotic interval mean_k +- z * sqrt(V_kk / t).
    ConfidenceInterval confidence_interval(double level) const
    {
        if (!(level > 0.0 && level < 1.0))
            throw UsageError("confidence level must lie in (0, 1)");
        if (t_ < 2)
            throw InsufficientDataError("confidence_interval: need at least two estimates");
        const double z = normal_quantile(0.5 * (1.0 + level));
        const auto cov = assemble_covariance();
        ConfidenceInterval ci{mean_, std::vector<double>(p_), level};
        for (std::size_t k = 0; k < p_; ++k)
            ci.half_width[k] = z * std::sqrt(std::max(cov.matrix(k, k), 0.0) / static_cast<double>(t_));
        return ci;
    }

    void serialize(std::ostream& os) const;
    static CaState deserialize(std::istream& is);

    /// Logical equality: ring layout and unused slots are ignored.
    friend bool operator==(const CaState& a, const CaState& b)
    {
        if (a.p_ != b.p_ || a.order_ != b.order_ || a.t_ != b.t_ || a.skipped_ != b.skipped_ ||
            a.mean_ != b.mean_ || a.prev_mean_ != b.prev_mean_ || a.lag_covs_ != b.lag_covs_ ||
            a.pending_lag_update_ != b.pending_lag_update_)
            return false;
        for (std::size_t j = 0; j < a.recent_size(); ++j) {
            const auto ra = a.recent(j), rb = b.recent(j);
            if (!std::equal(ra.begin(), ra.end(), rb.begin()))
                return false;
        }
        return true;
    }

private:
    std::size_t p_;
    std::size_t order_;
    std::size_t t_ = 0;
    std::size_t skipped_ = 0;
    std::vector<double> mean_;
    std::vector<double> prev_mean_;
    std::vector<double> recent_; // ring of (M + 1) * p values
    std::size_t newest_ = 0;     // ring slot of the newest estimate
    std::vector<SquareMatrix> lag_covs_;
    bool pending_lag_update_ = false;
};

namespace detail {

inline std::string format_g17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_values(std::ostream& os, const char* key, std::span<const double> values)
{
    os << key;
    for (double v : values)
        os << ' ' << format_g17(v);
    os << '\n';
}

inline std::vector<double> read_values(std::istream& is, const std::string& key, std::size_t count)
{
    std::string line;
    if (!std::getline(is, line))
        throw DataError("state: missing line for '" + key + "'");
    std::istringstream ls(line);
    std::string got;
    ls >> got;
    if (got != key)
        throw DataError("state: expected key '" + key + "', found '" + got + "'");
    std::vector<double> values;
    std::string tok;
    while (ls >> tok)
        values.push_back(std::stod(tok));
    if (values.size() != count)
        throw DataError("state: key '" + key + "' has " + std::to_string(values.size()) +
                        " values, expected " + std::to_string(count));
    return values;
}

inline std::size_t read_count(std::istream& is, const std::string& key)
{
    const auto v = read_values(is, key, 1);
    if (v[0] < 0 || v[0] != std::floor(v[0]))
        throw DataError("state: key '" + key + "' is not a count");
    return static_cast<std::size_t>(v[0]);
}

} // namespace detail

/*
 * Plain-text checkpoint, one `key value...` line per field, in this order:
 *
 *   caest_state 1
 *   p <p>
 *   M <M>
 *   t <t>
 *   skipped <count>
 *   ca_mean <p values>
 *   prev_ca_mean <p values>
 *   recent <min(t, M+1) * p values, newest estimate first>
 *   lag_cov_<j> <p*p values, row-major>      for j = 0..M
 *
 * Reals use %.17g so a round trip is exact.
 */
inline void CaState::serialize(std::ostream& os) const
{
    if (pending_lag_update_)
        throw ContractError("serialize: state is between update_mean and update_lag_covariances");
    os << "caest_state 1\n";
    os << "p " << p_ << '\n' << "M " << order_ << '\n' << "t " << t_ << '\n'
       << "skipped " << skipped_ << '\n';
    detail::write_values(os, "ca_mean", mean_);
    detail::write_values(os, "prev_ca_mean", prev_mean_);
    std::vector<double> rec;
    for (std::size_t j = 0; j < recent_size(); ++j) {
        const auto r = recent(j);
        rec.insert(rec.end(), r.begin(), r.end());
    }
    detail::write_values(os, "recent", rec);
    for (std::size_t j = 0; j <= order_; ++j)
        detail::write_values(os, ("lag_cov_" + std::to_string(j)).c_str(), lag_covs_[j].data);
}

inline CaState CaState::deserialize(std::istream& is)
{
    if (detail::read_count(is, "caest_state") != 1)
        throw DataError("state: unsupported format version");
    const std::size_t p = detail::read_count(is, "p");
    const std::size_t order = detail::read_count(is, "M");
    CaState s(p, order);
    s.t_ = detail::read_count(is, "t");
    s.skipped_ = detail::read_count(is, "skipped");
    s.mean_ = detail::read_values(is, "ca_mean", p);
    s.prev_mean_ = detail::read_values(is, "prev_ca_mean", p);
    const std::size_t stored = s.recent_size();
    const auto rec = detail::read_values(is, "recent", stored * p);
    // Newest goes to the slot the next update will advance from.
    s.newest_ = stored == 0 ? 0 : stored - 1;
    for (std::size_t j = 0; j < stored; ++j) {
        const std::size_t slot = (s.newest_ + order + 1 - j) % (order + 1);
        std::copy(rec.begin() + static_cast<std::ptrdiff_t>(j * p),
                  rec.begin() + static_cast<std::ptrdiff_t>((j + 1) * p),
                  s.recent_.begin() + static_cast<std::ptrdiff_t>(slot * p));
    }
    for (std::size_t j = 0; j <= order; ++j)
        s.lag_covs_[j].data = detail::read_values(is, "lag_cov_" + std::to_string(j), p * p);
    return s;
}

} // namespace caest
