#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "caest/error.hpp"

namespace caest {

/// One observation X_i in R^d.
using Observation = std::vector<double>;

struct WindowConfig {
    std::size_t n = 0;  // window size
    std::size_t nu = 0; // chunk size
    std::size_t m = 0;  // dependence order of the raw process

    void validate() const
    {
        if (nu < 1)
            throw ConfigError("chunk size must be at least 1");
        if (nu > n)
            throw ConfigError("chunk size " + std::to_string(nu) +
                              " exceeds window size " + std::to_string(n));
    }
};

/**
 * Dependence order of the sequence of overlapping windows.
 *
 * Windows that advance by nu observations over an m-dependent stream are
 * M-dependent for every real M >= max(m/nu, n/nu - 1). This returns the
 * smallest such non-negative integer, which fixes the number of lag
 * buffers (M + 1) carried by the online estimator.
 */
inline std::size_t compute_dependence_order(const WindowConfig& config)
{
    config.validate();
    const auto ceil_div = [](std::size_t a, std::size_t b) { return (a + b - 1) / b; };
    const std::size_t from_raw = ceil_div(config.m, config.nu);
    const std::size_t from_overlap = ceil_div(config.n, config.nu) - 1;
    return std::max(from_raw, from_overlap);
}

/**
 * Fixed-capacity ring holding the n most recent observations.
 *
 * Storage is a single flat n*d block allocated at construction; pushes only
 * overwrite slots. Chunks are validated in full before any slot is touched,
 * so a rejected chunk leaves the window exactly as it was.
 */
class WindowBuffer {
public:
    WindowBuffer(WindowConfig config, std::size_t dim)
        : config_(config), dim_(dim)
    {
        config_.validate();
        if (dim_ < 1)
            throw ConfigError("observation dimension must be at least 1");
        slots_.assign(config_.n * dim_, 0.0);
    }

    const WindowConfig& config() const noexcept { return config_; }
    std::size_t dim() const noexcept { return dim_; }

    /// Number of observation slots; constant for the lifetime of the buffer.
    std::size_t capacity() const noexcept { return slots_.size() / dim_; }
    std::size_t size() const noexcept { return std::min(total_seen_, config_.n); }
    std::size_t total_seen() const noexcept { return total_seen_; }
    bool full() const noexcept { return total_seen_ >= config_.n; }

    /// Append one chunk of exactly nu observations, evicting the oldest when
    /// full. Returns whether the window is full afterwards.
    bool push_chunk(std::span<const Observation> chunk)
    {
        if (chunk.size() != config_.nu)
            throw UsageError("chunk has " + std::to_string(chunk.size()) +
                             " observations, expected " + std::to_string(config_.nu));
        for (const auto& obs : chunk) {
            if (obs.size() != dim_)
                throw DataError("observation dimension " + std::to_string(obs.size()) +
                                " does not match window dimension " + std::to_string(dim_));
            for (double v : obs)
                if (!std::isfinite(v))
                    throw DataError("non-finite observation value");
        }
        for (const auto& obs : chunk) {
            std::copy(obs.begin(), obs.end(), slots_.begin() + head_ * dim_);
            head_ = (head_ + 1) % config_.n;
            ++total_seen_;
        }
        return full();
    }

    /// Same as push_chunk, for a chunk of scalar observations (d must be 1).
    bool push_scalar_chunk(std::span<const double> chunk)
    {
        if (dim_ != 1)
            throw UsageError("scalar push into a window of dimension " + std::to_string(dim_));
        if (chunk.size() != config_.nu)
            throw UsageError("chunk has " + std::to_string(chunk.size()) +
                             " observations, expected " + std::to_string(config_.nu));
        for (double v : chunk)
            if (!std::isfinite(v))
                throw DataError("non-finite observation value");
        for (double v : chunk) {
            slots_[head_] = v;
            head_ = (head_ + 1) % config_.n;
            ++total_seen_;
        }
        return full();
    }

    /// Stored observations, oldest first.
    std::vector<Observation> snapshot() const
    {
        std::vector<Observation> out;
        out.reserve(size());
        for_each_in_order([&](const double* row) { out.emplace_back(row, row + dim_); });
        return out;
    }

    /// Coordinate k of every stored observation, oldest first. Reuses `out`.
    void copy_column(std::size_t k, std::vector<double>& out) const
    {
        if (k >= dim_)
            throw UsageError("column index out of range");
        out.clear();
        for_each_in_order([&](const double* row) { out.push_back(row[k]); });
    }

    std::vector<double> column(std::size_t k) const
    {
        std::vector<double> out;
        out.reserve(size());
        copy_column(k, out);
        return out;
    }

private:
    template <typename F>
    void for_each_in_order(F&& f) const
    {
        const std::size_t count = size();
        const std::size_t start = full() ? head_ : 0;
        for (std::size_t i = 0; i < count; ++i)
            f(&slots_[((start + i) % config_.n) * dim_]);
    }

    WindowConfig config_;
    std::size_t dim_;
    std::vector<double> slots_;
    std::size_t head_ = 0; // next slot to write
    std::size_t total_seen_ = 0;
};

} // namespace caest
