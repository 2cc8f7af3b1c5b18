#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "caest/ca_engine.hpp"
#include "caest/error.hpp"
#include "caest/estimators.hpp"
#include "caest/normal.hpp"
#include "caest/rng.hpp"
#include "caest/simulation.hpp"
#include "caest/stats.hpp"
#include "caest/window.hpp"

namespace caest {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// One output row per produced chunk estimate.
struct TraceRow {
    std::size_t t = 0;           // number of chunk estimates absorbed
    std::size_t chunks_seen = 0; // raw chunks pushed; batch estimates use nu * chunks_seen points
    std::vector<double> ca_est, ca_lo, ca_hi;
    std::vector<double> batch_est, batch_lo, batch_hi;
};

struct ReplicationTrace {
    std::size_t rep = 0;
    std::size_t windows = 0;  // full windows presented to the chunk estimator
    std::size_t failures = 0; // chunk estimates that could not be computed
    std::vector<TraceRow> rows;

    bool degenerate() const { return windows > 0 && failures * 10 > windows; }
};

struct SummaryRow {
    std::size_t t = 0;
    std::size_t param = 0;
    double ca_mean = kNaN, ca_pi_lo = kNaN, ca_pi_hi = kNaN;
    double batch_mean = kNaN, batch_pi_lo = kNaN, batch_pi_hi = kNaN;
};

struct NormalityRow {
    std::size_t param = 0;
    double w = kNaN;
    double p_value = kNaN;
};

/// Storage counters observed after every chunk, for memory-bound checks.
struct StepProbe {
    std::size_t rep = 0;
    std::size_t chunks_seen = 0;
    std::size_t window_slots = 0;
    std::size_t estimate_slots = 0;
    std::size_t covariance_buffers = 0;
    std::size_t dependence_order = 0;
};

struct RunOptions {
    bool batch = true;  // compute the batch comparator at every t
    unsigned threads = 1;
    double level = 0.95;
    std::function<void(const StepProbe&)> probe; // called from worker threads
};

struct StudyResult {
    StudyConfig config;
    std::vector<std::string> param_names;
    std::vector<ReplicationTrace> traces;
    std::vector<SummaryRow> summary;
    std::vector<NormalityRow> normality;

    bool degenerate() const
    {
        return std::any_of(traces.begin(), traces.end(),
                           [](const ReplicationTrace& r) { return r.degenerate(); });
    }
};

// ---------------------------------------------------------------------------
// Batch comparators: the same estimator on every observation seen so far,
// with its textbook asymptotic interval.

struct BatchEstimate {
    std::vector<double> est;
    std::vector<double> half_width;
};

/// OLS with the classical covariance sigma2_hat (X'X)^-1, sigma2_hat = RSS / (N - 2).
inline BatchEstimate batch_ols(std::span<const double> x, std::span<const double> y, double z)
{
    const auto beta = ols_fit(x, y);
    const std::size_t n = x.size();
    double mx = 0.0;
    for (double v : x)
        mx += v;
    mx /= static_cast<double>(n);
    double sxx = 0.0, rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        const double r = y[i] - beta[0] - beta[1] * x[i];
        rss += r * r;
    }
    const double s2 = n > 2 ? rss / static_cast<double>(n - 2) : kNaN;
    const double var1 = s2 * (1.0 / static_cast<double>(n) + mx * mx / sxx);
    const double var2 = s2 / sxx;
    return {beta, {z * std::sqrt(var1), z * std::sqrt(var2)}};
}

/**
 * Median and half-variance on the full sample.
 * Median: Var = 1 / (4 f(med)^2 N) with the Laplace plug-in
 * f(med) = 1 / (2 b), b = mean absolute deviation from the median.
 * Half-variance: Var(S^2 / 2) = (m4 - m2^2) / (4 N) from sample central moments.
 */
inline BatchEstimate batch_median_half_variance(std::span<const double> values, double z)
{
    const auto est = median_and_half_variance(values);
    const double n = static_cast<double>(values.size());
    double mad = 0.0, mean = 0.0;
    for (double v : values) {
        mad += std::fabs(v - est[0]);
        mean += v;
    }
    mad /= n;
    mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double v : values) {
        const double d2 = (v - mean) * (v - mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    const double density = 1.0 / (2.0 * mad);
    const double var_med = 1.0 / (4.0 * density * density * n);
    const double var_half = std::max(m4 - m2 * m2, 0.0) / (4.0 * n);
    return {est, {z * std::sqrt(var_med), z * std::sqrt(var_half)}};
}

/**
 * Asymptotic covariance of (rho1, rho2) from the inverse observed
 * information of the concentrated log-likelihood, by central differences.
 * Returns NaN widths when the numerical Hessian is not negative definite.
 */
inline std::vector<double> ma1_observed_info_half_widths(std::span<const double> series,
                                                         const Ma1Fit& fit, double z)
{
    const double h1 = 1e-3 * std::sqrt(std::max(fit.sigma2, 1e-12));
    const double room = (1.0 - std::fabs(fit.rho2)) * 0.5;
    const double h2 = std::min(1e-3, room);
    const auto f = [&](double a, double b) { return ma1_concentrated_loglik(series, a, b); };
    const double f0 = f(fit.rho1, fit.rho2);
    const double faa = (f(fit.rho1 + h1, fit.rho2) - 2.0 * f0 + f(fit.rho1 - h1, fit.rho2)) / (h1 * h1);
    const double fbb = (f(fit.rho1, fit.rho2 + h2) - 2.0 * f0 + f(fit.rho1, fit.rho2 - h2)) / (h2 * h2);
    const double fab = (f(fit.rho1 + h1, fit.rho2 + h2) - f(fit.rho1 + h1, fit.rho2 - h2) -
                        f(fit.rho1 - h1, fit.rho2 + h2) + f(fit.rho1 - h1, fit.rho2 - h2)) /
                       (4.0 * h1 * h2);
    // Information = -Hessian; invert the 2x2.
    const double ia = -faa, ib = -fbb, iab = -fab;
    const double det = ia * ib - iab * iab;
    if (!(ia > 0.0 && det > 0.0))
        return {kNaN, kNaN};
    return {z * std::sqrt(ib / det), z * std::sqrt(ia / det)};
}

namespace detail {

class BatchTracker {
public:
    BatchTracker(Study study, double z) : study_(study), z_(z) {}

    void add(const std::vector<Observation>& chunk)
    {
        for (const auto& o : chunk) {
            col0_.push_back(o[0]);
            if (study_ == Study::S1)
                col1_.push_back(o[1]);
        }
    }

    void add(std::span<const double> chunk) { col0_.insert(col0_.end(), chunk.begin(), chunk.end()); }

    BatchEstimate estimate()
    {
        switch (study_) {
        case Study::S1:
            return batch_ols(col0_, col1_, z_);
        case Study::S2:
            return batch_median_half_variance(col0_, z_);
        case Study::S3: {
            // Warm start from the previous fit; the optimum drifts slowly as
            // the series grows.
            const Ma1Fit fit = have_fit_ ? ma1_mle_fit_near(col0_, last_.rho2, 0.1) : ma1_mle_fit(col0_);
            last_ = fit;
            have_fit_ = true;
            return {{fit.rho1, fit.rho2}, ma1_observed_info_half_widths(col0_, fit, z_)};
        }
        }
        throw std::logic_error("unknown study");
    }

private:
    Study study_;
    double z_;
    std::vector<double> col0_, col1_;
    Ma1Fit last_;
    bool have_fit_ = false;
};

} // namespace detail

/// Chunk estimator for the study applied to the current window contents.
inline ChunkEstimate estimate_window(Study study, const WindowBuffer& window,
                                     std::vector<double>& col0, std::vector<double>& col1)
{
    window.copy_column(0, col0);
    switch (study) {
    case Study::S1:
        window.copy_column(1, col1);
        return ols_fit(col0, col1);
    case Study::S2:
        return median_and_half_variance(col0);
    case Study::S3:
        return ma1_mle(col0);
    }
    throw std::logic_error("unknown study");
}

/**
 * One replication: generate nu * T observations chunk by chunk from the
 * replication's own sub-stream, keep the last n in the window, estimate on
 * every full window and feed the CA state.
 *
 * Draw order per chunk: S1 draws (X, E) pairs, S2 one uniform per point,
 * S3 draws its burn-in innovation once before the first chunk.
 */
inline ReplicationTrace run_replication(const StudyConfig& config, std::size_t rep, const RunOptions& opts)
{
    const std::size_t order = compute_dependence_order(config.window());
    const double z = normal_quantile(0.5 * (1.0 + opts.level));
    Rng rng = Rng::for_stream(config.seed, rep);

    WindowBuffer window(config.window(), config.dim());
    CaState state(2, order);
    detail::BatchTracker batch(config.study, z);

    RegressionGenerator reg(config.params[0], config.params[1]);
    std::optional<LaplaceGenerator> lap;
    std::optional<Ma1Generator> ma;
    if (config.study == Study::S2)
        lap.emplace(config.params[0], config.params[1]);
    if (config.study == Study::S3)
        ma.emplace(config.params[0], config.params[1], rng);

    ReplicationTrace trace;
    trace.rep = rep;
    trace.rows.reserve(config.T);

    std::vector<Observation> chunk2;
    std::vector<double> chunk1(config.nu);
    std::vector<double> col0, col1;

    for (std::size_t c = 1; c <= config.T; ++c) {
        bool full;
        if (config.study == Study::S1) {
            chunk2.clear();
            for (std::size_t i = 0; i < config.nu; ++i)
                chunk2.push_back(reg.next(rng));
            full = window.push_chunk(chunk2);
            if (opts.batch)
                batch.add(chunk2);
        } else {
            for (auto& v : chunk1)
                v = lap ? lap->next(rng) : ma->next(rng);
            full = window.push_scalar_chunk(chunk1);
            if (opts.batch)
                batch.add(std::span<const double>(chunk1));
        }

        if (full) {
            ++trace.windows;
            bool accepted = false;
            try {
                accepted = state.step(estimate_window(config.study, window, col0, col1));
            } catch (const EstimationError&) {
            }
            if (!accepted) {
                ++trace.failures;
            } else {
                TraceRow row;
                row.t = state.count();
                row.chunks_seen = c;
                row.ca_est = state.mean();
                if (state.count() >= 2) {
                    const auto ci = state.confidence_interval(opts.level);
                    row.ca_lo = {ci.lower(0), ci.lower(1)};
                    row.ca_hi = {ci.upper(0), ci.upper(1)};
                } else {
                    row.ca_lo = row.ca_hi = {kNaN, kNaN};
                }
                if (opts.batch) {
                    BatchEstimate b;
                    try {
                        b = batch.estimate();
                    } catch (const EstimationError&) {
                        b = {{kNaN, kNaN}, {kNaN, kNaN}};
                    }
                    row.batch_est = b.est;
                    row.batch_lo = {b.est[0] - b.half_width[0], b.est[1] - b.half_width[1]};
                    row.batch_hi = {b.est[0] + b.half_width[0], b.est[1] + b.half_width[1]};
                } else {
                    row.batch_est = row.batch_lo = row.batch_hi = {kNaN, kNaN};
                }
                trace.rows.push_back(std::move(row));
            }
        }

        // The online core may hold n observations, M + 1 estimates and
        // M + 1 covariance matrices; nothing may grow with the stream.
        if (window.capacity() != config.n || state.recent_capacity() != order + 1 ||
            state.lag_cov_count() != order + 1 || window.size() > config.n)
            throw std::logic_error("online storage exceeded its fixed budget");
        if (opts.probe)
            opts.probe({rep, c, window.capacity(), state.recent_capacity(), state.lag_cov_count(), order});
    }
    return trace;
}

namespace detail {

inline void summarize_column(std::vector<double>& values, double level, double& mean, double& lo, double& hi)
{
    std::erase_if(values, [](double v) { return !std::isfinite(v); });
    if (values.empty())
        return;
    double s = 0.0;
    for (double v : values)
        s += v;
    mean = s / static_cast<double>(values.size());
    if (values.size() == 1) {
        lo = hi = values[0];
    } else {
        std::tie(lo, hi) = percentile_interval(values, level);
    }
}

} // namespace detail

/// Per-t mean and percentile interval across replications, for CA and batch.
inline std::vector<SummaryRow> summarize(std::span<const ReplicationTrace> traces, double level)
{
    std::size_t max_t = 0;
    for (const auto& tr : traces)
        for (const auto& r : tr.rows)
            max_t = std::max(max_t, r.t);

    std::vector<SummaryRow> out;
    std::vector<std::vector<const TraceRow*>> by_t(max_t + 1);
    for (const auto& tr : traces)
        for (const auto& r : tr.rows)
            by_t[r.t].push_back(&r);

    std::vector<double> ca, bt;
    for (std::size_t t = 1; t <= max_t; ++t) {
        if (by_t[t].empty())
            continue;
        for (std::size_t k = 0; k < 2; ++k) {
            ca.clear();
            bt.clear();
            for (const TraceRow* r : by_t[t]) {
                ca.push_back(r->ca_est[k]);
                bt.push_back(r->batch_est[k]);
            }
            SummaryRow row;
            row.t = t;
            row.param = k;
            detail::summarize_column(ca, level, row.ca_mean, row.ca_pi_lo, row.ca_pi_hi);
            detail::summarize_column(bt, level, row.batch_mean, row.batch_pi_lo, row.batch_pi_hi);
            out.push_back(row);
        }
    }
    return out;
}

/// Shapiro-Wilk on each replication's final CA estimate, per parameter.
inline std::vector<NormalityRow> normality_at_end(std::span<const ReplicationTrace> traces)
{
    std::vector<NormalityRow> out;
    for (std::size_t k = 0; k < 2; ++k) {
        std::vector<double> finals;
        for (const auto& tr : traces)
            if (!tr.rows.empty())
                finals.push_back(tr.rows.back().ca_est[k]);
        NormalityRow row{k};
        if (finals.size() >= 3 && finals.size() <= 5000) {
            try {
                const auto sw = shapiro_wilk(finals);
                row.w = sw.w;
                row.p_value = sw.p_value;
            } catch (const DegenerateSampleError&) {
            }
        }
        out.push_back(row);
    }
    return out;
}

/**
 * Run `reps` independent replications. Replication r always uses
 * sub-stream (seed, r) and results are stored by index, so the output does
 * not depend on the thread count.
 */
inline StudyResult run_study(const StudyConfig& config, std::size_t reps, const RunOptions& opts = {})
{
    config.validate();
    if (reps < 1)
        throw UsageError("run_study: reps must be at least 1");

    StudyResult result;
    result.config = config;
    result.param_names = parameter_names(config.study);
    result.traces.resize(reps);

    const unsigned workers = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(reps)));
    if (workers == 1) {
        for (std::size_t r = 0; r < reps; ++r)
            result.traces[r] = run_replication(config, r, opts);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t r = next++; r < reps; r = next++) {
                    try {
                        result.traces[r] = run_replication(config, r, opts);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error)
                            error = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool)
            th.join();
        if (error)
            std::rethrow_exception(error);
    }

    result.summary = summarize(result.traces, opts.level);
    result.normality = normality_at_end(result.traces);
    return result;
}

// ---------------------------------------------------------------------------
// CSV output

/*
 * trace.csv      rep,t,chunks_seen,param,ca_est,ca_ci_lo,ca_ci_hi,batch_est,batch_ci_lo,batch_ci_hi
 * summary.csv    t,param,ca_mean,ca_pi_lo,ca_pi_hi,batch_mean,batch_pi_lo,batch_pi_hi
 * normality.csv  param,W,p_value
 *
 * Reals are written with %.17g; unavailable values (an interval at t = 1,
 * the batch columns when disabled) are written as `nan`.
 */
inline constexpr const char* kTraceHeader =
    "rep,t,chunks_seen,param,ca_est,ca_ci_lo,ca_ci_hi,batch_est,batch_ci_lo,batch_ci_hi";
inline constexpr const char* kSummaryHeader =
    "t,param,ca_mean,ca_pi_lo,ca_pi_hi,batch_mean,batch_pi_lo,batch_pi_hi";
inline constexpr const char* kNormalityHeader = "param,W,p_value";

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw IoError("cannot open " + path.string() + " for writing");
    return os;
}

inline void finish_output(std::ofstream& os, const std::filesystem::path& path)
{
    os.flush();
    if (!os)
        throw IoError("write failed for " + path.string());
}

} // namespace detail

inline void write_trace_csv(std::ostream& os, std::span<const ReplicationTrace> traces,
                            std::span<const std::string> names)
{
    using detail::format_g17;
    os << kTraceHeader << '\n';
    for (const auto& tr : traces)
        for (const auto& r : tr.rows)
            for (std::size_t k = 0; k < names.size(); ++k)
                os << tr.rep << ',' << r.t << ',' << r.chunks_seen << ',' << names[k] << ','
                   << format_g17(r.ca_est[k]) << ',' << format_g17(r.ca_lo[k]) << ','
                   << format_g17(r.ca_hi[k]) << ',' << format_g17(r.batch_est[k]) << ','
                   << format_g17(r.batch_lo[k]) << ',' << format_g17(r.batch_hi[k]) << '\n';
}

inline void write_summary_csv(std::ostream& os, std::span<const SummaryRow> rows,
                              std::span<const std::string> names)
{
    using detail::format_g17;
    os << kSummaryHeader << '\n';
    for (const auto& r : rows)
        os << r.t << ',' << names[r.param] << ',' << format_g17(r.ca_mean) << ','
           << format_g17(r.ca_pi_lo) << ',' << format_g17(r.ca_pi_hi) << ','
           << format_g17(r.batch_mean) << ',' << format_g17(r.batch_pi_lo) << ','
           << format_g17(r.batch_pi_hi) << '\n';
}

inline void write_normality_csv(std::ostream& os, std::span<const NormalityRow> rows,
                                std::span<const std::string> names)
{
    using detail::format_g17;
    os << kNormalityHeader << '\n';
    for (const auto& r : rows)
        os << names[r.param] << ',' << format_g17(r.w) << ',' << format_g17(r.p_value) << '\n';
}

/// Writes trace.csv, summary.csv and normality.csv into out_dir (created if missing).
inline void write_csv(std::span<const ReplicationTrace> traces, std::span<const SummaryRow> summary,
                      std::span<const NormalityRow> normality, std::span<const std::string> names,
                      const std::filesystem::path& out_dir)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw IoError("cannot create directory " + out_dir.string() + ": " + ec.message());

    const auto trace_path = out_dir / "trace.csv";
    auto trace = detail::open_output(trace_path);
    write_trace_csv(trace, traces, names);
    detail::finish_output(trace, trace_path);

    const auto summary_path = out_dir / "summary.csv";
    auto sum = detail::open_output(summary_path);
    write_summary_csv(sum, summary, names);
    detail::finish_output(sum, summary_path);

    const auto normality_path = out_dir / "normality.csv";
    auto norm = detail::open_output(normality_path);
    write_normality_csv(norm, normality, names);
    detail::finish_output(norm, normality_path);
}

inline void write_csv(const StudyResult& result, const std::filesystem::path& out_dir)
{
    write_csv(result.traces, result.summary, result.normality, result.param_names, out_dir);
}

/// Parses a summary.csv written by write_summary_csv. Parameter names are
/// mapped back to indices through `names`.
inline std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path,
                                                std::span<const std::string> names)
{
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line) || line != kSummaryHeader)
        throw DataError(path.string() + ": unexpected header");
    std::vector<SummaryRow> rows;
    while (std::getline(is, line)) {
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ','))
            f.push_back(cell);
        if (f.size() != 8)
            throw DataError(path.string() + ": malformed row '" + line + "'");
        SummaryRow r;
        r.t = std::stoul(f[0]);
        const auto it = std::find(names.begin(), names.end(), f[1]);
        if (it == names.end())
            throw DataError(path.string() + ": unknown parameter '" + f[1] + "'");
        r.param = static_cast<std::size_t>(it - names.begin());
        double* dst[] = {&r.ca_mean, &r.ca_pi_lo, &r.ca_pi_hi, &r.batch_mean, &r.batch_pi_lo, &r.batch_pi_hi};
        for (std::size_t i = 0; i < 6; ++i)
            *dst[i] = std::strtod(f[2 + i].c_str(), nullptr);
        rows.push_back(r);
    }
    return rows;
}

} // namespace caest
