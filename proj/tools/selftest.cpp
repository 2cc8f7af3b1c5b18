#include "selftest.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "caest/caest.hpp"
#include "oracles.hpp"

namespace caest::tools {
namespace {

struct Check {
    std::string name;
    std::function<std::string()> run; // empty string on success
};

std::string check_dependence_order()
{
    const std::size_t got[] = {compute_dependence_order({500, 100, 0}),
                               compute_dependence_order({200, 100, 0}),
                               compute_dependence_order({100, 100, 1})};
    if (got[0] != 4 || got[1] != 1 || got[2] != 1)
        return "got " + std::to_string(got[0]) + "," + std::to_string(got[1]) + "," +
               std::to_string(got[2]) + " expected 4,1,1";
    return {};
}

std::string check_window_ring()
{
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t nu = 1 + rng() % 7;
        const std::size_t n = nu + rng() % 20;
        WindowBuffer w({n, nu, 0}, 1);
        std::vector<double> stream;
        for (int k = 0; k < 30; ++k) {
            std::vector<double> chunk(nu);
            for (auto& v : chunk)
                v = rng.normal();
            stream.insert(stream.end(), chunk.begin(), chunk.end());
            w.push_scalar_chunk(chunk);
            if (w.full()) {
                std::vector<double> tail(stream.end() - static_cast<std::ptrdiff_t>(n), stream.end());
                if (w.column(0) != tail)
                    return "window differs from the last n stream values";
            }
            if (w.capacity() != n)
                return "window capacity changed";
        }
    }
    return {};
}

std::string check_welford()
{
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t p = 1 + rng() % 3;
        const std::size_t order = rng() % 5;
        const std::size_t t = 1 + rng() % 200;
        CaState state(p, order);
        std::vector<std::vector<double>> seq;
        double scale = 0.0;
        for (std::size_t u = 0; u < t; ++u) {
            std::vector<double> e(p);
            for (auto& v : e)
                v = 3.0 * rng.normal() + 1.0;
            scale = std::max(scale, oracle::max_abs(e));
            seq.push_back(e);
            state.step(e);
        }
        const auto mean = oracle::batch_mean(seq);
        for (std::size_t k = 0; k < p; ++k)
            if (std::fabs(state.mean()[k] - mean[k]) > 1e-12 * scale)
                return "running mean disagrees with batch mean";
        const auto v0 = batch_lag_cov_oracle(seq, 0);
        const double vscale = std::max(oracle::max_abs(v0.data), 1e-300);
        for (std::size_t i = 0; i < p * p; ++i)
            if (std::fabs(state.lag_cov(0).data[i] - v0.data[i]) > 1e-9 * vscale)
                return "lag-0 recursion disagrees with batch covariance";
    }
    return {};
}

std::string check_likelihood()
{
    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 7;
        std::vector<double> x(n);
        for (auto& v : x)
            v = 2.0 * rng.normal();
        const Ma1Params par{rng.normal(), 1.98 * rng.uniform() - 0.99, 0.1 + 3.0 * rng.uniform()};
        const double fast = ma1_loglik(x, par);
        const double dense = oracle::dense_ma1_logdensity(x, par.rho1, par.rho2, par.sigma2);
        if (std::fabs(fast - dense) > 1e-8)
            return "innovations likelihood differs from dense density by " + std::to_string(fast - dense);
    }
    return {};
}

std::string check_quantile()
{
    // 1.959963984540054 = Phi^-1(0.975) to double precision.
    if (std::fabs(normal_quantile(0.975) - 1.959963984540054) > 1e-12)
        return "Phi^-1(0.975) off";
    for (double p : {1e-10, 0.01, 0.3, 0.5, 0.8, 0.999, 1 - 1e-9})
        if (std::fabs(normal_cdf(normal_quantile(p)) - p) > 1e-12 * std::max(p, 1e-3))
            return "quantile does not invert the cdf at p=" + std::to_string(p);
    return {};
}

} // namespace

int run_selftest()
{
    const std::vector<Check> checks = {
        {"dependence order reproduces 4, 1, 1", check_dependence_order},
        {"window keeps the last n observations", check_window_ring},
        {"online mean and lag-0 covariance match batch", check_welford},
        {"MA(1) likelihood matches dense Gaussian density", check_likelihood},
        {"normal quantile", check_quantile},
    };
    int failed = 0;
    for (const auto& c : checks) {
        std::string msg;
        try {
            msg = c.run();
        } catch (const std::exception& e) {
            msg = std::string("exception: ") + e.what();
        }
        if (msg.empty()) {
            std::printf("PASS  %s\n", c.name.c_str());
        } else {
            std::printf("FAIL  %s: %s\n", c.name.c_str(), msg.c_str());
            ++failed;
        }
    }
    return failed == 0 ? 0 : 1;
}

} // namespace caest::tools
