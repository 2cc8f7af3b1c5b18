#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "caest/error.hpp"
#include "caest/rng.hpp"
#include "caest/window.hpp"

namespace caest {

/// Bivariate pairs with X ~ N(0, 1) and Y = b1 + b2 X + E, E ~ N(0, 1).
class RegressionGenerator {
public:
    RegressionGenerator(double beta1, double beta2) : beta1_(beta1), beta2_(beta2) {}

    Observation next(Rng& rng)
    {
        const double x = rng.normal();
        const double e = rng.normal();
        return {x, beta1_ + beta2_ * x + e};
    }

private:
    double beta1_, beta2_;
};

/// Laplace(location, scale) by inverse CDF.
class LaplaceGenerator {
public:
    LaplaceGenerator(double location, double scale) : location_(location), scale_(scale)
    {
        if (!(scale > 0.0))
            throw ConfigError("Laplace scale must be positive");
    }

    double quantile(double u) const
    {
        const double c = u - 0.5;
        const double sign = c > 0.0 ? 1.0 : (c < 0.0 ? -1.0 : 0.0);
        return location_ - scale_ * sign * std::log(1.0 - 2.0 * std::fabs(c));
    }

    double next(Rng& rng) { return quantile(rng.uniform()); }

private:
    double location_, scale_;
};

/// X_i = rho1 + E_i + rho2 E_{i-1} with standard-normal E. The constructor
/// draws E_0 so the first output is already stationary.
class Ma1Generator {
public:
    Ma1Generator(double rho1, double rho2, Rng& rng)
        : rho1_(rho1), rho2_(rho2), prev_(rng.normal())
    {
    }

    double next(Rng& rng)
    {
        const double e = rng.normal();
        const double x = rho1_ + e + rho2_ * prev_;
        prev_ = e;
        return x;
    }

private:
    double rho1_, rho2_;
    double prev_;
};

inline std::vector<Observation> gen_regression(std::size_t count, double beta1, double beta2, Rng& rng)
{
    if (count < 1)
        throw UsageError("gen_regression: count must be positive");
    RegressionGenerator gen(beta1, beta2);
    std::vector<Observation> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(gen.next(rng));
    return out;
}

inline std::vector<double> gen_laplace(std::size_t count, double location, double scale, Rng& rng)
{
    LaplaceGenerator gen(location, scale);
    std::vector<double> out(count);
    for (auto& v : out)
        v = gen.next(rng);
    return out;
}

inline std::vector<double> gen_ma1(std::size_t count, double rho1, double rho2, Rng& rng)
{
    if (count < 1)
        throw UsageError("gen_ma1: count must be positive");
    Ma1Generator gen(rho1, rho2, rng);
    std::vector<double> out(count);
    for (auto& v : out)
        v = gen.next(rng);
    return out;
}

// ---------------------------------------------------------------------------
// Study configuration

enum class Study { S1, S2, S3 };

inline std::string_view study_name(Study s)
{
    switch (s) {
    case Study::S1: return "s1";
    case Study::S2: return "s2";
    case Study::S3: return "s3";
    }
    return "?";
}

inline std::optional<Study> parse_study(std::string_view name)
{
    if (name == "s1" || name == "S1") return Study::S1;
    if (name == "s2" || name == "S2") return Study::S2;
    if (name == "s3" || name == "S3") return Study::S3;
    return std::nullopt;
}

/// Names of the two estimated parameters, in estimate order.
inline std::vector<std::string> parameter_names(Study s)
{
    switch (s) {
    case Study::S1: return {"beta1", "beta2"};
    case Study::S2: return {"lambda1", "lambda2_sq"};
    case Study::S3: return {"rho1", "rho2"};
    }
    return {};
}

/**
 * One simulation study.
 *
 *   S1: regression, (beta1, beta2) = (0, 2),  n = 500, m = 0
 *   S2: Laplace,    (lambda1, lambda2) = (-1, 1), n = 200, m = 0
 *   S3: MA(1),      (rho1, rho2) = (0, 0.5),  n = 100, m = 1
 *
 * All studies use nu = 100 and T = 100. `params` holds the generator
 * parameters; the estimand for S2 is (lambda1, lambda2^2).
 */
struct StudyConfig {
    Study study = Study::S1;
    std::size_t nu = 100;
    std::size_t T = 100;
    std::size_t n = 500;
    std::size_t m = 0;
    std::uint64_t seed = 20180101;
    double params[2] = {0.0, 2.0};

    static StudyConfig defaults(Study s)
    {
        StudyConfig c;
        c.study = s;
        switch (s) {
        case Study::S1:
            c.n = 500;
            c.m = 0;
            c.params[0] = 0.0;
            c.params[1] = 2.0;
            break;
        case Study::S2:
            c.n = 200;
            c.m = 0;
            c.params[0] = -1.0;
            c.params[1] = 1.0;
            break;
        case Study::S3:
            c.n = 100;
            c.m = 1;
            c.params[0] = 0.0;
            c.params[1] = 0.5;
            break;
        }
        return c;
    }

    WindowConfig window() const { return {n, nu, m}; }
    std::size_t dim() const { return study == Study::S1 ? 2 : 1; }

    /// The parameter the chunk estimators target.
    std::vector<double> truth() const
    {
        if (study == Study::S2)
            return {params[0], params[1] * params[1]};
        return {params[0], params[1]};
    }

    void validate() const
    {
        window().validate();
        if (T < 1)
            throw ConfigError("T must be at least 1");
        if (study == Study::S1 && n < 2)
            throw ConfigError("S1 needs a window of at least 2 points");
        if (study == Study::S2 && (n < 2 || !(params[1] > 0.0)))
            throw ConfigError("S2 needs n >= 2 and a positive scale");
        if (study == Study::S3 && n < 10)
            throw ConfigError("S3 needs a window of at least 10 points");
    }
};

} // namespace caest
