#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "caest/ca_engine.hpp"
#include "caest/rng.hpp"
#include "caest/stats.hpp"
#include "oracles.hpp"

using namespace caest;

namespace {

/// Build a state directly from its checkpoint form.
CaState state_from_text(const std::string& text)
{
    std::istringstream is(text);
    return CaState::deserialize(is);
}

std::vector<std::vector<double>> random_stream(Rng& rng, std::size_t t, std::size_t p, double scale = 1.0)
{
    std::vector<std::vector<double>> out(t, std::vector<double>(p));
    for (auto& e : out)
        for (auto& v : e)
            v = scale * rng.normal() + 0.5;
    return out;
}

/// Theta_u = e_u + 0.6 e_{u-1} + 0.3 e_{u-2}: genuine lag-1 and lag-2 structure.
std::vector<std::vector<double>> ma2_stream(Rng& rng, std::size_t t)
{
    std::vector<double> e(t + 2);
    for (auto& v : e)
        v = rng.normal();
    std::vector<std::vector<double>> out(t);
    for (std::size_t u = 0; u < t; ++u)
        out[u] = {e[u + 2] + 0.6 * e[u + 1] + 0.3 * e[u]};
    return out;
}

} // namespace

TEST(CaUpdate, FirstEstimate)
{
    CaState s(2, 3);
    ASSERT_TRUE(s.step(std::vector<double>{1.0, 5.0}));
    EXPECT_EQ(s.count(), 1u);
    EXPECT_EQ(s.mean(), (std::vector<double>{1.0, 5.0}));
    for (std::size_t j = 0; j <= 3; ++j)
        for (double v : s.lag_cov(j).data)
            EXPECT_EQ(v, 0.0);
}

TEST(CaUpdate, TwoPointMean)
{
    CaState s(2, 0);
    s.step(std::vector<double>{1.0, 1.0});
    s.step(std::vector<double>{3.0, 3.0});
    EXPECT_EQ(s.count(), 2u);
    EXPECT_EQ(s.mean(), (std::vector<double>{2.0, 2.0}));
    EXPECT_EQ(s.previous_mean(), (std::vector<double>{1.0, 1.0}));
}

TEST(CaUpdate, MatchesBatchMean)
{
    Rng rng(1);
    const auto stream = random_stream(rng, 50, 2, 4.0);
    CaState s(2, 2);
    for (const auto& e : stream)
        s.step(e);
    const auto m = oracle::batch_mean(stream);
    for (std::size_t k = 0; k < 2; ++k)
        EXPECT_NEAR(s.mean()[k], m[k], 1e-12 * std::max(1.0, std::fabs(m[k])));
}

TEST(CaUpdate, DimensionMismatch)
{
    CaState s(2, 1);
    EXPECT_THROW(s.step(std::vector<double>{1.0}), UsageError);
    EXPECT_EQ(s.count(), 0u);
}

TEST(CaUpdate, NonFiniteEstimateIsSkipped)
{
    CaState s(2, 2);
    s.step(std::vector<double>{1.0, 2.0});
    s.step(std::vector<double>{2.0, 0.5});
    CaState before = s;
    EXPECT_FALSE(s.step(std::vector<double>{std::numeric_limits<double>::quiet_NaN(), 1.0}));
    EXPECT_FALSE(s.step(std::vector<double>{0.0, std::numeric_limits<double>::infinity()}));
    EXPECT_EQ(s.skipped(), 2u);
    EXPECT_EQ(s.count(), before.count());
    EXPECT_EQ(s.mean(), before.mean());
    EXPECT_EQ(s.previous_mean(), before.previous_mean());
    for (std::size_t j = 0; j <= 2; ++j)
        EXPECT_EQ(s.lag_cov(j), before.lag_cov(j));
    for (std::size_t j = 0; j < s.recent_size(); ++j)
        EXPECT_TRUE(std::ranges::equal(s.recent(j), before.recent(j)));
}

TEST(CaUpdate, RecentRingNewestFirst)
{
    CaState s(1, 2);
    for (double v : {1.0, 2.0, 3.0, 4.0, 5.0}) {
        s.step(std::vector<double>{v});
        EXPECT_EQ(s.recent(0)[0], v);
    }
    EXPECT_EQ(s.recent_size(), 3u);
    EXPECT_EQ(s.recent(1)[0], 4.0);
    EXPECT_EQ(s.recent(2)[0], 3.0);
    EXPECT_THROW(s.recent(3), UsageError);
    EXPECT_EQ(s.recent_capacity(), 3u);
    EXPECT_EQ(s.lag_cov_count(), 3u);
}

TEST(LagCovUpdate, WelfordSequence)
{
    // Population variances of {1}, {1,2}, {1,2,3}.
    CaState s(1, 0);
    const double expected[] = {0.0, 0.25, 2.0 / 3.0};
    for (int i = 0; i < 3; ++i) {
        s.step(std::vector<double>{double(i + 1)});
        EXPECT_NEAR(s.lag_cov(0)(0, 0), expected[i], 1e-15);
    }
}

TEST(LagCovUpdate, ConstantStreamGivesZero)
{
    CaState s(2, 4);
    for (int i = 0; i < 30; ++i)
        s.step(std::vector<double>{1.25, -3.0});
    for (std::size_t j = 0; j <= 4; ++j)
        for (double v : s.lag_cov(j).data)
            EXPECT_EQ(v, 0.0);
}

TEST(LagCovUpdate, IndependentStreamHasVanishingLagOne)
{
    Rng rng(7);
    const std::size_t t = 10000;
    CaState s(1, 1);
    for (std::size_t u = 0; u < t; ++u)
        s.step(std::vector<double>{rng.normal()});
    // Lag-1 autocovariance of iid unit-variance data has SE about 1/sqrt(t).
    EXPECT_LE(std::fabs(s.lag_cov(1)(0, 0)), 3.0 / std::sqrt(double(t)));
}

TEST(LagCovUpdate, SequencingContract)
{
    CaState s(1, 1);
    EXPECT_THROW(s.update_lag_covariances(), ContractError);
    ASSERT_TRUE(s.update_mean(std::vector<double>{1.0}));
    EXPECT_THROW(s.update_mean(std::vector<double>{2.0}), ContractError);
    std::ostringstream os;
    EXPECT_THROW(s.serialize(os), ContractError);
    s.update_lag_covariances();
    EXPECT_THROW(s.update_lag_covariances(), ContractError);
}

TEST(Step, ComposesTheTwoUpdates)
{
    Rng rng(9);
    const auto stream = random_stream(rng, 100, 3);
    CaState composed(3, 4), manual(3, 4);
    for (const auto& e : stream) {
        composed.step(e);
        ASSERT_TRUE(manual.update_mean(e));
        manual.update_lag_covariances();
    }
    EXPECT_EQ(composed, manual);
}

TEST(Step, Lag0MatchesBatchAtEveryT)
{
    Rng rng(10);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t p = 1 + rng() % 3;
        const auto stream = random_stream(rng, 120, p, 2.0);
        CaState s(p, 2);
        for (std::size_t u = 0; u < stream.size(); ++u) {
            s.step(stream[u]);
            const std::vector<std::vector<double>> prefix(stream.begin(), stream.begin() + u + 1);
            const auto v0 = batch_lag_cov_oracle(prefix, 0);
            const double scale = std::max(oracle::max_abs(v0.data), 1e-300);
            for (std::size_t i = 0; i < p * p; ++i)
                ASSERT_NEAR(s.lag_cov(0).data[i], v0.data[i], 1e-9 * scale);
        }
    }
}

TEST(Step, LagCovariancesConvergeToBatch)
{
    // Both the online recursion and the batch lag-j covariance are estimates
    // of the same quantity; their O(1/t) difference must be small against the
    // Monte Carlo spread of the batch estimate itself.
    const std::size_t t = 10000, order = 3;
    const int reps = 40;
    std::vector<std::vector<double>> batch_vals(order + 1), diffs(order + 1);
    for (int r = 0; r < reps; ++r) {
        Rng rng = Rng::for_stream(123, r);
        const auto stream = ma2_stream(rng, t);
        CaState s(1, order);
        for (const auto& e : stream)
            s.step(e);
        for (std::size_t j = 0; j <= order; ++j) {
            const double b = batch_lag_cov_oracle(stream, j)(0, 0);
            batch_vals[j].push_back(b);
            diffs[j].push_back(s.lag_cov(j)(0, 0) - b);
        }
    }
    for (std::size_t j = 1; j <= order; ++j) {
        double mean = 0.0, ss = 0.0;
        for (double v : batch_vals[j])
            mean += v / reps;
        for (double v : batch_vals[j])
            ss += (v - mean) * (v - mean);
        const double se = std::sqrt(ss / (reps - 1));
        for (double d : diffs[j])
            EXPECT_LE(std::fabs(d), 5.0 * se) << "lag " << j;
    }
}

TEST(Step, LagCovarianceDependsOnOrder)
{
    Rng rng(12);
    const auto stream = ma2_stream(rng, 2000);
    auto shuffled = stream;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CaState a(1, 1), b(1, 1);
    for (std::size_t u = 0; u < stream.size(); ++u) {
        a.step(stream[u]);
        b.step(shuffled[u]);
    }
    // Population lag-1 autocovariance is 0.6 + 0.18 = 0.78.
    EXPECT_NEAR(a.lag_cov(1)(0, 0), 0.78, 0.15);
    EXPECT_NEAR(b.lag_cov(1)(0, 0), 0.0, 0.15);
    EXPECT_NEAR(a.lag_cov(0)(0, 0), b.lag_cov(0)(0, 0), 1e-9);
}

TEST(Step, Lag0IsPositiveSemidefinite)
{
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const auto stream = random_stream(rng, 2 + rng() % 40, 3);
        CaState s(3, 1);
        for (const auto& e : stream)
            s.step(e);
        const auto& v = s.lag_cov(0);
        // Leading principal minors of a PSD matrix are >= 0 (up to rounding).
        const double m1 = v(0, 0);
        const double m2 = v(0, 0) * v(1, 1) - v(0, 1) * v(1, 0);
        const double m3 = v(0, 0) * (v(1, 1) * v(2, 2) - v(1, 2) * v(2, 1)) -
                          v(0, 1) * (v(1, 0) * v(2, 2) - v(1, 2) * v(2, 0)) +
                          v(0, 2) * (v(1, 0) * v(2, 1) - v(1, 1) * v(2, 0));
        EXPECT_GE(m1, 0.0);
        EXPECT_GE(m2, -1e-12);
        EXPECT_GE(m3, -1e-12);
    }
}

TEST(AssembleCovariance, NoLagsIsLagZero)
{
    Rng rng(14);
    CaState s(2, 0);
    for (const auto& e : random_stream(rng, 20, 2))
        s.step(e);
    const auto v = s.assemble_covariance();
    EXPECT_EQ(v.matrix.data[0], s.lag_cov(0).data[0]);
    EXPECT_EQ(v.matrix.data[3], s.lag_cov(0).data[3]);
    EXPECT_NEAR(v.matrix(0, 1), s.lag_cov(0)(0, 1), 1e-15);
}

TEST(AssembleCovariance, ScalarSum)
{
    const auto s = state_from_text("caest_state 1\np 1\nM 1\nt 5\nskipped 0\nca_mean 0\n"
                                   "prev_ca_mean 0\nrecent 1 2\nlag_cov_0 2\nlag_cov_1 0.5\n");
    EXPECT_DOUBLE_EQ(s.assemble_covariance().matrix(0, 0), 3.0);
}

TEST(AssembleCovariance, NegativeDiagonalIsFlooredAndFlagged)
{
    const auto s = state_from_text("caest_state 1\np 2\nM 1\nt 5\nskipped 0\nca_mean 0 0\n"
                                   "prev_ca_mean 0 0\nrecent 1 2 3 4\n"
                                   "lag_cov_0 1 0.1 0.1 1\nlag_cov_1 -2 0.3 0 0.2\n");
    const auto v = s.assemble_covariance();
    EXPECT_EQ(v.matrix(0, 0), 0.0);
    EXPECT_TRUE(v.diag_floored[0]);
    EXPECT_FALSE(v.diag_floored[1]);
    EXPECT_DOUBLE_EQ(v.matrix(1, 1), 1.4);
    EXPECT_DOUBLE_EQ(v.matrix(0, 1), 0.4);
    EXPECT_EQ(s.confidence_interval(0.95).half_width[0], 0.0);
}

TEST(AssembleCovariance, IndependentStreamLagTermsVanish)
{
    Rng rng(15);
    CaState s(1, 4);
    for (std::size_t u = 0; u < 10000; ++u)
        s.step(std::vector<double>{rng.normal()});
    const double v = s.assemble_covariance().matrix(0, 0);
    EXPECT_NEAR(v, s.lag_cov(0)(0, 0), 0.1 * s.lag_cov(0)(0, 0));
}

TEST(AssembleCovariance, ExactlySymmetric)
{
    Rng rng(16);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t p = 1 + rng() % 4;
        CaState s(p, rng() % 5);
        for (const auto& e : random_stream(rng, 3 + rng() % 50, p))
            s.step(e);
        const auto v = s.assemble_covariance();
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < p; ++b)
                EXPECT_EQ(v.matrix(a, b), v.matrix(b, a));
    }
}

TEST(AssembleCovariance, NeedsAnEstimate)
{
    CaState s(1, 0);
    EXPECT_THROW(s.assemble_covariance(), InsufficientDataError);
}

TEST(ConfidenceInterval, KnownHalfWidth)
{
    const auto s = state_from_text("caest_state 1\np 1\nM 0\nt 100\nskipped 0\nca_mean 3\n"
                                   "prev_ca_mean 3\nrecent 3\nlag_cov_0 4\n");
    const auto ci = s.confidence_interval(0.95);
    EXPECT_NEAR(ci.half_width[0], 0.3919928, 1e-7);
    EXPECT_EQ(ci.center[0], 3.0);
    EXPECT_NEAR(ci.lower(0), 3.0 - 0.3919928, 1e-7);
}

TEST(ConfidenceInterval, ConstantStreamHasZeroWidth)
{
    CaState s(2, 2);
    for (int i = 0; i < 10; ++i)
        s.step(std::vector<double>{1.0, 2.0});
    const auto ci = s.confidence_interval(0.95);
    EXPECT_EQ(ci.half_width, (std::vector<double>{0.0, 0.0}));
}

TEST(ConfidenceInterval, Errors)
{
    CaState s(1, 0);
    s.step(std::vector<double>{1.0});
    EXPECT_THROW(s.confidence_interval(0.95), InsufficientDataError);
    s.step(std::vector<double>{2.0});
    EXPECT_THROW(s.confidence_interval(1.0), UsageError);
    EXPECT_THROW(s.confidence_interval(0.0), UsageError);
}

TEST(ConfidenceInterval, WidensWithLevel)
{
    Rng rng(17);
    CaState s(2, 1);
    for (const auto& e : random_stream(rng, 40, 2))
        s.step(e);
    double prev0 = -1.0, prev1 = -1.0;
    for (double level = 0.05; level < 0.999; level += 0.05) {
        const auto ci = s.confidence_interval(level);
        EXPECT_GT(ci.half_width[0], prev0);
        EXPECT_GT(ci.half_width[1], prev1);
        prev0 = ci.half_width[0];
        prev1 = ci.half_width[1];
    }
}

TEST(Serialization, RoundTripIsExact)
{
    Rng rng(18);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t p = 1 + rng() % 3, order = rng() % 5;
        CaState s(p, order);
        for (const auto& e : random_stream(rng, rng() % 12, p, 1e3))
            s.step(e);
        std::ostringstream os;
        s.serialize(os);
        std::istringstream is(os.str());
        CaState back = CaState::deserialize(is);
        EXPECT_EQ(back, s);

        // Both continue identically.
        for (const auto& e : random_stream(rng, 7, p)) {
            s.step(e);
            back.step(e);
        }
        EXPECT_EQ(back, s);
        std::ostringstream os2, os3;
        s.serialize(os2);
        back.serialize(os3);
        EXPECT_EQ(os2.str(), os3.str());
    }
}

TEST(Serialization, RejectsMalformedInput)
{
    EXPECT_THROW(state_from_text("caest_state 2\n"), DataError);
    EXPECT_THROW(state_from_text("caest_state 1\np 1\nM 0\nt 1\nskipped 0\nca_mean 1 2\n"), DataError);
    EXPECT_THROW(state_from_text("caest_state 1\np 1\nM 0\n"), DataError);
}
