#include "tbdtrack/gospa.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace tbdtrack;

namespace {

/// Brute-force GOSPA straight from the definition: minimum over all partial
/// matchings (assignment subsets) of sum d^p plus c^p/alpha per unmatched
/// point on either side. Independent of the assignment-solver route.
double brute_force_gospa(const std::vector<Point2d>& truth, const std::vector<Point2d>& est,
                         const GospaConfig& cfg) {
    const std::size_t n = truth.size(), m = est.size();
    const double penalty = std::pow(cfg.c, cfg.p) / cfg.alpha;
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> match(n, -1);
    std::vector<char> used(m, 0);

    auto evaluate = [&]() {
        double cost = 0.0;
        std::size_t matched = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (match[i] >= 0) {
                const auto& t = truth[i];
                const auto& e = est[static_cast<std::size_t>(match[i])];
                cost += std::pow(std::hypot(t.first - e.first, t.second - e.second), cfg.p);
                ++matched;
            }
        }
        cost += penalty * static_cast<double>(n - matched) + penalty * static_cast<double>(m - matched);
        best = std::min(best, cost);
    };

    auto recurse = [&](auto&& self, std::size_t i) -> void {
        if (i == n) {
            evaluate();
            return;
        }
        match[i] = -1;
        self(self, i + 1);
        for (std::size_t j = 0; j < m; ++j) {
            if (used[j]) continue;
            used[j] = 1;
            match[i] = static_cast<int>(j);
            self(self, i + 1);
            used[j] = 0;
        }
        match[i] = -1;
    };
    recurse(recurse, 0);
    return std::pow(best, 1.0 / cfg.p);
}

} // namespace

TEST(Gospa, BothEmptyIsZero) {
    const GospaResult g = gospa_points({}, {}, GospaConfig(10, 1, 2));
    EXPECT_DOUBLE_EQ(g.total, 0.0);
    EXPECT_DOUBLE_EQ(g.localization, 0.0);
    EXPECT_DOUBLE_EQ(g.missed, 0.0);
    EXPECT_DOUBLE_EQ(g.false_, 0.0);
}

TEST(Gospa, MissedObjectCostsHalfCutoff) {
    const GospaResult g = gospa_points({{3.0, 4.0}}, {}, GospaConfig(10, 1, 2));
    EXPECT_DOUBLE_EQ(g.missed, 5.0);
    EXPECT_DOUBLE_EQ(g.total, 5.0);
    EXPECT_DOUBLE_EQ(g.localization, 0.0);
    EXPECT_DOUBLE_EQ(g.false_, 0.0);
}

TEST(Gospa, MatchedPairInsideCutoffIsPureLocalization) {
    const GospaResult g = gospa_points({{0.0, 0.0}}, {{3.0, 0.0}}, GospaConfig(10, 1, 2));
    EXPECT_DOUBLE_EQ(g.localization, 3.0);
    EXPECT_DOUBLE_EQ(g.total, 3.0);
    EXPECT_DOUBLE_EQ(g.missed, 0.0);
}

TEST(Gospa, FarPairIsCheaperLeftUnmatched) {
    const GospaResult g = gospa_points({{0.0, 0.0}}, {{25.0, 0.0}}, GospaConfig(10, 1, 2));
    EXPECT_DOUBLE_EQ(g.localization, 0.0);
    EXPECT_DOUBLE_EQ(g.missed, 5.0);
    EXPECT_DOUBLE_EQ(g.false_, 5.0);
    EXPECT_DOUBLE_EQ(g.total, 10.0);
}

TEST(Gospa, DecompositionIdentityHolds) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 32.0);
    std::uniform_int_distribution<int> count(0, 6);
    const GospaConfig cfg(10, 1, 2);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<Point2d> t(count(rng)), e(count(rng));
        for (auto& p : t) p = {u(rng), u(rng)};
        for (auto& p : e) p = {u(rng), u(rng)};
        const GospaResult g = gospa_points(t, e, cfg);
        EXPECT_NEAR(g.total, g.localization + g.missed + g.false_, 1e-9);
    }
}

TEST(Gospa, SymmetrySwapsMissedAndFalse) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 20.0);
    const GospaConfig cfg(10, 1, 2);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Point2d> t(3), e(5);
        for (auto& p : t) p = {u(rng), u(rng)};
        for (auto& p : e) p = {u(rng), u(rng)};
        const GospaResult ab = gospa_points(t, e, cfg);
        const GospaResult ba = gospa_points(e, t, cfg);
        EXPECT_NEAR(ab.total, ba.total, 1e-12);
        EXPECT_NEAR(ab.localization, ba.localization, 1e-12);
        EXPECT_NEAR(ab.missed, ba.false_, 1e-12);
        EXPECT_NEAR(ab.false_, ba.missed, 1e-12);
    }
}

TEST(Gospa, MatchesBruteForceEnumeration) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 25.0);
    std::uniform_int_distribution<int> count(0, 4);
    const GospaConfig cfg(10, 1, 2);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<Point2d> t(count(rng)), e(count(rng));
        for (auto& p : t) p = {u(rng), u(rng)};
        for (auto& p : e) p = {u(rng), u(rng)};
        const GospaResult g = gospa_points(t, e, cfg);
        EXPECT_NEAR(g.total, brute_force_gospa(t, e, cfg), 1e-9);
    }
}

TEST(Gospa, MonotoneInCutoffWhileMatchingsHold) {
    const std::vector<Point2d> t{{0, 0}, {5, 5}};
    const std::vector<Point2d> e{{1, 0}, {20, 20}};
    double prev = 0.0;
    for (double c = 2.0; c <= 14.0; c += 1.0) {
        const GospaResult g = gospa_points(t, e, GospaConfig(c, 1, 2));
        EXPECT_GE(g.total, prev - 1e-12);
        prev = g.total;
    }
}

TEST(Gospa, SecondOrderMatchesBruteForce) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 15.0);
    const GospaConfig cfg(10, 2, 2);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Point2d> t(3), e(2);
        for (auto& p : t) p = {u(rng), u(rng)};
        for (auto& p : e) p = {u(rng), u(rng)};
        const GospaResult g = gospa_points(t, e, cfg);
        EXPECT_NEAR(g.total, brute_force_gospa(t, e, cfg), 1e-9);
    }
}
