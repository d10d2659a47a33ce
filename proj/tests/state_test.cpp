#include "tbdtrack/state.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace tbdtrack;

namespace {

ObjectState at(double px, double py, double gamma = 1.0) {
    ObjectState s;
    s.px = px;
    s.py = py;
    s.gamma = gamma;
    return s;
}

} // namespace

TEST(WeightedParticleSet, RejectsNegativeWeights) {
    WeightedParticleSet set;
    EXPECT_THROW(set.add(at(0, 0), -0.1), std::invalid_argument);
    EXPECT_THROW(set.add(at(0, 0), std::nan("")), std::invalid_argument);
}

TEST(WeightedParticleSet, NormalizeAndMean) {
    WeightedParticleSet set;
    set.add(at(0, 0), 1.0);
    set.add(at(2, 4), 3.0);
    set.normalize();
    EXPECT_TRUE(set.is_normalized());
    const ObjectState m = set.mean_state();
    EXPECT_DOUBLE_EQ(m.px, 1.5);
    EXPECT_DOUBLE_EQ(m.py, 3.0);
}

TEST(Resample, DegenerateWeightMassPicksTheOnlySurvivor) {
    WeightedParticleSet set;
    set.add(at(1, 0), 1.0);
    set.add(at(2, 0), 0.0);
    set.add(at(3, 0), 0.0);
    set.add(at(4, 0), 0.0);
    RandomEngine rng(7);
    const auto out = resample(set, 2, rng);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_DOUBLE_EQ(out[0].state.px, 1.0);
    EXPECT_DOUBLE_EQ(out[1].state.px, 1.0);
}

TEST(Resample, PreservesUnnormalizedMass) {
    WeightedParticleSet set;
    set.add(at(0, 0), 0.17);
    set.add(at(1, 1), 0.2);
    RandomEngine rng(3);
    const auto out = resample(set, 100, rng);
    ASSERT_EQ(out.size(), 100u);
    for (const auto& p : out.particles()) EXPECT_DOUBLE_EQ(p.weight, 0.0037);
    EXPECT_NEAR(out.total_weight(), 0.37, 0.37 * 1e-12);
}

TEST(Resample, ZeroMassIsDegenerate) {
    WeightedParticleSet set;
    set.add(at(0, 0), 0.0);
    RandomEngine rng(1);
    EXPECT_THROW(resample(set, 4, rng), std::domain_error);
}

TEST(Resample, UniformWeightsKeepTheEmpiricalMean) {
    WeightedParticleSet set;
    for (int i = 0; i < 16; ++i) set.add(at(i, -i), 1.0);
    const double true_mean = set.mean_state().px;

    RandomEngine rng(12345);
    double acc = 0.0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        const auto out = resample(set, 16, rng);
        acc += out.mean_state().px;
    }
    EXPECT_NEAR(acc / trials, true_mean, 0.05);
}

TEST(Bernoulli, RejectsExistenceOutsideUnitInterval) {
    WeightedParticleSet set;
    set.add(at(0, 0), 1.0);
    EXPECT_THROW(BernoulliComponent(-0.1, set, 1), std::invalid_argument);
    EXPECT_THROW(BernoulliComponent(1.1, set, 1), std::invalid_argument);
    EXPECT_NO_THROW(BernoulliComponent(1.0, set, 1));
}

TEST(Bernoulli, RejectsEmptySpatialSet) {
    EXPECT_THROW(BernoulliComponent(0.5, WeightedParticleSet(), 1), std::invalid_argument);
}

TEST(ExpectedCardinality, EmptyPosteriorIsZero) {
    PMBPosterior p;
    EXPECT_DOUBLE_EQ(expected_cardinality(p), 0.0);
}

TEST(ExpectedCardinality, PoissonMassPlusExistenceSum) {
    PMBPosterior p;
    p.poisson.support.add(at(0, 0), 0.04);
    p.poisson.support.add(at(1, 1), 0.06);
    WeightedParticleSet s;
    s.add(at(0, 0), 1.0);
    p.bernoullis.emplace_back(1.0, s, 1);
    p.bernoullis.emplace_back(0.5, s, 2);
    EXPECT_NEAR(expected_cardinality(p), 1.6, 1e-12);
}

TEST(ExpectedCardinality, InvariantUnderPhdResampling) {
    RandomEngine rng(99);
    PMBPosterior p;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) p.poisson.support.add(at(unif(rng), unif(rng)), 2e-4 * unif(rng));
    const double before = expected_cardinality(p);
    p.poisson.support = resample(p.poisson.support, 10000, rng);
    EXPECT_NEAR(expected_cardinality(p), before, 0.01 * before);
}
