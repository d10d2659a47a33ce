#include "tbdtrack/association.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace tbdtrack;

namespace {

AssociationWeights single_component_two_cells() {
    // Spec'd toy instance: beta^(1,1,1) = 2, beta^(1,2,1) = 1, beta_empty = 1,
    // unit new-component weights.
    AssociationWeights w;
    LegacyWeightRow row;
    row.beta_empty = 1.0;
    row.cells.push_back(CellWeight{0, 0.0, 2.0});
    row.cells.push_back(CellWeight{1, 0.0, 1.0});
    w.legacy.push_back(row);
    w.cells = {NewComponentWeight{1.0, 0.0}, NewComponentWeight{1.0, 0.0}};
    return w;
}

AssociationWeights random_instance(std::mt19937_64& rng, int num_legacy, int num_cells,
                                   double new_exist_scale = 0.3) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    AssociationWeights w;
    for (int m = 0; m < num_cells; ++m) {
        const double exist = new_exist_scale * u(rng);
        w.cells.push_back(NewComponentWeight{1.0 + exist, exist});
    }
    for (int j = 0; j < num_legacy; ++j) {
        LegacyWeightRow row;
        row.beta_empty = 0.05 + u(rng);
        for (int m = 0; m < num_cells; ++m) {
            if (u(rng) < 0.7) {
                CellWeight cw;
                cw.cell = m;
                cw.beta_nocontrib = u(rng);
                cw.beta_contrib = 3.0 * u(rng);
                row.cells.push_back(cw);
            }
        }
        w.legacy.push_back(row);
    }
    return w;
}

double max_belief_gap(const BeliefTable& a, const BeliefTable& b) {
    double gap = 0.0;
    for (std::size_t j = 0; j < a.legacy.size(); ++j) {
        gap = std::max(gap, std::abs(a.legacy[j].not_exist - b.legacy[j].not_exist));
        for (std::size_t c = 0; c < a.legacy[j].cells.size(); ++c) {
            gap = std::max(gap, std::abs(a.legacy[j].cells[c].nocontrib - b.legacy[j].cells[c].nocontrib));
            gap = std::max(gap, std::abs(a.legacy[j].cells[c].contrib - b.legacy[j].cells[c].contrib));
        }
    }
    for (std::size_t m = 0; m < a.cell_unclaimed.size(); ++m)
        gap = std::max(gap, std::abs(a.cell_unclaimed[m] - b.cell_unclaimed[m]));
    return gap;
}

double belief_row_sum(const LegacyBeliefs& lb) {
    double s = lb.not_exist;
    for (const auto& c : lb.cells) s += c.nocontrib + c.contrib;
    return s;
}

} // namespace

TEST(ExactMarginals, NormalizesThreeTermToyInstance) {
    const auto beliefs = exact_marginals(single_component_two_cells());
    ASSERT_EQ(beliefs.legacy.size(), 1u);
    EXPECT_NEAR(beliefs.legacy[0].cells[0].contrib, 0.5, 1e-12);
    EXPECT_NEAR(beliefs.legacy[0].cells[1].contrib, 0.25, 1e-12);
    EXPECT_NEAR(beliefs.legacy[0].not_exist, 0.25, 1e-12);
    EXPECT_NEAR(beliefs.cell_unclaimed[0], 0.5, 1e-12);
    EXPECT_NEAR(beliefs.cell_unclaimed[1], 0.75, 1e-12);
}

TEST(ExactMarginals, AdmissibilityForbidsTwoContributorsPerCell) {
    // Two components that can only claim the same cell; the double-claim
    // configuration must carry zero probability, so at least one of the two
    // must be nonexistent in every admissible configuration.
    AssociationWeights w;
    for (int j = 0; j < 2; ++j) {
        LegacyWeightRow row;
        row.beta_empty = 0.5;
        row.cells.push_back(CellWeight{0, 0.0, 5.0});
        w.legacy.push_back(row);
    }
    w.cells = {NewComponentWeight{1.0, 0.0}};
    const auto beliefs = exact_marginals(w);
    // Configurations: (e,e): 0.25, (claim,e): 2.5, (e,claim): 2.5 -> Z = 5.25.
    EXPECT_NEAR(beliefs.legacy[0].cells[0].contrib, 2.5 / 5.25, 1e-12);
    EXPECT_NEAR(beliefs.legacy[0].not_exist, 2.75 / 5.25, 1e-12);
    // P(both claim cell 0) would have been the dominant term if admissible.
    EXPECT_NEAR(beliefs.cell_unclaimed[0], 0.25 / 5.25, 1e-12);
}

TEST(ExactMarginals, NewComponentExistenceMatchesExpandedEnumeration) {
    // One legacy component and one cell with new-component evidence d = 1
    // (so beta' = 2). Expanding the unclaimed state into its noise and
    // new-object branches gives worlds {empty,noise} 0.5, {empty,new} 0.5,
    // {(m,0),noise} 0.1, {(m,0),new} 0.1, {claim} 2.0 -> P(new exists)
    // = 0.6 / 3.2 = 0.1875 and P(unclaimed) = 1.2 / 3.2 = 0.375.
    AssociationWeights w;
    LegacyWeightRow row;
    row.beta_empty = 0.5;
    row.cells.push_back(CellWeight{0, 0.1, 2.0});
    w.legacy.push_back(row);
    w.cells = {NewComponentWeight{2.0, 1.0}};

    const auto exact = exact_marginals(w);
    EXPECT_NEAR(exact.cell_unclaimed[0], 0.375, 1e-12);
    EXPECT_NEAR(exact.new_component_existence(0, w), 0.1875, 1e-12);

    const auto bp = run_bp(w);
    EXPECT_NEAR(bp.cell_unclaimed[0], 0.375, 1e-12); // tree instance, BP exact
    EXPECT_NEAR(bp.new_component_existence(0, w), 0.1875, 1e-12);
}

TEST(ExactMarginals, RefusesHugeInstances) {
    std::mt19937_64 rng(1);
    const auto w = random_instance(rng, 12, 12);
    EXPECT_THROW(exact_marginals(w, 1e5), std::runtime_error);
}

TEST(RunBp, ExactOnSingleComponentInstance) {
    const auto w = single_component_two_cells();
    const auto bp = run_bp(w);
    const auto exact = exact_marginals(w);
    EXPECT_TRUE(bp.converged);
    EXPECT_LT(max_belief_gap(bp, exact), 1e-12);
}

TEST(RunBp, NoLegacyComponentsKeepsClosedFormNewBeliefs) {
    AssociationWeights w;
    w.cells = {NewComponentWeight{1.0 + 3.0, 3.0}, NewComponentWeight{1.0 + 0.2, 0.2}};
    const auto bp = run_bp(w);
    EXPECT_DOUBLE_EQ(bp.cell_unclaimed[0], 1.0);
    EXPECT_DOUBLE_EQ(bp.cell_unclaimed[1], 1.0);
    // The new component's existence is the beta-ratio d / (f0 + d).
    EXPECT_NEAR(bp.new_component_existence(0, w), 0.75, 1e-12);
    EXPECT_NEAR(bp.new_component_existence(1, w), 0.2 / 1.2, 1e-12);
}

TEST(RunBp, ExactOnLoopFreeInstances) {
    // Loop-free per the spec: every legacy component has contribution weight
    // in at most one cell (cells may still be shared).
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        AssociationWeights w;
        const int num_cells = 3;
        for (int m = 0; m < num_cells; ++m) {
            const double exist = u(rng);
            w.cells.push_back(NewComponentWeight{1.0 + exist, exist});
        }
        std::uniform_int_distribution<int> cell_pick(0, num_cells - 1);
        const int num_legacy = 4;
        for (int j = 0; j < num_legacy; ++j) {
            LegacyWeightRow row;
            row.beta_empty = u(rng);
            CellWeight cw;
            cw.cell = cell_pick(rng);
            cw.beta_nocontrib = u(rng);
            cw.beta_contrib = 4.0 * u(rng);
            row.cells.push_back(cw);
            w.legacy.push_back(row);
        }
        const auto bp = run_bp(w);
        const auto exact = exact_marginals(w);
        EXPECT_TRUE(bp.converged);
        EXPECT_LT(max_belief_gap(bp, exact), 1e-12) << "trial " << trial;
    }
}

TEST(RunBp, CloseToExactOnRandomLoopyInstances) {
    std::mt19937_64 rng(17);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto w = random_instance(rng, 3, 4);
        const auto bp = run_bp(w);
        const auto exact = exact_marginals(w);
        worst = std::max(worst, max_belief_gap(bp, exact));
    }
    EXPECT_LE(worst, 0.05);
}

TEST(RunBp, BeliefsNormalizeAndStayPositive) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const auto w = random_instance(rng, 4, 5);
        const auto bp = run_bp(w);
        for (const auto& lb : bp.legacy) {
            EXPECT_NEAR(belief_row_sum(lb), 1.0, 1e-9);
            EXPECT_GE(lb.not_exist, 0.0);
            for (const auto& c : lb.cells) {
                EXPECT_GE(c.nocontrib, 0.0);
                EXPECT_GE(c.contrib, 0.0);
            }
        }
        for (double v : bp.cell_unclaimed) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(RunBp, DampingChangesTheScheduleNotTheFixedPoint) {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 50; ++trial) {
        const auto w = random_instance(rng, 3, 4);
        const auto plain = run_bp(w, BpConfig(500, 1e-10, 0.0));
        const auto damped = run_bp(w, BpConfig(500, 1e-10, 0.4));
        EXPECT_TRUE(plain.converged);
        EXPECT_TRUE(damped.converged);
        EXPECT_LT(max_belief_gap(plain, damped), 1e-6);
    }
}

TEST(RunBp, ReportsNonConvergenceInsteadOfFailing) {
    std::mt19937_64 rng(41);
    const auto w = random_instance(rng, 5, 3, 0.01);
    const auto bp = run_bp(w, BpConfig(1, 1e-12, 0.0));
    EXPECT_FALSE(bp.converged);
    EXPECT_EQ(bp.iterations, 1);
    for (const auto& lb : bp.legacy) EXPECT_NEAR(belief_row_sum(lb), 1.0, 1e-9);
}

TEST(RunBp, RejectsAllZeroRows) {
    AssociationWeights w;
    LegacyWeightRow row;
    row.beta_empty = 0.0;
    w.legacy.push_back(row);
    w.cells = {NewComponentWeight{1.0, 0.0}};
    EXPECT_THROW(run_bp(w), std::runtime_error);
}

TEST(DumpInstance, WritesBetaTablesAndBeliefs) {
    const auto w = single_component_two_cells();
    const auto bp = run_bp(w);
    std::ostringstream os;
    dump_association_instance(w, &bp, os);
    const std::string text = os.str();
    EXPECT_NE(text.find("legacy 0"), std::string::npos);
    EXPECT_NE(text.find("beta_contrib"), std::string::npos);
    EXPECT_NE(text.find("beliefs"), std::string::npos);
}
