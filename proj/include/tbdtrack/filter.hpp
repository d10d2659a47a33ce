#pragma once

#include "tbdtrack/association.hpp"
#include "tbdtrack/grid.hpp"
#include "tbdtrack/prediction.hpp"
#include "tbdtrack/state.hpp"
#include "tbdtrack/swerling.hpp"
#include "tbdtrack/update.hpp"

#include <cstdint>
#include <stdexcept>
#include <utility>

namespace tbdtrack {

struct FilterParams {
    FilterMode mode = FilterMode::pmbf_ac;
    NoiseModel noise{1.0};
    TransitionModel transition = TransitionModel::ncv();
    BirthModel birth;
    BpConfig bp;
    std::size_t particles_per_bernoulli = 3000;
    std::size_t phd_capacity = 50000;
    double recycle_threshold = 0.1;
    double declare_threshold = 0.5;
    double birth_significance_floor = 1e-4;
    double competitor_mass_floor = 1e-6;
};

struct StepDiagnostics {
    double phd_mass = 0.0;
    std::size_t bernoulli_count = 0;
    int bp_iterations = 0;
    bool bp_converged = true;
};

struct StepResult {
    EstimateSet estimates;
    StepDiagnostics diagnostics;
};

/// One frame of the two-stage PMB track-before-detect recursion:
/// predict -> mean contributions -> association weights -> BP -> PMB
/// reduction -> PHD update -> recycling -> PHD resampling -> estimates.
/// Deterministic given the construction seed and the frame sequence.
class PmbFilter {
public:
    PmbFilter(FilterParams params, std::uint64_t seed) : params_(std::move(params)), seed_(seed) {
        posterior_.poisson.capacity = params_.phd_capacity;
    }

    [[nodiscard]] const PMBPosterior& posterior() const { return posterior_; }
    [[nodiscard]] const FilterParams& params() const { return params_; }

    StepResult step(const Frame& frame) {
        ++step_index_;
        auto rng_predict = make_engine(seed_, {static_cast<std::uint64_t>(step_index_), 0});
        auto rng_update = make_engine(seed_, {static_cast<std::uint64_t>(step_index_), 1});

        PMBPosterior predicted = predict(posterior_, params_.transition, params_.birth, rng_predict);

        const ContributionTable table =
            mean_contributions(predicted, frame.grid, params_.noise, params_.competitor_mass_floor);

        WeightComputation wc = compute_weights(predicted, frame, table, params_.noise, params_.mode);

        const BeliefTable beliefs = run_bp(wc.weights, params_.bp);

        const auto candidates =
            birth_components(predicted.poisson, frame, table, params_.noise,
                             params_.particles_per_bernoulli, rng_update, params_.mode,
                             params_.birth_significance_floor);

        PMBPosterior reduced = reduce_to_pmb(predicted, wc, beliefs, candidates,
                                             params_.particles_per_bernoulli, rng_update, next_label_);

        reduced.poisson =
            update_phd(predicted.poisson, frame.grid, table, params_.noise, params_.mode);

        PMBPosterior recycled = recycle(reduced, params_.recycle_threshold);

        if (recycled.poisson.support.size() > params_.phd_capacity) {
            const double mass = recycled.poisson.mass();
            if (mass > 0.0) {
                recycled.poisson.support =
                    resample(recycled.poisson.support, params_.phd_capacity, rng_update);
            } else {
                recycled.poisson.support = WeightedParticleSet();
            }
        }
        recycled.poisson.capacity = params_.phd_capacity;

        posterior_ = std::move(recycled);

        StepResult result;
        result.estimates = extract_estimates(posterior_, params_.declare_threshold);
        result.diagnostics.phd_mass = posterior_.poisson.mass();
        result.diagnostics.bernoulli_count = posterior_.bernoullis.size();
        result.diagnostics.bp_iterations = beliefs.iterations;
        result.diagnostics.bp_converged = beliefs.converged;
        return result;
    }

private:
    FilterParams params_;
    std::uint64_t seed_;
    int step_index_ = 0;
    std::uint64_t next_label_ = 1;
    PMBPosterior posterior_;
};

} // namespace tbdtrack
