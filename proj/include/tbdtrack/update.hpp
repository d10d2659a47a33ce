#pragma once

#include "tbdtrack/association.hpp"
#include "tbdtrack/grid.hpp"
#include "tbdtrack/random.hpp"
#include "tbdtrack/state.hpp"
#include "tbdtrack/swerling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace tbdtrack {

/// PMBF-AC runs the full object contribution model; PMBF-A forces every
/// contribution probability p^(j,m,1) to one (and thereby every
/// beta^(j,m,0) to zero), recovering the association-only filter.
enum class FilterMode { pmbf_ac, pmbf_a };

inline const char* to_string(FilterMode mode) {
    return mode == FilterMode::pmbf_ac ? "pmbf-ac" : "pmbf-a";
}

/// Per-particle conditional factors cached by compute_weights so that
/// reduce_to_pmb can mix the (m,theta)-conditional pdfs without re-touching
/// the measurement model. Entries are aligned with the predicted component's
/// particle order; contrib_term is p^(j,m,1) * f1/f0 rescaled by the
/// per-cell normalizer shared with the weight table.
struct LegacyConditionals {
    std::vector<int> cell;            // -1 when the particle is outside the ROI
    std::vector<double> p_nocontrib;  // p^(j,m,0)(x_p)
    std::vector<double> contrib_term;
};

struct WeightComputation {
    AssociationWeights weights;
    std::vector<LegacyConditionals> conditionals;
    std::vector<double> cell_log_scale; // log of the per-cell factor divided out (relative to f0)
};

namespace detail {

inline double log_sum_exp(const std::vector<double>& logs) {
    if (logs.empty()) return -std::numeric_limits<double>::infinity();
    double mx = *std::max_element(logs.begin(), logs.end());
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double l : logs) s += std::exp(l - mx);
    return mx + std::log(s);
}

} // namespace detail

/// Stage-one association weights. All likelihoods are divided by f0(z^(m))
/// (constant over associations) and each cell's contribution column is
/// additionally rescaled by its largest term so that bright cells cannot
/// overflow; the published weights are therefore relative per cell.
inline WeightComputation compute_weights(const PMBPosterior& predicted, const Frame& frame,
                                         const ContributionTable& table, const NoiseModel& noise,
                                         FilterMode mode = FilterMode::pmbf_ac) {
    const CellGrid& grid = frame.grid;
    const int num_cells = grid.num_cells();
    if (table.num_cells() != num_cells)
        throw std::invalid_argument("compute_weights: contribution table does not match frame grid");
    if (table.num_bernoulli_rows() != predicted.bernoullis.size())
        throw std::invalid_argument("compute_weights: contribution table does not match posterior");

    const double s0_sq = noise.sigma0 * noise.sigma0;
    WeightComputation out;
    out.conditionals.resize(predicted.bernoullis.size());

    // Per-legacy sparse rows in log space, merged into per-cell maxima below.
    struct RawRow {
        std::map<int, double> b;           // sum_p w_p p0
        std::map<int, double> log_c;       // log sum_p w_p p1 f1/f0
    };
    std::vector<RawRow> raw(predicted.bernoullis.size());
    std::vector<std::map<int, std::vector<double>>> cell_logs(predicted.bernoullis.size());

    for (std::size_t j = 0; j < predicted.bernoullis.size(); ++j) {
        const auto& comp = predicted.bernoullis[j];
        auto& cond = out.conditionals[j];
        const std::size_t n = comp.spatial().size();
        cond.cell.resize(n);
        cond.p_nocontrib.assign(n, 0.0);
        cond.contrib_term.assign(n, 0.0);

        for (std::size_t i = 0; i < n; ++i) {
            const Particle& p = comp.spatial()[i];
            const int m = grid.cell_index(p.state);
            cond.cell[i] = m;
            if (m < 0) continue;
            const double sigma_sq = p.state.gamma + s0_sq;
            double p1 = 1.0;
            if (mode == FilterMode::pmbf_ac) {
                const double rivals = table.competitor_sum(j, m);
                p1 = sigma_sq / (sigma_sq + rivals);
            }
            cond.p_nocontrib[i] = 1.0 - p1;
            raw[j].b[m] += p.weight * cond.p_nocontrib[i];
            if (p.weight > 0.0 && p1 > 0.0) {
                const double l = std::log(p.weight * p1) + log_likelihood_ratio(frame.z[m], sigma_sq, noise);
                cell_logs[j][m].push_back(l);
            }
        }
        for (auto& [m, logs] : cell_logs[j]) raw[j].log_c[m] = detail::log_sum_exp(logs);
    }

    // New-component evidence per cell from the Poisson intensity.
    std::vector<std::vector<double>> phd_logs(static_cast<std::size_t>(num_cells));
    for (const auto& p : predicted.poisson.support.particles()) {
        const int m = grid.cell_index(p.state);
        if (m < 0 || !(p.weight > 0.0)) continue;
        const double sigma_sq = p.state.gamma + s0_sq;
        double p1 = 1.0;
        if (mode == FilterMode::pmbf_ac) {
            const double rivals = table.competitor_sum_poisson(m, p.weight * sigma_sq);
            p1 = sigma_sq / (sigma_sq + rivals);
        }
        const double l = std::log(p.weight * p1) + log_likelihood_ratio(frame.z[m], sigma_sq, noise);
        phd_logs[static_cast<std::size_t>(m)].push_back(l);
    }
    std::vector<double> log_d(static_cast<std::size_t>(num_cells));
    for (int m = 0; m < num_cells; ++m)
        log_d[static_cast<std::size_t>(m)] = detail::log_sum_exp(phd_logs[static_cast<std::size_t>(m)]);

    // Per-cell normalizer: largest term among {f0-unit, legacy claims, new}.
    out.cell_log_scale.assign(static_cast<std::size_t>(num_cells), 0.0);
    for (std::size_t j = 0; j < raw.size(); ++j) {
        const double log_r = std::log(predicted.bernoullis[j].existence());
        for (const auto& [m, lc] : raw[j].log_c) {
            auto& scale = out.cell_log_scale[static_cast<std::size_t>(m)];
            scale = std::max(scale, log_r + lc);
        }
    }
    for (int m = 0; m < num_cells; ++m) {
        auto& scale = out.cell_log_scale[static_cast<std::size_t>(m)];
        scale = std::max(scale, log_d[static_cast<std::size_t>(m)]);
    }

    // Assemble the weight table.
    out.weights.cells.resize(static_cast<std::size_t>(num_cells));
    for (int m = 0; m < num_cells; ++m) {
        const double u = out.cell_log_scale[static_cast<std::size_t>(m)];
        const double unit = std::exp(-u);
        const double exist = std::exp(log_d[static_cast<std::size_t>(m)] - u);
        out.weights.cells[static_cast<std::size_t>(m)] = NewComponentWeight{unit + exist, exist};
    }

    out.weights.legacy.resize(predicted.bernoullis.size());
    for (std::size_t j = 0; j < predicted.bernoullis.size(); ++j) {
        const double r = predicted.bernoullis[j].existence();
        LegacyWeightRow row;
        row.beta_empty = 1.0 - r;
        std::map<int, CellWeight> merged;
        for (const auto& [m, b] : raw[j].b)
            if (b > 0.0) merged[m].beta_nocontrib = r * b;
        for (const auto& [m, lc] : raw[j].log_c) {
            const double u = out.cell_log_scale[static_cast<std::size_t>(m)];
            merged[m].beta_contrib = r * std::exp(lc - u);
        }
        for (auto& [m, cw] : merged) {
            cw.cell = m;
            if (!std::isfinite(cw.beta_nocontrib) || !std::isfinite(cw.beta_contrib))
                throw std::runtime_error("compute_weights: non-finite weight for component " +
                                         std::to_string(j) + ", cell " + std::to_string(m) +
                                         " (z = " + std::to_string(frame.z[m]) + ")");
            row.cells.push_back(cw);
        }
        out.weights.legacy[j] = std::move(row);

        // Rescale the cached contribution terms to the same per-cell units.
        auto& cond = out.conditionals[j];
        for (std::size_t i = 0; i < cond.cell.size(); ++i) {
            const int m = cond.cell[i];
            if (m < 0) continue;
            const Particle& p = predicted.bernoullis[j].spatial()[i];
            const double sigma_sq = p.state.gamma + s0_sq;
            const double p1 = 1.0 - cond.p_nocontrib[i];
            if (p1 > 0.0) {
                const double l = std::log(p1) + log_likelihood_ratio(frame.z[m], sigma_sq, noise) -
                                 out.cell_log_scale[static_cast<std::size_t>(m)];
                cond.contrib_term[i] = std::exp(l);
            }
        }
    }

    detail::validate_weights(out.weights);
    return out;
}

/// Posterior PHD: every particle is scaled by the probability that an object
/// modeled by the Poisson intensity does not contribute to its cell.
/// Particles outside the ROI and zero-weight survivors are dropped.
inline PoissonIntensity update_phd(const PoissonIntensity& phd_pred, const CellGrid& grid,
                                   const ContributionTable& table, const NoiseModel& noise,
                                   FilterMode mode = FilterMode::pmbf_ac) {
    PoissonIntensity out;
    out.capacity = phd_pred.capacity;
    if (mode == FilterMode::pmbf_a) return out; // p^(0,m,0) is identically zero
    const double s0_sq = noise.sigma0 * noise.sigma0;
    out.support.reserve(phd_pred.support.size());
    for (const auto& p : phd_pred.support.particles()) {
        const int m = grid.cell_index(p.state);
        if (m < 0) continue;
        const double sigma_sq = p.state.gamma + s0_sq;
        const double rivals = table.competitor_sum_poisson(m, p.weight * sigma_sq);
        const double w = p.weight * (rivals / (sigma_sq + rivals));
        if (w > 0.0) out.support.add(p.state, w);
    }
    return out;
}

/// New Bernoulli candidate for one cell, prior to the stage-two association:
/// conditional_existence is r^(j,m,1) = d / (f0(z) + d).
struct NewComponentCandidate {
    int cell = -1;
    double conditional_existence = 0.0;
    WeightedParticleSet spatial;
};

/// Instantiate new-component candidates for cells whose Poisson evidence
/// d / f0(z) exceeds the significance floor. The spatial pdf is the in-cell
/// Poisson support reweighted by p^(0,m,1) f1, resampled to the budget.
inline std::vector<NewComponentCandidate> birth_components(const PoissonIntensity& phd_pred,
                                                           const Frame& frame,
                                                           const ContributionTable& table,
                                                           const NoiseModel& noise,
                                                           std::size_t particle_budget,
                                                           RandomEngine& rng,
                                                           FilterMode mode = FilterMode::pmbf_ac,
                                                           double significance_floor = 1e-4) {
    const CellGrid& grid = frame.grid;
    const double s0_sq = noise.sigma0 * noise.sigma0;

    struct CellAccum {
        std::vector<std::size_t> particles;
        std::vector<double> logs;
    };
    std::map<int, CellAccum> cells;
    const auto& support = phd_pred.support.particles();
    for (std::size_t q = 0; q < support.size(); ++q) {
        const auto& p = support[q];
        const int m = grid.cell_index(p.state);
        if (m < 0 || !(p.weight > 0.0)) continue;
        const double sigma_sq = p.state.gamma + s0_sq;
        double p1 = 1.0;
        if (mode == FilterMode::pmbf_ac) {
            const double rivals = table.competitor_sum_poisson(m, p.weight * sigma_sq);
            p1 = sigma_sq / (sigma_sq + rivals);
        }
        auto& acc = cells[m];
        acc.particles.push_back(q);
        acc.logs.push_back(std::log(p.weight * p1) + log_likelihood_ratio(frame.z[m], sigma_sq, noise));
    }

    std::vector<NewComponentCandidate> out;
    for (auto& [m, acc] : cells) {
        const double log_d = detail::log_sum_exp(acc.logs);
        const double d = std::exp(log_d); // relative to f0(z^(m))
        if (!(d > significance_floor)) continue;

        NewComponentCandidate cand;
        cand.cell = m;
        cand.conditional_existence = d / (1.0 + d);

        WeightedParticleSet reweighted;
        reweighted.reserve(acc.particles.size());
        const double mx = *std::max_element(acc.logs.begin(), acc.logs.end());
        for (std::size_t i = 0; i < acc.particles.size(); ++i)
            reweighted.add(support[acc.particles[i]].state, std::exp(acc.logs[i] - mx));
        cand.spatial = resample(reweighted, particle_budget, rng);
        cand.spatial.normalize();
        out.push_back(std::move(cand));
    }
    return out;
}

/// Stage two: collapse the PMBM implied by the weights onto a single PMB.
/// Legacy components keep their labels with r^(j) = 1 - p(nonexistent) and a
/// belief-weighted mixture of the (m,theta)-conditional pdfs; surviving new
/// components get fresh labels with r = p(cell unclaimed) * r^(j,m,1).
/// The Poisson part is carried over unchanged (see update_phd).
inline PMBPosterior reduce_to_pmb(const PMBPosterior& predicted, const WeightComputation& wc,
                                  const BeliefTable& beliefs,
                                  const std::vector<NewComponentCandidate>& candidates,
                                  std::size_t particle_budget, RandomEngine& rng,
                                  std::uint64_t& next_label) {
    if (beliefs.legacy.size() != predicted.bernoullis.size())
        throw std::invalid_argument("reduce_to_pmb: belief table does not match posterior");

    PMBPosterior out;
    out.time_index = predicted.time_index;
    out.poisson = predicted.poisson;

    for (std::size_t j = 0; j < predicted.bernoullis.size(); ++j) {
        const auto& comp = predicted.bernoullis[j];
        const auto& lb = beliefs.legacy[j];
        const auto& row = wc.weights.legacy[j];
        const auto& cond = wc.conditionals[j];
        const double r_pred = comp.existence();

        double r_post = 0.0;
        std::map<int, std::pair<double, double>> mix; // cell -> (p(m,0)/b, p(m,1)/c)
        for (const auto& cb : lb.cells) {
            r_post += cb.nocontrib + cb.contrib;
            const CellWeight* cw = nullptr;
            for (const auto& c : row.cells)
                if (c.cell == cb.cell) cw = &c;
            if (!cw) continue;
            double w0 = 0.0, w1 = 0.0;
            if (cb.nocontrib > 0.0 && cw->beta_nocontrib > 0.0)
                w0 = cb.nocontrib * r_pred / cw->beta_nocontrib; // = p(m,0) / b^(j,m)
            if (cb.contrib > 0.0 && cw->beta_contrib > 0.0)
                w1 = cb.contrib * r_pred / cw->beta_contrib;     // = p(m,1) / c^(j,m)
            mix[cb.cell] = {w0, w1};
        }
        r_post = std::min(1.0, r_post);

        WeightedParticleSet mixture;
        mixture.reserve(comp.spatial().size());
        for (std::size_t i = 0; i < comp.spatial().size(); ++i) {
            const int m = cond.cell[i];
            if (m < 0) continue;
            auto it = mix.find(m);
            if (it == mix.end()) continue;
            const Particle& p = comp.spatial()[i];
            const double w = p.weight * (it->second.first * cond.p_nocontrib[i] +
                                         it->second.second * cond.contrib_term[i]);
            if (w > 0.0) mixture.add(p.state, w);
        }

        if (r_post > 0.0 && mixture.total_weight() > 0.0) {
            WeightedParticleSet spatial = resample(mixture, particle_budget, rng);
            spatial.normalize();
            out.bernoullis.emplace_back(r_post, std::move(spatial), comp.label());
        } else {
            // Dead component: keep the predicted support with r = 0 so that
            // recycling can drop it without special cases.
            out.bernoullis.emplace_back(0.0, comp.spatial(), comp.label());
        }
    }

    for (const auto& cand : candidates) {
        const double unclaimed = beliefs.cell_unclaimed.at(static_cast<std::size_t>(cand.cell));
        const double r = unclaimed * cand.conditional_existence;
        if (r > 0.0) out.bernoullis.emplace_back(r, cand.spatial, next_label++);
    }
    return out;
}

/// Recycling: Bernoulli components below the threshold are moved into the
/// Poisson intensity by first-moment matching, preserving the expected
/// cardinality exactly.
inline PMBPosterior recycle(const PMBPosterior& p, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw std::invalid_argument("recycle: threshold outside [0,1]");
    PMBPosterior out;
    out.time_index = p.time_index;
    out.poisson = p.poisson;
    for (const auto& b : p.bernoullis) {
        if (b.existence() < threshold) {
            if (b.existence() > 0.0) {
                const double total = b.spatial().total_weight();
                for (const auto& particle : b.spatial().particles())
                    out.poisson.support.add(particle.state, particle.weight * b.existence() / total);
            }
        } else {
            out.bernoullis.push_back(b);
        }
    }
    return out;
}

struct Estimate {
    std::uint64_t label = 0;
    ObjectState state;
    double existence = 0.0;
};

struct EstimateSet {
    std::vector<Estimate> estimates;

    [[nodiscard]] std::size_t size() const { return estimates.size(); }
};

/// MAP existence rule: declare every component at or above the threshold and
/// report its particle-weighted mean state.
inline EstimateSet extract_estimates(const PMBPosterior& p, double declare_threshold = 0.5) {
    EstimateSet out;
    for (const auto& b : p.bernoullis) {
        if (b.existence() >= declare_threshold)
            out.estimates.push_back(Estimate{b.label(), b.spatial().mean_state(), b.existence()});
    }
    return out;
}

} // namespace tbdtrack
