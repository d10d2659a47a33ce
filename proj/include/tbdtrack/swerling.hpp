#pragma once

#include "tbdtrack/grid.hpp"
#include "tbdtrack/state.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

namespace tbdtrack {

/// Swerling-1 cell noise: Rayleigh-distributed intensity with scale sigma0.
struct NoiseModel {
    double sigma0 = 1.0;

    explicit NoiseModel(double s = 1.0) : sigma0(s) {
        if (!(sigma0 > 0.0)) throw std::invalid_argument("NoiseModel: sigma0 must be > 0");
    }
};

/// Single-cell point spread function: an object deposits its full intensity
/// into the cell it occupies and nothing anywhere else.
inline double psf(const ObjectState& x, int m, const CellGrid& grid) {
    if (!grid.valid_cell(m)) throw std::out_of_range("psf: invalid cell index");
    return grid.cell_index(x) == m ? x.gamma : 0.0;
}

/// sigma_m^2(x) = d^(m)(x) + sigma0^2
inline double cell_sigma_sq(const ObjectState& x, int m, const CellGrid& grid, const NoiseModel& noise) {
    return psf(x, m, grid) + noise.sigma0 * noise.sigma0;
}

inline double cell_sigma(const ObjectState& x, int m, const CellGrid& grid, const NoiseModel& noise) {
    return std::sqrt(cell_sigma_sq(x, m, grid, noise));
}

inline double rayleigh_pdf(double z, double scale) {
    const double s2 = scale * scale;
    return (z / s2) * std::exp(-0.5 * z * z / s2);
}

/// f0: cell intensity density under noise only.
inline double noise_likelihood(double z, const NoiseModel& noise) {
    if (z < 0.0) throw std::domain_error("noise_likelihood: intensity must be >= 0");
    return rayleigh_pdf(z, noise.sigma0);
}

/// f1: cell intensity density given a contributing object with state x.
inline double signal_likelihood(double z, const ObjectState& x, int m, const CellGrid& grid,
                                const NoiseModel& noise) {
    if (z < 0.0) throw std::domain_error("signal_likelihood: intensity must be >= 0");
    return rayleigh_pdf(z, cell_sigma(x, m, grid, noise));
}

/// log(f1(z | sigma^2) / f0(z)); the z/scale^2 prefactors cancel analytically,
/// so this stays finite for z -> 0 and avoids overflow for bright cells.
inline double log_likelihood_ratio(double z, double sigma_sq, const NoiseModel& noise) {
    const double s0_sq = noise.sigma0 * noise.sigma0;
    return std::log(s0_sq / sigma_sq) + 0.5 * z * z * (1.0 / s0_sq - 1.0 / sigma_sq);
}

inline double log_noise_likelihood(double z, const NoiseModel& noise) {
    if (z < 0.0) throw std::domain_error("log_noise_likelihood: intensity must be >= 0");
    const double s0_sq = noise.sigma0 * noise.sigma0;
    return std::log(z / s0_sq) - 0.5 * z * z / s0_sq;
}

/// Probability that a thresholded cell detects the object: exp(-eta^2 / (2 sigma_m^2)).
inline double detection_probability_sigma_sq(double eta, double sigma_sq) {
    if (eta < 0.0) throw std::domain_error("detection_probability: eta must be >= 0");
    return std::exp(-0.5 * eta * eta / sigma_sq);
}

inline double detection_probability(double eta, const ObjectState& x, int m, const CellGrid& grid,
                                    const NoiseModel& noise) {
    return detection_probability_sigma_sq(eta, cell_sigma_sq(x, m, grid, noise));
}

/// Contribution pmf for a finite threshold eta: entry i is proportional to
/// p_eta^(i) * prod_{i' != i} (1 - p_eta^(i')), normalized over the n objects
/// occupying the cell. `sigmas` holds the sigma_m values of those objects.
inline std::vector<double> contribution_pmf_thresholded(double eta, std::span<const double> sigmas) {
    if (sigmas.empty()) throw std::domain_error("contribution_pmf_thresholded: no objects in cell");
    if (!(eta > 0.0)) throw std::domain_error("contribution_pmf_thresholded: eta must be > 0");

    const std::size_t n = sigmas.size();
    std::vector<double> p_det(n), miss(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = 0.5 * eta * eta / (sigmas[i] * sigmas[i]);
        p_det[i] = std::exp(-a);
        miss[i] = -std::expm1(-a); // 1 - p_det without cancellation for small eta
    }

    std::vector<double> numer(n);
    for (std::size_t i = 0; i < n; ++i) {
        double prod = p_det[i];
        for (std::size_t k = 0; k < n; ++k)
            if (k != i) prod *= miss[k];
        numer[i] = prod;
    }
    const double c_eta = neumaier_sum(numer);
    if (!(c_eta >= DBL_MIN))
        throw std::runtime_error("contribution_pmf_thresholded: normalizer underflow, C_eta = " +
                                 std::to_string(c_eta));
    for (double& v : numer) v /= c_eta;
    return numer;
}

/// Swerling-1 limit of the contribution pmf (eta -> 0): entry i is
/// sigma_m^2(x_i) / sum_i' sigma_m^2(x_i').
inline std::vector<double> contribution_pmf_swerling(std::span<const double> sigmas_sq) {
    if (sigmas_sq.empty()) throw std::domain_error("contribution_pmf_swerling: no objects in cell");
    for (double s : sigmas_sq)
        if (!(s > 0.0)) throw std::domain_error("contribution_pmf_swerling: sigma^2 entries must be > 0");
    const double total = neumaier_sum(sigmas_sq);
    std::vector<double> out(sigmas_sq.size());
    for (std::size_t i = 0; i < sigmas_sq.size(); ++i) out[i] = sigmas_sq[i] / total;
    return out;
}

struct ContributionLimit {
    std::vector<double> probabilities;
    bool converged = false;
};

/// Numeric eta -> 0 limit of the thresholded pmf, used in tests as an
/// independent check of the closed form. Evaluates a decreasing eta sequence
/// and Richardson-extrapolates the O(eta^2) error term.
inline ContributionLimit contribution_limit_oracle(std::span<const double> sigmas_sq,
                                                   std::span<const double> etas = {}) {
    if (sigmas_sq.empty()) throw std::domain_error("contribution_limit_oracle: no objects in cell");
    static constexpr double kDefaultEtas[] = {1e-2, 1e-3, 1e-4};
    std::vector<double> eta_seq(etas.begin(), etas.end());
    if (eta_seq.size() < 2) eta_seq.assign(std::begin(kDefaultEtas), std::end(kDefaultEtas));

    std::vector<double> sigmas(sigmas_sq.size());
    for (std::size_t i = 0; i < sigmas.size(); ++i) sigmas[i] = std::sqrt(sigmas_sq[i]);

    std::vector<std::vector<double>> values;
    values.reserve(eta_seq.size());
    for (double eta : eta_seq) values.push_back(contribution_pmf_thresholded(eta, sigmas));

    auto max_diff = [](const std::vector<double>& a, const std::vector<double>& b) {
        double d = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
        return d;
    };

    ContributionLimit result;
    result.converged = true;
    for (std::size_t k = 2; k < values.size(); ++k) {
        const double d_prev = max_diff(values[k - 2], values[k - 1]);
        const double d_cur = max_diff(values[k - 1], values[k]);
        if (d_cur > d_prev && d_cur > 1e-12) result.converged = false;
    }

    // Richardson extrapolation of the last pair; the leading error is O(eta^2)
    // so with ratio r the extrapolant is v2 + (v2 - v1) / (r^2 - 1).
    const auto& v1 = values[values.size() - 2];
    const auto& v2 = values.back();
    const double r = eta_seq[eta_seq.size() - 2] / eta_seq.back();
    const double denom = r * r - 1.0;
    result.probabilities.resize(v2.size());
    for (std::size_t i = 0; i < v2.size(); ++i)
        result.probabilities[i] = v2[i] + (v2[i] - v1[i]) / denom;
    return result;
}

/// Mean object contributions sigma_bar^2_{j,m}: one sparse row per Bernoulli
/// component plus a dense row for the Poisson intensity, with per-cell totals.
class ContributionTable {
public:
    ContributionTable(int num_cells, std::size_t num_bernoulli)
        : num_cells_(num_cells), bernoulli_rows_(num_bernoulli),
          poisson_row_(static_cast<std::size_t>(num_cells), 0.0),
          cell_total_(static_cast<std::size_t>(num_cells), 0.0) {}

    [[nodiscard]] int num_cells() const { return num_cells_; }
    [[nodiscard]] std::size_t num_bernoulli_rows() const { return bernoulli_rows_.size(); }

    [[nodiscard]] double bernoulli_entry(std::size_t j, int m) const {
        const auto& row = bernoulli_rows_.at(j);
        auto it = row.find(m);
        return it == row.end() ? 0.0 : it->second;
    }

    [[nodiscard]] const std::map<int, double>& bernoulli_row(std::size_t j) const {
        return bernoulli_rows_.at(j);
    }

    [[nodiscard]] double poisson_entry(int m) const {
        return poisson_row_.at(static_cast<std::size_t>(m));
    }

    [[nodiscard]] double cell_total(int m) const {
        return cell_total_.at(static_cast<std::size_t>(m));
    }

    /// Competitor sum for Bernoulli component j in cell m: everything in the
    /// cell except the component's own average contribution.
    [[nodiscard]] double competitor_sum(std::size_t j, int m) const {
        return std::max(0.0, cell_total(m) - bernoulli_entry(j, m));
    }

    /// Competitor sum for a particle of the Poisson intensity: leave the
    /// particle's own weighted contribution out of the cell total, so that a
    /// lone particle never competes with itself but the rest of the
    /// undetected-object mass still does.
    [[nodiscard]] double competitor_sum_poisson(int m, double own_contribution) const {
        return std::max(0.0, cell_total(m) - own_contribution);
    }

    void set_bernoulli_entry(std::size_t j, int m, double value) {
        bernoulli_rows_.at(j)[m] = value;
        cell_total_.at(static_cast<std::size_t>(m)) += value;
    }

    void set_poisson_entry(int m, double value) {
        poisson_row_.at(static_cast<std::size_t>(m)) = value;
        cell_total_.at(static_cast<std::size_t>(m)) += value;
    }

private:
    int num_cells_;
    std::vector<std::map<int, double>> bernoulli_rows_;
    std::vector<double> poisson_row_;
    std::vector<double> cell_total_;
};

/// Particle-sum evaluation of the mean contributions. Bernoulli rows are
/// scaled by the predicted existence probability; rows are only kept where
/// the component's in-cell probability mass exceeds mass_floor, which makes
/// the competitor set deterministic. The Poisson row is kept exact since it
/// doubles as the noise floor for the undetected-object contribution model.
inline ContributionTable mean_contributions(const PMBPosterior& predicted, const CellGrid& grid,
                                            const NoiseModel& noise, double mass_floor = 1e-6) {
    ContributionTable table(grid.num_cells(), predicted.bernoullis.size());

    for (std::size_t j = 0; j < predicted.bernoullis.size(); ++j) {
        const auto& comp = predicted.bernoullis[j];
        std::map<int, double> mass, contrib;
        for (const auto& p : comp.spatial().particles()) {
            const int m = grid.cell_index(p.state);
            if (m < 0) continue;
            mass[m] += p.weight;
            contrib[m] += p.weight * (p.state.gamma + noise.sigma0 * noise.sigma0);
        }
        for (const auto& [m, cell_mass] : mass) {
            if (comp.existence() * cell_mass > mass_floor)
                table.set_bernoulli_entry(j, m, comp.existence() * contrib[m]);
        }
    }

    std::vector<double> poisson(static_cast<std::size_t>(grid.num_cells()), 0.0);
    for (const auto& p : predicted.poisson.support.particles()) {
        const int m = grid.cell_index(p.state);
        if (m < 0) continue;
        poisson[static_cast<std::size_t>(m)] += p.weight * (p.state.gamma + noise.sigma0 * noise.sigma0);
    }
    for (int m = 0; m < grid.num_cells(); ++m)
        if (poisson[static_cast<std::size_t>(m)] > 0.0)
            table.set_poisson_entry(m, poisson[static_cast<std::size_t>(m)]);

    return table;
}

/// Approximate marginal contribution probability p^(j,m,theta)(x) for an
/// object modeled by Bernoulli component j: its own sigma^2 against the
/// average contributions of everything else in the cell.
inline double marginal_contribution_prob(std::size_t j, int m, int theta, const ObjectState& x,
                                         const ContributionTable& table, const CellGrid& grid,
                                         const NoiseModel& noise) {
    const double own = cell_sigma_sq(x, m, grid, noise);
    const double rivals = table.competitor_sum(j, m);
    const double p1 = own / (own + rivals);
    return theta ? p1 : 1.0 - p1;
}

/// Same for a particle of the Poisson intensity carrying weight w.
inline double poisson_contribution_prob(int m, int theta, const ObjectState& x, double w,
                                        const ContributionTable& table, const CellGrid& grid,
                                        const NoiseModel& noise) {
    const double own = cell_sigma_sq(x, m, grid, noise);
    const double rivals = table.competitor_sum_poisson(m, w * own);
    const double p1 = own / (own + rivals);
    return theta ? p1 : 1.0 - p1;
}

} // namespace tbdtrack
