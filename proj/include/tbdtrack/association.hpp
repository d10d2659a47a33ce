#pragma once

#include "tbdtrack/state.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tbdtrack {

/// Association weights for one legacy Bernoulli component and one cell.
/// beta_nocontrib is the weight of "exists, located in the cell, does not
/// contribute"; beta_contrib of "exists, located in the cell, contributes".
struct CellWeight {
    int cell = -1;
    double beta_nocontrib = 0.0;
    double beta_contrib = 0.0;
};

struct LegacyWeightRow {
    double beta_empty = 0.0;          // object does not exist
    std::vector<CellWeight> cells;    // sparse; only cells with support
};

/// Weight of the per-cell new component: `total` plays the role of
/// beta'^(m,0) = f0(z^(m)) + d^(m) (up to a per-cell normalization constant),
/// `exist` is the d^(m) part, so the conditional existence probability of the
/// new component is exist / total.
struct NewComponentWeight {
    double total = 1.0;
    double exist = 0.0;
};

/// Full association-weight table for one frame. Weights are relative: any
/// per-cell common factor on {beta_contrib column, new-component total} has
/// been divided out for numerical stability.
struct AssociationWeights {
    std::vector<LegacyWeightRow> legacy;
    std::vector<NewComponentWeight> cells; // dense, one per cell

    [[nodiscard]] std::size_t num_legacy() const { return legacy.size(); }
    [[nodiscard]] std::size_t num_cells() const { return cells.size(); }
};

struct CellBelief {
    int cell = -1;
    double nocontrib = 0.0;
    double contrib = 0.0;
};

struct LegacyBeliefs {
    double not_exist = 0.0;
    std::vector<CellBelief> cells;

    [[nodiscard]] double existence() const {
        double r = 0.0;
        for (const auto& c : cells) r += c.nocontrib + c.contrib;
        return std::min(1.0, r);
    }
};

/// Marginal association pmfs: one pmf over {(m,0),(m,1)} + nonexistence per
/// legacy component, and per cell the probability that no legacy component
/// claims it (which gates the new component's existence).
struct BeliefTable {
    std::vector<LegacyBeliefs> legacy;
    std::vector<double> cell_unclaimed;
    bool converged = true;
    int iterations = 0;

    /// Posterior existence probability of the new component in cell m.
    [[nodiscard]] double new_component_existence(int m, const AssociationWeights& w) const {
        const auto& cw = w.cells.at(static_cast<std::size_t>(m));
        return cell_unclaimed.at(static_cast<std::size_t>(m)) * (cw.exist / cw.total);
    }
};

struct BpConfig {
    int max_iterations = 200;
    double convergence_tol = 1e-6; // max absolute log-domain message change
    double damping = 0.0;          // in [0,1)

    BpConfig() = default;
    BpConfig(int iters, double tol, double damp)
        : max_iterations(iters), convergence_tol(tol), damping(damp) {
        if (max_iterations < 1) throw std::invalid_argument("BpConfig: max_iterations must be >= 1");
        if (!(convergence_tol > 0.0)) throw std::invalid_argument("BpConfig: tol must be > 0");
        if (!(damping >= 0.0 && damping < 1.0)) throw std::invalid_argument("BpConfig: damping outside [0,1)");
    }
};

namespace detail {

inline void validate_weights(const AssociationWeights& w) {
    for (std::size_t j = 0; j < w.legacy.size(); ++j) {
        const auto& row = w.legacy[j];
        double total = row.beta_empty;
        if (!(row.beta_empty >= 0.0) || !std::isfinite(row.beta_empty))
            throw std::runtime_error("association weights: invalid beta_empty for component " +
                                     std::to_string(j));
        for (const auto& c : row.cells) {
            if (c.cell < 0 || static_cast<std::size_t>(c.cell) >= w.cells.size())
                throw std::runtime_error("association weights: cell index out of range for component " +
                                         std::to_string(j) + ": " + std::to_string(c.cell));
            if (!(c.beta_nocontrib >= 0.0) || !std::isfinite(c.beta_nocontrib) ||
                !(c.beta_contrib >= 0.0) || !std::isfinite(c.beta_contrib))
                throw std::runtime_error("association weights: invalid entry for component " +
                                         std::to_string(j) + ", cell " + std::to_string(c.cell));
            total += c.beta_nocontrib + c.beta_contrib;
        }
        if (!(total > 0.0))
            throw std::runtime_error("association weights: all-zero row for component " +
                                     std::to_string(j));
    }
    for (std::size_t m = 0; m < w.cells.size(); ++m) {
        if (!(w.cells[m].total > 0.0) || !std::isfinite(w.cells[m].total) ||
            !(w.cells[m].exist >= 0.0) || w.cells[m].exist > w.cells[m].total)
            throw std::runtime_error("association weights: invalid new-component weight for cell " +
                                     std::to_string(m));
    }
}

} // namespace detail

inline void dump_association_instance(const AssociationWeights& w, const BeliefTable* beliefs,
                                      std::ostream& os);

/// Loopy BP for the marginal association pmfs. Messages zeta (component ->
/// cell) and nu (cell -> component) are exchanged synchronously until the
/// maximum log-domain change drops below the tolerance or the iteration cap
/// is hit; non-convergence is reported on the result, beliefs are still
/// returned.
inline BeliefTable run_bp(const AssociationWeights& w, const BpConfig& cfg = BpConfig()) {
    detail::validate_weights(w);
    constexpr double kDenomFloor = 1e-300;

    const std::size_t num_legacy = w.legacy.size();

    // Edges: (j, m) pairs with positive contribution weight.
    struct Edge {
        std::size_t j;
        int m;
        double beta1;
        double zeta = 0.0;
        double nu = 1.0;
    };
    std::vector<Edge> edges;
    std::vector<std::vector<std::size_t>> edges_of_legacy(num_legacy);
    std::vector<std::vector<std::size_t>> edges_of_cell(w.cells.size());
    std::vector<double> beta_idle(num_legacy); // beta^(j,0): empty + all no-contribute mass
    for (std::size_t j = 0; j < num_legacy; ++j) {
        double idle = w.legacy[j].beta_empty;
        for (const auto& c : w.legacy[j].cells) {
            idle += c.beta_nocontrib;
            if (c.beta_contrib > 0.0) {
                edges_of_legacy[j].push_back(edges.size());
                edges_of_cell.at(static_cast<std::size_t>(c.cell)).push_back(edges.size());
                edges.push_back(Edge{j, c.cell, c.beta_contrib});
            }
        }
        beta_idle[j] = idle;
    }

    BeliefTable result;
    int iter = 0;
    double change = 0.0;
    for (iter = 1; iter <= cfg.max_iterations; ++iter) {
        // zeta updates (component -> cell)
        for (std::size_t j = 0; j < num_legacy; ++j) {
            double sum = 0.0;
            for (std::size_t e : edges_of_legacy[j]) sum += edges[e].beta1 * edges[e].nu;
            for (std::size_t e : edges_of_legacy[j]) {
                double denom = beta_idle[j] + sum - edges[e].beta1 * edges[e].nu;
                if (denom < kDenomFloor) denom = kDenomFloor;
                const double fresh = edges[e].beta1 / denom;
                edges[e].zeta = cfg.damping * edges[e].zeta + (1.0 - cfg.damping) * fresh;
            }
        }
        // nu updates (cell -> component)
        change = 0.0;
        for (std::size_t m = 0; m < w.cells.size(); ++m) {
            if (edges_of_cell[m].empty()) continue;
            double sum = 0.0;
            for (std::size_t e : edges_of_cell[m]) sum += edges[e].zeta;
            for (std::size_t e : edges_of_cell[m]) {
                double denom = w.cells[m].total + sum - edges[e].zeta;
                if (denom < kDenomFloor) denom = kDenomFloor;
                const double fresh = 1.0 / denom;
                const double next = cfg.damping * edges[e].nu + (1.0 - cfg.damping) * fresh;
                change = std::max(change, std::abs(std::log(next) - std::log(edges[e].nu)));
                edges[e].nu = next;
            }
        }
        if (change < cfg.convergence_tol) break;
    }
    result.iterations = std::min(iter, cfg.max_iterations);
    result.converged = change < cfg.convergence_tol;

    // Beliefs for legacy components.
    result.legacy.resize(num_legacy);
    for (std::size_t j = 0; j < num_legacy; ++j) {
        double norm = beta_idle[j];
        for (std::size_t e : edges_of_legacy[j]) norm += edges[e].beta1 * edges[e].nu;
        if (norm < kDenomFloor) {
            std::ostringstream dump;
            dump_association_instance(w, nullptr, dump);
            throw std::runtime_error("run_bp: zero belief normalizer for component " +
                                     std::to_string(j) + "\n" + dump.str());
        }
        LegacyBeliefs lb;
        lb.not_exist = w.legacy[j].beta_empty / norm;
        for (const auto& c : w.legacy[j].cells) {
            CellBelief cb;
            cb.cell = c.cell;
            cb.nocontrib = c.beta_nocontrib / norm;
            cb.contrib = 0.0;
            lb.cells.push_back(cb);
        }
        for (std::size_t e : edges_of_legacy[j]) {
            for (auto& cb : lb.cells)
                if (cb.cell == edges[e].m) cb.contrib = edges[e].beta1 * edges[e].nu / norm;
        }
        result.legacy[j] = std::move(lb);
    }

    // Per-cell probability that no legacy component claims the cell.
    result.cell_unclaimed.assign(w.cells.size(), 1.0);
    for (std::size_t m = 0; m < w.cells.size(); ++m) {
        if (edges_of_cell[m].empty()) continue;
        double sum = 0.0;
        for (std::size_t e : edges_of_cell[m]) sum += edges[e].zeta;
        result.cell_unclaimed[m] = w.cells[m].total / (w.cells[m].total + sum);
    }
    return result;
}

/// Exact marginal association pmfs by enumerating all admissible
/// configurations (each cell claimed by at most one legacy component).
/// Intended for small instances; refuses when the configuration count
/// exceeds max_configs.
inline BeliefTable exact_marginals(const AssociationWeights& w, double max_configs = 1e7) {
    detail::validate_weights(w);

    struct Option {
        int cell;   // -1 for "does not exist"
        int theta;  // 0 or 1; claims the cell iff theta == 1
        double beta;
    };
    const std::size_t num_legacy = w.legacy.size();
    std::vector<std::vector<Option>> options(num_legacy);
    double config_count = 1.0;
    for (std::size_t j = 0; j < num_legacy; ++j) {
        auto& opts = options[j];
        opts.push_back(Option{-1, 0, w.legacy[j].beta_empty});
        for (const auto& c : w.legacy[j].cells) {
            if (c.beta_nocontrib > 0.0) opts.push_back(Option{c.cell, 0, c.beta_nocontrib});
            if (c.beta_contrib > 0.0) opts.push_back(Option{c.cell, 1, c.beta_contrib});
        }
        config_count *= static_cast<double>(opts.size());
        if (config_count > max_configs)
            throw std::runtime_error("exact_marginals: instance too large to enumerate (" +
                                     std::to_string(config_count) + " configurations)");
    }

    // Accumulators. A configuration's weight is prod_j beta_j divided by the
    // new-component weight of each claimed cell (the constant prod_m beta'_m
    // common to all configurations has been factored out).
    std::vector<std::vector<double>> option_mass(num_legacy);
    for (std::size_t j = 0; j < num_legacy; ++j) option_mass[j].assign(options[j].size(), 0.0);
    std::vector<double> claimed_mass(w.cells.size(), 0.0);
    double total_mass = 0.0;

    std::vector<std::size_t> pick(num_legacy, 0);
    std::vector<char> claimed(w.cells.size(), 0);

    auto recurse = [&](auto&& self, std::size_t j, double weight) -> void {
        if (weight == 0.0) return;
        if (j == num_legacy) {
            total_mass += weight;
            for (std::size_t i = 0; i < num_legacy; ++i) option_mass[i][pick[i]] += weight;
            for (std::size_t m = 0; m < claimed.size(); ++m)
                if (claimed[m]) claimed_mass[m] += weight;
            return;
        }
        for (std::size_t o = 0; o < options[j].size(); ++o) {
            const Option& opt = options[j][o];
            pick[j] = o;
            if (opt.theta == 1) {
                const auto m = static_cast<std::size_t>(opt.cell);
                if (claimed[m]) continue; // admissibility: one contributor per cell
                claimed[m] = 1;
                self(self, j + 1, weight * opt.beta / w.cells[m].total);
                claimed[m] = 0;
            } else {
                self(self, j + 1, weight * opt.beta);
            }
        }
    };
    recurse(recurse, 0, 1.0);

    if (!(total_mass > 0.0))
        throw std::runtime_error("exact_marginals: no admissible configuration has positive weight");

    BeliefTable result;
    result.converged = true;
    result.iterations = 0;
    result.legacy.resize(num_legacy);
    for (std::size_t j = 0; j < num_legacy; ++j) {
        LegacyBeliefs lb;
        lb.not_exist = 0.0;
        for (const auto& c : w.legacy[j].cells) lb.cells.push_back(CellBelief{c.cell, 0.0, 0.0});
        for (std::size_t o = 0; o < options[j].size(); ++o) {
            const Option& opt = options[j][o];
            const double p = option_mass[j][o] / total_mass;
            if (opt.cell < 0) {
                lb.not_exist += p;
            } else {
                for (auto& cb : lb.cells) {
                    if (cb.cell == opt.cell) {
                        if (opt.theta == 1)
                            cb.contrib += p;
                        else
                            cb.nocontrib += p;
                    }
                }
            }
        }
        result.legacy[j] = std::move(lb);
    }
    result.cell_unclaimed.resize(w.cells.size());
    for (std::size_t m = 0; m < w.cells.size(); ++m)
        result.cell_unclaimed[m] = 1.0 - claimed_mass[m] / total_mass;
    return result;
}

/// Structured text dump of an association instance for offline inspection.
inline void dump_association_instance(const AssociationWeights& w, const BeliefTable* beliefs,
                                      std::ostream& os) {
    os.precision(12);
    os << "association instance: " << w.num_legacy() << " legacy components, " << w.num_cells()
       << " cells\n";
    for (std::size_t j = 0; j < w.legacy.size(); ++j) {
        os << "legacy " << j << " beta_empty " << w.legacy[j].beta_empty << '\n';
        for (const auto& c : w.legacy[j].cells)
            os << "  cell " << c.cell << " beta_nocontrib " << c.beta_nocontrib << " beta_contrib "
               << c.beta_contrib << '\n';
    }
    for (std::size_t m = 0; m < w.cells.size(); ++m)
        if (w.cells[m].exist > 0.0 || w.cells[m].total != 1.0)
            os << "cell " << m << " new total " << w.cells[m].total << " exist " << w.cells[m].exist
               << '\n';
    if (beliefs) {
        os << "beliefs (converged " << beliefs->converged << ", iterations " << beliefs->iterations
           << ")\n";
        for (std::size_t j = 0; j < beliefs->legacy.size(); ++j) {
            os << "legacy " << j << " not_exist " << beliefs->legacy[j].not_exist << '\n';
            for (const auto& c : beliefs->legacy[j].cells)
                os << "  cell " << c.cell << " nocontrib " << c.nocontrib << " contrib " << c.contrib
                   << '\n';
        }
    }
}

inline void dump_association_instance(const AssociationWeights& w, const BeliefTable* beliefs,
                                      const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("dump_association_instance: cannot open " + path);
    dump_association_instance(w, beliefs, os);
}

} // namespace tbdtrack
