#pragma once

#include "tbdtrack/assignment.hpp"
#include "tbdtrack/state.hpp"
#include "tbdtrack/update.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace tbdtrack {

struct GospaConfig {
    double c = 10.0;
    double p = 1.0;
    double alpha = 2.0;

    GospaConfig() = default;
    GospaConfig(double c_, double p_, double alpha_) : c(c_), p(p_), alpha(alpha_) {
        if (!(c > 0.0)) throw std::invalid_argument("GospaConfig: cutoff must be > 0");
        if (!(p >= 1.0)) throw std::invalid_argument("GospaConfig: order must be >= 1");
        if (!(alpha > 0.0 && alpha <= 2.0)) throw std::invalid_argument("GospaConfig: alpha outside (0,2]");
    }
};

/// GOSPA error with its decomposition. localization, missed and false_ are
/// the contributions to total^p; for p = 1 they therefore sum to the total
/// exactly and all values are in meters.
struct GospaResult {
    double total = 0.0;
    double localization = 0.0;
    double missed = 0.0;
    double false_ = 0.0;
};

using Point2d = std::pair<double, double>;

/// GOSPA between two 2D point patterns. The optimal sub-pattern assignment
/// is computed exactly: pairs are only kept when matching them beats paying
/// both cardinality penalties, which for a full optimal matching on costs
/// min(d^p, 2c^p/alpha) falls out of the assignment itself.
inline GospaResult gospa_points(const std::vector<Point2d>& truth, const std::vector<Point2d>& est,
                                const GospaConfig& cfg = GospaConfig()) {
    const bool truth_smaller = truth.size() <= est.size();
    const auto& small = truth_smaller ? truth : est;
    const auto& large = truth_smaller ? est : truth;

    const double penalty = std::pow(cfg.c, cfg.p) / cfg.alpha;
    GospaResult result;

    double small_unmatched = 0.0;
    double matched_loc = 0.0;
    std::size_t dropped = 0;

    if (!small.empty()) {
        Eigen::MatrixXd cost(small.size(), large.size());
        for (std::size_t i = 0; i < small.size(); ++i) {
            for (std::size_t j = 0; j < large.size(); ++j) {
                const double d = std::hypot(small[i].first - large[j].first,
                                            small[i].second - large[j].second);
                cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    std::min(std::pow(d, cfg.p), 2.0 * penalty);
            }
        }
        const AssignmentResult assignment = solve_assignment(cost);
        for (std::size_t i = 0; i < small.size(); ++i) {
            const double cell = cost(static_cast<Eigen::Index>(i), assignment.row_to_col[i]);
            if (cell < 2.0 * penalty) {
                matched_loc += cell;
            } else {
                ++dropped; // cheaper to leave both unassigned
            }
        }
        small_unmatched = static_cast<double>(dropped);
    } else {
        small_unmatched = 0.0;
    }

    const double large_unmatched = static_cast<double>(large.size() - small.size()) + small_unmatched;

    result.localization = matched_loc;
    const double truth_unmatched = truth_smaller ? small_unmatched : large_unmatched;
    const double est_unmatched = truth_smaller ? large_unmatched : small_unmatched;
    result.missed = penalty * truth_unmatched;
    result.false_ = penalty * est_unmatched;
    result.total = std::pow(result.localization + result.missed + result.false_, 1.0 / cfg.p);
    return result;
}

inline GospaResult gospa(const GroundTruthFrame& truth, const EstimateSet& est,
                         const GospaConfig& cfg = GospaConfig()) {
    std::vector<Point2d> t, e;
    t.reserve(truth.objects.size());
    for (const auto& o : truth.objects) t.emplace_back(o.state.px, o.state.py);
    e.reserve(est.estimates.size());
    for (const auto& o : est.estimates) e.emplace_back(o.state.px, o.state.py);
    return gospa_points(t, e, cfg);
}

} // namespace tbdtrack
