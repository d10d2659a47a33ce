#pragma once

#include "tbdtrack/grid.hpp"
#include "tbdtrack/random.hpp"
#include "tbdtrack/state.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>

namespace tbdtrack {

/// Nearly-constant-velocity transition with an intensity random walk.
/// Kinematics: p_k = A p_{k-1} + W w_k with w_k ~ N(0, q_kin I_2);
/// intensity: gamma_k = max(0, gamma_{k-1} + eps_k) with eps_k ~ N(0, q_int).
struct TransitionModel {
    Eigen::Matrix4d A = Eigen::Matrix4d::Identity();
    Eigen::Matrix<double, 4, 2> W = Eigen::Matrix<double, 4, 2>::Zero();
    double q_kin = 1e-3;
    double q_int = 1e-2;
    double p_s = 0.999;

    /// Standard NCV discretization with sampling period T.
    static TransitionModel ncv(double T = 1.0, double q_kin = 1e-3, double q_int = 1e-2,
                               double p_s = 0.999) {
        if (!(p_s > 0.0 && p_s <= 1.0))
            throw std::invalid_argument("TransitionModel: survival probability outside (0,1]");
        if (q_kin < 0.0 || q_int < 0.0)
            throw std::invalid_argument("TransitionModel: noise variances must be >= 0");
        TransitionModel tm;
        tm.A << 1, 0, T, 0,
                0, 1, 0, T,
                0, 0, 1, 0,
                0, 0, 0, 1;
        tm.W << T * T / 2, 0,
                0, T * T / 2,
                T, 0,
                0, T;
        tm.q_kin = q_kin;
        tm.q_int = q_int;
        tm.p_s = p_s;
        return tm;
    }

    /// Survival probability hook; constant in the shipped experiments.
    [[nodiscard]] double survival(const ObjectState&) const { return p_s; }

    [[nodiscard]] ObjectState propagate(const ObjectState& x, RandomEngine& rng) const {
        std::normal_distribution<double> kin(0.0, std::sqrt(q_kin));
        std::normal_distribution<double> intensity(0.0, std::sqrt(q_int));
        Eigen::Vector4d p(x.px, x.py, x.vx, x.vy);
        Eigen::Vector2d w(kin(rng), kin(rng));
        Eigen::Vector4d out = A * p + W * w;
        ObjectState y;
        y.px = out[0];
        y.py = out[1];
        y.vx = out[2];
        y.vy = out[3];
        y.gamma = std::max(0.0, x.gamma + intensity(rng)); // intensity is a power
        return y;
    }
};

/// Birth PHD: expected mu_b new objects per step, positions uniform over the
/// ROI, velocities zero-mean isotropic Gaussian, intensity uniform on
/// [0, gamma_max].
struct BirthModel {
    double mu_b = 0.1;
    double roi_x0 = 0.0, roi_y0 = 0.0, roi_x1 = 1.0, roi_y1 = 1.0;
    double sigma_v_sq = 0.1;
    double gamma_max = 30.0;
    std::size_t particles_per_step = 50000;

    static BirthModel over_grid(const CellGrid& grid, double mu_b = 0.1, double sigma_v_sq = 0.1,
                                double gamma_max = 30.0, std::size_t particles_per_step = 50000) {
        if (mu_b < 0.0) throw std::invalid_argument("BirthModel: mu_b must be >= 0");
        BirthModel b;
        b.mu_b = mu_b;
        b.roi_x0 = grid.origin_x;
        b.roi_y0 = grid.origin_y;
        b.roi_x1 = grid.max_x();
        b.roi_y1 = grid.max_y();
        b.sigma_v_sq = sigma_v_sq;
        b.gamma_max = gamma_max;
        b.particles_per_step = particles_per_step;
        return b;
    }

    [[nodiscard]] ObjectState sample(RandomEngine& rng) const {
        std::uniform_real_distribution<double> ux(roi_x0, roi_x1);
        std::uniform_real_distribution<double> uy(roi_y0, roi_y1);
        std::normal_distribution<double> v(0.0, std::sqrt(sigma_v_sq));
        std::uniform_real_distribution<double> g(0.0, gamma_max);
        ObjectState x;
        x.px = ux(rng);
        x.py = uy(rng);
        x.vx = v(rng);
        x.vy = v(rng);
        x.gamma = g(rng);
        return x;
    }
};

/// Bernoulli prediction: r' = r * E_f[p_S], spatial pdf reweighted by the
/// survival probability and propagated. For the constant p_S used in the
/// experiments this is r' = r * p_s with weights unchanged.
inline BernoulliComponent predict_bernoulli(const BernoulliComponent& b, const TransitionModel& tm,
                                            RandomEngine& rng) {
    double survival_mean = 0.0;
    for (const auto& p : b.spatial().particles()) survival_mean += p.weight * tm.survival(p.state);
    WeightedParticleSet predicted;
    predicted.reserve(b.spatial().size());
    for (const auto& p : b.spatial().particles()) {
        const double w = survival_mean > 0.0 ? p.weight * tm.survival(p.state) / survival_mean : p.weight;
        predicted.add(tm.propagate(p.state, rng), w);
    }
    const double r = std::min(1.0, b.existence() * survival_mean);
    return BernoulliComponent(r, std::move(predicted), b.label());
}

/// PHD prediction: survivors keep their support with weights scaled by p_s,
/// birth particles carry total weight mu_b. Output mass is p_s * mass + mu_b.
inline PoissonIntensity predict_phd(const PoissonIntensity& phd, const TransitionModel& tm,
                                    const BirthModel& birth, RandomEngine& rng) {
    PoissonIntensity out;
    out.capacity = phd.capacity;
    out.support.reserve(phd.support.size() + birth.particles_per_step);
    for (const auto& p : phd.support.particles())
        out.support.add(tm.propagate(p.state, rng), p.weight * tm.survival(p.state));
    if (birth.particles_per_step > 0 && birth.mu_b > 0.0) {
        const double w = birth.mu_b / static_cast<double>(birth.particles_per_step);
        for (std::size_t i = 0; i < birth.particles_per_step; ++i)
            out.support.add(birth.sample(rng), w);
    }
    return out;
}

/// Full PMB prediction; the Bernoulli count is unchanged.
inline PMBPosterior predict(const PMBPosterior& p, const TransitionModel& tm, const BirthModel& birth,
                            RandomEngine& rng) {
    PMBPosterior out;
    out.time_index = p.time_index + 1;
    out.poisson = predict_phd(p.poisson, tm, birth, rng);
    out.bernoullis.reserve(p.bernoullis.size());
    for (const auto& b : p.bernoullis) out.bernoullis.push_back(predict_bernoulli(b, tm, rng));
    return out;
}

} // namespace tbdtrack
