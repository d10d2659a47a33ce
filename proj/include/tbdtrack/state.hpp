#pragma once

#include "tbdtrack/random.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tbdtrack {

/// Single-object state: 2D position, 2D velocity, and nonnegative intensity.
struct ObjectState {
    double px = 0.0;
    double py = 0.0;
    double vx = 0.0;
    double vy = 0.0;
    double gamma = 0.0;

    [[nodiscard]] bool finite() const {
        return std::isfinite(px) && std::isfinite(py) && std::isfinite(vx) &&
               std::isfinite(vy) && std::isfinite(gamma);
    }
};

struct Particle {
    ObjectState state;
    double weight = 0.0;
};

/// Compensated (Neumaier) summation; several invariants in this library are
/// checked at 1e-12 and plain accumulation over large particle sets is not
/// accurate enough for that.
inline double neumaier_sum(std::span<const double> values) {
    double sum = 0.0, comp = 0.0;
    for (double v : values) {
        double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            comp += (sum - t) + v;
        else
            comp += (v - t) + sum;
        sum = t;
    }
    return sum + comp;
}

/// Weighted particle set representing a spatial pdf (normalized) or an
/// intensity function (un-normalized; total weight is the expected count).
class WeightedParticleSet {
public:
    WeightedParticleSet() = default;

    explicit WeightedParticleSet(std::vector<Particle> particles) : particles_(std::move(particles)) {
        for (const auto& p : particles_) validate(p);
    }

    void add(const ObjectState& state, double weight) {
        Particle p{state, weight};
        validate(p);
        particles_.push_back(p);
    }

    void reserve(std::size_t n) { particles_.reserve(n); }
    [[nodiscard]] bool empty() const { return particles_.empty(); }
    [[nodiscard]] std::size_t size() const { return particles_.size(); }

    [[nodiscard]] const std::vector<Particle>& particles() const { return particles_; }
    [[nodiscard]] std::vector<Particle>& particles() { return particles_; }
    [[nodiscard]] const Particle& operator[](std::size_t i) const { return particles_[i]; }

    [[nodiscard]] double total_weight() const {
        double sum = 0.0, comp = 0.0;
        for (const auto& p : particles_) {
            double t = sum + p.weight;
            if (std::abs(sum) >= std::abs(p.weight))
                comp += (sum - t) + p.weight;
            else
                comp += (p.weight - t) + sum;
            sum = t;
        }
        return sum + comp;
    }

    [[nodiscard]] bool is_normalized(double tol = 1e-9) const {
        return std::abs(total_weight() - 1.0) <= tol;
    }

    /// Scale weights so they sum to one. Throws on zero total weight.
    void normalize() {
        double w = total_weight();
        if (!(w > 0.0))
            throw std::domain_error("WeightedParticleSet::normalize: degenerate set with total weight " +
                                    std::to_string(w));
        for (auto& p : particles_) p.weight /= w;
    }

    /// Weighted mean of all state components. Requires positive total weight.
    [[nodiscard]] ObjectState mean_state() const {
        double w = total_weight();
        if (!(w > 0.0))
            throw std::domain_error("WeightedParticleSet::mean_state: degenerate set");
        ObjectState m;
        for (const auto& p : particles_) {
            m.px += p.weight * p.state.px;
            m.py += p.weight * p.state.py;
            m.vx += p.weight * p.state.vx;
            m.vy += p.weight * p.state.vy;
            m.gamma += p.weight * p.state.gamma;
        }
        m.px /= w; m.py /= w; m.vx /= w; m.vy /= w; m.gamma /= w;
        return m;
    }

private:
    static void validate(const Particle& p) {
        if (!(p.weight >= 0.0) || !std::isfinite(p.weight))
            throw std::invalid_argument("WeightedParticleSet: particle weight must be finite and >= 0");
        if (!p.state.finite())
            throw std::invalid_argument("WeightedParticleSet: particle state must be finite");
    }

    std::vector<Particle> particles_;
};

/// Systematic (low-variance) resampling to target_count equally weighted
/// particles. Total weight is preserved.
inline WeightedParticleSet resample(const WeightedParticleSet& set, std::size_t target_count,
                                    RandomEngine& rng) {
    if (target_count < 1)
        throw std::invalid_argument("resample: target_count must be >= 1");
    double total = set.total_weight();
    if (!(total > 0.0))
        throw std::domain_error("resample: degenerate set with zero total weight");

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double step = total / static_cast<double>(target_count);
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng); // keep every grid position strictly inside the CDF
    u *= step;

    WeightedParticleSet out;
    out.reserve(target_count);
    const double w_out = total / static_cast<double>(target_count);
    double cumulative = 0.0;
    std::size_t i = 0;
    const auto& src = set.particles();
    cumulative = src[0].weight;
    for (std::size_t n = 0; n < target_count; ++n) {
        const double pos = u + static_cast<double>(n) * step;
        while (cumulative < pos && i + 1 < src.size()) {
            ++i;
            cumulative += src[i].weight;
        }
        out.add(src[i].state, w_out);
    }
    return out;
}

/// Bernoulli component: existence probability plus a normalized spatial pdf.
class BernoulliComponent {
public:
    BernoulliComponent(double r, WeightedParticleSet spatial, std::uint64_t label)
        : r_(r), spatial_(std::move(spatial)), label_(label) {
        if (!(r >= 0.0 && r <= 1.0))
            throw std::invalid_argument("BernoulliComponent: existence probability outside [0,1]: " +
                                        std::to_string(r));
        if (spatial_.empty())
            throw std::invalid_argument("BernoulliComponent: empty spatial particle set");
        if (!spatial_.is_normalized()) spatial_.normalize();
    }

    [[nodiscard]] double existence() const { return r_; }
    [[nodiscard]] const WeightedParticleSet& spatial() const { return spatial_; }
    [[nodiscard]] std::uint64_t label() const { return label_; }

    void set_existence(double r) {
        if (!(r >= 0.0 && r <= 1.0))
            throw std::invalid_argument("BernoulliComponent: existence probability outside [0,1]");
        r_ = r;
    }

private:
    double r_;
    WeightedParticleSet spatial_;
    std::uint64_t label_;
};

/// Poisson intensity (PHD) as an un-normalized particle set. Total weight is
/// the expected number of undetected objects.
struct PoissonIntensity {
    WeightedParticleSet support;
    std::size_t capacity = 0;

    [[nodiscard]] double mass() const { return support.total_weight(); }
};

/// PMB posterior: Poisson part for undetected objects, Bernoulli components
/// for detected ones.
struct PMBPosterior {
    PoissonIntensity poisson;
    std::vector<BernoulliComponent> bernoullis;
    int time_index = 0;
};

struct TruthObject {
    int id = 0;
    ObjectState state;
};

/// Ground-truth objects alive at one time step.
struct GroundTruthFrame {
    std::vector<TruthObject> objects;
};

/// First moment of the posterior: Poisson mass plus the sum of existence
/// probabilities.
inline double expected_cardinality(const PMBPosterior& p) {
    std::vector<double> terms;
    terms.reserve(p.bernoullis.size() + 1);
    terms.push_back(p.poisson.mass());
    for (const auto& b : p.bernoullis) terms.push_back(b.existence());
    return neumaier_sum(terms);
}

} // namespace tbdtrack
