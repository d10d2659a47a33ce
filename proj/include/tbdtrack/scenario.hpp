#pragma once

#include "tbdtrack/grid.hpp"
#include "tbdtrack/prediction.hpp"
#include "tbdtrack/random.hpp"
#include "tbdtrack/state.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace tbdtrack {

/// Scripted object: born at `birth`, dies after `death` (both 1-based and
/// inclusive), moving either on an exact constant-velocity line or under a
/// seeded nearly-constant-velocity walk.
struct ObjectScript {
    int id = 0;
    int birth = 1;
    int death = 1;
    ObjectState initial;
    enum class Motion { constant_velocity, noisy_cv } motion = Motion::constant_velocity;
};

struct Scenario {
    CellGrid grid;
    int num_steps = 0;
    double sigma_n = 1.0;
    std::uint64_t seed = 0;
    int interaction_step = 0; // 0 when the scenario has no scripted interaction
    double motion_noise = 1e-3;
    std::vector<ObjectScript> objects;
};

namespace detail {

inline void validate_scenario(const Scenario& s) {
    if (s.num_steps < 1) throw std::invalid_argument("scenario: num_steps must be >= 1");
    if (!(s.sigma_n > 0.0)) throw std::invalid_argument("scenario: sigma_n must be > 0");
    std::set<int> ids;
    for (const auto& o : s.objects)
        if (!ids.insert(o.id).second)
            throw std::invalid_argument("scenario: duplicate object id " + std::to_string(o.id));
    for (const auto& o : s.objects) {
        if (o.birth < 1 || o.birth >= o.death || o.death > s.num_steps)
            throw std::invalid_argument("scenario: object " + std::to_string(o.id) +
                                        " needs 1 <= birth < death <= num_steps");
        if (!(o.initial.gamma >= 0.0))
            throw std::invalid_argument("scenario: object " + std::to_string(o.id) +
                                        " has negative intensity");
    }
}

} // namespace detail

/// Deterministic ground truth for all time steps 1..num_steps. Throws if a
/// script leaves the ROI while alive.
inline std::vector<GroundTruthFrame> generate_truth(const Scenario& s) {
    detail::validate_scenario(s);
    std::vector<GroundTruthFrame> frames(static_cast<std::size_t>(s.num_steps));

    constexpr std::uint64_t kTruthStream = 0x7472757468ULL;
    for (const auto& o : s.objects) {
        ObjectState x = o.initial;
        RandomEngine rng = make_engine(s.seed, {kTruthStream, static_cast<std::uint64_t>(o.id)});
        TransitionModel tm = TransitionModel::ncv(1.0, s.motion_noise, 0.0, 1.0);
        for (int k = o.birth; k <= o.death; ++k) {
            if (k > o.birth) {
                if (o.motion == ObjectScript::Motion::constant_velocity) {
                    x.px += x.vx;
                    x.py += x.vy;
                } else {
                    x = tm.propagate(x, rng);
                }
            }
            if (!s.grid.contains(x.px, x.py))
                throw std::invalid_argument("scenario: object " + std::to_string(o.id) +
                                            " leaves the ROI at step " + std::to_string(k));
            frames[static_cast<std::size_t>(k - 1)].objects.push_back(TruthObject{o.id, x});
        }
    }
    return frames;
}

/// Swerling-1 frame: each cell is Rayleigh with scale sigma_n plus the sum of
/// the square-root intensities of its occupants.
inline Frame render_frame(const GroundTruthFrame& truth, const CellGrid& grid, double sigma_n,
                          RandomEngine& rng) {
    std::vector<double> scale(static_cast<std::size_t>(grid.num_cells()), sigma_n);
    for (const auto& o : truth.objects) {
        const int m = grid.cell_index(o.state);
        if (m >= 0) scale[static_cast<std::size_t>(m)] += std::sqrt(o.state.gamma);
    }
    std::vector<double> z(scale.size());
    for (std::size_t m = 0; m < scale.size(); ++m) z[m] = sample_rayleigh(scale[m], rng);
    return Frame(grid, std::move(z));
}

struct RadialCrossingSpec {
    int num_objects = 4;
    double gamma = 10.0;
    int interaction_step = 40;
    int first_birth = 2;
    int birth_spacing = 4;
    int first_death = 70;
    int death_spacing = 3;
    double speed = 0.17;
    double crossing_radius = 0.25;
};

/// Scripted crossing pattern: objects approach the central cell from spread
/// directions, pass through it together at the interaction step, and exit.
inline std::vector<ObjectScript> make_radial_crossing(const CellGrid& grid,
                                                      const RadialCrossingSpec& spec) {
    if (spec.num_objects < 1) throw std::invalid_argument("radial crossing: need at least one object");
    const int center_cell = grid.cell_index(grid.origin_x + grid.width() / 2.0,
                                            grid.origin_y + grid.height() / 2.0);
    const auto [cx, cy] = grid.cell_center(center_cell);

    std::vector<ObjectScript> objects;
    for (int i = 0; i < spec.num_objects; ++i) {
        const double phi = 2.0 * M_PI * i / spec.num_objects + 0.37;
        const double psi = phi + M_PI / 2.0;
        const double tx = cx + spec.crossing_radius * std::cos(psi);
        const double ty = cy + spec.crossing_radius * std::sin(psi);
        ObjectScript o;
        o.id = i + 1;
        o.birth = spec.first_birth + i * spec.birth_spacing;
        o.death = spec.first_death + i * spec.death_spacing;
        o.initial.vx = spec.speed * std::cos(phi);
        o.initial.vy = spec.speed * std::sin(phi);
        o.initial.px = tx - o.initial.vx * (spec.interaction_step - o.birth);
        o.initial.py = ty - o.initial.vy * (spec.interaction_step - o.birth);
        o.initial.gamma = spec.gamma;
        objects.push_back(o);
    }
    return objects;
}

// ---- Scenario files (JSON) ----

inline Scenario scenario_from_json(const nlohmann::json& j) {
    auto require = [&](const nlohmann::json& node, const char* key, const std::string& path) -> const nlohmann::json& {
        if (!node.contains(key))
            throw std::invalid_argument("scenario: missing field " + path);
        return node.at(key);
    };

    Scenario s;
    const auto& g = require(j, "grid", "grid");
    s.grid = CellGrid(require(g, "nx", "grid.nx").get<int>(),
                      require(g, "ny", "grid.ny").get<int>(),
                      require(g, "cell_size", "grid.cell_size").get<double>(),
                      g.value("origin_x", 0.0), g.value("origin_y", 0.0));
    s.num_steps = require(j, "num_steps", "num_steps").get<int>();
    s.sigma_n = j.value("sigma_n", 1.0);
    s.seed = j.value("seed", std::uint64_t{0});
    s.interaction_step = j.value("interaction_step", 0);
    s.motion_noise = j.value("motion_noise", 1e-3);

    if (j.contains("generator")) {
        const auto& gen = j.at("generator");
        const std::string type = require(gen, "type", "generator.type").get<std::string>();
        if (type != "radial-crossing")
            throw std::invalid_argument("scenario: unknown generator type " + type);
        RadialCrossingSpec spec;
        spec.num_objects = gen.value("num_objects", spec.num_objects);
        spec.gamma = gen.value("gamma", spec.gamma);
        spec.interaction_step = gen.value("interaction_step", s.interaction_step);
        spec.first_birth = gen.value("first_birth", spec.first_birth);
        spec.birth_spacing = gen.value("birth_spacing", spec.birth_spacing);
        spec.first_death = gen.value("first_death", spec.first_death);
        spec.death_spacing = gen.value("death_spacing", spec.death_spacing);
        spec.speed = gen.value("speed", spec.speed);
        spec.crossing_radius = gen.value("crossing_radius", spec.crossing_radius);
        if (s.interaction_step == 0) s.interaction_step = spec.interaction_step;
        s.objects = make_radial_crossing(s.grid, spec);
    }

    if (j.contains("objects")) {
        std::size_t idx = 0;
        for (const auto& node : j.at("objects")) {
            const std::string path = "objects[" + std::to_string(idx++) + "]";
            ObjectScript o;
            o.id = require(node, "id", path + ".id").get<int>();
            o.birth = require(node, "birth", path + ".birth").get<int>();
            o.death = require(node, "death", path + ".death").get<int>();
            o.initial.px = require(node, "px", path + ".px").get<double>();
            o.initial.py = require(node, "py", path + ".py").get<double>();
            o.initial.vx = node.value("vx", 0.0);
            o.initial.vy = node.value("vy", 0.0);
            o.initial.gamma = require(node, "gamma", path + ".gamma").get<double>();
            const std::string motion = node.value("motion", "cv");
            if (motion == "cv")
                o.motion = ObjectScript::Motion::constant_velocity;
            else if (motion == "ncv")
                o.motion = ObjectScript::Motion::noisy_cv;
            else
                throw std::invalid_argument("scenario: unknown motion type at " + path + ".motion");
            s.objects.push_back(o);
        }
    }

    detail::validate_scenario(s);
    return s;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_scenario: cannot open " + path);
    nlohmann::json j;
    is >> j;
    return scenario_from_json(j);
}

} // namespace tbdtrack
