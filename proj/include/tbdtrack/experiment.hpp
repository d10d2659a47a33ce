#pragma once

#include "tbdtrack/filter.hpp"
#include "tbdtrack/gospa.hpp"
#include "tbdtrack/scenario.hpp"
#include "tbdtrack/stats.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace tbdtrack {

struct ExperimentConfig {
    std::string scenario_path;
    Scenario scenario;
    FilterMode mode = FilterMode::pmbf_ac;
    int num_runs = 1;
    std::uint64_t master_seed = 1;
    std::string output_dir = "out";
    unsigned threads = 0; // 0 = hardware concurrency
    bool dump_estimates = false;
    int window_start = 0; // interaction window for mode comparison (1-based steps)
    int window_end = 0;

    // Filter parameters; the BirthModel ROI comes from the scenario grid.
    std::size_t particles_per_bernoulli = 3000;
    std::size_t phd_capacity = 50000;
    std::size_t birth_particles = 50000;
    double survival_probability = 0.999;
    double kinematic_noise = 1e-3;
    double intensity_noise = 1e-2;
    double birth_mean = 0.1;
    double birth_velocity_var = 0.1;
    double birth_gamma_max = 30.0;
    double noise_sigma0 = 1.0;
    double recycle_threshold = 0.1;
    double declare_threshold = 0.5;
    double birth_significance_floor = 1e-4;
    double competitor_mass_floor = 1e-6;
    BpConfig bp;
    GospaConfig gospa_cfg;

    std::uint64_t config_hash = 0;

    [[nodiscard]] FilterParams filter_params(FilterMode m) const {
        FilterParams p;
        p.mode = m;
        p.noise = NoiseModel(noise_sigma0);
        p.transition = TransitionModel::ncv(1.0, kinematic_noise, intensity_noise, survival_probability);
        p.birth = BirthModel::over_grid(scenario.grid, birth_mean, birth_velocity_var, birth_gamma_max,
                                        birth_particles);
        p.bp = bp;
        p.particles_per_bernoulli = particles_per_bernoulli;
        p.phd_capacity = phd_capacity;
        p.recycle_threshold = recycle_threshold;
        p.declare_threshold = declare_threshold;
        p.birth_significance_floor = birth_significance_floor;
        p.competitor_mass_floor = competitor_mass_floor;
        return p;
    }
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <typename T>
T require_field(const nlohmann::json& node, const char* key, const std::string& path) {
    if (!node.contains(key)) throw std::invalid_argument("config: missing field " + path);
    try {
        return node.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config: bad value at " + path + ": " + e.what());
    }
}

inline std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string());
        os << content;
        os.flush();
        if (!os) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

} // namespace detail

inline FilterMode parse_mode(const std::string& s) {
    if (s == "pmbf-ac") return FilterMode::pmbf_ac;
    if (s == "pmbf-a") return FilterMode::pmbf_a;
    throw std::invalid_argument("config: unknown filter mode '" + s + "' (expected pmbf-ac or pmbf-a)");
}

inline ExperimentConfig experiment_from_json(const nlohmann::json& j, const std::string& base_dir = ".") {
    ExperimentConfig cfg;
    cfg.scenario_path = detail::require_field<std::string>(j, "scenario", "scenario");
    std::filesystem::path sp(cfg.scenario_path);
    if (sp.is_relative()) sp = std::filesystem::path(base_dir) / sp;
    cfg.scenario = load_scenario(sp.string());
    cfg.mode = parse_mode(j.value("mode", std::string("pmbf-ac")));
    cfg.num_runs = detail::require_field<int>(j, "num_runs", "num_runs");
    if (cfg.num_runs < 1) throw std::invalid_argument("config: num_runs must be >= 1");
    cfg.master_seed = detail::require_field<std::uint64_t>(j, "master_seed", "master_seed");
    cfg.output_dir = j.value("output_dir", std::string("out"));
    cfg.threads = j.value("threads", 0u);
    cfg.dump_estimates = j.value("dump_estimates", false);

    if (j.contains("interaction_window")) {
        const auto& w = j.at("interaction_window");
        cfg.window_start = detail::require_field<int>(w, "start", "interaction_window.start");
        cfg.window_end = detail::require_field<int>(w, "end", "interaction_window.end");
    } else if (cfg.scenario.interaction_step > 0) {
        cfg.window_start = std::max(1, cfg.scenario.interaction_step - 10);
        cfg.window_end = std::min(cfg.scenario.num_steps, cfg.scenario.interaction_step + 10);
    } else {
        cfg.window_start = 1;
        cfg.window_end = cfg.scenario.num_steps;
    }
    if (cfg.window_start < 1 || cfg.window_end > cfg.scenario.num_steps ||
        cfg.window_start > cfg.window_end)
        throw std::invalid_argument("config: interaction_window outside scenario steps");

    if (j.contains("filter")) {
        const auto& f = j.at("filter");
        cfg.particles_per_bernoulli = f.value("particles_per_bernoulli", cfg.particles_per_bernoulli);
        cfg.phd_capacity = f.value("phd_capacity", cfg.phd_capacity);
        cfg.birth_particles = f.value("birth_particles", cfg.birth_particles);
        cfg.survival_probability = f.value("survival_probability", cfg.survival_probability);
        cfg.kinematic_noise = f.value("kinematic_noise", cfg.kinematic_noise);
        cfg.intensity_noise = f.value("intensity_noise", cfg.intensity_noise);
        cfg.birth_mean = f.value("birth_mean", cfg.birth_mean);
        cfg.birth_velocity_var = f.value("birth_velocity_var", cfg.birth_velocity_var);
        cfg.birth_gamma_max = f.value("birth_gamma_max", cfg.birth_gamma_max);
        cfg.noise_sigma0 = f.value("noise_sigma0", cfg.noise_sigma0);
        cfg.recycle_threshold = f.value("recycle_threshold", cfg.recycle_threshold);
        cfg.declare_threshold = f.value("declare_threshold", cfg.declare_threshold);
        cfg.birth_significance_floor = f.value("birth_significance_floor", cfg.birth_significance_floor);
        cfg.competitor_mass_floor = f.value("competitor_mass_floor", cfg.competitor_mass_floor);
        if (f.contains("bp")) {
            const auto& b = f.at("bp");
            cfg.bp = BpConfig(b.value("max_iterations", 200), b.value("tolerance", 1e-6),
                              b.value("damping", 0.0));
        }
    }
    if (j.contains("gospa")) {
        const auto& g = j.at("gospa");
        cfg.gospa_cfg = GospaConfig(g.value("c", 10.0), g.value("p", 1.0), g.value("alpha", 2.0));
    }
    cfg.config_hash = detail::fnv1a(j.dump());
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_experiment_config: cannot open " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config: parse error in " + path + ": " + e.what());
    }
    return experiment_from_json(j, std::filesystem::path(path).parent_path().string());
}

/// Per-step metrics of one Monte-Carlo run.
struct StepRecord {
    int run = 0;
    int k = 0;
    GospaResult gospa;
    std::size_t est_count = 0;
    std::size_t truth_count = 0;
    double phd_mass = 0.0;
    std::size_t bernoulli_count = 0;
    int bp_iterations = 0;
};

struct RunOutput {
    std::vector<StepRecord> steps;
    std::string estimates_csv; // filled when estimate dumping is enabled
};

namespace detail {

constexpr std::uint64_t kFrameStream = 0x6672616d65ULL;
constexpr std::uint64_t kFilterStream = 0x66696c7465ULL;

inline RunOutput simulate_run(const ExperimentConfig& cfg, const std::vector<GroundTruthFrame>& truth,
                              FilterMode mode, int run, bool dump_estimates) {
    PmbFilter filter(cfg.filter_params(mode),
                     derive_seed(cfg.master_seed, {kFilterStream, static_cast<std::uint64_t>(run)}));
    RunOutput out;
    out.steps.reserve(truth.size());
    std::ostringstream est;
    est.precision(10);

    for (int k = 1; k <= cfg.scenario.num_steps; ++k) {
        auto frame_rng = make_engine(cfg.master_seed,
                                     {kFrameStream, static_cast<std::uint64_t>(run),
                                      static_cast<std::uint64_t>(k)});
        const auto& truth_k = truth[static_cast<std::size_t>(k - 1)];
        const Frame frame = render_frame(truth_k, cfg.scenario.grid, cfg.scenario.sigma_n, frame_rng);
        const StepResult step = filter.step(frame);

        StepRecord rec;
        rec.run = run;
        rec.k = k;
        rec.gospa = gospa(truth_k, step.estimates, cfg.gospa_cfg);
        rec.est_count = step.estimates.size();
        rec.truth_count = truth_k.objects.size();
        rec.phd_mass = step.diagnostics.phd_mass;
        rec.bernoulli_count = step.diagnostics.bernoulli_count;
        rec.bp_iterations = step.diagnostics.bp_iterations;
        out.steps.push_back(rec);

        if (dump_estimates) {
            for (const auto& b : filter.posterior().bernoullis) {
                const ObjectState s = b.spatial().mean_state();
                est << run << ',' << k << ',' << b.label() << ',' << format_value(b.existence()) << ','
                    << format_value(s.px) << ',' << format_value(s.py) << ',' << format_value(s.vx)
                    << ',' << format_value(s.vy) << ',' << format_value(s.gamma) << ','
                    << format_value(step.diagnostics.phd_mass) << '\n';
            }
        }
    }
    if (dump_estimates) out.estimates_csv = est.str();
    return out;
}

inline unsigned resolve_threads(const ExperimentConfig& cfg) {
    if (const char* env = std::getenv("TBDTRACK_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    if (cfg.threads >= 1) return cfg.threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

/// Runs all Monte-Carlo runs for one mode, in run order, with run-level
/// parallelism. Results are deterministic regardless of the thread count.
inline std::vector<RunOutput> run_all(const ExperimentConfig& cfg,
                                      const std::vector<GroundTruthFrame>& truth, FilterMode mode) {
    std::vector<RunOutput> results(static_cast<std::size_t>(cfg.num_runs));
    const unsigned threads = std::min<unsigned>(resolve_threads(cfg), cfg.num_runs);
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int run = next.fetch_add(1);
            if (run >= cfg.num_runs) return;
            results[static_cast<std::size_t>(run)] =
                simulate_run(cfg, truth, mode, run, cfg.dump_estimates);
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return results;
}

inline std::string per_run_csv(const std::vector<RunOutput>& runs) {
    std::ostringstream os;
    os << "run,k,total,loc,missed,false,est_count,truth_count,phd_mass,bernoulli_count,bp_iterations\n";
    for (const auto& run : runs) {
        for (const auto& r : run.steps) {
            os << r.run << ',' << r.k << ',' << format_value(r.gospa.total) << ','
               << format_value(r.gospa.localization) << ',' << format_value(r.gospa.missed) << ','
               << format_value(r.gospa.false_) << ',' << r.est_count << ',' << r.truth_count << ','
               << format_value(r.phd_mass) << ',' << r.bernoulli_count << ',' << r.bp_iterations
               << '\n';
        }
    }
    return os.str();
}

struct StepMeans {
    double total = 0, loc = 0, missed = 0, false_ = 0, est = 0, truth = 0, phd = 0, bern = 0, bp = 0;
};

inline std::vector<StepMeans> step_means(const std::vector<RunOutput>& runs, int num_steps) {
    std::vector<StepMeans> acc(static_cast<std::size_t>(num_steps));
    for (const auto& run : runs) {
        for (const auto& r : run.steps) {
            auto& a = acc[static_cast<std::size_t>(r.k - 1)];
            a.total += r.gospa.total;
            a.loc += r.gospa.localization;
            a.missed += r.gospa.missed;
            a.false_ += r.gospa.false_;
            a.est += static_cast<double>(r.est_count);
            a.truth += static_cast<double>(r.truth_count);
            a.phd += r.phd_mass;
            a.bern += static_cast<double>(r.bernoulli_count);
            a.bp += static_cast<double>(r.bp_iterations);
        }
    }
    const double n = static_cast<double>(runs.size());
    for (auto& a : acc) {
        a.total /= n; a.loc /= n; a.missed /= n; a.false_ /= n; a.est /= n;
        a.truth /= n; a.phd /= n; a.bern /= n; a.bp /= n;
    }
    return acc;
}

inline std::string aggregate_csv(const std::vector<StepMeans>& means) {
    std::ostringstream os;
    os << "k,total,loc,missed,false,est_count,truth_count,phd_mass,bernoulli_count,bp_iterations\n";
    for (std::size_t i = 0; i < means.size(); ++i) {
        const auto& a = means[i];
        os << (i + 1) << ',' << format_value(a.total) << ',' << format_value(a.loc) << ','
           << format_value(a.missed) << ',' << format_value(a.false_) << ',' << format_value(a.est)
           << ',' << format_value(a.truth) << ',' << format_value(a.phd) << ','
           << format_value(a.bern) << ',' << format_value(a.bp) << '\n';
    }
    return os.str();
}

inline double window_mean_total(const RunOutput& run, int start, int end) {
    std::vector<double> vals;
    for (const auto& r : run.steps)
        if (r.k >= start && r.k <= end) vals.push_back(r.gospa.total);
    return mean(vals);
}

} // namespace detail

struct ExperimentResult {
    std::vector<detail::StepMeans> aggregate;
    std::filesystem::path output_dir;
};

/// Full Monte-Carlo experiment for one mode: per-run CSV, aggregate CSV, and
/// a manifest. All files are written atomically.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto truth = generate_truth(cfg.scenario);
    const auto runs = detail::run_all(cfg, truth, cfg.mode);

    const std::filesystem::path out(cfg.output_dir);
    std::filesystem::create_directories(out);
    detail::write_atomic(out / "per_run.csv", detail::per_run_csv(runs));
    const auto means = detail::step_means(runs, cfg.scenario.num_steps);
    detail::write_atomic(out / "aggregate.csv", detail::aggregate_csv(means));
    if (cfg.dump_estimates) {
        std::string all = "run,k,label,r,px,py,vx,vy,gamma,phd_mass\n";
        for (const auto& run : runs) all += run.estimates_csv;
        detail::write_atomic(out / "estimates.csv", all);
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    nlohmann::json manifest{{"config_hash", cfg.config_hash},
                            {"master_seed", cfg.master_seed},
                            {"num_runs", cfg.num_runs},
                            {"mode", to_string(cfg.mode)},
                            {"scenario", cfg.scenario_path},
                            {"num_steps", cfg.scenario.num_steps},
                            {"wall_time_seconds", wall}};
    detail::write_atomic(out / "manifest.json", manifest.dump(2) + "\n");

    return ExperimentResult{means, out};
}

struct ComparisonSummary {
    int window_start = 0;
    int window_end = 0;
    double mean_total_ac = 0.0; // window-averaged total GOSPA, averaged over runs
    double mean_total_a = 0.0;
    PairedTTest window_test;            // H1: GOSPA(A) > GOSPA(AC) in the window
    double missed_at_interaction_ac = 0.0;
    double missed_at_interaction_a = 0.0;
    double missed_margin = 0.0;         // paired mean of A - AC at the interaction step
};

/// Paired comparison of the two filter modes on common random numbers.
inline ComparisonSummary compare_modes(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto truth = generate_truth(cfg.scenario);
    const auto runs_ac = detail::run_all(cfg, truth, FilterMode::pmbf_ac);
    const auto runs_a = detail::run_all(cfg, truth, FilterMode::pmbf_a);

    const std::filesystem::path out(cfg.output_dir);
    std::filesystem::create_directories(out);
    detail::write_atomic(out / "per_run_pmbf-ac.csv", detail::per_run_csv(runs_ac));
    detail::write_atomic(out / "per_run_pmbf-a.csv", detail::per_run_csv(runs_a));
    const auto means_ac = detail::step_means(runs_ac, cfg.scenario.num_steps);
    const auto means_a = detail::step_means(runs_a, cfg.scenario.num_steps);

    std::ostringstream cmp;
    cmp << "k,total_ac,total_a,diff,loc_ac,loc_a,missed_ac,missed_a,false_ac,false_a\n";
    for (std::size_t i = 0; i < means_ac.size(); ++i) {
        cmp << (i + 1) << ',' << detail::format_value(means_ac[i].total) << ','
            << detail::format_value(means_a[i].total) << ','
            << detail::format_value(means_a[i].total - means_ac[i].total) << ','
            << detail::format_value(means_ac[i].loc) << ',' << detail::format_value(means_a[i].loc)
            << ',' << detail::format_value(means_ac[i].missed) << ','
            << detail::format_value(means_a[i].missed) << ','
            << detail::format_value(means_ac[i].false_) << ','
            << detail::format_value(means_a[i].false_) << '\n';
    }
    detail::write_atomic(out / "comparison.csv", cmp.str());

    ComparisonSummary summary;
    summary.window_start = cfg.window_start;
    summary.window_end = cfg.window_end;

    std::vector<double> win_ac, win_a;
    for (int run = 0; run < cfg.num_runs; ++run) {
        win_ac.push_back(detail::window_mean_total(runs_ac[static_cast<std::size_t>(run)],
                                                   cfg.window_start, cfg.window_end));
        win_a.push_back(detail::window_mean_total(runs_a[static_cast<std::size_t>(run)],
                                                  cfg.window_start, cfg.window_end));
    }
    summary.mean_total_ac = mean(win_ac);
    summary.mean_total_a = mean(win_a);
    if (cfg.num_runs >= 2) summary.window_test = paired_t_test(win_a, win_ac);

    const int ki = cfg.scenario.interaction_step > 0 ? cfg.scenario.interaction_step
                                                     : (cfg.window_start + cfg.window_end) / 2;
    std::vector<double> missed_ac, missed_a;
    for (int run = 0; run < cfg.num_runs; ++run) {
        missed_ac.push_back(runs_ac[static_cast<std::size_t>(run)]
                                .steps[static_cast<std::size_t>(ki - 1)].gospa.missed);
        missed_a.push_back(runs_a[static_cast<std::size_t>(run)]
                               .steps[static_cast<std::size_t>(ki - 1)].gospa.missed);
    }
    summary.missed_at_interaction_ac = mean(missed_ac);
    summary.missed_at_interaction_a = mean(missed_a);
    summary.missed_margin = summary.missed_at_interaction_a - summary.missed_at_interaction_ac;

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    nlohmann::json sj{{"window_start", summary.window_start},
                      {"window_end", summary.window_end},
                      {"mean_total_ac", summary.mean_total_ac},
                      {"mean_total_a", summary.mean_total_a},
                      {"paired_mean_diff", summary.window_test.mean_diff},
                      {"t_statistic", summary.window_test.t_statistic},
                      {"p_value_one_sided", summary.window_test.p_value_one_sided},
                      {"interaction_step", ki},
                      {"missed_at_interaction_ac", summary.missed_at_interaction_ac},
                      {"missed_at_interaction_a", summary.missed_at_interaction_a},
                      {"missed_margin", summary.missed_margin},
                      {"num_runs", cfg.num_runs},
                      {"config_hash", cfg.config_hash},
                      {"master_seed", cfg.master_seed},
                      {"wall_time_seconds", wall}};
    detail::write_atomic(out / "summary.json", sj.dump(2) + "\n");
    return summary;
}

} // namespace tbdtrack
