#include "tbdtrack/experiment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tbdtrack;

namespace {

std::string preset(const char* name) {
    return std::string(TBDTRACK_PRESET_DIR) + "/" + name;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    EXPECT_TRUE(static_cast<bool>(is)) << p;
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::filesystem::path temp_dir(const char* tag) {
    const auto dir = std::filesystem::temp_directory_path() / (std::string("tbdtrack_test_") + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST(Stats, StudentTSurvivalMatchesReferenceValues) {
    EXPECT_NEAR(student_t_sf(0.0, 10.0), 0.5, 1e-12);
    EXPECT_NEAR(student_t_sf(1.0, 1.0), 0.25, 1e-10);          // Cauchy closed form
    EXPECT_NEAR(student_t_sf(2.0, 10.0), 0.036694, 3e-6);      // standard table value
    EXPECT_NEAR(student_t_sf(-2.0, 10.0), 1.0 - 0.036694, 3e-6);
}

TEST(Stats, PairedTTestDetectsAConsistentGap) {
    std::vector<double> a{2.1, 2.4, 2.2, 2.6, 2.3, 2.5, 2.2, 2.4};
    std::vector<double> b{1.6, 1.9, 1.8, 2.0, 1.7, 2.1, 1.8, 1.9};
    const auto t = paired_t_test(a, b);
    EXPECT_GT(t.mean_diff, 0.0);
    EXPECT_LT(t.p_value_one_sided, 0.01);
    const auto reversed = paired_t_test(b, a);
    EXPECT_GT(reversed.p_value_one_sided, 0.99);
}

TEST(ExperimentConfig, LoadsTheSmokePreset) {
    const ExperimentConfig cfg = load_experiment_config(preset("smoke.experiment.json"));
    EXPECT_EQ(cfg.num_runs, 2);
    EXPECT_EQ(cfg.scenario.grid.nx, 8);
    EXPECT_GT(cfg.particles_per_bernoulli, 0u);
    EXPECT_EQ(cfg.gospa_cfg.c, 10.0);
}

TEST(ExperimentConfig, MissingFieldsNameTheirPath) {
    const nlohmann::json j = {{"scenario", "presets/smoke.scenario.json"}};
    try {
        experiment_from_json(j, TBDTRACK_PRESET_DIR "/..");
        FAIL() << "expected a validation error";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("num_runs"), std::string::npos);
    }
}

TEST(ExperimentConfig, RejectsUnknownMode) {
    EXPECT_THROW(parse_mode("pmbf-x"), std::invalid_argument);
}

TEST(RunExperiment, ByteIdenticalOutputsForSameSeed) {
    ExperimentConfig cfg = load_experiment_config(preset("smoke.experiment.json"));
    const auto dir_a = temp_dir("det_a");
    const auto dir_b = temp_dir("det_b");

    cfg.output_dir = dir_a.string();
    run_experiment(cfg);
    cfg.output_dir = dir_b.string();
    run_experiment(cfg);

    EXPECT_EQ(read_file(dir_a / "per_run.csv"), read_file(dir_b / "per_run.csv"));
    EXPECT_EQ(read_file(dir_a / "aggregate.csv"), read_file(dir_b / "aggregate.csv"));
}

TEST(RunExperiment, AggregateIsTheColumnMeanOfPerRun) {
    ExperimentConfig cfg = load_experiment_config(preset("smoke.experiment.json"));
    const auto dir = temp_dir("agg");
    cfg.output_dir = dir.string();
    run_experiment(cfg);

    // Recompute the per-step mean of the "total" column from per_run.csv.
    std::ifstream is(dir / "per_run.csv");
    std::string line;
    std::getline(is, line); // header
    std::map<int, std::pair<double, int>> byk;
    while (std::getline(is, line)) {
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> f;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        byk[std::stoi(f[1])].first += std::stod(f[2]);
        byk[std::stoi(f[1])].second += 1;
    }

    std::ifstream agg(dir / "aggregate.csv");
    std::getline(agg, line);
    while (std::getline(agg, line)) {
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> f;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        const int k = std::stoi(f[0]);
        const double mean_total = byk[k].first / byk[k].second;
        EXPECT_NEAR(std::stod(f[1]), mean_total, 1e-9) << "k = " << k;
    }
}

TEST(RunExperiment, ManifestRecordsSeedAndHash) {
    ExperimentConfig cfg = load_experiment_config(preset("smoke.experiment.json"));
    const auto dir = temp_dir("manifest");
    cfg.output_dir = dir.string();
    run_experiment(cfg);
    nlohmann::json manifest;
    std::ifstream is(dir / "manifest.json");
    is >> manifest;
    EXPECT_EQ(manifest.at("master_seed").get<std::uint64_t>(), cfg.master_seed);
    EXPECT_EQ(manifest.at("config_hash").get<std::uint64_t>(), cfg.config_hash);
    EXPECT_EQ(manifest.at("num_runs").get<int>(), cfg.num_runs);
}

TEST(RunExperiment, NoPartialFilesLeftBehind) {
    ExperimentConfig cfg = load_experiment_config(preset("smoke.experiment.json"));
    const auto dir = temp_dir("atomic");
    cfg.output_dir = dir.string();
    run_experiment(cfg);
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        EXPECT_NE(entry.path().extension(), ".tmp");
}

TEST(RunExperiment, ThreadCountDoesNotChangeResults) {
    ExperimentConfig cfg = load_experiment_config(preset("smoke.experiment.json"));
    const auto dir_a = temp_dir("thr1");
    const auto dir_b = temp_dir("thr2");
    cfg.threads = 1;
    cfg.output_dir = dir_a.string();
    run_experiment(cfg);
    cfg.threads = 2;
    cfg.output_dir = dir_b.string();
    run_experiment(cfg);
    EXPECT_EQ(read_file(dir_a / "per_run.csv"), read_file(dir_b / "per_run.csv"));
}

TEST(CompareModes, WritesPairedOutputsAndSummary) {
    ExperimentConfig cfg = load_experiment_config(preset("smoke.experiment.json"));
    const auto dir = temp_dir("cmp");
    cfg.output_dir = dir.string();
    const ComparisonSummary s = compare_modes(cfg);
    EXPECT_TRUE(std::filesystem::exists(dir / "per_run_pmbf-ac.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "per_run_pmbf-a.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "comparison.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "summary.json"));
    EXPECT_GE(s.window_end, s.window_start);
}

TEST(CompareModes, SingleIsolatedObjectGivesNearIdenticalModes) {
    // With one well separated object the contribution model is inert, so the
    // paired per-step difference stays within Monte-Carlo noise.
    ExperimentConfig cfg = load_experiment_config(preset("smoke.experiment.json"));
    const auto dir = temp_dir("cmp_iso");
    cfg.output_dir = dir.string();
    const ComparisonSummary s = compare_modes(cfg);
    EXPECT_NEAR(s.mean_total_ac, s.mean_total_a, 1.0);
}
