#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "portopt/backtest.hpp"
#include "portopt/data.hpp"
#include "portopt/lstm.hpp"
#include "portopt/ppo.hpp"

namespace portopt {

struct PreprocessConfig {
    std::string anchor_day = "friday";
    double split_ratio = 0.7;
    bool resample = true;           // set false when the input files are already weekly
    std::string calendar = "union"; // or "intersection"
};

// One experiment = one config file; flags may override seed and output dir.
struct ExperimentConfig {
    std::filesystem::path manifest;
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 42;
    PreprocessConfig preprocess;
    ForecasterConfig forecaster;
    std::size_t env_window = 30;
    double env_tc = 0.001;
    double env_tau = 0.01;
    double env_lambda_sparse = 0.001;
    PpoConfig ppo;
    std::vector<std::size_t> k_values = {5, 10, 30};
    std::vector<std::string> strategies;
    std::map<std::string, double> composite_weights;
    double risk_free_weekly = 0.0;
    double periods_per_year = 52.0;
    bool include_reported_rows = true;
    std::filesystem::path http_cache_dir;

    static ExperimentConfig load(const std::filesystem::path& path,
                                 std::optional<std::uint64_t> seed_override = {},
                                 std::optional<std::filesystem::path> out_override = {});

    // Normalized echo embedded in artifacts and the run manifest.
    std::string echo_json() const;
};

struct Dataset {
    PriceTable weekly;
    ReturnMatrix returns;
    SplitPlan split;
    std::string content_hash;
};

// Stage entry points (shared by the CLI and the test suites).
// Each writes its artifacts under cfg.out_dir and updates run_manifest.json.
std::string cmd_ingest(const ExperimentConfig& cfg);  // returns the dataset content hash
void cmd_train(const ExperimentConfig& cfg, const std::string& stage);  // forecaster|allocator|all
void cmd_predict(const ExperimentConfig& cfg);
void cmd_backtest(const ExperimentConfig& cfg);
std::string cmd_compare(const ExperimentConfig& cfg);  // combined computed+reported table text
std::string cmd_report(const ExperimentConfig& cfg);   // human-readable run summary

// Artifact access.
Dataset load_dataset(const ExperimentConfig& cfg);  // PrereqError when cmd_ingest has not run
std::filesystem::path dataset_path(const ExperimentConfig& cfg);
std::filesystem::path forecaster_checkpoint_path(const ExperimentConfig& cfg, const std::string& asset);
std::filesystem::path policy_checkpoint_path(const ExperimentConfig& cfg, const std::string& variant,
                                             std::size_t k);
std::filesystem::path train_scores_path(const ExperimentConfig& cfg);
std::filesystem::path test_forecasts_path(const ExperimentConfig& cfg);
std::filesystem::path comparison_json_path(const ExperimentConfig& cfg);
std::filesystem::path run_manifest_path(const ExperimentConfig& cfg);

}  // namespace portopt
