#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "exsim/errors.hpp"

namespace exsim::cli {

struct SynthConfig {
    int tickers = 5;
    int days = 105;
    double base_price = 100.0;
    double daily_volume = 1e6;   // shares per day
    double u_depth = 1.4;        // log-ratio open/close vs midday volume
    double sigma = 0.02;         // per-minute log-volume shock std
    double price_vol = 8e-4;     // per-minute return std
    double correlation = 0.3;
    std::uint64_t seed = 1;
};

struct FoldConfig {
    int count = 1;
    int train_days = 60;
    int test_days = 45;
};

struct TrainSection {
    int epochs = 200;
    double learning_rate = 1e-3;
    std::uint64_t seed = 7;
    bool batch_days = false;
    std::string scenario = "base";  // supplies epsilon/beta/x0 for the loss
};

struct ScenarioSection {
    std::string name = "base";
    double epsilon = 0.003;
    double beta = 0.67;
    std::string x0_rule = "fixed";  // fixed | adv_fraction
    double x0_fixed = 1e6;
    double x0_fraction = 0.05;
    double beta_noise = 0.0;        // uniform half-width; 0 = noiseless
    std::uint64_t noise_seed = 99;
};

struct RunConfig {
    std::string data = "synth";  // synth | csv
    std::string csv_path;
    std::string cache_path = "out/panel.exsp";
    std::string output_dir = "out";
    int trade_interval = 5;
    SynthConfig synth;
    FoldConfig folds;
    TrainSection train;
    std::vector<ScenarioSection> scenarios;
    std::string raw_text;  // echoed into the output directory for provenance

    const ScenarioSection& scenario(const std::string& name) const;
    std::uint64_t hash() const;  // stable fingerprint stored in checkpoints
};

RunConfig parse_config(std::istream& in);
RunConfig parse_config_file(const std::string& path);
RunConfig default_config();

// `section.key=value` override, same validation as the file parser.
void apply_override(RunConfig& cfg, const std::string& assignment);

}  // namespace exsim::cli
