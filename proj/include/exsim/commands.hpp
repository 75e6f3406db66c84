#pragma once

#include <string>
#include <vector>

#include "exsim/backtest.hpp"
#include "exsim/config.hpp"
#include "exsim/market_data.hpp"
#include "exsim/policy_net.hpp"

namespace exsim::cli {

// Shared wiring between the CLI and the test suites.
market::SynthSpec synth_spec(const RunConfig& cfg);
policy::InventoryRule inventory_rule(const ScenarioSection& scenario);
backtest::BetaSource beta_source(const ScenarioSection& scenario);
std::string checkpoint_path(const RunConfig& cfg, const std::string& scenario,
                            const std::string& ticker, int fold);
market::Panel load_cached_panel(const RunConfig& cfg);
void echo_config(const RunConfig& cfg);

struct TrainSelection {
    std::vector<std::string> tickers;  // empty = all
    std::vector<int> folds;            // empty = all
    int jobs = 1;
    bool resume = false;
};

void cmd_ingest(const RunConfig& cfg, const std::string& csv_path, const std::string& cache_path);
void cmd_synth(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg, const TrainSelection& sel);
void cmd_backtest(const RunConfig& cfg, const std::vector<std::string>& scenario_filter);
void cmd_verify(const RunConfig& cfg);
void cmd_report(const RunConfig& cfg, const std::string& from_json, const std::string& format);

}  // namespace exsim::cli
