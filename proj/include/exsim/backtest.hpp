#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exsim/impact.hpp"
#include "exsim/market_data.hpp"
#include "exsim/policy_net.hpp"
#include "exsim/strategies.hpp"

namespace exsim::backtest {

// Where per-trade beta comes from: a constant, or a seeded draw per
// (day, trade) shared across strategies so comparisons are paired.
struct BetaSource {
    bool noisy = false;
    impact::BetaNoiseSpec noise;

    static BetaSource fixed() { return {}; }
    static BetaSource with_noise(const impact::BetaNoiseSpec& spec) { return {true, spec}; }
};

struct EpisodeResult {
    std::vector<double> trade_costs;  // dollars, one per trade
    std::vector<double> actions;
    std::vector<double> inventory;    // X_0..X_T at trade resolution
    double total = 0.0;
    double bps = 0.0;                 // 1e4 * total / (|x0| * day-average price)
};

// Cost of one inventory path (X at trade minutes, ending at zero) against a
// ticker-day. In noisy mode each trade uses beta sampled at (day, trade) and
// the matching liquidity coefficient.
EpisodeResult run_episode(std::span<const double> inventory_at_trades,
                          std::span<const double> prices, std::span<const double> volumes,
                          const impact::ImpactParams& params, const BetaSource& beta,
                          double x0, int day_index, int trade_interval);

// A strategy yields the inventory path at trade times for any day.
class ExecutionStrategy {
  public:
    virtual ~ExecutionStrategy() = default;
    virtual std::string name() const = 0;
    virtual std::vector<double> inventory_at_trades(int day) const = 0;
};

// Deterministic schedule (TWAP/VWAP), identical on every day.
class ScheduleStrategy : public ExecutionStrategy {
  public:
    ScheduleStrategy(std::string name, const strategies::Schedule& schedule);
    std::string name() const override { return name_; }
    std::vector<double> inventory_at_trades(int) const override { return inventory_; }

  private:
    std::string name_;
    std::vector<double> inventory_;  // X_1..X_T
};

// Trained policy run day by day through the feature pipeline.
class PolicyStrategy : public ExecutionStrategy {
  public:
    PolicyStrategy(const policy::FoldContext& ctx, int ticker, policy::PolicyWeights weights,
                   policy::FeatureStats stats);
    std::string name() const override { return "lstm"; }
    std::vector<double> inventory_at_trades(int day) const override;

  private:
    const policy::FoldContext* ctx_;
    int ticker_;
    policy::PolicyWeights weights_;
    policy::FeatureStats stats_;
};

EpisodeResult run_episode(const ExecutionStrategy& strategy, const market::Panel& panel,
                          int ticker, int day, const impact::ImpactParams& params,
                          const BetaSource& beta, double x0, int trade_interval);

// ---------------------------------------------------------------------------
// Fold-level evaluation

struct StrategyMetrics {
    std::string name;
    double mean_cost = 0.0;    // mean daily dollars over the test days
    double mean_bps = 0.0;     // mean of per-day bps
    double pooled_bps = 0.0;   // 1e4 * total cost / total traded value
};

struct TickerFoldRow {
    std::string ticker;
    int fold = 0;
    double x0 = 0.0;
    double daily_volume = 0.0;   // mean daily shares over the test days
    double equity_value = 0.0;   // mean |x0| * day-average price
    std::vector<StrategyMetrics> strategies;
    // cost_benchmark - cost_lstm over the same days; present when both ran
    std::optional<double> savings_vs_twap;
    std::optional<double> savings_vs_vwap;

    const StrategyMetrics* find(const std::string& name) const;
};

struct EvalReport {
    std::string scenario;
    int fold = 0;
    std::vector<std::string> strategy_names;
    std::vector<TickerFoldRow> rows;
    TickerFoldRow totals;  // summed costs / traded value across tickers
    // Mean per-trade cost across (tickers, days): one curve per strategy.
    std::vector<std::vector<double>> intraday_costs;
};

struct ScenarioSpec {
    std::string name = "base";
    impact::ImpactParams params = impact::ImpactParams::make(0.003, 0.67);
    BetaSource beta;
};

// Runs every test day x ticker x strategy on the same trade grid with
// paired beta draws and aggregates costs, bps and savings.
EvalReport evaluate_fold(const policy::FoldContext& ctx, int fold_index,
                         const std::vector<const ExecutionStrategy*>& strategies_per_ticker_major,
                         const ScenarioSpec& scenario);

// Convenience: build TWAP/VWAP (+ policy when checkpoints are given) for all
// tickers of a fold and evaluate.
struct FoldStrategySet {
    std::vector<std::unique_ptr<ExecutionStrategy>> owned;
    std::vector<const ExecutionStrategy*> per_ticker;  // ticker-major: [ticker][strategy]
    std::vector<std::string> names;
    int n_strategies = 0;
};

FoldStrategySet make_benchmark_strategies(const policy::FoldContext& ctx);
void add_policy_strategies(FoldStrategySet& set, const policy::FoldContext& ctx,
                           const std::vector<policy::Checkpoint>& ckpts);

// ---------------------------------------------------------------------------
// Report emission: deterministic column order, 17 significant digits.

void write_report_csv(const EvalReport& report, std::ostream& out);
void write_report_json(const EvalReport& report, std::ostream& out);
EvalReport read_report_json(std::istream& in);

// Benchmark-vs-policy comparison table (ticker, daily_volume, equity_value,
// strategy_bps, lstm_bps, savings_bps).
void write_comparison_csv(const EvalReport& report, const std::string& benchmark,
                          std::ostream& out);

// Per-fold mean daily cost per strategy and the 78-point intraday curves.
void write_fold_costs_csv(std::span<const EvalReport> reports, std::ostream& out);
void write_intraday_csv(std::span<const EvalReport> reports, std::ostream& out);

}  // namespace exsim::backtest
