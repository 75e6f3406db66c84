#include "exsim/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "exsim/io_util.hpp"

namespace exsim::backtest {

namespace {

inline double floored(double volume) { return volume < 1.0 ? 1.0 : volume; }

// One beta draw per (day, trade), shared by every strategy and ticker.
std::uint64_t beta_position(int day_index, int trade) {
    return (static_cast<std::uint64_t>(day_index) << 32) | static_cast<std::uint64_t>(trade);
}

}  // namespace

EpisodeResult run_episode(std::span<const double> inventory_at_trades,
                          std::span<const double> prices, std::span<const double> volumes,
                          const impact::ImpactParams& params, const BetaSource& beta,
                          double x0, int day_index, int trade_interval) {
    const int D = static_cast<int>(prices.size());
    if (volumes.size() != prices.size())
        throw ConfigError("run_episode: prices and volumes must have the same length");
    if (trade_interval < 1 || D % trade_interval != 0)
        throw ConfigError("run_episode: day length must be a multiple of the trade interval");
    const int T = D / trade_interval;
    if (static_cast<int>(inventory_at_trades.size()) != T)
        throw ConfigError("run_episode: inventory path must have one entry per trade time");
    const double tol = 1e-9 * std::max(1.0, std::fabs(x0));
    if (std::fabs(inventory_at_trades[T - 1]) > tol)
        throw NumericalError("run_episode: strategy violates the forced close (X_T != 0)");

    EpisodeResult r;
    r.trade_costs.resize(T);
    r.actions.resize(T);
    r.inventory.resize(T + 1);
    r.inventory[0] = x0;
    double x_prev = x0;
    for (int l = 1; l <= T; ++l) {
        const double x_now = inventory_at_trades[l - 1];
        const double a = x_now - x_prev;
        const int m = trade_interval * l;
        impact::ImpactParams p = params;
        if (beta.noisy) {
            const double b = impact::sample_beta(beta.noise, beta_position(day_index, l));
            p = impact::ImpactParams::make(params.epsilon, b);
        }
        r.trade_costs[l - 1] = impact::walk_cost(prices[m - 1], floored(volumes[m - 1]), a, p);
        r.actions[l - 1] = a;
        r.inventory[l] = x_now;
        r.total += r.trade_costs[l - 1];
        x_prev = x_now;
    }
    const double day_avg = market::twap_price(prices);
    r.bps = x0 == 0.0 ? 0.0 : 1e4 * r.total / (std::fabs(x0) * day_avg);
    return r;
}

ScheduleStrategy::ScheduleStrategy(std::string name, const strategies::Schedule& schedule)
    : name_(std::move(name)) {
    const auto path = schedule.inventory_path();
    inventory_.assign(path.begin() + 1, path.end());
}

PolicyStrategy::PolicyStrategy(const policy::FoldContext& ctx, int ticker,
                               policy::PolicyWeights weights, policy::FeatureStats stats)
    : ctx_(&ctx), ticker_(ticker), weights_(std::move(weights)), stats_(std::move(stats)) {}

std::vector<double> PolicyStrategy::inventory_at_trades(int day) const {
    const int D = ctx_->day_minutes();
    Eigen::MatrixXd F(ctx_->input_dim(), D - 1);
    for (int t = 1; t < D; ++t) {
        const Eigen::VectorXd raw = policy::raw_features(*ctx_, day, t);
        F.col(t - 1) = (raw - stats_.mean).cwiseQuotient(stats_.stddev);
    }
    return policy::policy_inventory(weights_, F, ctx_->x0[ticker_], ctx_->trade_interval);
}

EpisodeResult run_episode(const ExecutionStrategy& strategy, const market::Panel& panel,
                          int ticker, int day, const impact::ImpactParams& params,
                          const BetaSource& beta, double x0, int trade_interval) {
    const auto plan = strategy.inventory_at_trades(day);
    return run_episode(plan, panel.day_prices(ticker, day), panel.day_volumes(ticker, day),
                       params, beta, x0, day, trade_interval);
}

const StrategyMetrics* TickerFoldRow::find(const std::string& name) const {
    for (const auto& m : strategies)
        if (m.name == name) return &m;
    return nullptr;
}

FoldStrategySet make_benchmark_strategies(const policy::FoldContext& ctx) {
    FoldStrategySet set;
    const auto& panel = *ctx.panel;
    const auto minutes = market::trade_minutes(panel.minutes, ctx.trade_interval);
    set.names = {"twap", "vwap"};
    set.n_strategies = 2;
    for (int i = 0; i < panel.n_tickers(); ++i) {
        const double x0 = ctx.x0[i];
        std::vector<double> at_trades;
        at_trades.reserve(minutes.size());
        for (int m : minutes) at_trades.push_back(ctx.profiles[i].v_bar[m - 1]);

        auto twap = std::make_unique<ScheduleStrategy>(
            "twap", strategies::twap_schedule(x0, static_cast<int>(minutes.size())));
        auto vwap = std::make_unique<ScheduleStrategy>(
            "vwap", strategies::vwap_schedule(x0, at_trades));
        set.per_ticker.push_back(twap.get());
        set.per_ticker.push_back(vwap.get());
        set.owned.push_back(std::move(twap));
        set.owned.push_back(std::move(vwap));
    }
    return set;
}

void add_policy_strategies(FoldStrategySet& set, const policy::FoldContext& ctx,
                           const std::vector<policy::Checkpoint>& ckpts) {
    const auto& panel = *ctx.panel;
    const int n = panel.n_tickers();
    const int old_count = set.n_strategies;
    std::vector<const ExecutionStrategy*> relaid;
    relaid.reserve(static_cast<std::size_t>(n) * (old_count + 1));
    for (int i = 0; i < n; ++i) {
        const auto it = std::find_if(ckpts.begin(), ckpts.end(), [&](const policy::Checkpoint& c) {
            return c.ticker == panel.tickers[i];
        });
        if (it == ckpts.end())
            throw ConfigError("missing checkpoint for ticker " + panel.tickers[i]);
        auto strat = std::make_unique<PolicyStrategy>(ctx, i, it->weights, it->stats);
        for (int s = 0; s < old_count; ++s) relaid.push_back(set.per_ticker[i * old_count + s]);
        relaid.push_back(strat.get());
        set.owned.push_back(std::move(strat));
    }
    set.per_ticker = std::move(relaid);
    set.names.push_back("lstm");
    set.n_strategies = old_count + 1;
}

EvalReport evaluate_fold(const policy::FoldContext& ctx, int fold_index,
                         const std::vector<const ExecutionStrategy*>& table,
                         const ScenarioSpec& scenario) {
    const auto& panel = *ctx.panel;
    const int n_tickers = panel.n_tickers();
    if (n_tickers == 0 || table.size() % n_tickers != 0)
        throw ConfigError("evaluate_fold: strategy table does not tile the ticker axis");
    const int n_strat = static_cast<int>(table.size()) / n_tickers;
    const auto test_days = ctx.test_day_list();
    if (test_days.empty()) throw ConfigError("evaluate_fold: fold has no test days");
    const int T = panel.minutes / ctx.trade_interval;

    EvalReport report;
    report.scenario = scenario.name;
    report.fold = fold_index;
    for (int s = 0; s < n_strat; ++s) report.strategy_names.push_back(table[s]->name());
    report.intraday_costs.assign(n_strat, std::vector<double>(T, 0.0));

    const double n_obs = static_cast<double>(test_days.size());
    std::vector<double> scenario_cost(n_strat, 0.0);   // pooled across tickers
    std::vector<double> scenario_value(n_strat, 0.0);

    for (int i = 0; i < n_tickers; ++i) {
        TickerFoldRow row;
        row.ticker = panel.tickers[i];
        row.fold = fold_index;
        row.x0 = ctx.x0[i];

        double volume_sum = 0.0, value_sum = 0.0;
        for (int d : test_days) {
            const auto v = panel.day_volumes(i, d);
            double day_total = 0.0;
            for (double x : v) day_total += x;
            volume_sum += day_total;
            value_sum += std::fabs(ctx.x0[i]) * market::twap_price(panel.day_prices(i, d));
        }
        row.daily_volume = volume_sum / n_obs;
        row.equity_value = value_sum / n_obs;

        for (int s = 0; s < n_strat; ++s) {
            const ExecutionStrategy* strat = table[i * n_strat + s];
            StrategyMetrics m;
            m.name = strat->name();
            double cost_sum = 0.0, bps_sum = 0.0;
            for (int d : test_days) {
                const auto ep = run_episode(*strat, panel, i, d, scenario.params, scenario.beta,
                                            ctx.x0[i], ctx.trade_interval);
                cost_sum += ep.total;
                bps_sum += ep.bps;
                for (int l = 0; l < T; ++l) report.intraday_costs[s][l] += ep.trade_costs[l];
            }
            m.mean_cost = cost_sum / n_obs;
            m.mean_bps = bps_sum / n_obs;
            m.pooled_bps = value_sum > 0.0 ? 1e4 * cost_sum / value_sum : 0.0;
            scenario_cost[s] += cost_sum;
            scenario_value[s] += value_sum;
            row.strategies.push_back(std::move(m));
        }

        if (const auto* lstm = row.find("lstm")) {
            if (const auto* twap = row.find("twap"))
                row.savings_vs_twap = twap->mean_cost - lstm->mean_cost;
            if (const auto* vwap = row.find("vwap"))
                row.savings_vs_vwap = vwap->mean_cost - lstm->mean_cost;
        }
        report.rows.push_back(std::move(row));
    }

    const double obs_per_strategy = n_obs * n_tickers;
    for (auto& curve : report.intraday_costs)
        for (auto& c : curve) c /= obs_per_strategy;

    report.totals.ticker = "TOTAL";
    report.totals.fold = fold_index;
    for (const auto& row : report.rows) {
        report.totals.x0 += row.x0;
        report.totals.daily_volume += row.daily_volume;
        report.totals.equity_value += row.equity_value;
    }
    for (int s = 0; s < n_strat; ++s) {
        StrategyMetrics m;
        m.name = report.strategy_names[s];
        for (const auto& row : report.rows) m.mean_cost += row.strategies[s].mean_cost;
        m.mean_bps = report.totals.equity_value > 0.0
                         ? 1e4 * m.mean_cost / report.totals.equity_value
                         : 0.0;
        m.pooled_bps = scenario_value[s] > 0.0 ? 1e4 * scenario_cost[s] / scenario_value[s] : 0.0;
        report.totals.strategies.push_back(std::move(m));
    }
    if (const auto* lstm = report.totals.find("lstm")) {
        if (const auto* twap = report.totals.find("twap"))
            report.totals.savings_vs_twap = twap->mean_cost - lstm->mean_cost;
        if (const auto* vwap = report.totals.find("vwap"))
            report.totals.savings_vs_vwap = vwap->mean_cost - lstm->mean_cost;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Emission

namespace {

using nlohmann::json;

json metrics_to_json(const StrategyMetrics& m) {
    return json{{"name", m.name},
                {"mean_cost", m.mean_cost},
                {"mean_bps", m.mean_bps},
                {"pooled_bps", m.pooled_bps}};
}

StrategyMetrics metrics_from_json(const json& j) {
    StrategyMetrics m;
    m.name = j.at("name").get<std::string>();
    m.mean_cost = j.at("mean_cost").get<double>();
    m.mean_bps = j.at("mean_bps").get<double>();
    m.pooled_bps = j.at("pooled_bps").get<double>();
    return m;
}

json row_to_json(const TickerFoldRow& row) {
    json j{{"ticker", row.ticker},
           {"fold", row.fold},
           {"x0", row.x0},
           {"daily_volume", row.daily_volume},
           {"equity_value", row.equity_value}};
    j["metrics"] = json::array();
    for (const auto& m : row.strategies) j["metrics"].push_back(metrics_to_json(m));
    if (row.savings_vs_twap) j["savings_vs_twap"] = *row.savings_vs_twap;
    if (row.savings_vs_vwap) j["savings_vs_vwap"] = *row.savings_vs_vwap;
    return j;
}

TickerFoldRow row_from_json(const json& j) {
    TickerFoldRow row;
    row.ticker = j.at("ticker").get<std::string>();
    row.fold = j.at("fold").get<int>();
    row.x0 = j.at("x0").get<double>();
    row.daily_volume = j.at("daily_volume").get<double>();
    row.equity_value = j.at("equity_value").get<double>();
    for (const auto& m : j.at("metrics")) row.strategies.push_back(metrics_from_json(m));
    if (j.contains("savings_vs_twap")) row.savings_vs_twap = j.at("savings_vs_twap").get<double>();
    if (j.contains("savings_vs_vwap")) row.savings_vs_vwap = j.at("savings_vs_vwap").get<double>();
    return row;
}

void csv_row(std::ostream& out, const EvalReport& report, const TickerFoldRow& row) {
    out << report.scenario << ',' << row.fold << ',' << row.ticker << ','
        << io::fmt17(row.x0) << ',' << io::fmt17(row.daily_volume) << ','
        << io::fmt17(row.equity_value);
    for (const auto& m : row.strategies)
        out << ',' << io::fmt17(m.mean_cost) << ',' << io::fmt17(m.mean_bps) << ','
            << io::fmt17(m.pooled_bps);
    out << ',' << (row.savings_vs_twap ? io::fmt17(*row.savings_vs_twap) : "");
    out << ',' << (row.savings_vs_vwap ? io::fmt17(*row.savings_vs_vwap) : "");
    out << '\n';
}

}  // namespace

void write_report_csv(const EvalReport& report, std::ostream& out) {
    out << "scenario,fold,ticker,x0,daily_volume,equity_value";
    for (const auto& name : report.strategy_names)
        out << ',' << name << "_cost," << name << "_bps," << name << "_pooled_bps";
    out << ",savings_vs_twap,savings_vs_vwap\n";
    for (const auto& row : report.rows) csv_row(out, report, row);
    if (!report.rows.empty()) csv_row(out, report, report.totals);
}

void write_report_json(const EvalReport& report, std::ostream& out) {
    json j{{"scenario", report.scenario}, {"fold", report.fold}};
    j["strategies"] = report.strategy_names;
    j["rows"] = json::array();
    for (const auto& row : report.rows) j["rows"].push_back(row_to_json(row));
    j["totals"] = row_to_json(report.totals);
    j["intraday_costs"] = report.intraday_costs;
    out << j.dump(2) << '\n';
}

EvalReport read_report_json(std::istream& in) {
    json j = json::parse(in);
    EvalReport report;
    report.scenario = j.at("scenario").get<std::string>();
    report.fold = j.at("fold").get<int>();
    report.strategy_names = j.at("strategies").get<std::vector<std::string>>();
    for (const auto& r : j.at("rows")) report.rows.push_back(row_from_json(r));
    report.totals = row_from_json(j.at("totals"));
    report.intraday_costs = j.at("intraday_costs").get<std::vector<std::vector<double>>>();
    return report;
}

void write_comparison_csv(const EvalReport& report, const std::string& benchmark,
                          std::ostream& out) {
    out << "ticker,daily_volume,equity_value,strategy_bps,lstm_bps,savings_bps\n";
    std::vector<const TickerFoldRow*> rows;
    for (const auto& row : report.rows)
        if (row.find(benchmark) && row.find("lstm")) rows.push_back(&row);
    std::sort(rows.begin(), rows.end(), [&](const TickerFoldRow* a, const TickerFoldRow* b) {
        const double sa = a->find(benchmark)->mean_bps - a->find("lstm")->mean_bps;
        const double sb = b->find(benchmark)->mean_bps - b->find("lstm")->mean_bps;
        if (sa != sb) return sa > sb;
        return a->ticker < b->ticker;
    });
    for (const auto* row : rows) {
        const auto* bench = row->find(benchmark);
        const auto* lstm = row->find("lstm");
        out << row->ticker << ',' << io::fmt17(row->daily_volume) << ','
            << io::fmt17(row->equity_value) << ',' << io::fmt17(bench->mean_bps) << ','
            << io::fmt17(lstm->mean_bps) << ',' << io::fmt17(bench->mean_bps - lstm->mean_bps)
            << '\n';
    }
}

void write_fold_costs_csv(std::span<const EvalReport> reports, std::ostream& out) {
    out << "scenario,fold,strategy,mean_daily_cost\n";
    for (const auto& report : reports)
        for (std::size_t s = 0; s < report.strategy_names.size(); ++s)
            out << report.scenario << ',' << report.fold << ',' << report.strategy_names[s] << ','
                << io::fmt17(report.totals.strategies[s].mean_cost) << '\n';
}

void write_intraday_csv(std::span<const EvalReport> reports, std::ostream& out) {
    out << "scenario,fold,strategy,trade,mean_cost\n";
    for (const auto& report : reports)
        for (std::size_t s = 0; s < report.strategy_names.size(); ++s)
            for (std::size_t l = 0; l < report.intraday_costs[s].size(); ++l)
                out << report.scenario << ',' << report.fold << ',' << report.strategy_names[s]
                    << ',' << (l + 1) << ',' << io::fmt17(report.intraday_costs[s][l]) << '\n';
}

}  // namespace exsim::backtest
