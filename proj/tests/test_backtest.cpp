#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "exsim/backtest.hpp"
#include "exsim/rng.hpp"

using namespace exsim;
using backtest::BetaSource;
using backtest::EpisodeResult;

namespace {

market::Panel flat_panel(int tickers, int days, double price, double volume, int minutes = 390) {
    auto spec = market::SynthSpec::u_shaped(tickers, days, volume * minutes, 0.0, 0.0, 0.67,
                                            0.0, 0.0, 1, price, minutes);
    return market::synth_generate(spec);
}

market::Panel shaped_panel(int tickers, int days, std::uint64_t seed, double sigma = 0.0,
                           double price_vol = 0.0, int minutes = 390) {
    auto spec = market::SynthSpec::u_shaped(tickers, days, 1e6, 1.4, sigma, 0.67, price_vol,
                                            0.2, seed, 100.0, minutes);
    return market::synth_generate(spec);
}

policy::FoldContext context_for(const market::Panel& panel, int train_end, double x0) {
    market::FoldSpec fold{0, train_end, train_end, panel.n_days()};
    policy::InventoryRule rule;
    rule.kind = policy::InventoryRule::Kind::fixed;
    rule.value = x0;
    return policy::make_fold_context(panel, fold, rule, 0.67, 5);
}

}  // namespace

TEST_CASE("twap on a flat day produces equal cost terms") {
    const auto panel = flat_panel(1, 1, 100.0, 5e3);
    const double x0 = 780000.0;  // 78 slices of exactly 10000 shares
    const auto schedule = strategies::twap_schedule(x0, 78);
    backtest::ScheduleStrategy strat("twap", schedule);
    const auto params = impact::ImpactParams::make(0.003, 0.67);
    const auto ep = backtest::run_episode(strat, panel, 0, 0, params, BetaSource::fixed(), x0, 5);
    REQUIRE(ep.trade_costs.size() == 78);
    for (double c : ep.trade_costs) CHECK(c == ep.trade_costs.front());
    CHECK(ep.total > 0.0);
    CHECK(ep.inventory.front() == x0);
    CHECK(ep.inventory.back() == 0.0);
    // sequential sum reproduces the total bit-exactly
    double total = 0.0;
    for (double c : ep.trade_costs) total += c;
    CHECK(total == ep.total);
    // bps = 1e4 * total / (x0 * day-average price)
    CHECK(ep.bps == doctest::Approx(1e4 * ep.total / (x0 * 100.0)).epsilon(1e-12));
}

TEST_CASE("zero-width noise is bitwise identical to the fixed-beta mode") {
    const auto panel = shaped_panel(1, 2, 33, 0.04, 1e-3);
    const auto schedule = strategies::twap_schedule(5e5, 78);
    backtest::ScheduleStrategy strat("twap", schedule);
    const auto params = impact::ImpactParams::make(0.003, 0.67);

    impact::BetaNoiseSpec zero;
    zero.base_beta = 0.67;
    zero.half_width = 0.0;
    zero.seed = 4;
    const auto fixed = backtest::run_episode(strat, panel, 0, 1, params, BetaSource::fixed(), 5e5, 5);
    const auto noisy =
        backtest::run_episode(strat, panel, 0, 1, params, BetaSource::with_noise(zero), 5e5, 5);
    CHECK(fixed.trade_costs == noisy.trade_costs);
    CHECK(fixed.total == noisy.total);
}

TEST_CASE("noisy mode pairs beta draws across strategies") {
    const auto panel = shaped_panel(1, 1, 12, 0.03, 0.0);
    const auto schedule = strategies::twap_schedule(4e5, 78);
    backtest::ScheduleStrategy a("a", schedule);
    backtest::ScheduleStrategy b("b", schedule);  // same plan under a different name
    impact::BetaNoiseSpec noise;
    noise.seed = 77;
    const auto params = impact::ImpactParams::make(0.003, 0.67);
    const auto ra = backtest::run_episode(a, panel, 0, 0, params, BetaSource::with_noise(noise), 4e5, 5);
    const auto rb = backtest::run_episode(b, panel, 0, 0, params, BetaSource::with_noise(noise), 4e5, 5);
    CHECK(ra.trade_costs == rb.trade_costs);

    // and the same plan on a different day draws different betas
    const auto panel2 = shaped_panel(1, 2, 12, 0.03, 0.0);
    const auto rc =
        backtest::run_episode(a, panel2, 0, 1, params, BetaSource::with_noise(noise), 4e5, 5);
    CHECK(ra.total != rc.total);
}

TEST_CASE("a plan that ends away from zero violates the contract") {
    const auto panel = flat_panel(1, 1, 100.0, 5e3);
    std::vector<double> bad(78, 1000.0);  // X_T != 0
    const auto params = impact::ImpactParams::make(0.003, 0.67);
    CHECK_THROWS_AS(backtest::run_episode(bad, panel.day_prices(0, 0), panel.day_volumes(0, 0),
                                          params, BetaSource::fixed(), 1e6, 0, 5),
                    NumericalError);
}

TEST_CASE("vwap beats twap on deterministic U-shaped days") {
    // deterministic volume, light price noise; Prop. 1 says VWAP is optimal
    int vwap_wins = 0;
    const auto params = impact::ImpactParams::make(0.003, 0.67);
    for (int trial = 0; trial < 20; ++trial) {
        const auto panel = shaped_panel(1, 5, 100 + trial, 0.0, 5e-4);
        const auto ctx = context_for(panel, 2, 1e6);
        auto set = backtest::make_benchmark_strategies(ctx);
        double twap_cost = 0.0, vwap_cost = 0.0;
        for (int d = 2; d < 5; ++d) {
            twap_cost += backtest::run_episode(*set.per_ticker[0], panel, 0, d, params,
                                               BetaSource::fixed(), 1e6, 5)
                             .total;
            vwap_cost += backtest::run_episode(*set.per_ticker[1], panel, 0, d, params,
                                               BetaSource::fixed(), 1e6, 5)
                             .total;
        }
        if (vwap_cost <= twap_cost) ++vwap_wins;
    }
    CHECK(vwap_wins == 20);
}

TEST_CASE("twap cost is invariant under ticker relabeling") {
    // two tickers carrying identical data
    auto panel = flat_panel(2, 1, 100.0, 5e3);
    const auto params = impact::ImpactParams::make(0.003, 0.67);
    const auto schedule = strategies::twap_schedule(1e6, 78);
    backtest::ScheduleStrategy strat("twap", schedule);
    const auto r0 = backtest::run_episode(strat, panel, 0, 0, params, BetaSource::fixed(), 1e6, 5);
    const auto r1 = backtest::run_episode(strat, panel, 1, 0, params, BetaSource::fixed(), 1e6, 5);
    CHECK(r0.total == r1.total);
}

TEST_CASE("evaluate_fold aggregates, pairs and reports") {
    const auto panel = shaped_panel(3, 8, 55, 0.03, 8e-4);
    const auto ctx = context_for(panel, 5, 2e5);
    auto set = backtest::make_benchmark_strategies(ctx);

    backtest::ScenarioSpec scenario;
    scenario.name = "unit";
    scenario.params = impact::ImpactParams::make(0.003, 0.67);
    const auto report = backtest::evaluate_fold(ctx, 0, set.per_ticker, scenario);

    REQUIRE(report.rows.size() == 3);
    REQUIRE(report.strategy_names.size() == 2);
    CHECK(report.intraday_costs.size() == 2);
    CHECK(report.intraday_costs[0].size() == 78);

    // totals equal the sum of per-ticker entries
    for (std::size_t s = 0; s < report.strategy_names.size(); ++s) {
        double sum = 0.0;
        for (const auto& row : report.rows) sum += row.strategies[s].mean_cost;
        CHECK(std::fabs(report.totals.strategies[s].mean_cost - sum) <=
              1e-9 * std::fabs(sum));
    }

    // no policy strategies: no savings columns
    CHECK(!report.rows[0].savings_vs_twap.has_value());
}

TEST_CASE("self-comparison has identically zero savings") {
    const auto panel = shaped_panel(2, 6, 91, 0.02, 5e-4);
    const auto ctx = context_for(panel, 4, 1e5);

    // register twap twice, once under the policy's name
    backtest::FoldStrategySet set;
    set.names = {"twap", "lstm"};
    set.n_strategies = 2;
    const auto minutes = market::trade_minutes(panel.minutes, 5);
    for (int i = 0; i < panel.n_tickers(); ++i) {
        auto real = std::make_unique<backtest::ScheduleStrategy>(
            "twap", strategies::twap_schedule(ctx.x0[i], static_cast<int>(minutes.size())));
        auto alias = std::make_unique<backtest::ScheduleStrategy>(
            "lstm", strategies::twap_schedule(ctx.x0[i], static_cast<int>(minutes.size())));
        set.per_ticker.push_back(real.get());
        set.per_ticker.push_back(alias.get());
        set.owned.push_back(std::move(real));
        set.owned.push_back(std::move(alias));
    }

    backtest::ScenarioSpec scenario;
    scenario.params = impact::ImpactParams::make(0.003, 0.67);
    impact::BetaNoiseSpec noise;
    noise.seed = 5;
    scenario.beta = BetaSource::with_noise(noise);  // paired draws: still exact zero
    const auto report = backtest::evaluate_fold(ctx, 0, set.per_ticker, scenario);
    for (const auto& row : report.rows) {
        REQUIRE(row.savings_vs_twap.has_value());
        CHECK(*row.savings_vs_twap == 0.0);
    }
}

TEST_CASE("report emission round-trips and keeps the required columns") {
    const auto panel = shaped_panel(2, 6, 14, 0.02, 5e-4);
    const auto ctx = context_for(panel, 4, 1e5);
    auto set = backtest::make_benchmark_strategies(ctx);

    // train a tiny policy so the lstm column exists
    policy::TrainConfig tc;
    tc.epochs = 2;
    tc.seed = 1;
    tc.params = impact::ImpactParams::make(0.003, 0.67);
    std::vector<policy::Checkpoint> ckpts;
    for (int i = 0; i < panel.n_tickers(); ++i) {
        const auto trained = policy::train(ctx, i, tc);
        policy::Checkpoint c;
        c.ticker = panel.tickers[i];
        c.weights = trained.weights;
        c.stats = trained.stats;
        ckpts.push_back(std::move(c));
    }
    backtest::add_policy_strategies(set, ctx, ckpts);
    CHECK(set.n_strategies == 3);

    backtest::ScenarioSpec scenario;
    scenario.name = "rt";
    scenario.params = impact::ImpactParams::make(0.003, 0.67);
    const auto report = backtest::evaluate_fold(ctx, 0, set.per_ticker, scenario);
    REQUIRE(report.rows[0].savings_vs_twap.has_value());
    CHECK(*report.rows[0].savings_vs_twap ==
          report.rows[0].find("twap")->mean_cost - report.rows[0].find("lstm")->mean_cost);

    // json round-trip reproduces every value
    std::stringstream js;
    backtest::write_report_json(report, js);
    const auto again = backtest::read_report_json(js);
    REQUIRE(again.rows.size() == report.rows.size());
    for (std::size_t r = 0; r < report.rows.size(); ++r) {
        CHECK(again.rows[r].ticker == report.rows[r].ticker);
        CHECK(again.rows[r].equity_value == report.rows[r].equity_value);
        for (std::size_t s = 0; s < report.strategy_names.size(); ++s) {
            CHECK(std::fabs(again.rows[r].strategies[s].mean_cost -
                            report.rows[r].strategies[s].mean_cost) <=
                  1e-12 * std::fabs(report.rows[r].strategies[s].mean_cost));
            CHECK(again.rows[r].strategies[s].mean_bps == report.rows[r].strategies[s].mean_bps);
        }
    }
    CHECK(again.intraday_costs == report.intraday_costs);

    // csv carries the headline columns
    std::ostringstream cs;
    backtest::write_report_csv(report, cs);
    const std::string csv = cs.str();
    for (const char* col : {"ticker", "daily_volume", "equity_value", "twap_bps", "vwap_bps",
                            "lstm_bps", "savings_vs_twap", "savings_vs_vwap"})
        CHECK(csv.find(col) != std::string::npos);

    // the benchmark comparison table mirrors the published layout
    std::ostringstream cmp;
    backtest::write_comparison_csv(report, "vwap", cmp);
    CHECK(cmp.str().find("ticker,daily_volume,equity_value,strategy_bps,lstm_bps,savings_bps")==0);

    // empty report: header only
    backtest::EvalReport empty;
    empty.scenario = "none";
    std::ostringstream es;
    backtest::write_report_csv(empty, es);
    CHECK(es.str() == "scenario,fold,ticker,x0,daily_volume,equity_value,"
                      "savings_vs_twap,savings_vs_vwap\n");
}

TEST_CASE("policy episode loss ties to the backtest cost") {
    // the training loss of a checkpointed policy equals its backtest total
    const auto panel = shaped_panel(1, 6, 21, 0.03, 8e-4);
    const auto ctx = context_for(panel, 4, 3e5);
    policy::TrainConfig tc;
    tc.epochs = 3;
    tc.seed = 2;
    tc.params = impact::ImpactParams::make(0.003, 0.67);
    const auto trained = policy::train(ctx, 0, tc);

    backtest::PolicyStrategy strat(ctx, 0, trained.weights, trained.stats);
    const int day = 5;
    const auto ep = backtest::run_episode(strat, panel, 0, day, tc.params,
                                          BetaSource::fixed(), ctx.x0[0], 5);

    policy::LossSpec spec{tc.params, ctx.x0[0], 5};
    const auto F = policy::feature_matrix(ctx, day);
    const double loss =
        policy::episode_loss(trained.weights, F, panel.day_prices(0, day),
                             panel.day_volumes(0, day), spec);
    CHECK(std::fabs(loss - ep.total) <= 1e-10 * ep.total);
}

TEST_CASE("missing checkpoint is a configuration error") {
    const auto panel = shaped_panel(2, 6, 31, 0.02, 5e-4);
    const auto ctx = context_for(panel, 4, 1e5);
    auto set = backtest::make_benchmark_strategies(ctx);
    std::vector<policy::Checkpoint> one;
    policy::Checkpoint c;
    c.ticker = panel.tickers[0];
    c.weights = policy::PolicyWeights::init({ctx.input_dim(), 50}, 1);
    c.stats = ctx.stats;
    one.push_back(std::move(c));
    CHECK_THROWS_AS(backtest::add_policy_strategies(set, ctx, one), ConfigError);
}
