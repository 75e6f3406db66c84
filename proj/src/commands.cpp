#include "exsim/commands.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "exsim/io_util.hpp"
#include "exsim/oracle.hpp"

namespace exsim::cli {

namespace fs = std::filesystem;

market::SynthSpec synth_spec(const RunConfig& cfg) {
    const auto& s = cfg.synth;
    return market::SynthSpec::u_shaped(s.tickers, s.days, s.daily_volume, s.u_depth, s.sigma,
                                       cfg.scenario(cfg.train.scenario).beta, s.price_vol,
                                       s.correlation, s.seed, s.base_price);
}

policy::InventoryRule inventory_rule(const ScenarioSection& scenario) {
    policy::InventoryRule rule;
    if (scenario.x0_rule == "fixed") {
        rule.kind = policy::InventoryRule::Kind::fixed;
        rule.value = scenario.x0_fixed;
    } else {
        rule.kind = policy::InventoryRule::Kind::adv_fraction;
        rule.value = scenario.x0_fraction;
    }
    return rule;
}

backtest::BetaSource beta_source(const ScenarioSection& scenario) {
    if (scenario.beta_noise <= 0.0) return backtest::BetaSource::fixed();
    impact::BetaNoiseSpec spec;
    spec.base_beta = scenario.beta;
    spec.half_width = scenario.beta_noise;
    spec.seed = scenario.noise_seed;
    return backtest::BetaSource::with_noise(spec);
}

std::string checkpoint_path(const RunConfig& cfg, const std::string& scenario,
                            const std::string& ticker, int fold) {
    return cfg.output_dir + "/checkpoints/" + scenario + "/" + ticker + "_fold" +
           std::to_string(fold) + ".expw";
}

market::Panel load_cached_panel(const RunConfig& cfg) {
    if (!fs::exists(cfg.cache_path))
        throw DataError("panel cache " + cfg.cache_path + " not found; run `synth` or `ingest` first");
    return market::load_panel(cfg.cache_path);
}

void echo_config(const RunConfig& cfg) {
    fs::create_directories(cfg.output_dir);
    std::ofstream out(cfg.output_dir + "/config_echo.cfg", std::ios::trunc);
    out << cfg.raw_text;
}

void cmd_ingest(const RunConfig& cfg, const std::string& csv_path, const std::string& cache_path) {
    echo_config(cfg);
    const std::string src = csv_path.empty() ? cfg.csv_path : csv_path;
    const std::string dst = cache_path.empty() ? cfg.cache_path : cache_path;
    if (src.empty()) throw ConfigError("ingest: no CSV path given (csv_path)");
    market::FillReport fills;
    const market::Panel panel = market::parse_panel_file(src, &fills);
    if (!fs::path(dst).parent_path().empty()) fs::create_directories(fs::path(dst).parent_path());
    market::save_panel(panel, dst);
    std::cout << "ingested " << panel.n_tickers() << " tickers x " << panel.n_days()
              << " days from " << src << "\n";
    for (std::size_t i = 0; i < fills.tickers.size(); ++i)
        if (fills.filled_cells[i] > 0)
            std::cout << "  filled " << fills.filled_cells[i] << " missing cells for "
                      << fills.tickers[i] << "\n";
    std::cout << "filled cells total: " << fills.total << "\n";
    std::cout << "wrote " << dst << "\n";
}

void cmd_synth(const RunConfig& cfg) {
    echo_config(cfg);
    const market::Panel panel = market::synth_generate(synth_spec(cfg));
    if (!fs::path(cfg.cache_path).parent_path().empty())
        fs::create_directories(fs::path(cfg.cache_path).parent_path());
    market::save_panel(panel, cfg.cache_path);
    std::cout << "synthesized " << panel.n_tickers() << " tickers x " << panel.n_days()
              << " days (seed " << cfg.synth.seed << ")\n";
    std::cout << "wrote " << cfg.cache_path << "\n";
}

namespace {

void write_curve(const std::string& path, const std::vector<double>& curve, int first_epoch,
                 bool append) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!append) out << "epoch,mean_train_loss\n";
    for (std::size_t i = 0; i < curve.size(); ++i)
        out << (first_epoch + static_cast<int>(i)) << ',' << io::fmt17(curve[i]) << '\n';
}

}  // namespace

void cmd_train(const RunConfig& cfg, const TrainSelection& sel) {
    echo_config(cfg);
    const market::Panel panel = load_cached_panel(cfg);
    const auto folds = market::build_folds(panel.n_days(), cfg.folds.count, cfg.folds.train_days,
                                           cfg.folds.test_days);
    const auto& scen = cfg.scenario(cfg.train.scenario);

    std::vector<int> fold_ids = sel.folds;
    if (fold_ids.empty())
        for (int k = 0; k < static_cast<int>(folds.size()); ++k) fold_ids.push_back(k);
    std::vector<int> ticker_ids;
    if (sel.tickers.empty()) {
        for (int i = 0; i < panel.n_tickers(); ++i) ticker_ids.push_back(i);
    } else {
        for (const auto& name : sel.tickers) {
            const int idx = panel.ticker_index(name);
            if (idx < 0) throw ConfigError("train: unknown ticker " + name);
            ticker_ids.push_back(idx);
        }
    }
    for (int k : fold_ids)
        if (k < 0 || k >= static_cast<int>(folds.size()))
            throw ConfigError("train: fold index out of range: " + std::to_string(k));

    fs::create_directories(cfg.output_dir + "/checkpoints/" + scen.name);
    fs::create_directories(cfg.output_dir + "/curves");

    // Contexts are immutable once built and shared across worker threads.
    std::vector<policy::FoldContext> contexts;
    contexts.reserve(fold_ids.size());
    for (int k : fold_ids)
        contexts.push_back(policy::make_fold_context(panel, folds[k], inventory_rule(scen),
                                                     scen.beta, cfg.trade_interval));

    policy::TrainConfig tc;
    tc.epochs = cfg.train.epochs;
    tc.adam.lr = cfg.train.learning_rate;
    tc.params = impact::ImpactParams::make(scen.epsilon, scen.beta);
    tc.seed = cfg.train.seed;
    tc.batch_days = cfg.train.batch_days;

    struct Item {
        int fold_slot;
        int ticker;
    };
    std::vector<Item> items;
    for (std::size_t f = 0; f < fold_ids.size(); ++f)
        for (int t : ticker_ids) items.push_back({static_cast<int>(f), t});

    std::vector<std::string> logs(items.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mu;

    auto worker = [&]() {
        while (true) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= items.size() || failed.load()) return;
            const Item item = items[idx];
            const int fold_id = fold_ids[item.fold_slot];
            const auto& ctx = contexts[item.fold_slot];
            const std::string ticker = panel.tickers[item.ticker];
            const std::string ckpt_file = checkpoint_path(cfg, scen.name, ticker, fold_id);
            const std::string curve_file =
                cfg.output_dir + "/curves/" + scen.name + "_" + ticker + "_fold" +
                std::to_string(fold_id) + ".csv";
            try {
                policy::TrainResult result;
                int first_epoch = 1;
                bool append = false;
                if (sel.resume && fs::exists(ckpt_file)) {
                    const auto ckpt = policy::load_checkpoint(ckpt_file);
                    if (ckpt.config_hash != cfg.hash())
                        throw ConfigError("resume: checkpoint " + ckpt_file +
                                          " was trained under a different configuration");
                    if (!ckpt.opt)
                        throw ConfigError("resume: checkpoint lacks optimizer state");
                    result.weights = ckpt.weights;
                    result.stats = ckpt.stats;
                    result.opt = *ckpt.opt;
                    result.epochs_done = ckpt.epochs_done;
                    first_epoch = ckpt.epochs_done + 1;
                    append = true;
                    policy::train_more(ctx, item.ticker, tc, result);
                } else {
                    result = policy::train(ctx, item.ticker, tc);
                }
                policy::Checkpoint ckpt;
                ckpt.ticker = ticker;
                ckpt.fold_index = static_cast<std::uint32_t>(fold_id);
                ckpt.config_hash = cfg.hash();
                ckpt.weights = result.weights;
                ckpt.stats = result.stats;
                ckpt.opt = result.opt;
                ckpt.epochs_done = result.epochs_done;
                policy::save_checkpoint(ckpt, ckpt_file);
                write_curve(curve_file, result.curve, first_epoch, append);
                std::ostringstream os;
                os << "trained " << ticker << " fold " << fold_id << " ("
                   << result.epochs_done << " epochs";
                if (!result.curve.empty())
                    os << ", final mean loss " << io::fmt17(result.curve.back());
                os << ")";
                logs[idx] = os.str();
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!failed.exchange(true)) first_error = std::current_exception();
                return;
            }
        }
    };

    const int jobs = std::max(1, sel.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < std::min<int>(jobs, static_cast<int>(items.size())); ++j)
            pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failed.load()) std::rethrow_exception(first_error);
    for (const auto& line : logs) std::cout << line << "\n";
}

namespace {

std::vector<policy::Checkpoint> fold_checkpoints(const RunConfig& cfg, const market::Panel& panel,
                                                 int fold_id, bool& any_found) {
    std::vector<policy::Checkpoint> out;
    any_found = false;
    std::vector<std::string> missing;
    for (const auto& ticker : panel.tickers) {
        const std::string path = checkpoint_path(cfg, cfg.train.scenario, ticker, fold_id);
        if (fs::exists(path)) {
            any_found = true;
            out.push_back(policy::load_checkpoint(path));
        } else {
            missing.push_back(path);
        }
    }
    if (any_found && !missing.empty())
        throw ConfigError("backtest: missing checkpoint " + missing.front());
    return out;
}

bool same_inventory_rule(const ScenarioSection& a, const ScenarioSection& b) {
    if (a.x0_rule != b.x0_rule) return false;
    if (a.x0_rule == "fixed") return a.x0_fixed == b.x0_fixed;
    return a.x0_fraction == b.x0_fraction;
}

}  // namespace

void cmd_backtest(const RunConfig& cfg, const std::vector<std::string>& scenario_filter) {
    echo_config(cfg);
    const market::Panel panel = load_cached_panel(cfg);
    const auto folds = market::build_folds(panel.n_days(), cfg.folds.count, cfg.folds.train_days,
                                           cfg.folds.test_days);
    const auto& train_scen = cfg.scenario(cfg.train.scenario);

    std::vector<const ScenarioSection*> selected;
    if (scenario_filter.empty()) {
        for (const auto& s : cfg.scenarios) selected.push_back(&s);
    } else {
        for (const auto& name : scenario_filter) selected.push_back(&cfg.scenario(name));
    }

    for (const ScenarioSection* scen : selected) {
        std::vector<backtest::EvalReport> reports;
        for (int k = 0; k < static_cast<int>(folds.size()); ++k) {
            auto ctx = policy::make_fold_context(panel, folds[k], inventory_rule(*scen),
                                                 scen->beta, cfg.trade_interval);
            auto set = backtest::make_benchmark_strategies(ctx);
            bool any = false;
            const auto ckpts = fold_checkpoints(cfg, panel, k, any);
            if (any) {
                if (!same_inventory_rule(*scen, train_scen) || scen->beta != train_scen.beta)
                    throw ConfigError("backtest: scenario " + scen->name +
                                      " does not match the inventory rule or base beta the "
                                      "checkpoints were trained with");
                backtest::add_policy_strategies(set, ctx, ckpts);
            }
            backtest::ScenarioSpec spec;
            spec.name = scen->name;
            spec.params = impact::ImpactParams::make(scen->epsilon, scen->beta);
            spec.beta = beta_source(*scen);
            auto report = backtest::evaluate_fold(ctx, k, set.per_ticker, spec);

            const std::string stem =
                cfg.output_dir + "/report_" + scen->name + "_fold" + std::to_string(k);
            {
                std::ofstream out(stem + ".json", std::ios::trunc);
                backtest::write_report_json(report, out);
            }
            {
                std::ofstream out(stem + ".csv", std::ios::trunc);
                backtest::write_report_csv(report, out);
            }
            if (any) {
                std::ofstream tw(cfg.output_dir + "/vs_twap_" + scen->name + "_fold" +
                                     std::to_string(k) + ".csv",
                                 std::ios::trunc);
                backtest::write_comparison_csv(report, "twap", tw);
                std::ofstream vw(cfg.output_dir + "/vs_vwap_" + scen->name + "_fold" +
                                     std::to_string(k) + ".csv",
                                 std::ios::trunc);
                backtest::write_comparison_csv(report, "vwap", vw);
            }
            std::cout << "scenario " << scen->name << " fold " << k << ":";
            for (const auto& m : report.totals.strategies)
                std::cout << " " << m.name << " $" << io::fmt17(m.mean_cost);
            std::cout << "\n";
            reports.push_back(std::move(report));
        }
        {
            std::ofstream out(cfg.output_dir + "/fold_costs_" + scen->name + ".csv",
                              std::ios::trunc);
            backtest::write_fold_costs_csv(reports, out);
        }
        {
            std::ofstream out(cfg.output_dir + "/intraday_" + scen->name + ".csv",
                              std::ios::trunc);
            backtest::write_intraday_csv(reports, out);
        }
    }
}

void cmd_verify(const RunConfig& cfg) {
    echo_config(cfg);
    const std::string prop1 = oracle::prop1_report_json();
    market::SynthSpec spec = synth_spec(cfg);
    spec.n_tickers = 1;
    const std::string prop2 = oracle::prop2_report_json(spec);
    std::ofstream out(cfg.output_dir + "/verification.json", std::ios::trunc);
    out << "{\n\"prop1\": " << prop1 << ",\n\"prop2\": " << prop2 << "\n}\n";
    const bool p1 = prop1.find("\"pass\": true") != std::string::npos;
    const bool p2 = prop2.find("\"pass\": true") != std::string::npos;
    std::cout << (p1 ? "PASS" : "FAIL") << " prop1: deterministic-volume optimality\n";
    std::cout << (p2 ? "PASS" : "FAIL") << " prop2: stochastic-volume martingale + VWAP optimality\n";
    if (!p1 || !p2) throw NumericalError("verification failed; see verification.json");
}

void cmd_report(const RunConfig& cfg, const std::string& from_json, const std::string& format) {
    echo_config(cfg);
    std::ifstream in(from_json);
    if (!in) throw DataError("cannot open report " + from_json);
    const auto report = backtest::read_report_json(in);
    const std::string stem = cfg.output_dir + "/reemit_" + report.scenario + "_fold" +
                             std::to_string(report.fold);
    if (format == "csv") {
        std::ofstream out(stem + ".csv", std::ios::trunc);
        backtest::write_report_csv(report, out);
        std::cout << "wrote " << stem << ".csv\n";
    } else if (format == "json") {
        std::ofstream out(stem + ".json", std::ios::trunc);
        backtest::write_report_json(report, out);
        std::cout << "wrote " << stem << ".json\n";
    } else {
        throw ConfigError("report: format must be csv or json");
    }
}

}  // namespace exsim::cli
