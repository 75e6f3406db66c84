#include <CLI11.hpp>
#include <iostream>

#include "exsim/commands.hpp"
#include "exsim/config.hpp"

using namespace exsim;

int main(int argc, char** argv) {
    CLI::App app{"exsim - large-order execution backtesting engine"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("-c,--config", config_path, "configuration file")
        ->envname("EXSIM_CONFIG");
    std::vector<std::string> overrides;
    app.add_option("--set", overrides, "override a config key, e.g. --set train.epochs=50");

    auto* ingest = app.add_subcommand("ingest", "parse a minute-bar CSV into a panel cache");
    std::string csv_path, cache_path;
    ingest->add_option("--csv", csv_path, "input CSV path");
    ingest->add_option("--cache", cache_path, "output cache path");

    auto* synth = app.add_subcommand("synth", "generate a synthetic panel cache");

    auto* train = app.add_subcommand("train", "train policy networks");
    cli::TrainSelection sel;
    train->add_option("--tickers", sel.tickers, "tickers to train (default: all)");
    train->add_option("--folds", sel.folds, "fold indices to train (default: all)");
    train->add_option("-j,--jobs", sel.jobs, "parallel (ticker, fold) workers");
    train->add_flag("--resume", sel.resume, "continue from existing checkpoints");

    auto* backtest = app.add_subcommand("backtest", "evaluate strategies on the test folds");
    std::vector<std::string> scenario_filter;
    backtest->add_option("--scenarios", scenario_filter, "scenario names (default: all)");

    auto* verify = app.add_subcommand("verify", "run the optimality verification suite");

    auto* report = app.add_subcommand("report", "re-emit a saved report");
    std::string from_json, format = "csv";
    report->add_option("--from", from_json, "report JSON produced by backtest")->required();
    report->add_option("--format", format, "csv or json");

    CLI11_PARSE(app, argc, argv);

    try {
        cli::RunConfig cfg =
            config_path.empty() ? cli::default_config() : cli::parse_config_file(config_path);
        for (const auto& assignment : overrides) cli::apply_override(cfg, assignment);

        if (app.got_subcommand(ingest)) cli::cmd_ingest(cfg, csv_path, cache_path);
        else if (app.got_subcommand(synth)) cli::cmd_synth(cfg);
        else if (app.got_subcommand(train)) cli::cmd_train(cfg, sel);
        else if (app.got_subcommand(backtest)) cli::cmd_backtest(cfg, scenario_filter);
        else if (app.got_subcommand(verify)) cli::cmd_verify(cfg);
        else if (app.got_subcommand(report)) cli::cmd_report(cfg, from_json, format);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
