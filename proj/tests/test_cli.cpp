#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "exsim/commands.hpp"
#include "exsim/config.hpp"
#include "exsim/policy_net.hpp"
#include "exsim/rng.hpp"

using namespace exsim;
namespace fs = std::filesystem;

namespace {

const fs::path kScratch = fs::temp_directory_path() / "exsim_cli_test";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

int run(const std::string& args, const fs::path& out = {}, const fs::path& err = {}) {
    std::string cmd = std::string(EXSIM_BIN) + " " + args;
    cmd += " > " + (out.empty() ? (kScratch / "stdout.txt").string() : out.string());
    cmd += " 2> " + (err.empty() ? (kScratch / "stderr.txt").string() : err.string());
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string base_config(const fs::path& dir, int epochs = 2, std::uint64_t seed = 11) {
    std::ostringstream os;
    os << "data = synth\n"
       << "cache_path = " << (dir / "panel.exsp").string() << "\n"
       << "output_dir = " << dir.string() << "\n"
       << "\n[synth]\n"
       << "tickers = 2\ndays = 5\ndaily_volume = 1e6\nu_depth = 1.4\nsigma = 0.03\n"
       << "price_vol = 8e-4\ncorrelation = 0.2\nseed = 77\n"
       << "\n[folds]\ncount = 1\ntrain_days = 2\ntest_days = 3\n"
       << "\n[train]\nepochs = " << epochs << "\nlearning_rate = 0.001\nseed = " << seed
       << "\nscenario = base\n"
       << "\n[scenario base]\nepsilon = 0.003\nbeta = 0.67\nx0_rule = fixed\nx0_fixed = 200000\n"
       << "\n[scenario noisy]\nepsilon = 0.003\nbeta = 0.67\nx0_rule = fixed\nx0_fixed = 200000\n"
       << "beta_noise = 0.3\nnoise_seed = 5\n";
    return os.str();
}

std::string fixture_csv(int tickers, int days) {
    std::ostringstream os;
    os << "date,minute,ticker,price,volume\n";
    for (int d = 1; d <= days; ++d)
        for (int m = 1; m <= 390; ++m)
            for (int i = 0; i < tickers; ++i)
                os << "2022-03-0" << d << ',' << m << ",TK" << i << ','
                   << (50.0 + i + 0.01 * m) << ',' << (2000 + 7 * m) << '\n';
    return os.str();
}

struct ScratchDir {
    ScratchDir() {
        fs::remove_all(kScratch);
        fs::create_directories(kScratch);
    }
};

}  // namespace

TEST_CASE("config parser") {
    std::istringstream in(base_config("/tmp/x"));
    const auto cfg = cli::parse_config(in);
    CHECK(cfg.data == "synth");
    CHECK(cfg.synth.tickers == 2);
    CHECK(cfg.folds.test_days == 3);
    CHECK(cfg.train.epochs == 2);
    REQUIRE(cfg.scenarios.size() == 2);
    CHECK(cfg.scenario("noisy").beta_noise == 0.3);
    CHECK(cfg.scenario("base").x0_fixed == 200000.0);
    CHECK_THROWS_AS(cfg.scenario("absent"), ConfigError);

    // unknown keys and malformed lines are configuration errors
    std::istringstream bad1("nonsense_key = 3\n");
    CHECK_THROWS_AS(cli::parse_config(bad1), ConfigError);
    std::istringstream bad2("[synth]\ndays == 4\n");
    CHECK_THROWS_AS(cli::parse_config(bad2), ConfigError);
    std::istringstream bad3("[scenario a]\nepsilon = 0.003\n[scenario a]\nbeta = 1\n");
    CHECK_THROWS_AS(cli::parse_config(bad3), ConfigError);

    // overrides reuse the same validation
    auto cfg2 = cfg;
    cli::apply_override(cfg2, "train.epochs=9");
    CHECK(cfg2.train.epochs == 9);
    cli::apply_override(cfg2, "scenario base.epsilon=0.006");
    CHECK(cfg2.scenario("base").epsilon == 0.006);
    CHECK_THROWS_AS(cli::apply_override(cfg2, "synth.bogus=1"), ConfigError);

    // epoch count stays out of the fingerprint so runs can resume
    auto cfg3 = cfg;
    cli::apply_override(cfg3, "train.epochs=100");
    CHECK(cfg3.hash() == cfg.hash());
    cli::apply_override(cfg3, "train.seed=99");
    CHECK(cfg3.hash() != cfg.hash());
}

TEST_CASE("synth command is deterministic and feeds the pipeline") {
    ScratchDir scratch;
    const fs::path cfg_path = kScratch / "run.cfg";
    spit(cfg_path, base_config(kScratch));

    CHECK(run("--config " + cfg_path.string() + " synth") == 0);
    REQUIRE(fs::exists(kScratch / "panel.exsp"));
    const std::string first = slurp(kScratch / "panel.exsp");
    CHECK(run("--config " + cfg_path.string() + " synth") == 0);
    CHECK(slurp(kScratch / "panel.exsp") == first);

    // the config is echoed for provenance
    CHECK(fs::exists(kScratch / "config_echo.cfg"));
    CHECK(slurp(kScratch / "config_echo.cfg") == base_config(kScratch));
}

TEST_CASE("ingest command handles fixtures and bad rows") {
    ScratchDir scratch;
    const fs::path cfg_path = kScratch / "run.cfg";
    spit(cfg_path, base_config(kScratch));
    const fs::path csv = kScratch / "bars.csv";
    spit(csv, fixture_csv(2, 3));
    const fs::path cache = kScratch / "ingested.exsp";

    CHECK(run("--config " + cfg_path.string() + " ingest --csv " + csv.string() + " --cache " +
              cache.string()) == 0);
    REQUIRE(fs::exists(cache));
    const std::string first = slurp(cache);
    CHECK(run("--config " + cfg_path.string() + " ingest --csv " + csv.string() + " --cache " +
              cache.string()) == 0);
    CHECK(slurp(cache) == first);  // re-ingest is byte-identical

    // malformed row: nonzero exit, line number on stderr
    spit(csv, "date,minute,ticker,price,volume\n2022-03-01,1,TK0,50,10\nbroken line\n");
    const fs::path err = kScratch / "err.txt";
    CHECK(run("--config " + cfg_path.string() + " ingest --csv " + csv.string() + " --cache " +
              cache.string(), {}, err) == 3);
    CHECK(slurp(err).find("line 3") != std::string::npos);
}

TEST_CASE("train, backtest and report round trip deterministically") {
    ScratchDir scratch;
    const fs::path cfg_path = kScratch / "run.cfg";
    spit(cfg_path, base_config(kScratch));
    const std::string base = "--config " + cfg_path.string();

    REQUIRE(run(base + " synth") == 0);
    REQUIRE(run(base + " train") == 0);
    REQUIRE(fs::exists(kScratch / "checkpoints/base/SYN000_fold0.expw"));
    REQUIRE(fs::exists(kScratch / "checkpoints/base/SYN001_fold0.expw"));
    REQUIRE(fs::exists(kScratch / "curves/base_SYN000_fold0.csv"));

    REQUIRE(run(base + " backtest") == 0);
    for (const char* f :
         {"report_base_fold0.json", "report_base_fold0.csv", "report_noisy_fold0.json",
          "vs_twap_base_fold0.csv", "vs_vwap_noisy_fold0.csv", "fold_costs_base.csv",
          "intraday_noisy.csv"})
        CHECK(fs::exists(kScratch / f));

    // byte-identical on repetition (same seeds)
    const std::string report1 = slurp(kScratch / "report_base_fold0.json");
    const std::string noisy1 = slurp(kScratch / "report_noisy_fold0.json");
    REQUIRE(run(base + " backtest") == 0);
    CHECK(slurp(kScratch / "report_base_fold0.json") == report1);
    CHECK(slurp(kScratch / "report_noisy_fold0.json") == noisy1);

    // re-emission from the saved json
    REQUIRE(run(base + " report --from " + (kScratch / "report_base_fold0.json").string() +
                " --format csv") == 0);
    CHECK(fs::exists(kScratch / "reemit_base_fold0.csv"));
    CHECK(slurp(kScratch / "reemit_base_fold0.csv") == slurp(kScratch / "report_base_fold0.csv"));
    CHECK(run(base + " report --from " + (kScratch / "report_base_fold0.json").string() +
              " --format bogus") == 2);
}

TEST_CASE("zero learning rate leaves the checkpoint at the initialization") {
    ScratchDir scratch;
    const fs::path cfg_path = kScratch / "run.cfg";
    spit(cfg_path, base_config(kScratch, 1));
    const std::string base = "--config " + cfg_path.string();
    REQUIRE(run(base + " synth") == 0);
    REQUIRE(run(base + " --set train.learning_rate=0 train") == 0);

    const auto ckpt = policy::load_checkpoint((kScratch / "checkpoints/base/SYN000_fold0.expw").string());
    const auto init = policy::PolicyWeights::init({1 + 4 * 2, 50}, rng::key(11, 0x696e6974ULL, 0));
    CHECK(ckpt.weights.flat() == init.flat());
    CHECK(ckpt.epochs_done == 1);
}

TEST_CASE("interrupted training resumes to the same weights") {
    ScratchDir scratch;
    const fs::path cfg_path = kScratch / "run.cfg";
    spit(cfg_path, base_config(kScratch, 6));
    const std::string base = "--config " + cfg_path.string();
    REQUIRE(run(base + " synth") == 0);

    // one-shot run to 6 epochs
    REQUIRE(run(base + " train") == 0);
    const auto full =
        policy::load_checkpoint((kScratch / "checkpoints/base/SYN001_fold0.expw").string());

    // interrupted at 2, resumed to 6
    REQUIRE(run(base + " --set train.epochs=2 train") == 0);
    REQUIRE(run(base + " train --resume") == 0);
    const auto resumed =
        policy::load_checkpoint((kScratch / "checkpoints/base/SYN001_fold0.expw").string());
    CHECK(resumed.epochs_done == 6);
    CHECK((resumed.weights.flat() - full.weights.flat()).cwiseAbs().maxCoeff() <= 1e-12);

    // resume under a different fingerprint is refused
    REQUIRE(run(base + " --set train.seed=12 --set train.epochs=8 train --resume") == 2);
}

TEST_CASE("backtest without checkpoints runs the benchmarks only") {
    ScratchDir scratch;
    const fs::path cfg_path = kScratch / "run.cfg";
    spit(cfg_path, base_config(kScratch));
    const std::string base = "--config " + cfg_path.string();
    REQUIRE(run(base + " synth") == 0);
    REQUIRE(run(base + " backtest --scenarios base") == 0);
    const std::string csv = slurp(kScratch / "report_base_fold0.csv");
    CHECK(csv.find("twap_cost") != std::string::npos);
    CHECK(csv.find("lstm") == std::string::npos);
    CHECK(!fs::exists(kScratch / "vs_twap_base_fold0.csv"));
}

TEST_CASE("missing inputs map to the documented exit codes") {
    ScratchDir scratch;
    const fs::path cfg_path = kScratch / "run.cfg";
    spit(cfg_path, base_config(kScratch));
    // no panel cache yet: data error
    CHECK(run("--config " + cfg_path.string() + " train") == 3);
    // unreadable config: config error
    CHECK(run("--config " + (kScratch / "absent.cfg").string() + " synth") == 2);
    // config through the environment variable
    const std::string env_cmd = "EXSIM_CONFIG=" + cfg_path.string() + " " + EXSIM_BIN +
                                " synth > /dev/null 2>&1";
    CHECK(WEXITSTATUS(std::system(env_cmd.c_str())) == 0);
    CHECK(fs::exists(kScratch / "panel.exsp"));
}
