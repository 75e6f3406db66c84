// Acceptance suite: runs every gate criterion end to end and prints one
// PASS/FAIL line per criterion. Exit code is the number of failures.
//
// Usage: acceptance [N ...]   (run only the listed criteria)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <thread>
#include <vector>

#include "exsim/backtest.hpp"
#include "exsim/oracle.hpp"
#include "exsim/rng.hpp"
#include "support/quadrature.hpp"
#include "support/replication.hpp"

using namespace exsim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double rel_err(double got, double want) {
    return std::fabs(got - want) / std::max(std::fabs(want), 1e-300);
}

// ---------------------------------------------------------------------------
// Criterion 1: the liquidity coefficient matches the published value.

Outcome criterion_liquidity() {
    const double got = impact::liquidity_coefficient(0.003, 0.67);
    const double err = rel_err(got, 7.87e-5);
    std::ostringstream os;
    os << "C(0.003, 0.67) = " << got << ", off the rounded value by " << err * 100.0 << "%";
    return {err < 1e-2, os.str()};
}

// ---------------------------------------------------------------------------
// Criterion 2: closed-form walk cost vs adaptive quadrature of the swept book
// over 1e4 randomized tuples.

Outcome criterion_quadrature() {
    double worst = 0.0;
    std::uint64_t ctr = 0;
    for (int i = 0; i < 10000; ++i) {
        const double eps = 0.001 + 0.02 * rng::uniform01(rng::key(202, ctr++));
        const double beta = 2.5 * rng::uniform01(rng::key(202, ctr++));
        const double S = 1.0 + 500.0 * rng::uniform01(rng::key(202, ctr++));
        const double V = 10.0 + 1e6 * rng::uniform01(rng::key(202, ctr++));
        double a = (rng::uniform01(rng::key(202, ctr++)) - 0.5) * 2e5;
        if (a == 0.0) a = 1.0;
        const auto p = impact::ImpactParams::make(eps, beta);

        // book at the scale where the density, the impacted price and the
        // closed-form coefficient describe one consistent system; the loss
        // integral is taken in the distance variable u = |s - 1| so shallow
        // walks stay clear of cancellation at the mid
        const auto book = impact::ImpactParams::make(std::pow(eps, beta + 2.0), beta);
        const double walked = std::pow(book.epsilon * (book.beta + 1.0) * std::fabs(a) / V,
                                       1.0 / (book.beta + 1.0));
        auto integrand = [&](double u) {
            return u * V / book.epsilon * std::pow(u, book.beta);
        };
        const double quad = S * testsupport::integrate(integrand, 0.0, walked, 1e-13);
        worst = std::max(worst, rel_err(impact::walk_cost(S, V, a, p), quad));
    }
    std::ostringstream os;
    os << "max relative gap " << worst << " over 10000 tuples";
    return {worst < 1e-8, os.str()};
}

// ---------------------------------------------------------------------------
// Criterion 3: projected-gradient minimizer vs the closed-form benchmark
// schedules, plus the co-state flatness of the VWAP schedule.

Outcome criterion_prop1() {
    double worst_twap = 0.0, worst_vwap = 0.0, worst_residual = 0.0;
    for (double beta : {0.0, 0.5, 0.67, 1.0, 2.0}) {
        for (int T : {2, 4, 78}) {
            oracle::DeterministicInstance flat;
            flat.prices.assign(T, 100.0);
            flat.volumes.assign(T, 3.0);
            flat.x0 = 7.5e5;
            flat.beta = beta;
            const auto twap = oracle::optimal_deterministic_schedule(flat);
            const auto twap_ref = strategies::twap_schedule(flat.x0, T);
            for (int t = 0; t < T; ++t)
                worst_twap = std::max(worst_twap,
                                      rel_err(twap.schedule.actions[t], twap_ref.actions[t]));

            auto shaped = flat;
            for (int t = 0; t < T; ++t) {
                const double z = 2.0 * (t + 0.5) / T - 1.0;
                shaped.volumes[t] = 3.0 * std::exp(1.2 * (z * z - 1.0 / 3.0));
            }
            const auto vwap = oracle::optimal_deterministic_schedule(shaped);
            const auto vwap_ref = strategies::vwap_schedule(shaped.x0, shaped.volumes);
            for (int t = 0; t < T; ++t)
                worst_vwap = std::max(worst_vwap,
                                      rel_err(vwap.schedule.actions[t], vwap_ref.actions[t]));
            worst_residual = std::max(
                worst_residual, oracle::costate_residual(vwap_ref.actions, shaped).residual);
        }
    }
    std::ostringstream os;
    os << "max action error: twap " << worst_twap << ", vwap " << worst_vwap
       << "; vwap co-state residual " << worst_residual;
    return {worst_twap < 1e-6 && worst_vwap < 1e-6 && worst_residual < 1e-8, os.str()};
}

// ---------------------------------------------------------------------------
// Criterion 4: Monte-Carlo martingale and VWAP-optimality check on the
// calibrated log-normal synthetic market.

Outcome criterion_prop2() {
    const auto spec = market::SynthSpec::u_shaped(1, 1, 1e6, 1.2, 0.03, 0.67, 8e-4, 0.0, 3);
    oracle::Prop2Options opts;  // 1e5 paths, 100 perturbations x 1e4 paths
    const auto check = oracle::check_prop2_martingale(spec, opts);
    std::ostringstream os;
    os << "martingale ratio max " << check.max_ratio_deviation_se << " se (binned "
       << check.max_binned_deviation_se << " se); worst perturbation margin "
       << check.worst_margin_se << " se";
    return {check.martingale_ok && check.vwap_lowest, os.str()};
}

// ---------------------------------------------------------------------------
// Criterion 5: reverse-mode gradients vs central finite differences on 200
// random weights across 5 random episodes.

Outcome criterion_gradient() {
    double worst = 0.0;
    int checked = 0;
    for (int episode = 0; episode < 5; ++episode) {
        const std::uint64_t seed = 4000 + episode;
        const int D = 45, K = 5, input = 9;
        Eigen::MatrixXd F(input, D - 1);
        std::vector<double> prices(D), volumes(D);
        std::uint64_t ctr = 0;
        for (int c = 0; c < D - 1; ++c)
            for (int r = 0; r < input; ++r) F(r, c) = rng::normal(rng::key(seed, 1, ctr++));
        for (int m = 0; m < D; ++m) {
            prices[m] = std::exp(0.02 * rng::normal(rng::key(seed, 2, m)));
            volumes[m] = std::exp(0.5 * rng::normal(rng::key(seed, 3, m)));
        }
        policy::LossSpec spec;
        spec.params = impact::ImpactParams::make(1.0, 0.67);
        spec.x0 = 1.5;
        spec.trade_interval = K;

        auto w = policy::PolicyWeights::init({input, 50}, seed);
        Eigen::VectorXd grad;
        policy::episode_gradient(w, F, prices, volumes, spec, grad);
        const double gmax = grad.cwiseAbs().maxCoeff();
        const double h = 1e-5;
        const int n = static_cast<int>(w.parameter_count());
        for (int k = 0; k < 40; ++k, ++checked) {
            const int idx = static_cast<int>(rng::uniform01(rng::key(seed, 4, k)) * n);
            const double keep = w.flat()[idx];
            w.flat()[idx] = keep + h;
            const double up = policy::episode_loss(w, F, prices, volumes, spec);
            w.flat()[idx] = keep - h;
            const double dn = policy::episode_loss(w, F, prices, volumes, spec);
            w.flat()[idx] = keep;
            const double fd = (up - dn) / (2.0 * h);
            const double denom = std::max({std::fabs(fd), std::fabs(grad[idx]), 1e-8 * gmax});
            worst = std::max(worst, std::fabs(fd - grad[idx]) / denom);
        }
    }
    std::ostringstream os;
    os << "max elementwise relative error " << worst << " over " << checked << " weights";
    return {worst < 1e-4, os.str()};
}

// ---------------------------------------------------------------------------
// Criteria 6/7/8 share one desk-scale fixture: a 5-ticker, 105-day synthetic
// panel with the published impact calibration (epsilon 0.003, x0 = 1e6
// shares against a 1e6-share average day, prices near $100).

struct DeskFixture {
    market::Panel panel;
    policy::FoldContext ctx;
    impact::ImpactParams params = impact::ImpactParams::make(0.003, 0.67);
    std::vector<std::uint64_t> seeds{1, 2, 3};
    // per seed: trained checkpoints for all tickers
    std::vector<std::vector<policy::Checkpoint>> trained;

    static market::SynthSpec spec() {
        return market::SynthSpec::u_shaped(5, 105, 1e6, 1.4, 0.015, 0.67, 5e-4, 0.3, 42);
    }

    static DeskFixture& instance() {
        static DeskFixture fixture;
        return fixture;
    }

    backtest::EvalReport evaluate(int seed_slot, const backtest::BetaSource& beta) {
        auto set = backtest::make_benchmark_strategies(ctx);
        backtest::add_policy_strategies(set, ctx, trained.at(seed_slot));
        backtest::ScenarioSpec scenario;
        scenario.name = beta.noisy ? "noisy" : "base";
        scenario.params = params;
        scenario.beta = beta;
        return backtest::evaluate_fold(ctx, 0, set.per_ticker, scenario);
    }

    backtest::EvalReport evaluate_benchmarks() {
        auto set = backtest::make_benchmark_strategies(ctx);
        backtest::ScenarioSpec scenario;
        scenario.params = params;
        return backtest::evaluate_fold(ctx, 0, set.per_ticker, scenario);
    }

    void train_all() {
        if (!trained.empty()) return;
        struct Item {
            std::size_t seed_slot;
            int ticker;
        };
        std::vector<Item> items;
        for (std::size_t s = 0; s < seeds.size(); ++s)
            for (int i = 0; i < panel.n_tickers(); ++i) items.push_back({s, i});
        trained.assign(seeds.size(), std::vector<policy::Checkpoint>(panel.n_tickers()));

        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            while (true) {
                const std::size_t idx = next.fetch_add(1);
                if (idx >= items.size()) return;
                const auto item = items[idx];
                policy::TrainConfig cfg;
                cfg.epochs = 200;
                cfg.seed = seeds[item.seed_slot];
                cfg.params = params;
                const auto result = policy::train(ctx, item.ticker, cfg);
                policy::Checkpoint ckpt;
                ckpt.ticker = panel.tickers[item.ticker];
                ckpt.weights = result.weights;
                ckpt.stats = result.stats;
                trained[item.seed_slot][item.ticker] = std::move(ckpt);
            }
        };
        const unsigned jobs =
            std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                               static_cast<unsigned>(items.size()));
        if (jobs <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
    }

  private:
    DeskFixture() : panel(market::synth_generate(spec())) {
        market::FoldSpec fold{0, 60, 60, 105};
        policy::InventoryRule rule;
        rule.kind = policy::InventoryRule::Kind::fixed;
        rule.value = 1e6;
        ctx = policy::make_fold_context(panel, fold, rule, 0.67, 5);
    }
};

Outcome criterion_training(bool noisy) {
    auto& fixture = DeskFixture::instance();
    fixture.train_all();
    backtest::BetaSource beta = backtest::BetaSource::fixed();
    if (noisy) {
        impact::BetaNoiseSpec spec;
        spec.base_beta = 0.67;
        spec.half_width = 0.3;
        spec.seed = 777;
        beta = backtest::BetaSource::with_noise(spec);
    }
    int wins = 0;
    std::ostringstream os;
    for (std::size_t s = 0; s < fixture.seeds.size(); ++s) {
        const auto report = fixture.evaluate(static_cast<int>(s), beta);
        const double lstm = report.totals.find("lstm")->mean_cost;
        const double vwap = report.totals.find("vwap")->mean_cost;
        const double twap = report.totals.find("twap")->mean_cost;
        const bool ok = noisy ? lstm <= 1.02 * vwap
                              : (lstm <= 1.02 * vwap && lstm <= 1.00 * twap);
        wins += ok ? 1 : 0;
        os << "seed " << fixture.seeds[s] << ": lstm/vwap " << lstm / vwap << ", lstm/twap "
           << lstm / twap << (ok ? " ok; " : " MISS; ");
    }
    os << wins << "/" << fixture.seeds.size() << " seeds within bounds";
    return {2 * wins > static_cast<int>(fixture.seeds.size()), os.str()};
}

Outcome criterion_calibration() {
    auto& fixture = DeskFixture::instance();
    const auto report = fixture.evaluate_benchmarks();
    const double twap_bps = report.totals.find("twap")->pooled_bps;
    const double vwap_bps = report.totals.find("vwap")->pooled_bps;
    std::ostringstream os;
    os << "per-day cost: twap " << twap_bps << " bps, vwap " << vwap_bps << " bps";
    const auto in_band = [](double b) { return b >= 0.5 && b <= 4.0; };
    return {in_band(twap_bps) && in_band(vwap_bps), os.str()};
}

// ---------------------------------------------------------------------------
// Criterion 9: a hand-constructed weight setting replicates the TWAP
// inventory path and reproduces the TWAP backtest cost.

Outcome criterion_replication() {
    const int D = 180, K = 5;
    const auto rep = testsupport::make_twap_replication(D, K);
    const double x0 = 7.7e5;
    std::vector<double> prices(D), volumes(D);
    for (int m = 0; m < D; ++m) {
        prices[m] = 100.0 * std::exp(0.01 * rng::normal(rng::key(909, 1, m)));
        volumes[m] = 5e3 * std::exp(0.4 * rng::normal(rng::key(909, 2, m)));
    }
    policy::LossSpec spec;
    spec.params = impact::ImpactParams::make(0.003, 0.67);
    spec.x0 = x0;
    spec.trade_interval = K;
    const double net = policy::episode_loss(rep.weights, rep.features, prices, volumes, spec);

    const auto plan = strategies::twap_schedule(x0, D / K).inventory_path();
    const auto ep = backtest::run_episode(std::span<const double>(plan).subspan(1), prices,
                                          volumes, spec.params, backtest::BetaSource::fixed(),
                                          x0, 0, K);
    const double gap = std::fabs(net - ep.total) / ep.total;
    std::ostringstream os;
    os << "episode loss " << net << " vs twap backtest cost " << ep.total << " (relative gap "
       << gap << ")";
    return {gap <= 1e-10, os.str()};
}

// ---------------------------------------------------------------------------
// Criterion 10: the synth -> train -> backtest -> report pipeline is byte
// reproducible under a fixed seed.

Outcome criterion_determinism() {
    const fs::path scratch = fs::temp_directory_path() / "exsim_acceptance_c10";
    fs::remove_all(scratch);
    fs::create_directories(scratch);

    auto config_for = [&](const fs::path& dir) {
        std::ostringstream os;
        os << "data = synth\ncache_path = " << (dir / "panel.exsp").string()
           << "\noutput_dir = " << dir.string() << "\n[synth]\ntickers = 2\ndays = 7\n"
           << "daily_volume = 1e6\nu_depth = 1.4\nsigma = 0.02\nprice_vol = 8e-4\n"
           << "correlation = 0.2\nseed = 31\n[folds]\ncount = 1\ntrain_days = 3\ntest_days = 4\n"
           << "[train]\nepochs = 3\nseed = 6\n[scenario base]\nepsilon = 0.003\nbeta = 0.67\n"
           << "x0_rule = fixed\nx0_fixed = 500000\n[scenario noisy]\nepsilon = 0.003\n"
           << "beta = 0.67\nx0_rule = fixed\nx0_fixed = 500000\nbeta_noise = 0.3\nnoise_seed = 2\n";
        return os.str();
    };

    auto run_pipeline = [&](const fs::path& dir) -> bool {
        fs::create_directories(dir);
        const fs::path cfg = dir / "run.cfg";
        std::ofstream(cfg) << config_for(dir);
        const std::string base = std::string(EXSIM_BIN) + " --config " + cfg.string() + " ";
        const std::string redirect = " > /dev/null 2>&1";
        for (const char* step : {"synth", "train", "backtest"}) {
            if (std::system((base + step + redirect).c_str()) != 0) return false;
        }
        return std::system((base + "report --from " +
                            (dir / "report_base_fold0.json").string() + " --format csv" +
                            redirect)
                               .c_str()) == 0;
    };

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    };

    const fs::path a = scratch / "a", b = scratch / "b";
    if (!run_pipeline(a) || !run_pipeline(b)) return {false, "pipeline command failed"};

    const char* artifacts[] = {"panel.exsp",
                               "checkpoints/base/SYN000_fold0.expw",
                               "checkpoints/base/SYN001_fold0.expw",
                               "curves/base_SYN000_fold0.csv",
                               "report_base_fold0.json",
                               "report_base_fold0.csv",
                               "report_noisy_fold0.json",
                               "reemit_base_fold0.csv",
                               "fold_costs_base.csv",
                               "intraday_noisy.csv"};
    int same = 0;
    std::string first_diff;
    for (const char* f : artifacts) {
        if (!fs::exists(a / f) || !fs::exists(b / f)) {
            if (first_diff.empty()) first_diff = std::string(f) + " missing";
            continue;
        }
        if (slurp(a / f) == slurp(b / f))
            ++same;
        else if (first_diff.empty())
            first_diff = f;
    }
    std::ostringstream os;
    os << same << "/" << std::size(artifacts) << " artifacts byte-identical";
    if (!first_diff.empty()) os << " (first difference: " << first_diff << ")";
    fs::remove_all(scratch);
    return {same == static_cast<int>(std::size(artifacts)), os.str()};
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int number;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "liquidity coefficient matches the published calibration",
         criterion_liquidity},
        {2, "closed-form walk cost agrees with book quadrature", criterion_quadrature},
        {3, "projected-gradient optimum matches TWAP/VWAP closed forms", criterion_prop1},
        {4, "volume-moment martingale and VWAP optimality (Monte Carlo)", criterion_prop2},
        {5, "reverse-mode gradients match finite differences", criterion_gradient},
        {6, "trained policy beats TWAP and tracks VWAP on the desk panel",
         [] { return criterion_training(false); }},
        {7, "the same weights hold up under a noisy book exponent",
         [] { return criterion_training(true); }},
        {8, "cost calibration lands in the published bps band", criterion_calibration},
        {9, "hand-built weights replicate the TWAP path and its cost", criterion_replication},
        {10, "seeded synth/train/backtest/report pipeline is byte-stable",
         criterion_determinism},
    };

    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() &&
            std::find(selected.begin(), selected.end(), c.number) == selected.end())
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("threw: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s  criterion %2d  %-62s [%8.1fs]  %s\n", outcome.pass ? "PASS" : "FAIL",
                    c.number, c.name, secs, outcome.detail.c_str());
        std::fflush(stdout);
        if (!outcome.pass) ++failures;
    }
    return failures;
}
