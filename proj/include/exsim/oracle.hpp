#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "exsim/market_data.hpp"
#include "exsim/strategies.hpp"

// Independent numerical verification of the optimality propositions:
// convex minimization of the deterministic execution problem and
// Monte-Carlo checks of the co-state / martingale conditions.

namespace exsim::oracle {

// Deterministic instance: expected prices (constant under the martingale
// assumption), volume proxies, inventory, book exponent and trade count.
struct DeterministicInstance {
    std::vector<double> prices;   // S_bar_1..T
    std::vector<double> volumes;  // V_bar_1..T
    double x0 = 1.0;
    double beta = 0.67;

    int T() const { return static_cast<int>(prices.size()); }
    void validate() const;

    // Objective sum_t S_t V_t^(-1/(beta+1)) |a_{t-1}|^((beta+2)/(beta+1)).
    double objective(std::span<const double> actions) const;
};

struct PgdOptions {
    double tol = 1e-10;        // projected-gradient norm relative to the full gradient
    int max_iterations = 200000;
    double initial_step = 1.0;
};

struct PgdResult {
    strategies::Schedule schedule;
    int iterations = 0;
    double projected_gradient_norm = 0.0;  // relative, at exit
};

// Minimizes the objective over sum(a) = -x0 by projected gradient descent
// with backtracking, started from the TWAP point (interior of the kink).
PgdResult optimal_deterministic_schedule(const DeterministicInstance& inst,
                                         const PgdOptions& opts = {});

// Lagrange multipliers from the first-order condition and their
// flatness defect max_t |lambda_t - lambda_{t+1}| / |lambda_0|.
struct CostateResult {
    std::vector<double> lambda;        // one per trade
    std::vector<int> undefined;        // trades with a_t == 0
    double residual = 0.0;
};

CostateResult costate_residual(std::span<const double> actions,
                               const DeterministicInstance& inst);

// Monte-Carlo check of the stochastic-volume optimality claim on the
// synthetic market: the volume-moment ratio process M_t must behave as a
// martingale, and the VWAP schedule must be cheapest among perturbed
// deterministic policies.
struct MartingaleCheck {
    int n_paths = 0;
    int times = 0;
    double max_ratio_deviation_se = 0.0;   // max_t |mean(M_{t+1}/M_t) - 1| in standard errors
    double max_binned_deviation_se = 0.0;  // same, conditional on 20 bins of M_t
    int n_perturbations = 0;
    double worst_margin_se = 0.0;          // min over perturbations of mean(cost_p - cost_vwap)/se
    bool vwap_lowest = false;              // worst_margin_se > -3
    bool martingale_ok = false;            // max deviations <= 5 se
};

struct Prop2Options {
    int n_paths = 100000;          // martingale ratio sample
    int n_perturbations = 100;
    int n_paths_perturbed = 10000; // paired cost sample
    int n_bins = 20;
    double perturbation_scale = 0.15;
    std::uint64_t seed = 2718;
};

MartingaleCheck check_prop2_martingale(const market::SynthSpec& spec, const Prop2Options& opts = {});

// JSON blobs consumed by the verification command and the acceptance suite.
std::string prop1_report_json();
std::string prop2_report_json(const market::SynthSpec& spec, const Prop2Options& opts = {});

}  // namespace exsim::oracle
