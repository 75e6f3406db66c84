#pragma once

#include <span>
#include <vector>

#include "exsim/errors.hpp"
#include "exsim/market_data.hpp"

namespace exsim::strategies {

// A liquidation schedule: signed child orders a_t at each of T trade times,
// summing exactly to -x0 so the induced inventory ends at zero.
struct Schedule {
    double x0 = 0.0;
    std::vector<double> actions;

    // Induced inventory X_0..X_T (X_0 = x0, X_T = 0 exactly).
    std::vector<double> inventory_path() const;
};

// Equal slices: a_t = -x0/T.
Schedule twap_schedule(double x0, int n_trades);

// Slices proportional to the volume-profile moments at the trade times.
Schedule vwap_schedule(double x0, std::span<const double> profile_at_trades);

// Whole-share variant; the rounding residual is pushed into the final trade.
Schedule rounded_to_shares(const Schedule& s);

// Minute-resolution benchmark inventory paths (index 0..minutes), used both
// as the comparison strategies and as policy-network input features.
struct BenchmarkInventories {
    std::vector<double> twap_path;  // x0 * (1 - t/T_minutes)
    std::vector<double> vwap_path;  // x0 * (1 - cum profile / total)
};

BenchmarkInventories benchmark_inventories(double x0, const market::VolumeProfile& profile);

}  // namespace exsim::strategies
