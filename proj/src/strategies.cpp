#include "exsim/strategies.hpp"

#include <cmath>

namespace exsim::strategies {

namespace {

double neumaier_sum(std::span<const double> v) {
    double sum = 0.0, comp = 0.0;
    for (double x : v) {
        const double t = sum + x;
        if (std::fabs(sum) >= std::fabs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    return sum + comp;
}

// Nudge the final action until the compensated total equals -x0 exactly.
// The correction can land on a round-to-even tie, so finish ulp by ulp.
void enforce_total(std::vector<double>& actions, double x0) {
    double defect = neumaier_sum(actions) + x0;
    for (int pass = 0; pass < 6 && defect != 0.0; ++pass) {
        actions.back() -= defect;
        defect = neumaier_sum(actions) + x0;
    }
    for (int pass = 0; pass < 8 && defect != 0.0; ++pass) {
        actions.back() = std::nextafter(actions.back(), defect > 0.0 ? -1e300 : 1e300);
        defect = neumaier_sum(actions) + x0;
    }
}

}  // namespace

std::vector<double> Schedule::inventory_path() const {
    std::vector<double> path;
    path.reserve(actions.size() + 1);
    path.push_back(x0);
    double x = x0;
    for (double a : actions) {
        x += a;
        path.push_back(x);
    }
    path.back() = 0.0;  // full liquidation by construction
    return path;
}

Schedule twap_schedule(double x0, int n_trades) {
    if (n_trades < 1) throw ConfigError("twap_schedule: need at least one trade");
    Schedule s;
    s.x0 = x0;
    s.actions.assign(n_trades, -x0 / n_trades);
    enforce_total(s.actions, x0);
    return s;
}

Schedule vwap_schedule(double x0, std::span<const double> profile_at_trades) {
    if (profile_at_trades.empty()) throw ConfigError("vwap_schedule: empty profile");
    double total = 0.0;
    for (double v : profile_at_trades) {
        if (!(v > 0.0)) throw DomainError("vwap_schedule: non-positive profile entry");
        total += v;
    }
    Schedule s;
    s.x0 = x0;
    s.actions.reserve(profile_at_trades.size());
    for (double v : profile_at_trades) s.actions.push_back(-x0 * v / total);
    enforce_total(s.actions, x0);
    return s;
}

Schedule rounded_to_shares(const Schedule& s) {
    Schedule r;
    r.x0 = s.x0;
    r.actions.reserve(s.actions.size());
    double rounded_total = 0.0;
    for (double a : s.actions) {
        const double w = std::round(a);
        r.actions.push_back(w);
        rounded_total += w;
    }
    r.actions.back() += -s.x0 - rounded_total;
    return r;
}

BenchmarkInventories benchmark_inventories(double x0, const market::VolumeProfile& profile) {
    const int minutes = static_cast<int>(profile.v_bar.size());
    BenchmarkInventories b;
    b.twap_path.resize(minutes + 1);
    b.vwap_path.resize(minutes + 1);
    double total = 0.0;
    for (double v : profile.v_bar) total += v;
    double cum = 0.0;
    b.twap_path[0] = x0;
    b.vwap_path[0] = x0;
    for (int t = 1; t <= minutes; ++t) {
        cum += profile.v_bar[t - 1];
        b.twap_path[t] = x0 * (1.0 - static_cast<double>(t) / minutes);
        b.vwap_path[t] = x0 * (1.0 - cum / total);
    }
    b.twap_path[minutes] = 0.0;
    b.vwap_path[minutes] = 0.0;
    return b;
}

}  // namespace exsim::strategies
