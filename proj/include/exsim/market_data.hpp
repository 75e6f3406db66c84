#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "exsim/errors.hpp"

namespace exsim::market {

inline constexpr int kMinutesPerDay = 390;

// Dense per-minute price/volume panel over (ticker, day, minute).
// Immutable after construction; readers may run in parallel.
struct Panel {
    std::vector<std::string> tickers;
    std::vector<std::string> days;  // ISO dates, strictly increasing
    int minutes = kMinutesPerDay;
    std::vector<double> prices;   // [ticker][day][minute], minute 1-based externally
    std::vector<double> volumes;

    int n_tickers() const { return static_cast<int>(tickers.size()); }
    int n_days() const { return static_cast<int>(days.size()); }

    std::size_t index(int ticker, int day, int minute) const {
        return (static_cast<std::size_t>(ticker) * days.size() + day) * minutes + (minute - 1);
    }
    double price(int ticker, int day, int minute) const { return prices[index(ticker, day, minute)]; }
    double volume(int ticker, int day, int minute) const { return volumes[index(ticker, day, minute)]; }

    // Contiguous one-ticker-day views (minutes 1..390).
    std::span<const double> day_prices(int ticker, int day) const {
        return {prices.data() + index(ticker, day, 1), static_cast<std::size_t>(minutes)};
    }
    std::span<const double> day_volumes(int ticker, int day) const {
        return {volumes.data() + index(ticker, day, 1), static_cast<std::size_t>(minutes)};
    }

    int ticker_index(const std::string& symbol) const;  // -1 when absent
};

struct FillReport {
    // Per-ticker counts of cells that were absent in the input and filled
    // (price forward-filled, volume zero-filled).
    std::vector<std::string> tickers;
    std::vector<std::int64_t> filled_cells;
    std::int64_t total = 0;
};

// CSV rows `date,minute,ticker,price,volume` with header, minutes 1..390.
Panel parse_panel(std::istream& in, FillReport* report = nullptr);
Panel parse_panel_file(const std::string& path, FillReport* report = nullptr);

// Canonical CSV emission (parse round-trips the arrays bit-exactly).
void write_panel_csv(const Panel& panel, std::ostream& out);

// Flat little-endian binary cache with a versioned header (magic EXSP).
void save_panel(const Panel& panel, const std::string& path);
Panel load_panel(const std::string& path);

// Half-open day-index ranges of one walk-forward fold.
struct FoldSpec {
    int train_begin = 0;
    int train_end = 0;   // exclusive
    int test_begin = 0;
    int test_end = 0;    // exclusive
    int train_days() const { return train_end - train_begin; }
    int test_days() const { return test_end - test_begin; }
};

// Walk-forward folds: fold k trains on `train_days` days starting at
// k*train_days and tests on the following `test_days` days (the last test
// window may be clipped by the end of the panel).
std::vector<FoldSpec> build_folds(int n_days, int n_folds, int train_days, int test_days);

// Per-minute volume proxies V_bar_t = (mean_d V_{d,t}^(-1/(beta+1)))^(-(beta+1)).
struct VolumeProfile {
    std::vector<double> v_bar;  // length = panel minutes, all > 0

    double sum_over(std::span<const int> minutes) const;
};

VolumeProfile estimate_volume_profile(const Panel& panel, int ticker,
                                      std::span<const int> days, double beta);

// Trade minutes k, 2k, ..., day_minutes.
std::vector<int> trade_minutes(int day_minutes = kMinutesPerDay, int interval = 5);

// Average prices over a set of trade times.
double twap_price(std::span<const double> prices);
double vwap_price(std::span<const double> prices, std::span<const double> volumes);

// Synthetic market: per ticker and day, prices follow a driftless geometric
// random walk and log-volume follows a deterministic "U" target plus a
// Gaussian random walk whose drift is calibrated so the volume-moment ratio
// process of the optimality analysis is a martingale.
struct SynthSpec {
    int n_tickers = 5;
    int n_days = 105;
    int minutes = kMinutesPerDay;
    std::vector<double> log_u;  // per-minute target log-volume (the "U"), length = minutes
    std::vector<double> sigma;  // per-minute log-volume shock std, length = minutes
    double beta = 0.67;         // exponent used when calibrating the drift
    double price_vol = 8e-4;    // per-minute return std
    double base_price = 100.0;
    double correlation = 0.3;   // cross-ticker shock correlation, in [0,1)
    std::uint64_t seed = 1;

    // Deterministic drift of log-volume implied by the U target, the shock
    // variance and beta (mu_t of the log-normal example); index t covers
    // minutes 2..minutes.
    std::vector<double> drift() const;

    // U-shaped target around `daily_volume` total shares; `u_depth` is the
    // log-ratio between open/close and midday volume.
    static SynthSpec u_shaped(int n_tickers, int n_days, double daily_volume, double u_depth,
                              double sigma, double beta, double price_vol, double correlation,
                              std::uint64_t seed, double base_price = 100.0,
                              int minutes = kMinutesPerDay);

    void validate() const;
};

Panel synth_generate(const SynthSpec& spec);

}  // namespace exsim::market
