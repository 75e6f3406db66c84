#include "exsim/market_data.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "exsim/io_util.hpp"
#include "exsim/rng.hpp"

namespace exsim::market {

namespace {

struct RawRow {
    std::string date;
    int minute;
    std::string ticker;
    double price;
    double volume;
};

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
    throw DataError("parse error at line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

int Panel::ticker_index(const std::string& symbol) const {
    const auto it = std::find(tickers.begin(), tickers.end(), symbol);
    return it == tickers.end() ? -1 : static_cast<int>(it - tickers.begin());
}

Panel parse_panel(std::istream& in, FillReport* report) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty input");
    strip_cr(line);
    if (line != "date,minute,ticker,price,volume")
        throw DataError("unexpected header: " + line);

    std::vector<RawRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 5) parse_fail(line_no, "expected 5 fields, got " + std::to_string(f.size()));
        RawRow r;
        r.date = std::string(f[0]);
        std::int64_t minute = 0;
        if (!io::parse_int(f[1], minute)) parse_fail(line_no, "bad minute field");
        if (minute < 1 || minute > kMinutesPerDay)
            parse_fail(line_no, "minute " + std::to_string(minute) + " outside 1..390");
        r.minute = static_cast<int>(minute);
        r.ticker = std::string(f[2]);
        if (r.ticker.empty()) parse_fail(line_no, "empty ticker");
        if (!io::parse_double(f[3], r.price) || !std::isfinite(r.price) || r.price <= 0.0)
            parse_fail(line_no, "bad price field");
        if (!io::parse_double(f[4], r.volume) || !std::isfinite(r.volume) || r.volume < 0.0)
            parse_fail(line_no, "bad volume field");
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw DataError("no data rows");

    Panel panel;
    {
        std::vector<std::string> tickers, days;
        for (const auto& r : rows) {
            tickers.push_back(r.ticker);
            days.push_back(r.date);
        }
        std::sort(tickers.begin(), tickers.end());
        tickers.erase(std::unique(tickers.begin(), tickers.end()), tickers.end());
        std::sort(days.begin(), days.end());
        days.erase(std::unique(days.begin(), days.end()), days.end());
        panel.tickers = std::move(tickers);
        panel.days = std::move(days);
    }

    const std::size_t cells = static_cast<std::size_t>(panel.n_tickers()) * panel.n_days() * panel.minutes;
    panel.prices.assign(cells, 0.0);
    panel.volumes.assign(cells, 0.0);
    std::vector<char> present(cells, 0);

    std::map<std::string, int> ticker_of;
    for (int i = 0; i < panel.n_tickers(); ++i) ticker_of[panel.tickers[i]] = i;
    std::map<std::string, int> day_of;
    for (int d = 0; d < panel.n_days(); ++d) day_of[panel.days[d]] = d;

    for (const auto& r : rows) {
        const int ti = ticker_of[r.ticker];
        const int di = day_of[r.date];
        const std::size_t idx = panel.index(ti, di, r.minute);
        if (present[idx])
            throw DataError("duplicate row for " + r.ticker + " " + r.date + " minute " +
                            std::to_string(r.minute));
        present[idx] = 1;
        panel.prices[idx] = r.price;
        panel.volumes[idx] = r.volume;
    }

    FillReport fills;
    fills.tickers = panel.tickers;
    fills.filled_cells.assign(panel.n_tickers(), 0);

    for (int ti = 0; ti < panel.n_tickers(); ++ti) {
        for (int di = 0; di < panel.n_days(); ++di) {
            const std::size_t base = panel.index(ti, di, 1);
            int first_present = -1;
            for (int m = 0; m < panel.minutes; ++m) {
                if (present[base + m]) { first_present = m; break; }
            }
            if (first_present < 0)
                throw DataError("ticker " + panel.tickers[ti] + " has no data on " + panel.days[di]);
            // Backfill the open from the first print, forward-fill the rest.
            for (int m = 0; m < first_present; ++m) {
                panel.prices[base + m] = panel.prices[base + first_present];
                panel.volumes[base + m] = 0.0;
                ++fills.filled_cells[ti];
            }
            for (int m = first_present + 1; m < panel.minutes; ++m) {
                if (!present[base + m]) {
                    panel.prices[base + m] = panel.prices[base + m - 1];
                    panel.volumes[base + m] = 0.0;
                    ++fills.filled_cells[ti];
                }
            }
        }
    }
    for (auto c : fills.filled_cells) fills.total += c;
    if (report) *report = std::move(fills);
    return panel;
}

Panel parse_panel_file(const std::string& path, FillReport* report) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return parse_panel(in, report);
}

void write_panel_csv(const Panel& panel, std::ostream& out) {
    out << "date,minute,ticker,price,volume\n";
    for (int di = 0; di < panel.n_days(); ++di)
        for (int m = 1; m <= panel.minutes; ++m)
            for (int ti = 0; ti < panel.n_tickers(); ++ti)
                out << panel.days[di] << ',' << m << ',' << panel.tickers[ti] << ','
                    << io::fmt17(panel.price(ti, di, m)) << ','
                    << io::fmt17(panel.volume(ti, di, m)) << '\n';
}

namespace {

constexpr char kPanelMagic[4] = {'E', 'X', 'S', 'P'};
constexpr std::uint32_t kPanelVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    const std::uint32_t n = get_u32(in);
    if (n > (1u << 20)) throw DataError("panel cache: implausible string length");
    std::string s(n, '\0');
    in.read(s.data(), n);
    return s;
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void get_doubles(std::istream& in, std::vector<double>& v) {
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

}  // namespace

void save_panel(const Panel& panel, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out.write(kPanelMagic, 4);
    put_u32(out, kPanelVersion);
    put_u32(out, static_cast<std::uint32_t>(panel.n_tickers()));
    put_u32(out, static_cast<std::uint32_t>(panel.n_days()));
    put_u32(out, static_cast<std::uint32_t>(panel.minutes));
    for (const auto& t : panel.tickers) put_string(out, t);
    for (const auto& d : panel.days) put_string(out, d);
    put_doubles(out, panel.prices);
    put_doubles(out, panel.volumes);
    if (!out) throw DataError("short write to " + path);
}

Panel load_panel(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kPanelMagic, 4) != 0)
        throw DataError(path + " is not a panel cache");
    if (get_u32(in) != kPanelVersion) throw DataError("unsupported panel cache version");
    Panel panel;
    const std::uint32_t n_tickers = get_u32(in);
    const std::uint32_t n_days = get_u32(in);
    panel.minutes = static_cast<int>(get_u32(in));
    if (panel.minutes <= 0 || n_tickers == 0 || n_days == 0)
        throw DataError("panel cache: bad dimensions");
    panel.tickers.reserve(n_tickers);
    for (std::uint32_t i = 0; i < n_tickers; ++i) panel.tickers.push_back(get_string(in));
    panel.days.reserve(n_days);
    for (std::uint32_t i = 0; i < n_days; ++i) panel.days.push_back(get_string(in));
    const std::size_t cells = static_cast<std::size_t>(n_tickers) * n_days * panel.minutes;
    panel.prices.resize(cells);
    panel.volumes.resize(cells);
    get_doubles(in, panel.prices);
    get_doubles(in, panel.volumes);
    if (!in) throw DataError("truncated panel cache " + path);
    return panel;
}

std::vector<FoldSpec> build_folds(int n_days, int n_folds, int train_days, int test_days) {
    if (n_folds < 1 || train_days < 1 || test_days < 1)
        throw ConfigError("build_folds: counts must be positive");
    if (n_days < train_days + test_days)
        throw ConfigError("build_folds: panel has " + std::to_string(n_days) +
                          " days, need at least " + std::to_string(train_days + test_days));
    std::vector<FoldSpec> folds;
    folds.reserve(n_folds);
    for (int k = 0; k < n_folds; ++k) {
        FoldSpec f;
        f.train_begin = k * train_days;
        f.train_end = f.train_begin + train_days;
        if (f.train_end >= n_days)
            throw ConfigError("build_folds: fold " + std::to_string(k + 1) +
                              " does not fit in " + std::to_string(n_days) + " days");
        f.test_begin = f.train_end;
        f.test_end = std::min(f.test_begin + test_days, n_days);
        folds.push_back(f);
    }
    return folds;
}

double VolumeProfile::sum_over(std::span<const int> minutes) const {
    double s = 0.0;
    for (int m : minutes) s += v_bar[m - 1];
    return s;
}

VolumeProfile estimate_volume_profile(const Panel& panel, int ticker,
                                      std::span<const int> days, double beta) {
    if (days.empty()) throw ConfigError("estimate_volume_profile: empty day set");
    std::vector<int> sorted(days.begin(), days.end());
    std::sort(sorted.begin(), sorted.end());
    const double q = -1.0 / (beta + 1.0);
    VolumeProfile profile;
    profile.v_bar.assign(panel.minutes, 0.0);
    for (int m = 1; m <= panel.minutes; ++m) {
        double acc = 0.0;
        for (int d : sorted) acc += std::pow(std::max(panel.volume(ticker, d, m), 1.0), q);
        acc /= static_cast<double>(sorted.size());
        profile.v_bar[m - 1] = std::pow(acc, -(beta + 1.0));
    }
    return profile;
}

std::vector<int> trade_minutes(int day_minutes, int interval) {
    if (interval < 1 || day_minutes < interval || day_minutes % interval != 0)
        throw ConfigError("trade_minutes: day length must be a positive multiple of the interval");
    std::vector<int> out;
    for (int m = interval; m <= day_minutes; m += interval) out.push_back(m);
    return out;
}

double twap_price(std::span<const double> prices) {
    double s = 0.0;
    for (double p : prices) s += p;
    return s / static_cast<double>(prices.size());
}

double vwap_price(std::span<const double> prices, std::span<const double> volumes) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < prices.size(); ++i) {
        num += prices[i] * volumes[i];
        den += volumes[i];
    }
    if (den <= 0.0) throw DomainError("vwap_price: zero total volume at trade times");
    return num / den;
}

std::vector<double> SynthSpec::drift() const {
    const double q = 1.0 / (beta + 1.0);
    std::vector<double> mu(minutes - 1);
    for (int t = 1; t < minutes; ++t)
        mu[t - 1] = (log_u[t] - log_u[t - 1]) + 0.5 * q * sigma[t] * sigma[t];
    return mu;
}

SynthSpec SynthSpec::u_shaped(int n_tickers, int n_days, double daily_volume, double u_depth,
                              double sigma, double beta, double price_vol, double correlation,
                              std::uint64_t seed, double base_price, int minutes) {
    SynthSpec spec;
    spec.n_tickers = n_tickers;
    spec.n_days = n_days;
    spec.minutes = minutes;
    spec.beta = beta;
    spec.price_vol = price_vol;
    spec.base_price = base_price;
    spec.correlation = correlation;
    spec.seed = seed;
    spec.log_u.resize(minutes);
    spec.sigma.assign(minutes, sigma);
    const double per_minute = daily_volume / minutes;
    for (int t = 0; t < minutes; ++t) {
        const double tau = (t + 0.5) / minutes;
        const double z = 2.0 * tau - 1.0;
        spec.log_u[t] = std::log(per_minute) + u_depth * (z * z - 1.0 / 3.0);
    }
    return spec;
}

void SynthSpec::validate() const {
    if (n_tickers < 1 || n_days < 1 || minutes < 1)
        throw ConfigError("synth spec: dimensions must be positive");
    if (static_cast<int>(log_u.size()) != minutes || static_cast<int>(sigma.size()) != minutes)
        throw ConfigError("synth spec: log_u/sigma must have one entry per minute");
    if (!(correlation >= 0.0 && correlation < 1.0))
        throw ConfigError("synth spec: correlation must lie in [0,1)");
    if (!(base_price > 0.0) || price_vol < 0.0 || beta < 0.0)
        throw ConfigError("synth spec: bad price parameters");
    for (double s : sigma)
        if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("synth spec: sigma must be >= 0");
    for (double lu : log_u)
        if (!std::isfinite(lu)) throw ConfigError("synth spec: log_u must be finite");
}

namespace {

// Stream tags for the counter-based generator.
enum : std::uint64_t { kPriceFactor = 1, kPriceIdio = 2, kVolFactor = 3, kVolIdio = 4 };

std::string synth_ticker_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "SYN%03d", i);
    return buf;
}

// Trading-day labels: calendar dates from 2020-01-02 skipping weekends.
std::vector<std::string> synth_days(int n_days) {
    using namespace std::chrono;
    std::vector<std::string> out;
    sys_days d = sys_days(year{2020} / January / 2);
    while (static_cast<int>(out.size()) < n_days) {
        const weekday wd{d};
        if (wd != Saturday && wd != Sunday) {
            const year_month_day ymd{d};
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                          static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
            out.emplace_back(buf);
        }
        d += days{1};
    }
    return out;
}

}  // namespace

Panel synth_generate(const SynthSpec& spec) {
    spec.validate();
    Panel panel;
    panel.minutes = spec.minutes;
    panel.tickers.reserve(spec.n_tickers);
    for (int i = 0; i < spec.n_tickers; ++i) panel.tickers.push_back(synth_ticker_name(i));
    panel.days = synth_days(spec.n_days);
    const std::size_t cells =
        static_cast<std::size_t>(spec.n_tickers) * spec.n_days * spec.minutes;
    panel.prices.resize(cells);
    panel.volumes.resize(cells);

    const double q = 1.0 / (spec.beta + 1.0);
    const double wf = std::sqrt(spec.correlation);
    const double wi = std::sqrt(1.0 - spec.correlation);
    const double pv = spec.price_vol;

    for (int i = 0; i < spec.n_tickers; ++i) {
        for (int d = 0; d < spec.n_days; ++d) {
            double log_s = 0.0;   // cumulative log return within the day
            double shock = 0.0;   // cumulative log-volume shock
            double var = 0.0;     // cumulative shock variance
            const std::size_t base = panel.index(i, d, 1);
            for (int t = 0; t < spec.minutes; ++t) {
                const double zp = wf * rng::normal(rng::key(spec.seed, kPriceFactor, d, t)) +
                                  wi * rng::normal(rng::key(spec.seed, kPriceIdio, d, t, i));
                log_s += pv * zp - 0.5 * pv * pv;
                panel.prices[base + t] = spec.base_price * std::exp(log_s);

                const double s = spec.sigma[t];
                const double zv = wf * rng::normal(rng::key(spec.seed, kVolFactor, d, t)) +
                                  wi * rng::normal(rng::key(spec.seed, kVolIdio, d, t, i));
                shock += s * zv;
                var += s * s;
                panel.volumes[base + t] = std::exp(spec.log_u[t] + 0.5 * q * var + shock);
            }
        }
    }
    return panel;
}

}  // namespace exsim::market
