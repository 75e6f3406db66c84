#include "exsim/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "exsim/io_util.hpp"

namespace exsim::cli {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

double want_double(const std::string& key, const std::string& value) {
    double out = 0.0;
    if (!io::parse_double(value, out))
        throw ConfigError("config: " + key + " expects a number, got '" + value + "'");
    return out;
}

std::int64_t want_int(const std::string& key, const std::string& value) {
    std::int64_t out = 0;
    if (!io::parse_int(value, out))
        throw ConfigError("config: " + key + " expects an integer, got '" + value + "'");
    return out;
}

bool want_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("config: " + key + " expects a boolean, got '" + value + "'");
}

ScenarioSection& scenario_ref(RunConfig& cfg, const std::string& name) {
    for (auto& s : cfg.scenarios)
        if (s.name == name) return s;
    cfg.scenarios.emplace_back();
    cfg.scenarios.back().name = name;
    return cfg.scenarios.back();
}

void set_key(RunConfig& cfg, const std::string& section, const std::string& key,
             const std::string& value) {
    const std::string full = section.empty() ? key : section + "." + key;
    if (section.empty()) {
        if (key == "data") {
            if (value != "synth" && value != "csv")
                throw ConfigError("config: data must be 'synth' or 'csv'");
            cfg.data = value;
        } else if (key == "csv_path") {
            cfg.csv_path = value;
        } else if (key == "cache_path") {
            cfg.cache_path = value;
        } else if (key == "output_dir") {
            cfg.output_dir = value;
        } else if (key == "trade_interval") {
            cfg.trade_interval = static_cast<int>(want_int(full, value));
        } else {
            throw ConfigError("config: unknown key '" + full + "'");
        }
        return;
    }
    if (section == "synth") {
        auto& s = cfg.synth;
        if (key == "tickers") s.tickers = static_cast<int>(want_int(full, value));
        else if (key == "days") s.days = static_cast<int>(want_int(full, value));
        else if (key == "base_price") s.base_price = want_double(full, value);
        else if (key == "daily_volume") s.daily_volume = want_double(full, value);
        else if (key == "u_depth") s.u_depth = want_double(full, value);
        else if (key == "sigma") s.sigma = want_double(full, value);
        else if (key == "price_vol") s.price_vol = want_double(full, value);
        else if (key == "correlation") s.correlation = want_double(full, value);
        else if (key == "seed") s.seed = static_cast<std::uint64_t>(want_int(full, value));
        else throw ConfigError("config: unknown key '" + full + "'");
        return;
    }
    if (section == "folds") {
        auto& f = cfg.folds;
        if (key == "count") f.count = static_cast<int>(want_int(full, value));
        else if (key == "train_days") f.train_days = static_cast<int>(want_int(full, value));
        else if (key == "test_days") f.test_days = static_cast<int>(want_int(full, value));
        else throw ConfigError("config: unknown key '" + full + "'");
        return;
    }
    if (section == "train") {
        auto& t = cfg.train;
        if (key == "epochs") t.epochs = static_cast<int>(want_int(full, value));
        else if (key == "learning_rate") t.learning_rate = want_double(full, value);
        else if (key == "seed") t.seed = static_cast<std::uint64_t>(want_int(full, value));
        else if (key == "batch_days") t.batch_days = want_bool(full, value);
        else if (key == "scenario") t.scenario = value;
        else throw ConfigError("config: unknown key '" + full + "'");
        return;
    }
    if (section.rfind("scenario ", 0) == 0) {
        auto& s = scenario_ref(cfg, trim(section.substr(9)));
        if (key == "epsilon") s.epsilon = want_double(full, value);
        else if (key == "beta") s.beta = want_double(full, value);
        else if (key == "x0_rule") {
            if (value != "fixed" && value != "adv_fraction")
                throw ConfigError("config: x0_rule must be 'fixed' or 'adv_fraction'");
            s.x0_rule = value;
        } else if (key == "x0_fixed") s.x0_fixed = want_double(full, value);
        else if (key == "x0_fraction") s.x0_fraction = want_double(full, value);
        else if (key == "beta_noise") s.beta_noise = want_double(full, value);
        else if (key == "noise_seed") s.noise_seed = static_cast<std::uint64_t>(want_int(full, value));
        else throw ConfigError("config: unknown key '" + full + "'");
        return;
    }
    throw ConfigError("config: unknown section '" + section + "'");
}

void validate(const RunConfig& cfg) {
    if (cfg.scenarios.empty()) throw ConfigError("config: at least one [scenario ...] required");
    std::vector<std::string> names;
    for (const auto& s : cfg.scenarios) names.push_back(s.name);
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end())
        throw ConfigError("config: scenario names must be unique");
    if (cfg.data == "csv" && cfg.csv_path.empty())
        throw ConfigError("config: data=csv requires csv_path");
    cfg.scenario(cfg.train.scenario);  // must exist
    if (cfg.trade_interval < 1) throw ConfigError("config: trade_interval must be >= 1");
}

}  // namespace

const ScenarioSection& RunConfig::scenario(const std::string& name) const {
    for (const auto& s : scenarios)
        if (s.name == name) return s;
    throw ConfigError("config: no scenario named '" + name + "'");
}

std::uint64_t RunConfig::hash() const {
    // FNV-1a over the canonical field dump.
    std::ostringstream os;
    os << data << '|' << trade_interval << '|' << synth.tickers << '|' << synth.days << '|'
       << io::fmt17(synth.base_price) << '|' << io::fmt17(synth.daily_volume) << '|'
       << io::fmt17(synth.u_depth) << '|' << io::fmt17(synth.sigma) << '|'
       << io::fmt17(synth.price_vol) << '|' << io::fmt17(synth.correlation) << '|' << synth.seed
       << '|' << folds.count << '|' << folds.train_days << '|' << folds.test_days << '|'
       << io::fmt17(train.learning_rate) << '|' << train.seed << '|'
       << train.batch_days << '|' << train.scenario;  // epoch count excluded so runs can resume
    for (const auto& s : scenarios)
        os << '|' << s.name << ';' << io::fmt17(s.epsilon) << ';' << io::fmt17(s.beta) << ';'
           << s.x0_rule << ';' << io::fmt17(s.x0_fixed) << ';' << io::fmt17(s.x0_fraction) << ';'
           << io::fmt17(s.beta_noise) << ';' << s.noise_seed;
    const std::string text = os.str();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    std::ostringstream raw;
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        raw << line << '\n';
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section");
            section = trim(t.substr(1, t.size() - 2));
            if (section.rfind("scenario ", 0) == 0) scenario_ref(cfg, trim(section.substr(9)));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        const auto hash_pos = value.find(" #");
        if (hash_pos != std::string::npos) value = trim(value.substr(0, hash_pos));
        set_key(cfg, section, key, value);
    }
    if (cfg.scenarios.empty()) cfg.scenarios.push_back(ScenarioSection{});
    cfg.raw_text = raw.str();
    validate(cfg);
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_config(in);
}

RunConfig default_config() {
    RunConfig cfg;
    cfg.scenarios.push_back(ScenarioSection{});
    return cfg;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must look like section.key=value: " + assignment);
    std::string path = trim(assignment.substr(0, eq));
    const std::string value = trim(assignment.substr(eq + 1));
    std::string section, key;
    const auto dot = path.rfind('.');
    if (dot == std::string::npos) {
        key = path;
    } else {
        section = path.substr(0, dot);
        key = path.substr(dot + 1);
        std::replace(section.begin(), section.end(), ':', ' ');
    }
    set_key(cfg, section, key, value);
    cfg.raw_text += "# override: " + assignment + "\n";
}

}  // namespace exsim::cli
