#include "debias/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "debias/errors.hpp"

namespace debias {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) + " (expected " +
                      std::string(expected) + ")");
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
    T v{};
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end) {
        bad_value(key, text, std::is_integral_v<T> ? "an integer" : "a number");
    }
    return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    bad_value(key, text, "true|false");
}

template <class T>
std::vector<T> parse_list(std::string_view key, std::string_view text) {
    std::vector<T> out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        const auto item = trim(text.substr(0, comma));
        if (item.empty()) bad_value(key, text, "a comma-separated list");
        out.push_back(parse_number<T>(key, item));
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    if (out.empty()) bad_value(key, text, "a non-empty comma-separated list");
    return out;
}

template <class T>
std::string fmt_list(const std::vector<T>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ",";
        if constexpr (std::is_floating_point_v<T>) s += fmt_double(xs[i]);
        else s += std::to_string(xs[i]);
    }
    return s;
}

struct KeyDef {
    std::string key;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define INT_KEY(name, field)                                                                        \
    KeyDef {                                                                                        \
        name, [](RunConfig& c, std::string_view v) { c.field = parse_number<int>(name, v); },       \
            [](const RunConfig& c) { return std::to_string(c.field); }                              \
    }
#define REAL_KEY(name, field)                                                                       \
    KeyDef {                                                                                        \
        name, [](RunConfig& c, std::string_view v) { c.field = parse_number<double>(name, v); },    \
            [](const RunConfig& c) { return fmt_double(c.field); }                                  \
    }
#define BOOL_KEY(name, field)                                                                       \
    KeyDef {                                                                                        \
        name, [](RunConfig& c, std::string_view v) { c.field = parse_bool(name, v); },              \
            [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }              \
    }

const std::vector<KeyDef>& key_table() {
    static const std::vector<KeyDef> table = [] {
        std::vector<KeyDef> t{
            INT_KEY("data.num_labels", experiment.data.num_labels),
            INT_KEY("data.train_size", experiment.data.train_size),
            INT_KEY("data.test_size", experiment.data.test_size),
            INT_KEY("data.vocab_size", experiment.data.vocab_size),
            INT_KEY("data.tokens_per_segment", experiment.data.tokens_per_segment),
            INT_KEY("data.signal_synonyms", experiment.data.signal_synonyms),
            REAL_KEY("data.noise_token_rate", experiment.data.noise_token_rate),
            REAL_KEY("data.manipulated_fraction", experiment.data.manipulated_fraction),
            REAL_KEY("data.bias_proportion", experiment.data.bias_proportion),

            INT_KEY("shallow.sample_size", experiment.shallow.sample_size),
            INT_KEY("shallow.epochs", experiment.shallow.epochs),
            REAL_KEY("shallow.learning_rate", experiment.shallow.learning_rate),
            INT_KEY("shallow.batch_size", experiment.shallow.batch_size),
            BOOL_KEY("shallow.exclude_subset", experiment.exclude_shallow_subset),
            REAL_KEY("shallow.band_half_width", band_half_width),
            REAL_KEY("shallow.high_conf_fraction", high_conf_fraction),

            INT_KEY("train.epochs", experiment.train.epochs),
            INT_KEY("train.batch_size", experiment.train.batch_size),
            REAL_KEY("train.learning_rate", experiment.train.learning_rate),
            INT_KEY("train.eval_every", experiment.train.eval_every),
            INT_KEY("train.eval_limit", experiment.train.eval_limit),
            INT_KEY("train.teacher_epochs", experiment.train.teacher_epochs),

            BOOL_KEY("anneal.enabled", experiment.train.anneal.enabled),
            REAL_KEY("anneal.a", experiment.train.anneal.minimum),

            INT_KEY("report.seeds", report_seeds),
            INT_KEY("report.stability_runs", stability_runs),
        };
        // Model shape is shared by the shallow, main and teacher models.
        t.push_back({"model.hidden",
                     [](RunConfig& c, std::string_view v) {
                         c.experiment.train.hidden = c.experiment.shallow.hidden = parse_number<int>("model.hidden", v);
                     },
                     [](const RunConfig& c) { return std::to_string(c.experiment.train.hidden); }});
        t.push_back({"model.feature_dim",
                     [](RunConfig& c, std::string_view v) {
                         c.experiment.train.feature_dim = c.experiment.shallow.feature_dim =
                             parse_number<int>("model.feature_dim", v);
                     },
                     [](const RunConfig& c) { return std::to_string(c.experiment.train.feature_dim); }});
        t.push_back({"shallow.optimizer",
                     [](RunConfig& c, std::string_view v) {
                         try {
                             c.experiment.shallow.optimizer = parse_optimizer(v);
                         } catch (const Error&) {
                             bad_value("shallow.optimizer", v, "sgd|adam");
                         }
                     },
                     [](const RunConfig& c) { return std::string(to_string(c.experiment.shallow.optimizer)); }});
        t.push_back({"train.optimizer",
                     [](RunConfig& c, std::string_view v) {
                         try {
                             c.experiment.train.optimizer = parse_optimizer(v);
                         } catch (const Error&) {
                             bad_value("train.optimizer", v, "sgd|adam");
                         }
                     },
                     [](const RunConfig& c) { return std::string(to_string(c.experiment.train.optimizer)); }});
        t.push_back({"train.method",
                     [](RunConfig& c, std::string_view v) {
                         try {
                             c.experiment.train.method = parse_method(v);
                         } catch (const Error&) {
                             bad_value("train.method", v, "baseline_ce|reweight|poe|conf_reg");
                         }
                     },
                     [](const RunConfig& c) { return std::string(to_string(c.experiment.train.method)); }});
        t.push_back({"seed", [](RunConfig& c, std::string_view v) { c.seed = parse_number<std::uint64_t>("seed", v); },
                     [](const RunConfig& c) { return std::to_string(c.seed); }});
        t.push_back({"shallow.grid_sizes",
                     [](RunConfig& c, std::string_view v) { c.grid_sizes = parse_list<int>("shallow.grid_sizes", v); },
                     [](const RunConfig& c) { return fmt_list(c.grid_sizes); }});
        t.push_back({"shallow.grid_epochs",
                     [](RunConfig& c, std::string_view v) { c.grid_epochs = parse_list<int>("shallow.grid_epochs", v); },
                     [](const RunConfig& c) { return fmt_list(c.grid_epochs); }});
        t.push_back({"report.a_values",
                     [](RunConfig& c, std::string_view v) { c.a_values = parse_list<double>("report.a_values", v); },
                     [](const RunConfig& c) { return fmt_list(c.a_values); }});
        t.push_back({"report.m_values",
                     [](RunConfig& c, std::string_view v) { c.m_values = parse_list<double>("report.m_values", v); },
                     [](const RunConfig& c) { return fmt_list(c.m_values); }});
        std::sort(t.begin(), t.end(), [](const KeyDef& a, const KeyDef& b) { return a.key < b.key; });
        return t;
    }();
    return table;
}

#undef INT_KEY
#undef REAL_KEY
#undef BOOL_KEY

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::string_view leaf(std::string_view key) {
    const auto dot = key.rfind('.');
    return dot == std::string_view::npos ? key : key.substr(dot + 1);
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& d : key_table()) k.push_back(d.key);
        return k;
    }();
    return keys;
}

std::string suggest_key(std::string_view unknown) {
    std::string best;
    std::size_t best_d = 4;  // suggestions only within 3 edits
    for (const auto& d : key_table()) {
        // Compare whole keys and, for a bare or mis-sectioned name, the leaf.
        const std::size_t dist = std::min(edit_distance(unknown, d.key), edit_distance(leaf(unknown), leaf(d.key)));
        if (dist < best_d) {
            best_d = dist;
            best = d.key;
        }
    }
    return best;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
    const auto& table = key_table();
    const auto it = std::lower_bound(table.begin(), table.end(), key,
                                     [](const KeyDef& d, std::string_view k) { return d.key < k; });
    if (it == table.end() || it->key != key) {
        std::string msg = "unknown config key '" + std::string(key) + "'";
        const std::string hint = suggest_key(key);
        if (!hint.empty()) msg += "; did you mean '" + hint + "'?";
        throw ConfigError(msg);
    }
    it->set(cfg, trim(value));
}

RunConfig parse_config(std::string_view text, RunConfig base) {
    RunConfig cfg = std::move(base);
    int line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        try {
            set_config_value(cfg, key, line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str(), std::move(base));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void RunConfig::validate() const {
    experiment.data.validate();
    experiment.train.validate();
    experiment.train.anneal.validate();
    const auto& sh = experiment.shallow;
    if (sh.epochs < 1) throw ConfigError("shallow.epochs must be >= 1");
    if (sh.sample_size < 1) throw ConfigError("shallow.sample_size must be >= 1");
    if (sh.batch_size < 1) throw ConfigError("shallow.batch_size must be >= 1");
    if (!(sh.learning_rate >= 0.0)) throw ConfigError("shallow.learning_rate must be >= 0");
    FeatureSpace{experiment.data.vocab_size, experiment.train.feature_dim}.validate();
    for (int s : grid_sizes)
        if (s < 1) throw ConfigError("shallow.grid_sizes entries must be >= 1");
    for (int e : grid_epochs)
        if (e < 1) throw ConfigError("shallow.grid_epochs entries must be >= 1");
    if (!(band_half_width >= 0.0 && band_half_width <= 1.0))
        throw ConfigError("shallow.band_half_width must be in [0,1]");
    if (!(high_conf_fraction >= 0.0 && high_conf_fraction <= 1.0))
        throw ConfigError("shallow.high_conf_fraction must be in [0,1]");
    for (double a : a_values)
        if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("report.a_values entries must be in [0,1]");
    for (double m : m_values)
        if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("report.m_values entries must be in [0,1]");
    if (report_seeds < 3) throw ConfigError("report.seeds must be >= 3");
    if (stability_runs < 2) throw ConfigError("report.stability_runs must be >= 2");
}

std::string canonical_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& d : key_table()) out += d.key + " = " + d.get(cfg) + "\n";
    return out;
}

std::string digest_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string config_digest(const RunConfig& cfg) { return digest_hex(canonical_config(cfg)); }

ExperimentConfig resolved_experiment(const RunConfig& cfg) { return with_run_seed(cfg.experiment, cfg.seed); }

}  // namespace debias
