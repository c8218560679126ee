#include "kge/config.hpp"

#include "kge/errors.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace kge {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    throw ConfigError("config key '" + std::string(key) + "': invalid value '" + std::string(value) + "' (expected " +
                      std::string(expected) + ")");
}

std::uint64_t parse_uint(std::string_view key, std::string_view value) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
        bad_value(key, value, "a non-negative integer");
    }
    return out;
}

float parse_float(std::string_view key, std::string_view value) {
    const std::string s(value);
    char* end = nullptr;
    const float out = std::strtof(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) bad_value(key, value, "a number");
    return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(key, value, "true or false");
}

std::string format_float(float v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    return buf;
}

struct Field {
    std::function<void(TrainConfig&, std::string_view, std::string_view)> set;
    std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field size_field(T TrainConfig::*member) {
    return {[member](TrainConfig& c, std::string_view k, std::string_view v) {
                c.*member = static_cast<T>(parse_uint(k, v));
            },
            [member](const TrainConfig& c) { return std::to_string(c.*member); }};
}

Field float_field(float TrainConfig::*member) {
    return {[member](TrainConfig& c, std::string_view k, std::string_view v) { c.*member = parse_float(k, v); },
            [member](const TrainConfig& c) { return format_float(c.*member); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table = {
        {"pretrain_epochs", size_field(&TrainConfig::pretrain_epochs)},
        {"epochs", size_field(&TrainConfig::epochs)},
        {"batch_size", size_field(&TrainConfig::batch_size)},
        {"lr_base", float_field(&TrainConfig::lr_base)},
        {"lr_gen", float_field(&TrainConfig::lr_gen)},
        {"lr_disc", float_field(&TrainConfig::lr_disc)},
        {"gen_steps_per_batch", size_field(&TrainConfig::gen_steps_per_batch)},
        {"disc_steps_per_batch", size_field(&TrainConfig::disc_steps_per_batch)},
        {"lambda", float_field(&TrainConfig::lambda)},
        {"strategy",
         {[](TrainConfig& c, std::string_view k, std::string_view v) {
              auto s = parse_strategy(v);
              if (!s) bad_value(k, v, "rand, pop or dans");
              c.sampler.strategy = *s;
          },
          [](const TrainConfig& c) { return std::string(to_string(c.sampler.strategy)); }}},
        {"num_negatives",
         {[](TrainConfig& c, std::string_view k, std::string_view v) { c.sampler.num_negatives = parse_uint(k, v); },
          [](const TrainConfig& c) { return std::to_string(c.sampler.num_negatives); }}},
        {"generated_count",
         {[](TrainConfig& c, std::string_view k, std::string_view v) { c.sampler.generated_count = parse_uint(k, v); },
          [](const TrainConfig& c) { return std::to_string(c.sampler.generated_count); }}},
        {"pop_exponent",
         {[](TrainConfig& c, std::string_view k, std::string_view v) { c.sampler.pop_exponent = parse_float(k, v); },
          [](const TrainConfig& c) { return format_float(static_cast<float>(c.sampler.pop_exponent)); }}},
        {"sigma",
         {[](TrainConfig& c, std::string_view k, std::string_view v) { c.sampler.sigma = parse_float(k, v); },
          [](const TrainConfig& c) { return format_float(c.sampler.sigma); }}},
        {"decoder",
         {[](TrainConfig& c, std::string_view k, std::string_view v) {
              auto d = parse_decoder(v);
              if (!d) bad_value(k, v, "distmult, complex or rotate");
              c.decoder = *d;
          },
          [](const TrainConfig& c) { return std::string(to_string(c.decoder)); }}},
        {"seed", size_field(&TrainConfig::seed)},
        {"dim", size_field(&TrainConfig::dim)},
        {"num_layers", size_field(&TrainConfig::num_layers)},
        {"generator_layers", size_field(&TrainConfig::generator_layers)},
        {"rotate_margin", float_field(&TrainConfig::rotate_margin)},
        {"complex_conjugate",
         {[](TrainConfig& c, std::string_view k, std::string_view v) { c.complex_conjugate = parse_bool(k, v); },
          [](const TrainConfig& c) { return std::string(c.complex_conjugate ? "true" : "false"); }}},
        {"checkpoint_every", size_field(&TrainConfig::checkpoint_every)},
    };
    return table;
}

const Field& field(std::string_view key) {
    for (const auto& [name, f] : fields()) {
        if (name == key) return f;
    }
    std::string valid;
    for (const auto& [name, f] : fields()) valid += (valid.empty() ? "" : ", ") + name;
    throw ConfigError("unknown config key '" + std::string(key) + "' (valid keys: " + valid + ")");
}

} // namespace

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be > 0");
    if (!(lr_base > 0.0f) || !(lr_gen > 0.0f) || !(lr_disc > 0.0f)) throw ConfigError("learning rates must be > 0");
    if (lambda < 0.0f) throw ConfigError("lambda must be >= 0");
    if (dim == 0) throw ConfigError("dim must be > 0");
    if (num_layers == 0) throw ConfigError("num_layers must be > 0");
    if (decoder != DecoderMode::DistMult && dim % 2 != 0) {
        throw ConfigError("decoder " + std::string(to_string(decoder)) + " needs an even dim");
    }
    sampler.validate();
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& [name, f] : fields()) out.push_back(name);
        return out;
    }();
    return keys;
}

void set_config_value(TrainConfig& config, std::string_view key, std::string_view value) {
    field(key).set(config, key, value);
}

std::string get_config_value(const TrainConfig& config, std::string_view key) { return field(key).get(config); }

KeyValues to_key_values(const TrainConfig& config) {
    KeyValues out;
    for (const auto& [name, f] : fields()) out.emplace_back(name, f.get(config));
    return out;
}

TrainConfig from_key_values(const KeyValues& values) {
    TrainConfig config;
    std::set<std::string> seen;
    for (const auto& [k, v] : values) {
        if (!seen.insert(k).second) throw ConfigError("duplicate config key '" + k + "'");
        set_config_value(config, k, v);
    }
    return config;
}

KeyValues parse_key_values(std::string_view text, std::string_view origin) {
    KeyValues out;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = std::string(origin) + ":" + std::to_string(line_no);
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

TrainConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_key_values(parse_key_values(buffer.str(), path.string()));
}

void apply_seed_environment(TrainConfig& config) {
    if (const char* env = std::getenv("KGE_SEED"); env != nullptr && *env != '\0') {
        config.seed = parse_uint("KGE_SEED", env);
    }
}

} // namespace kge
