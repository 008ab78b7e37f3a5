#include "fcenet/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

#include "fcenet/file_util.hpp"

namespace fcenet {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const char* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError(key + ": cannot parse '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected on/off, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <class T, class M>
Setter number(M RunConfig::*field) {
    return [field](RunConfig& c, const std::string& k, const std::string& v) {
        c.*field = static_cast<M>(parse_number<T>(k, v));
    };
}

const std::vector<std::pair<std::string, Setter>>& setters() {
    static const std::vector<std::pair<std::string, Setter>> table = {
        {"model.base_channels", number<int>(&RunConfig::base_channels)},
        {"model.blocks_per_scale", number<int>(&RunConfig::blocks_per_scale)},
        {"model.k_filters", number<int>(&RunConfig::k_filters)},
        {"loss.eps", number<double>(&RunConfig::loss_eps)},
        {"loss.freq_weight", number<double>(&RunConfig::freq_weight)},
        {"optim.lr_init", number<double>(&RunConfig::lr_init)},
        {"optim.lr_min", number<double>(&RunConfig::lr_min)},
        {"optim.steps", number<long>(&RunConfig::steps)},
        {"optim.batch", number<int>(&RunConfig::batch)},
        {"optim.log_every", number<int>(&RunConfig::log_every)},
        {"optim.clip_norm", number<double>(&RunConfig::clip_norm)},
        {"data.seed", number<std::uint64_t>(&RunConfig::data_seed)},
        {"data.size", number<int>(&RunConfig::data_size)},
        {"data.count", number<int>(&RunConfig::data_count)},
        {"noise.kind",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "mixed-gp") {
                 c.noise_kind = NoiseKind::mixed_gp;
             } else if (v == "gaussian") {
                 c.noise_kind = NoiseKind::gaussian;
             } else {
                 throw ConfigError(k + ": expected mixed-gp or gaussian, got '" + v + "'");
             }
         }},
        {"noise.level", number<double>(&RunConfig::noise_level)},
        {"noise.sigma", number<double>(&RunConfig::noise_sigma)},
        {"noise.darken",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.noise_darken = parse_bool(k, v); }},
        {"noise.darken_lo", number<double>(&RunConfig::darken_lo)},
        {"noise.darken_hi", number<double>(&RunConfig::darken_hi)},
    };
    return table;
}

}  // namespace

const std::vector<std::string>& run_config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, _] : setters()) k.push_back(name);
        return k;
    }();
    return keys;
}

ModelConfig RunConfig::model() const {
    ModelConfig m;
    m.base_channels = base_channels;
    m.blocks_per_scale = blocks_per_scale;
    m.k_filters = k_filters;
    m.patch_height = data_size;
    m.patch_width = data_size;
    return m;
}

TrainConfig RunConfig::train(std::uint64_t seed) const {
    TrainConfig t;
    t.loss.charbonnier_eps = loss_eps;
    t.loss.freq_weight = freq_weight;
    t.lr_init = lr_init;
    t.lr_min = lr_min;
    t.steps = steps;
    t.batch = batch;
    t.log_every = log_every;
    t.clip_norm = clip_norm;
    t.seed = seed;
    return t;
}

NoiseSpec RunConfig::noise(std::uint64_t seed) const {
    NoiseSpec n;
    n.kind = noise_kind;
    n.level = noise_level;
    n.sigma = noise_sigma;
    n.darken = noise_darken;
    n.darken_lo = darken_lo;
    n.darken_hi = darken_hi;
    n.seed = seed;
    return n;
}

void RunConfig::validate() const {
    auto check = [](bool ok, const char* msg) {
        if (!ok) throw ConfigError(msg);
    };
    try {
        model().validate();
        train(0).loss.validate();
        noise(0).validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    check(lr_init > 0.0 && lr_min >= 0.0 && lr_min <= lr_init, "optim: need 0 <= lr_min <= lr_init, lr_init > 0");
    check(steps >= 0, "optim.steps must be >= 0");
    check(batch >= 1, "optim.batch must be >= 1");
    check(log_every >= 1, "optim.log_every must be >= 1");
    check(clip_norm >= 0.0, "optim.clip_norm must be >= 0");
    check(data_count >= 1, "data.count must be >= 1");
    check(data_size >= 32 && (data_size & (data_size - 1)) == 0, "data.size must be a power of two >= 32");
}

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    std::map<std::string, int> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (eq == std::string::npos) throw ConfigError(where + "expected key=value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        const auto& table = setters();
        auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == key; });
        if (it == table.end()) throw ConfigError(where + "unknown key '" + key + "'");
        if (seen.count(key) != 0) {
            throw ConfigError(where + "duplicate key '" + key + "' (first on line " + std::to_string(seen[key]) + ")");
        }
        seen[key] = lineno;
        try {
            it->second(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    if (!std::filesystem::exists(path)) throw IoError("config file not found: " + path);
    return parse_run_config(read_file(path));
}

std::string format_run_config(const RunConfig& c) {
    std::ostringstream o;
    o.precision(17);
    o << "model.base_channels=" << c.base_channels << "\n"
      << "model.blocks_per_scale=" << c.blocks_per_scale << "\n"
      << "model.k_filters=" << c.k_filters << "\n"
      << "loss.eps=" << c.loss_eps << "\n"
      << "loss.freq_weight=" << c.freq_weight << "\n"
      << "optim.lr_init=" << c.lr_init << "\n"
      << "optim.lr_min=" << c.lr_min << "\n"
      << "optim.steps=" << c.steps << "\n"
      << "optim.batch=" << c.batch << "\n"
      << "optim.log_every=" << c.log_every << "\n"
      << "optim.clip_norm=" << c.clip_norm << "\n"
      << "data.seed=" << c.data_seed << "\n"
      << "data.size=" << c.data_size << "\n"
      << "data.count=" << c.data_count << "\n"
      << "noise.kind=" << (c.noise_kind == NoiseKind::mixed_gp ? "mixed-gp" : "gaussian") << "\n"
      << "noise.level=" << c.noise_level << "\n"
      << "noise.sigma=" << c.noise_sigma << "\n"
      << "noise.darken=" << (c.noise_darken ? "on" : "off") << "\n"
      << "noise.darken_lo=" << c.darken_lo << "\n"
      << "noise.darken_hi=" << c.darken_hi << "\n";
    return o.str();
}

std::vector<SceneTriple> synthetic_triples(const RunConfig& cfg) {
    std::vector<SceneTriple> out;
    for (int i = 0; i < cfg.data_count; ++i) {
        const auto s = derive_seed(cfg.data_seed, static_cast<std::uint64_t>(i));
        out.push_back(synth_triple(s, cfg.data_size, cfg.data_size, cfg.noise(s)));
    }
    return out;
}

SceneTriple held_out_triple(const RunConfig& cfg) {
    const auto s = derive_seed(cfg.data_seed, 0x686f6c64);
    return synth_triple(s, cfg.data_size, cfg.data_size, cfg.noise(s));
}

}  // namespace fcenet
