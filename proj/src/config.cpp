#include "ccswap/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "ccswap/error.hpp"

namespace ccswap {
namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const char* first = v.data();
    const char* last  = v.data() + v.size();
    auto [ptr, ec]    = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last) throw ConfigError("key '" + key + "': '" + v + "' is not a valid number");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("key '" + key + "': '" + v + "' is not a boolean");
}

std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string fmt_bool(bool v) { return v ? "true" : "false"; }

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const auto& item : split(v, ',')) out.push_back(parse_number<int>(key, item));
    return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
    std::ostringstream os;
    for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
    return os.str();
}

struct Key {
    std::string name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define CCSWAP_STR(K, FIELD)                                                               \
    Key { K, [](RunConfig& c, const std::string& v) { c.FIELD = v; },                     \
          [](const RunConfig& c) { return std::string(c.FIELD); } }
#define CCSWAP_NUM(K, FIELD, T)                                                            \
    Key { K, [](RunConfig& c, const std::string& v) { c.FIELD = parse_number<T>(K, v); }, \
          [](const RunConfig& c) { return std::to_string(c.FIELD); } }
#define CCSWAP_DBL(K, FIELD)                                                               \
    Key { K, [](RunConfig& c, const std::string& v) { c.FIELD = parse_number<double>(K, v); }, \
          [](const RunConfig& c) { return fmt_double(c.FIELD); } }
#define CCSWAP_BOOL(K, FIELD)                                                              \
    Key { K, [](RunConfig& c, const std::string& v) { c.FIELD = parse_bool(K, v); },      \
          [](const RunConfig& c) { return fmt_bool(c.FIELD); } }
// toy grid keys switch off automatic sizing
#define CCSWAP_TOY_DIM(K, FIELD)                                                           \
    Key { K, [](RunConfig& c, const std::string& v) { c.FIELD = parse_number<int>(K, v); c.toy_auto_size = false; }, \
          [](const RunConfig& c) { return std::to_string(c.FIELD); } }

const std::vector<Key>& key_table() {
    static const std::vector<Key> table = {
        CCSWAP_STR("source_prompt", swap.source_prompt),
        CCSWAP_STR("target_prompt", swap.target_prompt),
        CCSWAP_STR("source_concept", swap.source_concept),
        CCSWAP_STR("target_concept", swap.target_concept),
        CCSWAP_STR("concept_token", concept_token),
        CCSWAP_STR("concept_checkpoint", concept_checkpoint),
        CCSWAP_DBL("eta", swap.eta),
        CCSWAP_NUM("total_steps", swap.total_steps, int),
        CCSWAP_NUM("lambda", swap.lambda, int),
        CCSWAP_DBL("alpha", swap.alpha),
        CCSWAP_DBL("beta", swap.beta),
        CCSWAP_DBL("guidance", swap.guidance),
        CCSWAP_NUM("t_min", swap.t_min, int),
        CCSWAP_NUM("t_max", swap.t_max, int),
        CCSWAP_NUM("seed", swap.seed, std::uint64_t),
        CCSWAP_STR("bbox", bbox),
        Key{"bbox_timesteps", [](RunConfig& c, const std::string& v) { c.swap.bbox_timesteps = parse_int_list("bbox_timesteps", v); },
            [](const RunConfig& c) { return join(c.swap.bbox_timesteps); }},
        Key{"capture_layers", [](RunConfig& c, const std::string& v) { c.swap.capture_layers = split(v, ','); },
            [](const RunConfig& c) { return join(c.swap.capture_layers); }},
        Key{"refine_mode",
            [](RunConfig& c, const std::string& v) {
                if (v == "matrix") c.swap.refine_mode = RefineMode::MatrixProduct;
                else if (v == "elementwise") c.swap.refine_mode = RefineMode::Elementwise;
                else throw ConfigError("key 'refine_mode': expected matrix | elementwise, got '" + v + "'");
            },
            [](const RunConfig& c) {
                return std::string(c.swap.refine_mode == RefineMode::MatrixProduct ? "matrix" : "elementwise");
            }},
        CCSWAP_BOOL("bgm", swap.bgm),
        CCSWAP_BOOL("secr_source", swap.secr_source),
        CCSWAP_BOOL("secr_target", swap.secr_target),
        Key{"secr_layers", [](RunConfig& c, const std::string& v) { c.swap.secr_layers = split(v, ','); },
            [](const RunConfig& c) { return join(c.swap.secr_layers); }},
        CCSWAP_BOOL("trace", swap.trace),

        Key{"backend",
            [](RunConfig& c, const std::string& v) {
                if (v != "toy" && v != "diffusion-adapter") {
                    throw ConfigError("key 'backend': expected toy | diffusion-adapter, got '" + v + "'");
                }
                c.backend = v;
            },
            [](const RunConfig& c) { return c.backend; }},
        CCSWAP_TOY_DIM("toy.height", toy.height),
        CCSWAP_TOY_DIM("toy.width", toy.width),
        CCSWAP_TOY_DIM("toy.image_channels", toy.image_channels),
        CCSWAP_BOOL("toy.auto_size", toy_auto_size),  // after the dims, which clear it
        CCSWAP_NUM("toy.downsample", toy.downsample, int),
        CCSWAP_NUM("toy.token_limit", toy.token_limit, int),
        CCSWAP_NUM("toy.embed_dim", toy.embed_dim, int),
        CCSWAP_NUM("toy.d_prime", toy.d_prime, int),
        CCSWAP_NUM("toy.seed", toy.seed, std::uint64_t),
        Key{"toy.self_attention",
            [](RunConfig& c, const std::string& v) {
                if (v == "local") c.toy.self_attention = ToyConfig::SelfAttention::Local;
                else if (v == "identity") c.toy.self_attention = ToyConfig::SelfAttention::Identity;
                else throw ConfigError("key 'toy.self_attention': expected local | identity, got '" + v + "'");
            },
            [](const RunConfig& c) {
                return std::string(c.toy.self_attention == ToyConfig::SelfAttention::Local ? "local" : "identity");
            }},
        CCSWAP_DBL("toy.self_center_weight", toy.self_center_weight),
        CCSWAP_DBL("toy.hot_logit", toy.hot_logit),
        CCSWAP_DBL("toy.bos_logit", toy.bos_logit),
        CCSWAP_DBL("toy.hook_gain", toy.hook_gain),
        Key{"toy.forward_delay_us",
            [](RunConfig& c, const std::string& v) {
                c.toy.forward_delay = std::chrono::microseconds(parse_number<long>("toy.forward_delay_us", v));
            },
            [](const RunConfig& c) { return std::to_string(c.toy.forward_delay.count()); }},
        Key{"toy.convention",
            [](RunConfig& c, const std::string& v) {
                if (v == "ve") c.toy.convention = NoiseSchedule::Convention::VarianceExploding;
                else if (v == "vp") c.toy.convention = NoiseSchedule::Convention::VariancePreserving;
                else throw ConfigError("key 'toy.convention': expected ve | vp, got '" + v + "'");
            },
            [](const RunConfig& c) {
                return std::string(c.toy.convention == NoiseSchedule::Convention::VarianceExploding ? "ve" : "vp");
            }},
        CCSWAP_STR("toy.plant", toy_plant),

        CCSWAP_STR("adapter.checkpoint", adapter.checkpoint),
        CCSWAP_NUM("adapter.image_size", adapter.image_size, int),
        CCSWAP_NUM("adapter.latent_channels", adapter.latent_channels, int),
        CCSWAP_NUM("adapter.downsample", adapter.downsample, int),
        CCSWAP_NUM("adapter.token_limit", adapter.token_limit, int),
        CCSWAP_NUM("adapter.embed_dim", adapter.embed_dim, int),

        CCSWAP_STR("source_image", source_image),
        CCSWAP_STR("output", output),
        CCSWAP_STR("bench_root", bench_root),
        Key{"runner",
            [](RunConfig& c, const std::string& v) {
                if (v != "swap" && v != "identity") throw ConfigError("key 'runner': expected swap | identity, got '" + v + "'");
                c.runner = v;
            },
            [](const RunConfig& c) { return c.runner; }},
        CCSWAP_STR("scorer", scorer),
        Key{"pixel_range",
            [](RunConfig& c, const std::string& v) {
                if (v != "unit" && v != "byte" && v != "symmetric") {
                    throw ConfigError("key 'pixel_range': expected unit | byte | symmetric, got '" + v + "'");
                }
                c.pixel_range = v;
            },
            [](const RunConfig& c) { return c.pixel_range; }},
        CCSWAP_NUM("jobs", jobs, int),
        CCSWAP_STR("method", method),
        Key{"lambdas", [](RunConfig& c, const std::string& v) { c.lambdas = parse_int_list("lambdas", v); },
            [](const RunConfig& c) { return join(c.lambdas); }},
    };
    return table;
}

#undef CCSWAP_STR
#undef CCSWAP_NUM
#undef CCSWAP_DBL
#undef CCSWAP_BOOL
#undef CCSWAP_TOY_DIM

const Key& find_key(const std::string& name) {
    for (const auto& k : key_table())
        if (k.name == name) return k;
    throw ConfigError("unknown config key '" + name + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& k : key_table()) out.push_back(k.name);
        return out;
    }();
    return names;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    find_key(trim(key)).set(cfg, trim(value));
}

std::string get_setting(const RunConfig& cfg, const std::string& key) { return find_key(key).get(cfg); }

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        try {
            apply_setting(cfg, t.substr(0, eq), t.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    if (path.extension() == ".json") {
        json j;
        try {
            j = json::parse(buf.str());
        } catch (const json::exception& e) {
            throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
        }
        const json& obj = j.contains("config") ? j["config"] : j;
        if (!obj.is_object()) throw ConfigError("'" + path.string() + "' has no config object");
        for (const auto& [k, v] : obj.items()) {
            if (!v.is_string()) throw ConfigError("'" + path.string() + "': value of '" + k + "' must be a string");
            if (std::find(config_keys().begin(), config_keys().end(), k) == config_keys().end()) {
                throw ConfigError(path.string() + ": unknown config key '" + k + "'");
            }
        }
        // JSON objects iterate alphabetically; some keys depend on being applied after others
        for (const auto& k : config_keys()) {
            if (!obj.contains(k)) continue;
            try {
                apply_setting(cfg, k, obj[k].get<std::string>());
            } catch (const ConfigError& e) {
                throw ConfigError(path.string() + ": " + e.what());
            }
        }
        return;
    }
    apply_config_text(cfg, buf.str(), path.string());
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream os;
    for (const auto& k : key_table()) os << k.name << " = " << k.get(cfg) << '\n';
    return os.str();
}

json config_to_json(const RunConfig& cfg) {
    json j = json::object();
    for (const auto& k : key_table()) j[k.name] = k.get(cfg);
    return j;
}

void fit_toy_to_image(RunConfig& cfg, const Shape3& image_shape) {
    if (cfg.backend != "toy" || !cfg.toy_auto_size) return;
    const int f = cfg.toy.downsample;
    if (f <= 0 || image_shape.height % f != 0 || image_shape.width % f != 0) {
        throw ConfigError("image " + image_shape.str() + " is not divisible by toy.downsample = " + std::to_string(f));
    }
    cfg.toy.image_channels = image_shape.channels;
    cfg.toy.height         = image_shape.height / f;
    cfg.toy.width          = image_shape.width / f;
}

std::unique_ptr<DenoiserBackend> make_backend(const RunConfig& cfg) {
    try {
        if (cfg.backend == "diffusion-adapter") return std::make_unique<DiffusionAdapter>(cfg.adapter);
        ToyConfig toy = cfg.toy;
        const GridSize grid{toy.height, toy.width};
        for (const auto& item : split(cfg.toy_plant, ';')) {
            const auto at = item.find('@');
            if (at == std::string::npos) throw ConfigError("toy.plant entry '" + item + "' must be word@r0,c0,r1,c1");
            toy.planted[trim(item.substr(0, at))].push_back(parse_bbox(item.substr(at + 1), grid));
        }
        return std::make_unique<ToyBackend>(std::move(toy));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("backend: ") + e.name() + ": " + e.what());
    }
}

SwapConfig effective_swap_config(const RunConfig& cfg, const DenoiserBackend& backend) {
    SwapConfig s = cfg.swap;
    try {
        if (!cfg.bbox.empty() && cfg.bbox != "none") {
            const auto& lat = backend.info().latent;
            s.bbox_override = parse_bbox(cfg.bbox, GridSize{lat.height, lat.width});
        }
        s.validate(backend);
    } catch (const Error& e) {
        throw ConfigError(std::string(e.name()) + ": " + e.what());
    }
    return s;
}

ConceptSpec concept_spec(const RunConfig& cfg) {
    ConceptSpec spec;
    spec.checkpoint_ref = cfg.concept_checkpoint;
    if (!cfg.concept_token.empty()) {
        spec.token = cfg.concept_token;
    } else {
        const auto words = split_words(cfg.swap.target_concept);
        if (!words.empty()) spec.token = words.front();
    }
    return spec;
}

}  // namespace ccswap
