#pragma once

// Experiment configuration: a TOML subset (sections, key = value, strings,
// numbers, booleans, flat arrays, # comments) flattened to dotted keys.
// Every key must exist in the defaults table; `--set key=value` overrides win.

#include <cctype>
#include <string>
#include <vector>

#include <json.hpp>

#include "tactile/contact.hpp"
#include "tactile/io.hpp"
#include "tactile/synth.hpp"
#include "tactile/trainer.hpp"

namespace tactile {

using Json = nlohmann::ordered_json;

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

/// Drops a trailing # comment that is not inside a string.
inline std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
        if (line[i] == '#' && !in_str) return line.substr(0, i);
    }
    return line;
}

inline bool bare_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
    return true;
}

class ValueParser {
public:
    ValueParser(std::string_view s, std::string where) : s_(s), where_(std::move(where)) {}

    Json parse() {
        Json v = value();
        skip_ws();
        if (pos_ != s_.size()) error("trailing characters after value");
        return v;
    }

private:
    [[noreturn]] void error(const std::string& what) const { fail(ErrorKind::ConfigParseError, where_ + ": " + what); }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    Json value() {
        skip_ws();
        if (pos_ >= s_.size()) error("missing value");
        const char c = s_[pos_];
        if (c == '"') return string();
        if (c == '[') return array();
        std::size_t end = pos_;
        while (end < s_.size() && s_[end] != ',' && s_[end] != ']' && !std::isspace(static_cast<unsigned char>(s_[end]))) ++end;
        const std::string tok(s_.substr(pos_, end - pos_));
        pos_ = end;
        if (tok == "true") return true;
        if (tok == "false") return false;
        std::string digits;
        for (char ch : tok)
            if (ch != '_') digits += ch;
        double d;
        if (!io::parse_double(digits, d)) error("cannot parse value '" + tok + "'");
        const bool integral = digits.find_first_of(".eE") == std::string::npos;
        if (integral) return static_cast<std::int64_t>(d);
        return d;
    }

    Json string() {
        std::string out;
        ++pos_;
        while (pos_ < s_.size() && s_[pos_] != '"') {
            if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) {
                const char e = s_[++pos_];
                out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
            } else {
                out += s_[pos_];
            }
            ++pos_;
        }
        if (pos_ >= s_.size()) error("unterminated string");
        ++pos_;
        return out;
    }

    Json array() {
        Json a = Json::array();
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {
            ++pos_;
            return a;
        }
        while (true) {
            a.push_back(value());
            skip_ws();
            if (pos_ >= s_.size()) error("unterminated array");
            if (s_[pos_] == ',') {
                ++pos_;
                skip_ws();
                if (pos_ < s_.size() && s_[pos_] == ']') {
                    ++pos_;
                    return a;
                }
                continue;
            }
            if (s_[pos_] == ']') {
                ++pos_;
                return a;
            }
            error("expected , or ] in array");
        }
    }

    std::string_view s_;
    std::string where_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline Json parse_config_value(const std::string& text, const std::string& where) { return detail::ValueParser(text, where).parse(); }

/// Flat {dotted.key: value} object in file order.
inline Json parse_toml(const std::string& text, const std::string& source = "config") {
    Json out = Json::object();
    std::string section;
    int lineno = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) nl = text.size();
        const std::string line = detail::trim(detail::strip_comment(text.substr(start, nl - start)));
        start = nl + 1;
        ++lineno;
        const std::string where = source + ":" + std::to_string(lineno);
        if (line.empty()) {
            if (nl == text.size()) break;
            continue;
        }
        if (line.front() == '[') {
            require(line.back() == ']' && line.size() > 2, ErrorKind::ConfigParseError, where + ": malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            require(detail::bare_key(section), ErrorKind::ConfigParseError, where + ": bad section name '" + section + "'");
        } else {
            const auto eq = line.find('=');
            require(eq != std::string::npos, ErrorKind::ConfigParseError, where + ": expected key = value");
            const std::string key = detail::trim(line.substr(0, eq));
            require(detail::bare_key(key), ErrorKind::ConfigParseError, where + ": bad key '" + key + "'");
            const std::string full = section.empty() ? key : section + "." + key;
            require(!out.contains(full), ErrorKind::ConfigParseError, where + ": duplicate key " + full);
            out[full] = parse_config_value(line.substr(eq + 1), where);
        }
        if (nl == text.size()) break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Defaults table

inline Json default_config() {
    const SynthConfig sc;
    const ContactParams cp;
    const RunConfig rc;
    const ModelConfig& m = rc.model;
    const AugmentConfig& a = rc.augment;
    Json j = Json::object();
    j["seed"] = 0;
    j["data.root"] = "data";

    const Json s = synth_config_json(sc);
    for (auto it = s.begin(); it != s.end(); ++it)
        if (it.key() != "seed") j["synth." + it.key()] = it.value();

    j["contact.sensor_modulus_pa"] = cp.sensor_modulus_pa;
    j["contact.poisson_object"] = cp.poisson_object;
    j["contact.poisson_sensor"] = cp.poisson_sensor;
    j["contact.effective_radius_m"] = cp.effective_radius_m;

    const Json mj = model_config_json(m);
    for (auto it = mj.begin(); it != mj.end(); ++it) j["model." + it.key()] = it.value();

    j["train.split_mode"] = to_string(rc.split_mode);
    j["train.sampling"] = to_string(rc.sampling);
    j["train.t_balance"] = rc.balance.t_balance;
    j["train.epochs"] = rc.epochs;
    j["train.batch_size"] = rc.batch_size;
    j["train.lr"] = rc.lr;
    j["train.patience"] = rc.patience;
    j["train.seeds"] = rc.seeds;

    j["augment.flip_prob"] = a.flip_prob;
    j["augment.gaussian_sigma"] = a.gaussian_sigma;
    j["augment.brightness"] = a.brightness;
    j["augment.contrast"] = a.contrast;
    j["augment.saturation"] = a.saturation;
    j["augment.hue"] = a.hue;

    j["bounds.log10_min"] = rc.bounds.log10_min;
    j["bounds.log10_max"] = rc.bounds.log10_max;

    j["report.windows"] = 7;
    j["report.span_decades"] = 3;
    return j;
}

namespace detail {

inline bool compatible(const Json& def, const Json& v) {
    if (def.is_boolean()) return v.is_boolean();
    if (def.is_number()) return v.is_number();
    if (def.is_string()) return v.is_string();
    if (def.is_array()) {
        if (!v.is_array()) return false;
        if (def.empty()) return true;
        for (const auto& e : v)
            if (!compatible(def[0], e)) return false;
        return true;
    }
    return false;
}

}  // namespace detail

/// Effective configuration: defaults, then the file, then overrides.
class Config {
public:
    Config() : values_(default_config()) {}

    void merge(const Json& flat, const std::string& source) {
        for (auto it = flat.begin(); it != flat.end(); ++it) set(it.key(), it.value(), source);
    }

    void merge_file(const io::fs::path& path) {
        require(io::fs::exists(path), ErrorKind::ConfigParseError, "config file not found: " + path.string());
        merge(parse_toml(io::read_text(path), path.string()), path.string());
    }

    /// "dotted.key=value"; a value that does not parse as a TOML value is taken as a bare string.
    void override_with(const std::string& assignment) {
        const auto eq = assignment.find('=');
        require(eq != std::string::npos, ErrorKind::ConfigParseError, "override must be key=value: " + assignment);
        const std::string key = detail::trim(assignment.substr(0, eq));
        const std::string raw = detail::trim(assignment.substr(eq + 1));
        Json v;
        try {
            v = parse_config_value(raw, "override " + key);
        } catch (const Error&) {
            v = raw;
        }
        set(key, v, "override");
    }

    void set(const std::string& key, const Json& v, const std::string& source) {
        require(values_.contains(key), ErrorKind::ConfigParseError, source + ": unknown key " + key);
        const Json& def = values_.at(key);
        require(detail::compatible(def, v), ErrorKind::ConfigParseError, source + ": wrong type for " + key + " (expected like " + def.dump() + ")");
        values_[key] = v;
    }

    const Json& at(const std::string& key) const {
        require(values_.contains(key), ErrorKind::UnknownKey, "no config key " + key);
        return values_.at(key);
    }

    double num(const std::string& k) const { return at(k).get<double>(); }
    int integer(const std::string& k) const {
        const double d = num(k);
        require(d == std::floor(d), ErrorKind::ConfigParseError, k + " must be an integer");
        return static_cast<int>(d);
    }
    std::string str(const std::string& k) const { return at(k).get<std::string>(); }
    bool flag(const std::string& k) const { return at(k).get<bool>(); }

    const Json& values() const { return values_; }
    std::string canonical() const { return values_.dump(); }
    std::string hash() const { return io::fnv1a_hex(canonical()); }

private:
    Json values_;
};

inline std::vector<int> int_list(const Json& a) {
    std::vector<int> out;
    for (const auto& e : a) out.push_back(static_cast<int>(e.get<double>()));
    return out;
}

inline SynthConfig synth_config(const Config& c) {
    SynthConfig s;
    s.num_objects = c.integer("synth.num_objects");
    s.grasps_per_object = c.integer("synth.grasps_per_object");
    s.log10_min = c.num("synth.log10_min");
    s.log10_max = c.num("synth.log10_max");
    const auto& mix = c.at("synth.shape_mix");
    require(mix.size() == 5, ErrorKind::ConfigParseError, "synth.shape_mix needs 5 proportions (sphere, cylinder, rectangular, hex, irregular)");
    for (int i = 0; i < 5; ++i) s.shape_mix[i] = mix[i].get<double>();
    s.image_size = c.integer("synth.image_size");
    s.radius_min_m = c.num("synth.radius_min_m");
    s.radius_max_m = c.num("synth.radius_max_m");
    s.width0_min_m = c.num("synth.width0_min_m");
    s.width0_max_m = c.num("synth.width0_max_m");
    s.samples = c.integer("synth.samples");
    s.max_indentation_m = c.num("synth.max_indentation_m");
    s.fov_half_m = c.num("synth.fov_half_m");
    s.force_noise_n = c.num("synth.force_noise_n");
    s.width_noise_m = c.num("synth.width_noise_m");
    s.pixel_noise = c.num("synth.pixel_noise");
    s.stiff_saturation = c.flag("synth.stiff_saturation");
    s.plateau_noise_n = c.num("synth.plateau_noise_n");
    s.estimates = c.flag("synth.estimates");
    s.seed = static_cast<std::uint64_t>(c.integer("seed"));
    try {
        s.validate();
    } catch (const Error& e) {
        fail(ErrorKind::ConfigParseError, std::string("[synth] ") + e.what());
    }
    return s;
}

inline ContactParams contact_params(const Config& c) {
    ContactParams p;
    p.sensor_modulus_pa = c.num("contact.sensor_modulus_pa");
    p.poisson_object = c.num("contact.poisson_object");
    p.poisson_sensor = c.num("contact.poisson_sensor");
    p.effective_radius_m = c.num("contact.effective_radius_m");
    try {
        p.validate();
    } catch (const Error& e) {
        fail(ErrorKind::ConfigParseError, std::string("[contact] ") + e.what());
    }
    return p;
}

inline RunConfig run_config(const Config& c) {
    RunConfig r;
    try {
        Json mj = Json::object();
        for (const char* k : {"architecture", "strategy", "image_size", "encoder_channels", "embed", "shared_encoder", "lstm_hidden", "tf_dim", "tf_heads",
                              "tf_depth", "tf_ffn", "pos_dim", "tf_pre_norm", "decoder", "small_decoder", "l2_lambda"})
            mj[k] = c.at(std::string("model.") + k);
        for (const char* k : {"image_size", "embed", "lstm_hidden", "tf_dim", "tf_heads", "tf_depth", "tf_ffn", "pos_dim"})
            mj[k] = c.integer(std::string("model.") + k);
        mj["encoder_channels"] = int_list(c.at("model.encoder_channels"));
        mj["decoder"] = int_list(c.at("model.decoder"));
        mj["small_decoder"] = int_list(c.at("model.small_decoder"));
        r.model = model_config_from_json(mj);
        r.split_mode = parse_split_mode(c.str("train.split_mode"));
        r.sampling = parse_sampling(c.str("train.sampling"));
        r.balance.t_balance = c.integer("train.t_balance");
        r.epochs = c.integer("train.epochs");
        r.batch_size = c.integer("train.batch_size");
        r.lr = c.num("train.lr");
        r.patience = c.integer("train.patience");
        r.seeds.clear();
        for (const auto& s : c.at("train.seeds")) r.seeds.push_back(static_cast<std::uint64_t>(s.get<double>()));
        r.augment.flip_prob = c.num("augment.flip_prob");
        r.augment.gaussian_sigma = c.num("augment.gaussian_sigma");
        r.augment.brightness = c.num("augment.brightness");
        r.augment.contrast = c.num("augment.contrast");
        r.augment.saturation = c.num("augment.saturation");
        r.augment.hue = c.num("augment.hue");
        r.bounds = {c.num("bounds.log10_min"), c.num("bounds.log10_max")};
        r.validate();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ConfigParseError) throw;
        fail(ErrorKind::ConfigParseError, e.what());
    }
    return r;
}

/// "1,2,5" or "0-9" or a mix ("0-2,7").
inline std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t comma = s.find(',', start);
        if (comma == std::string::npos) comma = s.size();
        const std::string part = detail::trim(std::string_view(s).substr(start, comma - start));
        require(!part.empty(), ErrorKind::ConfigParseError, "empty entry in seed list '" + s + "'");
        const auto dash = part.find('-', 1);
        try {
            std::size_t used = 0;
            if (dash == std::string::npos) {
                out.push_back(std::stoull(part, &used));
                require(used == part.size(), ErrorKind::ConfigParseError, "bad seed '" + part + "'");
            } else {
                const auto a = std::stoull(part.substr(0, dash)), b = std::stoull(part.substr(dash + 1));
                require(a <= b, ErrorKind::ConfigParseError, "bad seed range '" + part + "'");
                for (auto k = a; k <= b; ++k) out.push_back(k);
            }
        } catch (const std::logic_error&) {
            fail(ErrorKind::ConfigParseError, "bad seed '" + part + "'");
        }
        start = comma + 1;
        if (comma == s.size()) break;
    }
    return out;
}

}  // namespace tactile
