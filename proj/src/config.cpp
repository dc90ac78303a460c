#include "isd/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "isd/errors.hpp"

namespace isd {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw ConfigError("config: bad integer for '" + key + "': " + v);
    return out;
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    uint64_t out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw ConfigError("config: bad unsigned integer for '" + key + "': " + v);
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for '" + key + "': " + v);
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: bad boolean for '" + key + "': " + v);
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError("config: empty element in '" + key + "'");
        out.push_back(static_cast<int>(parse_int(key, item)));
    }
    if (out.empty()) throw ConfigError("config: empty list for '" + key + "'");
    return out;
}

std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fmt_list(const std::vector<int>& xs) {
    std::string s;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(xs[i]);
    }
    return s;
}

} // namespace

void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "diffusion_steps") cfg.diffusion_steps = static_cast<int>(parse_int(key, value));
    else if (key == "beta_start") cfg.beta_start = parse_double(key, value);
    else if (key == "beta_end") cfg.beta_end = parse_double(key, value);
    else if (key == "levels") cfg.levels = static_cast<int>(parse_int(key, value));
    else if (key == "base_channels") cfg.base_channels = static_cast<int>(parse_int(key, value));
    else if (key == "channel_mult") cfg.channel_mult = parse_int_list(key, value);
    else if (key == "groups") cfg.groups = static_cast<int>(parse_int(key, value));
    else if (key == "ablate") cfg.ablate = parse_bool(key, value);
    else if (key == "pyramid_taps") {
        if (value != "decoder" && value != "encoder")
            throw ConfigError("config: pyramid_taps must be 'decoder' or 'encoder'");
        cfg.pyramid_taps = value;
    } else if (key == "iters") cfg.iters = parse_int(key, value);
    else if (key == "lr") cfg.lr = parse_double(key, value);
    else if (key == "ratios") cfg.ratios = parse_int_list(key, value);
    else if (key == "clip_norm") cfg.clip_norm = parse_double(key, value);
    else if (key == "log_interval") cfg.log_interval = parse_int(key, value);
    else if (key == "ckpt_interval") cfg.ckpt_interval = parse_int(key, value);
    else if (key == "sampler") {
        if (value != "ddim" && value != "ddpm")
            throw ConfigError("config: sampler must be 'ddim' or 'ddpm'");
        cfg.sampler = value;
    } else if (key == "ddim_steps") cfg.ddim_steps = static_cast<int>(parse_int(key, value));
    else if (key == "jobs") cfg.jobs = static_cast<int>(parse_int(key, value));
    else if (key == "vol_count") cfg.vol_count = static_cast<int>(parse_int(key, value));
    else if (key == "vol_depth") cfg.vol_depth = static_cast<int>(parse_int(key, value));
    else if (key == "vol_height") cfg.vol_height = static_cast<int>(parse_int(key, value));
    else if (key == "vol_width") cfg.vol_width = static_cast<int>(parse_int(key, value));
    else if (key == "data_dir") cfg.data_dir = value;
    else if (key == "out_path") cfg.out_path = value;
    else throw ConfigError("config: unknown key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
        apply_config_key(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

RunConfig parse_config_file(const std::string& path, RunConfig base) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str(), std::move(base));
}

std::string canonical_config(const RunConfig& c) {
    std::ostringstream os;
    os << "ablate = " << (c.ablate ? "true" : "false") << "\n";
    os << "base_channels = " << c.base_channels << "\n";
    os << "beta_end = " << fmt_double(c.beta_end) << "\n";
    os << "beta_start = " << fmt_double(c.beta_start) << "\n";
    os << "channel_mult = " << fmt_list(c.channel_mult) << "\n";
    os << "ckpt_interval = " << c.ckpt_interval << "\n";
    os << "clip_norm = " << fmt_double(c.clip_norm) << "\n";
    os << "data_dir = " << c.data_dir << "\n";
    os << "ddim_steps = " << c.ddim_steps << "\n";
    os << "diffusion_steps = " << c.diffusion_steps << "\n";
    os << "groups = " << c.groups << "\n";
    os << "iters = " << c.iters << "\n";
    os << "jobs = " << c.jobs << "\n";
    os << "levels = " << c.levels << "\n";
    os << "log_interval = " << c.log_interval << "\n";
    os << "lr = " << fmt_double(c.lr) << "\n";
    os << "out_path = " << c.out_path << "\n";
    os << "pyramid_taps = " << c.pyramid_taps << "\n";
    os << "ratios = " << fmt_list(c.ratios) << "\n";
    os << "sampler = " << c.sampler << "\n";
    os << "seed = " << c.seed << "\n";
    os << "vol_count = " << c.vol_count << "\n";
    os << "vol_depth = " << c.vol_depth << "\n";
    os << "vol_height = " << c.vol_height << "\n";
    os << "vol_width = " << c.vol_width << "\n";
    return os.str();
}

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t config_hash(const RunConfig& cfg) {
    return fnv1a64(canonical_config(cfg));
}

uint64_t model_config_hash(const RunConfig& c) {
    std::ostringstream os;
    os << "ablate = " << (c.ablate ? "true" : "false") << "\n";
    os << "base_channels = " << c.base_channels << "\n";
    os << "channel_mult = " << fmt_list(c.channel_mult) << "\n";
    os << "diffusion_steps = " << c.diffusion_steps << "\n";
    os << "groups = " << c.groups << "\n";
    os << "levels = " << c.levels << "\n";
    os << "pyramid_taps = " << c.pyramid_taps << "\n";
    return fnv1a64(os.str());
}

ModelConfig to_model_config(const RunConfig& c) {
    ModelConfig m;
    m.levels = c.levels;
    m.base_channels = c.base_channels;
    m.channel_mult = c.channel_mult;
    m.groups = c.groups;
    m.diffusion_steps = c.diffusion_steps;
    m.ablation_mode = c.ablate;
    m.decoder_taps = c.pyramid_taps == "decoder";
    m.validate();
    return m;
}

} // namespace isd
