#include "liftkit/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "liftkit/errors.hpp"

namespace liftkit {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

IniFile IniFile::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
}

IniFile IniFile::from_string(const std::string& text) {
    IniFile ini;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        const std::string full = section + "." + key;
        if (ini.values_.count(full))
            throw ConfigError("config: duplicate key '" + full + "'");
        ini.values_[full] = value;
    }
    return ini;
}

bool IniFile::has(const std::string& section, const std::string& key) const {
    return values_.count(section + "." + key) > 0;
}

std::string IniFile::get_string(const std::string& section, const std::string& key,
                                const std::string& fallback) const {
    const std::string full = section + "." + key;
    consumed_.insert(full);
    const auto it = values_.find(full);
    return it == values_.end() ? fallback : it->second;
}

long IniFile::get_int(const std::string& section, const std::string& key, long fallback) const {
    const std::string raw = get_string(section, key, "");
    if (raw.empty()) return fallback;
    try {
        size_t pos = 0;
        const long v = std::stol(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + section + "." + key + "' is not an integer: " + raw);
    }
}

std::uint64_t IniFile::get_uint64(const std::string& section, const std::string& key,
                                  std::uint64_t fallback) const {
    const std::string raw = get_string(section, key, "");
    if (raw.empty()) return fallback;
    try {
        size_t pos = 0;
        const std::uint64_t v = std::stoull(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + section + "." + key + "' is not an unsigned integer: " + raw);
    }
}

double IniFile::get_double(const std::string& section, const std::string& key,
                           double fallback) const {
    const std::string raw = get_string(section, key, "");
    if (raw.empty()) return fallback;
    try {
        size_t pos = 0;
        const double v = std::stod(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + section + "." + key + "' is not a number: " + raw);
    }
}

bool IniFile::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    const std::string raw = get_string(section, key, "");
    if (raw.empty()) return fallback;
    if (raw == "true" || raw == "1" || raw == "yes") return true;
    if (raw == "false" || raw == "0" || raw == "no") return false;
    throw ConfigError("config: '" + section + "." + key + "' is not a boolean: " + raw);
}

namespace {

std::vector<std::string> split_list(const std::string& raw) {
    std::vector<std::string> parts;
    std::string cur;
    for (const char ch : raw + ",") {
        if (ch == ',') {
            const std::string t = trim(cur);
            if (!t.empty()) parts.push_back(t);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    return parts;
}

}  // namespace

std::vector<int> IniFile::get_int_list(const std::string& section, const std::string& key,
                                       const std::vector<int>& fallback) const {
    const std::string raw = get_string(section, key, "");
    if (raw.empty()) return fallback;
    std::vector<int> out;
    for (const auto& part : split_list(raw)) {
        try {
            out.push_back(std::stoi(part));
        } catch (const std::exception&) {
            throw ConfigError("config: '" + section + "." + key + "' has a non-integer entry: " + part);
        }
    }
    return out;
}

std::vector<double> IniFile::get_double_list(const std::string& section, const std::string& key,
                                             const std::vector<double>& fallback) const {
    const std::string raw = get_string(section, key, "");
    if (raw.empty()) return fallback;
    std::vector<double> out;
    for (const auto& part : split_list(raw)) {
        try {
            out.push_back(std::stod(part));
        } catch (const std::exception&) {
            throw ConfigError("config: '" + section + "." + key + "' has a non-numeric entry: " + part);
        }
    }
    return out;
}

void IniFile::check_all_consumed() const {
    for (const auto& [key, value] : values_)
        if (!consumed_.count(key))
            throw ConfigError("config: unknown key '" + key + "'");
}

ExperimentConfig ExperimentConfig::from_ini(const IniFile& ini) {
    ExperimentConfig c;
    if (!ini.has("experiment", "seed"))
        throw ConfigError("config: [experiment] seed is required (no wall-clock seeding)");
    c.out_dir = ini.get_string("experiment", "out_dir", c.out_dir);
    c.seed = ini.get_uint64("experiment", "seed", c.seed);

    c.skeleton_preset = ini.get_string("skeleton", "preset", c.skeleton_preset);

    c.train_count = static_cast<int>(ini.get_int("data", "train_count", c.train_count));
    c.test_count = static_cast<int>(ini.get_int("data", "test_count", c.test_count));
    c.noise_std_2d = ini.get_double("data", "noise_std_2d", c.noise_std_2d);
    c.camera_focal = ini.get_double("data", "camera_focal", c.camera_focal);
    c.camera_distance_mm = ini.get_double("data", "camera_distance_mm", c.camera_distance_mm);
    c.max_angle_deg = ini.get_double("data", "max_angle_deg", c.max_angle_deg);
    c.action_count = static_cast<int>(ini.get_int("data", "action_count", c.action_count));
    c.lift_seed = ini.get_uint64("data", "lift_seed", c.lift_seed);
    c.context_seed = ini.get_uint64("data", "context_seed", c.context_seed);
    c.quant_step = ini.get_double("data", "quant_step", c.quant_step);
    c.depth_scale_mm = ini.get_double("data", "depth_scale_mm", c.depth_scale_mm);
    c.depth_cue = ini.get_bool("data", "depth_cue", c.depth_cue);

    c.levels = static_cast<int>(ini.get_int("model", "levels", c.levels));
    c.dim = static_cast<int>(ini.get_int("model", "dim", c.dim));
    c.heads = static_cast<int>(ini.get_int("model", "heads", c.heads));
    c.p2c_blocks = static_cast<int>(ini.get_int("model", "p2c_blocks", c.p2c_blocks));
    c.j2j_blocks = static_cast<int>(ini.get_int("model", "j2j_blocks", c.j2j_blocks));
    c.ffn_mult = static_cast<int>(ini.get_int("model", "ffn_mult", c.ffn_mult));
    c.channel_tokens = ini.get_string("model", "channel_tokens", c.channel_tokens);
    c.init_seed = ini.get_uint64("model", "init_seed", c.init_seed);

    c.schedule_kind = ini.get_string("schedule", "kind", c.schedule_kind);
    c.total_steps = static_cast<int>(ini.get_int("schedule", "total_steps", c.total_steps));
    c.beta_start = ini.get_double("schedule", "beta_start", c.beta_start);
    c.beta_end = ini.get_double("schedule", "beta_end", c.beta_end);

    c.batch_size = static_cast<int>(ini.get_int("train", "batch_size", c.batch_size));
    c.epochs = static_cast<int>(ini.get_int("train", "epochs", c.epochs));
    c.lr_start = ini.get_double("train", "lr_start", c.lr_start);
    c.lr_decay = ini.get_double("train", "lr_decay", c.lr_decay);
    c.flip_prob = ini.get_double("train", "flip_prob", c.flip_prob);
    c.scale_mm = ini.get_double("train", "scale_mm", c.scale_mm);
    c.grad_clip = ini.get_double("train", "grad_clip", c.grad_clip);
    c.mask = ini.get_string("train", "mask", c.mask);

    c.hypotheses = static_cast<int>(ini.get_int("sample", "hypotheses", c.hypotheses));
    c.steps = static_cast<int>(ini.get_int("sample", "steps", c.steps));
    c.variant = ini.get_string("sample", "variant", c.variant);

    c.strategy = ini.get_string("aggregate", "strategy", c.strategy);

    c.per_action = ini.get_bool("eval", "per_action", c.per_action);

    c.study_kind = ini.get_string("study", "kind", c.study_kind);
    c.h_values = ini.get_int_list("study", "h_values", c.h_values);
    c.recalls = ini.get_double_list("study", "recalls", c.recalls);

    ini.check_all_consumed();
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    return from_ini(IniFile::from_file(path));
}

void ExperimentConfig::validate() const {
    if (out_dir.empty()) throw ConfigError("config: [experiment] out_dir is required");
    if (train_count < 1 || test_count < 1)
        throw ConfigError("config: train_count and test_count must be >= 1");
    if (hypotheses < 1 || steps < 1) throw ConfigError("config: hypotheses and steps must be >= 1");
    if (steps > total_steps) throw ConfigError("config: steps (K) cannot exceed total_steps (T)");
    if (variant != "ddim" && variant != "literal")
        throw ConfigError("config: sample variant must be 'ddim' or 'literal'");
    if (study_kind != "hcount" && study_kind != "confidence" && study_kind != "ablation")
        throw ConfigError("config: study kind must be hcount, confidence or ablation");
    for (const double r : recalls)
        if (!(r > 0.0 && r <= 1.0)) throw ConfigError("config: recalls must lie in (0, 1]");
    for (const int h : h_values)
        if (h < 1) throw ConfigError("config: h_values must be >= 1");
}

std::string ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["experiment"] = {{"out_dir", out_dir}, {"seed", seed}};
    j["skeleton"] = {{"preset", skeleton_preset}};
    j["data"] = {{"train_count", train_count},
                 {"test_count", test_count},
                 {"noise_std_2d", noise_std_2d},
                 {"camera_focal", camera_focal},
                 {"camera_distance_mm", camera_distance_mm},
                 {"max_angle_deg", max_angle_deg},
                 {"action_count", action_count},
                 {"lift_seed", lift_seed},
                 {"context_seed", context_seed},
                 {"quant_step", quant_step},
                 {"depth_scale_mm", depth_scale_mm},
                 {"depth_cue", depth_cue}};
    j["model"] = {{"levels", levels},
                  {"dim", dim},
                  {"heads", heads},
                  {"p2c_blocks", p2c_blocks},
                  {"j2j_blocks", j2j_blocks},
                  {"ffn_mult", ffn_mult},
                  {"channel_tokens", channel_tokens},
                  {"init_seed", init_seed}};
    j["schedule"] = {{"kind", schedule_kind},
                     {"total_steps", total_steps},
                     {"beta_start", beta_start},
                     {"beta_end", beta_end}};
    j["train"] = {{"batch_size", batch_size}, {"epochs", epochs},   {"lr_start", lr_start},
                  {"lr_decay", lr_decay},     {"flip_prob", flip_prob}, {"scale_mm", scale_mm},
                  {"grad_clip", grad_clip},   {"mask", mask}};
    j["sample"] = {{"hypotheses", hypotheses}, {"steps", steps}, {"variant", variant}};
    j["aggregate"] = {{"strategy", strategy}};
    j["eval"] = {{"per_action", per_action}};
    j["study"] = {{"kind", study_kind}, {"h_values", h_values}, {"recalls", recalls}};
    return j.dump(2);
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : text) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string ExperimentConfig::content_hash() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(to_json())));
    return buf;
}

}  // namespace liftkit
