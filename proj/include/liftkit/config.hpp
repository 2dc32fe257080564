#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace liftkit {

// Minimal INI reader: [section] headers, key = value lines, # or ; comments.
// Unknown keys are rejected at resolve time to catch typos early.
class IniFile {
public:
    static IniFile from_file(const std::string& path);
    static IniFile from_string(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    long get_int(const std::string& section, const std::string& key, long fallback) const;
    std::uint64_t get_uint64(const std::string& section, const std::string& key,
                             std::uint64_t fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<int> get_int_list(const std::string& section, const std::string& key,
                                  const std::vector<int>& fallback) const;
    std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) const;

    // Throws ConfigError naming any key never read by a getter.
    void check_all_consumed() const;

private:
    std::map<std::string, std::string> values_;  // "section.key" -> raw text
    mutable std::set<std::string> consumed_;
};

// Fully-resolved experiment description. Every default is materialized here so
// the manifest is self-describing.
struct ExperimentConfig {
    // [experiment]
    std::string out_dir;
    std::uint64_t seed = 0;
    // [skeleton]
    std::string skeleton_preset = "humanoid8";
    // [data]
    int train_count = 5000;
    int test_count = 500;
    double noise_std_2d = 0.03;
    double camera_focal = 2.2;
    double camera_distance_mm = 4000.0;
    double max_angle_deg = 55.0;
    int action_count = 4;
    std::uint64_t lift_seed = 7777;
    std::uint64_t context_seed = 99;
    double quant_step = 0.1;
    double depth_scale_mm = 600.0;
    bool depth_cue = true;
    // [model]
    int levels = 4;
    int dim = 32;
    int heads = 2;
    int p2c_blocks = 2;
    int j2j_blocks = 2;
    int ffn_mult = 2;
    std::string channel_tokens = "flattened";
    std::uint64_t init_seed = 1;
    // [schedule]
    std::string schedule_kind = "linear";
    int total_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    // [train]
    int batch_size = 128;
    int epochs = 30;
    double lr_start = 6e-4;
    double lr_decay = 0.993;
    double flip_prob = 0.5;
    double scale_mm = 1000.0;
    double grad_clip = 0.0;
    std::string mask = "none";
    // [sample]
    int hypotheses = 20;
    int steps = 20;
    std::string variant = "ddim";
    // [aggregate]
    std::string strategy = "M";
    // [eval]
    bool per_action = true;
    // [study]
    std::string study_kind = "hcount";
    std::vector<int> h_values = {1, 5, 10, 20, 40};
    std::vector<double> recalls = {1.0, 0.9, 0.8, 0.7, 0.5};

    static ExperimentConfig from_ini(const IniFile& ini);
    static ExperimentConfig from_file(const std::string& path);

    void validate() const;            // throws ConfigError
    std::string to_json() const;      // resolved config, stable key order
    std::string content_hash() const; // fnv1a-64 of the resolved config
};

std::uint64_t fnv1a64(const std::string& text);

}  // namespace liftkit
