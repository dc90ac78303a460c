#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isd/conditioning.hpp"

namespace isd {

// Flat run configuration. Serialized as a "key = value" document with '#'
// comments; unknown keys are rejected. Every run logs the fully resolved
// form.
struct RunConfig {
    uint64_t seed = 0;

    // schedule
    int diffusion_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    // network
    int levels = 4;
    int base_channels = 16;
    std::vector<int> channel_mult = {1, 2, 4, 8};
    int groups = 8;
    bool ablate = false;
    std::string pyramid_taps = "decoder"; // decoder | encoder

    // trainer
    long long iters = 10000;
    double lr = 1e-4;
    std::vector<int> ratios = {2, 3, 4};
    double clip_norm = 1.0;
    long long log_interval = 100;
    long long ckpt_interval = 1000;

    // sampler
    std::string sampler = "ddim"; // ddim | ddpm
    int ddim_steps = 100;
    int jobs = 1;

    // data generation
    int vol_count = 20;
    int vol_depth = 33;
    int vol_height = 64;
    int vol_width = 64;

    // paths
    std::string data_dir;
    std::string out_path;
};

// Applies one key; throws ConfigError on unknown keys or malformed values.
void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

RunConfig parse_config_text(const std::string& text, RunConfig base = {});
RunConfig parse_config_file(const std::string& path, RunConfig base = {});

// Deterministic "key = value" document covering every key.
std::string canonical_config(const RunConfig& cfg);

uint64_t fnv1a64(const std::string& s);
uint64_t config_hash(const RunConfig& cfg);

// Hash over the keys that determine parameter layout and diffusion length;
// checkpoints refuse to load across differing model hashes.
uint64_t model_config_hash(const RunConfig& cfg);

ModelConfig to_model_config(const RunConfig& cfg);

} // namespace isd
