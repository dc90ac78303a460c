#pragma once

#include <functional>

#include "isd/data.hpp"
#include "isd/denoiser.hpp"
#include "isd/schedule.hpp"

namespace isd {

enum class SamplerMode { Ddpm, Ddim };

struct SamplerConfig {
    SamplerMode mode = SamplerMode::Ddim;
    int steps = 100; // DDIM subsequence length; DDPM always walks the full T
    uint64_t seed = 0;
    int jobs = 1; // parallel slice generation
};

using EpsPredictor = std::function<Tensor(const Tensor& x_t, int t)>;

// Full reverse chain from a given terminal state. Exposed so tests can
// inject an oracle predictor; rng is consumed by DDPM only.
Tensor run_reverse_chain(const Tensor& x_start, const EpsPredictor& predict,
                         const NoiseSchedule& sched, const SamplerConfig& cfg, Rng& rng);

// Draws x_T from the seed, prepares the conditioning once, runs the reverse
// chain, and clamps the result to [-1,1].
Tensor generate_inbetween_slice(const Tensor& lower, const Tensor& upper, double k,
                                const DiffusionModel& model, const NoiseSchedule& sched,
                                const SamplerConfig& cfg);

// Keeps every acquired slice at stride-R positions and fills the gaps with
// generated slices; per-slice seeds are derived from (seed, pair index,
// inner offset) so slices are reproducible independently and can run in
// parallel. Expects a normalized volume.
Volume super_resolve_volume(const Volume& lr, int ratio, const DiffusionModel& model,
                            const NoiseSchedule& sched, const SamplerConfig& cfg);

} // namespace isd
