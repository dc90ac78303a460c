#pragma once

#include <functional>
#include <string>
#include <vector>

#include "isd/config.hpp"
#include "isd/data.hpp"
#include "isd/denoiser.hpp"
#include "isd/schedule.hpp"

namespace isd {

struct SlicePairSample {
    Tensor lower, upper, target; // {H,W}, shared shape
    double k = 0.5;              // strictly interior offset
};

// Uniform ratio from `ratios`, a valid base index, and an interior offset
// j/R; draw order is ratio, base index, then inner offset.
SlicePairSample sample_training_tuple(const Volume& vol, const std::vector<int>& ratios,
                                      Rng& rng);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainState {
    RunConfig cfg;
    DiffusionModel model;
    std::vector<Tensor> adam_m, adam_v; // parallel to model.params() order
    long long step = 0;

    explicit TrainState(const RunConfig& c);
};

using PredictorOverride = std::function<Tensor(const Tensor& x_t, int t)>;

// Draws t uniform in {1..T} and a standard-normal noise field (in that
// order), noises the target in closed form, and returns the MSE between the
// joint-model prediction and the drawn noise. Parameter gradients are zeroed
// and refilled. `forced_pred` substitutes the prediction for oracle tests
// (value only, no gradients).
double loss_simple(const SlicePairSample& batch, TrainState& state, const NoiseSchedule& sched,
                   Rng& rng, const PredictorOverride* forced_pred = nullptr);

// Scales gradients so their global norm is at most max_norm; no-op for
// max_norm <= 0.
void clip_grad_norm(const nn::ParamStore& store, double max_norm);

// Bias-corrected Adam over a single tensor; `t` is the 1-based update count.
void adam_update(Tensor& param, Tensor& m, Tensor& v, const Tensor& grad, long long t,
                 double lr, const AdamConfig& adam = {});

// Applies the store gradients to every parameter and advances the step
// counter.
void adam_step(TrainState& state, double lr, const AdamConfig& adam = {});

struct TrainHooks {
    std::function<void(long long step, double loss)> on_step;
    std::string log_path;  // append "step,loss,lr,elapsed_ms" every log_interval
    std::string ckpt_path; // checkpoint every ckpt_interval and at the end
};

// Per-step randomness is a fresh generator derived from (seed, step); the
// consumption order is: volume pick, ratio, base index, inner offset,
// timestep, noise field. Resuming from a checkpoint therefore replays the
// exact continuation of an uninterrupted run.
void train_steps(TrainState& state, const std::vector<Volume>& dataset, long long until_step,
                 const NoiseSchedule& sched, const TrainHooks& hooks = {});

TrainState train_loop(const RunConfig& cfg, const std::vector<Volume>& dataset,
                      const TrainHooks& hooks = {});

// Versioned binary checkpoint: magic, canonical config document, model
// config hash, step counter, then length-prefixed named float64 arrays
// (parameters, Adam first and second moments).
void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);
TrainState load_checkpoint(const std::string& path, uint64_t expected_model_hash);

} // namespace isd
