#pragma once

#include <vector>

#include "isd/nn/rng.hpp"
#include "isd/nn/tensor.hpp"

namespace isd {

using nn::Rng;
using nn::Tensor;

// Variance schedule for the diffusion chain. Timesteps are 1-based; index 0
// is a sentinel meaning clean data (beta 0, alpha_bar 1). Immutable after
// construction and shareable across threads.
struct NoiseSchedule {
    int steps = 0;                  // T
    std::vector<double> betas;      // [0..T], betas[0] = 0
    std::vector<double> alpha_bars; // [0..T], alpha_bars[0] = 1
    std::vector<double> sigma_sqs;  // [0..T], sigma_sqs[t] = betas[t]

    double beta(int t) const;
    double alpha_bar(int t) const; // t = 0 allowed
    double sigma_sq(int t) const;
    void check_t(int t) const; // 1 <= t <= T
};

// Linear beta ramp from beta_start to beta_end inclusive, with alpha_bar and
// sigma^2 precomputed.
NoiseSchedule make_linear_schedule(int steps, double beta_start, double beta_end);

// Closed-form noising: sqrt(a_bar_t) x0 + sqrt(1 - a_bar_t) eps.
Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched);

// Single forward transition: sqrt(1 - beta_t) x_{t-1} + sqrt(beta_t) z.
Tensor forward_step(const Tensor& x_prev, int t, const NoiseSchedule& sched, Rng& rng);

// Learned reverse mean given the predicted noise.
Tensor posterior_mean(const Tensor& x_t, int t, const Tensor& eps_pred,
                      const NoiseSchedule& sched);

// Ancestral reverse step; the final step (t = 1) adds no noise.
Tensor ddpm_step(const Tensor& x_t, int t, const Tensor& eps_pred, const NoiseSchedule& sched,
                 Rng& rng);

// Evenly strided ascending subsequence of {1..T} of length `count`, anchored
// so the last element is T.
std::vector<int> make_ddim_timesteps(int steps, int count);

// Deterministic (eta = 0) reverse jump t -> t_prev; t_prev = 0 yields the
// final x0 estimate.
Tensor ddim_step(const Tensor& x_t, int t, int t_prev, const Tensor& eps_pred,
                 const NoiseSchedule& sched);

} // namespace isd
