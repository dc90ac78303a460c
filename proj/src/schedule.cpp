#include "isd/schedule.hpp"

#include <cmath>

#include "isd/errors.hpp"

namespace isd {

void NoiseSchedule::check_t(int t) const {
    if (t < 1 || t > steps)
        throw DimError("timestep " + std::to_string(t) + " outside [1," + std::to_string(steps) +
                       "]");
}

double NoiseSchedule::beta(int t) const {
    check_t(t);
    return betas[static_cast<size_t>(t)];
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t == 0) return 1.0;
    check_t(t);
    return alpha_bars[static_cast<size_t>(t)];
}

double NoiseSchedule::sigma_sq(int t) const {
    check_t(t);
    return sigma_sqs[static_cast<size_t>(t)];
}

NoiseSchedule make_linear_schedule(int steps, double beta_start, double beta_end) {
    if (steps < 1) throw ConfigError("schedule: steps must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw ConfigError("schedule: need 0 < beta_start <= beta_end < 1");

    NoiseSchedule s;
    s.steps = steps;
    s.betas.assign(static_cast<size_t>(steps) + 1, 0.0);
    s.alpha_bars.assign(static_cast<size_t>(steps) + 1, 1.0);
    s.sigma_sqs.assign(static_cast<size_t>(steps) + 1, 0.0);

    double prod = 1.0;
    for (int t = 1; t <= steps; ++t) {
        double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / (steps - 1);
        double b = beta_start + (beta_end - beta_start) * frac;
        s.betas[static_cast<size_t>(t)] = b;
        prod *= 1.0 - b;
        s.alpha_bars[static_cast<size_t>(t)] = prod;
        s.sigma_sqs[static_cast<size_t>(t)] = b;
    }
    return s;
}

Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched) {
    sched.check_t(t);
    nn::check_same_shape(x0, eps, "q_sample");
    double ab = sched.alpha_bar(t);
    double ca = std::sqrt(ab), cb = std::sqrt(1.0 - ab);
    Tensor out(x0.shape);
    for (long long i = 0; i < x0.size(); ++i) out[i] = ca * x0[i] + cb * eps[i];
    return out;
}

Tensor forward_step(const Tensor& x_prev, int t, const NoiseSchedule& sched, Rng& rng) {
    sched.check_t(t);
    double b = sched.beta(t);
    double ca = std::sqrt(1.0 - b), cb = std::sqrt(b);
    Tensor out(x_prev.shape);
    for (long long i = 0; i < x_prev.size(); ++i) out[i] = ca * x_prev[i] + cb * rng.normal();
    return out;
}

Tensor posterior_mean(const Tensor& x_t, int t, const Tensor& eps_pred,
                      const NoiseSchedule& sched) {
    sched.check_t(t);
    nn::check_same_shape(x_t, eps_pred, "posterior_mean");
    double b = sched.beta(t);
    double inv = 1.0 / std::sqrt(1.0 - b);
    double w = b / std::sqrt(1.0 - sched.alpha_bar(t));
    Tensor out(x_t.shape);
    for (long long i = 0; i < x_t.size(); ++i) out[i] = inv * (x_t[i] - w * eps_pred[i]);
    return out;
}

Tensor ddpm_step(const Tensor& x_t, int t, const Tensor& eps_pred, const NoiseSchedule& sched,
                 Rng& rng) {
    Tensor mean = posterior_mean(x_t, t, eps_pred, sched);
    if (t == 1) return mean;
    double sigma = std::sqrt(sched.sigma_sq(t));
    for (long long i = 0; i < mean.size(); ++i) mean[i] += sigma * rng.normal();
    return mean;
}

std::vector<int> make_ddim_timesteps(int steps, int count) {
    if (count < 1) throw ConfigError("ddim: step count must be >= 1");
    if (count > steps) throw ConfigError("ddim: step count exceeds schedule length");
    int stride = steps / count;
    std::vector<int> ts(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) ts[static_cast<size_t>(i)] = steps - (count - 1 - i) * stride;
    return ts;
}

Tensor ddim_step(const Tensor& x_t, int t, int t_prev, const Tensor& eps_pred,
                 const NoiseSchedule& sched) {
    sched.check_t(t);
    if (t_prev >= t || t_prev < 0)
        throw DimError("ddim_step: need 0 <= t_prev < t, got t_prev=" + std::to_string(t_prev) +
                       " t=" + std::to_string(t));
    nn::check_same_shape(x_t, eps_pred, "ddim_step");

    double ab_t = sched.alpha_bar(t);
    double ab_p = sched.alpha_bar(t_prev);
    double inv = 1.0 / std::sqrt(ab_t);
    double cn = std::sqrt(1.0 - ab_t);
    double ca = std::sqrt(ab_p), cb = std::sqrt(1.0 - ab_p);

    Tensor out(x_t.shape);
    for (long long i = 0; i < x_t.size(); ++i) {
        double x0_hat = (x_t[i] - cn * eps_pred[i]) * inv;
        out[i] = ca * x0_hat + cb * eps_pred[i];
    }
    return out;
}

} // namespace isd
