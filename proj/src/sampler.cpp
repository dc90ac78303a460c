#include "isd/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "isd/errors.hpp"

namespace isd {

Tensor run_reverse_chain(const Tensor& x_start, const EpsPredictor& predict,
                         const NoiseSchedule& sched, const SamplerConfig& cfg, Rng& rng) {
    Tensor x = x_start;
    if (cfg.mode == SamplerMode::Ddim) {
        std::vector<int> ts = make_ddim_timesteps(sched.steps, cfg.steps);
        for (int i = static_cast<int>(ts.size()) - 1; i >= 0; --i) {
            int t = ts[static_cast<size_t>(i)];
            int t_prev = i > 0 ? ts[static_cast<size_t>(i - 1)] : 0;
            x = ddim_step(x, t, t_prev, predict(x, t), sched);
        }
    } else {
        for (int t = sched.steps; t >= 1; --t) x = ddpm_step(x, t, predict(x, t), sched, rng);
    }
    return x;
}

Tensor generate_inbetween_slice(const Tensor& lower, const Tensor& upper, double k,
                                const DiffusionModel& model, const NoiseSchedule& sched,
                                const SamplerConfig& cfg) {
    if (!(k > 0.0 && k < 1.0))
        throw ConfigError("generate: offset must lie strictly inside (0,1)");
    if (sched.steps != model.config().diffusion_steps)
        throw ConfigError("generate: schedule length differs from the model's T");
    for (int i = 0; i < model.params().count(); ++i)
        if (!model.params().value(i).all_finite())
            throw NumericalError("generate: model parameters contain non-finite values");

    CondContext ctx = model.prepare_conditioning(lower, upper, k);
    EpsPredictor predict = [&](const Tensor& x_t, int t) { return model.predict(x_t, t, ctx); };

    Rng rng(cfg.seed);
    Tensor x = rng.normal_tensor(lower.shape);
    x = run_reverse_chain(x, predict, sched, cfg, rng);
    if (!x.all_finite()) throw NumericalError("generate: chain produced non-finite values");
    for (auto& v : x.data) v = std::clamp(v, -1.0, 1.0);
    return x;
}

Volume super_resolve_volume(const Volume& lr, int ratio, const DiffusionModel& model,
                            const NoiseSchedule& sched, const SamplerConfig& cfg) {
    if (ratio < 2) throw ConfigError("super-resolve: ratio must be >= 2");
    if (lr.depth < 2) throw DataError("super-resolve: need at least 2 slices");
    if (lr.range != Volume::Range::Normalized)
        throw DataError("super-resolve: expected a normalized volume");

    int d_hr = (lr.depth - 1) * ratio + 1;
    Volume hr(d_hr, lr.height, lr.width);
    hr.spacing = lr.spacing;
    hr.spacing[0] /= ratio;
    hr.range = Volume::Range::Normalized;
    hr.orig_min = lr.orig_min;
    hr.orig_max = lr.orig_max;

    long long hw = static_cast<long long>(lr.height) * lr.width;
    for (int m = 0; m < lr.depth; ++m)
        std::copy_n(lr.voxels.data() + static_cast<size_t>(m) * hw, hw,
                    hr.voxels.data() + static_cast<size_t>(m) * ratio * hw);

    struct Task {
        int pair, inner;
    };
    std::vector<Task> tasks;
    for (int m = 0; m + 1 < lr.depth; ++m)
        for (int j = 1; j < ratio; ++j) tasks.push_back({m, j});

    int jobs = std::max(1, cfg.jobs);
#pragma omp parallel for schedule(dynamic) num_threads(jobs) if (jobs > 1)
    for (size_t i = 0; i < tasks.size(); ++i) {
        const Task& task = tasks[i];
        SamplerConfig slice_cfg = cfg;
        slice_cfg.seed = cfg.seed ^ nn::splitmix64((static_cast<uint64_t>(task.pair) << 32) |
                                                   static_cast<uint64_t>(task.inner));
        Tensor lo = lr.slice(task.pair);
        Tensor up = lr.slice(task.pair + 1);
        double k = static_cast<double>(task.inner) / ratio;
        Tensor gen = generate_inbetween_slice(lo, up, k, model, sched, slice_cfg);
        hr.set_slice(task.pair * ratio + task.inner, gen);
    }
    return hr;
}

} // namespace isd
