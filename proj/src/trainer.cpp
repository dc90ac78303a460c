#include "isd/trainer.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "isd/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint and volume formats assume a little-endian host");

namespace isd {

SlicePairSample sample_training_tuple(const Volume& vol, const std::vector<int>& ratios,
                                      Rng& rng) {
    if (ratios.empty()) throw ConfigError("training: ratio set is empty");
    int max_r = 0;
    for (int r : ratios) {
        if (r < 2) throw ConfigError("training: ratios must be >= 2");
        max_r = std::max(max_r, r);
    }
    if (vol.depth < max_r + 1)
        throw DataError("training: volume has " + std::to_string(vol.depth) +
                        " slices, need at least " + std::to_string(max_r + 1));

    int ratio = ratios[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(ratios.size()) - 1))];
    int base = rng.uniform_int(0, vol.depth - 1 - ratio);
    int inner = rng.uniform_int(1, ratio - 1);

    SlicePairSample s;
    s.lower = vol.slice(base);
    s.upper = vol.slice(base + ratio);
    s.target = vol.slice(base + inner);
    s.k = static_cast<double>(inner) / ratio;
    return s;
}

TrainState::TrainState(const RunConfig& c)
    : cfg(c), model(to_model_config(c), c.seed) {
    const auto& store = model.params();
    adam_m.reserve(static_cast<size_t>(store.count()));
    adam_v.reserve(static_cast<size_t>(store.count()));
    for (int i = 0; i < store.count(); ++i) {
        adam_m.emplace_back(store.value(i).shape, 0.0);
        adam_v.emplace_back(store.value(i).shape, 0.0);
    }
}

double loss_simple(const SlicePairSample& batch, TrainState& state, const NoiseSchedule& sched,
                   Rng& rng, const PredictorOverride* forced_pred) {
    nn::check_same_shape(batch.lower, batch.upper, "loss: slice pair");
    nn::check_same_shape(batch.lower, batch.target, "loss: target");
    if (!(batch.k > 0.0 && batch.k < 1.0))
        throw DimError("loss: offset must be strictly interior");

    int t = rng.uniform_int(1, sched.steps);
    Tensor eps = rng.normal_tensor(batch.target.shape);
    Tensor x_t = q_sample(batch.target, t, eps, sched);

    double loss;
    if (forced_pred) {
        Tensor pred = (*forced_pred)(x_t, t);
        nn::check_same_shape(pred, eps, "loss: forced prediction");
        double s = 0.0;
        for (long long i = 0; i < pred.size(); ++i) {
            double d = pred[i] - eps[i];
            s += d * d;
        }
        loss = s / static_cast<double>(pred.size());
    } else {
        state.model.params().zero_grads();
        Tape tape(&state.model.params());
        Var pred = state.model.build_train_prediction(tape, x_t, t, batch.lower, batch.upper,
                                                      batch.k);
        Var mse = tape.mse(pred, as_chw(eps));
        tape.backward(mse);
        loss = tape.val(mse)[0];
    }
    if (!std::isfinite(loss)) throw NumericalError("loss is not finite");
    return loss;
}

void clip_grad_norm(const nn::ParamStore& store, double max_norm) {
    if (max_norm <= 0.0) return;
    double norm = store.grad_norm();
    if (norm > max_norm) {
        double f = max_norm / norm;
        for (int i = 0; i < store.count(); ++i)
            for (double& g : store.grad(i).data) g *= f;
    }
}

void adam_update(Tensor& param, Tensor& m, Tensor& v, const Tensor& grad, long long t,
                 double lr, const AdamConfig& adam) {
    nn::check_same_shape(param, grad, "adam");
    double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(t));
    for (long long i = 0; i < param.size(); ++i) {
        double g = grad[i];
        m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * g;
        v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * g * g;
        param[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + adam.eps);
    }
}

void adam_step(TrainState& state, double lr, const AdamConfig& adam) {
    auto& store = state.model.params();
    state.step += 1;
    for (int i = 0; i < store.count(); ++i)
        adam_update(store.value(i), state.adam_m[static_cast<size_t>(i)],
                    state.adam_v[static_cast<size_t>(i)], store.grad(i), state.step, lr, adam);
}

void train_steps(TrainState& state, const std::vector<Volume>& dataset, long long until_step,
                 const NoiseSchedule& sched, const TrainHooks& hooks) {
    if (dataset.empty()) throw DataError("train: dataset is empty");
    int mult = state.model.config().stride_multiple();
    for (const Volume& v : dataset) {
        if (v.range != Volume::Range::Normalized)
            throw DataError("train: expected normalized volumes");
        if (v.height % mult || v.width % mult)
            throw DataError("train: slice size must be divisible by " + std::to_string(mult));
    }
    if (sched.steps != state.cfg.diffusion_steps)
        throw ConfigError("train: schedule length differs from the configured T");

    std::ofstream log;
    if (!hooks.log_path.empty()) {
        log.open(hooks.log_path, std::ios::app);
        if (!log) throw IoError("cannot open training log: " + hooks.log_path);
    }
    auto start = std::chrono::steady_clock::now();

    while (state.step < until_step) {
        long long s = state.step + 1;
        Rng rng(nn::derive_seed(state.cfg.seed, static_cast<uint64_t>(s)));
        const Volume& vol =
            dataset[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(dataset.size()) - 1))];
        SlicePairSample batch = sample_training_tuple(vol, state.cfg.ratios, rng);

        double loss;
        try {
            loss = loss_simple(batch, state, sched, rng);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " (step " + std::to_string(s) + ")");
        }

        clip_grad_norm(state.model.params(), state.cfg.clip_norm);
        adam_step(state, state.cfg.lr);

        if (hooks.on_step) hooks.on_step(s, loss);
        if (log && state.cfg.log_interval > 0 && s % state.cfg.log_interval == 0) {
            auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - start)
                          .count();
            char line[96];
            std::snprintf(line, sizeof(line), "%lld,%.8f,%g,%lld\n", s, loss, state.cfg.lr,
                          static_cast<long long>(ms));
            log << line;
            log.flush();
        }
        if (!hooks.ckpt_path.empty() && state.cfg.ckpt_interval > 0 &&
            s % state.cfg.ckpt_interval == 0 && s < until_step)
            save_checkpoint(state, hooks.ckpt_path);
    }
    if (!hooks.ckpt_path.empty()) save_checkpoint(state, hooks.ckpt_path);
}

TrainState train_loop(const RunConfig& cfg, const std::vector<Volume>& dataset,
                      const TrainHooks& hooks) {
    TrainState state(cfg);
    NoiseSchedule sched = make_linear_schedule(cfg.diffusion_steps, cfg.beta_start, cfg.beta_end);
    train_steps(state, dataset, cfg.iters, sched, hooks);
    return state;
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[] = "ISDCKPT1\n";
constexpr size_t kMagicLen = sizeof(kMagic) - 1;

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t get_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (!is) throw IoError("checkpoint: unexpected end of file");
    return v;
}
uint64_t get_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    if (!is) throw IoError("checkpoint: unexpected end of file");
    return v;
}

void put_array(std::ostream& os, const std::string& name, const Tensor& t) {
    put_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<uint32_t>(t.rank()));
    for (int d : t.shape) put_u32(os, static_cast<uint32_t>(d));
    put_u64(os, static_cast<uint64_t>(t.size()));
    os.write(reinterpret_cast<const char*>(t.ptr()),
             static_cast<std::streamsize>(t.size() * 8));
}

std::pair<std::string, Tensor> get_array(std::istream& is) {
    uint32_t name_len = get_u32(is);
    if (name_len > 4096) throw IoError("checkpoint: implausible name length");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw IoError("checkpoint: unexpected end of file");
    uint32_t rank = get_u32(is);
    if (rank > 8) throw IoError("checkpoint: implausible rank");
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(get_u32(is));
    uint64_t count = get_u64(is);
    Tensor t(shape);
    if (static_cast<uint64_t>(t.size()) != count)
        throw IoError("checkpoint: array size does not match its shape");
    is.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(count * 8));
    if (!is) throw IoError("checkpoint: unexpected end of file");
    return {std::move(name), std::move(t)};
}

} // namespace

void save_checkpoint(const TrainState& state, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, static_cast<std::streamsize>(kMagicLen));

    // invocation paths are not model state and would make otherwise
    // identical runs produce different bytes
    RunConfig snapshot = state.cfg;
    snapshot.data_dir.clear();
    snapshot.out_path.clear();
    std::string cfg_text = canonical_config(snapshot);
    put_u32(os, static_cast<uint32_t>(cfg_text.size()));
    os.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
    put_u64(os, model_config_hash(state.cfg));
    put_u64(os, static_cast<uint64_t>(state.step));

    const auto& store = state.model.params();
    put_u32(os, static_cast<uint32_t>(store.count()));
    for (int i = 0; i < store.count(); ++i) put_array(os, store.name(i), store.value(i));
    for (int i = 0; i < store.count(); ++i)
        put_array(os, "adam.m." + store.name(i), state.adam_m[static_cast<size_t>(i)]);
    for (int i = 0; i < store.count(); ++i)
        put_array(os, "adam.v." + store.name(i), state.adam_v[static_cast<size_t>(i)]);
    if (!os) throw IoError("checkpoint write failed: " + path);
}

TrainState load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);

    char magic[kMagicLen];
    is.read(magic, static_cast<std::streamsize>(kMagicLen));
    if (!is || std::memcmp(magic, kMagic, kMagicLen) != 0)
        throw IoError("not an ISDCKPT1 checkpoint: " + path);

    uint32_t cfg_len = get_u32(is);
    if (cfg_len > 1 << 20) throw IoError("checkpoint: implausible config length");
    std::string cfg_text(cfg_len, '\0');
    is.read(cfg_text.data(), cfg_len);
    if (!is) throw IoError("checkpoint: unexpected end of file");

    RunConfig cfg = parse_config_text(cfg_text);
    uint64_t stored_hash = get_u64(is);
    if (stored_hash != model_config_hash(cfg))
        throw ConfigError("checkpoint: stored model hash does not match its own config");
    uint64_t step = get_u64(is);

    TrainState state(cfg);
    state.step = static_cast<long long>(step);
    auto& store = state.model.params();

    uint32_t n = get_u32(is);
    if (n != static_cast<uint32_t>(store.count()))
        throw ConfigError("checkpoint: parameter count mismatch (incompatible model)");

    auto read_into = [&](Tensor& dst, const std::string& expect_name) {
        auto [name, t] = get_array(is);
        if (name != expect_name)
            throw ConfigError("checkpoint: expected array '" + expect_name + "', found '" + name +
                              "'");
        if (!t.same_shape(dst))
            throw ConfigError("checkpoint: shape mismatch for '" + name + "'");
        dst = std::move(t);
    };

    for (int i = 0; i < store.count(); ++i) read_into(store.value(i), store.name(i));
    for (int i = 0; i < store.count(); ++i)
        read_into(state.adam_m[static_cast<size_t>(i)], "adam.m." + store.name(i));
    for (int i = 0; i < store.count(); ++i)
        read_into(state.adam_v[static_cast<size_t>(i)], "adam.v." + store.name(i));
    return state;
}

TrainState load_checkpoint(const std::string& path, uint64_t expected_model_hash) {
    TrainState state = load_checkpoint(path);
    if (model_config_hash(state.cfg) != expected_model_hash)
        throw ConfigError("checkpoint model configuration is incompatible with this run");
    return state;
}

} // namespace isd
