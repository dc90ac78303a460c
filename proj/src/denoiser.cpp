#include "isd/denoiser.hpp"

#include <cmath>

#include "isd/errors.hpp"

namespace isd {

Tensor as_chw(const Tensor& slice) {
    if (slice.rank() == 2) return nn::reshaped(slice, {1, slice.dim(0), slice.dim(1)});
    if (slice.rank() == 3 && slice.dim(0) == 1) return slice;
    throw DimError("expected a single-channel slice, got " + slice.shape_str());
}

// ---------------------------------------------------------------------------
// MainNet
// ---------------------------------------------------------------------------

MainNet::MainNet(const ModelConfig& cfg, nn::ParamStore& store, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    t_mlp_ = EmbedMlp("main.temb", kEmbedDim, kEmbedDim, store, rng);
    int emb_dim = cfg.ablation_mode ? 2 * kEmbedDim : kEmbedDim;

    int c0 = cfg.width(0);
    stem_w_ = store.add("main.stem.w", init_conv_weight(c0, 1, 3, 3, rng));
    stem_b_ = store.add("main.stem.b", Tensor({c0}, 0.0));

    auto lateral_ch = [&](int level) { return cfg.ablation_mode ? 2 : cfg.width(level); };

    enc_.resize(static_cast<size_t>(cfg.levels));
    dec_.resize(static_cast<size_t>(cfg.levels));
    down_w_.assign(static_cast<size_t>(cfg.levels), -1);
    down_b_.assign(static_cast<size_t>(cfg.levels), -1);
    up_w_.assign(static_cast<size_t>(cfg.levels), -1);
    up_b_.assign(static_cast<size_t>(cfg.levels), -1);

    for (int l = 0; l < cfg.levels; ++l) {
        size_t ls = static_cast<size_t>(l);
        int c = cfg.width(l);
        enc_[ls] = ResBlock("main.enc" + std::to_string(l), c, c, emb_dim, lateral_ch(l),
                            cfg.groups, store, rng);
        if (l + 1 < cfg.levels) {
            int cn = cfg.width(l + 1);
            down_w_[ls] = store.add("main.down" + std::to_string(l) + ".w",
                                    init_conv_weight(cn, c, 3, 3, rng));
            down_b_[ls] = store.add("main.down" + std::to_string(l) + ".b", Tensor({cn}, 0.0));
        }
    }
    for (int l = cfg.levels - 1; l >= 0; --l) {
        size_t ls = static_cast<size_t>(l);
        int c = cfg.width(l);
        bool bottom = l == cfg.levels - 1;
        int in_ch = bottom ? c : 2 * c;
        dec_[ls] = ResBlock("main.dec" + std::to_string(l), in_ch, c, emb_dim, lateral_ch(l),
                            cfg.groups, store, rng);
        if (!bottom) {
            int cu = cfg.width(l + 1);
            up_w_[ls] = store.add("main.up" + std::to_string(l) + ".w",
                                  init_conv_weight(c, cu, 3, 3, rng));
            up_b_[ls] = store.add("main.up" + std::to_string(l) + ".b", Tensor({c}, 0.0));
        }
    }

    // zero-initialized head so the noise prediction starts at zero
    head_w_ = store.add("main.head.w", Tensor({1, c0, 3, 3}, 0.0));
    head_b_ = store.add("main.head.b", Tensor({1}, 0.0));
}

Var MainNet::build_timestep_embedding(Tape& t, int step) const {
    if (step < 1 || step > cfg_.diffusion_steps)
        throw DimError("timestep " + std::to_string(step) + " outside [1," +
                       std::to_string(cfg_.diffusion_steps) + "]");
    return t_mlp_.build(t, t.input(sinusoid_encoding(step, kEmbedDim)));
}

Var MainNet::build(Tape& t, Var x, Var emb, const std::vector<Var>& cond_levels) const {
    if (cond_levels.size() != static_cast<size_t>(cfg_.levels))
        throw DimError("main_net: conditioning level count mismatch");
    const Tensor& xv = t.val(x);
    if (xv.rank() != 3 || xv.dim(0) != 1) throw DimError("main_net: expected {1,H,W} input");
    int mult = cfg_.stride_multiple();
    if (xv.dim(1) % mult || xv.dim(2) % mult || xv.dim(1) < 8 || xv.dim(2) < 8)
        throw DimError("main_net: H,W must be >= 8 and divisible by " + std::to_string(mult));
    for (int l = 0; l < cfg_.levels; ++l) {
        const Tensor& c = t.val(cond_levels[static_cast<size_t>(l)]);
        if (c.dim(1) != xv.dim(1) >> l || c.dim(2) != xv.dim(2) >> l)
            throw DimError("main_net: conditioning level " + std::to_string(l) +
                           " has wrong spatial size");
    }

    std::vector<Var> enc_out(static_cast<size_t>(cfg_.levels));
    Var h = t.conv2d(x, t.param(stem_w_), t.param(stem_b_), 1, 1);
    for (int l = 0; l < cfg_.levels; ++l) {
        size_t ls = static_cast<size_t>(l);
        h = enc_[ls].build(t, h, emb, cond_levels[ls]);
        enc_out[ls] = h;
        if (l + 1 < cfg_.levels)
            h = t.conv2d(h, t.param(down_w_[ls]), t.param(down_b_[ls]), 2, 1);
    }

    Var d;
    for (int l = cfg_.levels - 1; l >= 0; --l) {
        size_t ls = static_cast<size_t>(l);
        if (l == cfg_.levels - 1) {
            d = dec_[ls].build(t, enc_out[ls], emb, cond_levels[ls]);
        } else {
            Var up = t.conv2d(t.upsample_nearest2x(d), t.param(up_w_[ls]), t.param(up_b_[ls]), 1,
                              1);
            d = dec_[ls].build(t, t.concat0(up, enc_out[ls]), emb, cond_levels[ls]);
        }
    }

    Var out = t.group_norm(d, cfg_.groups);
    return t.conv2d(t.silu(out), t.param(head_w_), t.param(head_b_), 1, 1);
}

// ---------------------------------------------------------------------------
// DiffusionModel
// ---------------------------------------------------------------------------

DiffusionModel::DiffusionModel(ModelConfig cfg, uint64_t init_seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(nn::derive_seed(init_seed, 0x494e4954)); // "INIT"
    if (cfg_.ablation_mode) {
        k_mlp_ = EmbedMlp("main.kemb", 1, kEmbedDim, store_, rng);
    } else {
        cond_ = CondNet(cfg_, store_, rng);
    }
    main_ = MainNet(cfg_, store_, rng);
}

void DiffusionModel::check_offset(double k) const {
    if (!(k >= 0.0 && k <= 1.0))
        throw DimError("offset k must lie in [0,1], got " + std::to_string(k));
}

void DiffusionModel::check_slice_pair(const Tensor& lower, const Tensor& upper) const {
    nn::check_same_shape(lower, upper, "slice pair");
}

Tensor DiffusionModel::offset_embedding(double k) const {
    check_offset(k);
    Tape t(&store_);
    Var leaf = t.input(Tensor({1}, std::vector<double>{k}));
    Var emb = cfg_.ablation_mode ? k_mlp_.build(t, leaf) : cond_.build_offset_embedding(t, leaf);
    return t.val(emb);
}

Tensor DiffusionModel::timestep_embedding(int t_step) const {
    Tape t(&store_);
    return t.val(main_.build_timestep_embedding(t, t_step));
}

FeaturePyramid DiffusionModel::condition_pyramid(const Tensor& lower, const Tensor& upper,
                                                 double k) const {
    if (cfg_.ablation_mode)
        throw ConfigError("condition pyramid is unavailable in ablation mode");
    Tape t(&store_);
    auto vars = build_pyramid(t, lower, upper, k);
    FeaturePyramid p;
    for (Var v : vars) p.levels.push_back(t.val(v));
    return p;
}

std::vector<Var> DiffusionModel::build_pyramid(Tape& tape, const Tensor& lower,
                                               const Tensor& upper, double k,
                                               Var* k_leaf) const {
    if (cfg_.ablation_mode)
        throw ConfigError("condition pyramid is unavailable in ablation mode");
    check_offset(k);
    check_slice_pair(lower, upper);
    Var pair = tape.concat0(tape.input(as_chw(lower)), tape.input(as_chw(upper)));
    Var leaf = tape.input(Tensor({1}, std::vector<double>{k}), k_leaf != nullptr);
    if (k_leaf) *k_leaf = leaf;
    Var emb = cond_.build_offset_embedding(tape, leaf);
    return cond_.build(tape, pair, emb);
}

std::vector<Var> DiffusionModel::build_pooled_cond(Tape& tape, Var pair) const {
    std::vector<Var> levels(static_cast<size_t>(cfg_.levels));
    Var cur = pair;
    levels[0] = cur;
    for (int l = 1; l < cfg_.levels; ++l) {
        cur = tape.avg_pool2x(cur);
        levels[static_cast<size_t>(l)] = cur;
    }
    return levels;
}

Var DiffusionModel::build_embedding_for_blocks(Tape& tape, int t, Var k_emb) const {
    Var temb = main_.build_timestep_embedding(tape, t);
    if (!cfg_.ablation_mode) return temb;
    return tape.concat0(k_emb, temb);
}

CondContext DiffusionModel::prepare_conditioning(const Tensor& lower, const Tensor& upper,
                                                 double k) const {
    check_offset(k);
    check_slice_pair(lower, upper);
    CondContext ctx;
    ctx.ablated = cfg_.ablation_mode;
    if (cfg_.ablation_mode) {
        Tape t(&store_);
        Var pair = t.concat0(t.input(as_chw(lower)), t.input(as_chw(upper)));
        for (Var v : build_pooled_cond(t, pair)) ctx.cond_levels.push_back(t.val(v));
        ctx.k_emb = offset_embedding(k);
    } else {
        FeaturePyramid p = condition_pyramid(lower, upper, k);
        ctx.cond_levels = std::move(p.levels);
    }
    return ctx;
}

Tensor DiffusionModel::predict(const Tensor& x_t, int t_step, const CondContext& ctx) const {
    if (ctx.ablated != cfg_.ablation_mode)
        throw ConfigError("conditioning context does not match the model mode");
    Tape t(&store_);
    std::vector<Var> cond;
    for (const Tensor& c : ctx.cond_levels) cond.push_back(t.input(c));
    Var emb;
    if (cfg_.ablation_mode)
        emb = t.concat0(t.input(ctx.k_emb), main_.build_timestep_embedding(t, t_step));
    else
        emb = main_.build_timestep_embedding(t, t_step);
    Var out = main_.build(t, t.input(as_chw(x_t)), emb, cond);
    Tensor res = t.val(out);
    return x_t.rank() == 2 ? nn::reshaped(res, {res.dim(1), res.dim(2)}) : res;
}

Tensor DiffusionModel::predict_noise(const Tensor& x_t, int t_step,
                                     const FeaturePyramid& pyramid) const {
    if (cfg_.ablation_mode)
        throw ConfigError("full-model prediction is unavailable in ablation mode");
    CondContext ctx;
    ctx.ablated = false;
    ctx.cond_levels = pyramid.levels;
    return predict(x_t, t_step, ctx);
}

Tensor DiffusionModel::predict_noise_ablated(const Tensor& x_t, int t_step, const Tensor& lower,
                                             const Tensor& upper, double k) const {
    if (!cfg_.ablation_mode)
        throw ConfigError("ablated prediction requires ablation_mode");
    return predict(x_t, t_step, prepare_conditioning(lower, upper, k));
}

Var DiffusionModel::build_train_prediction(Tape& tape, const Tensor& x_t, int t,
                                           const Tensor& lower, const Tensor& upper, double k,
                                           Var* k_leaf) const {
    check_offset(k);
    check_slice_pair(lower, upper);

    std::vector<Var> cond;
    Var k_emb;
    if (cfg_.ablation_mode) {
        Var pair = tape.concat0(tape.input(as_chw(lower)), tape.input(as_chw(upper)));
        Var leaf = tape.input(Tensor({1}, std::vector<double>{k}), k_leaf != nullptr);
        if (k_leaf) *k_leaf = leaf;
        k_emb = k_mlp_.build(tape, leaf);
        cond = build_pooled_cond(tape, pair);
    } else {
        cond = build_pyramid(tape, lower, upper, k, k_leaf);
    }
    Var emb = build_embedding_for_blocks(tape, t, k_emb);
    return main_.build(tape, tape.input(as_chw(x_t)), emb, cond);
}

} // namespace isd
