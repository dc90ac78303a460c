#include "isd/conditioning.hpp"

#include <cmath>

#include "isd/errors.hpp"

namespace isd {

void ModelConfig::validate() const {
    if (levels < 2) throw ConfigError("model: levels must be >= 2");
    if (channel_mult.size() != static_cast<size_t>(levels))
        throw ConfigError("model: channel_mult length must equal levels");
    if (base_channels < 1) throw ConfigError("model: base_channels must be >= 1");
    for (int m : channel_mult)
        if (m < 1) throw ConfigError("model: channel multipliers must be >= 1");
    if (groups < 1) throw ConfigError("model: groups must be >= 1");
    if (diffusion_steps < 1) throw ConfigError("model: diffusion_steps must be >= 1");
}

// ---------------------------------------------------------------------------
// initializers
// ---------------------------------------------------------------------------

Tensor init_conv_weight(int out_ch, int in_ch, int kh, int kw, Rng& rng) {
    Tensor w({out_ch, in_ch, kh, kw});
    double std = std::sqrt(2.0 / (static_cast<double>(in_ch) * kh * kw));
    for (auto& v : w.data) v = std * rng.normal();
    return w;
}

Tensor init_linear_weight(int out_dim, int in_dim, Rng& rng) {
    Tensor w({out_dim, in_dim});
    double std = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (auto& v : w.data) v = std * rng.normal();
    return w;
}

Tensor init_mod_bias(int channels) {
    Tensor b({2 * channels});
    for (int c = 0; c < channels; ++c) b[c] = 1.0;
    return b;
}

// ---------------------------------------------------------------------------
// value-level ops
// ---------------------------------------------------------------------------

Tensor group_norm(const Tensor& h, int groups, double eps) {
    Tape t;
    return t.val(t.group_norm(t.input(h), groups, eps));
}

Tensor channel_mod(const Tensor& h, const Tensor& emb, const AffineParams& affine, int groups) {
    if (h.rank() != 3) throw DimError("channel_mod: expected {C,H,W}");
    int c = h.dim(0);
    if (affine.w.rank() != 2 || affine.w.dim(0) != 2 * c || affine.w.dim(1) != emb.dim(0) ||
        affine.b.dim(0) != 2 * c)
        throw DimError("channel_mod: affine must map emb -> 2C");
    Tape t;
    Var sb = t.linear(t.input(emb), t.input(affine.w), t.input(affine.b));
    Var out = t.modulate(t.group_norm(t.input(h), groups), t.slice0(sb, 0, c),
                         t.slice0(sb, c, 2 * c));
    return t.val(out);
}

Tensor element_mod(const Tensor& h, const Tensor& cond, const ConvParams& proj, int groups) {
    if (h.rank() != 3 || cond.rank() != 3) throw DimError("element_mod: expected {C,H,W}");
    if (h.dim(1) != cond.dim(1) || h.dim(2) != cond.dim(2))
        throw DimError("element_mod: conditioning level does not match feature map size");
    int c = h.dim(0);
    if (proj.w.rank() != 4 || proj.w.dim(0) != 2 * c || proj.w.dim(1) != cond.dim(0))
        throw DimError("element_mod: projection must map cond channels -> 2C");
    Tape t;
    int pad = (proj.w.dim(2) - 1) / 2;
    Var sb = t.conv2d(t.input(cond), t.input(proj.w), t.input(proj.b), 1, pad);
    Var out = t.modulate(t.group_norm(t.input(h), groups), t.slice0(sb, 0, c),
                         t.slice0(sb, c, 2 * c));
    return t.val(out);
}

// ---------------------------------------------------------------------------
// blocks
// ---------------------------------------------------------------------------

ResBlock::ResBlock(const std::string& prefix, int in_ch, int out_ch, int emb_dim, int lateral_ch,
                   int groups, nn::ParamStore& store, Rng& rng)
    : in_(in_ch), out_(out_ch), groups_(groups) {
    affine_w_ = store.add(prefix + ".affine.w", init_linear_weight(2 * in_ch, emb_dim, rng));
    affine_b_ = store.add(prefix + ".affine.b", init_mod_bias(in_ch));
    conv1_w_ = store.add(prefix + ".conv1.w", init_conv_weight(out_ch, in_ch, 3, 3, rng));
    conv1_b_ = store.add(prefix + ".conv1.b", Tensor({out_ch}, 0.0));
    if (lateral_ch > 0) {
        lat_w_ = store.add(prefix + ".lat.w",
                           init_conv_weight(2 * out_ch, lateral_ch, 1, 1, rng));
        lat_b_ = store.add(prefix + ".lat.b", init_mod_bias(out_ch));
    }
    conv2_w_ = store.add(prefix + ".conv2.w", init_conv_weight(out_ch, out_ch, 3, 3, rng));
    conv2_b_ = store.add(prefix + ".conv2.b", Tensor({out_ch}, 0.0));
    if (in_ch != out_ch) {
        skip_w_ = store.add(prefix + ".skip.w", init_conv_weight(out_ch, in_ch, 1, 1, rng));
        skip_b_ = store.add(prefix + ".skip.b", Tensor({out_ch}, 0.0));
    }
}

Var ResBlock::build(Tape& t, Var x, Var emb, Var lateral) const {
    if (has_lateral() != lateral.valid())
        throw DimError("res_block: lateral input does not match block wiring");

    Var sb = t.linear(emb, t.param(affine_w_), t.param(affine_b_));
    Var h = t.modulate(t.group_norm(x, groups_), t.slice0(sb, 0, in_), t.slice0(sb, in_, 2 * in_));
    h = t.conv2d(t.silu(h), t.param(conv1_w_), t.param(conv1_b_), 1, 1);

    if (has_lateral()) {
        Var xsb = t.conv2d(lateral, t.param(lat_w_), t.param(lat_b_), 1, 0);
        h = t.modulate(t.group_norm(h, groups_), t.slice0(xsb, 0, out_),
                       t.slice0(xsb, out_, 2 * out_));
    } else {
        h = t.group_norm(h, groups_);
    }
    h = t.conv2d(t.silu(h), t.param(conv2_w_), t.param(conv2_b_), 1, 1);

    Var skip = x;
    if (skip_w_ >= 0) skip = t.conv2d(x, t.param(skip_w_), t.param(skip_b_), 1, 0);
    return t.add(h, skip);
}

EmbedMlp::EmbedMlp(const std::string& prefix, int in_dim, int out_dim, nn::ParamStore& store,
                   Rng& rng) {
    fc1_w_ = store.add(prefix + ".fc1.w", init_linear_weight(out_dim, in_dim, rng));
    fc1_b_ = store.add(prefix + ".fc1.b", Tensor({out_dim}, 0.0));
    fc2_w_ = store.add(prefix + ".fc2.w", init_linear_weight(out_dim, out_dim, rng));
    fc2_b_ = store.add(prefix + ".fc2.b", Tensor({out_dim}, 0.0));
}

Var EmbedMlp::build(Tape& t, Var x) const {
    Var h = t.silu(t.linear(x, t.param(fc1_w_), t.param(fc1_b_)));
    return t.linear(h, t.param(fc2_w_), t.param(fc2_b_));
}

Tensor sinusoid_encoding(int t, int dim) {
    Tensor enc({dim});
    int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * i / (half - 1));
        enc[i] = std::sin(t * freq);
        enc[half + i] = std::cos(t * freq);
    }
    return enc;
}

// ---------------------------------------------------------------------------
// condition network
// ---------------------------------------------------------------------------

CondNet::CondNet(const ModelConfig& cfg, nn::ParamStore& store, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    k_mlp_ = EmbedMlp("cond.kemb", 1, kEmbedDim, store, rng);
    int c0 = cfg.width(0);
    stem_w_ = store.add("cond.stem.w", init_conv_weight(c0, 2, 3, 3, rng));
    stem_b_ = store.add("cond.stem.b", Tensor({c0}, 0.0));

    enc_.resize(static_cast<size_t>(cfg.levels));
    dec_.resize(static_cast<size_t>(cfg.levels));
    down_w_.assign(static_cast<size_t>(cfg.levels), -1);
    down_b_.assign(static_cast<size_t>(cfg.levels), -1);
    up_w_.assign(static_cast<size_t>(cfg.levels), -1);
    up_b_.assign(static_cast<size_t>(cfg.levels), -1);

    for (int l = 0; l < cfg.levels; ++l) {
        size_t ls = static_cast<size_t>(l);
        int c = cfg.width(l);
        enc_[ls] = ResBlock("cond.enc" + std::to_string(l), c, c, kEmbedDim, 0, cfg.groups,
                            store, rng);
        if (l + 1 < cfg.levels) {
            int cn = cfg.width(l + 1);
            down_w_[ls] = store.add("cond.down" + std::to_string(l) + ".w",
                                    init_conv_weight(cn, c, 3, 3, rng));
            down_b_[ls] = store.add("cond.down" + std::to_string(l) + ".b", Tensor({cn}, 0.0));
        }
    }
    for (int l = cfg.levels - 1; l >= 0; --l) {
        size_t ls = static_cast<size_t>(l);
        int c = cfg.width(l);
        bool bottom = l == cfg.levels - 1;
        int in_ch = bottom ? c : 2 * c; // skip concat below the bottleneck
        dec_[ls] = ResBlock("cond.dec" + std::to_string(l), in_ch, c, kEmbedDim, 0, cfg.groups,
                            store, rng);
        if (!bottom) {
            int cu = cfg.width(l + 1);
            up_w_[ls] = store.add("cond.up" + std::to_string(l) + ".w",
                                  init_conv_weight(c, cu, 3, 3, rng));
            up_b_[ls] = store.add("cond.up" + std::to_string(l) + ".b", Tensor({c}, 0.0));
        }
    }
}

Var CondNet::build_offset_embedding(Tape& t, Var k_scalar) const {
    return k_mlp_.build(t, k_scalar);
}

std::vector<Var> CondNet::build(Tape& t, Var x_pair, Var k_emb) const {
    const Tensor& x = t.val(x_pair);
    if (x.rank() != 3 || x.dim(0) != 2) throw DimError("cond_net: expected {2,H,W} slice pair");
    int mult = cfg_.stride_multiple();
    if (x.dim(1) % mult || x.dim(2) % mult || x.dim(1) < 8 || x.dim(2) < 8)
        throw DimError("cond_net: H,W must be >= 8 and divisible by " + std::to_string(mult));

    std::vector<Var> enc_out(static_cast<size_t>(cfg_.levels));
    Var h = t.conv2d(x_pair, t.param(stem_w_), t.param(stem_b_), 1, 1);
    for (int l = 0; l < cfg_.levels; ++l) {
        size_t ls = static_cast<size_t>(l);
        h = enc_[ls].build(t, h, k_emb);
        enc_out[ls] = h;
        if (l + 1 < cfg_.levels)
            h = t.conv2d(h, t.param(down_w_[ls]), t.param(down_b_[ls]), 2, 1);
    }

    std::vector<Var> dec_out(static_cast<size_t>(cfg_.levels));
    Var d;
    for (int l = cfg_.levels - 1; l >= 0; --l) {
        size_t ls = static_cast<size_t>(l);
        if (l == cfg_.levels - 1) {
            d = dec_[ls].build(t, enc_out[ls], k_emb);
        } else {
            Var up = t.conv2d(t.upsample_nearest2x(d), t.param(up_w_[ls]), t.param(up_b_[ls]), 1,
                              1);
            d = dec_[ls].build(t, t.concat0(up, enc_out[ls]), k_emb);
        }
        dec_out[ls] = d;
    }
    return cfg_.decoder_taps ? dec_out : enc_out;
}

} // namespace isd
