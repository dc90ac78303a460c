#pragma once

#include <string>
#include <vector>

#include "isd/nn/param_store.hpp"
#include "isd/nn/rng.hpp"
#include "isd/nn/tape.hpp"
#include "isd/nn/tensor.hpp"

namespace isd {

using nn::Rng;
using nn::Tape;
using nn::Tensor;
using nn::Var;

constexpr int kEmbedDim = 128; // condition embedding width

// Architecture hyperparameters shared by the condition network and the main
// denoising branch.
struct ModelConfig {
    int levels = 4;
    int base_channels = 16;
    std::vector<int> channel_mult = {1, 2, 4, 8};
    int groups = 8;
    int diffusion_steps = 1000; // T, for timestep range checks
    bool ablation_mode = false; // concatenation conditioning instead of the pyramid
    bool decoder_taps = true;   // where the pyramid taps the hourglass

    int width(int level) const { return base_channels * channel_mult[static_cast<size_t>(level)]; }
    int stride_multiple() const { return 1 << (levels - 1); }
    void validate() const;
};

// Multi-scale conditional feature maps; level l has shape
// {width(l), H/2^l, W/2^l}.
struct FeaturePyramid {
    std::vector<Tensor> levels;
};

// ---------------------------------------------------------------------------
// standalone modulation ops (value level)
// ---------------------------------------------------------------------------

Tensor group_norm(const Tensor& h, int groups, double eps = Tape::kGroupNormEps);

struct AffineParams {
    Tensor w; // {2C, emb}
    Tensor b; // {2C}
};

// k_s * GroupNorm(h) + k_b with (k_s,k_b) = affine(emb), broadcast over H,W.
Tensor channel_mod(const Tensor& h, const Tensor& emb, const AffineParams& affine, int groups);

struct ConvParams {
    Tensor w; // {2C, Cc, Kh, Kw}
    Tensor b; // {2C}
};

// x_s (.) GroupNorm(h) + x_b with (x_s,x_b) = proj(cond), full spatial maps.
Tensor element_mod(const Tensor& h, const Tensor& cond, const ConvParams& proj, int groups);

// ---------------------------------------------------------------------------
// network building blocks
// ---------------------------------------------------------------------------

// Residual block: GroupNorm -> modulation -> SiLU -> 3x3 conv, twice, with an
// identity (or 1x1-projected) skip. The first slot applies channel-wise
// modulation from `emb` (one affine pair per block); the second applies
// element-wise modulation from `lateral` when the block has a lateral
// projection, otherwise plain GroupNorm.
class ResBlock {
public:
    ResBlock() = default;
    ResBlock(const std::string& prefix, int in_ch, int out_ch, int emb_dim, int lateral_ch,
             int groups, nn::ParamStore& store, Rng& rng);

    Var build(Tape& t, Var x, Var emb, Var lateral = {}) const;
    int in_channels() const { return in_; }
    int out_channels() const { return out_; }
    bool has_lateral() const { return lat_w_ >= 0; }

private:
    int in_ = 0, out_ = 0, groups_ = 8;
    int affine_w_ = -1, affine_b_ = -1;
    int conv1_w_ = -1, conv1_b_ = -1, conv2_w_ = -1, conv2_b_ = -1;
    int skip_w_ = -1, skip_b_ = -1;
    int lat_w_ = -1, lat_b_ = -1;
};

// Two fully connected layers with SiLU in between; input is either the raw
// offset scalar or a sinusoidal timestep encoding.
class EmbedMlp {
public:
    EmbedMlp() = default;
    EmbedMlp(const std::string& prefix, int in_dim, int out_dim, nn::ParamStore& store, Rng& rng);
    Var build(Tape& t, Var x) const;

private:
    int fc1_w_ = -1, fc1_b_ = -1, fc2_w_ = -1, fc2_b_ = -1;
};

Tensor sinusoid_encoding(int t, int dim);

// Hourglass condition network: the two adjacent slices are concatenated and
// run through a U-Net of residual blocks, each channel-modulated by the
// offset embedding; the taps at every resolution level form the conditional
// feature pyramid.
class CondNet {
public:
    CondNet() = default;
    CondNet(const ModelConfig& cfg, nn::ParamStore& store, Rng& rng);

    Var build_offset_embedding(Tape& t, Var k_scalar) const;
    // returns pyramid vars, level 0 = full resolution
    std::vector<Var> build(Tape& t, Var x_pair, Var k_emb) const;

private:
    ModelConfig cfg_;
    EmbedMlp k_mlp_;
    int stem_w_ = -1, stem_b_ = -1;
    std::vector<ResBlock> enc_, dec_;
    std::vector<int> down_w_, down_b_, up_w_, up_b_;
};

// ---------------------------------------------------------------------------
// initializers
// ---------------------------------------------------------------------------

Tensor init_conv_weight(int out_ch, int in_ch, int kh, int kw, Rng& rng);
Tensor init_linear_weight(int out_dim, int in_dim, Rng& rng);
// affine / lateral projections start as identity modulation: small random
// weights, bias (1,...,1,0,...,0)
Tensor init_mod_bias(int channels);

} // namespace isd
