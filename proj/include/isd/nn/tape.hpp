#pragma once

#include <cstdint>
#include <vector>

#include "isd/nn/param_store.hpp"
#include "isd/nn/tensor.hpp"

namespace isd::nn {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

enum class Op : uint8_t {
    Input,
    Param,
    Conv2d,
    Linear,
    GroupNorm,
    Silu,
    Add,
    Modulate,
    UpsampleNearest2x,
    AvgPool2x,
    Concat0,
    Slice0,
    Sum,
    Mse,
};

struct Node {
    Op op;
    int a = -1, b = -1, c = -1; // input node ids
    Tensor val;
    Tensor grad;  // allocated on demand during backward
    Tensor aux;   // Mse: target; GroupNorm: per-group {mean, inv_std}
    int pidx = -1; // Param: store index
    int i0 = 0, i1 = 0; // stride/pad, groups, slice range
    double f0 = 0.0;    // GroupNorm epsilon
    bool track = false; // Input: keep gradient readable after backward
};

// Reverse-mode tape. Ops evaluate eagerly on construction; backward() walks
// the node list in reverse and accumulates parameter gradients into the
// bound ParamStore. Node ids are creation-ordered, so the reverse walk is a
// valid topological order. The store must not grow while a tape references
// it.
class Tape {
public:
    static constexpr double kGroupNormEps = 1e-8;

    explicit Tape(const ParamStore* store = nullptr) : store_(store) {}

    Var input(Tensor v, bool track_grad = false);
    Var param(int store_index);
    Var param(const std::string& name);

    // x {Ci,H,W}, w {Co,Ci,Kh,Kw}, b {Co}
    Var conv2d(Var x, Var w, Var b, int stride, int pad);
    // x {In}, w {Out,In}, b {Out}
    Var linear(Var x, Var w, Var b);
    // normalizes each channel group to zero mean / unit variance, no affine
    Var group_norm(Var x, int groups, double eps = kGroupNormEps);
    Var silu(Var x);
    Var add(Var x, Var y);
    // y = s (.) x + b with s,b either {C} (broadcast over H,W) or {C,H,W}
    Var modulate(Var x, Var scale, Var bias);
    Var upsample_nearest2x(Var x);
    Var avg_pool2x(Var x);
    Var concat0(Var x, Var y);
    Var slice0(Var x, int from, int to);
    Var sum(Var x);
    Var mse(Var pred, Tensor target);

    void backward(Var root);

    const Tensor& val(Var v) const;
    const Tensor& grad(Var v) const; // valid after backward
    size_t size() const { return nodes_.size(); }

private:
    const Tensor& node_val(int id) const;
    Tensor& grad_buf(int id);
    int push(Node n);

    std::vector<Node> nodes_;
    const ParamStore* store_;
};

// gcd reduction of the requested group count to a divisor of `channels`
int norm_groups(int channels, int requested);

} // namespace isd::nn
