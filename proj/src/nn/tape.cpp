#include "isd/nn/tape.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace isd::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

// C (MxN) = op(A) * op(B), row-major buffers. Threads split output columns;
// each element keeps a fixed accumulation order, so results are bit-identical
// for any thread count.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a, const double* b,
          double* c, bool accumulate) {
    CMap am(a, trans_a ? k : m, trans_a ? m : k);
    CMap bm(b, trans_b ? n : k, trans_b ? k : n);
    MMap cm(c, m, n);

    int nblocks = 1;
#ifdef _OPENMP
    nblocks = std::clamp(n / 64, 1, omp_get_max_threads());
#endif

#pragma omp parallel for schedule(static) if (nblocks > 1)
    for (int blk = 0; blk < nblocks; ++blk) {
        int c0 = static_cast<int>(static_cast<long long>(n) * blk / nblocks);
        int c1 = static_cast<int>(static_cast<long long>(n) * (blk + 1) / nblocks);
        if (c0 >= c1) continue;
        auto dst = cm.middleCols(c0, c1 - c0);
        if (!trans_a && !trans_b) {
            if (accumulate) dst.noalias() += am * bm.middleCols(c0, c1 - c0);
            else dst.noalias() = am * bm.middleCols(c0, c1 - c0);
        } else if (!trans_a && trans_b) {
            if (accumulate) dst.noalias() += am * bm.middleRows(c0, c1 - c0).transpose();
            else dst.noalias() = am * bm.middleRows(c0, c1 - c0).transpose();
        } else if (trans_a && !trans_b) {
            if (accumulate) dst.noalias() += am.transpose() * bm.middleCols(c0, c1 - c0);
            else dst.noalias() = am.transpose() * bm.middleCols(c0, c1 - c0);
        } else {
            if (accumulate) dst.noalias() += am.transpose() * bm.middleRows(c0, c1 - c0).transpose();
            else dst.noalias() = am.transpose() * bm.middleRows(c0, c1 - c0).transpose();
        }
    }
}

// col is {Ci*Kh*Kw, Ho*Wo} row-major
void im2col(const Tensor& x, int kh, int kw, int stride, int pad, int ho, int wo, double* col) {
    int ci_n = x.dim(0), h = x.dim(1), w = x.dim(2);
    long long p = static_cast<long long>(ho) * wo;
    long long r = 0;
    for (int ci = 0; ci < ci_n; ++ci) {
        const double* xc = x.ptr() + static_cast<long long>(ci) * h * w;
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj, ++r) {
                double* row = col + r * p;
                for (int oy = 0; oy < ho; ++oy) {
                    int hi = oy * stride + ki - pad;
                    double* dst = row + static_cast<long long>(oy) * wo;
                    if (hi < 0 || hi >= h) {
                        std::fill(dst, dst + wo, 0.0);
                        continue;
                    }
                    const double* src = xc + static_cast<long long>(hi) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        int wi = ox * stride + kj - pad;
                        dst[ox] = (wi >= 0 && wi < w) ? src[wi] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* col, int ci_n, int h, int w, int kh, int kw, int stride, int pad,
                int ho, int wo, Tensor& dx) {
    long long p = static_cast<long long>(ho) * wo;
    long long r = 0;
    for (int ci = 0; ci < ci_n; ++ci) {
        double* xc = dx.ptr() + static_cast<long long>(ci) * h * w;
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj, ++r) {
                const double* row = col + r * p;
                for (int oy = 0; oy < ho; ++oy) {
                    int hi = oy * stride + ki - pad;
                    if (hi < 0 || hi >= h) continue;
                    double* dst = xc + static_cast<long long>(hi) * w;
                    const double* src = row + static_cast<long long>(oy) * wo;
                    for (int ox = 0; ox < wo; ++ox) {
                        int wi = ox * stride + kj - pad;
                        if (wi >= 0 && wi < w) dst[wi] += src[ox];
                    }
                }
            }
        }
    }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

int norm_groups(int channels, int requested) {
    return std::gcd(channels, std::max(1, requested));
}

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

const Tensor& Tape::node_val(int id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (n.op == Op::Param) return store_->value(n.pidx);
    return n.val;
}

const Tensor& Tape::val(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) throw DimError("tape: bad var");
    return node_val(v.id);
}

const Tensor& Tape::grad(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) throw DimError("tape: bad var");
    return nodes_[static_cast<size_t>(v.id)].grad;
}

Tensor& Tape::grad_buf(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.empty()) n.grad = Tensor(node_val(id).shape, 0.0);
    return n.grad;
}

Var Tape::input(Tensor v, bool track_grad) {
    Node n;
    n.op = Op::Input;
    n.val = std::move(v);
    n.track = track_grad;
    return {push(std::move(n))};
}

Var Tape::param(int store_index) {
    if (!store_ || store_index < 0 || store_index >= store_->count())
        throw ConfigError("tape: parameter index out of range");
    Node n;
    n.op = Op::Param;
    n.pidx = store_index;
    return {push(std::move(n))};
}

Var Tape::param(const std::string& name) {
    if (!store_) throw ConfigError("tape: no parameter store bound");
    int i = store_->find(name);
    if (i < 0) throw ConfigError("tape: unknown parameter " + name);
    return param(i);
}

Var Tape::conv2d(Var xv, Var wv, Var bv, int stride, int pad) {
    const Tensor& x = val(xv);
    const Tensor& w = val(wv);
    const Tensor& b = val(bv);
    if (x.rank() != 3 || w.rank() != 4 || b.rank() != 1) throw DimError("conv2d: bad ranks");
    if (w.dim(1) != x.dim(0)) throw DimError("conv2d: in-channel mismatch");
    if (b.dim(0) != w.dim(0)) throw DimError("conv2d: bias/channel mismatch");
    if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");

    int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    int h = x.dim(1), ww = x.dim(2);
    int ho = (h + 2 * pad - kh) / stride + 1;
    int wo = (ww + 2 * pad - kw) / stride + 1;
    if (ho < 1 || wo < 1) throw DimError("conv2d: output collapses to zero size");

    int kdim = x.dim(0) * kh * kw;
    long long p = static_cast<long long>(ho) * wo;
    std::vector<double> col(static_cast<size_t>(kdim) * p);
    im2col(x, kh, kw, stride, pad, ho, wo, col.data());

    Tensor out({co, ho, wo});
    gemm(false, false, co, static_cast<int>(p), kdim, w.ptr(), col.data(), out.ptr(), false);
    for (int c = 0; c < co; ++c) {
        double* row = out.ptr() + static_cast<long long>(c) * p;
        for (long long i = 0; i < p; ++i) row[i] += b[c];
    }

    Node n;
    n.op = Op::Conv2d;
    n.a = xv.id;
    n.b = wv.id;
    n.c = bv.id;
    n.i0 = stride;
    n.i1 = pad;
    n.val = std::move(out);
    return {push(std::move(n))};
}

Var Tape::linear(Var xv, Var wv, Var bv) {
    const Tensor& x = val(xv);
    const Tensor& w = val(wv);
    const Tensor& b = val(bv);
    if (x.rank() != 1 || w.rank() != 2 || b.rank() != 1) throw DimError("linear: bad ranks");
    if (w.dim(1) != x.dim(0) || w.dim(0) != b.dim(0)) throw DimError("linear: size mismatch");

    int out_n = w.dim(0), in_n = w.dim(1);
    Tensor out({out_n});
    CMap wm(w.ptr(), out_n, in_n);
    Eigen::Map<const Eigen::VectorXd> xm(x.ptr(), in_n);
    Eigen::Map<Eigen::VectorXd> ym(out.ptr(), out_n);
    ym.noalias() = wm * xm;
    for (int i = 0; i < out_n; ++i) out[i] += b[i];

    Node n;
    n.op = Op::Linear;
    n.a = xv.id;
    n.b = wv.id;
    n.c = bv.id;
    n.val = std::move(out);
    return {push(std::move(n))};
}

Var Tape::group_norm(Var xv, int groups, double eps) {
    const Tensor& x = val(xv);
    if (x.rank() != 3) throw DimError("group_norm: expected {C,H,W}");
    int c = x.dim(0);
    int g = norm_groups(c, groups);
    long long hw = static_cast<long long>(x.dim(1)) * x.dim(2);
    long long m = (c / g) * hw;

    Tensor out(x.shape);
    Tensor aux({2 * g});
    for (int gi = 0; gi < g; ++gi) {
        const double* src = x.ptr() + gi * m;
        double* dst = out.ptr() + gi * m;
        double mean = 0.0;
        for (long long i = 0; i < m; ++i) mean += src[i];
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (long long i = 0; i < m; ++i) {
            double d = src[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(m);
        double inv = 1.0 / std::sqrt(var + eps);
        for (long long i = 0; i < m; ++i) dst[i] = (src[i] - mean) * inv;
        aux[2 * gi] = mean;
        aux[2 * gi + 1] = inv;
    }

    Node n;
    n.op = Op::GroupNorm;
    n.a = xv.id;
    n.i0 = g;
    n.f0 = eps;
    n.val = std::move(out);
    n.aux = std::move(aux);
    return {push(std::move(n))};
}

Var Tape::silu(Var xv) {
    const Tensor& x = val(xv);
    Tensor out(x.shape);
    for (long long i = 0; i < x.size(); ++i) out[i] = x[i] * sigmoid(x[i]);
    Node n;
    n.op = Op::Silu;
    n.a = xv.id;
    n.val = std::move(out);
    return {push(std::move(n))};
}

Var Tape::add(Var xv, Var yv) {
    const Tensor& x = val(xv);
    const Tensor& y = val(yv);
    check_same_shape(x, y, "add");
    Tensor out(x.shape);
    for (long long i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
    Node n;
    n.op = Op::Add;
    n.a = xv.id;
    n.b = yv.id;
    n.val = std::move(out);
    return {push(std::move(n))};
}

Var Tape::modulate(Var xv, Var sv, Var bv) {
    const Tensor& x = val(xv);
    const Tensor& s = val(sv);
    const Tensor& b = val(bv);
    if (x.rank() != 3) throw DimError("modulate: expected {C,H,W}");
    check_same_shape(s, b, "modulate scale/bias");
    int c = x.dim(0);
    long long hw = static_cast<long long>(x.dim(1)) * x.dim(2);
    bool broadcast;
    if (s.rank() == 1 && s.dim(0) == c) {
        broadcast = true;
    } else if (s.same_shape(x)) {
        broadcast = false;
    } else {
        throw DimError("modulate: scale shape " + s.shape_str() + " incompatible with " +
                       x.shape_str());
    }

    Tensor out(x.shape);
    if (broadcast) {
        for (int ci = 0; ci < c; ++ci) {
            const double* src = x.ptr() + ci * hw;
            double* dst = out.ptr() + ci * hw;
            double sc = s[ci], bi = b[ci];
            for (long long i = 0; i < hw; ++i) dst[i] = sc * src[i] + bi;
        }
    } else {
        for (long long i = 0; i < x.size(); ++i) out[i] = s[i] * x[i] + b[i];
    }

    Node n;
    n.op = Op::Modulate;
    n.a = xv.id;
    n.b = sv.id;
    n.c = bv.id;
    n.i0 = broadcast ? 1 : 0;
    n.val = std::move(out);
    return {push(std::move(n))};
}

Var Tape::upsample_nearest2x(Var xv) {
    const Tensor& x = val(xv);
    if (x.rank() != 3) throw DimError("upsample: expected {C,H,W}");
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out({c, 2 * h, 2 * w});
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < 2 * h; ++y) {
            const double* src = x.ptr() + (static_cast<long long>(ci) * h + y / 2) * w;
            double* dst = out.ptr() + (static_cast<long long>(ci) * 2 * h + y) * 2 * w;
            for (int xx = 0; xx < 2 * w; ++xx) dst[xx] = src[xx / 2];
        }
    Node n;
    n.op = Op::UpsampleNearest2x;
    n.a = xv.id;
    n.val = std::move(out);
    return {push(std::move(n))};
}

Var Tape::avg_pool2x(Var xv) {
    const Tensor& x = val(xv);
    if (x.rank() != 3) throw DimError("avg_pool: expected {C,H,W}");
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (h % 2 || w % 2) throw DimError("avg_pool: H and W must be even");
    Tensor out({c, h / 2, w / 2});
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h / 2; ++y)
            for (int xx = 0; xx < w / 2; ++xx) {
                double v = x.at(ci, 2 * y, 2 * xx) + x.at(ci, 2 * y, 2 * xx + 1) +
                           x.at(ci, 2 * y + 1, 2 * xx) + x.at(ci, 2 * y + 1, 2 * xx + 1);
                out.at(ci, y, xx) = 0.25 * v;
            }
    Node n;
    n.op = Op::AvgPool2x;
    n.a = xv.id;
    n.val = std::move(out);
    return {push(std::move(n))};
}

Var Tape::concat0(Var xv, Var yv) {
    const Tensor& x = val(xv);
    const Tensor& y = val(yv);
    if (x.rank() != y.rank() || x.rank() < 1) throw DimError("concat0: rank mismatch");
    for (int i = 1; i < x.rank(); ++i)
        if (x.dim(i) != y.dim(i)) throw DimError("concat0: trailing dims differ");
    std::vector<int> shape = x.shape;
    shape[0] += y.dim(0);
    Tensor out(shape);
    std::memcpy(out.ptr(), x.ptr(), sizeof(double) * static_cast<size_t>(x.size()));
    std::memcpy(out.ptr() + x.size(), y.ptr(), sizeof(double) * static_cast<size_t>(y.size()));
    Node n;
    n.op = Op::Concat0;
    n.a = xv.id;
    n.b = yv.id;
    n.val = std::move(out);
    return {push(std::move(n))};
}

Var Tape::slice0(Var xv, int from, int to) {
    const Tensor& x = val(xv);
    if (x.rank() < 1 || from < 0 || to <= from || to > x.dim(0))
        throw DimError("slice0: bad range");
    long long row = x.size() / x.dim(0);
    std::vector<int> shape = x.shape;
    shape[0] = to - from;
    Tensor out(shape);
    std::memcpy(out.ptr(), x.ptr() + from * row,
                sizeof(double) * static_cast<size_t>(out.size()));
    Node n;
    n.op = Op::Slice0;
    n.a = xv.id;
    n.i0 = from;
    n.i1 = to;
    n.val = std::move(out);
    return {push(std::move(n))};
}

Var Tape::sum(Var xv) {
    const Tensor& x = val(xv);
    double s = 0.0;
    for (long long i = 0; i < x.size(); ++i) s += x[i];
    Node n;
    n.op = Op::Sum;
    n.a = xv.id;
    n.val = Tensor({1}, std::vector<double>{s});
    return {push(std::move(n))};
}

Var Tape::mse(Var pv, Tensor target) {
    const Tensor& p = val(pv);
    check_same_shape(p, target, "mse");
    double s = 0.0;
    for (long long i = 0; i < p.size(); ++i) {
        double d = p[i] - target[i];
        s += d * d;
    }
    s /= static_cast<double>(p.size());
    Node n;
    n.op = Op::Mse;
    n.a = pv.id;
    n.val = Tensor({1}, std::vector<double>{s});
    n.aux = std::move(target);
    return {push(std::move(n))};
}

void Tape::backward(Var root) {
    if (!root.valid() || root.id >= static_cast<int>(nodes_.size()))
        throw DimError("backward: bad root");
    if (node_val(root.id).size() != 1) throw DimError("backward: root must be scalar");

    auto needs = [&](int id) {
        const Node& m = nodes_[static_cast<size_t>(id)];
        return !(m.op == Op::Input && !m.track);
    };

    grad_buf(root.id)[0] += 1.0;

    for (int i = root.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (n.grad.empty()) continue;
        const Tensor& g = n.grad;

        switch (n.op) {
        case Op::Input:
            break;
        case Op::Param:
            for (long long j = 0; j < g.size(); ++j) store_->grad(n.pidx)[j] += g[j];
            break;
        case Op::Conv2d: {
            const Tensor& x = node_val(n.a);
            const Tensor& w = node_val(n.b);
            int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
            int h = x.dim(1), ww = x.dim(2);
            int ho = n.val.dim(1), wo = n.val.dim(2);
            int kdim = x.dim(0) * kh * kw;
            long long p = static_cast<long long>(ho) * wo;

            if (needs(n.c)) {
                Tensor& db = grad_buf(n.c);
                for (int c = 0; c < co; ++c) {
                    const double* row = g.ptr() + static_cast<long long>(c) * p;
                    double s = 0.0;
                    for (long long j = 0; j < p; ++j) s += row[j];
                    db[c] += s;
                }
            }
            if (needs(n.b)) {
                std::vector<double> col(static_cast<size_t>(kdim) * p);
                im2col(x, kh, kw, n.i0, n.i1, ho, wo, col.data());
                gemm(false, true, co, kdim, static_cast<int>(p), g.ptr(), col.data(),
                     grad_buf(n.b).ptr(), true);
            }
            if (needs(n.a)) {
                std::vector<double> dcol(static_cast<size_t>(kdim) * p);
                gemm(true, false, kdim, static_cast<int>(p), co, w.ptr(), g.ptr(), dcol.data(),
                     false);
                col2im_add(dcol.data(), x.dim(0), h, ww, kh, kw, n.i0, n.i1, ho, wo,
                           grad_buf(n.a));
            }
            break;
        }
        case Op::Linear: {
            const Tensor& x = node_val(n.a);
            const Tensor& w = node_val(n.b);
            int out_n = w.dim(0), in_n = w.dim(1);
            Eigen::Map<const Eigen::VectorXd> gm(g.ptr(), out_n);
            if (needs(n.c)) {
                Tensor& db = grad_buf(n.c);
                for (int j = 0; j < out_n; ++j) db[j] += g[j];
            }
            if (needs(n.b)) {
                MMap dwm(grad_buf(n.b).ptr(), out_n, in_n);
                Eigen::Map<const Eigen::VectorXd> xm(x.ptr(), in_n);
                dwm.noalias() += gm * xm.transpose();
            }
            if (needs(n.a)) {
                CMap wm(w.ptr(), out_n, in_n);
                Eigen::Map<Eigen::VectorXd> dxm(grad_buf(n.a).ptr(), in_n);
                dxm.noalias() += wm.transpose() * gm;
            }
            break;
        }
        case Op::GroupNorm: {
            if (!needs(n.a)) break;
            const Tensor& y = n.val;
            int gn = n.i0;
            long long m = y.size() / gn;
            Tensor& dx = grad_buf(n.a);
            for (int gi = 0; gi < gn; ++gi) {
                const double* gy = g.ptr() + gi * m;
                const double* yh = y.ptr() + gi * m;
                double* dst = dx.ptr() + gi * m;
                double inv = n.aux[2 * gi + 1];
                double s1 = 0.0, s2 = 0.0;
                for (long long j = 0; j < m; ++j) {
                    s1 += gy[j];
                    s2 += gy[j] * yh[j];
                }
                s1 /= static_cast<double>(m);
                s2 /= static_cast<double>(m);
                for (long long j = 0; j < m; ++j)
                    dst[j] += inv * (gy[j] - s1 - yh[j] * s2);
            }
            break;
        }
        case Op::Silu: {
            if (!needs(n.a)) break;
            const Tensor& x = node_val(n.a);
            Tensor& dx = grad_buf(n.a);
            for (long long j = 0; j < x.size(); ++j) {
                double s = sigmoid(x[j]);
                dx[j] += g[j] * (s * (1.0 + x[j] * (1.0 - s)));
            }
            break;
        }
        case Op::Add: {
            if (needs(n.a)) {
                Tensor& da = grad_buf(n.a);
                for (long long j = 0; j < g.size(); ++j) da[j] += g[j];
            }
            if (needs(n.b)) {
                Tensor& db = grad_buf(n.b);
                for (long long j = 0; j < g.size(); ++j) db[j] += g[j];
            }
            break;
        }
        case Op::Modulate: {
            const Tensor& x = node_val(n.a);
            const Tensor& s = node_val(n.b);
            int c = x.dim(0);
            long long hw = x.size() / c;
            bool broadcast = n.i0 == 1;
            if (needs(n.a)) {
                Tensor& dx = grad_buf(n.a);
                if (broadcast) {
                    for (int ci = 0; ci < c; ++ci) {
                        double sc = s[ci];
                        const double* gp = g.ptr() + ci * hw;
                        double* dp = dx.ptr() + ci * hw;
                        for (long long j = 0; j < hw; ++j) dp[j] += sc * gp[j];
                    }
                } else {
                    for (long long j = 0; j < g.size(); ++j) dx[j] += s[j] * g[j];
                }
            }
            if (needs(n.b)) {
                Tensor& ds = grad_buf(n.b);
                if (broadcast) {
                    for (int ci = 0; ci < c; ++ci) {
                        const double* gp = g.ptr() + ci * hw;
                        const double* xp = x.ptr() + ci * hw;
                        double acc = 0.0;
                        for (long long j = 0; j < hw; ++j) acc += gp[j] * xp[j];
                        ds[ci] += acc;
                    }
                } else {
                    for (long long j = 0; j < g.size(); ++j) ds[j] += g[j] * x[j];
                }
            }
            if (needs(n.c)) {
                Tensor& db = grad_buf(n.c);
                if (broadcast) {
                    for (int ci = 0; ci < c; ++ci) {
                        const double* gp = g.ptr() + ci * hw;
                        double acc = 0.0;
                        for (long long j = 0; j < hw; ++j) acc += gp[j];
                        db[ci] += acc;
                    }
                } else {
                    for (long long j = 0; j < g.size(); ++j) db[j] += g[j];
                }
            }
            break;
        }
        case Op::UpsampleNearest2x: {
            if (!needs(n.a)) break;
            const Tensor& x = node_val(n.a);
            int c = x.dim(0), h = x.dim(1), w = x.dim(2);
            Tensor& dx = grad_buf(n.a);
            for (int ci = 0; ci < c; ++ci)
                for (int y = 0; y < 2 * h; ++y) {
                    const double* gp =
                        g.ptr() + (static_cast<long long>(ci) * 2 * h + y) * 2 * w;
                    double* dp = dx.ptr() + (static_cast<long long>(ci) * h + y / 2) * w;
                    for (int xx = 0; xx < 2 * w; ++xx) dp[xx / 2] += gp[xx];
                }
            break;
        }
        case Op::AvgPool2x: {
            if (!needs(n.a)) break;
            const Tensor& x = node_val(n.a);
            int c = x.dim(0), h = x.dim(1), w = x.dim(2);
            Tensor& dx = grad_buf(n.a);
            for (int ci = 0; ci < c; ++ci)
                for (int y = 0; y < h / 2; ++y)
                    for (int xx = 0; xx < w / 2; ++xx) {
                        double gv = 0.25 * g.at(ci, y, xx);
                        dx.at(ci, 2 * y, 2 * xx) += gv;
                        dx.at(ci, 2 * y, 2 * xx + 1) += gv;
                        dx.at(ci, 2 * y + 1, 2 * xx) += gv;
                        dx.at(ci, 2 * y + 1, 2 * xx + 1) += gv;
                    }
            break;
        }
        case Op::Concat0: {
            long long na = node_val(n.a).size();
            if (needs(n.a)) {
                Tensor& da = grad_buf(n.a);
                for (long long j = 0; j < na; ++j) da[j] += g[j];
            }
            if (needs(n.b)) {
                Tensor& db = grad_buf(n.b);
                for (long long j = 0; j < db.size(); ++j) db[j] += g[na + j];
            }
            break;
        }
        case Op::Slice0: {
            if (!needs(n.a)) break;
            const Tensor& x = node_val(n.a);
            long long row = x.size() / x.dim(0);
            Tensor& dx = grad_buf(n.a);
            long long off = n.i0 * row;
            for (long long j = 0; j < g.size(); ++j) dx[off + j] += g[j];
            break;
        }
        case Op::Sum: {
            if (!needs(n.a)) break;
            Tensor& dx = grad_buf(n.a);
            double gv = g[0];
            for (long long j = 0; j < dx.size(); ++j) dx[j] += gv;
            break;
        }
        case Op::Mse: {
            if (!needs(n.a)) break;
            const Tensor& p = node_val(n.a);
            Tensor& dp = grad_buf(n.a);
            double f = 2.0 * g[0] / static_cast<double>(p.size());
            for (long long j = 0; j < p.size(); ++j) dp[j] += f * (p[j] - n.aux[j]);
            break;
        }
        }
    }
}

} // namespace isd::nn
