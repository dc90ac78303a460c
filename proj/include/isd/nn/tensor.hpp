#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "isd/errors.hpp"

namespace isd::nn {

// Dense row-major tensor of doubles. Shape conventions across the project:
// {H,W} image slices, {C,H,W} feature maps, {N} vectors, {Co,Ci,Kh,Kw}
// convolution weights.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(count(shape), 0.0) {}
    Tensor(std::vector<int> s, double fill) : shape(std::move(s)), data(count(shape), fill) {}
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (count(shape) != static_cast<long long>(data.size()))
            throw DimError("tensor: data size does not match shape " + shape_str());
    }

    static long long count(const std::vector<int>& s) {
        long long n = 1;
        for (int d : s) {
            if (d <= 0) throw DimError("tensor: nonpositive dimension");
            n *= d;
        }
        return n;
    }

    long long size() const { return static_cast<long long>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    bool empty() const { return data.empty(); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }
    double& operator[](long long i) { return data[static_cast<size_t>(i)]; }
    double operator[](long long i) const { return data[static_cast<size_t>(i)]; }

    // rank-3 {C,H,W} accessor
    double& at(int c, int h, int w) {
        return data[(static_cast<size_t>(c) * shape[1] + h) * shape[2] + w];
    }
    double at(int c, int h, int w) const {
        return data[(static_cast<size_t>(c) * shape[1] + h) * shape[2] + w];
    }
    // rank-2 {H,W} accessor
    double& at(int h, int w) { return data[static_cast<size_t>(h) * shape[1] + w]; }
    double at(int h, int w) const { return data[static_cast<size_t>(h) * shape[1] + w]; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const {
        std::string s = "{";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "}";
    }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b))
        throw DimError(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " +
                       b.shape_str());
}

// Same data, new shape (element counts must agree).
inline Tensor reshaped(const Tensor& t, std::vector<int> shape) {
    if (Tensor::count(shape) != t.size())
        throw DimError("reshape: element count mismatch");
    return Tensor(std::move(shape), t.data);
}

} // namespace isd::nn
