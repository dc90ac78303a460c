#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "isd/nn/tensor.hpp"

namespace isd::nn {

// Named parameter tensors plus parallel gradient buffers. Registration
// order is fixed by model construction and defines the checkpoint layout.
// Gradient buffers are mutable so read-only forward passes can bind a tape
// to a shared const store; gradient accumulation stays single-writer.
class ParamStore {
public:
    int add(const std::string& name, Tensor init) {
        if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
        int id = static_cast<int>(values_.size());
        index_[name] = id;
        names_.push_back(name);
        grads_.emplace_back(init.shape, 0.0);
        values_.push_back(std::move(init));
        return id;
    }

    int find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? -1 : it->second;
    }

    int count() const { return static_cast<int>(values_.size()); }
    const std::string& name(int i) const { return names_[static_cast<size_t>(i)]; }

    Tensor& value(int i) { return values_[static_cast<size_t>(i)]; }
    const Tensor& value(int i) const { return values_[static_cast<size_t>(i)]; }
    Tensor& grad(int i) const { return grads_[static_cast<size_t>(i)]; }

    Tensor& value(const std::string& name) { return values_[static_cast<size_t>(must(name))]; }
    const Tensor& value(const std::string& name) const {
        return values_[static_cast<size_t>(must(name))];
    }
    Tensor& grad(const std::string& name) const {
        return grads_[static_cast<size_t>(must(name))];
    }

    void zero_grads() {
        for (auto& g : grads_) g.fill(0.0);
    }

    long long total_params() const {
        long long n = 0;
        for (const auto& v : values_) n += v.size();
        return n;
    }

    double grad_norm() const {
        double s = 0.0;
        for (const auto& g : grads_)
            for (double v : g.data) s += v * v;
        return std::sqrt(s);
    }

    void scale_grads(double f) {
        for (auto& g : grads_)
            for (double& v : g.data) v *= f;
    }

private:
    int must(const std::string& name) const {
        int i = find(name);
        if (i < 0) throw ConfigError("unknown parameter: " + name);
        return i;
    }

    std::vector<std::string> names_;
    std::vector<Tensor> values_;
    mutable std::vector<Tensor> grads_;
    std::unordered_map<std::string, int> index_;
};

} // namespace isd::nn
