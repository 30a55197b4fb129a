#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "tactile/nn/tensor.hpp"

namespace tactile::nn {

template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T> m;  // Adam first moment
    Tensor<T> v;  // Adam second moment
    bool grad_ready = false;
};

/// Named parameters in insertion order. Insertion order is the canonical order
/// for checkpoints, L2 sums and optimizer updates.
template <typename T>
class ParamStore {
public:
    Param<T>& add(const std::string& name, Tensor<T> value) {
        require(!index_.count(name), ErrorKind::InvalidArgument, "duplicate parameter name " + name);
        auto p = std::make_unique<Param<T>>();
        p->name = name;
        p->grad = Tensor<T>(value.shape);
        p->m = Tensor<T>(value.shape);
        p->v = Tensor<T>(value.shape);
        p->value = std::move(value);
        index_[name] = params_.size();
        params_.push_back(std::move(p));
        return *params_.back();
    }

    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    Param<T>& get(const std::string& name) {
        auto it = index_.find(name);
        require(it != index_.end(), ErrorKind::UnknownKey, "no parameter named " + name);
        return *params_[it->second];
    }
    const Param<T>& get(const std::string& name) const {
        auto it = index_.find(name);
        require(it != index_.end(), ErrorKind::UnknownKey, "no parameter named " + name);
        return *params_[it->second];
    }

    std::size_t size() const { return params_.size(); }
    Param<T>& operator[](std::size_t i) { return *params_[i]; }
    const Param<T>& operator[](std::size_t i) const { return *params_[i]; }

    std::size_t num_values() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p->value.size();
        return n;
    }

    void zero_grad() {
        for (auto& p : params_) {
            p->grad.fill(T(0));
            p->grad_ready = false;
        }
    }

    T sum_squares() const {
        T s = 0;
        for (const auto& p : params_)
            for (T x : p->value.data) s += x * x;
        return s;
    }

    /// Deep copy of values only (gradients and moments reset).
    template <typename U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (const auto& p : params_) out.add(p->name, p->value.template cast<U>());
        return out;
    }

    /// Copy values from another store with identical names and shapes.
    template <typename U>
    void assign_values(const ParamStore<U>& other) {
        require(other.size() == size(), ErrorKind::ShapeMismatch, "parameter count mismatch");
        for (std::size_t i = 0; i < size(); ++i) {
            auto& dst = *params_[i];
            const auto& src = other[i];
            require(dst.name == src.name && dst.value.shape == src.value.shape, ErrorKind::ShapeMismatch,
                    "parameter " + dst.name + " does not match " + src.name);
            dst.value.data.assign(src.value.data.begin(), src.value.data.end());
        }
    }

private:
    std::vector<std::unique_ptr<Param<T>>> params_;
    std::map<std::string, std::size_t> index_;
};

/// Glorot-uniform initializer.
template <typename T>
Tensor<T> glorot(std::vector<int> shape, int fan_in, int fan_out, std::mt19937_64& rng) {
    Tensor<T> t(std::move(shape));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& x : t.data) x = static_cast<T>(dist(rng));
    return t;
}

/// He-uniform initializer for ReLU layers.
template <typename T>
Tensor<T> he_uniform(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
    Tensor<T> t(std::move(shape));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& x : t.data) x = static_cast<T>(dist(rng));
    return t;
}

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. `step` is the 1-based step count after this update.
template <typename T>
void adam_step(ParamStore<T>& store, const AdamConfig& cfg, long step) {
    require(step >= 1, ErrorKind::InvalidArgument, "adam step count must be >= 1");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < store.size(); ++i) {
        auto& p = store[i];
        require(p.grad_ready, ErrorKind::UninitializedGradients, "no gradient for parameter " + p.name);
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad[j];
            const double m = cfg.beta1 * p.m[j] + (1.0 - cfg.beta1) * g;
            const double v = cfg.beta2 * p.v[j] + (1.0 - cfg.beta2) * g * g;
            p.m[j] = static_cast<T>(m);
            p.v[j] = static_cast<T>(v);
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            p.value[j] = static_cast<T>(p.value[j] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

}  // namespace tactile::nn
