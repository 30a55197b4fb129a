#pragma once

#include <random>
#include <string>
#include <vector>

#include "tactile/nn/autodiff.hpp"

namespace tactile::nn {

enum class Activation { Linear, Relu, Tanh, Sigmoid };

template <typename T>
Var<T> activate(Var<T> x, Activation act) {
    switch (act) {
        case Activation::Relu: return relu(x);
        case Activation::Tanh: return tactile::nn::tanh(x);
        case Activation::Sigmoid: return sigmoid(x);
        case Activation::Linear: break;
    }
    return x;
}

/// Fully connected layer, parameters `<name>.w` [out, in] and `<name>.b` [out].
struct Dense {
    std::string name;
    int in = 0;
    int out = 0;
    Activation act = Activation::Linear;
    bool bias = true;

    template <typename T>
    void init(ParamStore<T>& store, std::mt19937_64& rng) const {
        if (act == Activation::Relu)
            store.add(name + ".w", he_uniform<T>({out, in}, in, rng));
        else
            store.add(name + ".w", glorot<T>({out, in}, in, out, rng));
        if (bias) store.add(name + ".b", Tensor<T>({out}));
    }

    template <typename T>
    Var<T> operator()(Tape<T>& tape, ParamStore<T>& store, Var<T> x) const {
        require(x.value().rank() == 2 && x.dim(1) == in, ErrorKind::ShapeMismatch,
                name + ": expected " + std::to_string(in) + " input features, got " + detail::shp(x));
        Var<T> b = bias ? tape.param(store, name + ".b") : tape.constant(Tensor<T>({out}));
        return activate(linear(x, tape.param(store, name + ".w"), b), act);
    }
};

/// 3x3 same-padded convolution + bias + ReLU, optionally followed by 2x2 max-pool.
struct ConvBlock {
    std::string name;
    int in_ch = 0;
    int out_ch = 0;
    int kernel = 3;
    bool pool = true;

    template <typename T>
    void init(ParamStore<T>& store, std::mt19937_64& rng) const {
        store.add(name + ".w", he_uniform<T>({out_ch, in_ch, kernel, kernel}, in_ch * kernel * kernel, rng));
        store.add(name + ".b", Tensor<T>({out_ch}));
    }

    template <typename T>
    Var<T> operator()(Tape<T>& tape, ParamStore<T>& store, Var<T> x) const {
        require(x.value().rank() == 4 && x.dim(1) == in_ch, ErrorKind::ShapeMismatch,
                name + ": expected " + std::to_string(in_ch) + " channels, got " + detail::shp(x));
        Var<T> y = relu(conv2d(x, tape.param(store, name + ".w"), tape.param(store, name + ".b"), kernel / 2));
        return pool ? maxpool2(y) : y;
    }

    int out_size(int in_size) const { return pool ? in_size / 2 : in_size; }
};

/// Stack of conv blocks, flatten, dense projection to an embedding.
/// Input [N, C, S, S] -> [N, embed].
struct ImageEncoder {
    std::string name;
    int in_ch = 3;
    int image_size = 16;
    std::vector<int> channels{8, 16};
    int embed = 32;

    std::vector<ConvBlock> blocks() const {
        std::vector<ConvBlock> out;
        int c = in_ch;
        for (std::size_t i = 0; i < channels.size(); ++i) {
            out.push_back({name + ".conv" + std::to_string(i), c, channels[i], 3, true});
            c = channels[i];
        }
        return out;
    }

    int flat_size() const {
        int s = image_size;
        for (const auto& b : blocks()) s = b.out_size(s);
        require(s >= 1, ErrorKind::ShapeMismatch, name + ": image too small for " + std::to_string(channels.size()) + " pooling stages");
        return s * s * (channels.empty() ? in_ch : channels.back());
    }

    Dense projection() const { return {name + ".proj", flat_size(), embed, Activation::Relu}; }

    template <typename T>
    void init(ParamStore<T>& store, std::mt19937_64& rng) const {
        for (const auto& b : blocks()) b.init(store, rng);
        projection().init(store, rng);
    }

    template <typename T>
    Var<T> operator()(Tape<T>& tape, ParamStore<T>& store, Var<T> images) const {
        Var<T> x = images;
        for (const auto& b : blocks()) x = b(tape, store, x);
        x = reshape(x, {x.dim(0), flat_size()});
        return projection()(tape, store, x);
    }
};

/// LSTM cell with gate order (input, forget, candidate, output).
/// Parameters `<name>.wx` [4H, In], `<name>.wh` [4H, H], `<name>.b` [4H].
struct LstmCell {
    std::string name;
    int in = 0;
    int hidden = 0;

    template <typename T>
    void init(ParamStore<T>& store, std::mt19937_64& rng) const {
        store.add(name + ".wx", glorot<T>({4 * hidden, in}, in, hidden, rng));
        store.add(name + ".wh", glorot<T>({4 * hidden, hidden}, hidden, hidden, rng));
        Tensor<T> b({4 * hidden});
        for (int j = hidden; j < 2 * hidden; ++j) b[j] = T(1);  // forget-gate bias
        store.add(name + ".b", std::move(b));
    }

    /// One step. Returns {h_t, c_t}.
    template <typename T>
    std::pair<Var<T>, Var<T>> operator()(Tape<T>& tape, ParamStore<T>& store, Var<T> x, Var<T> h, Var<T> c) const {
        require(x.value().rank() == 2 && x.dim(1) == in, ErrorKind::ShapeMismatch,
                name + ": expected input width " + std::to_string(in) + ", got " + detail::shp(x));
        require(h.value().rank() == 2 && h.dim(1) == hidden && c.shape() == h.shape() && h.dim(0) == x.dim(0),
                ErrorKind::ShapeMismatch, name + ": state shape " + detail::shp(h) + "/" + detail::shp(c));
        Var<T> zero_b = tape.constant(Tensor<T>({4 * hidden}));
        Var<T> z = add(linear(x, tape.param(store, name + ".wx"), tape.param(store, name + ".b")),
                       linear(h, tape.param(store, name + ".wh"), zero_b));
        Var<T> ig = sigmoid(slice_cols(z, 0, hidden));
        Var<T> fg = sigmoid(slice_cols(z, hidden, hidden));
        Var<T> cand = tactile::nn::tanh(slice_cols(z, 2 * hidden, hidden));
        Var<T> og = sigmoid(slice_cols(z, 3 * hidden, hidden));
        Var<T> c_next = add(mul(fg, c), mul(ig, cand));
        Var<T> h_next = mul(og, tactile::nn::tanh(c_next));
        return {h_next, c_next};
    }
};

/// One transformer encoder layer on token rows [B*T, D].
/// Post-norm: x = LN(x + MHA(x)); x = LN(x + FFN(x)).
/// Pre-norm:  x = x + MHA(LN(x)); x = x + FFN(LN(x)).
struct EncoderLayer {
    std::string name;
    int dim = 32;
    int heads = 4;
    int ffn = 64;
    bool pre_norm = false;

    Dense q() const { return {name + ".q", dim, dim, Activation::Linear}; }
    // A key bias only shifts every score in a softmax row equally, so it is omitted.
    Dense k() const { return {name + ".k", dim, dim, Activation::Linear, false}; }
    Dense v() const { return {name + ".v", dim, dim, Activation::Linear}; }
    Dense o() const { return {name + ".o", dim, dim, Activation::Linear}; }
    Dense ff1() const { return {name + ".ff1", dim, ffn, Activation::Relu}; }
    Dense ff2() const { return {name + ".ff2", ffn, dim, Activation::Linear}; }

    template <typename T>
    void init(ParamStore<T>& store, std::mt19937_64& rng) const {
        require(heads > 0 && dim % heads == 0, ErrorKind::HeadDivisibility,
                name + ": dim " + std::to_string(dim) + " not divisible by " + std::to_string(heads) + " heads");
        for (const auto& d : {q(), k(), v(), o(), ff1(), ff2()}) d.init(store, rng);
        Tensor<T> ones({dim}, T(1));
        store.add(name + ".ln1.g", ones);
        store.add(name + ".ln1.b", Tensor<T>({dim}));
        store.add(name + ".ln2.g", ones);
        store.add(name + ".ln2.b", Tensor<T>({dim}));
    }

    template <typename T>
    Var<T> operator()(Tape<T>& tape, ParamStore<T>& store, Var<T> x, int tokens,
                      std::vector<T>* attn_weights = nullptr) const {
        auto ln = [&](Var<T> v, const char* which) {
            return layer_norm(v, tape.param(store, name + which + std::string(".g")), tape.param(store, name + which + std::string(".b")));
        };
        if (pre_norm) {
            Var<T> n1 = ln(x, ".ln1");
            Var<T> h = add(x, o()(tape, store, attention(q()(tape, store, n1), k()(tape, store, n1), v()(tape, store, n1), tokens, heads, attn_weights)));
            return add(h, ff2()(tape, store, ff1()(tape, store, ln(h, ".ln2"))));
        }
        Var<T> a = attention(q()(tape, store, x), k()(tape, store, x), v()(tape, store, x), tokens, heads, attn_weights);
        Var<T> h = layer_norm(add(x, o()(tape, store, a)), tape.param(store, name + ".ln1.g"), tape.param(store, name + ".ln1.b"));
        Var<T> f = ff2()(tape, store, ff1()(tape, store, h));
        return layer_norm(add(h, f), tape.param(store, name + ".ln2.g"), tape.param(store, name + ".ln2.b"));
    }
};

struct LossConfig {
    double l2_lambda = 0.0;
};

/// Mean squared error plus l2_lambda times the sum of squares of every stored parameter.
template <typename T>
Var<T> mse_l2_loss(Tape<T>& tape, Var<T> preds, const std::vector<T>& targets, ParamStore<T>& store, const LossConfig& cfg) {
    require(cfg.l2_lambda >= 0.0 && std::isfinite(cfg.l2_lambda), ErrorKind::InvalidArgument, "l2_lambda must be finite and >= 0");
    Var<T> loss = mse(preds, targets);
    if (cfg.l2_lambda == 0.0) return loss;
    for (std::size_t i = 0; i < store.size(); ++i)
        loss = add(loss, scale(sum_squares(tape.param(store[i])), static_cast<T>(cfg.l2_lambda)));
    return loss;
}

}  // namespace tactile::nn
