#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <unordered_map>
#include <vector>

#include "tactile/nn/param_store.hpp"
#include "tactile/nn/tensor.hpp"

namespace tactile::nn {

template <typename T>
class Tape;

/// Handle to a node on a tape.
template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    int id = -1;

    const Tensor<T>& value() const { return tape->value(id); }
    const Tensor<T>& grad() const { return tape->grad(id); }
    const std::vector<int>& shape() const { return value().shape; }
    int dim(int i) const { return value().dim(i); }
    bool needs_grad() const { return tape->needs_grad(id); }
};

/// Reverse-mode tape. Nodes are appended during the forward pass and replayed in
/// reverse by `backward`. A tape is single use: build, backward, discard.
template <typename T>
class Tape {
public:
    using Backward = std::function<void(int self)>;

    Tape() { nodes_.reserve(512); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var<T> constant(Tensor<T> value) { return push(std::move(value), false); }

    /// Differentiable leaf that is not a stored parameter (used by gradient checks).
    Var<T> variable(Tensor<T> value) { return push(std::move(value), true); }

    /// Leaf bound to a stored parameter. Binding the same parameter twice returns the same node.
    Var<T> param(Param<T>& p) {
        auto it = bound_.find(&p);
        if (it != bound_.end()) return {this, it->second};
        Var<T> v = push(p.value, true);
        nodes_[v.id].param = &p;
        bound_[&p] = v.id;
        return v;
    }

    Var<T> param(ParamStore<T>& store, const std::string& name) { return param(store.get(name)); }

    /// Appends a node. `backward(self)` reads grad(self) and accumulates into the node's inputs.
    Var<T> push(Tensor<T> value, bool needs_grad, Backward backward = {}) {
        Node n;
        n.value = std::move(value);
        n.needs_grad = needs_grad;
        if (needs_grad) n.backward = std::move(backward);
        nodes_.push_back(std::move(n));
        return {this, static_cast<int>(nodes_.size()) - 1};
    }

    const Tensor<T>& value(int id) const { return nodes_[id].value; }
    bool needs_grad(int id) const { return nodes_[id].needs_grad; }
    const Tensor<T>& grad(int id) const { return nodes_[id].grad; }

    /// Gradient buffer for accumulation; allocated lazily with the value's shape.
    Tensor<T>& grad_buffer(int id) {
        Node& n = nodes_[id];
        if (n.grad.size() != n.value.size() || n.grad.shape != n.value.shape) n.grad = Tensor<T>(n.value.shape);
        return n.grad;
    }

    /// Seeds d(root)/d(root) = 1 for a scalar root, replays the tape and adds
    /// parameter gradients into their stores.
    void backward(Var<T> root) {
        require(root.value().size() == 1, ErrorKind::ShapeMismatch, "backward root must be scalar");
        grad_buffer(root.id).data[0] = T(1);
        for (int i = root.id; i >= 0; --i) {
            Node& n = nodes_[i];
            if (!n.needs_grad || n.grad.size() == 0 || !n.backward) continue;
            n.backward(i);
        }
        for (auto& n : nodes_) {
            if (!n.param) continue;
            n.param->grad_ready = true;
            if (n.grad.size() != n.value.size()) continue;
            auto& dst = n.param->grad.data;
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += n.grad.data[j];
        }
    }

    std::size_t num_nodes() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        Backward backward;
        Param<T>* param = nullptr;
        bool needs_grad = false;
    };

    std::vector<Node> nodes_;
    std::unordered_map<const Param<T>*, int> bound_;
};

namespace detail {

template <typename T>
std::string shp(const Var<T>& v) {
    return Tensor<T>::shape_str(v.shape());
}

template <typename T>
void check_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
    require(a.shape() == b.shape(), ErrorKind::ShapeMismatch, std::string(op) + ": " + shp(a) + " vs " + shp(b));
}

template <typename T>
bool any_grad(std::initializer_list<Var<T>> vs) {
    for (const auto& v : vs)
        if (v.needs_grad()) return true;
    return false;
}

/// Adds src into the gradient of node `id` if it is differentiable.
template <typename T>
void accumulate(Tape<T>* tape, int id, const T* src, std::size_t n) {
    if (!tape->needs_grad(id)) return;
    T* g = tape->grad_buffer(id).ptr();
    for (std::size_t i = 0; i < n; ++i) g[i] += src[i];
}

template <typename T>
T* grad_ptr(Tape<T>* tape, int id) {
    return tape->needs_grad(id) ? tape->grad_buffer(id).ptr() : nullptr;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    detail::check_same_shape(a, b, "add");
    Tape<T>* tp = a.tape;
    Tensor<T> out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    const int ia = a.id, ib = b.id;
    return tp->push(std::move(out), detail::any_grad({a, b}), [tp, ia, ib](int self) {
        const auto& g = tp->grad(self);
        detail::accumulate(tp, ia, g.ptr(), g.size());
        detail::accumulate(tp, ib, g.ptr(), g.size());
    });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
    detail::check_same_shape(a, b, "sub");
    Tape<T>* tp = a.tape;
    Tensor<T> out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    const int ia = a.id, ib = b.id;
    return tp->push(std::move(out), detail::any_grad({a, b}), [tp, ia, ib](int self) {
        const auto& g = tp->grad(self);
        detail::accumulate(tp, ia, g.ptr(), g.size());
        if (T* gb = detail::grad_ptr(tp, ib))
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    detail::check_same_shape(a, b, "mul");
    Tape<T>* tp = a.tape;
    Tensor<T> out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    const int ia = a.id, ib = b.id;
    return tp->push(std::move(out), detail::any_grad({a, b}), [tp, ia, ib](int self) {
        const auto& g = tp->grad(self);
        const auto& av = tp->value(ia);
        const auto& bv = tp->value(ib);
        if (T* ga = detail::grad_ptr(tp, ia))
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        if (T* gb = detail::grad_ptr(tp, ib))
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    });
}

template <typename T>
Var<T> scale(Var<T> a, T s) {
    Tape<T>* tp = a.tape;
    Tensor<T> out = a.value();
    for (auto& x : out.data) x *= s;
    const int ia = a.id;
    return tp->push(std::move(out), a.needs_grad(), [tp, ia, s](int self) {
        const auto& g = tp->grad(self);
        T* ga = tp->grad_buffer(ia).ptr();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
    });
}

template <typename T>
Var<T> relu(Var<T> a) {
    Tape<T>* tp = a.tape;
    Tensor<T> out = a.value();
    for (auto& x : out.data) x = x > T(0) ? x : T(0);
    const int ia = a.id;
    return tp->push(std::move(out), a.needs_grad(), [tp, ia](int self) {
        const auto& g = tp->grad(self);
        const auto& y = tp->value(self);
        T* ga = tp->grad_buffer(ia).ptr();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (y[i] > T(0)) ga[i] += g[i];
    });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
    Tape<T>* tp = a.tape;
    Tensor<T> out = a.value();
    for (auto& x : out.data) x = T(1) / (T(1) + std::exp(-x));
    const int ia = a.id;
    return tp->push(std::move(out), a.needs_grad(), [tp, ia](int self) {
        const auto& g = tp->grad(self);
        const auto& y = tp->value(self);
        T* ga = tp->grad_buffer(ia).ptr();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (T(1) - y[i]);
    });
}

template <typename T>
Var<T> tanh(Var<T> a) {
    Tape<T>* tp = a.tape;
    Tensor<T> out = a.value();
    for (auto& x : out.data) x = std::tanh(x);
    const int ia = a.id;
    return tp->push(std::move(out), a.needs_grad(), [tp, ia](int self) {
        const auto& g = tp->grad(self);
        const auto& y = tp->value(self);
        T* ga = tp->grad_buffer(ia).ptr();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (T(1) - y[i] * y[i]);
    });
}

// ---------------------------------------------------------------------------
// Shape plumbing

template <typename T>
Var<T> reshape(Var<T> a, std::vector<int> shape) {
    Tape<T>* tp = a.tape;
    require(Tensor<T>::count(shape) == a.value().size(), ErrorKind::ShapeMismatch,
            "reshape " + detail::shp(a) + " to " + Tensor<T>::shape_str(shape));
    Tensor<T> out(std::move(shape), a.value().data);
    const int ia = a.id;
    return tp->push(std::move(out), a.needs_grad(), [tp, ia](int self) {
        const auto& g = tp->grad(self);
        detail::accumulate(tp, ia, g.ptr(), g.size());
    });
}

/// Concatenates rank-2 tensors [N, Di] along columns.
template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
    require(!parts.empty(), ErrorKind::ShapeMismatch, "concat_cols of nothing");
    Tape<T>* tp = parts[0].tape;
    const int n = parts[0].dim(0);
    int total = 0;
    bool ng = false;
    for (const auto& p : parts) {
        require(p.value().rank() == 2 && p.dim(0) == n, ErrorKind::ShapeMismatch, "concat_cols: row mismatch " + detail::shp(p));
        total += p.dim(1);
        ng = ng || p.needs_grad();
    }
    Tensor<T> out({n, total});
    std::vector<int> ids, widths;
    int off = 0;
    for (const auto& p : parts) {
        const int w = p.dim(1);
        for (int r = 0; r < n; ++r)
            std::copy_n(p.value().ptr() + static_cast<std::size_t>(r) * w, w, out.ptr() + static_cast<std::size_t>(r) * total + off);
        off += w;
        ids.push_back(p.id);
        widths.push_back(w);
    }
    return tp->push(std::move(out), ng, [tp, ids, widths, n, total](int self) {
        const auto& g = tp->grad(self);
        int off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            const int w = widths[k];
            if (T* gp = detail::grad_ptr(tp, ids[k]))
                for (int r = 0; r < n; ++r)
                    for (int c = 0; c < w; ++c)
                        gp[static_cast<std::size_t>(r) * w + c] += g[static_cast<std::size_t>(r) * total + off + c];
            off += w;
        }
    });
}

/// Column slice [N, start:start+len) of a rank-2 tensor.
template <typename T>
Var<T> slice_cols(Var<T> a, int start, int len) {
    Tape<T>* tp = a.tape;
    require(a.value().rank() == 2 && start >= 0 && len > 0 && start + len <= a.dim(1), ErrorKind::ShapeMismatch,
            "slice_cols [" + std::to_string(start) + "," + std::to_string(start + len) + ") of " + detail::shp(a));
    const int n = a.dim(0), d = a.dim(1);
    Tensor<T> out({n, len});
    for (int r = 0; r < n; ++r)
        std::copy_n(a.value().ptr() + static_cast<std::size_t>(r) * d + start, len, out.ptr() + static_cast<std::size_t>(r) * len);
    const int ia = a.id;
    return tp->push(std::move(out), a.needs_grad(), [tp, ia, n, d, start, len](int self) {
        const auto& g = tp->grad(self);
        T* ga = tp->grad_buffer(ia).ptr();
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < len; ++c) ga[static_cast<std::size_t>(r) * d + start + c] += g[static_cast<std::size_t>(r) * len + c];
    });
}

/// Selects rows of a rank-2 tensor; repeated indices accumulate in backward.
template <typename T>
Var<T> gather_rows(Var<T> a, std::vector<int> rows) {
    Tape<T>* tp = a.tape;
    require(a.value().rank() == 2, ErrorKind::ShapeMismatch, "gather_rows expects rank 2, got " + detail::shp(a));
    const int d = a.dim(1);
    Tensor<T> out({static_cast<int>(rows.size()), d});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i] >= 0 && rows[i] < a.dim(0), ErrorKind::ShapeMismatch, "gather_rows index out of range");
        std::copy_n(a.value().ptr() + static_cast<std::size_t>(rows[i]) * d, d, out.ptr() + i * d);
    }
    const int ia = a.id;
    return tp->push(std::move(out), a.needs_grad(), [tp, ia, rows = std::move(rows), d](int self) {
        const auto& g = tp->grad(self);
        T* ga = tp->grad_buffer(ia).ptr();
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (int c = 0; c < d; ++c) ga[static_cast<std::size_t>(rows[i]) * d + c] += g[i * d + c];
    });
}

/// Stacks T step tensors [B, D] into token rows [B*T, D] with row b*T + t.
template <typename T>
Var<T> interleave_rows(const std::vector<Var<T>>& steps) {
    require(!steps.empty(), ErrorKind::ShapeMismatch, "interleave_rows of nothing");
    Tape<T>* tp = steps[0].tape;
    const int nt = static_cast<int>(steps.size());
    const int b = steps[0].dim(0), d = steps[0].dim(1);
    bool ng = false;
    for (const auto& s : steps) {
        require(s.shape() == steps[0].shape(), ErrorKind::ShapeMismatch, "interleave_rows shape mismatch");
        ng = ng || s.needs_grad();
    }
    Tensor<T> out({b * nt, d});
    std::vector<int> ids;
    for (int t = 0; t < nt; ++t) {
        for (int r = 0; r < b; ++r)
            std::copy_n(steps[t].value().ptr() + static_cast<std::size_t>(r) * d, d,
                        out.ptr() + static_cast<std::size_t>(r * nt + t) * d);
        ids.push_back(steps[t].id);
    }
    return tp->push(std::move(out), ng, [tp, ids, b, d, nt](int self) {
        const auto& g = tp->grad(self);
        for (int t = 0; t < nt; ++t)
            if (T* gp = detail::grad_ptr(tp, ids[t]))
                for (int r = 0; r < b; ++r)
                    for (int c = 0; c < d; ++c)
                        gp[static_cast<std::size_t>(r) * d + c] += g[static_cast<std::size_t>(r * nt + t) * d + c];
    });
}

/// Repeats a [T, D] block B times: row b*T + t of the output is row t of the input.
template <typename T>
Var<T> tile_rows(Var<T> a, int repeats) {
    Tape<T>* tp = a.tape;
    require(a.value().rank() == 2, ErrorKind::ShapeMismatch, "tile_rows expects rank 2");
    const std::size_t blk = a.value().size();
    Tensor<T> out({a.dim(0) * repeats, a.dim(1)});
    for (int r = 0; r < repeats; ++r) std::copy_n(a.value().ptr(), blk, out.ptr() + r * blk);
    const int ia = a.id;
    return tp->push(std::move(out), a.needs_grad(), [tp, ia, repeats, blk](int self) {
        const auto& g = tp->grad(self);
        T* ga = tp->grad_buffer(ia).ptr();
        for (int r = 0; r < repeats; ++r)
            for (std::size_t i = 0; i < blk; ++i) ga[i] += g[r * blk + i];
    });
}

/// Mean over the T token rows of each item: [B*T, D] -> [B, D].
template <typename T>
Var<T> mean_tokens(Var<T> a, int tokens) {
    Tape<T>* tp = a.tape;
    require(a.value().rank() == 2 && a.dim(0) % tokens == 0, ErrorKind::ShapeMismatch, "mean_tokens " + detail::shp(a));
    const int b = a.dim(0) / tokens, d = a.dim(1);
    Tensor<T> out({b, d});
    const T inv = T(1) / static_cast<T>(tokens);
    for (int r = 0; r < b; ++r)
        for (int t = 0; t < tokens; ++t)
            for (int c = 0; c < d; ++c) out.at(r, c) += a.value().at(r * tokens + t, c) * inv;
    const int ia = a.id;
    return tp->push(std::move(out), a.needs_grad(), [tp, ia, b, d, tokens, inv](int self) {
        const auto& g = tp->grad(self);
        auto& ga = tp->grad_buffer(ia);
        for (int r = 0; r < b; ++r)
            for (int t = 0; t < tokens; ++t)
                for (int c = 0; c < d; ++c) ga.at(r * tokens + t, c) += g.at(r, c) * inv;
    });
}

// ---------------------------------------------------------------------------
// Layers

/// Affine map out = x W^T + b for x [N, In], W [Out, In], b [Out].
template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b) {
    Tape<T>* tp = x.tape;
    require(x.value().rank() == 2 && w.value().rank() == 2 && x.dim(1) == w.dim(1), ErrorKind::ShapeMismatch,
            "linear: input " + detail::shp(x) + " weight " + detail::shp(w));
    require(b.value().size() == static_cast<std::size_t>(w.dim(0)), ErrorKind::ShapeMismatch, "linear: bias " + detail::shp(b));
    const int n = x.dim(0), in = x.dim(1), outd = w.dim(0);
    std::vector<T> wt(static_cast<std::size_t>(in) * outd);
    transpose(outd, in, w.value().ptr(), wt.data());
    Tensor<T> out({n, outd});
    for (int r = 0; r < n; ++r) std::copy_n(b.value().ptr(), outd, out.ptr() + static_cast<std::size_t>(r) * outd);
    gemm_nn(n, outd, in, x.value().ptr(), wt.data(), out.ptr(), true);
    const int ix = x.id, iw = w.id, ib = b.id;
    return tp->push(std::move(out), detail::any_grad({x, w, b}), [tp, ix, iw, ib, n, in, outd](int self) {
        const auto& g = tp->grad(self);
        if (T* gx = detail::grad_ptr(tp, ix)) gemm_nn(n, in, outd, g.ptr(), tp->value(iw).ptr(), gx, true);
        if (T* gw = detail::grad_ptr(tp, iw)) gemm_tn(outd, in, n, g.ptr(), tp->value(ix).ptr(), gw, true);
        if (T* gb = detail::grad_ptr(tp, ib))
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < outd; ++c) gb[c] += g[static_cast<std::size_t>(r) * outd + c];
    });
}

/// Stride-1 2D convolution, x [N,C,H,W], w [O,C,K,K], b [O], zero padding `pad`.
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, int pad) {
    Tape<T>* tp = x.tape;
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    require(xs.size() == 4 && ws.size() == 4 && xs[1] == ws[1] && ws[2] == ws[3], ErrorKind::ShapeMismatch,
            "conv2d: input " + detail::shp(x) + " kernel " + detail::shp(w));
    require(b.value().size() == static_cast<std::size_t>(ws[0]), ErrorKind::ShapeMismatch, "conv2d: bias " + detail::shp(b));
    const int n = xs[0], c = xs[1], h = xs[2], wd = xs[3];
    const int o = ws[0], k = ws[2];
    const int oh = h + 2 * pad - k + 1, ow = wd + 2 * pad - k + 1;
    require(oh > 0 && ow > 0, ErrorKind::ShapeMismatch, "conv2d: kernel larger than padded input");
    const int ckk = c * k * k, hw = oh * ow;

    // im2col for every image, kept for the backward pass
    std::vector<T> cols(static_cast<std::size_t>(n) * ckk * hw, T(0));
    const T* xp = x.value().ptr();
    for (int im = 0; im < n; ++im) {
        T* col = cols.data() + static_cast<std::size_t>(im) * ckk * hw;
        const T* src = xp + static_cast<std::size_t>(im) * c * h * wd;
        for (int ch = 0; ch < c; ++ch)
            for (int ki = 0; ki < k; ++ki)
                for (int kj = 0; kj < k; ++kj) {
                    T* row = col + static_cast<std::size_t>((ch * k + ki) * k + kj) * hw;
                    for (int y = 0; y < oh; ++y) {
                        const int sy = y + ki - pad;
                        if (sy < 0 || sy >= h) continue;
                        for (int xx = 0; xx < ow; ++xx) {
                            const int sx = xx + kj - pad;
                            if (sx < 0 || sx >= wd) continue;
                            row[y * ow + xx] = src[(static_cast<std::size_t>(ch) * h + sy) * wd + sx];
                        }
                    }
                }
    }
    Tensor<T> out({n, o, oh, ow});
    for (int im = 0; im < n; ++im) {
        T* dst = out.ptr() + static_cast<std::size_t>(im) * o * hw;
        for (int oc = 0; oc < o; ++oc) std::fill(dst + static_cast<std::size_t>(oc) * hw, dst + static_cast<std::size_t>(oc + 1) * hw, b.value()[oc]);
        gemm_nn(o, hw, ckk, w.value().ptr(), cols.data() + static_cast<std::size_t>(im) * ckk * hw, dst, true);
    }
    const int ix = x.id, iw = w.id, ib = b.id;
    return tp->push(std::move(out), detail::any_grad({x, w, b}),
                    [tp, ix, iw, ib, cols = std::move(cols), n, c, h, wd, o, k, pad, oh, ow, ckk, hw](int self) {
        const auto& g = tp->grad(self);
        T* gx = detail::grad_ptr(tp, ix);
        T* gw = detail::grad_ptr(tp, iw);
        T* gb = detail::grad_ptr(tp, ib);
        std::vector<T> gt(static_cast<std::size_t>(hw) * o), colt(static_cast<std::size_t>(hw) * ckk), dcol;
        if (gx) dcol.resize(static_cast<std::size_t>(ckk) * hw);
        for (int im = 0; im < n; ++im) {
            const T* gi = g.ptr() + static_cast<std::size_t>(im) * o * hw;
            const T* col = cols.data() + static_cast<std::size_t>(im) * ckk * hw;
            if (gb)
                for (int oc = 0; oc < o; ++oc)
                    for (int p = 0; p < hw; ++p) gb[oc] += gi[static_cast<std::size_t>(oc) * hw + p];
            if (gw) {
                transpose(o, hw, gi, gt.data());
                transpose(ckk, hw, col, colt.data());
                gemm_tn(o, ckk, hw, gt.data(), colt.data(), gw, true);
            }
            if (gx) {
                gemm_tn(ckk, hw, o, tp->value(iw).ptr(), gi, dcol.data(), false);
                T* dst = gx + static_cast<std::size_t>(im) * c * h * wd;
                for (int ch = 0; ch < c; ++ch)
                    for (int ki = 0; ki < k; ++ki)
                        for (int kj = 0; kj < k; ++kj) {
                            const T* row = dcol.data() + static_cast<std::size_t>((ch * k + ki) * k + kj) * hw;
                            for (int y = 0; y < oh; ++y) {
                                const int sy = y + ki - pad;
                                if (sy < 0 || sy >= h) continue;
                                for (int xx = 0; xx < ow; ++xx) {
                                    const int sx = xx + kj - pad;
                                    if (sx < 0 || sx >= wd) continue;
                                    dst[(static_cast<std::size_t>(ch) * h + sy) * wd + sx] += row[y * ow + xx];
                                }
                            }
                        }
            }
        }
    });
}

/// 2x2 max pooling with stride 2 (odd trailing row/column dropped).
template <typename T>
Var<T> maxpool2(Var<T> x) {
    Tape<T>* tp = x.tape;
    const auto& xs = x.shape();
    require(xs.size() == 4 && xs[2] >= 2 && xs[3] >= 2, ErrorKind::ShapeMismatch, "maxpool2: input " + detail::shp(x));
    const int n = xs[0], c = xs[1], h = xs[2], w = xs[3];
    const int oh = h / 2, ow = w / 2;
    Tensor<T> out({n, c, oh, ow});
    std::vector<int> arg(out.size());
    const T* xp = x.value().ptr();
    std::size_t q = 0;
    for (int plane = 0; plane < n * c; ++plane) {
        const T* src = xp + static_cast<std::size_t>(plane) * h * w;
        for (int y = 0; y < oh; ++y)
            for (int xx = 0; xx < ow; ++xx, ++q) {
                int best = (2 * y) * w + 2 * xx;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const int idx = (2 * y + dy) * w + 2 * xx + dx;
                        if (src[idx] > src[best]) best = idx;
                    }
                out[q] = src[best];
                arg[q] = plane * h * w + best;
            }
    }
    const int ix = x.id;
    return tp->push(std::move(out), x.needs_grad(), [tp, ix, arg = std::move(arg)](int self) {
        const auto& g = tp->grad(self);
        T* gx = tp->grad_buffer(ix).ptr();
        for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += g[i];
    });
}

/// Layer normalization over the last dimension of a rank-2 tensor.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5)) {
    Tape<T>* tp = x.tape;
    require(x.value().rank() == 2, ErrorKind::ShapeMismatch, "layer_norm expects rank 2, got " + detail::shp(x));
    const int n = x.dim(0), d = x.dim(1);
    require(gamma.value().size() == static_cast<std::size_t>(d) && beta.value().size() == static_cast<std::size_t>(d),
            ErrorKind::ShapeMismatch, "layer_norm: affine size mismatch");
    Tensor<T> out({n, d});
    std::vector<T> xhat(static_cast<std::size_t>(n) * d), inv_std(n);
    for (int r = 0; r < n; ++r) {
        const T* row = x.value().ptr() + static_cast<std::size_t>(r) * d;
        T mean = 0;
        for (int c = 0; c < d; ++c) mean += row[c];
        mean /= static_cast<T>(d);
        T var = 0;
        for (int c = 0; c < d; ++c) var += (row[c] - mean) * (row[c] - mean);
        var /= static_cast<T>(d);
        inv_std[r] = T(1) / std::sqrt(var + eps);
        for (int c = 0; c < d; ++c) {
            const T xh = (row[c] - mean) * inv_std[r];
            xhat[static_cast<std::size_t>(r) * d + c] = xh;
            out.at(r, c) = gamma.value()[c] * xh + beta.value()[c];
        }
    }
    const int ix = x.id, ig = gamma.id, ib = beta.id;
    return tp->push(std::move(out), detail::any_grad({x, gamma, beta}),
                    [tp, ix, ig, ib, n, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](int self) {
        const auto& g = tp->grad(self);
        const auto& gam = tp->value(ig);
        T* gx = detail::grad_ptr(tp, ix);
        T* gg = detail::grad_ptr(tp, ig);
        T* gb = detail::grad_ptr(tp, ib);
        std::vector<T> dxh(d);
        for (int r = 0; r < n; ++r) {
            const std::size_t base = static_cast<std::size_t>(r) * d;
            T mean_d = 0, mean_dx = 0;
            for (int c = 0; c < d; ++c) {
                const T gv = g[base + c];
                if (gg) gg[c] += gv * xhat[base + c];
                if (gb) gb[c] += gv;
                dxh[c] = gv * gam[c];
                mean_d += dxh[c];
                mean_dx += dxh[c] * xhat[base + c];
            }
            if (!gx) continue;
            mean_d /= static_cast<T>(d);
            mean_dx /= static_cast<T>(d);
            for (int c = 0; c < d; ++c) gx[base + c] += inv_std[r] * (dxh[c] - mean_d - xhat[base + c] * mean_dx);
        }
    });
}

/// Scaled dot-product self-attention on token rows [B*T, D] split into `heads`
/// heads of width D/heads. Returns the concatenated per-head outputs [B*T, D].
/// When `weights` is non-null it receives the attention matrices, laid out
/// [B][heads][T][T].
template <typename T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, int tokens, int heads, std::vector<T>* weights = nullptr) {
    Tape<T>* tp = q.tape;
    detail::check_same_shape(q, k, "attention");
    detail::check_same_shape(q, v, "attention");
    require(q.value().rank() == 2 && q.dim(0) % tokens == 0, ErrorKind::ShapeMismatch, "attention: token rows " + detail::shp(q));
    const int d = q.dim(1);
    require(heads > 0 && d % heads == 0, ErrorKind::HeadDivisibility,
            "model dim " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
    const int b = q.dim(0) / tokens, dh = d / heads;
    const T sc = T(1) / std::sqrt(static_cast<T>(dh));
    const auto& Q = q.value();
    const auto& K = k.value();
    const auto& V = v.value();
    Tensor<T> out({b * tokens, d});
    std::vector<T> probs(static_cast<std::size_t>(b) * heads * tokens * tokens);
    for (int bi = 0; bi < b; ++bi)
        for (int hd = 0; hd < heads; ++hd) {
            T* P = probs.data() + (static_cast<std::size_t>(bi) * heads + hd) * tokens * tokens;
            for (int t = 0; t < tokens; ++t) {
                T mx = -std::numeric_limits<T>::infinity();
                for (int s = 0; s < tokens; ++s) {
                    T dot = 0;
                    for (int j = 0; j < dh; ++j) dot += Q.at(bi * tokens + t, hd * dh + j) * K.at(bi * tokens + s, hd * dh + j);
                    P[t * tokens + s] = dot * sc;
                    mx = std::max(mx, P[t * tokens + s]);
                }
                T z = 0;
                for (int s = 0; s < tokens; ++s) z += (P[t * tokens + s] = std::exp(P[t * tokens + s] - mx));
                for (int s = 0; s < tokens; ++s) P[t * tokens + s] /= z;
                for (int s = 0; s < tokens; ++s)
                    for (int j = 0; j < dh; ++j) out.at(bi * tokens + t, hd * dh + j) += P[t * tokens + s] * V.at(bi * tokens + s, hd * dh + j);
            }
        }
    if (weights) *weights = probs;
    const int iq = q.id, ik = k.id, iv = v.id;
    return tp->push(std::move(out), detail::any_grad({q, k, v}),
                    [tp, iq, ik, iv, b, heads, tokens, dh, sc, probs = std::move(probs)](int self) {
        const auto& g = tp->grad(self);
        const auto& Q = tp->value(iq);
        const auto& K = tp->value(ik);
        const auto& V = tp->value(iv);
        const int d = heads * dh;
        T* gq = detail::grad_ptr(tp, iq);
        T* gk = detail::grad_ptr(tp, ik);
        T* gv = detail::grad_ptr(tp, iv);
        std::vector<T> dP(static_cast<std::size_t>(tokens) * tokens), dS(dP.size());
        auto at = [d](int r, int c) { return static_cast<std::size_t>(r) * d + c; };
        for (int bi = 0; bi < b; ++bi)
            for (int hd = 0; hd < heads; ++hd) {
                const T* P = probs.data() + (static_cast<std::size_t>(bi) * heads + hd) * tokens * tokens;
                const int r0 = bi * tokens, c0 = hd * dh;
                for (int t = 0; t < tokens; ++t)
                    for (int s = 0; s < tokens; ++s) {
                        T acc = 0;
                        for (int j = 0; j < dh; ++j) acc += g[at(r0 + t, c0 + j)] * V[at(r0 + s, c0 + j)];
                        dP[t * tokens + s] = acc;
                        if (gv)
                            for (int j = 0; j < dh; ++j) gv[at(r0 + s, c0 + j)] += P[t * tokens + s] * g[at(r0 + t, c0 + j)];
                    }
                for (int t = 0; t < tokens; ++t) {
                    T dot = 0;
                    for (int s = 0; s < tokens; ++s) dot += P[t * tokens + s] * dP[t * tokens + s];
                    for (int s = 0; s < tokens; ++s) dS[t * tokens + s] = P[t * tokens + s] * (dP[t * tokens + s] - dot) * sc;
                }
                for (int t = 0; t < tokens; ++t)
                    for (int s = 0; s < tokens; ++s) {
                        const T ds = dS[t * tokens + s];
                        for (int j = 0; j < dh; ++j) {
                            if (gq) gq[at(r0 + t, c0 + j)] += ds * K[at(r0 + s, c0 + j)];
                            if (gk) gk[at(r0 + s, c0 + j)] += ds * Q[at(r0 + t, c0 + j)];
                        }
                    }
            }
    });
}

/// Per-item softmax-weighted average of T outputs: outputs [B, T] (or [B*T, 1]), logits [T] -> [B, 1].
template <typename T>
Var<T> weighted_average(Var<T> outputs, Var<T> logits) {
    Tape<T>* tp = outputs.tape;
    const int nt = static_cast<int>(logits.value().size());
    require(nt > 0 && outputs.value().size() % nt == 0, ErrorKind::ShapeMismatch,
            "weighted_average: outputs " + detail::shp(outputs) + " logits " + detail::shp(logits));
    const int b = static_cast<int>(outputs.value().size()) / nt;
    std::vector<T> w(nt);
    T mx = *std::max_element(logits.value().data.begin(), logits.value().data.end());
    T z = 0;
    for (int t = 0; t < nt; ++t) z += (w[t] = std::exp(logits.value()[t] - mx));
    for (auto& x : w) x /= z;
    Tensor<T> out({b, 1});
    for (int r = 0; r < b; ++r)
        for (int t = 0; t < nt; ++t) out[r] += w[t] * outputs.value()[static_cast<std::size_t>(r) * nt + t];
    const int io = outputs.id, il = logits.id;
    return tp->push(std::move(out), detail::any_grad({outputs, logits}), [tp, io, il, w = std::move(w), b, nt](int self) {
        const auto& g = tp->grad(self);
        const auto& o = tp->value(io);
        if (T* go = detail::grad_ptr(tp, io))
            for (int r = 0; r < b; ++r)
                for (int t = 0; t < nt; ++t) go[static_cast<std::size_t>(r) * nt + t] += g[r] * w[t];
        if (T* gl = detail::grad_ptr(tp, il))
            for (int r = 0; r < b; ++r) {
                T avg = 0;
                for (int t = 0; t < nt; ++t) avg += w[t] * o[static_cast<std::size_t>(r) * nt + t];
                for (int t = 0; t < nt; ++t) gl[t] += g[r] * w[t] * (o[static_cast<std::size_t>(r) * nt + t] - avg);
            }
    });
}

// ---------------------------------------------------------------------------
// Reductions and losses

template <typename T>
Var<T> sum(Var<T> a) {
    Tape<T>* tp = a.tape;
    T s = 0;
    for (T x : a.value().data) s += x;
    const int ia = a.id;
    return tp->push(Tensor<T>({1}, std::vector<T>{s}), a.needs_grad(), [tp, ia](int self) {
        const T g = tp->grad(self)[0];
        for (auto& x : tp->grad_buffer(ia).data) x += g;
    });
}

template <typename T>
Var<T> sum_squares(Var<T> a) {
    Tape<T>* tp = a.tape;
    T s = 0;
    for (T x : a.value().data) s += x * x;
    const int ia = a.id;
    return tp->push(Tensor<T>({1}, std::vector<T>{s}), a.needs_grad(), [tp, ia](int self) {
        const T g = tp->grad(self)[0];
        const auto& av = tp->value(ia);
        T* ga = tp->grad_buffer(ia).ptr();
        for (std::size_t i = 0; i < av.size(); ++i) ga[i] += T(2) * g * av[i];
    });
}

/// Mean squared error between predictions (any shape with n values) and targets.
template <typename T>
Var<T> mse(Var<T> preds, const std::vector<T>& targets) {
    Tape<T>* tp = preds.tape;
    const std::size_t n = preds.value().size();
    require(n == targets.size() && n > 0, ErrorKind::LengthMismatch,
            "mse: " + std::to_string(n) + " predictions vs " + std::to_string(targets.size()) + " targets");
    T s = 0;
    for (std::size_t i = 0; i < n; ++i) s += (preds.value()[i] - targets[i]) * (preds.value()[i] - targets[i]);
    const int ip = preds.id;
    return tp->push(Tensor<T>({1}, std::vector<T>{s / static_cast<T>(n)}), preds.needs_grad(), [tp, ip, targets, n](int self) {
        const T g = tp->grad(self)[0];
        const auto& p = tp->value(ip);
        T* gp = tp->grad_buffer(ip).ptr();
        for (std::size_t i = 0; i < n; ++i) gp[i] += g * T(2) * (p[i] - targets[i]) / static_cast<T>(n);
    });
}

}  // namespace tactile::nn
