#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "nfx/kernels/kernels.hpp"
#include "nfx/nn/tensor.hpp"

namespace nfx::nn {

enum class Act { tanh, sigmoid, relu, prelu };

/// Reverse-mode differentiation on a recorded linear tape. Every op computes
/// its forward value immediately and pushes one backward closure; backward()
/// replays the tape in reverse. There is no graph engine: the op set is the
/// closed list below, which is exactly what the backbones, conditioners and
/// losses need.
///
/// Gradients of Parameter leaves are accumulated into Parameter::grad at the
/// end of backward(), in registration order, so running two backward passes
/// without zeroing yields the exact sum of the individual gradients.
class Graph {
 public:
    using Id = int;

    Id leaf(Tensor t);            // differentiable non-parameter leaf
    Id constant(Tensor t);        // data: no gradient tracked
    Id param(Parameter* p);       // shares storage with the parameter

    Id add(Id a, Id b);
    Id mul(Id a, Id b);
    Id add_scalar(Id a, double c);
    Id scale(Id a, double c);

    /// out[c, t] = gamma[c] * x[c, t] + beta[c]  (FiLM application)
    Id affine_rows(Id x, Id gamma, Id beta);

    /// x: [B, I], w: [O, I], b: [O] -> [B, O]
    Id linear(Id x, Id w, Id b);

    /// x: [IC, T], w: [OC, IC, K], b: [OC] -> [OC, T] causal with left zero pad
    Id conv1d(Id x, Id w, Id b, int dilation);

    Id activation(Id x, Act kind, Id alpha = -1);

    Id slice_rows(Id x, int from, int count);   // [C, T] -> [count, T]
    Id concat_rows(Id a, Id b);                 // stack along the channel axis
    Id slice_vec(Id x, int from, int count);    // 1-D slice
    Id concat_vec(Id a, Id b);

    Id reshape(Id x, std::vector<int> shape);

    /// Fused batched recurrence. x: [B, T, I] (typically a constant),
    /// h0/c0: [B, H]. Returns h_all [B, T, H]. Optional FiLM gamma/beta of
    /// length G*H modulate the input projection. Final hidden (and cell)
    /// state is copied into *hT / *cT when provided; state carry across
    /// truncation boundaries is detached by construction.
    Id cell_sequence(kernels::CellKind kind, Id x, Id w, Id u, Id b, Id gamma, Id beta,
                     Id h0, Id c0, std::vector<double>* hT = nullptr,
                     std::vector<double>* cT = nullptr);

    /// One recurrent step on a packed state ([H] for vanilla/gru, [2H] = h|c
    /// for lstm). Optional sw/su row scales realize the per-step
    /// hypernetwork. Returns the new packed state.
    Id cell_step(kernels::CellKind kind, Id x, Id state, Id w, Id u, Id b, Id sw = -1,
                 Id su = -1);

    void backward(Id out, const Tensor& seed);

    /// Multi-output backward: all seeds are planted, then the tape is
    /// replayed once. Used when a batch is split into condition groups.
    void backward(const std::vector<std::pair<Id, Tensor>>& seeds);

    const Tensor& val(Id id) const;
    const Tensor& grad(Id id) const;
    bool needs_grad(Id id) const { return nodes_[static_cast<std::size_t>(id)].needs; }

 private:
    struct Node {
        Tensor owned;
        const Tensor* ext = nullptr;  // set for parameter nodes
        Parameter* pref = nullptr;
        Tensor grad;
        bool needs = false;
    };

    Id push(Tensor value, bool needs);
    const Tensor& v(Id id) const { return val(id); }
    Tensor& g(Id id) { return nodes_[static_cast<std::size_t>(id)].grad; }

    std::vector<Node> nodes_;
    std::vector<std::function<void()>> tape_;
    std::unordered_map<Parameter*, Id> param_ids_;
};

}  // namespace nfx::nn
