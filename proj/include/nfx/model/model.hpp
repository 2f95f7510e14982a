#pragma once

#include <vector>

#include "nfx/model/model_spec.hpp"
#include "nfx/nn/graph.hpp"
#include "nfx/nn/tensor.hpp"
#include "nfx/types.hpp"

namespace nfx {

/// Streaming state. reset() (or a fresh instance) is all zeros; the shape is
/// fixed by the spec: hidden vectors for the RNN family, a ring of trailing
/// input samples for the CNN family.
struct ModelState {
    std::vector<double> h;        // main hidden
    std::vector<double> c;        // lstm cell state
    std::vector<double> hyper_h;  // DynamicHyper cell hidden
    std::vector<double> context;  // CNN: last receptive_field-1 input samples

    void reset();
};

/// An effect model: one backbone plus one control mechanism, behind a single
/// streaming process() contract shared by training, evaluation and analysis.
class Model {
 public:
    Model() = default;
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    /// Deterministic parameter init under the seed; parameter count and name
    /// ordering are fixed by the spec alone.
    static Model build(const ModelSpec& spec, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }
    std::vector<nn::Parameter>& params() { return params_; }
    const std::vector<nn::Parameter>& params() const { return params_; }
    std::int64_t param_count() const;

    std::vector<double> flat_values() const;
    void set_flat_values(const std::vector<double>& flat);
    void zero_grads();

    ModelState init_state() const;

    /// Streaming forward: output length == input length; chunked calls with a
    /// carried state are exactly equivalent to one whole-buffer call.
    AudioBuffer process(const AudioBuffer& input, const ConditionVector& cond,
                        ModelState& state) const;

    // -- training graph builders ------------------------------------------

    /// CNN family. input covers context + segment; returns output id [T].
    nn::Graph::Id build_train_graph_cnn(nn::Graph& g, const std::vector<double>& input,
                                        const ConditionVector& cond) const;

    /// RNN family, one TBPTT chunk over a batch. Items sharing a condition
    /// vector run through one fused sequence op; the graph therefore exposes
    /// one output per condition group, each [Bg, T] with `items` giving the
    /// original batch index of every row.
    struct RnnChunkGraph {
        struct Group {
            nn::Graph::Id out = -1;
            std::vector<int> items;
        };
        std::vector<Group> groups;
    };

    /// x is [B, T] row-major raw input, one condition per item. h/c/hyper
    /// states are consumed as the (detached) initial state and overwritten
    /// with the post-chunk state.
    RnnChunkGraph build_train_graph_rnn(nn::Graph& g, const std::vector<double>& x, int B,
                                        int T, const std::vector<ConditionVector>& conds,
                                        std::vector<std::vector<double>>& h_state,
                                        std::vector<std::vector<double>>& c_state,
                                        std::vector<std::vector<double>>& hyper_state) const;

 private:
    friend struct ModelBuilder;

    int cell_input_dim() const;
    int cnn_input_channels() const;

    // parameter indices; -1 when absent
    struct BlockIdx {
        int conv_w = -1, conv_b = -1;
        int res_w = -1, res_b = -1;
        int skip_w = -1, skip_b = -1;  // gcn
        int alpha = -1;                // tcn prelu
        int film_w1 = -1, film_b1 = -1, film_w2 = -1, film_b2 = -1;
        int hyper_w1 = -1, hyper_b1 = -1, hyper_w2 = -1, hyper_b2 = -1;
    };

    ModelSpec spec_;
    std::vector<nn::Parameter> params_;
    std::vector<BlockIdx> blocks_;
    int inproj_w_ = -1, inproj_b_ = -1;
    int mix_w_ = -1, mix_b_ = -1;
    // rnn family
    int cell_w_ = -1, cell_u_ = -1, cell_b_ = -1;
    int out_w_ = -1, out_b_ = -1;
    int film_w1_ = -1, film_b1_ = -1, film_w2_ = -1, film_b2_ = -1;
    int hyper_w1_ = -1, hyper_b1_ = -1, hyper_w2_ = -1, hyper_b2_ = -1;
    int hcell_w_ = -1, hcell_u_ = -1, hcell_b_ = -1;
    int emit_w_ = -1, emit_b_ = -1;

    kernels::CellKind cell_kind() const;

    // plain (graph-free) helpers shared by the streaming path
    void film_eval(int w1, int b1, int w2, int b2, const ConditionVector& cond, int channels,
                   std::vector<double>& gamma, std::vector<double>& beta) const;
    std::vector<double> hyper_delta_eval(int w1, int b1, int w2, int b2,
                                         const ConditionVector& cond) const;
};

}  // namespace nfx
