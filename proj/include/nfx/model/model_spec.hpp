#pragma once

#include <cstdint>
#include <string>

#include "nfx/nn/graph.hpp"

namespace nfx {

enum class Backbone { tcn, gcn, rnn, lstm, gru };
enum class Conditioning { concat, film, static_hyper, dynamic_hyper };

Backbone backbone_from_string(const std::string& s);
std::string backbone_to_string(Backbone b);
Conditioning conditioning_from_string(const std::string& s);
std::string conditioning_to_string(Conditioning c);

bool is_cnn(Backbone b);

/// Declarative architecture description; everything a checkpoint needs to
/// re-instantiate a model.
struct ModelSpec {
    Backbone backbone = Backbone::gru;
    Conditioning conditioning = Conditioning::concat;
    int n_conds = 0;
    int channels = 8;          // CNN width
    int layers = 4;            // CNN depth
    int kernel = 3;            // CNN kernel size
    int dilation_growth = 2;   // CNN dilation base
    int hidden_size = 16;      // RNN width
    int sample_rate = 44100;
    nn::Act cnn_activation = nn::Act::tanh;  // TCN block activation: tanh or prelu

    // fixed generator widths
    static constexpr int film_hidden = 16;
    static constexpr int hyper_hidden = 16;
    static constexpr int dyn_hyper_hidden = 8;
};

/// Throws UnsupportedSpec on invalid field values or the disallowed
/// CNN x dynamic_hyper combination.
void validate_spec(const ModelSpec& spec);

constexpr std::int64_t kInfiniteReceptiveField = INT64_MAX;

/// 1 + (kernel-1) * sum growth^i for the CNN family; the RNN family reports
/// the infinite sentinel.
std::int64_t receptive_field(const ModelSpec& spec);

}  // namespace nfx
