#include "nfx/model/model_spec.hpp"

#include "nfx/errors.hpp"

namespace nfx {

Backbone backbone_from_string(const std::string& s) {
    if (s == "tcn") return Backbone::tcn;
    if (s == "gcn") return Backbone::gcn;
    if (s == "rnn") return Backbone::rnn;
    if (s == "lstm") return Backbone::lstm;
    if (s == "gru") return Backbone::gru;
    throw UnsupportedSpec("unknown backbone '" + s + "'");
}

std::string backbone_to_string(Backbone b) {
    switch (b) {
        case Backbone::tcn: return "tcn";
        case Backbone::gcn: return "gcn";
        case Backbone::rnn: return "rnn";
        case Backbone::lstm: return "lstm";
        case Backbone::gru: return "gru";
    }
    return "?";
}

Conditioning conditioning_from_string(const std::string& s) {
    if (s == "concat") return Conditioning::concat;
    if (s == "film") return Conditioning::film;
    if (s == "static_hyper") return Conditioning::static_hyper;
    if (s == "dynamic_hyper") return Conditioning::dynamic_hyper;
    throw UnsupportedSpec("unknown conditioning '" + s + "'");
}

std::string conditioning_to_string(Conditioning c) {
    switch (c) {
        case Conditioning::concat: return "concat";
        case Conditioning::film: return "film";
        case Conditioning::static_hyper: return "static_hyper";
        case Conditioning::dynamic_hyper: return "dynamic_hyper";
    }
    return "?";
}

bool is_cnn(Backbone b) { return b == Backbone::tcn || b == Backbone::gcn; }

void validate_spec(const ModelSpec& spec) {
    if (spec.n_conds < 0) throw UnsupportedSpec("n_conds must be >= 0");
    if (spec.sample_rate <= 0) throw UnsupportedSpec("sample_rate must be positive");
    if (is_cnn(spec.backbone)) {
        if (spec.channels < 1 || spec.layers < 1 || spec.kernel < 1 || spec.dilation_growth < 1)
            throw UnsupportedSpec("CNN spec needs channels/layers/kernel >= 1 and growth >= 1");
        if (spec.conditioning == Conditioning::dynamic_hyper)
            throw UnsupportedSpec(
                "dynamic_hyper is defined per time step and has no CNN analogue; "
                "use static_hyper for " + backbone_to_string(spec.backbone));
        if (spec.cnn_activation != nn::Act::tanh && spec.cnn_activation != nn::Act::prelu)
            throw UnsupportedSpec("cnn activation must be tanh or prelu");
    } else {
        if (spec.hidden_size < 1) throw UnsupportedSpec("hidden_size must be >= 1");
    }
}

std::int64_t receptive_field(const ModelSpec& spec) {
    if (!is_cnn(spec.backbone)) return kInfiniteReceptiveField;
    std::int64_t dil_sum = 0, d = 1;
    for (int i = 0; i < spec.layers; ++i) {
        dil_sum += d;
        d *= spec.dilation_growth;
    }
    return 1 + static_cast<std::int64_t>(spec.kernel - 1) * dil_sum;
}

}  // namespace nfx
