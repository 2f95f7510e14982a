#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nfx/losses.hpp"
#include "nfx/model/model_spec.hpp"

namespace nfx {

/// Everything a run needs, parsed from one YAML file. Unknown keys anywhere
/// in the document are hard errors.
struct TrainConfig {
    ModelSpec model;
    LossSpec loss;

    struct Data {
        std::string manifest;
        int segment_len = 4096;
        int context_len = -1;  // -1: receptive_field-1 for CNNs, 256 for RNNs
        int hop = -1;          // -1: segment_len
    } data;

    struct Train {
        double lr = 0.005;
        int batch_size = 16;
        int max_steps = 2000;
        int valid_every = 100;
        int valid_segments = 64;  // 0 = use every validation segment
        std::uint64_t seed = 42;
        int tbptt_len = 1024;
        double grad_clip_norm = 0.0;  // 0 = off
        int lr_decay_every = 0;       // 0 = constant lr
        double lr_decay_factor = 1.0;
    } train;

    std::vector<std::string> eval_metrics = {"esr",  "loudness", "crest",
                                             "rms",  "transient", "centroid"};
    std::string out_dir = "runs/run";

    int resolved_context_len() const;
    int resolved_hop() const;
};

/// Parses and validates; throws SchemaError/UnknownKey/UnsupportedSpec with
/// the offending key path.
TrainConfig parse_config(const std::string& path);

/// Round-trippable JSON echo (stored in checkpoints and run directories).
std::string config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const std::string& json_text);

}  // namespace nfx
