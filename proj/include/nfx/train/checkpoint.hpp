#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nfx/model/model.hpp"
#include "nfx/train/config.hpp"

namespace nfx {

/// On-disk layout: magic "NFXC", u32 version, u64 header length, UTF-8 JSON
/// header (format version, config echo, parameter name/shape table, sample
/// rate, condition names and normalization ranges), then the raw payload of
/// little-endian float32 values concatenated in table order.
struct CheckpointInfo {
    TrainConfig config;
    std::vector<std::string> condition_names;
    std::vector<std::pair<double, double>> condition_ranges;
};

void save_checkpoint(const Model& model, const CheckpointInfo& info, const std::string& path);

struct LoadedCheckpoint {
    Model model;
    CheckpointInfo info;
};

/// Rebuilds the model from the config echo and restores the payload.
/// Throws VersionMismatch for unknown versions and CorruptPayload when the
/// payload length disagrees with the parameter table.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace nfx
