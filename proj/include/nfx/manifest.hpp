#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nfx/types.hpp"

namespace nfx {

enum class Split { train, valid, test };

Split split_from_string(const std::string& s);
std::string split_to_string(Split s);

/// The standardized dataset template: paired input/target WAV files, raw
/// condition values in device units, and a split tag per entry.
struct DatasetManifest {
    struct Entry {
        std::string input_path;
        std::string target_path;
        std::vector<double> condition_raw;
        Split split = Split::train;
    };

    int sample_rate = 0;
    std::vector<std::string> condition_names;
    std::vector<std::pair<double, double>> condition_ranges;  // (min, max) per knob
    std::vector<Entry> entries;
    std::string base_dir;  // directory of the manifest file; relative paths resolve here

    std::string resolve(const std::string& path) const;
};

/// Parses and eagerly validates a manifest: every referenced file is opened,
/// its header checked against the manifest sample rate, and input/target
/// lengths compared.
DatasetManifest load_manifest(const std::string& path);

/// Serialization used by render_dataset.
void save_manifest(const DatasetManifest& manifest, const std::string& path);

/// Affine map from [min, max] to [-1, 1] per coordinate; fixed knobs
/// (min == max) map to 0. Raw values outside the range by more than 1e-9
/// are rejected.
ConditionVector normalize_condition(const DatasetManifest& manifest,
                                    const std::vector<double>& raw);

/// A training example: `input` carries context_len warmup samples before the
/// segment, `target` is the aligned segment alone.
struct Segment {
    AudioBuffer input;   // context_len + segment_len samples
    AudioBuffer target;  // segment_len samples
    ConditionVector condition;
    std::size_t source_entry = 0;
};

struct SegmentationResult {
    std::vector<Segment> segments;
    std::size_t skipped_entries = 0;  // entries shorter than segment_len
};

SegmentationResult segment_dataset(const DatasetManifest& manifest, Split split,
                                   std::size_t segment_len, std::size_t context_len,
                                   std::size_t hop);

}  // namespace nfx
