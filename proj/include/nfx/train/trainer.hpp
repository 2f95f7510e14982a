#pragma once

#include <string>
#include <vector>

#include "nfx/analysis/analysis.hpp"
#include "nfx/manifest.hpp"
#include "nfx/metrics.hpp"
#include "nfx/train/checkpoint.hpp"
#include "nfx/train/config.hpp"

namespace nfx {

struct TrainResult {
    std::string checkpoint_path;
    std::string log_path;
    std::string config_echo_path;
    double best_valid_loss = 0.0;
    int steps_run = 0;
};

/// Runs the full training workflow: loads and segments the dataset, trains
/// with Adam (TBPTT for the RNN family), tracks the best validation loss and
/// writes checkpoint + CSV log + config echo into config.out_dir. Fully
/// deterministic for a fixed (config, seed, platform).
TrainResult train(const TrainConfig& config);

struct EvalResult {
    std::vector<MetricReport> entries;
    std::vector<std::string> entry_inputs;
    MetricReport aggregate;
    std::string report_path;
};

/// Renders every entry of the split with the streaming forward path and
/// reports the configured metrics per entry plus aggregate means. Writes the
/// JSON report to report_path (empty = <out_dir of checkpoint>/metrics.json).
EvalResult evaluate(const std::string& checkpoint_path, const std::string& manifest_path,
                    Split split, const std::string& report_path = "");

/// Streaming render of a whole buffer through a model in fixed-size chunks.
AudioBuffer render_streaming(const Model& model, const AudioBuffer& input,
                             const ConditionVector& cond, std::size_t chunk = 8192);

/// analysis::Processor over a trained model; conditions arrive in raw device
/// units and are normalized with the checkpoint's stored ranges.
class ModelProcessor : public analysis::Processor {
 public:
    explicit ModelProcessor(LoadedCheckpoint checkpoint);
    int sample_rate() const override;
    AudioBuffer process(const AudioBuffer& input, const ConditionVector& cond_raw) override;

 private:
    LoadedCheckpoint ckpt_;
    DatasetManifest norm_;  // carries names/ranges for normalize_condition
};

/// analysis::Processor over a reference effect; cond carries the single raw
/// knob value (missing = 0.5).
class EffectProcessor : public analysis::Processor {
 public:
    EffectProcessor(std::string name, int sample_rate);
    int sample_rate() const override;
    AudioBuffer process(const AudioBuffer& input, const ConditionVector& cond) override;

 private:
    std::string name_;
    int sample_rate_;
};

}  // namespace nfx
