#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nfx/manifest.hpp"
#include "nfx/types.hpp"

namespace nfx::fx {

/// y = tanh(g x) / tanh(g), g = 1 + 19 * gain_knob. Odd, bounded, memoryless.
AudioBuffer tanh_drive(const AudioBuffer& x, double gain_knob);

/// y = clamp(x, -threshold, threshold) / threshold.
AudioBuffer hard_clip(const AudioBuffer& x, double threshold);

/// One-pole lowpass with coeff = 0.99 * (1 - tone_knob); tone 1 is identity.
AudioBuffer one_pole_tone(const AudioBuffer& x, double tone_knob);

/// Feed-forward compressor with a one-pole peak detector. Never applies
/// positive gain.
AudioBuffer ff_compressor(const AudioBuffer& x, double threshold_db, double ratio,
                          double attack_ms, double release_ms);

/// Single-knob adapters used by dataset rendering and the analysis CLI.
/// compressor maps knob in [0, 1] to threshold_db = -40 + 30 * knob
/// (ratio 4, attack 5 ms, release 50 ms).
std::vector<std::string> reference_effect_names();
AudioBuffer apply_reference_effect(const std::string& name, const AudioBuffer& x, double knob);
std::string reference_effect_knob_name(const std::string& name);

/// Synthetic test corpus (sine bursts, noise bursts, click trains) totalling
/// roughly `seconds_total`, so the repository carries no audio assets.
std::vector<AudioBuffer> synth_test_corpus(int sample_rate, double seconds_total,
                                           std::uint64_t seed);

/// Renders input/target WAV pairs for every (corpus item x knob value),
/// writes them under out_dir and returns the saved manifest. Inputs pass
/// through a float32 round trip before the effect runs, so stored inputs and
/// targets correspond bit-exactly. Split assignment is a seeded shuffle over
/// entries with the given fractions; every split that gets a nonzero
/// fraction receives at least one entry when enough entries exist.
DatasetManifest render_dataset(const std::string& effect_name,
                               const std::vector<double>& knob_grid,
                               const std::vector<AudioBuffer>& corpus,
                               const std::string& out_dir, double train_frac,
                               double valid_frac, std::uint64_t seed);

}  // namespace nfx::fx
