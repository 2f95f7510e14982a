#pragma once

#include <utility>
#include <vector>

#include "nfx/types.hpp"

namespace nfx::dsp {

AudioBuffer generate_sine(double freq_hz, double amplitude, double duration_s, int sample_rate);

/// Exponential sweep from f1 to f2 over the given duration, plus the
/// per-sample instantaneous frequency trajectory in Hz.
std::pair<AudioBuffer, std::vector<double>> generate_exp_sweep(double f1_hz, double f2_hz,
                                                               double duration_s,
                                                               int sample_rate);

}  // namespace nfx::dsp
