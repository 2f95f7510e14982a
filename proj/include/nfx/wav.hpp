#pragma once

#include <string>

#include "nfx/types.hpp"

namespace nfx {

enum class WavFormat { pcm16, float32 };

/// Reads a RIFF/WAVE file: PCM 16/24-bit or IEEE float 32-bit, 1 or 2
/// channels. Stereo is downmixed by the arithmetic mean of the channels.
/// Integer PCM is scaled by 1 / 2^(bits-1).
AudioBuffer read_wav(const std::string& path);

/// Header-only probe: (sample_rate, frame_count) without decoding samples.
std::pair<int, std::size_t> wav_info(const std::string& path);

/// pcm16 rounds half away from zero and clamps to [-32768, 32767].
void write_wav(const std::string& path, const AudioBuffer& buf, WavFormat format);

}  // namespace nfx
