#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "nfx/types.hpp"

namespace nfx::dsp {

/// One-sided complex STFT frames. Hann window, non-centered: frame t covers
/// samples [t*hop, t*hop + fft_size). Trailing partial frames are dropped.
struct Spectrogram {
    std::size_t num_frames = 0;
    std::size_t num_bins = 0;  // fft_size/2 + 1
    int fft_size = 0;
    int hop = 0;
    int sample_rate = 0;
    std::vector<std::complex<double>> frames;  // num_frames * num_bins, row-major

    std::complex<double>& at(std::size_t frame, std::size_t bin) {
        return frames[frame * num_bins + bin];
    }
    const std::complex<double>& at(std::size_t frame, std::size_t bin) const {
        return frames[frame * num_bins + bin];
    }
    double bin_hz(std::size_t bin) const {
        return static_cast<double>(bin) * sample_rate / fft_size;
    }
};

/// Periodic Hann window of length n.
std::vector<double> hann_window(int n);

std::size_t stft_frame_count(std::size_t signal_len, int fft_size, int hop);

Spectrogram stft(const AudioBuffer& buf, int fft_size, int hop);

/// Per-frame spectral centroid in Hz; frames with total magnitude below 1e-12
/// report 0.
std::vector<double> spectral_centroid_frames(const Spectrogram& spec);

/// Adjoint of stft: given dL/dX for every one-sided bin (grad_spec.frames,
/// with d/dRe + i*d/dIm convention), accumulate dL/dx over a signal of
/// signal_len samples. Used by the spectral losses.
std::vector<double> stft_adjoint(const Spectrogram& grad_spec, std::size_t signal_len);

}  // namespace nfx::dsp
