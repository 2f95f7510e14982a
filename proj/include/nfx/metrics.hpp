#pragma once

#include <string>

#include "nfx/types.hpp"

namespace nfx {

/// Un-gated K-weighted loudness: -0.691 + 10*log10(mean z^2) over the whole
/// buffer, z = K-weighted signal. Needs >= 400 ms of audio.
double loudness_lufs(const AudioBuffer& buf);

/// |L(pred) - L(target)| in dB.
double loudness_error(const AudioBuffer& pred, const AudioBuffer& target);

/// 20*log10(peak/rms).
double crest_factor_db(const AudioBuffer& buf);
double crest_factor_error(const AudioBuffer& pred, const AudioBuffer& target);

/// Mean per-frame |rms_db(pred) - rms_db(target)|, eps 1e-9.
double rms_energy_error(const AudioBuffer& pred, const AudioBuffer& target, int frame = 2048,
                        int hop = 512);

/// MAE restricted to transient regions detected on the target via
/// spectral-flux onsets (STFT 1024/256, threshold median + 2*MAD, 50 ms
/// region per onset). 0 when no onsets fire.
double transient_error(const AudioBuffer& pred, const AudioBuffer& target);

/// Mean per-frame |centroid(pred) - centroid(target)| in Hz (STFT 2048/512).
double spectral_centroid_error(const AudioBuffer& pred, const AudioBuffer& target);

struct MetricReport {
    double esr = 0.0;
    double loudness_db = 0.0;
    double crest_db = 0.0;
    double rms_db = 0.0;
    double transient = 0.0;
    double centroid_hz = 0.0;
};

MetricReport compute_metrics(const AudioBuffer& pred, const AudioBuffer& target);

/// `{"esr": ..., "loudness_db": ..., "crest_db": ..., "rms_db": ...,
///   "transient": ..., "centroid_hz": ...}`
std::string metric_report_json(const MetricReport& report);

}  // namespace nfx
