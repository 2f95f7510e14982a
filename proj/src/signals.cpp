#include "nfx/dsp/signals.hpp"

#include <cmath>

#include "nfx/errors.hpp"

namespace nfx::dsp {

AudioBuffer generate_sine(double freq_hz, double amplitude, double duration_s,
                          int sample_rate) {
    if (!(freq_hz > 0.0 && freq_hz < sample_rate / 2.0))
        throw FrequencyOutOfRange("sine frequency " + std::to_string(freq_hz) + " at sr " +
                                  std::to_string(sample_rate));
    const auto len = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
    AudioBuffer buf(std::vector<double>(len), sample_rate);
    const double w = 2.0 * M_PI * freq_hz / sample_rate;
    for (std::size_t n = 0; n < len; ++n) buf.samples[n] = amplitude * std::sin(w * n);
    return buf;
}

std::pair<AudioBuffer, std::vector<double>> generate_exp_sweep(double f1_hz, double f2_hz,
                                                               double duration_s,
                                                               int sample_rate) {
    if (!(f1_hz > 0.0 && f1_hz < f2_hz && f2_hz < sample_rate / 2.0))
        throw FrequencyOutOfRange("sweep " + std::to_string(f1_hz) + " .. " +
                                  std::to_string(f2_hz) + " at sr " +
                                  std::to_string(sample_rate));
    const auto len = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
    const double ratio_log = std::log(f2_hz / f1_hz);
    const double scale = duration_s / ratio_log;  // seconds per e-fold
    AudioBuffer buf(std::vector<double>(len), sample_rate);
    std::vector<double> inst_freq(len);
    for (std::size_t n = 0; n < len; ++n) {
        const double t = static_cast<double>(n) / sample_rate;
        buf.samples[n] = std::sin(2.0 * M_PI * f1_hz * scale * (std::exp(t / scale) - 1.0));
        inst_freq[n] = f1_hz * std::exp(t / scale);
    }
    return {std::move(buf), std::move(inst_freq)};
}

}  // namespace nfx::dsp
