#include "nfx/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "nfx/dsp/filters.hpp"
#include "nfx/dsp/stft.hpp"
#include "nfx/errors.hpp"
#include "nfx/losses.hpp"

namespace nfx {

namespace {

constexpr double kRmsEps = 1e-9;

void check_same_rate(const AudioBuffer& a, const AudioBuffer& b) {
    if (a.sample_rate != b.sample_rate)
        throw SampleRateMismatch(std::to_string(a.sample_rate) + " vs " +
                                 std::to_string(b.sample_rate));
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid) - 1, v.end());
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

}  // namespace

double loudness_lufs(const AudioBuffer& buf) {
    if (buf.duration_seconds() < 0.4)
        throw TooShort("loudness needs >= 400 ms, got " +
                       std::to_string(buf.duration_seconds()) + " s");
    const auto kw = dsp::KWeighting::design(buf.sample_rate);
    const std::vector<double> z = kw.process(buf.samples);
    double acc = 0.0;
    for (double v : z) acc += v * v;
    acc /= static_cast<double>(z.size());
    return -0.691 + 10.0 * std::log10(acc + 1e-30);
}

double loudness_error(const AudioBuffer& pred, const AudioBuffer& target) {
    check_same_rate(pred, target);
    return std::abs(loudness_lufs(pred) - loudness_lufs(target));
}

double crest_factor_db(const AudioBuffer& buf) {
    double peak = 0.0, energy = 0.0;
    for (double v : buf.samples) {
        peak = std::max(peak, std::abs(v));
        energy += v * v;
    }
    const double rms = std::sqrt(energy / std::max<std::size_t>(1, buf.size()));
    if (rms <= 0.0 || peak <= 0.0) throw SilentSignal("crest factor of a silent buffer");
    return 20.0 * std::log10(peak / rms);
}

double crest_factor_error(const AudioBuffer& pred, const AudioBuffer& target) {
    return std::abs(crest_factor_db(pred) - crest_factor_db(target));
}

double rms_energy_error(const AudioBuffer& pred, const AudioBuffer& target, int frame,
                        int hop) {
    if (pred.size() != target.size())
        throw LengthMismatch("rms_energy_error: lengths differ");
    if (pred.size() < static_cast<std::size_t>(frame))
        throw TooShort("rms_energy_error needs >= " + std::to_string(frame) + " samples");
    const std::size_t frames = (pred.size() - static_cast<std::size_t>(frame)) /
                                   static_cast<std::size_t>(hop) + 1;
    double acc = 0.0;
    for (std::size_t f = 0; f < frames; ++f) {
        double ep = 0.0, et = 0.0;
        const std::size_t off = f * static_cast<std::size_t>(hop);
        for (int i = 0; i < frame; ++i) {
            ep += pred.samples[off + static_cast<std::size_t>(i)] *
                  pred.samples[off + static_cast<std::size_t>(i)];
            et += target.samples[off + static_cast<std::size_t>(i)] *
                  target.samples[off + static_cast<std::size_t>(i)];
        }
        const double rp = std::sqrt(ep / frame), rt = std::sqrt(et / frame);
        acc += std::abs(20.0 * std::log10(rp + kRmsEps) - 20.0 * std::log10(rt + kRmsEps));
    }
    return acc / static_cast<double>(frames);
}

double transient_error(const AudioBuffer& pred, const AudioBuffer& target) {
    if (pred.size() != target.size()) throw LengthMismatch("transient_error: lengths differ");
    check_same_rate(pred, target);
    const int fft = 1024, hop = 256;
    if (target.size() < static_cast<std::size_t>(fft)) return 0.0;  // no frames, no onsets

    const auto spec = dsp::stft(target, fft, hop);
    std::vector<double> flux(spec.num_frames, 0.0);
    for (std::size_t t = 1; t < spec.num_frames; ++t) {
        double acc = 0.0;
        for (std::size_t k = 0; k < spec.num_bins; ++k) {
            const double d = std::abs(spec.at(t, k)) - std::abs(spec.at(t - 1, k));
            if (d > 0.0) acc += d;
        }
        flux[t] = acc;
    }
    const double med = median_of(flux);
    std::vector<double> dev(flux.size());
    for (std::size_t i = 0; i < flux.size(); ++i) dev[i] = std::abs(flux[i] - med);
    const double mad = median_of(dev);
    const double threshold = med + 2.0 * mad;

    const auto region = static_cast<std::size_t>(0.05 * target.sample_rate);
    std::vector<char> mask(target.size(), 0);
    bool any = false;
    for (std::size_t t = 0; t < flux.size(); ++t) {
        if (flux[t] > threshold) {
            any = true;
            const std::size_t start = t * hop;
            const std::size_t stop = std::min(target.size(), start + region);
            std::fill(mask.begin() + static_cast<std::ptrdiff_t>(start),
                      mask.begin() + static_cast<std::ptrdiff_t>(stop), char(1));
        }
    }
    if (!any) return 0.0;
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) {
            acc += std::abs(pred.samples[i] - target.samples[i]);
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

double spectral_centroid_error(const AudioBuffer& pred, const AudioBuffer& target) {
    check_same_rate(pred, target);
    const int fft = 2048, hop = 512;
    if (pred.size() < static_cast<std::size_t>(fft) ||
        target.size() < static_cast<std::size_t>(fft))
        throw TooShort("spectral_centroid_error needs >= 2048 samples");
    const auto cp = dsp::spectral_centroid_frames(dsp::stft(pred, fft, hop));
    const auto ct = dsp::spectral_centroid_frames(dsp::stft(target, fft, hop));
    const std::size_t frames = std::min(cp.size(), ct.size());
    double acc = 0.0;
    for (std::size_t f = 0; f < frames; ++f) acc += std::abs(cp[f] - ct[f]);
    return acc / static_cast<double>(frames);
}

MetricReport compute_metrics(const AudioBuffer& pred, const AudioBuffer& target) {
    MetricReport r;
    r.esr = esr(pred.samples, target.samples).value;
    r.loudness_db = loudness_error(pred, target);
    r.crest_db = crest_factor_error(pred, target);
    r.rms_db = rms_energy_error(pred, target);
    r.transient = transient_error(pred, target);
    r.centroid_hz = spectral_centroid_error(pred, target);
    return r;
}

std::string metric_report_json(const MetricReport& r) {
    nlohmann::ordered_json doc;
    doc["esr"] = r.esr;
    doc["loudness_db"] = r.loudness_db;
    doc["crest_db"] = r.crest_db;
    doc["rms_db"] = r.rms_db;
    doc["transient"] = r.transient;
    doc["centroid_hz"] = r.centroid_hz;
    return doc.dump();
}

}  // namespace nfx
