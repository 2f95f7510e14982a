#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "nfx/errors.hpp"

namespace nfx {

/// Mono sample sequence plus its sample rate. The common currency for every
/// signal in the toolkit. Samples are nominally in [-1, 1] but nothing clamps.
struct AudioBuffer {
    std::vector<double> samples;
    int sample_rate = 0;

    AudioBuffer() = default;
    AudioBuffer(std::vector<double> s, int sr) : samples(std::move(s)), sample_rate(sr) {}

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    double duration_seconds() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }

    /// Throws if the sample rate is nonpositive or any sample is non-finite.
    void validate() const {
        if (sample_rate <= 0) throw Error("AudioBuffer: sample_rate must be positive");
        for (double s : samples) {
            if (!std::isfinite(s)) throw Error("AudioBuffer: non-finite sample");
        }
    }
};

/// Normalized effect-control values in [-1, 1], one per conditioned knob.
struct ConditionVector {
    std::vector<double> values;

    ConditionVector() = default;
    explicit ConditionVector(std::vector<double> v) : values(std::move(v)) {}

    std::size_t size() const { return values.size(); }
};

}  // namespace nfx
