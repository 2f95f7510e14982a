#pragma once

#include <vector>

#include "nfx/types.hpp"

namespace nfx::dsp {

enum class OnePoleKind {
    highpass_pre_emph,  // y[n] = x[n] - coeff * x[n-1]
    lowpass,            // y[n] = (1 - coeff) * x[n] + coeff * y[n-1]
};

AudioBuffer one_pole_filter(const AudioBuffer& buf, OnePoleKind kind, double coeff);

/// Adjoint of one_pole_filter for loss backprop: given dL/dy returns dL/dx.
std::vector<double> one_pole_adjoint(OnePoleKind kind, double coeff,
                                     const std::vector<double>& dy);

/// Direct form I biquad; a0 normalized to 1.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;

    std::vector<double> process(const std::vector<double>& x) const;
};

/// The two-stage K-weighting prefilter (high shelf + high-pass) with
/// coefficients re-derived for an arbitrary sample rate from the 48 kHz
/// reference response via the bilinear transform.
struct KWeighting {
    Biquad shelf;
    Biquad highpass;

    static KWeighting design(double sample_rate);
    std::vector<double> process(const std::vector<double>& x) const;
};

}  // namespace nfx::dsp
