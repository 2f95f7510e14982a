#include "nfx/dsp/filters.hpp"

#include <cmath>

#include "nfx/errors.hpp"

namespace nfx::dsp {

AudioBuffer one_pole_filter(const AudioBuffer& buf, OnePoleKind kind, double coeff) {
    AudioBuffer out(std::vector<double>(buf.size()), buf.sample_rate);
    if (kind == OnePoleKind::highpass_pre_emph) {
        if (!(coeff >= 0.0 && coeff < 1.0))
            throw CoefficientOutOfRange("pre-emphasis coeff " + std::to_string(coeff));
        double prev = 0.0;
        for (std::size_t n = 0; n < buf.size(); ++n) {
            out.samples[n] = buf.samples[n] - coeff * prev;
            prev = buf.samples[n];
        }
    } else {
        if (!(std::abs(coeff) < 1.0))
            throw CoefficientOutOfRange("lowpass coeff " + std::to_string(coeff));
        double y = 0.0;
        for (std::size_t n = 0; n < buf.size(); ++n) {
            y = (1.0 - coeff) * buf.samples[n] + coeff * y;
            out.samples[n] = y;
        }
    }
    return out;
}

std::vector<double> one_pole_adjoint(OnePoleKind kind, double coeff,
                                     const std::vector<double>& dy) {
    const std::size_t n = dy.size();
    std::vector<double> dx(n, 0.0);
    if (kind == OnePoleKind::highpass_pre_emph) {
        // y[n] = x[n] - c x[n-1]  =>  dx[n] = dy[n] - c dy[n+1]
        for (std::size_t i = 0; i < n; ++i) {
            double v = dy[i];
            if (i + 1 < n) v -= coeff * dy[i + 1];
            dx[i] = v;
        }
    } else {
        // y[n] = (1-c) x[n] + c y[n-1]: reverse-time state s[n] = dy[n] + c s[n+1]
        double s = 0.0;
        for (std::size_t i = n; i-- > 0;) {
            s = dy[i] + coeff * s;
            dx[i] = (1.0 - coeff) * s;
        }
    }
    return dx;
}

std::vector<double> Biquad::process(const std::vector<double>& x) const {
    std::vector<double> y(x.size());
    double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double v = b0 * x[n] + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = x[n];
        y2 = y1;
        y1 = v;
        y[n] = v;
    }
    return y;
}

KWeighting KWeighting::design(double fs) {
    KWeighting kw;
    {
        // high shelf stage; analog prototype recovered from the 48 kHz table
        const double db = 3.999843853973347;
        const double f0 = 1681.974450955533;
        const double q = 0.7071752369554196;
        const double k = std::tan(M_PI * f0 / fs);
        const double vh = std::pow(10.0, db / 20.0);
        const double vb = std::pow(vh, 0.4996667741545416);
        const double a0 = 1.0 + k / q + k * k;
        kw.shelf.b0 = (vh + vb * k / q + k * k) / a0;
        kw.shelf.b1 = 2.0 * (k * k - vh) / a0;
        kw.shelf.b2 = (vh - vb * k / q + k * k) / a0;
        kw.shelf.a1 = 2.0 * (k * k - 1.0) / a0;
        kw.shelf.a2 = (1.0 - k / q + k * k) / a0;
    }
    {
        // RLB high-pass stage
        const double f0 = 38.13547087602444;
        const double q = 0.5003270373238773;
        const double k = std::tan(M_PI * f0 / fs);
        const double a0 = 1.0 + k / q + k * k;
        kw.highpass.b0 = 1.0;
        kw.highpass.b1 = -2.0;
        kw.highpass.b2 = 1.0;
        kw.highpass.a1 = 2.0 * (k * k - 1.0) / a0;
        kw.highpass.a2 = (1.0 - k / q + k * k) / a0;
    }
    return kw;
}

std::vector<double> KWeighting::process(const std::vector<double>& x) const {
    return highpass.process(shelf.process(x));
}

}  // namespace nfx::dsp
