#pragma once

// Test-only oracles, independent of the library code paths they check.

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "nfx/nn/rng.hpp"

namespace oracles {

// O(N^2) DFT, the reference for the radix-2 fft.
inline std::vector<std::complex<double>> naive_dft(
    const std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(t) /
                               static_cast<double>(n);
            acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

// Windowed DFT at a single bin, evaluated by direct summation.
inline std::complex<double> naive_windowed_bin(const std::vector<double>& frame,
                                               const std::vector<double>& window,
                                               std::size_t bin) {
    const std::size_t n = frame.size();
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        const double ang = -2.0 * M_PI * static_cast<double>(bin) * static_cast<double>(t) /
                           static_cast<double>(n);
        acc += frame[t] * window[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    return acc;
}

struct FdFailure {
    std::size_t index = 0;
    double fd = 0.0;
    double analytic = 0.0;
    double err = 0.0;
};

// Central finite differences against an analytic gradient. `storage` is the
// live buffer the loss reads from; it is restored exactly after each probe.
// Error metric: |fd - analytic| / max(1, |fd|, |analytic|).
inline bool check_gradient(std::vector<double>& storage, const std::vector<double>& analytic,
                           const std::function<double()>& loss, double h, double tol,
                           FdFailure* failure = nullptr) {
    for (std::size_t i = 0; i < storage.size(); ++i) {
        const double saved = storage[i];
        storage[i] = saved + h;
        const double lp = loss();
        storage[i] = saved - h;
        const double lm = loss();
        storage[i] = saved;
        const double fd = (lp - lm) / (2.0 * h);
        const double denom = std::max({1.0, std::abs(fd), std::abs(analytic[i])});
        const double err = std::abs(fd - analytic[i]) / denom;
        if (err > tol) {
            if (failure) *failure = {i, fd, analytic[i], err};
            return false;
        }
    }
    return true;
}

inline std::vector<double> random_vector(nfx::nn::Rng& rng, std::size_t n, double lo = -1.0,
                                         double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.next_uniform(lo, hi);
    return v;
}

}  // namespace oracles
