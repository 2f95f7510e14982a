#pragma once

#include <span>
#include <utility>
#include <vector>

#include "nfx/types.hpp"

namespace nfx {

enum class LossKind { esr, mae, mrstft, stft_complex, dc };
enum class PreEmphasisKind { none, highpass, lowpassed_highpass };

LossKind loss_kind_from_string(const std::string& s);
std::string loss_kind_to_string(LossKind k);

/// A weighted sum of loss terms with an optional pre-emphasis front end.
/// Pre-emphasis filters both signals identically before the time-domain
/// terms (esr, mae, dc); the spectral terms always see the raw signals.
struct LossSpec {
    struct Term {
        LossKind kind = LossKind::esr;
        double weight = 1.0;
    };
    std::vector<Term> terms;
    PreEmphasisKind pre_emphasis = PreEmphasisKind::none;
    double hp_coeff = 0.85;
    double lp_coeff = 0.85;
    std::vector<std::pair<int, int>> mrstft_resolutions = {{512, 128}, {1024, 256}, {2048, 512}};
    int stft_complex_fft = 1024;
    int stft_complex_hop = 256;

    void validate() const;

    static LossSpec single(LossKind kind) { return LossSpec{{{kind, 1.0}}}; }
};

/// Scalar loss plus its analytic gradient with respect to pred.
struct LossResult {
    double value = 0.0;
    std::vector<double> grad;
};

LossResult esr(std::span<const double> pred, std::span<const double> target);
LossResult mae(std::span<const double> pred, std::span<const double> target);
LossResult dc_loss(std::span<const double> pred, std::span<const double> target);
LossResult mrstft(std::span<const double> pred, std::span<const double> target,
                  const std::vector<std::pair<int, int>>& resolutions);
LossResult stft_complex(std::span<const double> pred, std::span<const double> target,
                        int fft_size, int hop);

/// The pre-emphasis chain alone, applied to both signals.
std::pair<std::vector<double>, std::vector<double>> apply_pre_emphasis(
    const LossSpec& spec, std::span<const double> pred, std::span<const double> target);

LossResult composite_loss(const LossSpec& spec, std::span<const double> pred,
                          std::span<const double> target);

}  // namespace nfx
