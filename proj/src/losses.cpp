#include "nfx/losses.hpp"

#include <cmath>
#include <tuple>

#include "nfx/dsp/filters.hpp"
#include "nfx/dsp/stft.hpp"
#include "nfx/errors.hpp"

namespace nfx {

namespace {

constexpr double kLogEps = 1e-7;
constexpr double kTiny = 1e-12;

void check_pair(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size())
        throw LengthMismatch("pred " + std::to_string(pred.size()) + " vs target " +
                             std::to_string(target.size()));
    if (pred.empty()) throw LengthMismatch("empty signals");
}

AudioBuffer as_buffer(std::span<const double> x) {
    return AudioBuffer(std::vector<double>(x.begin(), x.end()), 48000);
}

}  // namespace

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "esr") return LossKind::esr;
    if (s == "mae") return LossKind::mae;
    if (s == "mrstft") return LossKind::mrstft;
    if (s == "stft_complex") return LossKind::stft_complex;
    if (s == "dc") return LossKind::dc;
    throw SchemaError("unknown loss kind '" + s + "'");
}

std::string loss_kind_to_string(LossKind k) {
    switch (k) {
        case LossKind::esr: return "esr";
        case LossKind::mae: return "mae";
        case LossKind::mrstft: return "mrstft";
        case LossKind::stft_complex: return "stft_complex";
        case LossKind::dc: return "dc";
    }
    return "?";
}

void LossSpec::validate() const {
    bool any_positive = false;
    for (const Term& t : terms) {
        if (!std::isfinite(t.weight) || t.weight < 0.0)
            throw SchemaError("loss weight must be finite and >= 0");
        any_positive = any_positive || t.weight > 0.0;
    }
    if (!any_positive) throw SchemaError("loss needs at least one term with weight > 0");
    if (pre_emphasis != PreEmphasisKind::none) {
        if (!(hp_coeff >= 0.0 && hp_coeff < 1.0))
            throw CoefficientOutOfRange("pre-emphasis hp_coeff");
        if (pre_emphasis == PreEmphasisKind::lowpassed_highpass &&
            !(std::abs(lp_coeff) < 1.0))
            throw CoefficientOutOfRange("pre-emphasis lp_coeff");
    }
}

LossResult esr(std::span<const double> pred, std::span<const double> target) {
    check_pair(pred, target);
    double den = 0.0;
    for (double t : target) den += t * t;
    if (den <= kTiny) throw SilentTarget("esr target energy underflow");
    double num = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = target[i] - pred[i];
        num += d * d;
    }
    LossResult r;
    r.value = num / den;
    r.grad.resize(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
        r.grad[i] = -2.0 * (target[i] - pred[i]) / den;
    return r;
}

LossResult mae(std::span<const double> pred, std::span<const double> target) {
    check_pair(pred, target);
    const double n = static_cast<double>(pred.size());
    LossResult r;
    r.grad.resize(pred.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        acc += std::abs(d);
        r.grad[i] = d > 0.0 ? 1.0 / n : (d < 0.0 ? -1.0 / n : 0.0);
    }
    r.value = acc / n;
    return r;
}

LossResult dc_loss(std::span<const double> pred, std::span<const double> target) {
    check_pair(pred, target);
    const double n = static_cast<double>(pred.size());
    double mt = 0.0, mp = 0.0, den = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        mt += target[i];
        mp += pred[i];
        den += target[i] * target[i];
    }
    mt /= n;
    mp /= n;
    den /= n;
    if (den <= kTiny) throw SilentTarget("dc target energy underflow");
    LossResult r;
    const double diff = mt - mp;
    r.value = diff * diff / den;
    r.grad.assign(pred.size(), -2.0 * diff / (n * den));
    return r;
}

namespace {

// Shared scaffolding for the spectral losses: computes the loss over the
// one-sided spectrograms and routes the complex-bin gradient back to samples.
template <typename LossFn>
LossResult spectral_loss(std::span<const double> pred, std::span<const double> target,
                         int fft_size, int hop, LossFn&& fn) {
    if (pred.size() < static_cast<std::size_t>(fft_size))
        throw SignalTooShort("need >= " + std::to_string(fft_size) + " samples, got " +
                             std::to_string(pred.size()));
    const dsp::Spectrogram sp = dsp::stft(as_buffer(pred), fft_size, hop);
    const dsp::Spectrogram st = dsp::stft(as_buffer(target), fft_size, hop);
    dsp::Spectrogram gs = sp;  // same geometry; holds dL/dP per bin
    std::fill(gs.frames.begin(), gs.frames.end(), std::complex<double>(0.0, 0.0));
    const double value = fn(sp, st, gs);
    LossResult r;
    r.value = value;
    r.grad = dsp::stft_adjoint(gs, pred.size());
    return r;
}

}  // namespace

LossResult mrstft(std::span<const double> pred, std::span<const double> target,
                  const std::vector<std::pair<int, int>>& resolutions) {
    check_pair(pred, target);
    if (resolutions.empty()) throw SchemaError("mrstft needs at least one resolution");
    LossResult total;
    total.grad.assign(pred.size(), 0.0);
    const double rscale = 1.0 / static_cast<double>(resolutions.size());
    for (const auto& [fft_size, hop] : resolutions) {
        LossResult one = spectral_loss(
            pred, target, fft_size, hop,
            [&](const dsp::Spectrogram& sp, const dsp::Spectrogram& st, dsp::Spectrogram& gs) {
                const std::size_t count = sp.frames.size();
                double sc_num2 = 0.0, sc_den2 = 0.0, lm = 0.0;
                for (std::size_t i = 0; i < count; ++i) {
                    const double mp = std::abs(sp.frames[i]);
                    const double mt = std::abs(st.frames[i]);
                    const double d = mt - mp;
                    sc_num2 += d * d;
                    sc_den2 += mt * mt;
                    lm += std::abs(std::log(mt + kLogEps) - std::log(mp + kLogEps));
                }
                const double sc_num = std::sqrt(sc_num2);
                const double sc_den = std::sqrt(sc_den2);
                const double sc = sc_den > kTiny ? sc_num / sc_den : 0.0;
                lm /= static_cast<double>(count);

                for (std::size_t i = 0; i < count; ++i) {
                    const double mp = std::abs(sp.frames[i]);
                    const double mt = std::abs(st.frames[i]);
                    double dmag = 0.0;
                    if (sc_num > kTiny && sc_den > kTiny)
                        dmag += (mp - mt) / (sc_num * sc_den);
                    const double logdiff = std::log(mp + kLogEps) - std::log(mt + kLogEps);
                    const double sgn = logdiff > 0.0 ? 1.0 : (logdiff < 0.0 ? -1.0 : 0.0);
                    dmag += sgn / ((mp + kLogEps) * static_cast<double>(count));
                    if (mp > kTiny) gs.frames[i] = dmag / mp * sp.frames[i];
                }
                return sc + lm;
            });
        total.value += rscale * one.value;
        for (std::size_t i = 0; i < total.grad.size(); ++i)
            total.grad[i] += rscale * one.grad[i];
    }
    return total;
}

LossResult stft_complex(std::span<const double> pred, std::span<const double> target,
                        int fft_size, int hop) {
    check_pair(pred, target);
    return spectral_loss(
        pred, target, fft_size, hop,
        [&](const dsp::Spectrogram& sp, const dsp::Spectrogram& st, dsp::Spectrogram& gs) {
            const double count = static_cast<double>(sp.frames.size());
            double acc = 0.0;
            for (std::size_t i = 0; i < sp.frames.size(); ++i) {
                const std::complex<double> d = st.frames[i] - sp.frames[i];
                acc += std::abs(d.real()) + std::abs(d.imag());
                const double sr = d.real() > 0.0 ? -1.0 : (d.real() < 0.0 ? 1.0 : 0.0);
                const double si = d.imag() > 0.0 ? -1.0 : (d.imag() < 0.0 ? 1.0 : 0.0);
                gs.frames[i] = std::complex<double>(sr / count, si / count);
            }
            return acc / count;
        });
}

std::pair<std::vector<double>, std::vector<double>> apply_pre_emphasis(
    const LossSpec& spec, std::span<const double> pred, std::span<const double> target) {
    check_pair(pred, target);
    if (spec.pre_emphasis == PreEmphasisKind::none)
        return {std::vector<double>(pred.begin(), pred.end()),
                std::vector<double>(target.begin(), target.end())};
    auto run = [&](std::span<const double> x) {
        AudioBuffer b = as_buffer(x);
        b = dsp::one_pole_filter(b, dsp::OnePoleKind::highpass_pre_emph, spec.hp_coeff);
        if (spec.pre_emphasis == PreEmphasisKind::lowpassed_highpass)
            b = dsp::one_pole_filter(b, dsp::OnePoleKind::lowpass, spec.lp_coeff);
        return std::move(b.samples);
    };
    return {run(pred), run(target)};
}

namespace {

std::vector<double> pre_emphasis_adjoint(const LossSpec& spec, std::vector<double> grad) {
    if (spec.pre_emphasis == PreEmphasisKind::none) return grad;
    // forward chain was hp (then lp); adjoints apply in reverse order
    if (spec.pre_emphasis == PreEmphasisKind::lowpassed_highpass)
        grad = dsp::one_pole_adjoint(dsp::OnePoleKind::lowpass, spec.lp_coeff, grad);
    return dsp::one_pole_adjoint(dsp::OnePoleKind::highpass_pre_emph, spec.hp_coeff, grad);
}

bool is_time_domain(LossKind kind) {
    return kind == LossKind::esr || kind == LossKind::mae || kind == LossKind::dc;
}

}  // namespace

LossResult composite_loss(const LossSpec& spec, std::span<const double> pred,
                          std::span<const double> target) {
    spec.validate();
    check_pair(pred, target);

    std::vector<double> fpred, ftarget;
    bool filtered_ready = false;

    LossResult total;
    total.grad.assign(pred.size(), 0.0);
    for (const LossSpec::Term& term : spec.terms) {
        if (term.weight == 0.0) continue;
        LossResult one;
        if (is_time_domain(term.kind) && spec.pre_emphasis != PreEmphasisKind::none) {
            if (!filtered_ready) {
                std::tie(fpred, ftarget) = apply_pre_emphasis(spec, pred, target);
                filtered_ready = true;
            }
            switch (term.kind) {
                case LossKind::esr: one = esr(fpred, ftarget); break;
                case LossKind::mae: one = mae(fpred, ftarget); break;
                default: one = dc_loss(fpred, ftarget); break;
            }
            one.grad = pre_emphasis_adjoint(spec, std::move(one.grad));
        } else {
            switch (term.kind) {
                case LossKind::esr: one = esr(pred, target); break;
                case LossKind::mae: one = mae(pred, target); break;
                case LossKind::dc: one = dc_loss(pred, target); break;
                case LossKind::mrstft: one = mrstft(pred, target, spec.mrstft_resolutions); break;
                case LossKind::stft_complex:
                    one = stft_complex(pred, target, spec.stft_complex_fft, spec.stft_complex_hop);
                    break;
            }
        }
        total.value += term.weight * one.value;
        for (std::size_t i = 0; i < total.grad.size(); ++i)
            total.grad[i] += term.weight * one.grad[i];
    }
    return total;
}

}  // namespace nfx
