#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "nfx/dsp/fft.hpp"
#include "nfx/dsp/filters.hpp"
#include "nfx/dsp/signals.hpp"
#include "nfx/dsp/stft.hpp"
#include "nfx/errors.hpp"
#include "nfx/nn/rng.hpp"
#include "oracles.hpp"

using namespace nfx;

TEST_CASE("fft of unit impulse and constant") {
    std::vector<dsp::cplx> impulse = {{1, 0}, {0, 0}, {0, 0}, {0, 0}};
    auto spec = dsp::fft(impulse);
    for (const auto& v : spec) {
        CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(v.imag() == doctest::Approx(0.0).epsilon(1e-12));
    }
    std::vector<dsp::cplx> ones(4, {1, 0});
    auto spec2 = dsp::fft(ones);
    CHECK(spec2[0].real() == doctest::Approx(4.0));
    for (int k = 1; k < 4; ++k) CHECK(std::abs(spec2[static_cast<std::size_t>(k)]) < 1e-12);
}

TEST_CASE("fft matches naive dft on random inputs for all power-of-two sizes") {
    nn::Rng rng(7);
    for (std::size_t n = 1; n <= 1024; n *= 2) {
        for (int rep = 0; rep < 5; ++rep) {
            std::vector<dsp::cplx> x(n);
            for (auto& v : x) v = {rng.next_uniform(-1, 1), rng.next_uniform(-1, 1)};
            const auto ref = oracles::naive_dft(x);
            const auto out = dsp::fft(x);
            double max_err = 0.0;
            for (std::size_t k = 0; k < n; ++k) max_err = std::max(max_err, std::abs(out[k] - ref[k]));
            CHECK(max_err < 1e-6);
        }
    }
}

TEST_CASE("ifft inverts fft within 1e-9") {
    nn::Rng rng(11);
    std::vector<dsp::cplx> x(256);
    for (auto& v : x) v = {rng.next_uniform(-1, 1), rng.next_uniform(-1, 1)};
    const auto back = dsp::ifft(dsp::fft(x));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back[i] - x[i]) < 1e-9);
}

TEST_CASE("fft rejects non-power-of-two lengths") {
    std::vector<dsp::cplx> x(6);
    CHECK_THROWS_AS(dsp::fft(x), NonPowerOfTwo);
}

TEST_CASE("parseval holds at 1e-6 relative") {
    nn::Rng rng(13);
    for (std::size_t n : {16u, 256u, 4096u}) {
        std::vector<dsp::cplx> x(n);
        for (auto& v : x) v = {rng.next_uniform(-1, 1), 0.0};
        double time_e = 0.0;
        for (const auto& v : x) time_e += std::norm(v);
        const auto spec = dsp::fft(x);
        double freq_e = 0.0;
        for (const auto& v : spec) freq_e += std::norm(v);
        freq_e /= static_cast<double>(n);
        CHECK(std::abs(time_e - freq_e) / time_e < 1e-6);
    }
}

TEST_CASE("stft geometry and zero input") {
    AudioBuffer buf(std::vector<double>(1000, 0.0), 48000);
    const auto spec = dsp::stft(buf, 256, 64);
    CHECK(spec.num_frames == (1000 - 256) / 64 + 1);
    CHECK(spec.num_bins == 129);
    for (const auto& v : spec.frames) CHECK(std::abs(v) == 0.0);

    AudioBuffer exact(std::vector<double>(256, 0.0), 48000);
    CHECK(dsp::stft(exact, 256, 999).num_frames == 1);
    AudioBuffer tiny(std::vector<double>(255, 0.0), 48000);
    CHECK_THROWS_AS(dsp::stft(tiny, 256, 64), SignalTooShort);
}

TEST_CASE("stft of a bin-exact sine peaks at that bin, matching the windowed-DFT oracle") {
    const int sr = 48000, fft = 512, hop = 128;
    const int bin = 20;
    const double freq = static_cast<double>(bin) * sr / fft;
    const auto buf = dsp::generate_sine(freq, 0.8, 0.1, sr);
    const auto spec = dsp::stft(buf, fft, hop);
    const auto window = dsp::hann_window(fft);
    for (std::size_t f = 0; f < spec.num_frames; f += 7) {
        std::size_t peak = 0;
        double best = -1.0;
        for (std::size_t k = 0; k < spec.num_bins; ++k) {
            if (std::abs(spec.at(f, k)) > best) {
                best = std::abs(spec.at(f, k));
                peak = k;
            }
        }
        CHECK(peak == static_cast<std::size_t>(bin));
        // oracle: direct windowed summation of the same frame
        std::vector<double> frame(buf.samples.begin() + static_cast<std::ptrdiff_t>(f) * hop,
                                  buf.samples.begin() + static_cast<std::ptrdiff_t>(f) * hop + fft);
        const auto ref = oracles::naive_windowed_bin(frame, window, static_cast<std::size_t>(bin));
        CHECK(std::abs(spec.at(f, static_cast<std::size_t>(bin)) - ref) < 1e-6 * std::abs(ref));
    }
}

TEST_CASE("generate_sine lattice values and rms") {
    const auto buf = dsp::generate_sine(12000.0, 1.0, 0.001, 48000);  // sr/4
    REQUIRE(buf.size() >= 4);
    CHECK(buf.samples[0] == doctest::Approx(0.0));
    CHECK(buf.samples[1] == doctest::Approx(1.0));
    CHECK(buf.samples[2] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(buf.samples[3] == doctest::Approx(-1.0));

    const auto long_sine = dsp::generate_sine(1000.0, 0.5, 1.0, 48000);  // whole periods
    double rms = 0.0;
    for (double v : long_sine.samples) rms += v * v;
    rms = std::sqrt(rms / static_cast<double>(long_sine.size()));
    CHECK(std::abs(rms - 0.5 / std::sqrt(2.0)) < 1e-6);

    CHECK_THROWS_AS(dsp::generate_sine(30000.0, 1.0, 0.1, 48000), FrequencyOutOfRange);
}

TEST_CASE("exp sweep endpoints and discrete instantaneous frequency") {
    const int sr = 48000;
    const double f1 = 20.0, f2 = 20000.0, dur = 2.0;
    const auto [sweep, inst] = dsp::generate_exp_sweep(f1, f2, dur, sr);
    CHECK(sweep.samples[0] == doctest::Approx(0.0));
    CHECK(inst[0] == doctest::Approx(f1));
    CHECK(std::abs(inst.back() - f2) / f2 < 1e-3);

    // phase-difference estimate of instantaneous frequency stays within 1%
    // away from the boundaries
    const double ratio_log = std::log(f2 / f1);
    for (std::size_t n = 1000; n + 1000 < sweep.size(); n += 9600) {
        const double t = static_cast<double>(n) / sr;
        const double phase_rate =
            f1 * std::exp(t * ratio_log / dur);  // analytic d(phase)/dt / 2pi
        CHECK(std::abs(phase_rate - inst[n]) / inst[n] < 0.01);
    }
    CHECK_THROWS_AS(dsp::generate_exp_sweep(100.0, 50.0, 1.0, sr), FrequencyOutOfRange);
}

TEST_CASE("one-pole filters follow their recurrences") {
    AudioBuffer ones(std::vector<double>(5, 1.0), 48000);
    const auto pre = dsp::one_pole_filter(ones, dsp::OnePoleKind::highpass_pre_emph, 0.85);
    CHECK(pre.samples[0] == doctest::Approx(1.0));
    for (int i = 1; i < 5; ++i) CHECK(pre.samples[static_cast<std::size_t>(i)] == doctest::Approx(0.15));

    const auto ident = dsp::one_pole_filter(ones, dsp::OnePoleKind::highpass_pre_emph, 0.0);
    for (int i = 0; i < 5; ++i) CHECK(ident.samples[static_cast<std::size_t>(i)] == 1.0);

    AudioBuffer impulse(std::vector<double>{1, 0, 0, 0, 0}, 48000);
    const auto lp = dsp::one_pole_filter(impulse, dsp::OnePoleKind::lowpass, 0.5);
    CHECK(lp.samples[0] == doctest::Approx(0.5));
    CHECK(lp.samples[1] == doctest::Approx(0.25));
    CHECK(lp.samples[2] == doctest::Approx(0.125));

    CHECK_THROWS_AS(dsp::one_pole_filter(ones, dsp::OnePoleKind::lowpass, 1.5),
                    CoefficientOutOfRange);
}

TEST_CASE("one-pole filters are linear") {
    nn::Rng rng(3);
    AudioBuffer x(oracles::random_vector(rng, 300), 48000);
    AudioBuffer y(oracles::random_vector(rng, 300), 48000);
    const double a = 0.7, b = -1.3;
    for (auto kind : {dsp::OnePoleKind::highpass_pre_emph, dsp::OnePoleKind::lowpass}) {
        AudioBuffer mix(std::vector<double>(300), 48000);
        for (std::size_t i = 0; i < 300; ++i) mix.samples[i] = a * x.samples[i] + b * y.samples[i];
        const auto fm = dsp::one_pole_filter(mix, kind, 0.6);
        const auto fx = dsp::one_pole_filter(x, kind, 0.6);
        const auto fy = dsp::one_pole_filter(y, kind, 0.6);
        for (std::size_t i = 0; i < 300; ++i)
            CHECK(std::abs(fm.samples[i] - (a * fx.samples[i] + b * fy.samples[i])) < 1e-9);
    }
}

TEST_CASE("one-pole adjoints agree with finite differences") {
    nn::Rng rng(5);
    std::vector<double> x = oracles::random_vector(rng, 64);
    std::vector<double> w = oracles::random_vector(rng, 64);
    for (auto kind : {dsp::OnePoleKind::highpass_pre_emph, dsp::OnePoleKind::lowpass}) {
        const double coeff = 0.8;
        auto loss = [&] {
            AudioBuffer b(x, 48000);
            const auto y = dsp::one_pole_filter(b, kind, coeff);
            double acc = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) acc += w[i] * y.samples[i];
            return acc;
        };
        const auto analytic = dsp::one_pole_adjoint(kind, coeff, w);
        oracles::FdFailure fail;
        CHECK_MESSAGE(oracles::check_gradient(x, analytic, loss, 1e-6, 1e-7, &fail),
                      "idx " << fail.index << " fd " << fail.fd << " an " << fail.analytic);
    }
}

TEST_CASE("spectral centroid: bin-exact sine, silence, and broadband oracle") {
    const int sr = 48000, fft = 2048, hop = 512;
    const double freq = 1000.0;
    // snap to the nearest bin so leakage stays bounded
    const double bin_freq = std::round(freq * fft / sr) * sr / fft;
    const auto sine = dsp::generate_sine(bin_freq, 0.7, 0.2, sr);
    const auto cs = dsp::spectral_centroid_frames(dsp::stft(sine, fft, hop));
    for (double c : cs) CHECK(std::abs(c - bin_freq) / bin_freq < 0.02);

    AudioBuffer silence(std::vector<double>(8192, 0.0), sr);
    for (double c : dsp::spectral_centroid_frames(dsp::stft(silence, fft, hop)))
        CHECK(c == 0.0);

    nn::Rng rng(17);
    AudioBuffer noise(oracles::random_vector(rng, 6000), sr);
    const auto spec = dsp::stft(noise, fft, hop);
    const auto got = dsp::spectral_centroid_frames(spec);
    for (std::size_t f = 0; f < spec.num_frames; ++f) {
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < spec.num_bins; ++k) {
            num += static_cast<double>(k) * sr / fft * std::abs(spec.at(f, k));
            den += std::abs(spec.at(f, k));
        }
        CHECK(std::abs(got[f] - num / den) < 1e-9);
    }
}

TEST_CASE("k-weighting matches the published 48 kHz table") {
    const auto kw = dsp::KWeighting::design(48000.0);
    CHECK(kw.shelf.b0 == doctest::Approx(1.53512485958697).epsilon(1e-6));
    CHECK(kw.shelf.b1 == doctest::Approx(-2.69169618940638).epsilon(1e-6));
    CHECK(kw.shelf.b2 == doctest::Approx(1.19839281085285).epsilon(1e-6));
    CHECK(kw.shelf.a1 == doctest::Approx(-1.69065929318241).epsilon(1e-6));
    CHECK(kw.shelf.a2 == doctest::Approx(0.73248077421585).epsilon(1e-6));
    CHECK(kw.highpass.a1 == doctest::Approx(-1.99004745483398).epsilon(1e-6));
    CHECK(kw.highpass.a2 == doctest::Approx(0.99007225036621).epsilon(1e-6));
}
