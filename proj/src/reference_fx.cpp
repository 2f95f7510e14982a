#include "nfx/fx/reference_fx.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "nfx/dsp/filters.hpp"
#include "nfx/dsp/signals.hpp"
#include "nfx/errors.hpp"
#include "nfx/nn/rng.hpp"
#include "nfx/wav.hpp"

namespace nfx::fx {

namespace fs = std::filesystem;

AudioBuffer tanh_drive(const AudioBuffer& x, double gain_knob) {
    const double g = 1.0 + 19.0 * gain_knob;
    const double norm = std::tanh(g);
    AudioBuffer y(std::vector<double>(x.size()), x.sample_rate);
    for (std::size_t i = 0; i < x.size(); ++i) y.samples[i] = std::tanh(g * x.samples[i]) / norm;
    return y;
}

AudioBuffer hard_clip(const AudioBuffer& x, double threshold) {
    if (!(threshold > 0.0)) throw Error("hard_clip: threshold must be positive");
    AudioBuffer y(std::vector<double>(x.size()), x.sample_rate);
    for (std::size_t i = 0; i < x.size(); ++i)
        y.samples[i] = std::clamp(x.samples[i], -threshold, threshold) / threshold;
    return y;
}

AudioBuffer one_pole_tone(const AudioBuffer& x, double tone_knob) {
    const double coeff = 0.99 * (1.0 - tone_knob);
    return dsp::one_pole_filter(x, dsp::OnePoleKind::lowpass, coeff);
}

AudioBuffer ff_compressor(const AudioBuffer& x, double threshold_db, double ratio,
                          double attack_ms, double release_ms) {
    if (ratio < 1.0) throw Error("ff_compressor: ratio must be >= 1");
    const double att = std::exp(-1000.0 / (attack_ms * x.sample_rate));
    const double rel = std::exp(-1000.0 / (release_ms * x.sample_rate));
    AudioBuffer y(std::vector<double>(x.size()), x.sample_rate);
    double env = 0.0;
    const double slope = 1.0 - 1.0 / ratio;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double level = std::abs(x.samples[i]);
        const double coeff = level > env ? att : rel;
        env = coeff * env + (1.0 - coeff) * level;
        const double gain_db = std::min(0.0, (threshold_db - 20.0 * std::log10(env + 1e-9)) * slope);
        y.samples[i] = x.samples[i] * std::pow(10.0, gain_db / 20.0);
    }
    return y;
}

std::vector<std::string> reference_effect_names() {
    return {"tanh_drive", "hard_clip", "one_pole_tone", "compressor"};
}

AudioBuffer apply_reference_effect(const std::string& name, const AudioBuffer& x,
                                   double knob) {
    if (name == "tanh_drive") return tanh_drive(x, knob);
    if (name == "hard_clip") return hard_clip(x, std::max(knob, 1e-3));
    if (name == "one_pole_tone") return one_pole_tone(x, knob);
    if (name == "compressor") return ff_compressor(x, -40.0 + 30.0 * knob, 4.0, 5.0, 50.0);
    throw Error("unknown reference effect '" + name + "'");
}

std::string reference_effect_knob_name(const std::string& name) {
    if (name == "tanh_drive") return "gain";
    if (name == "hard_clip") return "threshold";
    if (name == "one_pole_tone") return "tone";
    if (name == "compressor") return "threshold";
    throw Error("unknown reference effect '" + name + "'");
}

std::vector<AudioBuffer> synth_test_corpus(int sample_rate, double seconds_total,
                                           std::uint64_t seed) {
    nn::Rng rng(seed);
    std::vector<AudioBuffer> corpus;
    const double per_piece = seconds_total / 6.0;
    const auto piece_len = static_cast<std::size_t>(per_piece * sample_rate);

    // two sine-burst pieces: random tones with fades and level jumps
    for (int piece = 0; piece < 2; ++piece) {
        AudioBuffer b(std::vector<double>(piece_len, 0.0), sample_rate);
        std::size_t pos = 0;
        while (pos < piece_len) {
            const std::size_t burst =
                std::min(piece_len - pos, static_cast<std::size_t>((0.05 + 0.2 * rng.next_unit()) * sample_rate));
            const double freq = 60.0 + rng.next_unit() * 4000.0;
            const double amp = 0.05 + 0.95 * rng.next_unit();
            const double w = 2.0 * M_PI * freq / sample_rate;
            for (std::size_t i = 0; i < burst; ++i) {
                const double env = std::min({1.0, i / (0.005 * sample_rate),
                                             (burst - 1.0 - i) / (0.005 * sample_rate)});
                b.samples[pos + i] = amp * std::max(0.0, env) * std::sin(w * static_cast<double>(i));
            }
            pos += burst;
        }
        corpus.push_back(std::move(b));
    }
    // two noise-burst pieces
    for (int piece = 0; piece < 2; ++piece) {
        AudioBuffer b(std::vector<double>(piece_len, 0.0), sample_rate);
        std::size_t pos = 0;
        while (pos < piece_len) {
            const std::size_t burst =
                std::min(piece_len - pos, static_cast<std::size_t>((0.02 + 0.1 * rng.next_unit()) * sample_rate));
            const double amp = 0.05 + 0.9 * rng.next_unit();
            for (std::size_t i = 0; i < burst; ++i)
                b.samples[pos + i] = amp * rng.next_uniform(-1.0, 1.0);
            pos += burst;
            pos += static_cast<std::size_t>(0.02 * sample_rate * rng.next_unit());
        }
        corpus.push_back(std::move(b));
    }
    // two click-train pieces with decaying tails
    for (int piece = 0; piece < 2; ++piece) {
        AudioBuffer b(std::vector<double>(piece_len, 0.0), sample_rate);
        std::size_t pos = static_cast<std::size_t>(0.01 * sample_rate);
        while (pos < piece_len) {
            const double amp = (rng.next_unit() < 0.5 ? -1.0 : 1.0) * (0.3 + 0.7 * rng.next_unit());
            const auto tail = static_cast<std::size_t>(0.02 * sample_rate);
            for (std::size_t i = 0; i < tail && pos + i < piece_len; ++i)
                b.samples[pos + i] += amp * std::exp(-8.0 * static_cast<double>(i) / tail);
            pos += static_cast<std::size_t>((0.08 + 0.12 * rng.next_unit()) * sample_rate);
        }
        corpus.push_back(std::move(b));
    }
    return corpus;
}

DatasetManifest render_dataset(const std::string& effect_name,
                               const std::vector<double>& knob_grid,
                               const std::vector<AudioBuffer>& corpus,
                               const std::string& out_dir, double train_frac,
                               double valid_frac, std::uint64_t seed) {
    if (corpus.empty() || knob_grid.empty())
        throw Error("render_dataset: corpus and knob grid must be nonempty");
    const int sr = corpus[0].sample_rate;
    for (const auto& b : corpus) {
        if (b.sample_rate != sr) throw SampleRateMismatch("corpus sample rates differ");
    }
    fs::create_directories(out_dir);

    DatasetManifest m;
    m.sample_rate = sr;
    m.base_dir = out_dir;
    m.condition_names = {reference_effect_knob_name(effect_name)};
    const auto [lo, hi] = std::minmax_element(knob_grid.begin(), knob_grid.end());
    m.condition_ranges = {{*lo, *hi}};

    for (std::size_t ci = 0; ci < corpus.size(); ++ci) {
        // float32 round trip first, so the stored input is exactly what the
        // effect consumed
        AudioBuffer input = corpus[ci];
        for (double& v : input.samples) v = static_cast<double>(static_cast<float>(v));
        for (std::size_t ki = 0; ki < knob_grid.size(); ++ki) {
            const std::string stem = "c" + std::to_string(ci) + "_k" + std::to_string(ki);
            const std::string in_name = "in_" + stem + ".wav";
            const std::string tg_name = "tg_" + stem + ".wav";
            AudioBuffer target = apply_reference_effect(effect_name, input, knob_grid[ki]);
            write_wav((fs::path(out_dir) / in_name).string(), input, WavFormat::float32);
            write_wav((fs::path(out_dir) / tg_name).string(), target, WavFormat::float32);
            DatasetManifest::Entry e;
            e.input_path = in_name;
            e.target_path = tg_name;
            e.condition_raw = {knob_grid[ki]};
            m.entries.push_back(std::move(e));
        }
    }

    // deterministic split assignment
    const std::size_t n = m.entries.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    nn::Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.next_below(i);
        std::swap(order[i - 1], order[j]);
    }
    std::size_t n_train = static_cast<std::size_t>(std::round(train_frac * static_cast<double>(n)));
    std::size_t n_valid = static_cast<std::size_t>(std::round(valid_frac * static_cast<double>(n)));
    if (n >= 3) {
        n_train = std::clamp<std::size_t>(n_train, 1, n - 2);
        n_valid = std::clamp<std::size_t>(n_valid, 1, n - n_train - 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
        Split s = Split::test;
        if (i < n_train)
            s = Split::train;
        else if (i < n_train + n_valid)
            s = Split::valid;
        m.entries[order[i]].split = s;
    }

    save_manifest(m, (fs::path(out_dir) / "manifest.json").string());
    return m;
}

}  // namespace nfx::fx
