#pragma once

#include <memory>
#include <string>
#include <vector>

#include "nfx/dsp/stft.hpp"
#include "nfx/types.hpp"

namespace nfx::analysis {

/// Anything that can be probed: a trained model or a reference effect.
/// process() must be deterministic and length-preserving; each call starts
/// from a fresh internal state.
class Processor {
 public:
    virtual ~Processor() = default;
    virtual int sample_rate() const = 0;
    virtual AudioBuffer process(const AudioBuffer& input, const ConditionVector& cond) = 0;
};

constexpr int kHarmonicFft = 1 << 16;
constexpr int kHarmonicCount = 10;

struct HarmonicReport {
    double f0 = 0.0;  // snapped to the analysis grid
    int sample_rate = 0;
    int fft_size = kHarmonicFft;
    std::vector<double> levels_dbfs;
    // per level: one-sided magnitude spectrum in dBFS (full-scale sine = 0)
    std::vector<std::vector<double>> spectra_db;
    // per level: harmonic magnitudes H1..H10 in dB relative to H1
    std::vector<std::vector<double>> harmonics_db_rel;
    std::vector<double> h1_dbfs;  // absolute fundamental level per level
    std::vector<double> thd;      // sqrt(sum A_k^2, k=2..10) / A_1
};

/// Renders a sine per level (>= 2 s, first 0.5 s discarded), Hann-windows one
/// 2^16 frame and reads harmonics at the bins nearest k*f0. f0 is snapped to
/// the nearest analysis bin first.
HarmonicReport harmonic_response(Processor& proc, double f0,
                                 const std::vector<double>& levels_dbfs,
                                 const ConditionVector& cond);

struct SweepReport {
    dsp::Spectrogram spec;       // STFT of the processed sweep (2048/512)
    std::vector<char> mask;      // per (frame, bin): 1 = harmonic trajectory
    double aliasing_ratio_db = 0.0;
    double energy_inside = 0.0;
    double energy_outside = 0.0;
};

/// Exponential sweep probe. The mask covers bins within +-1 semitone of the
/// first 10 harmonics of the instantaneous frequency (never above Nyquist,
/// widened to at least +-2.5 bins for window leakage); the aliasing ratio is
/// 10*log10(outside/inside energy).
SweepReport sweep_response(Processor& proc, double f1, double f2, double duration_s,
                           const ConditionVector& cond);

struct CompareTable {
    struct Row {
        std::size_t n;
        double target;
        double pred;
        double diff;
    };
    std::vector<Row> rows;
};

CompareTable waveform_compare(const AudioBuffer& pred, const AudioBuffer& target,
                              std::size_t start, std::size_t len);

// CSV exports; all numeric formatting is fixed so identical inputs produce
// byte-identical files.
void export_harmonic_csv(const HarmonicReport& report, const std::string& path);
void export_sweep_csv(const SweepReport& report, const std::string& path);
void export_compare_csv(const CompareTable& table, const std::string& path);

// Self-contained SVG plots (1000x600 viewBox, no external assets).
void export_harmonic_svg(const HarmonicReport& report, const std::string& path);
void export_sweep_svg(const SweepReport& report, const std::string& path);
void export_compare_svg(const CompareTable& table, const std::string& path);

}  // namespace nfx::analysis
