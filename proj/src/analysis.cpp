#include "nfx/analysis/analysis.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>

#include "nfx/dsp/fft.hpp"
#include "nfx/dsp/signals.hpp"
#include "nfx/errors.hpp"

namespace nfx::analysis {

namespace {

constexpr double kDbFloor = -200.0;

double to_db(double amplitude) {
    return amplitude > 1e-10 ? 20.0 * std::log10(amplitude) : kDbFloor;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    return out;
}

}  // namespace

HarmonicReport harmonic_response(Processor& proc, double f0,
                                 const std::vector<double>& levels_dbfs,
                                 const ConditionVector& cond) {
    const int sr = proc.sample_rate();
    const int N = kHarmonicFft;
    HarmonicReport report;
    report.sample_rate = sr;
    report.levels_dbfs = levels_dbfs;

    // snap to the analysis grid so harmonics land on exact bins
    const int bin0 = std::max(1, static_cast<int>(std::llround(f0 * N / sr)));
    report.f0 = static_cast<double>(bin0) * sr / N;

    const std::size_t discard = static_cast<std::size_t>(std::llround(0.5 * sr));
    const double duration =
        std::max(2.0, (static_cast<double>(discard + N) + 1.0) / sr);
    const std::vector<double> window = dsp::hann_window(N);
    double wsum = 0.0;
    for (double w : window) wsum += w;

    for (double level_db : levels_dbfs) {
        const double amp = std::pow(10.0, level_db / 20.0);
        const AudioBuffer sine = dsp::generate_sine(report.f0, amp, duration, sr);
        const AudioBuffer rendered = proc.process(sine, cond);
        if (rendered.size() != sine.size()) throw Error("processor changed the length");

        std::vector<dsp::cplx> frame(static_cast<std::size_t>(N));
        for (int i = 0; i < N; ++i)
            frame[static_cast<std::size_t>(i)] =
                dsp::cplx(rendered.samples[discard + static_cast<std::size_t>(i)] *
                              window[static_cast<std::size_t>(i)],
                          0.0);
        dsp::fft_inplace(frame.data(), static_cast<std::size_t>(N));

        // dBFS normalization: a full-scale sine at an exact bin reads 0 dBFS
        std::vector<double> spectrum(static_cast<std::size_t>(N / 2 + 1));
        for (int k = 0; k <= N / 2; ++k)
            spectrum[static_cast<std::size_t>(k)] =
                to_db(2.0 * std::abs(frame[static_cast<std::size_t>(k)]) / wsum);

        std::vector<double> amps(kHarmonicCount, 0.0);
        for (int k = 1; k <= kHarmonicCount; ++k) {
            const long long bin = static_cast<long long>(k) * bin0;
            if (bin <= N / 2)
                amps[static_cast<std::size_t>(k - 1)] =
                    2.0 * std::abs(frame[static_cast<std::size_t>(bin)]) / wsum;
        }
        std::vector<double> rel(kHarmonicCount);
        const double a1 = amps[0];
        for (int k = 0; k < kHarmonicCount; ++k)
            rel[static_cast<std::size_t>(k)] =
                a1 > 0.0 ? to_db(amps[static_cast<std::size_t>(k)] / a1) : kDbFloor;
        double harm2 = 0.0;
        for (int k = 1; k < kHarmonicCount; ++k)
            harm2 += amps[static_cast<std::size_t>(k)] * amps[static_cast<std::size_t>(k)];

        report.spectra_db.push_back(std::move(spectrum));
        report.harmonics_db_rel.push_back(std::move(rel));
        report.h1_dbfs.push_back(to_db(a1));
        report.thd.push_back(a1 > 0.0 ? std::sqrt(harm2) / a1 : 0.0);
    }
    return report;
}

SweepReport sweep_response(Processor& proc, double f1, double f2, double duration_s,
                           const ConditionVector& cond) {
    const int sr = proc.sample_rate();
    const int fft = 2048, hop = 512;
    auto [sweep, inst_freq] = dsp::generate_exp_sweep(f1, f2, duration_s, sr);
    const AudioBuffer rendered = proc.process(sweep, cond);
    if (rendered.size() != sweep.size()) throw Error("processor changed the length");

    SweepReport report;
    report.spec = dsp::stft(rendered, fft, hop);
    const auto& spec = report.spec;
    report.mask.assign(spec.frames.size(), 0);

    const double semitone = std::pow(2.0, 1.0 / 12.0) - 1.0;  // ~0.0595 of f
    const double bin_width = static_cast<double>(sr) / fft;
    const double nyquist = 0.5 * sr;

    for (std::size_t t = 0; t < spec.num_frames; ++t) {
        const std::size_t center = t * hop + fft / 2;
        const double fc = inst_freq[std::min(center, inst_freq.size() - 1)];
        for (int k = 1; k <= 10; ++k) {
            const double fh = k * fc;
            if (fh >= nyquist) break;
            const double half = std::max(fh * semitone, 2.5 * bin_width);
            const int lo = std::max(0, static_cast<int>(std::ceil((fh - half) / bin_width)));
            const int hi = std::min(static_cast<int>(spec.num_bins) - 1,
                                    static_cast<int>(std::floor((fh + half) / bin_width)));
            for (int b = lo; b <= hi; ++b)
                report.mask[t * spec.num_bins + static_cast<std::size_t>(b)] = 1;
        }
    }

    double inside = 0.0, outside = 0.0;
    for (std::size_t i = 0; i < spec.frames.size(); ++i) {
        const double e = std::norm(spec.frames[i]);
        if (report.mask[i])
            inside += e;
        else
            outside += e;
    }
    if (inside <= 0.0) throw DegenerateEnergy("no energy along the harmonic trajectories");
    report.energy_inside = inside;
    report.energy_outside = outside;
    report.aliasing_ratio_db = 10.0 * std::log10(outside / inside + 1e-30);
    return report;
}

CompareTable waveform_compare(const AudioBuffer& pred, const AudioBuffer& target,
                              std::size_t start, std::size_t len) {
    if (pred.size() != target.size()) throw LengthMismatch("waveform_compare lengths differ");
    if (start + len > pred.size())
        throw WindowOutOfRange("window [" + std::to_string(start) + ", " +
                               std::to_string(start + len) + ") in " +
                               std::to_string(pred.size()) + " samples");
    CompareTable table;
    table.rows.reserve(len);
    for (std::size_t i = start; i < start + len; ++i)
        table.rows.push_back({i, target.samples[i], pred.samples[i],
                              pred.samples[i] - target.samples[i]});
    return table;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

void export_harmonic_csv(const HarmonicReport& report, const std::string& path) {
    auto out = open_out(path);
    out << "level_dbfs,bin_hz,mag_db\n";
    for (std::size_t li = 0; li < report.levels_dbfs.size(); ++li) {
        const auto& spectrum = report.spectra_db[li];
        for (std::size_t k = 0; k < spectrum.size(); ++k) {
            const double hz = static_cast<double>(k) * report.sample_rate / report.fft_size;
            out << fmt(report.levels_dbfs[li]) << ',' << fmt(hz) << ',' << fmt(spectrum[k])
                << '\n';
        }
    }
}

void export_sweep_csv(const SweepReport& report, const std::string& path) {
    auto out = open_out(path);
    out << "frame,bin_hz,mag_db,in_mask\n";
    const auto& spec = report.spec;
    for (std::size_t t = 0; t < spec.num_frames; ++t) {
        for (std::size_t k = 0; k < spec.num_bins; ++k) {
            out << t << ',' << fmt(spec.bin_hz(k)) << ','
                << fmt(to_db(std::abs(spec.at(t, k)))) << ','
                << int(report.mask[t * spec.num_bins + k]) << '\n';
        }
    }
}

void export_compare_csv(const CompareTable& table, const std::string& path) {
    auto out = open_out(path);
    out << "n,target,pred,diff\n";
    for (const auto& row : table.rows)
        out << row.n << ',' << fmt(row.target) << ',' << fmt(row.pred) << ',' << fmt(row.diff)
            << '\n';
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

namespace {

constexpr int kW = 1000, kH = 600;
constexpr int kMargin = 60;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct SvgDoc {
    std::ofstream out;
    explicit SvgDoc(const std::string& path) : out(open_out(path)) {
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << kW << ' ' << kH
            << "\">\n<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";
    }
    void text(double x, double y, const std::string& s, int size = 14) {
        out << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-size=\"" << size
            << "\" font-family=\"sans-serif\">" << s << "</text>\n";
    }
    void line(double x1, double y1, double x2, double y2, const char* color = "#cccccc") {
        out << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(x2)
            << "\" y2=\"" << fmt(y2) << "\" stroke=\"" << color << "\"/>\n";
    }
    void close() { out << "</svg>\n"; }
};

}  // namespace

void export_harmonic_svg(const HarmonicReport& report, const std::string& path) {
    SvgDoc doc(path);
    const double fmin = std::max(10.0, report.f0 / 4.0);
    const double fmax = report.sample_rate / 2.0;
    const double db_lo = -120.0, db_hi = 10.0;
    auto xo = [&](double hz) {
        return kMargin + (std::log10(hz) - std::log10(fmin)) /
                             (std::log10(fmax) - std::log10(fmin)) * (kW - 2 * kMargin);
    };
    auto yo = [&](double db) {
        return kH - kMargin - (std::clamp(db, db_lo, db_hi) - db_lo) / (db_hi - db_lo) *
                                  (kH - 2 * kMargin);
    };
    for (double db = -120.0; db <= 0.0; db += 20.0) {
        doc.line(kMargin, yo(db), kW - kMargin, yo(db));
        doc.text(4, yo(db) + 4, fmt(db) + " dB", 11);
    }
    for (std::size_t li = 0; li < report.spectra_db.size(); ++li) {
        const auto& spectrum = report.spectra_db[li];
        doc.out << "<polyline fill=\"none\" stroke=\"" << kColors[li % 6]
                << "\" stroke-width=\"1\" points=\"";
        for (std::size_t k = 1; k < spectrum.size(); k += 4) {
            const double hz = static_cast<double>(k) * report.sample_rate / report.fft_size;
            if (hz < fmin) continue;
            doc.out << fmt(xo(hz)) << ',' << fmt(yo(spectrum[k])) << ' ';
        }
        doc.out << "\"/>\n";
        doc.text(kW - kMargin - 180, kMargin + 18 * (static_cast<int>(li) + 1),
                 "input " + fmt(report.levels_dbfs[li]) + " dBFS", 12);
    }
    doc.text(kW / 2 - 80, kH - 20, "frequency (Hz, log)", 13);
    doc.text(kMargin, 30, "harmonic response, f0 = " + fmt(report.f0) + " Hz", 15);
    doc.close();
}

void export_sweep_svg(const SweepReport& report, const std::string& path) {
    SvgDoc doc(path);
    const auto& spec = report.spec;
    const std::size_t cols = std::min<std::size_t>(spec.num_frames, 250);
    const std::size_t rows = std::min<std::size_t>(spec.num_bins, 128);
    const double cw = static_cast<double>(kW - 2 * kMargin) / static_cast<double>(cols);
    const double ch = static_cast<double>(kH - 2 * kMargin) / static_cast<double>(rows);
    for (std::size_t cx = 0; cx < cols; ++cx) {
        const std::size_t f0 = cx * spec.num_frames / cols;
        const std::size_t f1 = std::max(f0 + 1, (cx + 1) * spec.num_frames / cols);
        for (std::size_t cy = 0; cy < rows; ++cy) {
            const std::size_t b0 = cy * spec.num_bins / rows;
            const std::size_t b1 = std::max(b0 + 1, (cy + 1) * spec.num_bins / rows);
            double peak = 0.0;
            for (std::size_t f = f0; f < f1 && f < spec.num_frames; ++f)
                for (std::size_t b = b0; b < b1 && b < spec.num_bins; ++b)
                    peak = std::max(peak, std::abs(spec.at(f, b)));
            const double db = to_db(peak);
            const double unit = std::clamp((db + 100.0) / 100.0, 0.0, 1.0);
            const int shade = static_cast<int>(255.0 * (1.0 - unit));
            doc.out << "<rect x=\"" << fmt(kMargin + static_cast<double>(cx) * cw) << "\" y=\""
                    << fmt(kH - kMargin - static_cast<double>(cy + 1) * ch) << "\" width=\""
                    << fmt(cw + 0.5) << "\" height=\"" << fmt(ch + 0.5) << "\" fill=\"rgb("
                    << shade << ',' << shade << ",255)\"/>\n";
        }
    }
    doc.text(kMargin, 30,
             "sweep response, aliasing ratio = " + fmt(report.aliasing_ratio_db) + " dB", 15);
    doc.text(kW / 2 - 40, kH - 20, "time (frames)", 13);
    doc.close();
}

void export_compare_svg(const CompareTable& table, const std::string& path) {
    SvgDoc doc(path);
    if (!table.rows.empty()) {
        double lo = 1e300, hi = -1e300;
        for (const auto& r : table.rows) {
            lo = std::min({lo, r.target, r.pred, r.diff});
            hi = std::max({hi, r.target, r.pred, r.diff});
        }
        if (hi <= lo) hi = lo + 1.0;
        auto xo = [&](std::size_t i) {
            return kMargin + static_cast<double>(i) /
                                 std::max<std::size_t>(1, table.rows.size() - 1) *
                                 (kW - 2 * kMargin);
        };
        auto yo = [&](double v) {
            return kH - kMargin - (v - lo) / (hi - lo) * (kH - 2 * kMargin);
        };
        const char* names[] = {"target", "pred", "diff"};
        for (int series = 0; series < 3; ++series) {
            doc.out << "<polyline fill=\"none\" stroke=\"" << kColors[series]
                    << "\" stroke-width=\"1\" points=\"";
            for (std::size_t i = 0; i < table.rows.size(); ++i) {
                const auto& r = table.rows[i];
                const double v = series == 0 ? r.target : (series == 1 ? r.pred : r.diff);
                doc.out << fmt(xo(i)) << ',' << fmt(yo(v)) << ' ';
            }
            doc.out << "\"/>\n";
            doc.text(kW - kMargin - 120, kMargin + 18 * (series + 1), names[series], 12);
        }
        doc.text(kMargin, 30,
                 "waveform comparison, n = " + std::to_string(table.rows.front().n) + " .. " +
                     std::to_string(table.rows.back().n),
                 15);
    } else {
        doc.text(kMargin, 30, "waveform comparison (empty window)", 15);
    }
    doc.close();
}

}  // namespace nfx::analysis
