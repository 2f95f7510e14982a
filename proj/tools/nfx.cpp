// nfx: config-driven workflow around the toolkit — preprocess, render
// reference datasets, train, evaluate, and probe processors.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>

#include "nfx/analysis/analysis.hpp"
#include "nfx/errors.hpp"
#include "nfx/fx/reference_fx.hpp"
#include "nfx/manifest.hpp"
#include "nfx/train/trainer.hpp"
#include "nfx/wav.hpp"

namespace fs = std::filesystem;
using namespace nfx;

namespace {

std::vector<double> parse_csv_doubles(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

int run_preprocess(const std::string& manifest_path, bool check_only) {
    const DatasetManifest m = load_manifest(manifest_path);
    std::size_t counts[3] = {0, 0, 0};
    double seconds = 0.0;
    for (const auto& e : m.entries) {
        counts[static_cast<int>(e.split)]++;
        seconds += static_cast<double>(wav_info(m.resolve(e.input_path)).second) / m.sample_rate;
    }
    std::cout << "manifest: " << manifest_path << "\n"
              << "sample_rate: " << m.sample_rate << " Hz\n"
              << "entries: " << m.entries.size() << " (train " << counts[0] << ", valid "
              << counts[1] << ", test " << counts[2] << ")\n"
              << "total input audio: " << seconds << " s\n"
              << "conditions:";
    for (std::size_t i = 0; i < m.condition_names.size(); ++i)
        std::cout << " " << m.condition_names[i] << "[" << m.condition_ranges[i].first << ", "
                  << m.condition_ranges[i].second << "]";
    std::cout << "\n" << (check_only ? "check passed\n" : "");
    return 0;
}

std::unique_ptr<analysis::Processor> make_processor(const std::string& ckpt,
                                                    const std::string& effect, int sr) {
    if (!ckpt.empty()) return std::make_unique<ModelProcessor>(load_checkpoint(ckpt));
    return std::make_unique<EffectProcessor>(effect, sr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nfx — neural audio effect modeling toolkit"};
    app.require_subcommand(1);

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "validate a dataset manifest");
    std::string pre_manifest;
    bool pre_check = false;
    pre->add_option("--manifest", pre_manifest, "manifest JSON path")->required();
    pre->add_flag("--check", pre_check, "validate only");

    // render-dataset
    auto* render = app.add_subcommand("render-dataset",
                                      "render a reference-effect dataset from a corpus");
    std::string rd_effect = "tanh_drive", rd_grid = "0,0.5,1", rd_corpus, rd_out;
    double rd_synth = 0.0, rd_train_frac = 0.7, rd_valid_frac = 0.15;
    std::uint64_t rd_seed = 42;
    int rd_sr = 44100;
    render->add_option("--effect", rd_effect, "reference effect name")
        ->check(CLI::IsMember(fx::reference_effect_names()));
    render->add_option("--grid", rd_grid, "comma-separated knob values");
    render->add_option("--corpus", rd_corpus, "directory of input WAV files");
    render->add_option("--synth-seconds", rd_synth,
                       "synthesize this many seconds of test corpus instead of --corpus");
    render->add_option("--sr", rd_sr, "sample rate for --synth-seconds");
    render->add_option("--out", rd_out, "output directory")->required();
    render->add_option("--seed", rd_seed, "split shuffle seed");
    render->add_option("--train-frac", rd_train_frac, "train fraction");
    render->add_option("--valid-frac", rd_valid_frac, "valid fraction");

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model from a YAML config");
    std::string train_config;
    train_cmd->add_option("-c,--config", train_config, "YAML config path")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    std::string ev_ckpt, ev_manifest, ev_split = "test", ev_out;
    eval_cmd->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--manifest", ev_manifest, "manifest path")->required();
    eval_cmd->add_option("--split", ev_split, "train|valid|test")
        ->check(CLI::IsMember({"train", "valid", "test"}));
    eval_cmd->add_option("--out", ev_out, "metrics JSON output path");

    // analyze
    auto* an = app.add_subcommand("analyze", "probe a checkpoint or reference effect");
    std::string an_ckpt, an_effect, an_probe, an_out = ".", an_cond, an_levels = "-12,-6,0";
    std::string an_input, an_target;
    double an_f0 = 220.0, an_f1 = 20.0, an_f2 = 0.0, an_duration = 5.0;
    int an_sr = 44100;
    std::size_t an_start = 0, an_len = 1000;
    an->add_option("--ckpt", an_ckpt, "checkpoint to probe");
    an->add_option("--effect", an_effect, "reference effect to probe")
        ->check(CLI::IsMember(fx::reference_effect_names()));
    an->add_option("--probe", an_probe, "harmonic|sweep|compare")
        ->required()
        ->check(CLI::IsMember({"harmonic", "sweep", "compare"}));
    an->add_option("--out", an_out, "output directory");
    an->add_option("--cond", an_cond, "comma-separated raw condition values");
    an->add_option("--sr", an_sr, "sample rate for --effect probes");
    an->add_option("--f0", an_f0, "harmonic probe fundamental (Hz)");
    an->add_option("--levels", an_levels, "harmonic probe input levels (dBFS, csv)");
    an->add_option("--f1", an_f1, "sweep start (Hz)");
    an->add_option("--f2", an_f2, "sweep end (Hz, default 0.45*sr)");
    an->add_option("--duration", an_duration, "sweep length (s)");
    an->add_option("--input", an_input, "compare probe: input WAV");
    an->add_option("--target", an_target, "compare probe: target WAV");
    an->add_option("--start", an_start, "compare window start");
    an->add_option("--len", an_len, "compare window length");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (pre->parsed()) return run_preprocess(pre_manifest, pre_check);

        if (render->parsed()) {
            std::vector<AudioBuffer> corpus;
            if (rd_synth > 0.0) {
                corpus = fx::synth_test_corpus(rd_sr, rd_synth, rd_seed);
            } else {
                if (rd_corpus.empty())
                    throw SchemaError("render-dataset needs --corpus or --synth-seconds");
                std::vector<std::string> files;
                for (const auto& entry : fs::directory_iterator(rd_corpus)) {
                    if (entry.path().extension() == ".wav") files.push_back(entry.path().string());
                }
                std::sort(files.begin(), files.end());
                if (files.empty()) throw IoError("no .wav files in " + rd_corpus);
                for (const auto& f : files) corpus.push_back(read_wav(f));
            }
            const auto grid = parse_csv_doubles(rd_grid);
            const auto manifest = fx::render_dataset(rd_effect, grid, corpus, rd_out,
                                                     rd_train_frac, rd_valid_frac, rd_seed);
            std::cout << "wrote " << manifest.entries.size() << " entries to " << rd_out
                      << "/manifest.json\n";
            return 0;
        }

        if (train_cmd->parsed()) {
            const TrainConfig config = parse_config(train_config);
            const TrainResult result = train(config);
            std::cout << "steps: " << result.steps_run << "\n"
                      << "best valid loss: " << result.best_valid_loss << "\n"
                      << "checkpoint: " << result.checkpoint_path << "\n"
                      << "log: " << result.log_path << "\n";
            return 0;
        }

        if (eval_cmd->parsed()) {
            const EvalResult r = evaluate(ev_ckpt, ev_manifest, split_from_string(ev_split), ev_out);
            std::cout << "entries: " << r.entries.size() << "\n"
                      << "aggregate: " << metric_report_json(r.aggregate) << "\n"
                      << "report: " << r.report_path << "\n";
            return 0;
        }

        if (an->parsed()) {
            if (an_ckpt.empty() == an_effect.empty())
                throw SchemaError("analyze needs exactly one of --ckpt or --effect");
            fs::create_directories(an_out);
            auto proc = make_processor(an_ckpt, an_effect, an_sr);
            const ConditionVector cond{parse_csv_doubles(an_cond)};
            if (an_probe == "harmonic") {
                const auto report =
                    analysis::harmonic_response(*proc, an_f0, parse_csv_doubles(an_levels), cond);
                analysis::export_harmonic_csv(report, (fs::path(an_out) / "harmonic.csv").string());
                analysis::export_harmonic_svg(report, (fs::path(an_out) / "harmonic.svg").string());
                std::cout << "f0: " << report.f0 << " Hz\n";
                for (std::size_t i = 0; i < report.levels_dbfs.size(); ++i)
                    std::cout << "level " << report.levels_dbfs[i] << " dBFS: H1 "
                              << report.h1_dbfs[i] << " dBFS, THD " << report.thd[i] << "\n";
            } else if (an_probe == "sweep") {
                const double f2 = an_f2 > 0.0 ? an_f2 : 0.45 * proc->sample_rate();
                const auto report = analysis::sweep_response(*proc, an_f1, f2, an_duration, cond);
                analysis::export_sweep_csv(report, (fs::path(an_out) / "sweep.csv").string());
                analysis::export_sweep_svg(report, (fs::path(an_out) / "sweep.svg").string());
                std::cout << "aliasing_ratio_db: " << report.aliasing_ratio_db << "\n";
            } else {
                if (an_input.empty() || an_target.empty())
                    throw SchemaError("compare probe needs --input and --target");
                const AudioBuffer input = read_wav(an_input);
                const AudioBuffer target = read_wav(an_target);
                const AudioBuffer pred = proc->process(input, cond);
                const auto table = analysis::waveform_compare(
                    pred, target, an_start, std::min<std::size_t>(an_len, target.size()));
                analysis::export_compare_csv(table, (fs::path(an_out) / "compare.csv").string());
                analysis::export_compare_svg(table, (fs::path(an_out) / "compare.svg").string());
                std::cout << "rows: " << table.rows.size() << "\n";
            }
            std::cout << "reports in " << an_out << "\n";
            return 0;
        }
    } catch (const SchemaError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const UnknownKey& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const UnsupportedSpec& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
