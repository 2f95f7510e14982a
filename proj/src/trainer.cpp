#include "nfx/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "nfx/fx/reference_fx.hpp"
#include "nfx/nn/adam.hpp"
#include "nfx/nn/graph.hpp"
#include "nfx/nn/rng.hpp"
#include "nfx/wav.hpp"

namespace nfx {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// validation loss via the streaming path: warm up on the context, then
// compare the rendered segment against the target
double segment_loss_streaming(const Model& model, const LossSpec& loss, const Segment& seg,
                              std::size_t context_len) {
    ModelState state = model.init_state();
    if (context_len > 0) {
        AudioBuffer ctx(std::vector<double>(seg.input.samples.begin(),
                                            seg.input.samples.begin() +
                                                static_cast<std::ptrdiff_t>(context_len)),
                        seg.input.sample_rate);
        (void)model.process(ctx, seg.condition, state);
    }
    AudioBuffer body(std::vector<double>(seg.input.samples.begin() +
                                             static_cast<std::ptrdiff_t>(context_len),
                                         seg.input.samples.end()),
                     seg.input.sample_rate);
    const AudioBuffer pred = model.process(body, seg.condition, state);
    return composite_loss(loss, pred.samples, seg.target.samples).value;
}

double grad_norm(const std::vector<nn::Parameter>& params) {
    double acc = 0.0;
    for (const auto& p : params)
        for (double gv : p.grad.data) acc += gv * gv;
    return std::sqrt(acc);
}

void scale_grads(std::vector<nn::Parameter>& params, double s) {
    for (auto& p : params)
        for (double& gv : p.grad.data) gv *= s;
}

std::string fmt_loss(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

TrainResult train(const TrainConfig& config) {
    validate_spec(config.model);
    config.loss.validate();

    const DatasetManifest manifest = load_manifest(config.data.manifest);
    if (manifest.sample_rate != config.model.sample_rate)
        throw SampleRateMismatch("manifest at " + std::to_string(manifest.sample_rate) +
                                 " Hz, model at " + std::to_string(config.model.sample_rate));
    if (config.model.n_conds != static_cast<int>(manifest.condition_names.size()))
        throw SchemaError("model.n_conds = " + std::to_string(config.model.n_conds) +
                          " but manifest has " +
                          std::to_string(manifest.condition_names.size()) + " conditions");

    const auto context_len = static_cast<std::size_t>(config.resolved_context_len());
    const auto seg_len = static_cast<std::size_t>(config.data.segment_len);
    const auto hop = static_cast<std::size_t>(config.resolved_hop());
    const auto train_set = segment_dataset(manifest, Split::train, seg_len, context_len, hop);
    const auto valid_set = segment_dataset(manifest, Split::valid, seg_len, context_len, hop);
    if (train_set.segments.empty()) throw EmptySplit("train split yielded no segments");
    if (valid_set.segments.empty()) throw EmptySplit("valid split yielded no segments");
    const std::size_t n_valid = config.train.valid_segments > 0
                                    ? std::min<std::size_t>(valid_set.segments.size(),
                                                            static_cast<std::size_t>(
                                                                config.train.valid_segments))
                                    : valid_set.segments.size();

    Model model = Model::build(config.model, config.train.seed);
    nn::AdamOptimizer optimizer(model.params(), config.train.lr);
    nn::Rng batch_rng(config.train.seed * 0x9E3779B97F4A7C15ULL + 1);

    fs::create_directories(config.out_dir);
    TrainResult result;
    result.checkpoint_path = (fs::path(config.out_dir) / "checkpoint.nfxc").string();
    result.log_path = (fs::path(config.out_dir) / "log.csv").string();
    result.config_echo_path = (fs::path(config.out_dir) / "config_echo.json").string();
    {
        std::ofstream echo(result.config_echo_path, std::ios::trunc);
        echo << config_to_json(config) << "\n";
    }
    std::ofstream log(result.log_path, std::ios::trunc);
    if (!log) throw IoError("cannot write " + result.log_path);
    log << "step,train_loss,valid_loss,wall_ms\n";

    // shuffled epoch order, reshuffled deterministically on wrap
    std::vector<std::size_t> order(train_set.segments.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();  // force initial shuffle
    auto next_index = [&]() {
        if (cursor >= order.size()) {
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[batch_rng.next_below(i)]);
            cursor = 0;
        }
        return order[cursor++];
    };

    const bool cnn = is_cnn(config.model.backbone);
    const int B = config.train.batch_size;
    double best_valid = std::numeric_limits<double>::infinity();
    std::vector<double> best_params = model.flat_values();
    double current_lr = config.train.lr;
    const double t_start = now_ms();

    auto run_validation = [&]() {
        double acc = 0.0;
        for (std::size_t i = 0; i < n_valid; ++i)
            acc += segment_loss_streaming(model, config.loss, valid_set.segments[i], context_len);
        return acc / static_cast<double>(n_valid);
    };

    for (int step = 1; step <= config.train.max_steps; ++step) {
        std::vector<const Segment*> batch;
        batch.reserve(static_cast<std::size_t>(B));
        for (int i = 0; i < B; ++i) batch.push_back(&train_set.segments[next_index()]);

        model.zero_grads();
        double step_loss = 0.0;

        if (cnn) {
            for (int i = 0; i < B; ++i) {
                const Segment& seg = *batch[static_cast<std::size_t>(i)];
                nn::Graph g;
                const auto out = model.build_train_graph_cnn(g, seg.input.samples, seg.condition);
                const nn::Tensor& pred = g.val(out);
                const std::size_t T = pred.size();
                const LossResult lr = composite_loss(
                    config.loss,
                    std::span<const double>(pred.data.data() + context_len, seg_len),
                    seg.target.samples);
                step_loss += lr.value / B;
                nn::Tensor seed({static_cast<int>(T)});
                for (std::size_t j = 0; j < seg_len; ++j)
                    seed.data[context_len + j] = lr.grad[j] / B;
                g.backward(out, seed);
            }
        } else {
            // warm up hidden state over the context region (no gradients)
            const int H = config.model.hidden_size;
            std::vector<std::vector<double>> h_state(static_cast<std::size_t>(B)),
                c_state(static_cast<std::size_t>(B)), hyper_state(static_cast<std::size_t>(B));
            std::vector<ConditionVector> conds(static_cast<std::size_t>(B));
            for (int i = 0; i < B; ++i) {
                const Segment& seg = *batch[static_cast<std::size_t>(i)];
                conds[static_cast<std::size_t>(i)] = seg.condition;
                ModelState st = model.init_state();
                if (context_len > 0) {
                    AudioBuffer ctx(
                        std::vector<double>(seg.input.samples.begin(),
                                            seg.input.samples.begin() +
                                                static_cast<std::ptrdiff_t>(context_len)),
                        seg.input.sample_rate);
                    (void)model.process(ctx, seg.condition, st);
                }
                h_state[static_cast<std::size_t>(i)] = st.h;
                c_state[static_cast<std::size_t>(i)] =
                    st.c.empty() ? std::vector<double>(static_cast<std::size_t>(H), 0.0) : st.c;
                hyper_state[static_cast<std::size_t>(i)] = st.hyper_h;
            }

            const auto tbptt = static_cast<std::size_t>(config.train.tbptt_len);
            const std::size_t n_chunks = (seg_len + tbptt - 1) / tbptt;
            for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) {
                const std::size_t t0 = chunk * tbptt;
                const std::size_t tc = std::min(tbptt, seg_len - t0);
                std::vector<double> x(static_cast<std::size_t>(B) * tc);
                for (int i = 0; i < B; ++i) {
                    const Segment& seg = *batch[static_cast<std::size_t>(i)];
                    std::memcpy(x.data() + static_cast<std::size_t>(i) * tc,
                                seg.input.samples.data() + context_len + t0,
                                sizeof(double) * tc);
                }
                nn::Graph g;
                const auto chunk_graph = model.build_train_graph_rnn(
                    g, x, B, static_cast<int>(tc), conds, h_state, c_state, hyper_state);
                std::vector<std::pair<nn::Graph::Id, nn::Tensor>> seeds;
                const double norm = 1.0 / (static_cast<double>(B) * static_cast<double>(n_chunks));
                for (const auto& group : chunk_graph.groups) {
                    const nn::Tensor& pred = g.val(group.out);
                    nn::Tensor seed(pred.shape);
                    for (std::size_t r = 0; r < group.items.size(); ++r) {
                        const Segment& seg = *batch[static_cast<std::size_t>(group.items[r])];
                        const LossResult lr = composite_loss(
                            config.loss,
                            std::span<const double>(pred.data.data() + r * tc, tc),
                            std::span<const double>(seg.target.samples.data() + t0, tc));
                        step_loss += lr.value * norm;
                        for (std::size_t j = 0; j < tc; ++j)
                            seed.data[r * tc + j] = lr.grad[j] * norm;
                    }
                    seeds.emplace_back(group.out, std::move(seed));
                }
                g.backward(seeds);
            }
        }

        if (!std::isfinite(step_loss))
            throw NonFiniteLoss("training diverged at step " + std::to_string(step));

        if (config.train.grad_clip_norm > 0.0) {
            const double norm = grad_norm(model.params());
            if (norm > config.train.grad_clip_norm)
                scale_grads(model.params(), config.train.grad_clip_norm / norm);
        }
        if (config.train.lr_decay_every > 0 && step % config.train.lr_decay_every == 0) {
            current_lr *= config.train.lr_decay_factor;
            optimizer.set_lr(current_lr);
        }
        optimizer.step();

        std::string valid_cell;
        if (step % config.train.valid_every == 0 || step == config.train.max_steps) {
            const double valid_loss = run_validation();
            if (!std::isfinite(valid_loss))
                throw NonFiniteLoss("validation diverged at step " + std::to_string(step));
            valid_cell = fmt_loss(valid_loss);
            if (valid_loss < best_valid) {
                best_valid = valid_loss;
                best_params = model.flat_values();
            }
        }
        log << step << ',' << fmt_loss(step_loss) << ',' << valid_cell << ','
            << static_cast<long long>(now_ms() - t_start) << '\n';
        result.steps_run = step;
    }

    if (config.train.max_steps == 0) best_valid = run_validation();
    model.set_flat_values(best_params);
    CheckpointInfo info;
    info.config = config;
    info.condition_names = manifest.condition_names;
    info.condition_ranges = manifest.condition_ranges;
    save_checkpoint(model, info, result.checkpoint_path);
    result.best_valid_loss = best_valid;
    return result;
}

AudioBuffer render_streaming(const Model& model, const AudioBuffer& input,
                             const ConditionVector& cond, std::size_t chunk) {
    ModelState state = model.init_state();
    AudioBuffer out(std::vector<double>(input.size()), model.spec().sample_rate);
    for (std::size_t pos = 0; pos < input.size(); pos += chunk) {
        const std::size_t len = std::min(chunk, input.size() - pos);
        AudioBuffer piece(std::vector<double>(input.samples.begin() +
                                                  static_cast<std::ptrdiff_t>(pos),
                                              input.samples.begin() +
                                                  static_cast<std::ptrdiff_t>(pos + len)),
                          input.sample_rate);
        const AudioBuffer rendered = model.process(piece, cond, state);
        std::memcpy(out.samples.data() + pos, rendered.samples.data(), sizeof(double) * len);
    }
    return out;
}

EvalResult evaluate(const std::string& checkpoint_path, const std::string& manifest_path,
                    Split split, const std::string& report_path) {
    LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
    const DatasetManifest manifest = load_manifest(manifest_path);
    if (manifest.sample_rate != ckpt.model.spec().sample_rate)
        throw SampleRateMismatch("checkpoint at " +
                                 std::to_string(ckpt.model.spec().sample_rate) +
                                 " Hz, manifest at " + std::to_string(manifest.sample_rate));

    // normalization uses the training-time ranges stored in the checkpoint
    DatasetManifest norm;
    norm.sample_rate = manifest.sample_rate;
    norm.condition_names = ckpt.info.condition_names;
    norm.condition_ranges = ckpt.info.condition_ranges;

    EvalResult result;
    bool any = false;
    for (const auto& entry : manifest.entries) {
        if (entry.split != split) continue;
        any = true;
        const AudioBuffer input = read_wav(manifest.resolve(entry.input_path));
        const AudioBuffer target = read_wav(manifest.resolve(entry.target_path));
        const ConditionVector cond = normalize_condition(norm, entry.condition_raw);
        const AudioBuffer pred = render_streaming(ckpt.model, input, cond);
        result.entries.push_back(compute_metrics(pred, target));
        result.entry_inputs.push_back(entry.input_path);
    }
    if (!any) throw EmptySplit("no entries with split " + split_to_string(split));

    const double n = static_cast<double>(result.entries.size());
    for (const auto& m : result.entries) {
        result.aggregate.esr += m.esr / n;
        result.aggregate.loudness_db += m.loudness_db / n;
        result.aggregate.crest_db += m.crest_db / n;
        result.aggregate.rms_db += m.rms_db / n;
        result.aggregate.transient += m.transient / n;
        result.aggregate.centroid_hz += m.centroid_hz / n;
    }

    result.report_path = report_path;
    if (result.report_path.empty()) {
        result.report_path =
            (fs::path(checkpoint_path).parent_path() / "metrics.json").string();
    }
    json doc;
    json entries = json::array();
    for (std::size_t i = 0; i < result.entries.size(); ++i) {
        json e = json::parse(metric_report_json(result.entries[i]));
        e["input"] = result.entry_inputs[i];
        entries.push_back(e);
    }
    doc["split"] = split_to_string(split);
    doc["entries"] = entries;
    doc["aggregate"] = json::parse(metric_report_json(result.aggregate));
    std::ofstream out(result.report_path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + result.report_path);
    out << doc.dump(2) << "\n";
    return result;
}

ModelProcessor::ModelProcessor(LoadedCheckpoint checkpoint) : ckpt_(std::move(checkpoint)) {
    norm_.sample_rate = ckpt_.model.spec().sample_rate;
    norm_.condition_names = ckpt_.info.condition_names;
    norm_.condition_ranges = ckpt_.info.condition_ranges;
}

int ModelProcessor::sample_rate() const { return ckpt_.model.spec().sample_rate; }

AudioBuffer ModelProcessor::process(const AudioBuffer& input, const ConditionVector& cond_raw) {
    const ConditionVector cond = normalize_condition(norm_, cond_raw.values);
    return render_streaming(ckpt_.model, input, cond);
}

EffectProcessor::EffectProcessor(std::string name, int sample_rate)
    : name_(std::move(name)), sample_rate_(sample_rate) {}

int EffectProcessor::sample_rate() const { return sample_rate_; }

AudioBuffer EffectProcessor::process(const AudioBuffer& input, const ConditionVector& cond) {
    const double knob = cond.values.empty() ? 0.5 : cond.values[0];
    return fx::apply_reference_effect(name_, input, knob);
}

}  // namespace nfx
