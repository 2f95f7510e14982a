#include "nfx/model/model.hpp"

#include <cmath>
#include <cstring>

#include "nfx/kernels/kernels.hpp"
#include "nfx/nn/rng.hpp"

namespace nfx {

using nn::Graph;
using nn::Parameter;
using nn::Tensor;

void ModelState::reset() {
    std::fill(h.begin(), h.end(), 0.0);
    std::fill(c.begin(), c.end(), 0.0);
    std::fill(hyper_h.begin(), hyper_h.end(), 0.0);
    std::fill(context.begin(), context.end(), 0.0);
}

kernels::CellKind Model::cell_kind() const {
    switch (spec_.backbone) {
        case Backbone::lstm: return kernels::CellKind::lstm;
        case Backbone::gru: return kernels::CellKind::gru;
        default: return kernels::CellKind::vanilla;
    }
}

int Model::cell_input_dim() const {
    return 1 + (spec_.conditioning == Conditioning::concat ? spec_.n_conds : 0);
}

int Model::cnn_input_channels() const {
    return 1 + (spec_.conditioning == Conditioning::concat ? spec_.n_conds : 0);
}

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

struct ModelBuilder {
    Model& m;
    nn::Rng rng;

    ModelBuilder(Model& model, std::uint64_t seed) : m(model), rng(seed) {}

    int add(const std::string& name, std::vector<int> shape, int fan_in, bool zero_init,
            double const_init = 0.0, bool use_const = false) {
        Tensor t(std::move(shape));
        if (!zero_init && !use_const) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
            for (double& v : t.data) v = rng.next_uniform(-bound, bound);
        } else if (use_const) {
            t.fill(const_init);
        }
        m.params_.emplace_back(name, std::move(t));
        return static_cast<int>(m.params_.size() - 1);
    }
};

Model Model::build(const ModelSpec& spec, std::uint64_t seed) {
    validate_spec(spec);
    Model m;
    m.spec_ = spec;
    ModelBuilder mb(m, seed);

    const int n = spec.n_conds;
    if (is_cnn(spec.backbone)) {
        const int C = spec.channels;
        const int K = spec.kernel;
        const int cin0 = m.cnn_input_channels();
        m.blocks_.resize(static_cast<std::size_t>(spec.layers));

        if (spec.backbone == Backbone::gcn) {
            m.inproj_w_ = mb.add("inproj.w", {C, cin0, 1}, cin0, false);
            m.inproj_b_ = mb.add("inproj.b", {C}, cin0, false);
        }
        for (int i = 0; i < spec.layers; ++i) {
            auto& blk = m.blocks_[static_cast<std::size_t>(i)];
            const std::string p = "block" + std::to_string(i) + ".";
            if (spec.backbone == Backbone::tcn) {
                const int cin = i == 0 ? cin0 : C;
                blk.conv_w = mb.add(p + "conv.w", {C, cin, K}, cin * K, false);
                blk.conv_b = mb.add(p + "conv.b", {C}, cin * K, false);
                blk.res_w = mb.add(p + "res.w", {C, cin, 1}, cin, false);
                blk.res_b = mb.add(p + "res.b", {C}, cin, false);
                if (spec.cnn_activation == nn::Act::prelu)
                    blk.alpha = mb.add(p + "alpha", {C}, 1, false, 0.25, true);
            } else {
                blk.conv_w = mb.add(p + "conv.w", {2 * C, C, K}, C * K, false);
                blk.conv_b = mb.add(p + "conv.b", {2 * C}, C * K, false);
                blk.skip_w = mb.add(p + "skip.w", {C, C, 1}, C, false);
                blk.skip_b = mb.add(p + "skip.b", {C}, C, false);
                blk.res_w = mb.add(p + "res.w", {C, C, 1}, C, false);
                blk.res_b = mb.add(p + "res.b", {C}, C, false);
            }
        }
        m.mix_w_ = mb.add("mix.w", {1, C, 1}, C, false);
        m.mix_b_ = mb.add("mix.b", {1}, C, false);

        // conditioning generators come after the backbone so that the base
        // weights draw the same rng sequence as an unconditioned model
        const int fh = ModelSpec::film_hidden;
        const int hh = ModelSpec::hyper_hidden;
        for (int i = 0; i < spec.layers; ++i) {
            auto& blk = m.blocks_[static_cast<std::size_t>(i)];
            const std::string p = "block" + std::to_string(i) + ".";
            if (spec.conditioning == Conditioning::film) {
                blk.film_w1 = mb.add(p + "film.w1", {fh, n}, n, false);
                blk.film_b1 = mb.add(p + "film.b1", {fh}, n, false);
                blk.film_w2 = mb.add(p + "film.w2", {2 * C, fh}, fh, true);
                blk.film_b2 = mb.add(p + "film.b2", {2 * C}, fh, true);
            } else if (spec.conditioning == Conditioning::static_hyper) {
                const int wsize = static_cast<int>(m.params_[blk.conv_w].value.size());
                const int bsize = static_cast<int>(m.params_[blk.conv_b].value.size());
                blk.hyper_w1 = mb.add(p + "hyper.w1", {hh, n}, n, false);
                blk.hyper_b1 = mb.add(p + "hyper.b1", {hh}, n, false);
                blk.hyper_w2 = mb.add(p + "hyper.w2", {wsize + bsize, hh}, hh, true);
                blk.hyper_b2 = mb.add(p + "hyper.b2", {wsize + bsize}, hh, true);
            }
        }
    } else {
        const int H = spec.hidden_size;
        const int G = kernels::gate_count(m.cell_kind());
        const int I = m.cell_input_dim();
        m.cell_w_ = mb.add("cell.w", {G * H, I}, I, false);
        m.cell_u_ = mb.add("cell.u", {G * H, H}, H, false);
        m.cell_b_ = mb.add("cell.b", {G * H}, H, false);
        m.out_w_ = mb.add("out.w", {1, H}, H, false);
        m.out_b_ = mb.add("out.b", {1}, H, false);

        const int fh = ModelSpec::film_hidden;
        const int hh = ModelSpec::hyper_hidden;
        const int dh = ModelSpec::dyn_hyper_hidden;
        if (spec.conditioning == Conditioning::film) {
            m.film_w1_ = mb.add("film.w1", {fh, n}, n, false);
            m.film_b1_ = mb.add("film.b1", {fh}, n, false);
            m.film_w2_ = mb.add("film.w2", {2 * G * H, fh}, fh, true);
            m.film_b2_ = mb.add("film.b2", {2 * G * H}, fh, true);
        } else if (spec.conditioning == Conditioning::static_hyper) {
            const int target = G * H * I + G * H * H + G * H;
            m.hyper_w1_ = mb.add("hyper.w1", {hh, n}, n, false);
            m.hyper_b1_ = mb.add("hyper.b1", {hh}, n, false);
            m.hyper_w2_ = mb.add("hyper.w2", {target, hh}, hh, true);
            m.hyper_b2_ = mb.add("hyper.b2", {target}, hh, true);
        } else if (spec.conditioning == Conditioning::dynamic_hyper) {
            m.hcell_w_ = mb.add("hyper_cell.w", {dh, n + H}, n + H, false);
            m.hcell_u_ = mb.add("hyper_cell.u", {dh, dh}, dh, false);
            m.hcell_b_ = mb.add("hyper_cell.b", {dh}, dh, false);
            m.emit_w_ = mb.add("hyper_emit.w", {2 * G * H, dh}, dh, true);
            m.emit_b_ = mb.add("hyper_emit.b", {2 * G * H}, dh, true);
        }
    }
    return m;
}

std::int64_t Model::param_count() const {
    std::int64_t total = 0;
    for (const Parameter& p : params_) total += static_cast<std::int64_t>(p.value.size());
    return total;
}

std::vector<double> Model::flat_values() const {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(param_count()));
    for (const Parameter& p : params_)
        flat.insert(flat.end(), p.value.data.begin(), p.value.data.end());
    return flat;
}

void Model::set_flat_values(const std::vector<double>& flat) {
    std::size_t off = 0;
    for (Parameter& p : params_) {
        if (off + p.value.size() > flat.size()) throw ShapeMismatch("flat value vector too short");
        std::memcpy(p.value.data.data(), flat.data() + off, sizeof(double) * p.value.size());
        off += p.value.size();
    }
    if (off != flat.size()) throw ShapeMismatch("flat value vector too long");
}

void Model::zero_grads() {
    for (Parameter& p : params_) p.zero_grad();
}

ModelState Model::init_state() const {
    ModelState st;
    if (is_cnn(spec_.backbone)) {
        st.context.assign(static_cast<std::size_t>(receptive_field(spec_) - 1), 0.0);
    } else {
        st.h.assign(static_cast<std::size_t>(spec_.hidden_size), 0.0);
        if (spec_.backbone == Backbone::lstm)
            st.c.assign(static_cast<std::size_t>(spec_.hidden_size), 0.0);
        if (spec_.conditioning == Conditioning::dynamic_hyper)
            st.hyper_h.assign(ModelSpec::dyn_hyper_hidden, 0.0);
    }
    return st;
}

// ---------------------------------------------------------------------------
// plain generator evaluation (streaming path)
// ---------------------------------------------------------------------------

void Model::film_eval(int w1, int b1, int w2, int b2, const ConditionVector& cond,
                      int channels, std::vector<double>& gamma,
                      std::vector<double>& beta) const {
    const int fh = ModelSpec::film_hidden;
    std::vector<double> hidden(fh);
    kernels::linear_forward(cond.values.data(), 1, static_cast<int>(cond.size()),
                            params_[w1].value.data.data(), params_[b1].value.data.data(), fh,
                            hidden.data());
    for (double& v : hidden) v = std::tanh(v);
    std::vector<double> raw(2 * channels);
    kernels::linear_forward(hidden.data(), 1, fh, params_[w2].value.data.data(),
                            params_[b2].value.data.data(), 2 * channels, raw.data());
    gamma.resize(channels);
    beta.resize(channels);
    for (int i = 0; i < channels; ++i) {
        gamma[i] = 1.0 + raw[i];
        beta[i] = raw[channels + i];
    }
}

std::vector<double> Model::hyper_delta_eval(int w1, int b1, int w2, int b2,
                                            const ConditionVector& cond) const {
    const int hh = ModelSpec::hyper_hidden;
    std::vector<double> hidden(hh);
    kernels::linear_forward(cond.values.data(), 1, static_cast<int>(cond.size()),
                            params_[w1].value.data.data(), params_[b1].value.data.data(), hh,
                            hidden.data());
    for (double& v : hidden) v = std::tanh(v);
    const int target = params_[w2].value.dim(0);
    std::vector<double> delta(static_cast<std::size_t>(target));
    kernels::linear_forward(hidden.data(), 1, hh, params_[w2].value.data.data(),
                            params_[b2].value.data.data(), target, delta.data());
    return delta;
}

// ---------------------------------------------------------------------------
// streaming forward
// ---------------------------------------------------------------------------

namespace {

void apply_activation_rows(std::vector<double>& x, int C, int T, nn::Act act,
                           const double* alpha) {
    for (int c = 0; c < C; ++c) {
        double* row = x.data() + static_cast<std::size_t>(c) * T;
        if (act == nn::Act::tanh) {
            for (int t = 0; t < T; ++t) row[t] = std::tanh(row[t]);
        } else {
            const double a = alpha[c];
            for (int t = 0; t < T; ++t) row[t] = row[t] > 0.0 ? row[t] : a * row[t];
        }
    }
}

}  // namespace

AudioBuffer Model::process(const AudioBuffer& input, const ConditionVector& cond,
                           ModelState& state) const {
    if (static_cast<int>(cond.size()) != spec_.n_conds)
        throw ConditionDimMismatch("model expects " + std::to_string(spec_.n_conds) +
                                   " conditions, got " + std::to_string(cond.size()));
    if (input.empty()) throw Error("process: empty input");

    AudioBuffer out(std::vector<double>(input.size()), spec_.sample_rate);

    if (!is_cnn(spec_.backbone)) {
        const auto kind = cell_kind();
        const int H = spec_.hidden_size;
        const int G = kernels::gate_count(kind);
        const int I = cell_input_dim();
        const bool lstm = spec_.backbone == Backbone::lstm;
        const bool dynamic = spec_.conditioning == Conditioning::dynamic_hyper;

        // per-condition generator outputs, fixed for the whole call
        std::vector<double> gamma, beta;
        const double* gamma_p = nullptr;
        const double* beta_p = nullptr;
        if (spec_.conditioning == Conditioning::film) {
            film_eval(film_w1_, film_b1_, film_w2_, film_b2_, cond, G * H, gamma, beta);
            gamma_p = gamma.data();
            beta_p = beta.data();
        }
        std::vector<double> w_eff = params_[cell_w_].value.data;
        std::vector<double> u_eff = params_[cell_u_].value.data;
        std::vector<double> b_eff = params_[cell_b_].value.data;
        if (spec_.conditioning == Conditioning::static_hyper) {
            const std::vector<double> delta =
                hyper_delta_eval(hyper_w1_, hyper_b1_, hyper_w2_, hyper_b2_, cond);
            std::size_t off = 0;
            for (double& v : w_eff) v += delta[off++];
            for (double& v : u_eff) v += delta[off++];
            for (double& v : b_eff) v += delta[off++];
        }

        std::vector<double> xvec(static_cast<std::size_t>(I));
        for (int j = 0; j < spec_.n_conds && I > 1; ++j) xvec[1 + j] = cond.values[j];
        std::vector<double> hn(H), cn(H);
        std::vector<double> scales(dynamic ? 2 * G * H : 0);
        std::vector<double> hyper_in(dynamic ? spec_.n_conds + H : 0);
        std::vector<double> hyper_hn(dynamic ? ModelSpec::dyn_hyper_hidden : 0);

        const double* ow = params_[out_w_].value.data.data();
        const double ob = params_[out_b_].value.data[0];

        for (std::size_t t = 0; t < input.size(); ++t) {
            xvec[0] = input.samples[t];
            const double* sw = nullptr;
            const double* su = nullptr;
            if (dynamic) {
                const int dh = ModelSpec::dyn_hyper_hidden;
                for (int j = 0; j < spec_.n_conds; ++j) hyper_in[j] = cond.values[j];
                for (int j = 0; j < H; ++j) hyper_in[spec_.n_conds + j] = state.h[j];
                kernels::cell_step_forward(kernels::CellKind::vanilla,
                                           spec_.n_conds + H, dh, hyper_in.data(),
                                           params_[hcell_w_].value.data.data(),
                                           params_[hcell_u_].value.data.data(),
                                           params_[hcell_b_].value.data.data(), nullptr,
                                           nullptr, nullptr, nullptr, state.hyper_h.data(),
                                           nullptr, hyper_hn.data(), nullptr, nullptr,
                                           nullptr, nullptr, nullptr);
                state.hyper_h = hyper_hn;
                kernels::linear_forward(state.hyper_h.data(), 1, dh,
                                        params_[emit_w_].value.data.data(),
                                        params_[emit_b_].value.data.data(), 2 * G * H,
                                        scales.data());
                for (double& s : scales) s += 1.0;
                sw = scales.data();
                su = scales.data() + G * H;
            }
            kernels::cell_step_forward(kind, I, H, xvec.data(), w_eff.data(), u_eff.data(),
                                       b_eff.data(), gamma_p, beta_p, sw, su, state.h.data(),
                                       lstm ? state.c.data() : nullptr, hn.data(),
                                       lstm ? cn.data() : nullptr, nullptr, nullptr, nullptr,
                                       nullptr);
            state.h = hn;
            if (lstm) state.c = cn;
            double y = ob;
            for (int j = 0; j < H; ++j) y += ow[j] * state.h[j];
            out.samples[t] = y + input.samples[t];  // residual skip
        }
        return out;
    }

    // CNN family: re-run the stack over [context | chunk] and emit the tail.
    const int C = spec_.channels;
    const int K = spec_.kernel;
    const std::size_t ctx = state.context.size();
    const std::size_t T = ctx + input.size();
    const int Ti = static_cast<int>(T);
    const int cin0 = cnn_input_channels();

    std::vector<double> x0(static_cast<std::size_t>(cin0) * T);
    std::memcpy(x0.data(), state.context.data(), sizeof(double) * ctx);
    std::memcpy(x0.data() + ctx, input.samples.data(), sizeof(double) * input.size());
    for (int j = 0; j < cin0 - 1; ++j)
        std::fill_n(x0.data() + static_cast<std::size_t>(1 + j) * T, T, cond.values[j]);

    std::vector<double> cur;
    int cur_ch = cin0;
    if (spec_.backbone == Backbone::gcn) {
        cur.assign(static_cast<std::size_t>(C) * T, 0.0);
        kernels::conv1d_forward(x0.data(), cin0, Ti, params_[inproj_w_].value.data.data(),
                                params_[inproj_b_].value.data.data(), C, 1, 1, cur.data());
        cur_ch = C;
    } else {
        cur = x0;
    }

    std::vector<double> skip_sum;
    if (spec_.backbone == Backbone::gcn) skip_sum.assign(static_cast<std::size_t>(C) * T, 0.0);

    int dilation = 1;
    for (int i = 0; i < spec_.layers; ++i) {
        const auto& blk = blocks_[static_cast<std::size_t>(i)];
        // effective conv weights under StaticHyper
        const Parameter& cw = params_[blk.conv_w];
        const Parameter& cb = params_[blk.conv_b];
        std::vector<double> w_eff = cw.value.data;
        std::vector<double> b_eff = cb.value.data;
        if (spec_.conditioning == Conditioning::static_hyper) {
            const std::vector<double> delta =
                hyper_delta_eval(blk.hyper_w1, blk.hyper_b1, blk.hyper_w2, blk.hyper_b2, cond);
            for (std::size_t j = 0; j < w_eff.size(); ++j) w_eff[j] += delta[j];
            for (std::size_t j = 0; j < b_eff.size(); ++j) b_eff[j] += delta[w_eff.size() + j];
        }
        std::vector<double> gamma, beta;
        if (spec_.conditioning == Conditioning::film)
            film_eval(blk.film_w1, blk.film_b1, blk.film_w2, blk.film_b2, cond, C, gamma, beta);

        if (spec_.backbone == Backbone::tcn) {
            std::vector<double> conv_out(static_cast<std::size_t>(C) * T);
            kernels::conv1d_forward(cur.data(), cur_ch, Ti, w_eff.data(), b_eff.data(), C, K,
                                    dilation, conv_out.data());
            if (!gamma.empty()) {
                for (int c = 0; c < C; ++c)
                    for (int t = 0; t < Ti; ++t)
                        conv_out[static_cast<std::size_t>(c) * T + t] =
                            gamma[c] * conv_out[static_cast<std::size_t>(c) * T + t] + beta[c];
            }
            apply_activation_rows(conv_out, C, Ti, spec_.cnn_activation,
                                  blk.alpha >= 0 ? params_[blk.alpha].value.data.data()
                                                 : nullptr);
            std::vector<double> res(static_cast<std::size_t>(C) * T);
            kernels::conv1d_forward(cur.data(), cur_ch, Ti, params_[blk.res_w].value.data.data(),
                                    params_[blk.res_b].value.data.data(), C, 1, 1, res.data());
            for (std::size_t j = 0; j < conv_out.size(); ++j) conv_out[j] += res[j];
            cur = std::move(conv_out);
            cur_ch = C;
        } else {
            std::vector<double> pair(static_cast<std::size_t>(2 * C) * T);
            kernels::conv1d_forward(cur.data(), cur_ch, Ti, w_eff.data(), b_eff.data(), 2 * C,
                                    K, dilation, pair.data());
            std::vector<double> z(static_cast<std::size_t>(C) * T);
            for (int c = 0; c < C; ++c)
                for (int t = 0; t < Ti; ++t) {
                    const double a = pair[static_cast<std::size_t>(c) * T + t];
                    const double g = pair[static_cast<std::size_t>(C + c) * T + t];
                    z[static_cast<std::size_t>(c) * T + t] =
                        std::tanh(a) * (1.0 / (1.0 + std::exp(-g)));
                }
            if (!gamma.empty()) {
                for (int c = 0; c < C; ++c)
                    for (int t = 0; t < Ti; ++t)
                        z[static_cast<std::size_t>(c) * T + t] =
                            gamma[c] * z[static_cast<std::size_t>(c) * T + t] + beta[c];
            }
            std::vector<double> tmp(static_cast<std::size_t>(C) * T);
            kernels::conv1d_forward(z.data(), C, Ti, params_[blk.skip_w].value.data.data(),
                                    params_[blk.skip_b].value.data.data(), C, 1, 1, tmp.data());
            for (std::size_t j = 0; j < skip_sum.size(); ++j) skip_sum[j] += tmp[j];
            kernels::conv1d_forward(z.data(), C, Ti, params_[blk.res_w].value.data.data(),
                                    params_[blk.res_b].value.data.data(), C, 1, 1, tmp.data());
            for (std::size_t j = 0; j < cur.size(); ++j) cur[j] += tmp[j];
        }
        dilation *= spec_.dilation_growth;
    }

    std::vector<double> y_full(T);
    const std::vector<double>& mix_in = spec_.backbone == Backbone::gcn ? skip_sum : cur;
    kernels::conv1d_forward(mix_in.data(), C, Ti, params_[mix_w_].value.data.data(),
                            params_[mix_b_].value.data.data(), 1, 1, 1, y_full.data());

    std::memcpy(out.samples.data(), y_full.data() + ctx, sizeof(double) * input.size());

    // slide the context ring
    if (ctx > 0) {
        std::vector<double> merged(ctx + input.size());
        std::memcpy(merged.data(), state.context.data(), sizeof(double) * ctx);
        std::memcpy(merged.data() + ctx, input.samples.data(), sizeof(double) * input.size());
        std::memcpy(state.context.data(), merged.data() + merged.size() - ctx,
                    sizeof(double) * ctx);
    }
    return out;
}

// ---------------------------------------------------------------------------
// training graphs
// ---------------------------------------------------------------------------

nn::Graph::Id Model::build_train_graph_cnn(nn::Graph& g, const std::vector<double>& input,
                                           const ConditionVector& cond) const {
    if (static_cast<int>(cond.size()) != spec_.n_conds)
        throw ConditionDimMismatch("cnn graph: condition size");
    auto* self = const_cast<Model*>(this);
    const int C = spec_.channels;
    const int T = static_cast<int>(input.size());
    const int cin0 = cnn_input_channels();

    Tensor x0({cin0, T});
    std::memcpy(x0.data.data(), input.data(), sizeof(double) * input.size());
    for (int j = 0; j < cin0 - 1; ++j)
        std::fill_n(x0.data.data() + static_cast<std::size_t>(1 + j) * T, T, cond.values[j]);
    Graph::Id cur = g.constant(std::move(x0));

    Graph::Id cond_row = -1;
    if (spec_.conditioning == Conditioning::film ||
        spec_.conditioning == Conditioning::static_hyper) {
        cond_row = g.constant(Tensor({1, spec_.n_conds}, cond.values));
    }

    if (spec_.backbone == Backbone::gcn)
        cur = g.conv1d(cur, g.param(&self->params_[inproj_w_]),
                       g.param(&self->params_[inproj_b_]), 1);

    Graph::Id skip_sum = -1;
    int dilation = 1;
    for (int i = 0; i < spec_.layers; ++i) {
        const auto& blk = blocks_[static_cast<std::size_t>(i)];
        Graph::Id w_id = g.param(&self->params_[blk.conv_w]);
        Graph::Id b_id = g.param(&self->params_[blk.conv_b]);
        if (spec_.conditioning == Conditioning::static_hyper) {
            // residual emission: conv weights = base + MLP(cond)
            Graph::Id hidden = g.activation(
                g.linear(cond_row, g.param(&self->params_[blk.hyper_w1]),
                         g.param(&self->params_[blk.hyper_b1])),
                nn::Act::tanh);
            Graph::Id delta = g.linear(hidden, g.param(&self->params_[blk.hyper_w2]),
                                       g.param(&self->params_[blk.hyper_b2]));
            const int wsize = static_cast<int>(params_[blk.conv_w].value.size());
            const int bsize = static_cast<int>(params_[blk.conv_b].value.size());
            delta = g.reshape(delta, {wsize + bsize});
            w_id = g.add(w_id, g.reshape(g.slice_vec(delta, 0, wsize),
                                         params_[blk.conv_w].value.shape));
            b_id = g.add(b_id, g.slice_vec(delta, wsize, bsize));
        }
        Graph::Id gamma = -1, beta = -1;
        if (spec_.conditioning == Conditioning::film) {
            Graph::Id hidden = g.activation(
                g.linear(cond_row, g.param(&self->params_[blk.film_w1]),
                         g.param(&self->params_[blk.film_b1])),
                nn::Act::tanh);
            Graph::Id raw = g.linear(hidden, g.param(&self->params_[blk.film_w2]),
                                     g.param(&self->params_[blk.film_b2]));
            raw = g.reshape(raw, {2 * C});
            gamma = g.add_scalar(g.slice_vec(raw, 0, C), 1.0);
            beta = g.slice_vec(raw, C, C);
        }

        if (spec_.backbone == Backbone::tcn) {
            Graph::Id conv = g.conv1d(cur, w_id, b_id, dilation);
            if (gamma >= 0) conv = g.affine_rows(conv, gamma, beta);
            Graph::Id act =
                spec_.cnn_activation == nn::Act::prelu
                    ? g.activation(conv, nn::Act::prelu, g.param(&self->params_[blk.alpha]))
                    : g.activation(conv, nn::Act::tanh);
            Graph::Id res = g.conv1d(cur, g.param(&self->params_[blk.res_w]),
                                     g.param(&self->params_[blk.res_b]), 1);
            cur = g.add(act, res);
        } else {
            Graph::Id pair = g.conv1d(cur, w_id, b_id, dilation);
            Graph::Id a = g.slice_rows(pair, 0, C);
            Graph::Id gate = g.slice_rows(pair, C, C);
            Graph::Id z = g.mul(g.activation(a, nn::Act::tanh),
                                g.activation(gate, nn::Act::sigmoid));
            if (gamma >= 0) z = g.affine_rows(z, gamma, beta);
            Graph::Id skip = g.conv1d(z, g.param(&self->params_[blk.skip_w]),
                                      g.param(&self->params_[blk.skip_b]), 1);
            skip_sum = skip_sum < 0 ? skip : g.add(skip_sum, skip);
            Graph::Id res = g.conv1d(z, g.param(&self->params_[blk.res_w]),
                                     g.param(&self->params_[blk.res_b]), 1);
            cur = g.add(cur, res);
        }
        dilation *= spec_.dilation_growth;
    }

    Graph::Id mix_in = spec_.backbone == Backbone::gcn ? skip_sum : cur;
    Graph::Id y = g.conv1d(mix_in, g.param(&self->params_[mix_w_]),
                           g.param(&self->params_[mix_b_]), 1);
    return g.reshape(y, {T});
}

Model::RnnChunkGraph Model::build_train_graph_rnn(
    nn::Graph& g, const std::vector<double>& x, int B, int T,
    const std::vector<ConditionVector>& conds, std::vector<std::vector<double>>& h_state,
    std::vector<std::vector<double>>& c_state,
    std::vector<std::vector<double>>& hyper_state) const {
    auto* self = const_cast<Model*>(this);
    const auto kind = cell_kind();
    const int H = spec_.hidden_size;
    const int G = kernels::gate_count(kind);
    const int I = cell_input_dim();
    const bool lstm = spec_.backbone == Backbone::lstm;
    const bool dynamic = spec_.conditioning == Conditioning::dynamic_hyper;

    // group items by identical condition vector (weights/FiLM are per-cond)
    std::vector<std::vector<int>> groups;
    if (spec_.conditioning == Conditioning::concat) {
        groups.emplace_back(static_cast<std::size_t>(B));
        for (int i = 0; i < B; ++i) groups[0][static_cast<std::size_t>(i)] = i;
    } else if (dynamic) {
        for (int i = 0; i < B; ++i) groups.push_back({i});
    } else {
        for (int i = 0; i < B; ++i) {
            bool placed = false;
            for (auto& grp : groups) {
                if (conds[static_cast<std::size_t>(grp[0])].values ==
                    conds[static_cast<std::size_t>(i)].values) {
                    grp.push_back(i);
                    placed = true;
                    break;
                }
            }
            if (!placed) groups.push_back({i});
        }
    }

    RnnChunkGraph result;
    for (const auto& items : groups) {
        const int Bg = static_cast<int>(items.size());
        RnnChunkGraph::Group group;
        group.items = items;

        if (!dynamic) {
            const ConditionVector& cond = conds[static_cast<std::size_t>(items[0])];
            Graph::Id w_id = g.param(&self->params_[cell_w_]);
            Graph::Id u_id = g.param(&self->params_[cell_u_]);
            Graph::Id b_id = g.param(&self->params_[cell_b_]);
            Graph::Id gamma = -1, beta = -1;
            if (spec_.conditioning == Conditioning::film) {
                Graph::Id cond_row = g.constant(Tensor({1, spec_.n_conds}, cond.values));
                Graph::Id hidden = g.activation(
                    g.linear(cond_row, g.param(&self->params_[film_w1_]),
                             g.param(&self->params_[film_b1_])),
                    nn::Act::tanh);
                Graph::Id raw = g.linear(hidden, g.param(&self->params_[film_w2_]),
                                         g.param(&self->params_[film_b2_]));
                raw = g.reshape(raw, {2 * G * H});
                gamma = g.add_scalar(g.slice_vec(raw, 0, G * H), 1.0);
                beta = g.slice_vec(raw, G * H, G * H);
            } else if (spec_.conditioning == Conditioning::static_hyper) {
                Graph::Id cond_row = g.constant(Tensor({1, spec_.n_conds}, cond.values));
                Graph::Id hidden = g.activation(
                    g.linear(cond_row, g.param(&self->params_[hyper_w1_]),
                             g.param(&self->params_[hyper_b1_])),
                    nn::Act::tanh);
                Graph::Id delta = g.linear(hidden, g.param(&self->params_[hyper_w2_]),
                                           g.param(&self->params_[hyper_b2_]));
                const int wsize = G * H * I, usize = G * H * H, bsize = G * H;
                delta = g.reshape(delta, {wsize + usize + bsize});
                w_id = g.add(w_id, g.reshape(g.slice_vec(delta, 0, wsize), {G * H, I}));
                u_id = g.add(u_id, g.reshape(g.slice_vec(delta, wsize, usize), {G * H, H}));
                b_id = g.add(b_id, g.slice_vec(delta, wsize + usize, bsize));
            }

            Tensor xin({Bg, T, I});
            Tensor xskip({Bg, T});
            Tensor h0({Bg, H});
            Tensor c0({Bg, H});
            for (int r = 0; r < Bg; ++r) {
                const int item = items[static_cast<std::size_t>(r)];
                const ConditionVector& cv = conds[static_cast<std::size_t>(item)];
                for (int t = 0; t < T; ++t) {
                    const double xv = x[static_cast<std::size_t>(item) * T + t];
                    double* row =
                        xin.data.data() + (static_cast<std::size_t>(r) * T + t) * I;
                    row[0] = xv;
                    for (int j = 1; j < I; ++j) row[j] = cv.values[static_cast<std::size_t>(j - 1)];
                    xskip.data[static_cast<std::size_t>(r) * T + t] = xv;
                }
                std::memcpy(h0.data.data() + static_cast<std::size_t>(r) * H,
                            h_state[static_cast<std::size_t>(item)].data(), sizeof(double) * H);
                if (lstm)
                    std::memcpy(c0.data.data() + static_cast<std::size_t>(r) * H,
                                c_state[static_cast<std::size_t>(item)].data(),
                                sizeof(double) * H);
            }
            Graph::Id x_id = g.constant(std::move(xin));
            Graph::Id h0_id = g.constant(std::move(h0));
            Graph::Id c0_id = lstm ? g.constant(std::move(c0)) : -1;

            std::vector<double> hT, cT;
            Graph::Id h_all = g.cell_sequence(kind, x_id, w_id, u_id, b_id, gamma, beta,
                                              h0_id, c0_id, &hT, lstm ? &cT : nullptr);
            Graph::Id flat = g.reshape(h_all, {Bg * T, H});
            Graph::Id y = g.linear(flat, g.param(&self->params_[out_w_]),
                                   g.param(&self->params_[out_b_]));
            y = g.reshape(y, {Bg, T});
            y = g.add(y, g.constant(std::move(xskip)));
            group.out = y;

            for (int r = 0; r < Bg; ++r) {
                const int item = items[static_cast<std::size_t>(r)];
                h_state[static_cast<std::size_t>(item)]
                    .assign(hT.begin() + static_cast<std::ptrdiff_t>(r) * H,
                            hT.begin() + static_cast<std::ptrdiff_t>(r + 1) * H);
                if (lstm)
                    c_state[static_cast<std::size_t>(item)]
                        .assign(cT.begin() + static_cast<std::ptrdiff_t>(r) * H,
                                cT.begin() + static_cast<std::ptrdiff_t>(r + 1) * H);
            }
        } else {
            // DynamicHyper: per-step ops, one item per group
            const int item = items[0];
            const ConditionVector& cond = conds[static_cast<std::size_t>(item)];
            const int dh = ModelSpec::dyn_hyper_hidden;
            Graph::Id cond_id = g.constant(Tensor({spec_.n_conds}, cond.values));

            Graph::Id s_id;
            if (lstm) {
                Tensor s0({2 * H});
                std::memcpy(s0.data.data(), h_state[static_cast<std::size_t>(item)].data(),
                            sizeof(double) * H);
                std::memcpy(s0.data.data() + H, c_state[static_cast<std::size_t>(item)].data(),
                            sizeof(double) * H);
                s_id = g.constant(std::move(s0));
            } else {
                s_id = g.constant(Tensor({H}, h_state[static_cast<std::size_t>(item)]));
            }
            Graph::Id hs_id = g.constant(Tensor({dh}, hyper_state[static_cast<std::size_t>(item)]));

            Graph::Id cw = g.param(&self->params_[cell_w_]);
            Graph::Id cu = g.param(&self->params_[cell_u_]);
            Graph::Id cb = g.param(&self->params_[cell_b_]);
            Graph::Id hw = g.param(&self->params_[hcell_w_]);
            Graph::Id hu = g.param(&self->params_[hcell_u_]);
            Graph::Id hb = g.param(&self->params_[hcell_b_]);
            Graph::Id ew = g.param(&self->params_[emit_w_]);
            Graph::Id eb = g.param(&self->params_[emit_b_]);
            Graph::Id ow = g.param(&self->params_[out_w_]);
            Graph::Id ob = g.param(&self->params_[out_b_]);

            Graph::Id ys = -1;
            for (int t = 0; t < T; ++t) {
                const double xv = x[static_cast<std::size_t>(item) * T + t];
                Graph::Id x_t = g.constant(Tensor({1}, {xv}));
                Graph::Id h_prev = lstm ? g.slice_vec(s_id, 0, H) : s_id;
                Graph::Id hin = g.concat_vec(cond_id, h_prev);
                hs_id = g.cell_step(kernels::CellKind::vanilla, hin, hs_id, hw, hu, hb);
                Graph::Id emit = g.linear(g.reshape(hs_id, {1, dh}), ew, eb);
                Graph::Id scales = g.add_scalar(g.reshape(emit, {2 * G * H}), 1.0);
                Graph::Id sw = g.slice_vec(scales, 0, G * H);
                Graph::Id su = g.slice_vec(scales, G * H, G * H);
                s_id = g.cell_step(kind, x_t, s_id, cw, cu, cb, sw, su);
                Graph::Id h_id = lstm ? g.slice_vec(s_id, 0, H) : s_id;
                Graph::Id y_t = g.linear(g.reshape(h_id, {1, H}), ow, ob);
                Graph::Id y_flat = g.reshape(y_t, {1});
                ys = ys < 0 ? y_flat : g.concat_vec(ys, y_flat);
            }
            Tensor xskip({1, T});
            for (int t = 0; t < T; ++t)
                xskip.data[static_cast<std::size_t>(t)] = x[static_cast<std::size_t>(item) * T + t];
            Graph::Id y = g.add(g.reshape(ys, {1, T}), g.constant(std::move(xskip)));
            group.out = y;

            // detach next-chunk state
            const Tensor& s_val = g.val(s_id);
            h_state[static_cast<std::size_t>(item)].assign(s_val.data.begin(),
                                                           s_val.data.begin() + H);
            if (lstm)
                c_state[static_cast<std::size_t>(item)].assign(s_val.data.begin() + H,
                                                               s_val.data.end());
            const Tensor& hs_val = g.val(hs_id);
            hyper_state[static_cast<std::size_t>(item)] = hs_val.data;
        }
        result.groups.push_back(std::move(group));
    }
    return result;
}

}  // namespace nfx
