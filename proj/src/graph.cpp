#include "nfx/nn/graph.hpp"

#include <cmath>
#include <cstring>
#include <memory>

namespace nfx::nn {

Graph::Id Graph::push(Tensor value, bool needs) {
    Node node;
    node.owned = std::move(value);
    node.needs = needs;
    nodes_.push_back(std::move(node));
    return static_cast<Id>(nodes_.size() - 1);
}

const Tensor& Graph::val(Id id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.ext ? *n.ext : n.owned;
}

const Tensor& Graph::grad(Id id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

Graph::Id Graph::leaf(Tensor t) { return push(std::move(t), true); }

Graph::Id Graph::constant(Tensor t) { return push(std::move(t), false); }

Graph::Id Graph::param(Parameter* p) {
    auto it = param_ids_.find(p);
    if (it != param_ids_.end()) return it->second;
    Node node;
    node.ext = &p->value;
    node.pref = p;
    node.needs = true;
    nodes_.push_back(std::move(node));
    const Id id = static_cast<Id>(nodes_.size() - 1);
    param_ids_.emplace(p, id);
    return id;
}

Graph::Id Graph::add(Id a, Id b) {
    const Tensor& ta = v(a);
    const Tensor& tb = v(b);
    if (!ta.same_shape(tb)) throw ShapeMismatch("add: shapes differ");
    Tensor out(ta.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = ta.data[i] + tb.data[i];
    const Id y = push(std::move(out), needs_grad(a) || needs_grad(b));
    tape_.push_back([this, a, b, y] {
        const Tensor& gy = g(y);
        if (needs_grad(a)) {
            Tensor& ga = g(a);
            for (std::size_t i = 0; i < gy.size(); ++i) ga.data[i] += gy.data[i];
        }
        if (needs_grad(b)) {
            Tensor& gb = g(b);
            for (std::size_t i = 0; i < gy.size(); ++i) gb.data[i] += gy.data[i];
        }
    });
    return y;
}

Graph::Id Graph::mul(Id a, Id b) {
    const Tensor& ta = v(a);
    const Tensor& tb = v(b);
    if (!ta.same_shape(tb)) throw ShapeMismatch("mul: shapes differ");
    Tensor out(ta.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = ta.data[i] * tb.data[i];
    const Id y = push(std::move(out), needs_grad(a) || needs_grad(b));
    tape_.push_back([this, a, b, y] {
        const Tensor& gy = g(y);
        if (needs_grad(a)) {
            Tensor& ga = g(a);
            const Tensor& tb2 = v(b);
            for (std::size_t i = 0; i < gy.size(); ++i) ga.data[i] += gy.data[i] * tb2.data[i];
        }
        if (needs_grad(b)) {
            Tensor& gb = g(b);
            const Tensor& ta2 = v(a);
            for (std::size_t i = 0; i < gy.size(); ++i) gb.data[i] += gy.data[i] * ta2.data[i];
        }
    });
    return y;
}

Graph::Id Graph::add_scalar(Id a, double c) {
    Tensor out = v(a);
    for (double& x : out.data) x += c;
    const Id y = push(std::move(out), needs_grad(a));
    tape_.push_back([this, a, y] {
        if (!needs_grad(a)) return;
        const Tensor& gy = g(y);
        Tensor& ga = g(a);
        for (std::size_t i = 0; i < gy.size(); ++i) ga.data[i] += gy.data[i];
    });
    return y;
}

Graph::Id Graph::scale(Id a, double c) {
    Tensor out = v(a);
    for (double& x : out.data) x *= c;
    const Id y = push(std::move(out), needs_grad(a));
    tape_.push_back([this, a, y, c] {
        if (!needs_grad(a)) return;
        const Tensor& gy = g(y);
        Tensor& ga = g(a);
        for (std::size_t i = 0; i < gy.size(); ++i) ga.data[i] += c * gy.data[i];
    });
    return y;
}

Graph::Id Graph::affine_rows(Id x, Id gamma, Id beta) {
    const Tensor& tx = v(x);
    const Tensor& tg = v(gamma);
    const Tensor& tb = v(beta);
    if (tx.rank() != 2) throw ShapeMismatch("affine_rows: x must be [C, T]");
    const int C = tx.dim(0), T = tx.dim(1);
    if (static_cast<int>(tg.size()) != C || static_cast<int>(tb.size()) != C)
        throw ShapeMismatch("affine_rows: gamma/beta length != channel count");
    Tensor out(tx.shape);
    for (int c = 0; c < C; ++c)
        for (int t = 0; t < T; ++t)
            out.data[static_cast<std::size_t>(c) * T + t] =
                tg.data[c] * tx.data[static_cast<std::size_t>(c) * T + t] + tb.data[c];
    const Id y = push(std::move(out), needs_grad(x) || needs_grad(gamma) || needs_grad(beta));
    tape_.push_back([this, x, gamma, beta, y, C, T] {
        const Tensor& gy = g(y);
        const Tensor& tx2 = v(x);
        const Tensor& tg2 = v(gamma);
        for (int c = 0; c < C; ++c) {
            const std::size_t off = static_cast<std::size_t>(c) * T;
            if (needs_grad(gamma)) {
                double acc = 0.0;
                for (int t = 0; t < T; ++t) acc += gy.data[off + t] * tx2.data[off + t];
                g(gamma).data[c] += acc;
            }
            if (needs_grad(beta)) {
                double acc = 0.0;
                for (int t = 0; t < T; ++t) acc += gy.data[off + t];
                g(beta).data[c] += acc;
            }
            if (needs_grad(x)) {
                Tensor& gx = g(x);
                for (int t = 0; t < T; ++t) gx.data[off + t] += gy.data[off + t] * tg2.data[c];
            }
        }
    });
    return y;
}

Graph::Id Graph::linear(Id x, Id w, Id b) {
    const Tensor& tx = v(x);
    const Tensor& tw = v(w);
    const Tensor& tb = v(b);
    if (tx.rank() != 2 || tw.rank() != 2) throw ShapeMismatch("linear: x and w must be rank 2");
    const int B = tx.dim(0), I = tx.dim(1), O = tw.dim(0);
    if (tw.dim(1) != I || static_cast<int>(tb.size()) != O)
        throw ShapeMismatch("linear: w is [O, I] and b is [O]");
    Tensor out({B, O});
    kernels::linear_forward(tx.data.data(), B, I, tw.data.data(), tb.data.data(), O,
                            out.data.data());
    const Id y = push(std::move(out), needs_grad(x) || needs_grad(w) || needs_grad(b));
    tape_.push_back([this, x, w, b, y, B, I, O] {
        const Tensor& gy = g(y);
        kernels::linear_backward(v(x).data.data(), B, I, v(w).data.data(), O, gy.data.data(),
                                 needs_grad(x) ? g(x).data.data() : nullptr,
                                 g(w).data.data(), g(b).data.data());
    });
    return y;
}

Graph::Id Graph::conv1d(Id x, Id w, Id b, int dilation) {
    const Tensor& tx = v(x);
    const Tensor& tw = v(w);
    const Tensor& tb = v(b);
    if (tx.rank() != 2 || tw.rank() != 3) throw ShapeMismatch("conv1d: x [IC,T], w [OC,IC,K]");
    if (dilation < 1) throw ShapeMismatch("conv1d: dilation must be >= 1");
    const int IC = tx.dim(0), T = tx.dim(1);
    const int OC = tw.dim(0), K = tw.dim(2);
    if (tw.dim(1) != IC || static_cast<int>(tb.size()) != OC)
        throw ShapeMismatch("conv1d: channel mismatch");
    Tensor out({OC, T});
    kernels::conv1d_forward(tx.data.data(), IC, T, tw.data.data(), tb.data.data(), OC, K,
                            dilation, out.data.data());
    const Id y = push(std::move(out), needs_grad(x) || needs_grad(w) || needs_grad(b));
    tape_.push_back([this, x, w, b, y, IC, T, OC, K, dilation] {
        const Tensor& gy = g(y);
        kernels::conv1d_backward(v(x).data.data(), IC, T, v(w).data.data(), OC, K, dilation,
                                 gy.data.data(), needs_grad(x) ? g(x).data.data() : nullptr,
                                 g(w).data.data(), g(b).data.data());
    });
    return y;
}

Graph::Id Graph::activation(Id x, Act kind, Id alpha) {
    const Tensor& tx = v(x);
    if (kind == Act::prelu) {
        if (alpha < 0) throw ShapeMismatch("prelu requires alpha");
        const int channels = tx.rank() == 2 ? tx.dim(0) : 1;
        if (static_cast<int>(v(alpha).size()) != channels)
            throw ShapeMismatch("prelu: one alpha per channel");
    }
    Tensor out(tx.shape);
    const int C = tx.rank() == 2 ? tx.dim(0) : 1;
    const std::size_t per = tx.size() / static_cast<std::size_t>(C);
    for (int c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < per; ++i) {
            const std::size_t idx = static_cast<std::size_t>(c) * per + i;
            const double vx = tx.data[idx];
            switch (kind) {
                case Act::tanh: out.data[idx] = std::tanh(vx); break;
                case Act::sigmoid: out.data[idx] = 1.0 / (1.0 + std::exp(-vx)); break;
                case Act::relu: out.data[idx] = vx > 0.0 ? vx : 0.0; break;
                case Act::prelu:
                    out.data[idx] = vx > 0.0 ? vx : v(alpha).data[c] * vx;
                    break;
            }
        }
    }
    const bool needs = needs_grad(x) || (kind == Act::prelu && needs_grad(alpha));
    const Id y = push(std::move(out), needs);
    tape_.push_back([this, x, y, kind, alpha, C, per] {
        const Tensor& gy = g(y);
        const Tensor& ty = v(y);
        const Tensor& tx2 = v(x);
        for (int c = 0; c < C; ++c) {
            for (std::size_t i = 0; i < per; ++i) {
                const std::size_t idx = static_cast<std::size_t>(c) * per + i;
                const double dy = gy.data[idx];
                double dx = 0.0;
                switch (kind) {
                    case Act::tanh: dx = dy * (1.0 - ty.data[idx] * ty.data[idx]); break;
                    case Act::sigmoid: dx = dy * ty.data[idx] * (1.0 - ty.data[idx]); break;
                    case Act::relu: dx = tx2.data[idx] > 0.0 ? dy : 0.0; break;
                    case Act::prelu: {
                        const double a = v(alpha).data[c];
                        dx = tx2.data[idx] > 0.0 ? dy : dy * a;
                        if (needs_grad(alpha) && tx2.data[idx] <= 0.0)
                            g(alpha).data[c] += dy * tx2.data[idx];
                        break;
                    }
                }
                if (needs_grad(x)) g(x).data[idx] += dx;
            }
        }
    });
    return y;
}

Graph::Id Graph::slice_rows(Id x, int from, int count) {
    const Tensor& tx = v(x);
    if (tx.rank() != 2 || from < 0 || from + count > tx.dim(0))
        throw ShapeMismatch("slice_rows out of range");
    const int T = tx.dim(1);
    Tensor out({count, T});
    std::memcpy(out.data.data(), tx.data.data() + static_cast<std::size_t>(from) * T,
                sizeof(double) * out.size());
    const Id y = push(std::move(out), needs_grad(x));
    tape_.push_back([this, x, y, from, count, T] {
        if (!needs_grad(x)) return;
        const Tensor& gy = g(y);
        Tensor& gx = g(x);
        for (std::size_t i = 0; i < gy.size(); ++i)
            gx.data[static_cast<std::size_t>(from) * T + i] += gy.data[i];
        (void)count;
    });
    return y;
}

Graph::Id Graph::concat_rows(Id a, Id b) {
    const Tensor& ta = v(a);
    const Tensor& tb = v(b);
    if (ta.rank() != 2 || tb.rank() != 2 || ta.dim(1) != tb.dim(1))
        throw ShapeMismatch("concat_rows: time axes differ");
    const int T = ta.dim(1);
    Tensor out({ta.dim(0) + tb.dim(0), T});
    std::memcpy(out.data.data(), ta.data.data(), sizeof(double) * ta.size());
    std::memcpy(out.data.data() + ta.size(), tb.data.data(), sizeof(double) * tb.size());
    const Id y = push(std::move(out), needs_grad(a) || needs_grad(b));
    const std::size_t na = ta.size();
    tape_.push_back([this, a, b, y, na] {
        const Tensor& gy = g(y);
        if (needs_grad(a)) {
            Tensor& ga = g(a);
            for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] += gy.data[i];
        }
        if (needs_grad(b)) {
            Tensor& gb = g(b);
            for (std::size_t i = 0; i < gb.size(); ++i) gb.data[i] += gy.data[na + i];
        }
    });
    return y;
}

Graph::Id Graph::slice_vec(Id x, int from, int count) {
    const Tensor& tx = v(x);
    if (from < 0 || static_cast<std::size_t>(from + count) > tx.size())
        throw ShapeMismatch("slice_vec out of range");
    Tensor out({count});
    std::memcpy(out.data.data(), tx.data.data() + from, sizeof(double) * count);
    const Id y = push(std::move(out), needs_grad(x));
    tape_.push_back([this, x, y, from] {
        if (!needs_grad(x)) return;
        const Tensor& gy = g(y);
        Tensor& gx = g(x);
        for (std::size_t i = 0; i < gy.size(); ++i) gx.data[from + i] += gy.data[i];
    });
    return y;
}

Graph::Id Graph::concat_vec(Id a, Id b) {
    const Tensor& ta = v(a);
    const Tensor& tb = v(b);
    Tensor out({static_cast<int>(ta.size() + tb.size())});
    std::memcpy(out.data.data(), ta.data.data(), sizeof(double) * ta.size());
    std::memcpy(out.data.data() + ta.size(), tb.data.data(), sizeof(double) * tb.size());
    const Id y = push(std::move(out), needs_grad(a) || needs_grad(b));
    const std::size_t na = ta.size();
    tape_.push_back([this, a, b, y, na] {
        const Tensor& gy = g(y);
        if (needs_grad(a)) {
            Tensor& ga = g(a);
            for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] += gy.data[i];
        }
        if (needs_grad(b)) {
            Tensor& gb = g(b);
            for (std::size_t i = 0; i < gb.size(); ++i) gb.data[i] += gy.data[na + i];
        }
    });
    return y;
}

Graph::Id Graph::reshape(Id x, std::vector<int> shape) {
    const Tensor& tx = v(x);
    if (Tensor::count(shape) != static_cast<std::int64_t>(tx.size()))
        throw ShapeMismatch("reshape: element count differs");
    Tensor out(std::move(shape), tx.data);
    const Id y = push(std::move(out), needs_grad(x));
    tape_.push_back([this, x, y] {
        if (!needs_grad(x)) return;
        const Tensor& gy = g(y);
        Tensor& gx = g(x);
        for (std::size_t i = 0; i < gy.size(); ++i) gx.data[i] += gy.data[i];
    });
    return y;
}

Graph::Id Graph::cell_sequence(kernels::CellKind kind, Id x, Id w, Id u, Id b, Id gamma,
                               Id beta, Id h0, Id c0, std::vector<double>* hT,
                               std::vector<double>* cT) {
    const Tensor& tx = v(x);
    if (tx.rank() != 3) throw ShapeMismatch("cell_sequence: x must be [B, T, I]");
    const int B = tx.dim(0), T = tx.dim(1), I = tx.dim(2);
    const int G = kernels::gate_count(kind);
    const Tensor& tw = v(w);
    if (tw.rank() != 2 || tw.dim(1) != I) throw ShapeMismatch("cell_sequence: w is [G*H, I]");
    const int H = tw.dim(0) / G;
    if (tw.dim(0) != G * H || v(u).dim(0) != G * H || v(u).dim(1) != H ||
        static_cast<int>(v(b).size()) != G * H)
        throw ShapeMismatch("cell_sequence: parameter shapes");
    if (static_cast<int>(v(h0).size()) != B * H) throw ShapeMismatch("cell_sequence: h0");
    const bool film = gamma >= 0;
    if (film && (static_cast<int>(v(gamma).size()) != G * H ||
                 static_cast<int>(v(beta).size()) != G * H))
        throw ShapeMismatch("cell_sequence: gamma/beta length");
    const bool lstm = kind == kernels::CellKind::lstm;
    if (lstm && (c0 < 0 || static_cast<int>(v(c0).size()) != B * H))
        throw ShapeMismatch("cell_sequence: lstm needs c0 [B, H]");

    if (hT) hT->assign(static_cast<std::size_t>(B) * H, 0.0);
    if (cT) cT->assign(static_cast<std::size_t>(B) * H, 0.0);

    Tensor out({B, T, H});
    auto cache = std::make_shared<kernels::CellCache>();
    kernels::cell_sequence_forward(kind, B, T, I, H, tx.data.data(), tw.data.data(),
                                   v(u).data.data(), v(b).data.data(),
                                   film ? v(gamma).data.data() : nullptr,
                                   film ? v(beta).data.data() : nullptr, v(h0).data.data(),
                                   lstm ? v(c0).data.data() : nullptr, out.data.data(),
                                   hT ? hT->data() : nullptr, cT ? cT->data() : nullptr,
                                   *cache);
    bool needs = needs_grad(x) || needs_grad(w) || needs_grad(u) || needs_grad(b);
    if (film) needs = needs || needs_grad(gamma) || needs_grad(beta);
    const Id y = push(std::move(out), needs);
    tape_.push_back([this, kind, x, w, u, b, gamma, beta, h0, c0, y, B, T, I, H, film, lstm,
                     cache] {
        const Tensor& gy = g(y);
        kernels::cell_sequence_backward(
            kind, B, T, I, H, v(x).data.data(), v(w).data.data(), v(u).data.data(),
            film ? v(gamma).data.data() : nullptr, film ? v(beta).data.data() : nullptr,
            v(h0).data.data(), lstm ? v(c0).data.data() : nullptr, v(y).data.data(), *cache,
            gy.data.data(), needs_grad(x) ? g(x).data.data() : nullptr, g(w).data.data(),
            g(u).data.data(), g(b).data.data(), film ? g(gamma).data.data() : nullptr,
            film ? g(beta).data.data() : nullptr);
    });
    return y;
}

Graph::Id Graph::cell_step(kernels::CellKind kind, Id x, Id state, Id w, Id u, Id b, Id sw,
                           Id su) {
    const bool lstm = kind == kernels::CellKind::lstm;
    const int G = kernels::gate_count(kind);
    const Tensor& tw = v(w);
    const int I = tw.dim(1);
    const int H = tw.dim(0) / G;
    if (static_cast<int>(v(x).size()) != I) throw ShapeMismatch("cell_step: input length");
    if (static_cast<int>(v(state).size()) != (lstm ? 2 * H : H))
        throw ShapeMismatch("cell_step: state length");
    const bool scaled = sw >= 0;
    if (scaled && (static_cast<int>(v(sw).size()) != G * H ||
                   static_cast<int>(v(su).size()) != G * H))
        throw ShapeMismatch("cell_step: scale length");

    auto gates = std::make_shared<std::vector<double>>(static_cast<std::size_t>(G) * H);
    auto cand = std::make_shared<std::vector<double>>(lstm ? H : 0);
    auto prex = std::make_shared<std::vector<double>>(static_cast<std::size_t>(G) * H);
    auto uh = std::make_shared<std::vector<double>>(static_cast<std::size_t>(G) * H);

    Tensor out({lstm ? 2 * H : H});
    const double* h_prev = v(state).data.data();
    const double* c_prev = lstm ? v(state).data.data() + H : nullptr;
    kernels::cell_step_forward(kind, I, H, v(x).data.data(), tw.data.data(), v(u).data.data(),
                               v(b).data.data(), nullptr, nullptr,
                               scaled ? v(sw).data.data() : nullptr,
                               scaled ? v(su).data.data() : nullptr, h_prev, c_prev,
                               out.data.data(), lstm ? out.data.data() + H : nullptr,
                               gates->data(), lstm ? cand->data() : nullptr, prex->data(),
                               uh->data());
    bool needs = needs_grad(x) || needs_grad(state) || needs_grad(w) || needs_grad(u) ||
                 needs_grad(b);
    if (scaled) needs = needs || needs_grad(sw) || needs_grad(su);
    const Id y = push(std::move(out), needs);
    tape_.push_back([this, kind, x, state, w, u, b, sw, su, y, I, H, lstm, scaled, gates,
                     cand, prex, uh] {
        const Tensor& gy = g(y);
        const double* h_prev2 = v(state).data.data();
        const double* c_prev2 = lstm ? v(state).data.data() + H : nullptr;
        double* dstate = needs_grad(state) ? g(state).data.data() : nullptr;
        kernels::cell_step_backward(
            kind, I, H, v(x).data.data(), v(w).data.data(), v(u).data.data(), nullptr,
            nullptr, scaled ? v(sw).data.data() : nullptr,
            scaled ? v(su).data.data() : nullptr, h_prev2, c_prev2, gates->data(),
            lstm ? cand->data() : nullptr, prex->data(), uh->data(), gy.data.data(),
            lstm ? gy.data.data() + H : nullptr,
            needs_grad(x) ? g(x).data.data() : nullptr, dstate,
            lstm && dstate ? dstate + H : nullptr, g(w).data.data(), g(u).data.data(),
            g(b).data.data(), nullptr, nullptr,
            scaled && needs_grad(sw) ? g(sw).data.data() : nullptr,
            scaled && needs_grad(su) ? g(su).data.data() : nullptr);
    });
    return y;
}

void Graph::backward(Id out, const Tensor& seed) {
    backward(std::vector<std::pair<Id, Tensor>>{{out, seed}});
}

void Graph::backward(const std::vector<std::pair<Id, Tensor>>& seeds) {
    for (const auto& [out, seed] : seeds) {
        if (!v(out).same_shape(seed))
            throw ShapeMismatch("backward: seed shape != output shape");
    }
    for (Node& n : nodes_) {
        n.grad = Tensor(n.ext ? n.ext->shape : n.owned.shape);
    }
    for (const auto& [out, seed] : seeds) {
        Tensor& go = g(out);
        for (std::size_t i = 0; i < seed.size(); ++i) go.data[i] += seed.data[i];
    }
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
    for (Node& n : nodes_) {
        if (n.pref) {
            for (std::size_t i = 0; i < n.grad.size(); ++i)
                n.pref->grad.data[i] += n.grad.data[i];
        }
    }
}

}  // namespace nfx::nn
