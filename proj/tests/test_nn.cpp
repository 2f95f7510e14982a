#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "nfx/nn/adam.hpp"
#include "nfx/nn/graph.hpp"
#include "nfx/nn/rng.hpp"
#include "oracles.hpp"

using namespace nfx;
using nn::Act;
using nn::Graph;
using nn::Parameter;
using nn::Tensor;
using kernels::CellKind;

namespace {

constexpr double kH = 1e-5;
constexpr double kTol = 1e-5;

// Checks d(sum c_i y_i)/d(storage) for every listed leaf, rebuilding the
// graph from live storage on every probe.
struct GradHarness {
    std::function<Graph::Id(Graph&)> build;  // reads the storages below
    std::vector<std::vector<double>*> leaves;
    std::vector<double> weights;  // c, sized lazily

    void run() {
        Graph probe;
        const Graph::Id out0 = build(probe);
        nn::Rng rng(991);
        weights = oracles::random_vector(rng, probe.val(out0).size());

        auto loss = [&] {
            Graph g;
            const Graph::Id out = build(g);
            const Tensor& y = g.val(out);
            double acc = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) acc += weights[i] * y.data[i];
            return acc;
        };

        for (std::size_t li = 0; li < leaves.size(); ++li) {
            // analytic gradient for this leaf via one fresh backward pass
            Graph g;
            const Graph::Id out = build(g);
            REQUIRE(leaf_ids.size() == leaves.size());
            Tensor seed(g.val(out).shape, weights);
            g.backward(out, seed);
            const std::vector<double> analytic = g.grad(leaf_ids[li]).data;
            oracles::FdFailure fail;
            const bool ok = oracles::check_gradient(*leaves[li], analytic, loss, kH, kTol, &fail);
            CHECK_MESSAGE(ok, "leaf " << li << " idx " << fail.index << " fd " << fail.fd
                                      << " analytic " << fail.analytic);
        }
    }

    std::vector<Graph::Id> leaf_ids;  // filled by build via record()
    Graph::Id record(Graph::Id id) {
        leaf_ids.push_back(id);
        return id;
    }
};

}  // namespace

TEST_CASE("linear: identity weight, zero input, and finite differences") {
    Graph g;
    Tensor w({2, 2}, {1, 0, 0, 1});
    Tensor b({2}, {0, 0});
    Tensor x({1, 2}, {0.3, -0.7});
    auto y = g.linear(g.constant(x), g.constant(w), g.constant(b));
    CHECK(g.val(y).data == std::vector<double>{0.3, -0.7});

    Graph g2;
    Tensor zero({3, 2});
    Tensor b2({4}, {1, 2, 3, 4});
    Tensor w2({4, 2}, std::vector<double>(8, 0.5));
    auto y2 = g2.linear(g2.constant(zero), g2.constant(w2), g2.constant(b2));
    for (int r = 0; r < 3; ++r)
        for (int o = 0; o < 4; ++o)
            CHECK(g2.val(y2).data[static_cast<std::size_t>(r) * 4 + o] ==
                  doctest::Approx(b2.data[static_cast<std::size_t>(o)]));

    nn::Rng rng(1);
    for (int rep = 0; rep < 5; ++rep) {
        const int B = 1 + static_cast<int>(rng.next_below(4));
        const int I = 1 + static_cast<int>(rng.next_below(5));
        const int O = 1 + static_cast<int>(rng.next_below(4));
        GradHarness h;
        auto xs = oracles::random_vector(rng, static_cast<std::size_t>(B) * I);
        auto ws = oracles::random_vector(rng, static_cast<std::size_t>(O) * I);
        auto bs = oracles::random_vector(rng, static_cast<std::size_t>(O));
        h.leaves = {&xs, &ws, &bs};
        h.build = [&, B, I, O](Graph& gg) {
            h.leaf_ids.clear();
            auto xi = h.record(gg.leaf(Tensor({B, I}, xs)));
            auto wi = h.record(gg.leaf(Tensor({O, I}, ws)));
            auto bi = h.record(gg.leaf(Tensor({O}, bs)));
            return gg.linear(xi, wi, bi);
        };
        h.run();
    }
}

TEST_CASE("conv1d: identity taps and finite differences at random dilation") {
    // kernel 1 identity
    Graph g;
    Tensor x({1, 5}, {1, 2, 3, 4, 5});
    auto y = g.conv1d(g.constant(x), g.constant(Tensor({1, 1, 1}, {1.0})),
                      g.constant(Tensor({1}, {0.0})), 1);
    CHECK(g.val(y).data == x.data);

    // kernel 2 with the tap on the current sample
    Graph g2;
    auto y2 = g2.conv1d(g2.constant(x), g2.constant(Tensor({1, 1, 2}, {0.0, 1.0})),
                        g2.constant(Tensor({1}, {0.0})), 1);
    CHECK(g2.val(y2).data == x.data);

    nn::Rng rng(2);
    for (int rep = 0; rep < 5; ++rep) {
        const int ic = 1 + static_cast<int>(rng.next_below(3));
        const int oc = 1 + static_cast<int>(rng.next_below(3));
        const int K = 1 + static_cast<int>(rng.next_below(3));
        const int T = 8 + static_cast<int>(rng.next_below(8));
        const int dil = rep == 2 ? 4 : 1 + static_cast<int>(rng.next_below(3));
        GradHarness h;
        auto xs = oracles::random_vector(rng, static_cast<std::size_t>(ic) * T);
        auto ws = oracles::random_vector(rng, static_cast<std::size_t>(oc) * ic * K);
        auto bs = oracles::random_vector(rng, static_cast<std::size_t>(oc));
        h.leaves = {&xs, &ws, &bs};
        h.build = [&, ic, oc, K, T, dil](Graph& gg) {
            h.leaf_ids.clear();
            auto xi = h.record(gg.leaf(Tensor({ic, T}, xs)));
            auto wi = h.record(gg.leaf(Tensor({oc, ic, K}, ws)));
            auto bi = h.record(gg.leaf(Tensor({oc}, bs)));
            return gg.conv1d(xi, wi, bi, dil);
        };
        h.run();
    }
}

TEST_CASE("activations: closed-form points and gradients") {
    Graph g;
    Tensor zero({1, 1}, {0.0});
    CHECK(g.val(g.activation(g.constant(zero), Act::tanh)).data[0] == 0.0);
    CHECK(g.val(g.activation(g.constant(zero), Act::sigmoid)).data[0] == doctest::Approx(0.5));

    nn::Rng rng(3);
    for (Act kind : {Act::tanh, Act::sigmoid, Act::relu, Act::prelu}) {
        for (int rep = 0; rep < 5; ++rep) {
            const int C = 1 + static_cast<int>(rng.next_below(3));
            const int T = 4 + static_cast<int>(rng.next_below(6));
            GradHarness h;
            // keep values away from the relu/prelu kink
            auto xs = oracles::random_vector(rng, static_cast<std::size_t>(C) * T);
            for (double& v : xs)
                if (std::abs(v) < 0.05) v = v < 0 ? v - 0.1 : v + 0.1;
            auto as = oracles::random_vector(rng, static_cast<std::size_t>(C), 0.1, 0.5);
            h.leaves = kind == Act::prelu ? std::vector<std::vector<double>*>{&xs, &as}
                                          : std::vector<std::vector<double>*>{&xs};
            h.build = [&, C, T, kind](Graph& gg) {
                h.leaf_ids.clear();
                auto xi = h.record(gg.leaf(Tensor({C, T}, xs)));
                if (kind == Act::prelu) {
                    auto ai = h.record(gg.leaf(Tensor({C}, as)));
                    return gg.activation(xi, kind, ai);
                }
                return gg.activation(xi, kind);
            };
            h.run();
        }
    }
}

TEST_CASE("elementwise, affine_rows, slices, concat: finite differences") {
    nn::Rng rng(4);
    for (int rep = 0; rep < 5; ++rep) {
        const int C = 2 + static_cast<int>(rng.next_below(3));
        const int T = 3 + static_cast<int>(rng.next_below(5));
        GradHarness h;
        auto a = oracles::random_vector(rng, static_cast<std::size_t>(C) * T);
        auto b = oracles::random_vector(rng, static_cast<std::size_t>(C) * T);
        auto gm = oracles::random_vector(rng, static_cast<std::size_t>(C), 0.5, 1.5);
        auto bt = oracles::random_vector(rng, static_cast<std::size_t>(C));
        h.leaves = {&a, &b, &gm, &bt};
        h.build = [&, C, T](Graph& gg) {
            h.leaf_ids.clear();
            auto ai = h.record(gg.leaf(Tensor({C, T}, a)));
            auto bi = h.record(gg.leaf(Tensor({C, T}, b)));
            auto gi = h.record(gg.leaf(Tensor({C}, gm)));
            auto bti = h.record(gg.leaf(Tensor({C}, bt)));
            auto m = gg.mul(gg.add(ai, bi), ai);
            auto f = gg.affine_rows(m, gi, bti);
            auto s1 = gg.slice_rows(f, 0, C - 1);
            auto s2 = gg.slice_rows(f, 1, C - 1);
            auto cat = gg.concat_rows(s1, s2);
            return gg.reshape(gg.add_scalar(gg.scale(cat, 1.7), 0.3),
                              {(C - 1) * 2 * T});
        };
        h.run();
    }
}

TEST_CASE("cell_sequence gradients match finite differences for all kinds") {
    nn::Rng rng(5);
    for (CellKind kind : {CellKind::vanilla, CellKind::gru, CellKind::lstm}) {
        for (bool film : {false, true}) {
            const int B = 2, T = 8, I = 2;
            const int H = 3;
            const int G = kernels::gate_count(kind);
            const bool lstm = kind == CellKind::lstm;
            GradHarness h;
            auto xs = oracles::random_vector(rng, static_cast<std::size_t>(B) * T * I);
            auto ws = oracles::random_vector(rng, static_cast<std::size_t>(G) * H * I, -0.6, 0.6);
            auto us = oracles::random_vector(rng, static_cast<std::size_t>(G) * H * H, -0.6, 0.6);
            auto bs = oracles::random_vector(rng, static_cast<std::size_t>(G) * H, -0.3, 0.3);
            auto gs = oracles::random_vector(rng, static_cast<std::size_t>(G) * H, 0.6, 1.4);
            auto bts = oracles::random_vector(rng, static_cast<std::size_t>(G) * H, -0.2, 0.2);
            auto h0 = oracles::random_vector(rng, static_cast<std::size_t>(B) * H, -0.5, 0.5);
            auto c0 = oracles::random_vector(rng, static_cast<std::size_t>(B) * H, -0.5, 0.5);
            h.leaves = {&xs, &ws, &us, &bs};
            if (film) {
                h.leaves.push_back(&gs);
                h.leaves.push_back(&bts);
            }
            h.build = [&, kind, B, T, I, H, G, lstm, film](Graph& gg) {
                h.leaf_ids.clear();
                auto xi = h.record(gg.leaf(Tensor({B, T, I}, xs)));
                auto wi = h.record(gg.leaf(Tensor({G * H, I}, ws)));
                auto ui = h.record(gg.leaf(Tensor({G * H, H}, us)));
                auto bi = h.record(gg.leaf(Tensor({G * H}, bs)));
                Graph::Id gi = -1, bti = -1;
                if (film) {
                    gi = h.record(gg.leaf(Tensor({G * H}, gs)));
                    bti = h.record(gg.leaf(Tensor({G * H}, bts)));
                }
                auto h0i = gg.constant(Tensor({B, H}, h0));
                auto c0i = lstm ? gg.constant(Tensor({B, H}, c0)) : -1;
                return gg.cell_sequence(kind, xi, wi, ui, bi, gi, bti, h0i, c0i);
            };
            h.run();
        }
    }
}

TEST_CASE("cell_step with row scales matches finite differences (BPTT over 6 steps)") {
    nn::Rng rng(6);
    for (CellKind kind : {CellKind::vanilla, CellKind::gru, CellKind::lstm}) {
        const int I = 2, H = 3;
        const int G = kernels::gate_count(kind);
        const bool lstm = kind == CellKind::lstm;
        const int S = lstm ? 2 * H : H;
        const int T = 6;
        GradHarness h;
        auto xs = oracles::random_vector(rng, static_cast<std::size_t>(T) * I);
        auto ws = oracles::random_vector(rng, static_cast<std::size_t>(G) * H * I, -0.6, 0.6);
        auto us = oracles::random_vector(rng, static_cast<std::size_t>(G) * H * H, -0.6, 0.6);
        auto bs = oracles::random_vector(rng, static_cast<std::size_t>(G) * H, -0.3, 0.3);
        auto sws = oracles::random_vector(rng, static_cast<std::size_t>(G) * H, 0.6, 1.4);
        auto sus = oracles::random_vector(rng, static_cast<std::size_t>(G) * H, 0.6, 1.4);
        auto s0 = oracles::random_vector(rng, static_cast<std::size_t>(S), -0.4, 0.4);
        h.leaves = {&xs, &ws, &us, &bs, &sws, &sus, &s0};
        h.build = [&, kind, I, H, G, S, T](Graph& gg) {
            h.leaf_ids.clear();
            auto xi = h.record(gg.leaf(Tensor({T, I}, xs)));
            auto wi = h.record(gg.leaf(Tensor({G * H, I}, ws)));
            auto ui = h.record(gg.leaf(Tensor({G * H, H}, us)));
            auto bi = h.record(gg.leaf(Tensor({G * H}, bs)));
            auto swi = h.record(gg.leaf(Tensor({G * H}, sws)));
            auto sui = h.record(gg.leaf(Tensor({G * H}, sus)));
            auto si = h.record(gg.leaf(Tensor({S}, s0)));
            Graph::Id s = si;
            Graph::Id acc = -1;
            for (int t = 0; t < T; ++t) {
                auto xt = gg.slice_vec(gg.reshape(xi, {T * I}), t * I, I);
                s = gg.cell_step(kind, xt, s, wi, ui, bi, swi, sui);
                acc = acc < 0 ? s : gg.concat_vec(acc, s);
            }
            return acc;
        };
        h.run();
    }
}

TEST_CASE("gradient accumulation: two backward passes sum exactly") {
    nn::Rng rng(7);
    Parameter w("w", Tensor({2, 3}, oracles::random_vector(rng, 6)));
    auto make = [&](Graph& g) {
        auto x = g.constant(Tensor({1, 3}, oracles::random_vector(rng, 3)));
        return g.linear(x, g.param(&w), g.constant(Tensor({2})));
    };
    Graph g;
    auto y = make(g);
    Tensor seed(g.val(y).shape, {1.0, -2.0});
    g.backward(y, seed);
    const auto once = w.grad.data;
    g.backward(y, seed);
    for (std::size_t i = 0; i < once.size(); ++i)
        CHECK(w.grad.data[i] == 2.0 * once[i]);
}

TEST_CASE("adam: first-step magnitude, zero grad, and two-step recurrence") {
    Parameter p("p", Tensor({3}, {1.0, 2.0, 3.0}));
    auto st = nn::AdamState::for_param(p, 0.001);
    p.grad.fill(1.0);
    nn::adam_step(p, st);
    for (int i = 0; i < 3; ++i) {
        const double delta = (i + 1.0) - p.value.data[static_cast<std::size_t>(i)];
        CHECK(delta == doctest::Approx(0.001).epsilon(1e-6));  // 0.001/(1+eps)
    }
    CHECK(p.grad.data == std::vector<double>{0, 0, 0});

    // zero grad from a fresh state: value unchanged, step_count advanced
    Parameter pz("pz", Tensor({2}, {4.0, -4.0}));
    auto stz = nn::AdamState::for_param(pz, 0.5);
    nn::adam_step(pz, stz);
    CHECK(pz.value.data == std::vector<double>{4.0, -4.0});
    CHECK(stz.step_count == 1);

    // two steps with constant grad, checked against the scalar recurrence
    Parameter q("q", Tensor({1}, {0.5}));
    auto st2 = nn::AdamState::for_param(q, 0.01);
    const double gconst = 0.3;
    double m = 0, v = 0, x = 0.5;
    for (int step = 1; step <= 2; ++step) {
        q.grad.fill(gconst);
        nn::adam_step(q, st2);
        m = 0.9 * m + 0.1 * gconst;
        v = 0.999 * v + 0.001 * gconst * gconst;
        const double mhat = m / (1.0 - std::pow(0.9, step));
        const double vhat = v / (1.0 - std::pow(0.999, step));
        x -= 0.01 * mhat / (std::sqrt(vhat) + 1e-8);
        CHECK(q.value.data[0] == doctest::Approx(x).epsilon(1e-12));
    }
}

TEST_CASE("gru parameter count matches the declared layout") {
    // in=2, hidden=4: 3 * (2*4 + 4*4 + 4) = 84
    const int I = 2, H = 4;
    const int count = 3 * (I * H + H * H + H);
    CHECK(count == 84);
}
