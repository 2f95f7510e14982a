#include "nfx/kernels/kernels.hpp"

#include <omp.h>

#include <atomic>
#include <cmath>
#include <cstring>

#include "nfx/dsp/fft.hpp"
#include "nfx/errors.hpp"

namespace nfx::kernels {

namespace {

std::atomic<bool> g_parallel{true};

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// y[i] = sum_j m[i*J+j] * v[j] for rows [r0, r1)
inline void matvec_rows(const double* m, const double* v, int J, int r0, int r1, double* y) {
    for (int i = r0; i < r1; ++i) {
        double acc = 0.0;
        const double* row = m + static_cast<std::size_t>(i) * J;
        for (int j = 0; j < J; ++j) acc += row[j] * v[j];
        y[i - r0] = acc;
    }
}

}  // namespace

void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }
bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
int thread_count() { return omp_get_max_threads(); }

int gate_count(CellKind kind) {
    switch (kind) {
        case CellKind::vanilla: return 1;
        case CellKind::gru: return 3;
        case CellKind::lstm: return 4;
    }
    return 1;
}

// ---------------------------------------------------------------------------
// conv1d
// ---------------------------------------------------------------------------

namespace {

inline void conv1d_forward_one(const double* x, int ic, int T, const double* w,
                               const double* b, int K, int dilation, int o, int t,
                               double* y) {
    double acc = b[o];
    for (int c = 0; c < ic; ++c) {
        const double* wr = w + (static_cast<std::size_t>(o) * ic + c) * K;
        const double* xr = x + static_cast<std::size_t>(c) * T;
        for (int k = 0; k < K; ++k) {
            const int src = t - dilation * (K - 1 - k);
            if (src >= 0) acc += wr[k] * xr[src];
        }
    }
    y[static_cast<std::size_t>(o) * T + t] = acc;
}

}  // namespace

void conv1d_forward_serial(const double* x, int ic, int T, const double* w, const double* b,
                           int oc, int K, int dilation, double* y) {
    for (int o = 0; o < oc; ++o)
        for (int t = 0; t < T; ++t) conv1d_forward_one(x, ic, T, w, b, K, dilation, o, t, y);
}

void conv1d_forward_omp(const double* x, int ic, int T, const double* w, const double* b,
                        int oc, int K, int dilation, double* y) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int o = 0; o < oc; ++o)
        for (int t = 0; t < T; ++t) conv1d_forward_one(x, ic, T, w, b, K, dilation, o, t, y);
}

void conv1d_forward(const double* x, int ic, int T, const double* w, const double* b,
                    int oc, int K, int dilation, double* y) {
    if (parallel_enabled())
        conv1d_forward_omp(x, ic, T, w, b, oc, K, dilation, y);
    else
        conv1d_forward_serial(x, ic, T, w, b, oc, K, dilation, y);
}

namespace {

inline void conv1d_dx_one(const double* w, int ic, int T, int oc, int K, int dilation,
                          const double* dy, int c, int t, double* dx) {
    double acc = 0.0;
    for (int o = 0; o < oc; ++o) {
        const double* wr = w + (static_cast<std::size_t>(o) * ic + c) * K;
        const double* dyr = dy + static_cast<std::size_t>(o) * T;
        for (int k = 0; k < K; ++k) {
            const int dst = t + dilation * (K - 1 - k);
            if (dst < T) acc += wr[k] * dyr[dst];
        }
    }
    dx[static_cast<std::size_t>(c) * T + t] += acc;
}

inline void conv1d_dw_one(const double* x, int ic, int T, int dilation, const double* dy,
                          int o, int c, int k, int K, double* dw) {
    const int shift = dilation * (K - 1 - k);
    const double* dyr = dy + static_cast<std::size_t>(o) * T;
    const double* xr = x + static_cast<std::size_t>(c) * T;
    double acc = 0.0;
    for (int t = shift; t < T; ++t) acc += dyr[t] * xr[t - shift];
    dw[(static_cast<std::size_t>(o) * ic + c) * K + k] += acc;
}

}  // namespace

void conv1d_backward_serial(const double* x, int ic, int T, const double* w, int oc, int K,
                            int dilation, const double* dy, double* dx, double* dw,
                            double* db) {
    if (dx) {
        for (int c = 0; c < ic; ++c)
            for (int t = 0; t < T; ++t) conv1d_dx_one(w, ic, T, oc, K, dilation, dy, c, t, dx);
    }
    for (int o = 0; o < oc; ++o)
        for (int c = 0; c < ic; ++c)
            for (int k = 0; k < K; ++k) conv1d_dw_one(x, ic, T, dilation, dy, o, c, k, K, dw);
    for (int o = 0; o < oc; ++o) {
        double acc = 0.0;
        const double* dyr = dy + static_cast<std::size_t>(o) * T;
        for (int t = 0; t < T; ++t) acc += dyr[t];
        db[o] += acc;
    }
}

void conv1d_backward_omp(const double* x, int ic, int T, const double* w, int oc, int K,
                         int dilation, const double* dy, double* dx, double* dw, double* db) {
    if (dx) {
#pragma omp parallel for collapse(2) schedule(static)
        for (int c = 0; c < ic; ++c)
            for (int t = 0; t < T; ++t) conv1d_dx_one(w, ic, T, oc, K, dilation, dy, c, t, dx);
    }
#pragma omp parallel for collapse(3) schedule(static)
    for (int o = 0; o < oc; ++o)
        for (int c = 0; c < ic; ++c)
            for (int k = 0; k < K; ++k) conv1d_dw_one(x, ic, T, dilation, dy, o, c, k, K, dw);
#pragma omp parallel for schedule(static)
    for (int o = 0; o < oc; ++o) {
        double acc = 0.0;
        const double* dyr = dy + static_cast<std::size_t>(o) * T;
        for (int t = 0; t < T; ++t) acc += dyr[t];
        db[o] += acc;
    }
}

void conv1d_backward(const double* x, int ic, int T, const double* w, int oc, int K,
                     int dilation, const double* dy, double* dx, double* dw, double* db) {
    if (parallel_enabled())
        conv1d_backward_omp(x, ic, T, w, oc, K, dilation, dy, dx, dw, db);
    else
        conv1d_backward_serial(x, ic, T, w, oc, K, dilation, dy, dx, dw, db);
}

// ---------------------------------------------------------------------------
// linear
// ---------------------------------------------------------------------------

void linear_forward_serial(const double* x, int B, int I, const double* w, const double* b,
                           int O, double* y) {
    for (int r = 0; r < B; ++r)
        for (int o = 0; o < O; ++o) {
            double acc = b[o];
            const double* wr = w + static_cast<std::size_t>(o) * I;
            const double* xr = x + static_cast<std::size_t>(r) * I;
            for (int i = 0; i < I; ++i) acc += wr[i] * xr[i];
            y[static_cast<std::size_t>(r) * O + o] = acc;
        }
}

void linear_forward_omp(const double* x, int B, int I, const double* w, const double* b,
                        int O, double* y) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int r = 0; r < B; ++r)
        for (int o = 0; o < O; ++o) {
            double acc = b[o];
            const double* wr = w + static_cast<std::size_t>(o) * I;
            const double* xr = x + static_cast<std::size_t>(r) * I;
            for (int i = 0; i < I; ++i) acc += wr[i] * xr[i];
            y[static_cast<std::size_t>(r) * O + o] = acc;
        }
}

void linear_forward(const double* x, int B, int I, const double* w, const double* b, int O,
                    double* y) {
    if (parallel_enabled())
        linear_forward_omp(x, B, I, w, b, O, y);
    else
        linear_forward_serial(x, B, I, w, b, O, y);
}

namespace {

inline void linear_dx_one(const double* w, int I, int O, const double* dy, int r, int i,
                          double* dx) {
    double acc = 0.0;
    const double* dyr = dy + static_cast<std::size_t>(r) * O;
    for (int o = 0; o < O; ++o) acc += w[static_cast<std::size_t>(o) * I + i] * dyr[o];
    dx[static_cast<std::size_t>(r) * I + i] += acc;
}

inline void linear_dw_one(const double* x, int B, int I, int O, const double* dy, int o,
                          int i, double* dw) {
    double acc = 0.0;
    for (int r = 0; r < B; ++r)
        acc += dy[static_cast<std::size_t>(r) * O + o] * x[static_cast<std::size_t>(r) * I + i];
    dw[static_cast<std::size_t>(o) * I + i] += acc;
}

}  // namespace

void linear_backward_serial(const double* x, int B, int I, const double* w, int O,
                            const double* dy, double* dx, double* dw, double* db) {
    if (dx) {
        for (int r = 0; r < B; ++r)
            for (int i = 0; i < I; ++i) linear_dx_one(w, I, O, dy, r, i, dx);
    }
    for (int o = 0; o < O; ++o)
        for (int i = 0; i < I; ++i) linear_dw_one(x, B, I, O, dy, o, i, dw);
    for (int o = 0; o < O; ++o) {
        double acc = 0.0;
        for (int r = 0; r < B; ++r) acc += dy[static_cast<std::size_t>(r) * O + o];
        db[o] += acc;
    }
}

void linear_backward_omp(const double* x, int B, int I, const double* w, int O,
                         const double* dy, double* dx, double* dw, double* db) {
    if (dx) {
#pragma omp parallel for collapse(2) schedule(static)
        for (int r = 0; r < B; ++r)
            for (int i = 0; i < I; ++i) linear_dx_one(w, I, O, dy, r, i, dx);
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (int o = 0; o < O; ++o)
        for (int i = 0; i < I; ++i) linear_dw_one(x, B, I, O, dy, o, i, dw);
#pragma omp parallel for schedule(static)
    for (int o = 0; o < O; ++o) {
        double acc = 0.0;
        for (int r = 0; r < B; ++r) acc += dy[static_cast<std::size_t>(r) * O + o];
        db[o] += acc;
    }
}

void linear_backward(const double* x, int B, int I, const double* w, int O, const double* dy,
                     double* dx, double* dw, double* db) {
    if (parallel_enabled())
        linear_backward_omp(x, B, I, w, O, dy, dx, dw, db);
    else
        linear_backward_serial(x, B, I, w, O, dy, dx, dw, db);
}

// ---------------------------------------------------------------------------
// recurrent cells
// ---------------------------------------------------------------------------

void cell_step_forward(CellKind kind, int I, int H, const double* x, const double* w,
                       const double* u, const double* b, const double* gamma,
                       const double* beta, const double* sw, const double* su,
                       const double* h_prev, const double* c_prev, double* h_out,
                       double* c_out, double* gates, double* cand, double* prex,
                       double* uh) {
    const int G = gate_count(kind);
    const int GH = G * H;

    // per-thread scratch; this runs once per sample in the training loop
    thread_local std::vector<double> a, uraw, zbuf, rbuf, rhbuf, hcbuf;
    a.resize(static_cast<std::size_t>(GH));
    uraw.resize(static_cast<std::size_t>(GH));

    // raw input projection W*x, then FiLM or row scaling
    matvec_rows(w, x, I, 0, GH, a.data());
    if (prex) std::memcpy(prex, a.data(), sizeof(double) * GH);
    if (gamma) {
        for (int i = 0; i < GH; ++i) a[i] = gamma[i] * a[i] + beta[i];
    } else if (sw) {
        for (int i = 0; i < GH; ++i) a[i] *= sw[i];
    }

    if (kind == CellKind::gru) {
        // z and r see h_prev; the candidate gate sees r (.) h_prev
        matvec_rows(u, h_prev, H, 0, 2 * H, uraw.data());
        zbuf.resize(static_cast<std::size_t>(H));
        rbuf.resize(static_cast<std::size_t>(H));
        rhbuf.resize(static_cast<std::size_t>(H));
        hcbuf.resize(static_cast<std::size_t>(H));
        auto& z = zbuf;
        auto& r = rbuf;
        auto& rh = rhbuf;
        auto& hc = hcbuf;
        for (int i = 0; i < H; ++i) {
            const double uz = su ? su[i] * uraw[i] : uraw[i];
            z[i] = sigmoid(a[i] + uz + b[i]);
        }
        for (int i = 0; i < H; ++i) {
            const double ur = su ? su[H + i] * uraw[H + i] : uraw[H + i];
            r[i] = sigmoid(a[H + i] + ur + b[H + i]);
        }
        for (int i = 0; i < H; ++i) rh[i] = r[i] * h_prev[i];
        matvec_rows(u + static_cast<std::size_t>(2 * H) * H, rh.data(), H, 0, H,
                    uraw.data() + 2 * H);
        // matvec_rows wrote rows [0,H) of the sub-matrix into uraw+2H
        for (int i = 0; i < H; ++i) {
            const double uhc = su ? su[2 * H + i] * uraw[2 * H + i] : uraw[2 * H + i];
            hc[i] = std::tanh(a[2 * H + i] + uhc + b[2 * H + i]);
        }
        for (int i = 0; i < H; ++i) h_out[i] = (1.0 - z[i]) * h_prev[i] + z[i] * hc[i];
        if (gates) {
            std::memcpy(gates, z.data(), sizeof(double) * H);
            std::memcpy(gates + H, r.data(), sizeof(double) * H);
            std::memcpy(gates + 2 * H, hc.data(), sizeof(double) * H);
        }
    } else if (kind == CellKind::lstm) {
        matvec_rows(u, h_prev, H, 0, 4 * H, uraw.data());
        for (int g = 0; g < 4; ++g)
            for (int i = 0; i < H; ++i) {
                const int gi = g * H + i;
                const double uv = su ? su[gi] * uraw[gi] : uraw[gi];
                const double pre = a[gi] + uv + b[gi];
                const double v = (g == 2) ? std::tanh(pre) : sigmoid(pre);
                if (gates) gates[gi] = v;
                uraw[gi] = uv;  // not needed below; keep raw copy in `uh` only
                a[gi] = v;      // reuse a[] as activated gate storage
            }
        for (int i = 0; i < H; ++i) {
            const double c = a[H + i] * c_prev[i] + a[i] * a[2 * H + i];
            c_out[i] = c;
            h_out[i] = a[3 * H + i] * std::tanh(c);
            if (cand) cand[i] = c;
        }
    } else {  // vanilla
        matvec_rows(u, h_prev, H, 0, H, uraw.data());
        for (int i = 0; i < H; ++i) {
            const double uv = su ? su[i] * uraw[i] : uraw[i];
            h_out[i] = std::tanh(a[i] + uv + b[i]);
        }
        if (gates) std::memcpy(gates, h_out, sizeof(double) * H);
    }
    if (uh) {
        // recompute raw U*h products (pre-scale) for the scale gradients
        if (kind == CellKind::gru) {
            matvec_rows(u, h_prev, H, 0, 2 * H, uh);
            std::vector<double> rh(H);
            for (int i = 0; i < H; ++i) rh[i] = gates[H + i] * h_prev[i];
            matvec_rows(u + static_cast<std::size_t>(2 * H) * H, rh.data(), H, 0, H, uh + 2 * H);
        } else {
            matvec_rows(u, h_prev, H, 0, GH, uh);
        }
    }
}

namespace {

// Shared by every kind: given the stacked pre-activation gradient dpre [G*H],
// route it to dw/dx (through FiLM or scales) and db.
inline void cell_route_input_side(int I, int GH, const double* x, const double* w,
                                  const double* gamma, const double* sw, const double* prex,
                                  const double* dpre, double* dx, double* dw, double* db,
                                  double* dgamma, double* dbeta, double* dsw) {
    thread_local std::vector<double> dprex;
    dprex.resize(static_cast<std::size_t>(GH));
    for (int gi = 0; gi < GH; ++gi) {
        double d = dpre[gi];
        if (dgamma) dgamma[gi] += d * prex[gi];
        if (dbeta) dbeta[gi] += d;
        if (dsw) dsw[gi] += d * prex[gi];
        if (gamma)
            d *= gamma[gi];
        else if (sw)
            d *= sw[gi];
        dprex[gi] = d;
        if (db) db[gi] += dpre[gi];
    }
    if (dw) {
        for (int gi = 0; gi < GH; ++gi) {
            double* dwr = dw + static_cast<std::size_t>(gi) * I;
            const double d = dprex[gi];
            for (int j = 0; j < I; ++j) dwr[j] += d * x[j];
        }
    }
    if (dx) {
        for (int j = 0; j < I; ++j) {
            double acc = 0.0;
            for (int gi = 0; gi < GH; ++gi) acc += w[static_cast<std::size_t>(gi) * I + j] * dprex[gi];
            dx[j] += acc;
        }
    }
}

}  // namespace

void cell_step_backward(CellKind kind, int I, int H, const double* x, const double* w,
                        const double* u, const double* gamma, const double* beta,
                        const double* sw, const double* su, const double* h_prev,
                        const double* c_prev, const double* gates, const double* cand,
                        const double* prex, const double* uh, const double* dh,
                        const double* dc_in, double* dx, double* dh_prev, double* dc_prev,
                        double* dw, double* du, double* db, double* dgamma, double* dbeta,
                        double* dsw, double* dsu) {
    (void)beta;
    const int G = gate_count(kind);
    const int GH = G * H;
    thread_local std::vector<double> dpre, duraw, drh;
    dpre.assign(static_cast<std::size_t>(GH), 0.0);

    if (kind == CellKind::gru) {
        const double* z = gates;
        const double* r = gates + H;
        const double* hc = gates + 2 * H;
        duraw.assign(static_cast<std::size_t>(GH), 0.0);  // wrt scaled U*h products
        // h = (1-z) h_prev + z hc
        for (int i = 0; i < H; ++i) {
            const double dz = dh[i] * (hc[i] - h_prev[i]);
            const double dhc = dh[i] * z[i];
            if (dh_prev) dh_prev[i] += dh[i] * (1.0 - z[i]);
            dpre[2 * H + i] = dhc * (1.0 - hc[i] * hc[i]);
            dpre[i] = dz * z[i] * (1.0 - z[i]);
        }
        // candidate gate: U_h acts on r (.) h_prev
        drh.assign(static_cast<std::size_t>(H), 0.0);
        for (int i = 0; i < H; ++i) {
            double d = dpre[2 * H + i];
            if (dsu) dsu[2 * H + i] += d * uh[2 * H + i];
            if (su) d *= su[2 * H + i];
            duraw[2 * H + i] = d;
        }
        for (int j = 0; j < H; ++j) {
            double acc = 0.0;
            for (int i = 0; i < H; ++i)
                acc += u[(static_cast<std::size_t>(2 * H) + i) * H + j] * duraw[2 * H + i];
            drh[j] = acc;
        }
        for (int j = 0; j < H; ++j) {
            const double dr = drh[j] * h_prev[j];
            if (dh_prev) dh_prev[j] += drh[j] * r[j];
            dpre[H + j] = dr * r[j] * (1.0 - r[j]);
        }
        for (int g = 0; g < 2; ++g) {
            for (int i = 0; i < H; ++i) {
                const int gi = g * H + i;
                double d = dpre[gi];
                if (dsu) dsu[gi] += d * uh[gi];
                if (su) d *= su[gi];
                duraw[gi] = d;
            }
        }
        if (du) {
            for (int i = 0; i < 2 * H; ++i) {
                double* dur = du + static_cast<std::size_t>(i) * H;
                for (int j = 0; j < H; ++j) dur[j] += duraw[i] * h_prev[j];
            }
            for (int i = 0; i < H; ++i) {
                double* dur = du + (static_cast<std::size_t>(2 * H) + i) * H;
                for (int j = 0; j < H; ++j) dur[j] += duraw[2 * H + i] * (r[j] * h_prev[j]);
            }
        }
        if (dh_prev) {
            for (int j = 0; j < H; ++j) {
                double acc = 0.0;
                for (int i = 0; i < 2 * H; ++i) acc += u[static_cast<std::size_t>(i) * H + j] * duraw[i];
                dh_prev[j] += acc;
            }
        }
    } else if (kind == CellKind::lstm) {
        const double* gi_ = gates;
        const double* gf = gates + H;
        const double* gg = gates + 2 * H;
        const double* go = gates + 3 * H;
        duraw.assign(static_cast<std::size_t>(GH), 0.0);
        for (int i = 0; i < H; ++i) {
            const double tc = std::tanh(cand[i]);
            const double do_ = dh[i] * tc;
            double dc = dh[i] * go[i] * (1.0 - tc * tc);
            if (dc_in) dc += dc_in[i];
            const double di = dc * gg[i];
            const double dg = dc * gi_[i];
            const double df = dc * c_prev[i];
            if (dc_prev) dc_prev[i] += dc * gf[i];
            dpre[i] = di * gi_[i] * (1.0 - gi_[i]);
            dpre[H + i] = df * gf[i] * (1.0 - gf[i]);
            dpre[2 * H + i] = dg * (1.0 - gg[i] * gg[i]);
            dpre[3 * H + i] = do_ * go[i] * (1.0 - go[i]);
        }
        for (int gi2 = 0; gi2 < GH; ++gi2) {
            double d = dpre[gi2];
            if (dsu) dsu[gi2] += d * uh[gi2];
            if (su) d *= su[gi2];
            duraw[gi2] = d;
        }
        if (du) {
            for (int i = 0; i < GH; ++i) {
                double* dur = du + static_cast<std::size_t>(i) * H;
                for (int j = 0; j < H; ++j) dur[j] += duraw[i] * h_prev[j];
            }
        }
        if (dh_prev) {
            for (int j = 0; j < H; ++j) {
                double acc = 0.0;
                for (int i = 0; i < GH; ++i) acc += u[static_cast<std::size_t>(i) * H + j] * duraw[i];
                dh_prev[j] += acc;
            }
        }
    } else {  // vanilla
        const double* h = gates;
        duraw.assign(static_cast<std::size_t>(H), 0.0);
        for (int i = 0; i < H; ++i) dpre[i] = dh[i] * (1.0 - h[i] * h[i]);
        for (int i = 0; i < H; ++i) {
            double d = dpre[i];
            if (dsu) dsu[i] += d * uh[i];
            if (su) d *= su[i];
            duraw[i] = d;
        }
        if (du) {
            for (int i = 0; i < H; ++i) {
                double* dur = du + static_cast<std::size_t>(i) * H;
                for (int j = 0; j < H; ++j) dur[j] += duraw[i] * h_prev[j];
            }
        }
        if (dh_prev) {
            for (int j = 0; j < H; ++j) {
                double acc = 0.0;
                for (int i = 0; i < H; ++i) acc += u[static_cast<std::size_t>(i) * H + j] * duraw[i];
                dh_prev[j] += acc;
            }
        }
    }

    cell_route_input_side(I, GH, x, w, gamma, sw, prex, dpre.data(), dx, dw, db, dgamma,
                          dbeta, dsw);
}

namespace {

void cell_sequence_item_forward(CellKind kind, int T, int I, int H, const double* x,
                                const double* w, const double* u, const double* b,
                                const double* gamma, const double* beta, const double* h0,
                                const double* c0, double* h_all, double* hT, double* cT,
                                double* gates, double* cand, double* prex) {
    const int G = gate_count(kind);
    const int GH = G * H;
    std::vector<double> h(h0, h0 + H);
    std::vector<double> c(H, 0.0);
    if (c0) c.assign(c0, c0 + H);
    std::vector<double> hn(H), cn(H);
    for (int t = 0; t < T; ++t) {
        cell_step_forward(kind, I, H, x + static_cast<std::size_t>(t) * I, w, u, b, gamma,
                          beta, nullptr, nullptr, h.data(), c.data(), hn.data(), cn.data(),
                          gates ? gates + static_cast<std::size_t>(t) * GH : nullptr,
                          cand ? cand + static_cast<std::size_t>(t) * H : nullptr,
                          prex ? prex + static_cast<std::size_t>(t) * GH : nullptr, nullptr);
        h.swap(hn);
        if (kind == CellKind::lstm) c.swap(cn);
        std::memcpy(h_all + static_cast<std::size_t>(t) * H, h.data(), sizeof(double) * H);
    }
    if (hT) std::memcpy(hT, h.data(), sizeof(double) * H);
    if (cT) std::memcpy(cT, c.data(), sizeof(double) * H);
}

void cell_sequence_item_backward(CellKind kind, int T, int I, int H, const double* x,
                                 const double* w, const double* u, const double* gamma,
                                 const double* beta, const double* h0, const double* c0,
                                 const double* h_all, const double* gates, const double* cand,
                                 const double* prex, const double* dh_all, double* dx,
                                 double* dw, double* du, double* db, double* dgamma,
                                 double* dbeta) {
    const int G = gate_count(kind);
    const int GH = G * H;
    std::vector<double> dh(H, 0.0), dc(H, 0.0), dh_prev(H), dc_prev(H);
    const bool lstm = kind == CellKind::lstm;
    for (int t = T - 1; t >= 0; --t) {
        for (int i = 0; i < H; ++i) dh[i] += dh_all[static_cast<std::size_t>(t) * H + i];
        const double* h_prev = t > 0 ? h_all + static_cast<std::size_t>(t - 1) * H : h0;
        const double* c_prev = nullptr;
        if (lstm) c_prev = t > 0 ? cand + static_cast<std::size_t>(t - 1) * H : c0;
        std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
        std::fill(dc_prev.begin(), dc_prev.end(), 0.0);
        cell_step_backward(kind, I, H, x + static_cast<std::size_t>(t) * I, w, u, gamma,
                           beta, nullptr, nullptr, h_prev, c_prev,
                           gates + static_cast<std::size_t>(t) * GH,
                           cand ? cand + static_cast<std::size_t>(t) * H : nullptr,
                           prex ? prex + static_cast<std::size_t>(t) * GH : nullptr, nullptr,
                           dh.data(), lstm ? dc.data() : nullptr,
                           dx ? dx + static_cast<std::size_t>(t) * I : nullptr, dh_prev.data(),
                           lstm ? dc_prev.data() : nullptr, dw, du, db, dgamma, dbeta,
                           nullptr, nullptr);
        dh = dh_prev;
        if (lstm) dc = dc_prev;
    }
}

void cell_sequence_forward_impl(bool parallel, CellKind kind, int B, int T, int I, int H,
                                const double* x, const double* w, const double* u,
                                const double* b, const double* gamma, const double* beta,
                                const double* h0, const double* c0, double* h_all, double* hT,
                                double* cT, CellCache& cache) {
    const int G = gate_count(kind);
    const std::size_t GH = static_cast<std::size_t>(G) * H;
    cache.gates.assign(static_cast<std::size_t>(B) * T * GH, 0.0);
    cache.cand.assign(kind == CellKind::lstm ? static_cast<std::size_t>(B) * T * H : 0, 0.0);
    cache.prex.assign(gamma ? static_cast<std::size_t>(B) * T * GH : 0, 0.0);

    auto run_item = [&](int item) {
        const std::size_t xoff = static_cast<std::size_t>(item) * T * I;
        const std::size_t hoff = static_cast<std::size_t>(item) * T * H;
        cell_sequence_item_forward(
            kind, T, I, H, x + xoff, w, u, b, gamma, beta,
            h0 + static_cast<std::size_t>(item) * H,
            c0 ? c0 + static_cast<std::size_t>(item) * H : nullptr, h_all + hoff,
            hT ? hT + static_cast<std::size_t>(item) * H : nullptr,
            cT ? cT + static_cast<std::size_t>(item) * H : nullptr,
            cache.gates.data() + static_cast<std::size_t>(item) * T * GH,
            cache.cand.empty() ? nullptr : cache.cand.data() + hoff,
            cache.prex.empty() ? nullptr : cache.prex.data() + static_cast<std::size_t>(item) * T * GH);
    };
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (int item = 0; item < B; ++item) run_item(item);
    } else {
        for (int item = 0; item < B; ++item) run_item(item);
    }
}

void cell_sequence_backward_impl(bool parallel, CellKind kind, int B, int T, int I, int H,
                                 const double* x, const double* w, const double* u,
                                 const double* gamma, const double* beta, const double* h0,
                                 const double* c0, const double* h_all, const CellCache& cache,
                                 const double* dh_all, double* dx, double* dw, double* du,
                                 double* db, double* dgamma, double* dbeta) {
    const int G = gate_count(kind);
    const std::size_t GH = static_cast<std::size_t>(G) * H;
    const std::size_t wsz = GH * I, usz = GH * H, bsz = GH;
    const std::size_t fsz = gamma ? GH : 0;
    const std::size_t per_item = wsz + usz + bsz + 2 * fsz;
    std::vector<double> scratch(static_cast<std::size_t>(B) * per_item, 0.0);

    auto run_item = [&](int item) {
        double* base = scratch.data() + static_cast<std::size_t>(item) * per_item;
        double* idw = base;
        double* idu = base + wsz;
        double* idb = base + wsz + usz;
        double* idg = fsz ? base + wsz + usz + bsz : nullptr;
        double* idbeta = fsz ? base + wsz + usz + bsz + fsz : nullptr;
        const std::size_t xoff = static_cast<std::size_t>(item) * T * I;
        const std::size_t hoff = static_cast<std::size_t>(item) * T * H;
        cell_sequence_item_backward(
            kind, T, I, H, x + xoff, w, u, gamma, beta,
            h0 + static_cast<std::size_t>(item) * H,
            c0 ? c0 + static_cast<std::size_t>(item) * H : nullptr, h_all + hoff,
            cache.gates.data() + static_cast<std::size_t>(item) * T * GH,
            cache.cand.empty() ? nullptr : cache.cand.data() + hoff,
            cache.prex.empty() ? nullptr : cache.prex.data() + static_cast<std::size_t>(item) * T * GH,
            dh_all + hoff, dx ? dx + xoff : nullptr, idw, idu, idb, idg, idbeta);
    };
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (int item = 0; item < B; ++item) run_item(item);
    } else {
        for (int item = 0; item < B; ++item) run_item(item);
    }
    // fixed-order reduction keeps gradients independent of the thread count
    for (int item = 0; item < B; ++item) {
        const double* base = scratch.data() + static_cast<std::size_t>(item) * per_item;
        for (std::size_t i = 0; i < wsz; ++i) dw[i] += base[i];
        for (std::size_t i = 0; i < usz; ++i) du[i] += base[wsz + i];
        for (std::size_t i = 0; i < bsz; ++i) db[i] += base[wsz + usz + i];
        if (fsz) {
            for (std::size_t i = 0; i < fsz; ++i) dgamma[i] += base[wsz + usz + bsz + i];
            for (std::size_t i = 0; i < fsz; ++i) dbeta[i] += base[wsz + usz + bsz + fsz + i];
        }
    }
}

}  // namespace

void cell_sequence_forward_serial(CellKind kind, int B, int T, int I, int H, const double* x,
                                  const double* w, const double* u, const double* b,
                                  const double* gamma, const double* beta, const double* h0,
                                  const double* c0, double* h_all, double* hT, double* cT,
                                  CellCache& cache) {
    cell_sequence_forward_impl(false, kind, B, T, I, H, x, w, u, b, gamma, beta, h0, c0,
                               h_all, hT, cT, cache);
}

void cell_sequence_forward_omp(CellKind kind, int B, int T, int I, int H, const double* x,
                               const double* w, const double* u, const double* b,
                               const double* gamma, const double* beta, const double* h0,
                               const double* c0, double* h_all, double* hT, double* cT,
                               CellCache& cache) {
    cell_sequence_forward_impl(true, kind, B, T, I, H, x, w, u, b, gamma, beta, h0, c0,
                               h_all, hT, cT, cache);
}

void cell_sequence_forward(CellKind kind, int B, int T, int I, int H, const double* x,
                           const double* w, const double* u, const double* b,
                           const double* gamma, const double* beta, const double* h0,
                           const double* c0, double* h_all, double* hT, double* cT,
                           CellCache& cache) {
    cell_sequence_forward_impl(parallel_enabled(), kind, B, T, I, H, x, w, u, b, gamma, beta,
                               h0, c0, h_all, hT, cT, cache);
}

void cell_sequence_backward_serial(CellKind kind, int B, int T, int I, int H, const double* x,
                                   const double* w, const double* u, const double* gamma,
                                   const double* beta, const double* h0, const double* c0,
                                   const double* h_all, const CellCache& cache,
                                   const double* dh_all, double* dx, double* dw, double* du,
                                   double* db, double* dgamma, double* dbeta) {
    cell_sequence_backward_impl(false, kind, B, T, I, H, x, w, u, gamma, beta, h0, c0, h_all,
                                cache, dh_all, dx, dw, du, db, dgamma, dbeta);
}

void cell_sequence_backward_omp(CellKind kind, int B, int T, int I, int H, const double* x,
                                const double* w, const double* u, const double* gamma,
                                const double* beta, const double* h0, const double* c0,
                                const double* h_all, const CellCache& cache,
                                const double* dh_all, double* dx, double* dw, double* du,
                                double* db, double* dgamma, double* dbeta) {
    cell_sequence_backward_impl(true, kind, B, T, I, H, x, w, u, gamma, beta, h0, c0, h_all,
                                cache, dh_all, dx, dw, du, db, dgamma, dbeta);
}

void cell_sequence_backward(CellKind kind, int B, int T, int I, int H, const double* x,
                            const double* w, const double* u, const double* gamma,
                            const double* beta, const double* h0, const double* c0,
                            const double* h_all, const CellCache& cache, const double* dh_all,
                            double* dx, double* dw, double* du, double* db, double* dgamma,
                            double* dbeta) {
    cell_sequence_backward_impl(parallel_enabled(), kind, B, T, I, H, x, w, u, gamma, beta,
                                h0, c0, h_all, cache, dh_all, dx, dw, du, db, dgamma, dbeta);
}

// ---------------------------------------------------------------------------
// stft frames
// ---------------------------------------------------------------------------

namespace {

void stft_frame_one(const double* x, int fft_size, int hop, const double* window,
                    std::size_t f, std::complex<double>* out) {
    const std::size_t bins = static_cast<std::size_t>(fft_size) / 2 + 1;
    std::vector<std::complex<double>> buf(fft_size);
    const double* seg = x + f * hop;
    for (int n = 0; n < fft_size; ++n) buf[n] = std::complex<double>(seg[n] * window[n], 0.0);
    dsp::fft_inplace(buf.data(), static_cast<std::size_t>(fft_size));
    std::memcpy(out + f * bins, buf.data(), sizeof(std::complex<double>) * bins);
}

}  // namespace

void stft_frames_serial(const double* x, std::size_t num_frames, int fft_size, int hop,
                        const double* window, std::complex<double>* out) {
    for (std::size_t f = 0; f < num_frames; ++f) stft_frame_one(x, fft_size, hop, window, f, out);
}

void stft_frames_omp(const double* x, std::size_t num_frames, int fft_size, int hop,
                     const double* window, std::complex<double>* out) {
#pragma omp parallel for schedule(static)
    for (long long f = 0; f < static_cast<long long>(num_frames); ++f)
        stft_frame_one(x, fft_size, hop, window, static_cast<std::size_t>(f), out);
}

void stft_frames(const double* x, std::size_t num_frames, int fft_size, int hop,
                 const double* window, std::complex<double>* out) {
    if (parallel_enabled())
        stft_frames_omp(x, num_frames, fft_size, hop, window, out);
    else
        stft_frames_serial(x, num_frames, fft_size, hop, window, out);
}

}  // namespace nfx::kernels
