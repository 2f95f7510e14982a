#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "nfx/kernels/parallel.hpp"

namespace nfx::kernels {

// ---------------------------------------------------------------------------
// Hot inner loops, each in two flavors: an OpenMP kernel and a serial
// reference twin. Work is partitioned so that every output element is owned
// by exactly one thread and accumulated in a fixed order, which makes the two
// flavors bit-identical and keeps training runs reproducible for any thread
// count. The unsuffixed entry points dispatch on kernels::parallel_enabled().
//
// All gradient outputs (dw, du, db, dx, ...) ACCUMULATE into their buffers.
// ---------------------------------------------------------------------------

// Dilated causal 1-D convolution, left zero padding, output length == T.
// x: [ic, T], w: [oc, ic, K] (tap K-1 hits the current sample), b: [oc], y: [oc, T].
void conv1d_forward(const double* x, int ic, int T, const double* w, const double* b,
                    int oc, int K, int dilation, double* y);
void conv1d_forward_serial(const double* x, int ic, int T, const double* w, const double* b,
                           int oc, int K, int dilation, double* y);
void conv1d_forward_omp(const double* x, int ic, int T, const double* w, const double* b,
                        int oc, int K, int dilation, double* y);

// dx may be null when the input gradient is not needed.
void conv1d_backward(const double* x, int ic, int T, const double* w, int oc, int K,
                     int dilation, const double* dy, double* dx, double* dw, double* db);
void conv1d_backward_serial(const double* x, int ic, int T, const double* w, int oc, int K,
                            int dilation, const double* dy, double* dx, double* dw, double* db);
void conv1d_backward_omp(const double* x, int ic, int T, const double* w, int oc, int K,
                         int dilation, const double* dy, double* dx, double* dw, double* db);

// Dense layer over a batch of rows. x: [B, I], w: [O, I], b: [O], y: [B, O].
void linear_forward(const double* x, int B, int I, const double* w, const double* b,
                    int O, double* y);
void linear_forward_serial(const double* x, int B, int I, const double* w, const double* b,
                           int O, double* y);
void linear_forward_omp(const double* x, int B, int I, const double* w, const double* b,
                        int O, double* y);

void linear_backward(const double* x, int B, int I, const double* w, int O,
                     const double* dy, double* dx, double* dw, double* db);
void linear_backward_serial(const double* x, int B, int I, const double* w, int O,
                            const double* dy, double* dx, double* dw, double* db);
void linear_backward_omp(const double* x, int B, int I, const double* w, int O,
                         const double* dy, double* dx, double* dw, double* db);

// ---------------------------------------------------------------------------
// Fused recurrent cells. Weight layout stacks the gates row-wise:
//   gru: z, r, h~   lstm: i, f, g, o   vanilla: single gate
// w: [G*H, I], u: [G*H, H], b: [G*H]. One bias per gate.
// Optional FiLM (gamma/beta, length G*H) modulates the input projection W*x.
// Optional row scales (sw/su, length G*H) multiply the W*x and U*h products;
// they realize the per-step hypernetwork and are exclusive with FiLM.
// ---------------------------------------------------------------------------

enum class CellKind { vanilla, gru, lstm };

int gate_count(CellKind kind);

// One step for one item. gates/prex/uh are optional caches for backward:
// gates: [G*H] activated gate values (vanilla stores the new h),
// cand:  lstm new c (len H); gru unused; prex: raw W*x; uh: raw per-gate U*h.
void cell_step_forward(CellKind kind, int I, int H, const double* x, const double* w,
                       const double* u, const double* b, const double* gamma,
                       const double* beta, const double* sw, const double* su,
                       const double* h_prev, const double* c_prev, double* h_out,
                       double* c_out, double* gates, double* cand, double* prex, double* uh);

// Accumulates into every non-null gradient output.
void cell_step_backward(CellKind kind, int I, int H, const double* x, const double* w,
                        const double* u, const double* gamma, const double* beta,
                        const double* sw, const double* su, const double* h_prev,
                        const double* c_prev, const double* gates, const double* cand,
                        const double* prex, const double* uh, const double* dh,
                        const double* dc_in, double* dx, double* dh_prev, double* dc_prev,
                        double* dw, double* du, double* db, double* dgamma, double* dbeta,
                        double* dsw, double* dsu);

// Cache written by sequence forward and read back by sequence backward.
struct CellCache {
    std::vector<double> gates;  // [B, T, G*H]
    std::vector<double> cand;   // [B, T, H] (lstm c trajectory)
    std::vector<double> prex;   // [B, T, G*H] raw W*x, stored only under FiLM
    std::vector<double> uh;     // [B, T, G*H] raw U*h products, stored only when needed
};

// Whole-sequence forward over a batch, parallel across items.
// x: [B, T, I], h0/c0: [B, H], h_all: [B, T, H], hT/cT final states (may be null).
void cell_sequence_forward(CellKind kind, int B, int T, int I, int H, const double* x,
                           const double* w, const double* u, const double* b,
                           const double* gamma, const double* beta, const double* h0,
                           const double* c0, double* h_all, double* hT, double* cT,
                           CellCache& cache);
void cell_sequence_forward_serial(CellKind kind, int B, int T, int I, int H, const double* x,
                                  const double* w, const double* u, const double* b,
                                  const double* gamma, const double* beta, const double* h0,
                                  const double* c0, double* h_all, double* hT, double* cT,
                                  CellCache& cache);
void cell_sequence_forward_omp(CellKind kind, int B, int T, int I, int H, const double* x,
                               const double* w, const double* u, const double* b,
                               const double* gamma, const double* beta, const double* h0,
                               const double* c0, double* h_all, double* hT, double* cT,
                               CellCache& cache);

// BPTT over the whole batch. Per-item parameter gradients are reduced in item
// order after the parallel region, so results do not depend on thread count.
void cell_sequence_backward(CellKind kind, int B, int T, int I, int H, const double* x,
                            const double* w, const double* u, const double* gamma,
                            const double* beta, const double* h0, const double* c0,
                            const double* h_all, const CellCache& cache, const double* dh_all,
                            double* dx, double* dw, double* du, double* db, double* dgamma,
                            double* dbeta);
void cell_sequence_backward_serial(CellKind kind, int B, int T, int I, int H, const double* x,
                                   const double* w, const double* u, const double* gamma,
                                   const double* beta, const double* h0, const double* c0,
                                   const double* h_all, const CellCache& cache,
                                   const double* dh_all, double* dx, double* dw, double* du,
                                   double* db, double* dgamma, double* dbeta);
void cell_sequence_backward_omp(CellKind kind, int B, int T, int I, int H, const double* x,
                                const double* w, const double* u, const double* gamma,
                                const double* beta, const double* h0, const double* c0,
                                const double* h_all, const CellCache& cache,
                                const double* dh_all, double* dx, double* dw, double* du,
                                double* db, double* dgamma, double* dbeta);

// Hann-windowed one-sided STFT frames, parallel across frames.
// out holds num_frames * (fft_size/2 + 1) bins.
void stft_frames(const double* x, std::size_t num_frames, int fft_size, int hop,
                 const double* window, std::complex<double>* out);
void stft_frames_serial(const double* x, std::size_t num_frames, int fft_size, int hop,
                        const double* window, std::complex<double>* out);
void stft_frames_omp(const double* x, std::size_t num_frames, int fft_size, int hop,
                     const double* window, std::complex<double>* out);

}  // namespace nfx::kernels
