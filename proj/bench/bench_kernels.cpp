// Timing comparison between the serial reference kernels and their OpenMP
// twins, over shapes typical for training and analysis.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "nfx/dsp/stft.hpp"
#include "nfx/kernels/kernels.hpp"
#include "nfx/nn/rng.hpp"

using namespace nfx;
using Clock = std::chrono::steady_clock;

namespace {

std::vector<double> random_vector(nn::Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.next_uniform(-1.0, 1.0);
    return v;
}

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double omp_ms) {
    std::printf("%-36s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms, omp_ms,
                serial_ms / omp_ms);
}

}  // namespace

int main() {
    nn::Rng rng(1234);
    std::printf("%-36s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");
    std::printf("threads: %d\n", kernels::thread_count());

    {
        const int ic = 16, oc = 16, K = 3, T = 16384, dil = 4;
        const auto x = random_vector(rng, static_cast<std::size_t>(ic) * T);
        const auto w = random_vector(rng, static_cast<std::size_t>(oc) * ic * K);
        const auto b = random_vector(rng, oc);
        std::vector<double> y(static_cast<std::size_t>(oc) * T);
        report("conv1d fwd 16x16x3 T=16384",
               time_ms([&] { kernels::conv1d_forward_serial(x.data(), ic, T, w.data(), b.data(), oc, K, dil, y.data()); }, 5),
               time_ms([&] { kernels::conv1d_forward_omp(x.data(), ic, T, w.data(), b.data(), oc, K, dil, y.data()); }, 5));

        const auto dy = random_vector(rng, y.size());
        std::vector<double> dx(x.size()), dw(w.size()), db(b.size());
        report("conv1d bwd 16x16x3 T=16384",
               time_ms([&] { kernels::conv1d_backward_serial(x.data(), ic, T, w.data(), oc, K, dil, dy.data(), dx.data(), dw.data(), db.data()); }, 5),
               time_ms([&] { kernels::conv1d_backward_omp(x.data(), ic, T, w.data(), oc, K, dil, dy.data(), dx.data(), dw.data(), db.data()); }, 5));
    }
    {
        const int B = 4096, I = 64, O = 64;
        const auto x = random_vector(rng, static_cast<std::size_t>(B) * I);
        const auto w = random_vector(rng, static_cast<std::size_t>(O) * I);
        const auto b = random_vector(rng, O);
        std::vector<double> y(static_cast<std::size_t>(B) * O);
        report("linear fwd 4096x64 -> 64",
               time_ms([&] { kernels::linear_forward_serial(x.data(), B, I, w.data(), b.data(), O, y.data()); }, 10),
               time_ms([&] { kernels::linear_forward_omp(x.data(), B, I, w.data(), b.data(), O, y.data()); }, 10));
    }
    for (auto [kind, name] : {std::pair{kernels::CellKind::gru, "gru seq B=16 T=2048 H=32"},
                              std::pair{kernels::CellKind::lstm, "lstm seq B=16 T=2048 H=32"}}) {
        const int B = 16, T = 2048, I = 2, H = 32;
        const int G = kernels::gate_count(kind);
        const auto x = random_vector(rng, static_cast<std::size_t>(B) * T * I);
        const auto w = random_vector(rng, static_cast<std::size_t>(G) * H * I);
        const auto u = random_vector(rng, static_cast<std::size_t>(G) * H * H);
        const auto b = random_vector(rng, static_cast<std::size_t>(G) * H);
        std::vector<double> h0(static_cast<std::size_t>(B) * H, 0.0), c0 = h0;
        std::vector<double> h_all(static_cast<std::size_t>(B) * T * H);
        kernels::CellCache cache;
        const bool lstm = kind == kernels::CellKind::lstm;
        const auto fwd_serial = [&] {
            kernels::cell_sequence_forward_serial(kind, B, T, I, H, x.data(), w.data(), u.data(),
                                                  b.data(), nullptr, nullptr, h0.data(),
                                                  lstm ? c0.data() : nullptr, h_all.data(),
                                                  nullptr, nullptr, cache);
        };
        const auto fwd_omp = [&] {
            kernels::cell_sequence_forward_omp(kind, B, T, I, H, x.data(), w.data(), u.data(),
                                               b.data(), nullptr, nullptr, h0.data(),
                                               lstm ? c0.data() : nullptr, h_all.data(),
                                               nullptr, nullptr, cache);
        };
        report(name, time_ms(fwd_serial, 3), time_ms(fwd_omp, 3));

        const auto dh = random_vector(rng, h_all.size());
        std::vector<double> dx(x.size()), dw(w.size()), du(u.size()), db(b.size());
        fwd_serial();
        const auto bwd_serial = [&] {
            kernels::cell_sequence_backward_serial(kind, B, T, I, H, x.data(), w.data(), u.data(),
                                                   nullptr, nullptr, h0.data(),
                                                   lstm ? c0.data() : nullptr, h_all.data(), cache,
                                                   dh.data(), dx.data(), dw.data(), du.data(),
                                                   db.data(), nullptr, nullptr);
        };
        const auto bwd_omp = [&] {
            kernels::cell_sequence_backward_omp(kind, B, T, I, H, x.data(), w.data(), u.data(),
                                                nullptr, nullptr, h0.data(),
                                                lstm ? c0.data() : nullptr, h_all.data(), cache,
                                                dh.data(), dx.data(), dw.data(), du.data(),
                                                db.data(), nullptr, nullptr);
        };
        std::string bwd_name = std::string(name);
        bwd_name.replace(bwd_name.find("seq"), 3, "bwd");
        report(bwd_name.c_str(), time_ms(bwd_serial, 3), time_ms(bwd_omp, 3));
    }
    {
        const auto x = random_vector(rng, 1 << 20);
        const int fft = 2048, hop = 512;
        const auto window = dsp::hann_window(fft);
        const std::size_t frames = dsp::stft_frame_count(x.size(), fft, hop);
        std::vector<std::complex<double>> out(frames * (fft / 2 + 1));
        report("stft 2048/512 on 1M samples",
               time_ms([&] { kernels::stft_frames_serial(x.data(), frames, fft, hop, window.data(), out.data()); }, 3),
               time_ms([&] { kernels::stft_frames_omp(x.data(), frames, fft, hop, window.data(), out.data()); }, 3));
    }
    return 0;
}
