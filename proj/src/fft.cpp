#include "nfx/dsp/fft.hpp"

#include <cmath>
#include <unordered_map>
#include <utility>

#include "nfx/errors.hpp"

namespace nfx::dsp {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Twiddle factors e^{-2*pi*i*k/n} for k < n/2, cached per (thread, n) so
// repeated STFT frames do not pay the trig cost again.
const std::vector<cplx>& twiddle_table(std::size_t n) {
    thread_local std::unordered_map<std::size_t, std::vector<cplx>> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<cplx> tw(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
        const double ang = -kTwoPi * static_cast<double>(k) / static_cast<double>(n);
        tw[k] = cplx(std::cos(ang), std::sin(ang));
    }
    return cache.emplace(n, std::move(tw)).first->second;
}

void bit_reverse_permute(cplx* a, std::size_t n) {
    std::size_t j = 0;
    for (std::size_t i = 1; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_inplace(cplx* a, std::size_t n) {
    if (!is_power_of_two(n)) throw NonPowerOfTwo("fft length " + std::to_string(n));
    if (n == 1) return;
    const auto& tw = twiddle_table(n);
    bit_reverse_permute(a, n);
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t stride = n / len;
        for (std::size_t base = 0; base < n; base += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cplx w = tw[k * stride];
                const cplx u = a[base + k];
                const cplx v = a[base + k + len / 2] * w;
                a[base + k] = u + v;
                a[base + k + len / 2] = u - v;
            }
        }
    }
}

void ifft_inplace(cplx* a, std::size_t n) {
    if (!is_power_of_two(n)) throw NonPowerOfTwo("ifft length " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) a[i] = std::conj(a[i]);
    fft_inplace(a, n);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = std::conj(a[i]) * inv;
}

std::vector<cplx> fft(std::vector<cplx> data) {
    fft_inplace(data.data(), data.size());
    return data;
}

std::vector<cplx> ifft(std::vector<cplx> data) {
    ifft_inplace(data.data(), data.size());
    return data;
}

}  // namespace nfx::dsp
