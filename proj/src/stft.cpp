#include "nfx/dsp/stft.hpp"

#include <cmath>

#include "nfx/dsp/fft.hpp"
#include "nfx/errors.hpp"
#include "nfx/kernels/kernels.hpp"

namespace nfx::dsp {

std::vector<double> hann_window(int n) {
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i)
        w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / static_cast<double>(n)));
    return w;
}

std::size_t stft_frame_count(std::size_t signal_len, int fft_size, int hop) {
    if (signal_len < static_cast<std::size_t>(fft_size)) return 0;
    return (signal_len - fft_size) / hop + 1;
}

Spectrogram stft(const AudioBuffer& buf, int fft_size, int hop) {
    if (!is_power_of_two(static_cast<std::size_t>(fft_size)))
        throw NonPowerOfTwo("stft fft_size " + std::to_string(fft_size));
    if (hop < 1) throw Error("stft: hop must be >= 1");
    if (buf.size() < static_cast<std::size_t>(fft_size))
        throw SignalTooShort("stft needs >= " + std::to_string(fft_size) + " samples, got " +
                             std::to_string(buf.size()));

    Spectrogram spec;
    spec.fft_size = fft_size;
    spec.hop = hop;
    spec.sample_rate = buf.sample_rate;
    spec.num_frames = stft_frame_count(buf.size(), fft_size, hop);
    spec.num_bins = static_cast<std::size_t>(fft_size) / 2 + 1;
    spec.frames.resize(spec.num_frames * spec.num_bins);

    const std::vector<double> window = hann_window(fft_size);
    kernels::stft_frames(buf.samples.data(), spec.num_frames, fft_size, hop, window.data(),
                         spec.frames.data());
    return spec;
}

std::vector<double> spectral_centroid_frames(const Spectrogram& spec) {
    std::vector<double> centroid(spec.num_frames, 0.0);
    for (std::size_t f = 0; f < spec.num_frames; ++f) {
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < spec.num_bins; ++k) {
            const double mag = std::abs(spec.at(f, k));
            num += spec.bin_hz(k) * mag;
            den += mag;
        }
        centroid[f] = den < 1e-12 ? 0.0 : num / den;
    }
    return centroid;
}

std::vector<double> stft_adjoint(const Spectrogram& grad_spec, std::size_t signal_len) {
    const int n = grad_spec.fft_size;
    const std::vector<double> window = hann_window(n);
    std::vector<double> dx(signal_len, 0.0);
    std::vector<cplx> buf(n);
    for (std::size_t f = 0; f < grad_spec.num_frames; ++f) {
        std::fill(buf.begin(), buf.end(), cplx(0.0, 0.0));
        for (std::size_t k = 0; k < grad_spec.num_bins; ++k) buf[k] = grad_spec.at(f, k);
        // dL/dx_n = w_n * Re(sum_k G_k e^{i 2 pi k n / N}) = w_n * Re(N * ifft(G)[n])
        ifft_inplace(buf.data(), static_cast<std::size_t>(n));
        const std::size_t off = f * grad_spec.hop;
        for (int i = 0; i < n; ++i) dx[off + i] += window[i] * buf[i].real() * n;
    }
    return dx;
}

}  // namespace nfx::dsp
