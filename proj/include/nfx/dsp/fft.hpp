#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace nfx::dsp {

using cplx = std::complex<double>;

bool is_power_of_two(std::size_t n);

/// In-place unnormalized forward DFT, radix-2. n must be a power of two (n >= 1).
void fft_inplace(cplx* data, std::size_t n);

/// In-place inverse DFT carrying the 1/n factor, so ifft(fft(x)) == x.
void ifft_inplace(cplx* data, std::size_t n);

std::vector<cplx> fft(std::vector<cplx> data);
std::vector<cplx> ifft(std::vector<cplx> data);

}  // namespace nfx::dsp
