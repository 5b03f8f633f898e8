#pragma once

#include <complex>
#include <vector>

namespace movedec::dsp {

using cplx = std::complex<double>;

// Iterative radix-2 transform; length must be a power of two.
void fft_pow2(std::vector<cplx>& a, bool inverse);

// Any length: radix-2 when possible, Bluestein's chirp-z otherwise.
// inverse applies the 1/N factor.
std::vector<cplx> fft(std::vector<cplx> a, bool inverse = false);

// |X_k|^2 for k = 0..N-1 of a real signal.
std::vector<double> power_spectrum(const std::vector<double>& x);

}  // namespace movedec::dsp
