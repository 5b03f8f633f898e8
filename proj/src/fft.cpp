#include "movedec/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace movedec::dsp {

namespace {

bool is_pow2(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Bluestein: X_k = w_k * IDFT(DFT(x_n w_n) * DFT(conj(w) chirp)), w_n = e^{-i pi n^2 / N}
std::vector<cplx> bluestein(const std::vector<cplx>& x) {
    const std::size_t n = x.size();
    const std::size_t m = next_pow2(2 * n - 1);

    std::vector<cplx> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        // i^2 mod 2n keeps the chirp argument small for long inputs
        const std::size_t sq = (i * i) % (2 * n);
        const double ang = -M_PI * static_cast<double>(sq) / static_cast<double>(n);
        w[i] = cplx(std::cos(ang), std::sin(ang));
    }

    std::vector<cplx> a(m, cplx(0, 0)), b(m, cplx(0, 0));
    for (std::size_t i = 0; i < n; ++i) a[i] = x[i] * w[i];
    b[0] = std::conj(w[0]);
    for (std::size_t i = 1; i < n; ++i) b[i] = b[m - i] = std::conj(w[i]);

    fft_pow2(a, false);
    fft_pow2(b, false);
    for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
    fft_pow2(a, true);

    std::vector<cplx> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * w[i];
    return out;
}

}  // namespace

void fft_pow2(std::vector<cplx>& a, bool inverse) {
    const std::size_t n = a.size();
    if (!is_pow2(n)) throw std::invalid_argument("fft_pow2 length must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const cplx wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1, 0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cplx u = a[i + j];
                const cplx v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (cplx& v : a) v /= static_cast<double>(n);
}

std::vector<cplx> fft(std::vector<cplx> a, bool inverse) {
    if (a.empty()) throw std::invalid_argument("fft of empty sequence");
    if (a.size() == 1) return a;
    if (inverse) {
        for (cplx& v : a) v = std::conj(v);
        std::vector<cplx> y = fft(std::move(a), false);
        const double n = static_cast<double>(y.size());
        for (cplx& v : y) v = std::conj(v) / n;
        return y;
    }
    if (is_pow2(a.size())) {
        fft_pow2(a, false);
        return a;
    }
    return bluestein(a);
}

std::vector<double> power_spectrum(const std::vector<double>& x) {
    std::vector<cplx> a(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) a[i] = cplx(x[i], 0.0);
    const std::vector<cplx> spec = fft(std::move(a), false);
    std::vector<double> p(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) p[i] = std::norm(spec[i]);
    return p;
}

}  // namespace movedec::dsp
