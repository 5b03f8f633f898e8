#include "movedec/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>

#include "movedec/error.hpp"
#include "movedec/fft.hpp"

namespace movedec::dsp {

void EcogRecording::validate() const {
    if (samples.rank() != 2) throw ShapeError("recording samples must be [channels, time]");
    if (sample_rate_hz <= 0.0) throw std::invalid_argument("sample rate must be positive");
    if (!channel_meta.empty() && static_cast<int>(channel_meta.size()) != n_channels())
        throw ShapeError("channel metadata length does not match channel count");
    std::set<std::pair<int, int>> seen;
    for (const ChannelMeta& m : channel_meta)
        if (m.is_grid() && !seen.insert({m.row, m.col}).second)
            throw std::invalid_argument("duplicate grid coordinates (" + std::to_string(m.row) +
                                        ", " + std::to_string(m.col) + ")");
    for (int c : bad_channels)
        if (c < 0 || c >= n_channels())
            throw std::invalid_argument("bad channel id " + std::to_string(c) + " out of range");
}

std::vector<Biquad> butter_bandpass_sos(double low_hz, double high_hz, double fs, int order) {
    if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0))
        throw std::invalid_argument("bandpass cutoffs must satisfy 0 < low < high < fs/2, got " +
                                    std::to_string(low_hz) + ", " + std::to_string(high_hz) +
                                    " at fs " + std::to_string(fs));
    if (order < 2 || order % 2 != 0)
        throw std::invalid_argument("bandpass prototype order must be even and >= 2");

    using C = std::complex<double>;
    const double fs2 = 2.0 * fs;
    const double wlo = fs2 * std::tan(M_PI * low_hz / fs);
    const double whi = fs2 * std::tan(M_PI * high_hz / fs);
    const double w0 = std::sqrt(wlo * whi);
    const double bw = whi - wlo;
    const double wc_dig = 2.0 * std::atan(w0 / fs2);

    std::vector<Biquad> sos;
    for (int k = 0; k < order / 2; ++k) {
        const double theta = M_PI * (2.0 * k + 1.0) / (2.0 * order);
        const C proto(-std::sin(theta), std::cos(theta));
        // lowpass-to-bandpass: each prototype pole splits into two
        const C bp = bw * proto;
        const C disc = std::sqrt(bp * bp - 4.0 * w0 * w0);
        for (const C s : {(bp + disc) / 2.0, (bp - disc) / 2.0}) {
            const C zp = (fs2 + s) / (fs2 - s);
            Biquad q;
            q.a1 = -2.0 * zp.real();
            q.a2 = std::norm(zp);
            q.b0 = 1.0;
            q.b1 = 0.0;
            q.b2 = -1.0;
            // unit gain at the warped center frequency
            const C z = std::polar(1.0, wc_dig);
            const C zi = 1.0 / z;
            const C h = (q.b0 + q.b1 * zi + q.b2 * zi * zi) / (1.0 + q.a1 * zi + q.a2 * zi * zi);
            const double g = 1.0 / std::abs(h);
            q.b0 *= g;
            q.b1 *= g;
            q.b2 *= g;
            sos.push_back(q);
        }
    }
    return sos;
}

namespace {

// steady-state direct-form-II-transposed state for unit constant input
std::array<double, 2> section_zi(const Biquad& q) {
    const double z1 = (q.b1 + q.b2 - (q.a1 + q.a2) * q.b0) / (1.0 + q.a1 + q.a2);
    const double z2 = q.b2 - q.a2 * (q.b0 + z1);
    return {z1, z2};
}

void sosfilt(const std::vector<Biquad>& sos, std::vector<double>& x, double x0) {
    double scale = x0;
    for (const Biquad& q : sos) {
        const std::array<double, 2> zi = section_zi(q);
        double z1 = zi[0] * scale, z2 = zi[1] * scale;
        for (double& v : x) {
            const double in = v;
            const double y = q.b0 * in + z1;
            z1 = q.b1 * in - q.a1 * y + z2;
            z2 = q.b2 * in - q.a2 * y;
            v = y;
        }
        // the next section's steady-state input is this section's DC gain
        scale *= (q.b0 + q.b1 + q.b2) / (1.0 + q.a1 + q.a2);
    }
}

}  // namespace

std::vector<double> sosfiltfilt(const std::vector<Biquad>& sos, const std::vector<double>& x) {
    const long n = static_cast<long>(x.size());
    const long pad = 3 * (2 * static_cast<long>(sos.size()) + 1);
    if (n <= pad)
        throw std::invalid_argument("signal of length " + std::to_string(n) +
                                    " too short for filtfilt padding " + std::to_string(pad));

    std::vector<double> ext(static_cast<std::size_t>(n + 2 * pad));
    for (long i = 0; i < pad; ++i)
        ext[static_cast<std::size_t>(i)] = 2.0 * x[0] - x[static_cast<std::size_t>(pad - i)];
    std::copy(x.begin(), x.end(), ext.begin() + pad);
    for (long i = 0; i < pad; ++i)
        ext[static_cast<std::size_t>(n + pad + i)] =
            2.0 * x[static_cast<std::size_t>(n - 1)] - x[static_cast<std::size_t>(n - 2 - i)];

    sosfilt(sos, ext, ext[0]);
    std::reverse(ext.begin(), ext.end());
    sosfilt(sos, ext, ext[0]);
    std::reverse(ext.begin(), ext.end());

    return std::vector<double>(ext.begin() + pad, ext.begin() + pad + n);
}

std::vector<double> bandpass_channel(const std::vector<double>& x, double fs, double low_hz,
                                     double high_hz) {
    return sosfiltfilt(butter_bandpass_sos(low_hz, high_hz, fs), x);
}

EcogRecording bandpass(const EcogRecording& rec, double low_hz, double high_hz) {
    const std::vector<Biquad> sos = butter_bandpass_sos(low_hz, high_hz, rec.sample_rate_hz);
    EcogRecording out = rec;
    const int nc = rec.n_channels();
    const long ns = rec.n_samples();
#pragma omp parallel for schedule(static)
    for (int c = 0; c < nc; ++c) {
        std::vector<double> ch(rec.channel(c), rec.channel(c) + ns);
        const std::vector<double> filtered = sosfiltfilt(sos, ch);
        std::copy(filtered.begin(), filtered.end(), out.channel(c));
    }
    return out;
}

namespace {

// least-squares fit of degree-poly polynomial over (dt, y) pairs, value at
// dt=0; the basis is scaled to [-1, 1] for conditioning, which leaves the
// value at zero unchanged
double polyfit_at_zero(const std::vector<double>& dt, const double* y, int poly) {
    const int m = poly + 1;
    double span = 1.0;
    for (double d : dt) span = std::max(span, std::abs(d));
    double ata[16] = {0};  // up to cubic
    double atb[4] = {0};
    for (std::size_t i = 0; i < dt.size(); ++i) {
        double powers[4] = {1.0, 0.0, 0.0, 0.0};
        for (int p = 1; p < m; ++p) powers[p] = powers[p - 1] * (dt[i] / span);
        for (int r = 0; r < m; ++r) {
            for (int c = 0; c < m; ++c) ata[r * m + c] += powers[r] * powers[c];
            atb[r] += powers[r] * y[i];
        }
    }
    // gaussian elimination with partial pivoting
    for (int col = 0; col < m; ++col) {
        int piv = col;
        for (int r = col + 1; r < m; ++r)
            if (std::abs(ata[r * m + col]) > std::abs(ata[piv * m + col])) piv = r;
        if (piv != col) {
            for (int c = 0; c < m; ++c) std::swap(ata[col * m + c], ata[piv * m + c]);
            std::swap(atb[col], atb[piv]);
        }
        const double d = ata[col * m + col];
        for (int r = col + 1; r < m; ++r) {
            const double f = ata[r * m + col] / d;
            for (int c = col; c < m; ++c) ata[r * m + c] -= f * ata[col * m + c];
            atb[r] -= f * atb[col];
        }
    }
    double coef[4];
    for (int r = m - 1; r >= 0; --r) {
        double acc = atb[r];
        for (int c = r + 1; c < m; ++c) acc -= ata[r * m + c] * coef[c];
        coef[r] = acc / ata[r * m + r];
    }
    return coef[0];
}

}  // namespace

std::vector<double> savgol(const std::vector<double>& series, int window, int poly_order) {
    if (window % 2 == 0 || window <= poly_order)
        throw std::invalid_argument("savgol window must be odd and exceed the polynomial order");
    if (poly_order < 1 || poly_order > 3)
        throw std::invalid_argument("savgol polynomial order must be 1..3");
    const long n = static_cast<long>(series.size());
    if (n < window)
        throw std::invalid_argument("series of length " + std::to_string(n) +
                                    " shorter than savgol window " + std::to_string(window));
    const int half = window / 2;

    // interior weights are shift-invariant: precompute y -> fitted value once
    std::vector<double> weights(static_cast<std::size_t>(window));
    {
        std::vector<double> dt(static_cast<std::size_t>(window));
        for (int j = 0; j < window; ++j) dt[static_cast<std::size_t>(j)] = j - half;
        for (int j = 0; j < window; ++j) {
            std::vector<double> unit(static_cast<std::size_t>(window), 0.0);
            unit[static_cast<std::size_t>(j)] = 1.0;
            weights[static_cast<std::size_t>(j)] = polyfit_at_zero(dt, unit.data(), poly_order);
        }
    }

    std::vector<double> out(static_cast<std::size_t>(n));
    for (long t = 0; t < n; ++t) {
        const long lo = std::max(0L, t - half), hi = std::min(n - 1, t + half);
        if (hi - lo + 1 == window) {
            double acc = 0.0;
            for (int j = 0; j < window; ++j)
                acc += weights[static_cast<std::size_t>(j)] *
                       series[static_cast<std::size_t>(lo + j)];
            out[static_cast<std::size_t>(t)] = acc;
        } else {
            std::vector<double> dt(static_cast<std::size_t>(hi - lo + 1));
            for (long i = lo; i <= hi; ++i) dt[static_cast<std::size_t>(i - lo)] = static_cast<double>(i - t);
            out[static_cast<std::size_t>(t)] =
                polyfit_at_zero(dt, series.data() + lo, poly_order);
        }
    }
    return out;
}

std::pair<double, double> mean_std(const double* x, long n) {
    double mu = 0.0;
    for (long i = 0; i < n; ++i) mu += x[i];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (long i = 0; i < n; ++i) var += (x[i] - mu) * (x[i] - mu);
    return {mu, std::sqrt(var / static_cast<double>(n))};
}

Tensor normalize_window(const Tensor& window, const Tensor& neighborhood, double fs) {
    if (window.rank() != 2 || neighborhood.rank() != 2 || window.shape[0] != neighborhood.shape[0])
        throw ShapeError("normalize_window expects matching [channels, *] arrays");
    if (neighborhood.shape[1] < static_cast<int>(3.0 * fs))
        throw std::invalid_argument("neighborhood shorter than 3 s at fs " + std::to_string(fs));
    const int c = window.shape[0];
    const long w = window.shape[1], m = neighborhood.shape[1];
    Tensor out = window;
    for (int ch = 0; ch < c; ++ch) {
        const auto [mu, sigma] = mean_std(neighborhood.v.data() + static_cast<long>(ch) * m, m);
        double* row = out.v.data() + static_cast<long>(ch) * w;
        for (long i = 0; i < w; ++i) row[i] = (row[i] - mu) / (sigma + kNormEps);
    }
    return out;
}

std::vector<Tensor> chunk_window(const Tensor& window, int n_chunks) {
    if (window.rank() != 2) throw ShapeError("chunk_window expects [channels, time]");
    const int c = window.shape[0];
    const long t = window.shape[1];
    if (n_chunks <= 0 || t % n_chunks != 0)
        throw std::invalid_argument("window length " + std::to_string(t) +
                                    " not divisible into " + std::to_string(n_chunks) + " chunks");
    const long w = t / n_chunks;
    std::vector<Tensor> chunks;
    chunks.reserve(static_cast<std::size_t>(n_chunks));
    for (int k = 0; k < n_chunks; ++k) {
        Tensor chunk({c, static_cast<int>(w)});
        for (int ch = 0; ch < c; ++ch)
            std::copy(window.v.begin() + static_cast<long>(ch) * t + k * w,
                      window.v.begin() + static_cast<long>(ch) * t + (k + 1) * w,
                      chunk.v.begin() + static_cast<long>(ch) * w);
        chunks.push_back(std::move(chunk));
    }
    return chunks;
}

SpectralFeatures stft_band_power(const Tensor& x, double fs,
                                 const std::vector<std::array<double, 2>>& bands) {
    if (x.rank() != 2) throw ShapeError("stft_band_power expects [channels, time]");
    const long w = static_cast<long>(fs);
    if (x.shape[1] < w)
        throw std::invalid_argument("signal shorter than one 1 s window");
    for (const auto& b : bands)
        if (b[0] < 0.0 || b[1] > fs / 2.0 || b[0] > b[1])
            throw std::invalid_argument("band [" + std::to_string(b[0]) + ", " +
                                        std::to_string(b[1]) + "] outside [0, Nyquist]");

    const int nc = x.shape[0];
    const long n_win = x.shape[1] / w;
    SpectralFeatures feat;
    feat.n_channels = nc;
    feat.bands = bands;
    feat.power.assign(static_cast<std::size_t>(nc) * bands.size(), 0.0);

#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < nc; ++ch) {
        std::vector<double> acc(bands.size(), 0.0);
        for (long win = 0; win < n_win; ++win) {
            const double* seg = x.v.data() + static_cast<long>(ch) * x.shape[1] + win * w;
            const std::vector<double> spec = power_spectrum(std::vector<double>(seg, seg + w));
            for (long k = 0; k <= w / 2; ++k) {
                const double freq = static_cast<double>(k) * fs / static_cast<double>(w);
                for (std::size_t b = 0; b < bands.size(); ++b)
                    if (freq >= bands[b][0] && freq <= bands[b][1])
                        acc[b] += spec[static_cast<std::size_t>(k)];
            }
        }
        for (std::size_t b = 0; b < bands.size(); ++b)
            feat.power[static_cast<std::size_t>(ch) * bands.size() + b] =
                acc[b] / static_cast<double>(n_win);
    }
    return feat;
}

Tensor augment(const Tensor& extended, int margin_samples, const std::vector<double>& mu,
               const std::vector<double>& sigma, std::uint64_t seed, const AugmentConfig& cfg,
               double fs) {
    if (extended.rank() != 2) throw ShapeError("augment expects [channels, time]");
    const int c = extended.shape[0];
    const long total = extended.shape[1];
    const long w = total - 2 * margin_samples;
    if (w <= 0) throw std::invalid_argument("margins leave no window");
    if (static_cast<int>(mu.size()) != c || static_cast<int>(sigma.size()) != c)
        throw std::invalid_argument("per-channel stats length mismatch");
    const int max_shift = static_cast<int>(std::lround(cfg.max_shift_ms * fs / 1000.0));
    if (margin_samples < max_shift)
        throw std::invalid_argument("margin of " + std::to_string(margin_samples) +
                                    " samples cannot cover shifts up to " +
                                    std::to_string(max_shift));

    Rng rng(seed);
    const bool triggered = rng.uniform() < cfg.probability;
    const long shift = triggered ? rng.uniform_int(-max_shift, max_shift) : 0;

    Tensor out({c, static_cast<int>(w)});
    for (int ch = 0; ch < c; ++ch) {
        const double* src = extended.v.data() + static_cast<long>(ch) * total + margin_samples + shift;
        double* dst = out.v.data() + static_cast<long>(ch) * w;
        const double m = mu[static_cast<std::size_t>(ch)];
        const double s = sigma[static_cast<std::size_t>(ch)] + kNormEps;
        for (long i = 0; i < w; ++i) dst[i] = (src[i] - m) / s;
    }
    if (triggered && cfg.noise_sd > 0.0)
        for (double& v : out.v) v += rng.gaussian() * cfg.noise_sd;
    return out;
}

}  // namespace movedec::dsp
