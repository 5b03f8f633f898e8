#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <vector>

#include "movedec/rng.hpp"
#include "movedec/tensor.hpp"

namespace movedec::dsp {

using nn::Tensor;

// Electrode position: grid electrodes carry (row, col), strip electrodes a
// strip index; exactly one of the two forms is set.
struct ChannelMeta {
    int row = -1;
    int col = -1;
    int strip = -1;

    bool is_grid() const { return row >= 0 && col >= 0; }
};

struct EcogRecording {
    Tensor samples;  // [channels, time], microvolts
    double sample_rate_hz = 1000.0;
    std::vector<ChannelMeta> channel_meta;
    std::set<int> bad_channels;

    int n_channels() const { return samples.shape.empty() ? 0 : samples.shape[0]; }
    long n_samples() const { return samples.shape.size() < 2 ? 0 : samples.shape[1]; }
    double* channel(int c) { return samples.v.data() + static_cast<long>(c) * n_samples(); }
    const double* channel(int c) const {
        return samples.v.data() + static_cast<long>(c) * n_samples();
    }
    void validate() const;
};

// Mean band power per channel for each requested band, row-major
// [channel][band].
struct SpectralFeatures {
    int n_channels = 0;
    std::vector<std::array<double, 2>> bands;
    std::vector<double> power;

    double at(int ch, int band) const {
        return power[static_cast<std::size_t>(ch) * bands.size() + static_cast<std::size_t>(band)];
    }
};

// One second-order section, a0 normalized to 1.
struct Biquad {
    double b0, b1, b2, a1, a2;
};

// Butterworth bandpass of the given prototype order as cascaded biquads
// (order conjugate-pole pairs after the lowpass-to-bandpass transform), each
// section gain-normalized at the warped center frequency.
std::vector<Biquad> butter_bandpass_sos(double low_hz, double high_hz, double fs, int order = 4);

// Zero-phase forward-backward cascade filtering with odd-extension padding
// and steady-state initial conditions, so step edges and DC produce no
// start-up transient.
std::vector<double> sosfiltfilt(const std::vector<Biquad>& sos, const std::vector<double>& x);

std::vector<double> bandpass_channel(const std::vector<double>& x, double fs, double low_hz = 10.0,
                                     double high_hz = 200.0);
EcogRecording bandpass(const EcogRecording& rec, double low_hz = 10.0, double high_hz = 200.0);

// Least-squares polynomial smoothing; edge points are fit on their truncated
// windows instead of padding the series.
std::vector<double> savgol(const std::vector<double>& series, int window = 21, int poly_order = 3);

// population mean and standard deviation
std::pair<double, double> mean_std(const double* x, long n);

// (x - mu)/(sigma + 1e-8) per channel, stats taken from the neighborhood
// [channels, >= 3 s] surrounding the window
Tensor normalize_window(const Tensor& window, const Tensor& neighborhood, double fs = 1000.0);
constexpr double kNormEps = 1e-8;

// [channels, T] -> n_chunks pieces of [channels, T/n_chunks], in order
std::vector<Tensor> chunk_window(const Tensor& window, int n_chunks = 5);

// Non-overlapping 1 s rectangular windows; per band, one-sided DFT
// magnitude-squared summed over bins inside [lo, hi] inclusive, averaged
// over windows.
SpectralFeatures stft_band_power(
    const Tensor& x, double fs,
    const std::vector<std::array<double, 2>>& bands = {{{10.0, 30.0}}, {{70.0, 100.0}}});

struct AugmentConfig {
    double probability = 0.25;
    double noise_sd = 0.001;
    int max_shift_ms = 100;
};

// Training-time perturbation. extended is the raw [channels, W + 2*margin]
// buffer around the sample's window; with probability cfg.probability the
// window is re-extracted at a uniform shift of up to max_shift_ms AND
// gaussian noise is added after normalization; otherwise the unshifted
// window is returned. Draw order: trigger, shift, then one gaussian per
// element row-major. mu/sigma are the stored per-channel neighborhood stats.
Tensor augment(const Tensor& extended, int margin_samples, const std::vector<double>& mu,
               const std::vector<double>& sigma, std::uint64_t seed, const AugmentConfig& cfg = {},
               double fs = 1000.0);

}  // namespace movedec::dsp
