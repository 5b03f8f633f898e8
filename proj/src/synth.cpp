#include "movedec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "movedec/error.hpp"
#include "movedec/rng.hpp"

namespace movedec::synth {

namespace {

constexpr long kMinEventSpacingMs = 6000;
constexpr long kStartMarginMs = 6000;
constexpr long kEndMarginMs = 3000;

constexpr double kJitterPx = 0.05;
constexpr double kDriftPxPerFrame = 0.22;
constexpr int kDriftFrames = 45;
constexpr double kBurstPxPerFrame = 2.2;
constexpr int kBurstFrames = 9;
constexpr int kHoldFrames = 15;
constexpr double kReturnPxPerFrame = 0.6;
// smoothing widens the ramp, so the detector fires this many frames before
// the physical burst start; shift the burst to compensate
constexpr int kBurstStartOffset = 3;

constexpr double kGammaToneHz = 80.0;
constexpr double kBackgroundScale = 4.0;
constexpr long kEnvelopeRampMs = 100;

constexpr double kViewCenterX = 320.0;
constexpr double kViewCenterY = 240.0;
constexpr double kViewScale = 0.1;

const double kAnchorX[events::kNumJoints] = {320, 280, 360, 250, 390, 230, 410};
const double kAnchorY[events::kNumJoints] = {140, 200, 200, 270, 270, 340, 340};

// three-pole pinking filter (Kellet), roughly 1/f over the passband
struct PinkNoise {
    double b0 = 0, b1 = 0, b2 = 0;

    double next(Rng& rng) {
        const double w = rng.gaussian();
        b0 = 0.99765 * b0 + w * 0.0990460;
        b1 = 0.96300 * b1 + w * 0.2965164;
        b2 = 0.57000 * b2 + w * 1.0526913;
        return b0 + b1 + b2 + w * 0.1848;
    }
};

double envelope(long i, long len, long ramp) {
    if (2 * ramp > len) ramp = len / 2;
    if (ramp <= 0) return 1.0;
    if (i < ramp) return 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(i) /
                                                static_cast<double>(ramp)));
    if (i >= len - ramp)
        return 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(len - 1 - i) /
                                     static_cast<double>(ramp)));
    return 1.0;
}

std::vector<long> schedule_events(const SynthSpec& spec, Rng& rng) {
    std::vector<long> times;
    if (spec.n_events == 0) return times;

    const long duration_ms = std::llround(spec.duration_s * 1000.0);
    const long usable = duration_ms - kStartMarginMs - kEndMarginMs;
    const double step = static_cast<double>(usable) / spec.n_events;
    if (usable <= 0 || step < static_cast<double>(kMinEventSpacingMs))
        throw ConfigError(std::to_string(spec.n_events) + " events do not fit in " +
                          std::to_string(spec.duration_s) +
                          " s at 6 s minimum spacing plus margins");

    const double jitter_max =
        std::max(0.0, std::min(1500.0, (step - static_cast<double>(kMinEventSpacingMs + 100)) / 2.0));
    for (int k = 0; k < spec.n_events; ++k) {
        const double t = kStartMarginMs + (k + 0.5) * step + rng.uniform(-jitter_max, jitter_max);
        const long frame = std::lround(t / 1000.0 * spec.fps);
        times.push_back(events::ms_of(frame, spec.fps));
    }
    return times;
}

}  // namespace

void SynthSpec::validate() const {
    if (n_channels <= 0) throw ConfigError("n_channels must be positive");
    if (grid_rows <= 0 || grid_cols <= 0 || grid_rows * grid_cols > n_channels)
        throw ConfigError("grid does not fit channel count");
    if (fs <= 0 || fps <= 0 || duration_s <= 0)
        throw ConfigError("fs, fps, and duration must be positive");
    if (n_events < 0) throw ConfigError("n_events must be nonnegative");
    if (snr < 0) throw ConfigError("snr must be nonnegative");
    if (gamma.lead_ms < 0 || beta.lead_ms < 0) throw ConfigError("lead_ms must be nonnegative");
    if (gamma.dur_ms <= 0 || beta.dur_ms <= 0) throw ConfigError("dur_ms must be positive");
    if (beta.factor < 0 || beta.factor > 1)
        throw ConfigError("beta attenuation factor must lie in [0, 1]");
    for (int c : motor_channels)
        if (c < 0 || c >= n_channels)
            throw ConfigError("motor channel " + std::to_string(c) + " out of range");
    for (const auto& [a, b] : conf_dropouts_ms)
        if (a < 0 || b <= a) throw ConfigError("confidence dropout spans must be ordered");
}

std::vector<int> SynthSpec::effective_motor_channels() const {
    if (!motor_channels.empty()) return motor_channels;
    std::vector<int> chans;
    const int r0 = grid_rows / 4, r1 = r0 + std::max(1, grid_rows / 2);
    const int c0 = grid_cols / 4, c1 = c0 + std::max(1, grid_cols / 2);
    for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) chans.push_back(r * grid_cols + c);
    return chans;
}

std::string SynthSpec::effective_session_id() const {
    if (!session_id.empty()) return session_id;
    return "synth-s" + std::to_string(seed) + "-d" + std::to_string(day);
}

PoseWithTruth generate_pose(const SynthSpec& spec) {
    spec.validate();
    Rng sched_rng(Rng::derive(spec.seed, 1));
    const std::vector<long> times = schedule_events(spec, sched_rng);

    const int n_frames = static_cast<int>(std::lround(spec.duration_s * spec.fps));
    events::PoseTrack track = events::PoseTrack::sized(n_frames, spec.fps);

    Rng rng(Rng::derive(spec.seed, 2));
    std::vector<double> angles;
    angles.reserve(times.size());
    for (std::size_t k = 0; k < times.size(); ++k)
        angles.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));

    // per-frame scripted wrist velocity; scripted frames without one hold
    std::vector<double> vx(static_cast<std::size_t>(n_frames), 0.0);
    std::vector<double> vy(static_cast<std::size_t>(n_frames), 0.0);
    std::vector<char> scripted(static_cast<std::size_t>(n_frames), 0);
    for (std::size_t k = 0; k < times.size(); ++k) {
        const long F = events::frame_of(times[k], spec.fps);
        const double ca = std::cos(angles[k]), sa = std::sin(angles[k]);
        const long burst0 = F + kBurstStartOffset;
        for (long f = F - kDriftFrames; f <= burst0 + kBurstFrames - 1 + kHoldFrames; ++f) {
            if (f < 0 || f >= n_frames) continue;
            scripted[static_cast<std::size_t>(f)] = 1;
            if (f < F) {
                vx[static_cast<std::size_t>(f)] = kDriftPxPerFrame * ca;
                vy[static_cast<std::size_t>(f)] = kDriftPxPerFrame * sa;
            } else if (f >= burst0 && f < burst0 + kBurstFrames) {
                vx[static_cast<std::size_t>(f)] = kBurstPxPerFrame * ca;
                vy[static_cast<std::size_t>(f)] = kBurstPxPerFrame * sa;
            }
        }
    }

    double ox = 0.0, oy = 0.0;
    std::vector<double> wrist_x(static_cast<std::size_t>(n_frames));
    std::vector<double> wrist_y(static_cast<std::size_t>(n_frames));
    for (int f = 0; f < n_frames; ++f) {
        const std::size_t fi = static_cast<std::size_t>(f);
        if (vx[fi] != 0.0 || vy[fi] != 0.0) {
            ox += vx[fi];
            oy += vy[fi];
        } else if (!scripted[fi]) {
            const double dist = std::hypot(ox, oy);
            if (dist <= kReturnPxPerFrame) {
                ox = 0.0;
                oy = 0.0;
            } else {
                ox -= kReturnPxPerFrame * ox / dist;
                oy -= kReturnPxPerFrame * oy / dist;
            }
        }
        wrist_x[fi] = kAnchorX[events::kRWrist] + ox;
        wrist_y[fi] = kAnchorY[events::kRWrist] + oy;
    }

    for (int f = 0; f < n_frames; ++f) {
        for (int j = 0; j < events::kNumJoints; ++j) {
            const double bx = j == events::kRWrist ? wrist_x[static_cast<std::size_t>(f)]
                                                   : kAnchorX[j];
            const double by = j == events::kRWrist ? wrist_y[static_cast<std::size_t>(f)]
                                                   : kAnchorY[j];
            track.x[track.idx(f, j)] = bx + kJitterPx * rng.gaussian();
            track.y[track.idx(f, j)] = by + kJitterPx * rng.gaussian();
        }
    }

    for (const auto& [a, b] : spec.conf_dropouts_ms) {
        const long f0 = std::max(0L, events::frame_of(a, spec.fps));
        const long f1 = std::min<long>(n_frames, events::frame_of(b, spec.fps));
        for (long f = f0; f < f1; ++f)
            for (int j = 0; j < events::kNumJoints; ++j)
                track.conf[track.idx(static_cast<int>(f), j)] = 0.1;
    }

    PoseWithTruth out;
    out.track = std::move(track);
    for (long t : times) {
        events::MovementEvent e;
        e.t_ms = t;
        e.kind = events::MovementEvent::Kind::initiation;
        e.joint = events::kRWrist;
        out.truth.push_back(e);
    }
    return out;
}

dsp::EcogRecording generate_ecog(const SynthSpec& spec, const std::vector<long>& event_times_ms) {
    spec.validate();
    const long T = std::lround(spec.duration_s * spec.fs);
    const long duration_ms = std::llround(spec.duration_s * 1000.0);
    for (long t : event_times_ms)
        if (t < 0 || t >= duration_ms)
            throw std::invalid_argument("event at " + std::to_string(t) +
                                        " ms outside the recording");

    const std::vector<int> motor_list = spec.effective_motor_channels();
    const std::set<int> motor(motor_list.begin(), motor_list.end());

    dsp::EcogRecording rec;
    rec.sample_rate_hz = spec.fs;
    rec.samples = nn::Tensor::zeros({spec.n_channels, static_cast<int>(T)});
    session::SessionManifest layout;
    layout.session_id = spec.effective_session_id();
    layout.n_channels = spec.n_channels;
    layout.grid_rows = spec.grid_rows;
    layout.grid_cols = spec.grid_cols;
    rec.channel_meta = session::channel_layout(layout);

    const std::uint64_t ecog_seed = Rng::derive(spec.seed, 3);
    const std::vector<dsp::Biquad> beta_sos =
        dsp::butter_bandpass_sos(spec.beta.band_lo_hz, spec.beta.band_hi_hz, spec.fs);
    const double att_eff = std::max(0.0, 1.0 - spec.snr * (1.0 - spec.beta.factor));

    for (int c = 0; c < spec.n_channels; ++c) {
        Rng rng(Rng::derive(ecog_seed, static_cast<std::uint64_t>(c)));
        PinkNoise pn;
        for (int burn = 0; burn < 1000; ++burn) pn.next(rng);
        double* x = rec.channel(c);
        for (long t = 0; t < T; ++t) x[t] = kBackgroundScale * pn.next(rng);

        if (motor.count(c) != 0 && spec.snr > 0.0 && !event_times_ms.empty()) {
            std::vector<double> beta_comp;
            if (att_eff < 1.0)
                beta_comp = dsp::sosfiltfilt(beta_sos, std::vector<double>(x, x + T));

            const long ramp = std::lround(kEnvelopeRampMs * spec.fs / 1000.0);
            for (long t_e : event_times_ms) {
                const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
                const long g0 = std::lround((t_e - spec.gamma.lead_ms) * spec.fs / 1000.0);
                const long g_len = std::lround(spec.gamma.dur_ms * spec.fs / 1000.0);
                const double amp = spec.snr * spec.gamma.amplitude;
                for (long i = 0; i < g_len; ++i) {
                    const long t = g0 + i;
                    if (t < 0 || t >= T) continue;
                    x[t] += amp * envelope(i, g_len, ramp) *
                            std::sin(2.0 * std::numbers::pi * kGammaToneHz * t / spec.fs + phase);
                }
                if (att_eff < 1.0) {
                    const long b0 = std::lround((t_e - spec.beta.lead_ms) * spec.fs / 1000.0);
                    const long b_len = std::lround(spec.beta.dur_ms * spec.fs / 1000.0);
                    for (long i = 0; i < b_len; ++i) {
                        const long t = b0 + i;
                        if (t < 0 || t >= T) continue;
                        x[t] -= (1.0 - att_eff) * envelope(i, b_len, ramp) * beta_comp[t];
                    }
                }
            }
        }

        for (long t = 0; t < T; ++t) x[t] = static_cast<double>(static_cast<float>(x[t]));
    }
    return rec;
}

session::Session generate_session(const SynthSpec& spec) {
    spec.validate();
    PoseWithTruth pose = generate_pose(spec);
    std::vector<long> times;
    times.reserve(pose.truth.size());
    for (const auto& e : pose.truth) times.push_back(e.t_ms);

    session::Session s;
    s.manifest.session_id = spec.effective_session_id();
    s.manifest.fs = spec.fs;
    s.manifest.fps = spec.fps;
    s.manifest.n_channels = spec.n_channels;
    s.manifest.grid_rows = spec.grid_rows;
    s.manifest.grid_cols = spec.grid_cols;
    s.manifest.alignment_frame = 0;
    s.manifest.day = spec.day;
    s.ecog = generate_ecog(spec, times);
    s.pose = std::move(pose.track);
    s.truth = std::move(pose.truth);
    return s;
}

nn::Tensor render_frame(const events::PoseTrack& track, long frame, int size) {
    if (frame < 0 || frame >= track.n_frames)
        throw std::out_of_range("frame " + std::to_string(frame) + " outside track of " +
                                std::to_string(track.n_frames));
    if (size <= 0) throw std::invalid_argument("frame size must be positive");

    nn::Tensor img = nn::Tensor::zeros({size, size});
    const double half = size / 2.0;
    for (int j = 0; j < events::kNumJoints; ++j) {
        const std::size_t i = track.idx(static_cast<int>(frame), j);
        const double cx = (track.x[i] - kViewCenterX) * kViewScale + half;
        const double cy = (track.y[i] - kViewCenterY) * kViewScale + half;
        const double conf = track.conf[i];
        const int px0 = std::max(0, static_cast<int>(std::floor(cx - 3.0)));
        const int px1 = std::min(size - 1, static_cast<int>(std::ceil(cx + 3.0)));
        const int py0 = std::max(0, static_cast<int>(std::floor(cy - 3.0)));
        const int py1 = std::min(size - 1, static_cast<int>(std::ceil(cy + 3.0)));
        for (int py = py0; py <= py1; ++py) {
            for (int px = px0; px <= px1; ++px) {
                const double dx = px - cx, dy = py - cy;
                img.v[static_cast<std::size_t>(py) * size + px] +=
                    conf * std::exp(-0.5 * (dx * dx + dy * dy));
            }
        }
    }
    return img;
}

}  // namespace movedec::synth
