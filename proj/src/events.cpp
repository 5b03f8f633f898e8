#include "movedec/events.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "movedec/dsp.hpp"
#include "movedec/error.hpp"

namespace movedec::events {

const std::array<const char*, kNumJoints> kJointNames = {
    "head", "l_shoulder", "r_shoulder", "l_elbow", "r_elbow", "l_wrist", "r_wrist"};

PoseTrack PoseTrack::sized(int frames, double fps) {
    PoseTrack t;
    t.n_frames = frames;
    t.frame_rate_hz = fps;
    const std::size_t n = static_cast<std::size_t>(frames) * kNumJoints;
    t.x.assign(n, 0.0);
    t.y.assign(n, 0.0);
    t.conf.assign(n, 1.0);
    return t;
}

void PoseTrack::validate() const {
    const std::size_t n = static_cast<std::size_t>(n_frames) * kNumJoints;
    if (x.size() != n || y.size() != n || conf.size() != n)
        throw ShapeError("pose track arrays do not match frame count");
    if (frame_rate_hz <= 0.0) throw std::invalid_argument("frame rate must be positive");
    for (double c : conf)
        if (c < 0.0 || c > 1.0)
            throw std::invalid_argument("confidence values must lie in [0, 1]");
}

TimingCondition TimingCondition::by_name(const std::string& name) {
    if (name == "det") return det();
    if (name == "pred") return pred();
    if (name == "pred_b" || name == "pred-b") return pred_b();
    throw std::invalid_argument("unknown timing condition '" + name +
                                "' (expected det, pred, or pred-b)");
}

long frame_of(long t_ms, double fps) {
    return std::lround(static_cast<double>(t_ms) / 1000.0 * fps);
}

long ms_of(long frame, double fps) {
    return std::lround(static_cast<double>(frame) / fps * 1000.0);
}

PoseTrack smooth_pose(const PoseTrack& track) {
    track.validate();
    if (track.n_frames < 21)
        throw std::invalid_argument("pose track of " + std::to_string(track.n_frames) +
                                    " frames is too short to smooth (needs 21)");
    PoseTrack out = track;
    for (int j = 0; j < kNumJoints; ++j) {
        std::vector<double> sx(static_cast<std::size_t>(track.n_frames));
        std::vector<double> sy(static_cast<std::size_t>(track.n_frames));
        for (int f = 0; f < track.n_frames; ++f) {
            sx[static_cast<std::size_t>(f)] = track.x[track.idx(f, j)];
            sy[static_cast<std::size_t>(f)] = track.y[track.idx(f, j)];
        }
        sx = dsp::savgol(sx);
        sy = dsp::savgol(sy);
        for (int f = 0; f < track.n_frames; ++f) {
            out.x[out.idx(f, j)] = sx[static_cast<std::size_t>(f)];
            out.y[out.idx(f, j)] = sy[static_cast<std::size_t>(f)];
        }
    }
    return out;
}

std::vector<double> wrist_displacement(const PoseTrack& track, int joint) {
    if (joint < 0 || joint >= kNumJoints)
        throw std::invalid_argument("joint id " + std::to_string(joint) + " out of range");
    std::vector<double> d(static_cast<std::size_t>(track.n_frames), 0.0);
    for (int f = 1; f < track.n_frames; ++f) {
        const double dx = track.x[track.idx(f, joint)] - track.x[track.idx(f - 1, joint)];
        const double dy = track.y[track.idx(f, joint)] - track.y[track.idx(f - 1, joint)];
        d[static_cast<std::size_t>(f)] = std::sqrt(dx * dx + dy * dy);
    }
    return d;
}

namespace {

double window_mean(const std::vector<double>& d, long lo, long hi) {
    double acc = 0.0;
    for (long i = lo; i <= hi; ++i) acc += d[static_cast<std::size_t>(i)];
    return acc / static_cast<double>(hi - lo + 1);
}

std::vector<MovementEvent> apply_refractory(std::vector<MovementEvent> events) {
    std::vector<MovementEvent> kept;
    for (const MovementEvent& e : events)
        if (kept.empty() || e.t_ms >= kept.back().t_ms + kRefractoryMs) kept.push_back(e);
    return kept;
}

}  // namespace

std::vector<MovementEvent> detect_initiations(const PoseTrack& track, int joint) {
    const std::vector<double> d = wrist_displacement(track, joint);
    std::vector<MovementEvent> events;
    for (long f = 10; f + 4 < track.n_frames; ++f) {
        if (window_mean(d, f, f + 4) <= kMoveThresholdPx) continue;
        if (window_mean(d, f - 10, f - 1) >= kQuietThresholdPx) continue;
        MovementEvent e;
        e.t_ms = ms_of(f, track.frame_rate_hz);
        e.kind = MovementEvent::Kind::initiation;
        e.joint = joint;
        events.push_back(e);
    }
    return apply_refractory(std::move(events));
}

std::vector<MovementEvent> detect_rest(const PoseTrack& track) {
    std::vector<std::vector<double>> d(kNumJoints);
    for (int j = 0; j < kNumJoints; ++j) d[static_cast<std::size_t>(j)] = wrist_displacement(track, j);

    std::vector<MovementEvent> events;
    for (long f = 30; f + 29 < track.n_frames; ++f) {
        bool still = true;
        for (int j = 0; still && j < kNumJoints; ++j) {
            const std::vector<double>& dj = d[static_cast<std::size_t>(j)];
            still = window_mean(dj, f - 30, f - 1) < kQuietThresholdPx &&
                    window_mean(dj, f, f + 29) < kQuietThresholdPx;
        }
        if (!still) continue;
        MovementEvent e;
        e.t_ms = ms_of(f, track.frame_rate_hz);
        e.kind = MovementEvent::Kind::rest;
        events.push_back(e);
    }
    return apply_refractory(std::move(events));
}

std::vector<MovementEvent> apply_confidence_gate(const PoseTrack& track,
                                                 const std::vector<MovementEvent>& events,
                                                 double threshold) {
    std::vector<MovementEvent> kept;
    for (const MovementEvent& e : events) {
        const long f = frame_of(e.t_ms, track.frame_rate_hz);
        const bool initiation = e.kind == MovementEvent::Kind::initiation;
        const long lo = std::max(0L, f - (initiation ? 10 : 30));
        const long hi = std::min<long>(track.n_frames - 1, f + (initiation ? 4 : 29));
        bool ok = true;
        for (long g = lo; ok && g <= hi; ++g) {
            if (initiation) {
                ok = track.conf[track.idx(static_cast<int>(g), e.joint)] > threshold;
            } else {
                for (int j = 0; ok && j < kNumJoints; ++j)
                    ok = track.conf[track.idx(static_cast<int>(g), j)] > threshold;
            }
        }
        if (ok) kept.push_back(e);
    }
    return kept;
}

long chunk_to_frame(long window_start_ms, int chunk_index, double fps, long alignment_frame,
                    long n_frames) {
    if (chunk_index < 0 || chunk_index > 4)
        throw std::invalid_argument("chunk index must be 0..4");
    const long mid_ms = window_start_ms + 200L * chunk_index + 100L;
    const long frame =
        static_cast<long>(std::floor(static_cast<double>(mid_ms) / 1000.0 * fps + 0.5)) +
        alignment_frame;
    if (frame < 0 || frame >= n_frames)
        throw std::out_of_range("chunk midpoint at " + std::to_string(mid_ms) +
                                " ms maps to frame " + std::to_string(frame) +
                                " outside the video of " + std::to_string(n_frames) + " frames");
    return frame;
}

}  // namespace movedec::events
