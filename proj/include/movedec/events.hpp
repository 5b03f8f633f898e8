#pragma once

#include <array>
#include <string>
#include <vector>

namespace movedec::events {

constexpr int kNumJoints = 7;
extern const std::array<const char*, kNumJoints> kJointNames;
constexpr int kHead = 0, kLShoulder = 1, kRShoulder = 2, kLElbow = 3, kRElbow = 4, kLWrist = 5,
              kRWrist = 6;

// Upper-body pose over time: per frame and joint, pixel position plus
// tracker confidence in [0, 1].
struct PoseTrack {
    int n_frames = 0;
    double frame_rate_hz = 30.0;
    std::vector<double> x, y, conf;  // each n_frames * kNumJoints, frame-major

    static PoseTrack sized(int frames, double fps = 30.0);

    std::size_t idx(int f, int j) const {
        return static_cast<std::size_t>(f) * kNumJoints + static_cast<std::size_t>(j);
    }
    void validate() const;
};

struct MovementEvent {
    enum class Kind { initiation, rest };
    enum class Source { automatic, manual };

    long t_ms = 0;
    Kind kind = Kind::initiation;
    int joint = -1;
    Source source = Source::automatic;
};

// Window placement relative to the event: detection straddles it, the two
// prediction conditions end 300 ms and 800 ms before it.
struct TimingCondition {
    std::string name;
    long window_start_ms = 0;
    long window_end_ms = 0;

    long length_ms() const { return window_end_ms - window_start_ms; }

    static TimingCondition det() { return {"det", -500, 500}; }
    static TimingCondition pred() { return {"pred", -1300, -300}; }
    static TimingCondition pred_b() { return {"pred_b", -1800, -800}; }
    // accepts det | pred | pred-b | pred_b
    static TimingCondition by_name(const std::string& name);
};

constexpr double kMoveThresholdPx = 1.0;
constexpr double kQuietThresholdPx = 0.5;
constexpr long kRefractoryMs = 1000;
constexpr double kConfidenceThreshold = 0.25;

long frame_of(long t_ms, double fps);
long ms_of(long frame, double fps);

// Savitzky-Golay(21, 3) on every joint's x and y; confidence untouched.
PoseTrack smooth_pose(const PoseTrack& track);

// d[f] = Euclidean distance between the joint's positions at frames f and
// f-1; d[0] = 0. Expects an already smoothed track.
std::vector<double> wrist_displacement(const PoseTrack& track, int joint);

// frame f fires iff mean(d[f..f+4]) > 1 px AND mean(d[f-10..f-1]) < 0.5 px;
// 1 s refractory keeps the earliest event of each cluster
std::vector<MovementEvent> detect_initiations(const PoseTrack& track, int joint);

// frame f fires iff EVERY joint moved < 0.5 px on average over both
// [f-30, f-1] and [f, f+29]; same refractory
std::vector<MovementEvent> detect_rest(const PoseTrack& track);

// drops events whose defining window ([f-10, f+4] of the event joint for
// initiations, [f-30, f+29] of all joints for rest) touches a frame with
// confidence <= threshold
std::vector<MovementEvent> apply_confidence_gate(const PoseTrack& track,
                                                 const std::vector<MovementEvent>& events,
                                                 double threshold = kConfidenceThreshold);

// frame showing the middle of chunk i of a window: round-half-up of
// (window_start_ms + 200 i + 100) / 1000 * fps, plus the session alignment
long chunk_to_frame(long window_start_ms, int chunk_index, double fps, long alignment_frame,
                    long n_frames);

}  // namespace movedec::events
