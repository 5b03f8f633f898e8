#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "movedec/dsp.hpp"
#include "movedec/events.hpp"
#include "movedec/session.hpp"

namespace movedec::synth {

// Movement-locked spectral signature: a high-gamma amplitude burst plus a
// beta-band attenuation, both starting lead_ms before the event and lasting
// dur_ms, scaled by the session snr.
struct BurstSpec {
    double band_lo_hz = 70.0;
    double band_hi_hz = 100.0;
    double amplitude = 3.0;  // tone amplitude at snr = 1, background units
    long lead_ms = 1500;
    long dur_ms = 2000;
};

struct DropSpec {
    double band_lo_hz = 10.0;
    double band_hi_hz = 30.0;
    double factor = 0.4;  // fraction of band content left at snr = 1
    long lead_ms = 1500;
    long dur_ms = 2000;
};

struct SynthSpec {
    int n_channels = 64;
    int grid_rows = 8;
    int grid_cols = 8;
    double fs = 1000.0;
    double fps = 30.0;
    double duration_s = 600.0;
    int n_events = 40;
    std::vector<int> motor_channels;  // empty -> central grid block
    BurstSpec gamma;
    DropSpec beta;
    double snr = 2.0;
    std::uint64_t seed = 1;
    int day = 0;
    std::string session_id;  // empty -> synth-s<seed>-d<day>
    // [start_ms, end_ms) spans where tracker confidence drops to 0.1
    std::vector<std::pair<long, long>> conf_dropouts_ms;

    void validate() const;
    std::vector<int> effective_motor_channels() const;
    std::string effective_session_id() const;
};

struct PoseWithTruth {
    events::PoseTrack track;
    std::vector<events::MovementEvent> truth;
};

// Wrist trajectory: quiescent jitter, a slow pre-movement drift, then a ramp
// fast enough that the smoothed-track detection rule fires at the scheduled
// frame; other joints stay quiescent.
PoseWithTruth generate_pose(const SynthSpec& spec);

// 1/f background per channel; motor channels additionally carry the
// event-locked gamma burst and beta attenuation. snr = 0 leaves pure
// background on every channel.
dsp::EcogRecording generate_ecog(const SynthSpec& spec, const std::vector<long>& event_times_ms);

session::Session generate_session(const SynthSpec& spec);

// Skeleton rendered as confidence-weighted gaussian dots on a blank image.
nn::Tensor render_frame(const events::PoseTrack& track, long frame, int size = 32);

}  // namespace movedec::synth
