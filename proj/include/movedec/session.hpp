#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "movedec/dsp.hpp"
#include "movedec/events.hpp"

namespace movedec::session {

// Session directory layout:
//   manifest.json  recording geometry and alignment
//   ecog.f32       little-endian 32-bit reals, time-major (one record = one
//                  sample across all channels in channel-id order)
//   pose.csv       frame,<joint>_x,<joint>_y,<joint>_c for all 7 joints
//   truth.jsonl    scheduled events (generator output), events.jsonl schema
//                  plus "scheduled": true
//   events.jsonl   detected events, written by the events pipeline
struct SessionManifest {
    std::string session_id;
    double fs = 1000.0;
    double fps = 30.0;
    int n_channels = 64;
    int grid_rows = 8;
    int grid_cols = 8;
    long alignment_frame = 0;
    int day = 0;
    int format_version = 1;

    void validate() const;
};

struct Session {
    SessionManifest manifest;
    dsp::EcogRecording ecog;  // raw, unfiltered, as stored on disk
    events::PoseTrack pose;
    std::vector<events::MovementEvent> truth;
};

// Grid channels first in row-major order; any channels beyond
// grid_rows * grid_cols become strip electrodes.
std::vector<dsp::ChannelMeta> channel_layout(const SessionManifest& m);

void write_session(const Session& s, const std::filesystem::path& dir);
Session load_session(const std::filesystem::path& dir);

void write_events_jsonl(const std::filesystem::path& file,
                        const std::vector<events::MovementEvent>& evs, bool scheduled = false);
// Lines without a "t_ms" key (file metadata headers) are skipped.
std::vector<events::MovementEvent> load_events_jsonl(const std::filesystem::path& file);

void write_pose_csv(const std::filesystem::path& file, const events::PoseTrack& track);
events::PoseTrack load_pose_csv(const std::filesystem::path& file, double fps);

// time-major f32 on disk <-> channel-major f64 tensor in memory
void write_ecog_f32(const std::filesystem::path& file, const nn::Tensor& samples);
nn::Tensor load_ecog_f32(const std::filesystem::path& file, int n_channels);

std::string joint_name_of(int joint);   // -1 -> ""
int joint_id_of(const std::string& name);  // "" -> -1

}  // namespace movedec::session
