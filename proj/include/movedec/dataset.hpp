#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "movedec/dsp.hpp"
#include "movedec/events.hpp"
#include "movedec/session.hpp"
#include "movedec/tensor.hpp"

namespace movedec::dataset {

// One event-aligned training example. The bandpassed window is stored raw
// with its augmentation margins and per-channel neighborhood stats so the
// trainer can re-extract shifted windows; normalized chunks are derived on
// demand.
struct LabeledSample {
    std::vector<float> extended;  // [channels, window + 2*margin], bandpassed
    std::vector<double> mu;       // per channel, 3 s neighborhood before the event
    std::vector<double> sigma;
    std::vector<float> frames;  // [5, frame_size, frame_size]
    int label = 0;              // 1 initiation, 0 rest
    int day = 0;
    long t_ms = 0;
    std::string session_id;
};

struct Dataset {
    int n_channels = 0;
    int window_samples = 1000;
    int margin_samples = 100;
    int frame_size = 32;
    int grid_rows = 0;
    int grid_cols = 0;
    std::string condition = "det";
    std::vector<LabeledSample> samples;
    // per session, mean of each bandpassed channel over the full recording
    // (the ablation substitution constant)
    std::map<std::string, std::vector<double>> channel_means;

    nn::Tensor extended_tensor(const LabeledSample& s) const;
    nn::Tensor frames_tensor(const LabeledSample& s) const;  // [5, size, size]
    void validate() const;
};

struct BuildConfig {
    events::TimingCondition condition = events::TimingCondition::det();
    double bandpass_low_hz = 10.0;
    double bandpass_high_hz = 200.0;
    int margin_ms = 100;
    int frame_size = 32;
    // neighborhood = [t - lead - len, t - lead), clear of the event
    long neighborhood_lead_ms = 1800;
    long neighborhood_len_ms = 3000;
    // rest events this close to an initiation are dropped so rest windows,
    // margins, and neighborhoods never touch movement
    long rest_gap_after_ms = 5500;   // initiation before the rest
    long rest_gap_before_ms = 2500;  // initiation after the rest
    std::ostream* warnings = nullptr;
};

// Extract one labeled sample per surviving event; out-of-bounds windows,
// neighborhoods, or frames skip the event with a warning.
Dataset build_dataset(const session::Session& s, const std::vector<events::MovementEvent>& evs,
                      const BuildConfig& cfg = {});

// Merge per-session datasets built with identical geometry.
void append(Dataset& dst, const Dataset& src);

// Day partition followed by seeded majority downsampling within each split.
std::pair<Dataset, Dataset> split_and_balance(const Dataset& all, const std::set<int>& train_days,
                                              int test_day, std::uint64_t seed);

// Five normalized [channels, 200] chunks. With aug set, applies the
// training-time shift/noise augmentation; without, the center window.
std::vector<nn::Tensor> sample_chunks(const Dataset& ds, const LabeledSample& s,
                                      std::uint64_t aug_seed = 0,
                                      const dsp::AugmentConfig* aug = nullptr);

// Replace one channel with its per-session recording mean in every sample,
// updating the stored stats as the pipeline would (constant channel: mu =
// mean, sigma = 0, so the normalized channel becomes exactly zero).
void ablate_channel(Dataset& ds, int channel);

void save_dataset(const Dataset& ds, const std::filesystem::path& file);
Dataset load_dataset(const std::filesystem::path& file);

}  // namespace movedec::dataset
