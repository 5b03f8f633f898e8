#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "movedec/analysis.hpp"
#include "movedec/dataset.hpp"
#include "movedec/models.hpp"
#include "movedec/synth.hpp"

namespace movedec::cli {

// Raised when every training run of a command loses its loss to NaN.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SessionRef {
    std::string id;
    int day = 0;
    std::string path;  // empty -> <out>/sessions/<id>
};

struct DatasetParams {
    std::vector<int> train_days;  // empty -> every session day except the last
    int test_day = -1;            // -1 -> the highest session day
    dataset::BuildConfig build;   // condition is filled in per run
};

struct EventParams {
    int joint = events::kRWrist;
    std::string manual;  // optional manual-events file for the agreement report
};

struct VizParams {
    std::string layer = "ecog_conv1";
    std::vector<int> units{0};
    int steps = 256;
    double step_size = 0.5;
    double norm_bound = 0.0;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::filesystem::path out = "out";
    std::vector<SessionRef> sessions;
    std::vector<std::string> variants;
    std::vector<std::string> conditions;
    synth::SynthSpec synth;  // id, day, and seed are overridden per session
    models::TrainConfig train;
    models::SvmConfig svm;
    DatasetParams dataset;
    EventParams events;
    VizParams viz;

    void validate() const;
    std::filesystem::path session_dir(const SessionRef& s) const;
};

// Parses and schema-validates the config JSON; unknown keys are errors.
// "seed" must be present in the file unless seed_override is given.
ExperimentConfig load_config(const std::filesystem::path& file,
                             std::optional<std::uint64_t> seed_override = {},
                             std::optional<std::string> out_override = {});

// FNV-1a over the canonical dump of every semantic field (output directory
// excluded), as a 16-digit hex string.
std::string config_hash(const ExperimentConfig& cfg);
// Same, restricted to the fields that determine dataset content: seed,
// sessions, synth, and dataset blocks.
std::string dataset_id(const ExperimentConfig& cfg);

std::uint64_t fnv1a64(const std::string& s);

struct CheckpointMeta {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string dataset_id;
    std::string variant;
    std::string condition;
};

// model.json (architecture, geometry, parameter manifest, meta) plus
// weights.bin (parameter values as little-endian f64 in manifest order)
void save_checkpoint(models::Model& m, const std::filesystem::path& dir,
                     const CheckpointMeta& meta);
models::Model load_checkpoint(const std::filesystem::path& dir, CheckpointMeta* meta = nullptr);

void save_svm_checkpoint(const models::SvmModel& m, const std::filesystem::path& dir,
                         const CheckpointMeta& meta);
models::SvmModel load_svm_checkpoint(const std::filesystem::path& dir,
                                     CheckpointMeta* meta = nullptr);

struct CliOptions {
    std::string command;
    std::filesystem::path config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> variant;
    std::optional<std::string> condition;
    int jobs = 1;
};

// Dispatches one subcommand and maps errors to the exit-code taxonomy:
// 0 ok, 2 config error, 3 data error, 4 numeric divergence, 1 anything else.
int run(const CliOptions& opt, std::ostream& log);

// The subcommand bodies; these throw instead of returning codes.
void cmd_synth(const ExperimentConfig& cfg, std::ostream& log);
void cmd_events(const ExperimentConfig& cfg, std::ostream& log);
void cmd_dataset(const ExperimentConfig& cfg, const std::vector<std::string>& conditions,
                 std::ostream& log);
void cmd_train(const ExperimentConfig& cfg, const std::vector<std::string>& variants,
               const std::vector<std::string>& conditions, std::ostream& log);
void cmd_evaluate(const ExperimentConfig& cfg, const std::vector<std::string>& variants,
                  const std::vector<std::string>& conditions, std::ostream& log);
void cmd_ablate(const ExperimentConfig& cfg, const std::vector<std::string>& variants,
                const std::vector<std::string>& conditions, std::ostream& log);
void cmd_viz(const ExperimentConfig& cfg, const std::vector<std::string>& variants,
             const std::vector<std::string>& conditions, std::ostream& log);
void cmd_report(const ExperimentConfig& cfg, std::ostream& log);

// Loads the cached train/test pair for one condition, building sessions'
// datasets and the cache file on a miss.
std::pair<dataset::Dataset, dataset::Dataset> ensure_dataset(const ExperimentConfig& cfg,
                                                             const std::string& condition,
                                                             std::ostream& log);

// smooth -> initiation + rest detection -> confidence gate, sorted by time
std::vector<events::MovementEvent> detect_events(const events::PoseTrack& pose, int joint);

}  // namespace movedec::cli
