#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "movedec/dataset.hpp"
#include "movedec/models.hpp"
#include "movedec/tensor.hpp"

namespace movedec::analysis {

// Accuracy after one channel is flatlined to its recording mean in every
// test sample, with the stored stats updated the way the normal pipeline
// produces them. The model itself is never touched.
double ablate_electrode(models::Model& m, const dataset::Dataset& test_set, int electrode);

struct AblationEntry {
    int electrode = 0;
    int row = -1;  // -1 for strip channels outside the grid
    int col = -1;
    double ablated_accuracy = 0.0;
    double delta = 0.0;  // original accuracy - ablated accuracy
};

struct AblationMap {
    double original_accuracy = 0.0;
    double worst_case_delta = 0.0;  // max delta over entries
    std::vector<AblationEntry> entries;
};

AblationMap ablation_map(models::Model& m, const dataset::Dataset& test_set);

// Every channel substituted at once.
double ablate_all(models::Model& m, const dataset::Dataset& test_set);

// electrode_id,row,col,original_acc,ablated_acc,delta
std::string ablation_csv(const AblationMap& map);

struct VizConfig {
    int steps = 256;
    double step_size = 0.5;
    double norm_bound = 0.0;  // 0 -> sqrt(input element count)
    std::uint64_t seed = 1;
};

struct VizResult {
    std::string layer;
    int unit = 0;
    nn::Tensor input;           // tower-input tensor that maximizes the unit
    std::vector<double> trace;  // activation at the start and after each accepted step
    bool dead = false;          // the first gradient was exactly zero
};

// Projected gradient ascent on the tower input (weights frozen) maximizing
// the mean post-ReLU activation of one conv unit; steps that lower the
// activation are retried at half the step size, so the trace never
// decreases and the input stays inside the L2 norm bound. layer names the
// conv layer as in the parameter manifest ("ecog_conv1", "video_conv2", ...).
VizResult visualize_unit(models::Model& m, const std::string& layer, int unit,
                         const VizConfig& cfg = {});

// viz_<layer>_<unit>.f32 (input as little-endian f32) plus a JSON sidecar
// with the shape, trace, and dead flag
void save_viz(const VizResult& v, const std::filesystem::path& dir);

struct MetricsRecord {
    std::string variant;
    std::string condition;
    std::string dataset_id;
    std::string config_hash;
    std::uint64_t seed = 0;
    double train_acc = 0.0;
    double valid_acc = 0.0;
    double test_acc = 0.0;
    int epochs_ran = 0;
    int run_index_selected = 0;
};

void write_metrics(const MetricsRecord& r, const std::filesystem::path& file);
MetricsRecord read_metrics(const std::filesystem::path& file);

struct Report {
    std::string csv;
    std::string text;
};

// Condition-by-variant test-accuracy grid with a final per-variant average
// row. Cells with several records (seeds) hold their mean; every record
// must come from the same dataset identity.
Report make_report(const std::vector<MetricsRecord>& results);

}  // namespace movedec::analysis
