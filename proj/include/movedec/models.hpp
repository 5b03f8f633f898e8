#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "movedec/dataset.hpp"
#include "movedec/dsp.hpp"
#include "movedec/layers.hpp"
#include "movedec/optim.hpp"
#include "movedec/tape.hpp"

namespace movedec::models {

enum class Variant {
    late_fusion,
    early_fusion,
    naive_average,
    ecog_only,
    video_only,
    lstm_only,
    conv3d_nolstm,
    conv1d_nolstm,
    svm_spectral,
};

std::string variant_name(Variant v);
Variant variant_by_name(const std::string& name);

// One tower layer: filter count plus the kernel extent along the axis that
// varies per layer (time for 1D/3D towers, square side for 2D).
struct TowerLayer {
    int filters = 0;
    int kernel = 3;
};

struct ModelConfig {
    Variant variant = Variant::late_fusion;
    std::vector<TowerLayer> ecog_tower{{32, 7}, {32, 5}, {64, 3}};
    std::vector<TowerLayer> video_tower{{8, 3}, {16, 3}, {32, 3}, {32, 3}};
    int lstm_units = 20;
    int fc_merge = 64;
    double dropout = 0.5;
    int frame_size = 32;
    std::uint64_t seed = 1;

    void validate() const;
    bool uses_video() const;
    bool uses_ecog() const;
    bool uses_lstm() const;
    bool uses_fc_merge() const;
};

// Input geometry a model is built against, taken from the dataset it will
// consume.
struct DataGeometry {
    int n_channels = 0;
    int chunk_samples = 200;
    int n_chunks = 5;
    int frame_size = 32;
    int grid_rows = 0;
    int grid_cols = 0;

    static DataGeometry of(const dataset::Dataset& ds);
};

struct Model {
    ModelConfig config;
    DataGeometry geometry;
    std::vector<nn::LayerParams> ecog_tower;
    std::vector<nn::LayerParams> video_tower;
    nn::LayerParams fc_merge;
    nn::LayerParams lstm;
    nn::LayerParams fc_out;

    std::vector<nn::Param*> params();
    std::vector<std::pair<std::string, nn::Param*>> named_params();
    long param_count() const;
};

// Initializes every layer the variant needs with seeds derived from
// config.seed; same config and geometry give bit-identical weights.
// naive_average and svm_spectral have no network to build and raise
// ConfigError; conv3d_nolstm requires the channels to form one full 8x8
// grid.
Model build_model(const ModelConfig& cfg, const DataGeometry& geom);

// One forward batch: per-timestep ECoG chunks and frames plus the labels.
struct BatchInput {
    std::vector<nn::Tensor> ecog;    // n_chunks tensors [N, channels, chunk]
    std::vector<nn::Tensor> frames;  // n_chunks tensors [N, 1, size, size]
    nn::Tensor labels;               // [N, 1]
};

BatchInput make_batch(const dataset::Dataset& ds, const std::vector<int>& idx,
                      std::uint64_t aug_seed = 0, const dsp::AugmentConfig* aug = nullptr);

// Builds the variant's graph on g and returns the [N, 1] probability node.
// Parameter nodes are created once and shared across the five timesteps, so
// backward() accumulates their gradients over the whole sequence.
nn::Graph::NodeId forward_graph(nn::Graph& g, Model& m, const BatchInput& in, bool train_mode,
                                std::uint64_t dropout_seed = 0);

// Eval-mode probabilities for every sample, in dataset order.
std::vector<double> predict(Model& m, const dataset::Dataset& ds, int batch_size = 24);

struct EvalResult {
    double accuracy = 0.0;
    std::vector<double> probabilities;
    std::vector<int> predicted;  // 1 move, 0 rest; p = 0.5 exactly -> rest
};

EvalResult evaluate(Model& m, const dataset::Dataset& ds, int batch_size = 24);

double naive_average(double p_ecog, double p_video);

// Averages the two models' sigmoid outputs per sample, then thresholds.
EvalResult evaluate_naive(Model& ecog_model, Model& video_model, const dataset::Dataset& ds,
                          int batch_size = 24);

struct TrainConfig {
    int batch_size = 24;
    int max_epochs = 200;
    int patience = 10;
    int runs = 3;
    double validation_fraction = 0.1;
    nn::OptimizerState optim;
    dsp::AugmentConfig augment;
    bool augment_enabled = true;
    std::uint64_t seed = 1;
    std::ostream* log = nullptr;

    void validate() const;
};

struct RunHistory {
    std::vector<double> train_loss;
    std::vector<double> train_acc;  // over the augmented training batches
    std::vector<double> valid_acc;
    int epochs_ran = 0;
    int best_epoch = -1;
    double best_valid_acc = 0.0;
    bool diverged = false;
};

struct TrainResult {
    std::vector<RunHistory> runs;
    int selected_run = 0;
    double train_acc = 0.0;  // eval-mode accuracy of the restored weights
    double valid_acc = 0.0;
    int epochs_ran = 0;
};

// Runs cfg.runs independent trainings, each from fresh weights seeded by
// cfg.seed and the run index, and leaves the weights of the run with the
// best validation accuracy in m. Each run early-stops after cfg.patience
// epochs without a validation improvement and restores its own best epoch.
// A run whose loss turns non-finite is abandoned and scores 0.
TrainResult train(Model& m, const dataset::Dataset& train_set, const dataset::Dataset& valid_set,
                  const TrainConfig& cfg);

// Stratified per-label carve-out: returns {train remainder, validation}.
std::pair<dataset::Dataset, dataset::Dataset> split_validation(const dataset::Dataset& all,
                                                               double fraction, std::uint64_t seed);

struct SvmConfig {
    std::vector<double> lambda_grid{1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0};
    int iterations = 400;
    double base_lr = 0.5;
    double lr_decay = 0.02;

    void validate() const;
};

struct SvmModel {
    std::vector<double> w;
    double b = 0.0;
    double lambda = 0.0;
    // standardization fitted on the training rows
    std::vector<double> feature_mu;
    std::vector<double> feature_sd;
};

// Band power of the normalized center window, [channel][band] row-major.
std::vector<double> spectral_features(const dataset::Dataset& ds,
                                      const dataset::LabeledSample& s);

// hinge objective lambda * |w|^2 + mean_i max(0, 1 - y_i (w . x_i + b)) with
// y mapped to +-1; rows are used as given
double svm_objective(const std::vector<double>& w, double b, double lambda,
                     const std::vector<std::vector<double>>& x, const std::vector<int>& y);

// Full-batch subgradient descent from w = 0 for each lambda in the grid,
// keeping the lambda with the best validation accuracy (ties keep the
// smaller). Rows of x are raw features; standardization is fitted inside.
SvmModel svm_train(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                   const std::vector<std::vector<double>>& xv, const std::vector<int>& yv,
                   const SvmConfig& cfg = {});

double svm_decision(const SvmModel& m, const std::vector<double>& x);
// 1 move where the decision is positive, 0 rest otherwise (ties -> rest)
int svm_predict(const SvmModel& m, const std::vector<double>& x);

}  // namespace movedec::models
