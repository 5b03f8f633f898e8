#include "movedec/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "movedec/error.hpp"
#include "movedec/rng.hpp"

namespace movedec::models {

namespace {

using NodeId = nn::Graph::NodeId;

constexpr int kEcogDepth = 3;
constexpr int kVideoDepth = 4;

int pooled(int n, int stages) {
    for (int i = 0; i < stages; ++i) n /= 2;
    return n;
}

int ecog_image_channels(const DataGeometry& geom, int frame_size) {
    const int per_image = frame_size * frame_size;
    const int values = geom.n_channels * geom.chunk_samples;
    return (values + per_image - 1) / per_image;
}

int ecog_flat_width(const ModelConfig& cfg, const DataGeometry& geom) {
    const int filters = cfg.ecog_tower.back().filters;
    if (cfg.variant == Variant::conv3d_nolstm)
        return filters * pooled(geom.grid_rows, kEcogDepth) * pooled(geom.grid_cols, kEcogDepth) *
               pooled(geom.chunk_samples, kEcogDepth);
    return filters * pooled(geom.chunk_samples, kEcogDepth);
}

int video_flat_width(const ModelConfig& cfg) {
    const int side = pooled(cfg.frame_size, kVideoDepth);
    return cfg.video_tower.back().filters * side * side;
}

int feature_width(const ModelConfig& cfg, const DataGeometry& geom) {
    switch (cfg.variant) {
        case Variant::late_fusion:
            return ecog_flat_width(cfg, geom) + video_flat_width(cfg);
        case Variant::ecog_only:
            return ecog_flat_width(cfg, geom);
        case Variant::video_only:
        case Variant::early_fusion:
            return video_flat_width(cfg);
        case Variant::lstm_only:
            return geom.n_channels * geom.chunk_samples;
        case Variant::conv1d_nolstm:
        case Variant::conv3d_nolstm:
            return ecog_flat_width(cfg, geom);
        default:
            throw ConfigError(variant_name(cfg.variant) + " has no network feature width");
    }
}

struct ParamNodes {
    std::vector<std::pair<NodeId, NodeId>> ecog, video;
    std::pair<NodeId, NodeId> merge{-1, -1}, lstm{-1, -1}, out{-1, -1};
};

ParamNodes bind_params(nn::Graph& g, Model& m) {
    ParamNodes pn;
    for (auto& l : m.ecog_tower) pn.ecog.emplace_back(g.param(l.weights), g.param(l.biases));
    for (auto& l : m.video_tower) pn.video.emplace_back(g.param(l.weights), g.param(l.biases));
    if (m.fc_merge.weights.value.numel() > 0)
        pn.merge = {g.param(m.fc_merge.weights), g.param(m.fc_merge.biases)};
    if (m.lstm.weights.value.numel() > 0)
        pn.lstm = {g.param(m.lstm.weights), g.param(m.lstm.biases)};
    pn.out = {g.param(m.fc_out.weights), g.param(m.fc_out.biases)};
    return pn;
}

NodeId apply_tower(nn::Graph& g, const std::vector<nn::LayerParams>& layers,
                   const std::vector<std::pair<NodeId, NodeId>>& pn, NodeId x) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const nn::kernels::ConvSpec spec = nn::conv_spec_of(layers[i], g.value(x).shape[1]);
        x = g.maxpool(g.relu(g.conv(x, pn[i].first, pn[i].second, spec)),
                      {spec.rank, 2});
    }
    const nn::Tensor& y = g.value(x);
    return g.reshape(x, {y.shape[0], static_cast<int>(y.numel() / y.shape[0])});
}

void expect_shape(const nn::Tensor& t, const std::vector<int>& shape, const char* what) {
    if (t.shape != shape)
        throw ShapeError(std::string(what) + " has shape " + nn::Tensor::shape_str(t.shape) +
                         ", model expects " + nn::Tensor::shape_str(shape));
}

std::vector<nn::Tensor> snapshot(Model& m) {
    std::vector<nn::Tensor> w;
    for (nn::Param* p : m.params()) w.push_back(p->value);
    return w;
}

void restore(Model& m, const std::vector<nn::Tensor>& w) {
    const auto ps = m.params();
    if (ps.size() != w.size()) throw ShapeError("weight snapshot does not match model layout");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (!ps[i]->value.same_shape(w[i]))
            throw ShapeError("weight snapshot shape drifted from model");
        ps[i]->value = w[i];
    }
}

dataset::Dataset like(const dataset::Dataset& src) {
    dataset::Dataset d = src;
    d.samples.clear();
    return d;
}

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(i) - 1))]);
}

}  // namespace

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::late_fusion: return "late_fusion";
        case Variant::early_fusion: return "early_fusion";
        case Variant::naive_average: return "naive_average";
        case Variant::ecog_only: return "ecog_only";
        case Variant::video_only: return "video_only";
        case Variant::lstm_only: return "lstm_only";
        case Variant::conv3d_nolstm: return "conv3d_nolstm";
        case Variant::conv1d_nolstm: return "conv1d_nolstm";
        case Variant::svm_spectral: return "svm_spectral";
    }
    throw std::invalid_argument("unknown variant value");
}

Variant variant_by_name(const std::string& name) {
    for (Variant v : {Variant::late_fusion, Variant::early_fusion, Variant::naive_average,
                      Variant::ecog_only, Variant::video_only, Variant::lstm_only,
                      Variant::conv3d_nolstm, Variant::conv1d_nolstm, Variant::svm_spectral})
        if (variant_name(v) == name) return v;
    throw ConfigError("unknown model variant \"" + name + "\"");
}

bool ModelConfig::uses_video() const {
    return variant == Variant::late_fusion || variant == Variant::early_fusion ||
           variant == Variant::video_only;
}

bool ModelConfig::uses_ecog() const {
    return variant == Variant::late_fusion || variant == Variant::ecog_only ||
           variant == Variant::conv1d_nolstm || variant == Variant::conv3d_nolstm;
}

bool ModelConfig::uses_lstm() const {
    return variant == Variant::late_fusion || variant == Variant::early_fusion ||
           variant == Variant::ecog_only || variant == Variant::video_only ||
           variant == Variant::lstm_only;
}

bool ModelConfig::uses_fc_merge() const {
    switch (variant) {
        case Variant::late_fusion:
        case Variant::early_fusion:
        case Variant::ecog_only:
        case Variant::video_only:
        case Variant::conv1d_nolstm:
        case Variant::conv3d_nolstm:
            return true;
        default:
            return false;
    }
}

void ModelConfig::validate() const {
    if (uses_ecog() && static_cast<int>(ecog_tower.size()) != kEcogDepth)
        throw ConfigError("the ECoG tower is fixed at " + std::to_string(kEcogDepth) +
                          " layers, got " + std::to_string(ecog_tower.size()));
    if (uses_video() && static_cast<int>(video_tower.size()) != kVideoDepth)
        throw ConfigError("the video tower is fixed at " + std::to_string(kVideoDepth) +
                          " layers, got " + std::to_string(video_tower.size()));
    for (const auto& tower : {ecog_tower, video_tower})
        for (const TowerLayer& l : tower)
            if (l.filters < 1 || l.kernel < 1)
                throw ConfigError("tower layers need at least one filter and a positive kernel");
    if (lstm_units < 1) throw ConfigError("lstm_units must be positive");
    if (uses_fc_merge() && fc_merge < 1) throw ConfigError("fc_merge width must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
    if (uses_video() && pooled(frame_size, kVideoDepth) < 1)
        throw ConfigError("frame size " + std::to_string(frame_size) +
                          " collapses to nothing after " + std::to_string(kVideoDepth) +
                          " pooling stages; need at least 16");
}

DataGeometry DataGeometry::of(const dataset::Dataset& ds) {
    DataGeometry g;
    g.n_channels = ds.n_channels;
    g.n_chunks = 5;
    if (ds.window_samples % g.n_chunks != 0)
        throw ConfigError("window of " + std::to_string(ds.window_samples) +
                          " samples does not split into " + std::to_string(g.n_chunks) +
                          " chunks");
    g.chunk_samples = ds.window_samples / g.n_chunks;
    g.frame_size = ds.frame_size;
    g.grid_rows = ds.grid_rows;
    g.grid_cols = ds.grid_cols;
    return g;
}

std::vector<nn::Param*> Model::params() {
    std::vector<nn::Param*> out;
    for (auto& [name, p] : named_params()) out.push_back(p);
    return out;
}

std::vector<std::pair<std::string, nn::Param*>> Model::named_params() {
    std::vector<std::pair<std::string, nn::Param*>> out;
    auto add = [&out](const std::string& name, nn::LayerParams& l) {
        if (l.weights.value.numel() == 0) return;
        out.emplace_back(name + ".weights", &l.weights);
        out.emplace_back(name + ".biases", &l.biases);
    };
    for (std::size_t i = 0; i < ecog_tower.size(); ++i)
        add("ecog_conv" + std::to_string(i + 1), ecog_tower[i]);
    for (std::size_t i = 0; i < video_tower.size(); ++i)
        add("video_conv" + std::to_string(i + 1), video_tower[i]);
    add("fc_merge", fc_merge);
    add("lstm", lstm);
    add("fc_out", fc_out);
    return out;
}

long Model::param_count() const {
    long n = 0;
    auto add = [&n](const nn::LayerParams& l) {
        n += l.weights.value.numel() + l.biases.value.numel();
    };
    for (const auto& l : ecog_tower) add(l);
    for (const auto& l : video_tower) add(l);
    add(fc_merge);
    add(lstm);
    add(fc_out);
    return n;
}

Model build_model(const ModelConfig& cfg, const DataGeometry& geom) {
    cfg.validate();
    if (cfg.variant == Variant::naive_average)
        throw ConfigError(
            "naive_average has no weights of its own; train ecog_only and video_only and average "
            "their outputs");
    if (cfg.variant == Variant::svm_spectral)
        throw ConfigError("svm_spectral is fit with svm_train, not built as a network");
    if (geom.n_channels < 1) throw ConfigError("model needs at least one channel");
    if (geom.n_chunks < 1) throw ConfigError("model needs at least one chunk per window");
    if (cfg.uses_ecog() && pooled(geom.chunk_samples, kEcogDepth) < 1)
        throw ConfigError("chunks of " + std::to_string(geom.chunk_samples) +
                          " samples collapse to nothing after " + std::to_string(kEcogDepth) +
                          " pooling stages");
    if (cfg.uses_video() && cfg.frame_size != geom.frame_size)
        throw ConfigError("model frame size " + std::to_string(cfg.frame_size) +
                          " does not match the dataset's " + std::to_string(geom.frame_size));
    if (cfg.variant == Variant::conv3d_nolstm &&
        (geom.grid_rows != 8 || geom.grid_cols != 8 || geom.n_channels != 64))
        throw ConfigError("conv3d_nolstm needs the channels laid out as one full 8x8 grid, got " +
                          std::to_string(geom.grid_rows) + "x" + std::to_string(geom.grid_cols) +
                          " over " + std::to_string(geom.n_channels) + " channels");

    Model m;
    m.config = cfg;
    m.geometry = geom;
    const std::uint64_t s = cfg.seed;

    if (cfg.variant == Variant::conv3d_nolstm) {
        int in_ch = 1;
        for (int i = 0; i < kEcogDepth; ++i) {
            const TowerLayer& l = cfg.ecog_tower[static_cast<std::size_t>(i)];
            m.ecog_tower.push_back(nn::make_conv(nn::LayerKind::conv3d, in_ch, l.filters,
                                                 {3, 3, l.kernel}, nn::kernels::Padding::same,
                                                 Rng::derive(s, 10 + static_cast<std::uint64_t>(i))));
            in_ch = l.filters;
        }
    } else if (cfg.uses_ecog()) {
        int in_ch = geom.n_channels;
        for (int i = 0; i < kEcogDepth; ++i) {
            const TowerLayer& l = cfg.ecog_tower[static_cast<std::size_t>(i)];
            m.ecog_tower.push_back(nn::make_conv(nn::LayerKind::conv1d, in_ch, l.filters,
                                                 {l.kernel, 1, 1}, nn::kernels::Padding::same,
                                                 Rng::derive(s, 10 + static_cast<std::uint64_t>(i))));
            in_ch = l.filters;
        }
    }

    if (cfg.uses_video()) {
        int in_ch = cfg.variant == Variant::early_fusion
                        ? 1 + ecog_image_channels(geom, cfg.frame_size)
                        : 1;
        for (int i = 0; i < kVideoDepth; ++i) {
            const TowerLayer& l = cfg.video_tower[static_cast<std::size_t>(i)];
            m.video_tower.push_back(nn::make_conv(nn::LayerKind::conv2d, in_ch, l.filters,
                                                  {l.kernel, l.kernel, 1}, nn::kernels::Padding::same,
                                                  Rng::derive(s, 20 + static_cast<std::uint64_t>(i))));
            in_ch = l.filters;
        }
    }

    const int feat = feature_width(cfg, geom);
    int head_in = feat;
    if (cfg.uses_fc_merge()) {
        const int fc_in = cfg.uses_lstm() ? feat : feat * geom.n_chunks;
        m.fc_merge = nn::make_dense(fc_in, cfg.fc_merge, Rng::derive(s, 30));
        head_in = cfg.fc_merge;
    }
    if (cfg.uses_lstm()) {
        m.lstm = nn::make_lstm(head_in, cfg.lstm_units, Rng::derive(s, 31));
        head_in = cfg.lstm_units;
    }
    m.fc_out = nn::make_dense(head_in, 1, Rng::derive(s, 32));
    return m;
}

BatchInput make_batch(const dataset::Dataset& ds, const std::vector<int>& idx,
                      std::uint64_t aug_seed, const dsp::AugmentConfig* aug) {
    if (idx.empty()) throw std::invalid_argument("a batch needs at least one sample");
    const int n = static_cast<int>(idx.size());
    const int c = ds.n_channels;
    const int s = ds.frame_size;

    BatchInput in;
    in.labels = nn::Tensor::zeros({n, 1});
    for (int i = 0; i < n; ++i) {
        const auto& smp = ds.samples.at(static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]));
        const auto chunks =
            dataset::sample_chunks(ds, smp, Rng::derive(aug_seed, static_cast<std::uint64_t>(idx[static_cast<std::size_t>(i)])), aug);
        const int t = chunks[0].shape[1];
        if (in.ecog.empty()) {
            in.ecog.assign(chunks.size(), nn::Tensor::zeros({n, c, t}));
            in.frames.assign(chunks.size(), nn::Tensor::zeros({n, 1, s, s}));
        }
        const nn::Tensor frames = ds.frames_tensor(smp);
        const long frame_px = static_cast<long>(s) * s;
        for (std::size_t k = 0; k < chunks.size(); ++k) {
            std::copy(chunks[k].v.begin(), chunks[k].v.end(),
                      in.ecog[k].v.begin() + static_cast<long>(i) * c * t);
            std::copy(frames.v.begin() + static_cast<long>(k) * frame_px,
                      frames.v.begin() + static_cast<long>(k + 1) * frame_px,
                      in.frames[k].v.begin() + static_cast<long>(i) * frame_px);
        }
        in.labels.v[static_cast<std::size_t>(i)] = smp.label;
    }
    return in;
}

nn::Graph::NodeId forward_graph(nn::Graph& g, Model& m, const BatchInput& in, bool train_mode,
                                std::uint64_t dropout_seed) {
    const ModelConfig& cfg = m.config;
    const DataGeometry& geom = m.geometry;
    const int chunks = geom.n_chunks;
    const bool needs_ecog = cfg.uses_ecog() || cfg.variant == Variant::lstm_only ||
                            cfg.variant == Variant::early_fusion;
    const bool needs_frames = cfg.uses_video();

    if (needs_ecog && static_cast<int>(in.ecog.size()) != chunks)
        throw ShapeError("batch carries " + std::to_string(in.ecog.size()) + " ECoG chunks, model expects " +
                         std::to_string(chunks));
    if (needs_frames && static_cast<int>(in.frames.size()) != chunks)
        throw ShapeError("batch carries " + std::to_string(in.frames.size()) +
                         " frames, model expects " + std::to_string(chunks));
    const int n = needs_ecog ? in.ecog[0].shape[0] : in.frames[0].shape[0];
    for (int t = 0; t < chunks; ++t) {
        if (needs_ecog)
            expect_shape(in.ecog[static_cast<std::size_t>(t)],
                         {n, geom.n_channels, geom.chunk_samples}, "ECoG chunk");
        if (needs_frames)
            expect_shape(in.frames[static_cast<std::size_t>(t)],
                         {n, 1, cfg.frame_size, cfg.frame_size}, "frame");
    }

    Rng drop_rng(dropout_seed);
    ParamNodes pn = bind_params(g, m);

    std::vector<NodeId> feats;
    feats.reserve(static_cast<std::size_t>(chunks));
    for (int t = 0; t < chunks; ++t) {
        const std::size_t ti = static_cast<std::size_t>(t);
        switch (cfg.variant) {
            case Variant::late_fusion: {
                const NodeId e = apply_tower(g, m.ecog_tower, pn.ecog, g.constant(in.ecog[ti]));
                const NodeId v = apply_tower(g, m.video_tower, pn.video, g.constant(in.frames[ti]));
                feats.push_back(g.concat_cols({e, v}));
                break;
            }
            case Variant::ecog_only:
            case Variant::conv1d_nolstm:
                feats.push_back(apply_tower(g, m.ecog_tower, pn.ecog, g.constant(in.ecog[ti])));
                break;
            case Variant::video_only:
                feats.push_back(apply_tower(g, m.video_tower, pn.video, g.constant(in.frames[ti])));
                break;
            case Variant::lstm_only:
                feats.push_back(g.reshape(g.constant(in.ecog[ti]),
                                          {n, geom.n_channels * geom.chunk_samples}));
                break;
            case Variant::early_fusion: {
                const int img = cfg.frame_size * cfg.frame_size;
                const int extra = ecog_image_channels(geom, cfg.frame_size);
                const int pad = extra * img - geom.n_channels * geom.chunk_samples;
                NodeId flat = g.reshape(g.constant(in.ecog[ti]),
                                        {n, geom.n_channels * geom.chunk_samples});
                if (pad > 0)
                    flat = g.concat_cols({flat, g.constant(nn::Tensor::zeros({n, pad}))});
                const NodeId fflat = g.reshape(g.constant(in.frames[ti]), {n, img});
                const NodeId stacked = g.reshape(g.concat_cols({fflat, flat}),
                                                 {n, 1 + extra, cfg.frame_size, cfg.frame_size});
                feats.push_back(apply_tower(g, m.video_tower, pn.video, stacked));
                break;
            }
            case Variant::conv3d_nolstm: {
                const NodeId vol = g.reshape(g.constant(in.ecog[ti]),
                                             {n, 1, geom.grid_rows, geom.grid_cols,
                                              geom.chunk_samples});
                feats.push_back(apply_tower(g, m.ecog_tower, pn.ecog, vol));
                break;
            }
            default:
                throw ConfigError(variant_name(cfg.variant) + " has no forward graph");
        }
    }

    NodeId head;
    if (cfg.uses_lstm()) {
        NodeId h = g.constant(nn::Tensor::zeros({n, cfg.lstm_units}));
        NodeId c = g.constant(nn::Tensor::zeros({n, cfg.lstm_units}));
        for (int t = 0; t < chunks; ++t) {
            NodeId f = feats[static_cast<std::size_t>(t)];
            if (cfg.uses_fc_merge())
                f = g.dropout(g.relu(g.dense(f, pn.merge.first, pn.merge.second)), cfg.dropout,
                              train_mode, drop_rng);
            const nn::LstmNodes hc = nn::lstm_step(g, f, h, c, pn.lstm.first, pn.lstm.second,
                                                   cfg.lstm_units);
            h = hc.h;
            c = hc.c;
        }
        head = h;
    } else {
        head = g.dropout(g.relu(g.dense(g.concat_cols(feats), pn.merge.first, pn.merge.second)),
                         cfg.dropout, train_mode, drop_rng);
    }
    return g.sigmoid(g.dense(head, pn.out.first, pn.out.second));
}

std::vector<double> predict(Model& m, const dataset::Dataset& ds, int batch_size) {
    if (batch_size < 1) throw ConfigError("batch size must be positive");
    const int n = static_cast<int>(ds.samples.size());
    std::vector<double> probs;
    probs.reserve(static_cast<std::size_t>(n));
    for (int lo = 0; lo < n; lo += batch_size) {
        const int hi = std::min(n, lo + batch_size);
        std::vector<int> idx(static_cast<std::size_t>(hi - lo));
        std::iota(idx.begin(), idx.end(), lo);
        const BatchInput in = make_batch(ds, idx);
        nn::Graph g;
        const NodeId p = forward_graph(g, m, in, false);
        const nn::Tensor& pv = g.value(p);
        probs.insert(probs.end(), pv.v.begin(), pv.v.end());
    }
    return probs;
}

EvalResult evaluate(Model& m, const dataset::Dataset& ds, int batch_size) {
    if (ds.samples.empty()) throw DataError("cannot evaluate on an empty set");
    EvalResult r;
    r.probabilities = predict(m, ds, batch_size);
    r.predicted.resize(r.probabilities.size());
    long correct = 0;
    for (std::size_t i = 0; i < r.probabilities.size(); ++i) {
        r.predicted[i] = r.probabilities[i] > 0.5 ? 1 : 0;
        if (r.predicted[i] == ds.samples[i].label) ++correct;
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.probabilities.size());
    return r;
}

double naive_average(double p_ecog, double p_video) { return 0.5 * (p_ecog + p_video); }

EvalResult evaluate_naive(Model& ecog_model, Model& video_model, const dataset::Dataset& ds,
                          int batch_size) {
    if (ds.samples.empty()) throw DataError("cannot evaluate on an empty set");
    const std::vector<double> pe = predict(ecog_model, ds, batch_size);
    const std::vector<double> pv = predict(video_model, ds, batch_size);
    EvalResult r;
    r.probabilities.resize(pe.size());
    r.predicted.resize(pe.size());
    long correct = 0;
    for (std::size_t i = 0; i < pe.size(); ++i) {
        r.probabilities[i] = naive_average(pe[i], pv[i]);
        r.predicted[i] = r.probabilities[i] > 0.5 ? 1 : 0;
        if (r.predicted[i] == ds.samples[i].label) ++correct;
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(pe.size());
    return r;
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (runs < 1) throw ConfigError("runs must be at least 1");
    if (validation_fraction <= 0.0 || validation_fraction >= 1.0)
        throw ConfigError("validation_fraction must lie in (0, 1)");
}

TrainResult train(Model& m, const dataset::Dataset& train_set, const dataset::Dataset& valid_set,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.samples.empty()) throw DataError("training set is empty");
    if (valid_set.samples.empty()) throw DataError("validation set is empty");

    const int n = static_cast<int>(train_set.samples.size());
    TrainResult res;
    std::vector<nn::Tensor> best_weights;
    double best_acc = -1.0;

    for (int run = 0; run < cfg.runs; ++run) {
        const std::uint64_t run_seed = Rng::derive(cfg.seed, 100 + static_cast<std::uint64_t>(run));
        ModelConfig rc = m.config;
        rc.seed = Rng::derive(run_seed, 1);
        Model fresh = build_model(rc, m.geometry);
        restore(m, snapshot(fresh));

        nn::OptimizerState opt = cfg.optim;
        opt.velocity.clear();
        opt.step_count = 0;
        const std::vector<nn::Param*> params = m.params();

        RunHistory hist;
        std::vector<nn::Tensor> run_best = snapshot(m);
        int since_improve = 0;

        for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
            Rng shuffle_rng(Rng::derive(run_seed, 1000 + static_cast<std::uint64_t>(epoch)));
            std::vector<int> order(static_cast<std::size_t>(n));
            std::iota(order.begin(), order.end(), 0);
            shuffle_indices(order, shuffle_rng);
            const std::uint64_t aug_seed =
                Rng::derive(run_seed, 2000 + static_cast<std::uint64_t>(epoch));
            const std::uint64_t drop_base =
                Rng::derive(run_seed, 3000 + static_cast<std::uint64_t>(epoch));

            double loss_sum = 0.0;
            long correct = 0;
            bool nan_hit = false;
            for (int lo = 0; lo < n; lo += cfg.batch_size) {
                const int hi = std::min(n, lo + cfg.batch_size);
                const std::vector<int> idx(order.begin() + lo, order.begin() + hi);
                const BatchInput in =
                    make_batch(train_set, idx, aug_seed,
                               cfg.augment_enabled ? &cfg.augment : nullptr);
                nn::Graph g;
                const NodeId prob = forward_graph(g, m, in, true,
                                                  Rng::derive(drop_base, static_cast<std::uint64_t>(lo)));
                const NodeId loss = g.bce_loss(prob, g.constant(in.labels));
                const double lv = g.value(loss).v[0];
                if (!std::isfinite(lv)) {
                    nan_hit = true;
                    break;
                }
                loss_sum += lv * (hi - lo);
                const nn::Tensor& pv = g.value(prob);
                for (int i = 0; i < hi - lo; ++i) {
                    const int pred = pv.v[static_cast<std::size_t>(i)] > 0.5 ? 1 : 0;
                    const int label =
                        static_cast<int>(std::lround(in.labels.v[static_cast<std::size_t>(i)]));
                    if (pred == label) ++correct;
                }
                for (nn::Param* p : params) p->zero_grad();
                g.backward(loss);
                nn::sgd_step(params, opt);
            }
            if (nan_hit) {
                hist.diverged = true;
                break;
            }

            hist.train_loss.push_back(loss_sum / n);
            hist.train_acc.push_back(static_cast<double>(correct) / n);
            const double vacc = evaluate(m, valid_set, cfg.batch_size).accuracy;
            hist.valid_acc.push_back(vacc);
            hist.epochs_ran = epoch + 1;
            if (cfg.log)
                *cfg.log << variant_name(m.config.variant) << " run " << run + 1 << " epoch "
                         << epoch + 1 << " loss " << hist.train_loss.back() << " train "
                         << hist.train_acc.back() << " valid " << vacc << "\n";

            if (vacc > hist.best_valid_acc || hist.best_epoch < 0) {
                hist.best_valid_acc = vacc;
                hist.best_epoch = epoch;
                run_best = snapshot(m);
                since_improve = 0;
            } else if (++since_improve >= cfg.patience) {
                break;
            }
        }

        if (hist.diverged) hist.best_valid_acc = 0.0;
        res.runs.push_back(hist);
        if (hist.best_valid_acc > best_acc) {
            best_acc = hist.best_valid_acc;
            best_weights = std::move(run_best);
            res.selected_run = run;
        }
    }

    restore(m, best_weights);
    res.valid_acc = best_acc;
    res.train_acc = evaluate(m, train_set, cfg.batch_size).accuracy;
    res.epochs_ran = res.runs[static_cast<std::size_t>(res.selected_run)].epochs_ran;
    return res;
}

std::pair<dataset::Dataset, dataset::Dataset> split_validation(const dataset::Dataset& all,
                                                               double fraction,
                                                               std::uint64_t seed) {
    if (fraction <= 0.0 || fraction >= 1.0)
        throw ConfigError("validation fraction must lie in (0, 1)");
    if (all.samples.empty()) throw DataError("cannot split an empty dataset");

    std::vector<char> in_valid(all.samples.size(), 0);
    for (int label = 0; label < 2; ++label) {
        std::vector<int> idx;
        for (std::size_t i = 0; i < all.samples.size(); ++i)
            if (all.samples[i].label == label) idx.push_back(static_cast<int>(i));
        if (idx.size() < 2) continue;
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(label) + 1));
        shuffle_indices(idx, rng);
        long take = std::lround(fraction * static_cast<double>(idx.size()));
        take = std::clamp(take, 1L, static_cast<long>(idx.size()) - 1);
        for (long i = 0; i < take; ++i) in_valid[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 1;
    }

    dataset::Dataset train = like(all);
    dataset::Dataset valid = like(all);
    for (std::size_t i = 0; i < all.samples.size(); ++i)
        (in_valid[i] ? valid : train).samples.push_back(all.samples[i]);
    if (valid.samples.empty())
        throw DataError("validation split came out empty; need at least two samples of a class");
    return {std::move(train), std::move(valid)};
}

void SvmConfig::validate() const {
    if (lambda_grid.empty()) throw ConfigError("lambda grid is empty");
    for (double l : lambda_grid)
        if (l < 0.0) throw ConfigError("lambda must be nonnegative");
    if (iterations < 1) throw ConfigError("iterations must be at least 1");
    if (base_lr <= 0.0) throw ConfigError("base_lr must be positive");
    if (lr_decay < 0.0) throw ConfigError("lr_decay must be nonnegative");
}

std::vector<double> spectral_features(const dataset::Dataset& ds,
                                      const dataset::LabeledSample& s) {
    const auto chunks = dataset::sample_chunks(ds, s);
    const int c = ds.n_channels;
    const int chunk = chunks[0].shape[1];
    nn::Tensor win({c, static_cast<int>(chunks.size()) * chunk});
    const int w = win.shape[1];
    for (std::size_t k = 0; k < chunks.size(); ++k)
        for (int ch = 0; ch < c; ++ch)
            std::copy(chunks[k].v.begin() + static_cast<long>(ch) * chunk,
                      chunks[k].v.begin() + static_cast<long>(ch + 1) * chunk,
                      win.v.begin() + static_cast<long>(ch) * w + static_cast<long>(k) * chunk);
    return dsp::stft_band_power(win, 1000.0).power;
}

double svm_objective(const std::vector<double>& w, double b, double lambda,
                     const std::vector<std::vector<double>>& x, const std::vector<int>& y) {
    if (x.empty()) throw DataError("objective needs at least one row");
    if (x.size() != y.size()) throw ShapeError("feature and label counts differ");
    double norm = 0.0;
    for (double wi : w) norm += wi * wi;
    double hinge = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].size() != w.size()) throw ShapeError("feature row width does not match w");
        double dot = b;
        for (std::size_t j = 0; j < w.size(); ++j) dot += w[j] * x[i][j];
        const double yi = y[i] ? 1.0 : -1.0;
        hinge += std::max(0.0, 1.0 - yi * dot);
    }
    return lambda * norm + hinge / static_cast<double>(x.size());
}

SvmModel svm_train(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                   const std::vector<std::vector<double>>& xv, const std::vector<int>& yv,
                   const SvmConfig& cfg) {
    cfg.validate();
    if (x.empty()) throw DataError("svm training set is empty");
    if (x.size() != y.size()) throw ShapeError("feature and label counts differ");
    if (xv.empty() || xv.size() != yv.size())
        throw DataError("svm lambda selection needs a labeled validation set");
    const std::size_t d = x[0].size();
    for (const auto& row : x)
        if (row.size() != d) throw ShapeError("ragged feature rows");
    for (const auto& row : xv)
        if (row.size() != d) throw ShapeError("validation feature width differs from training");

    bool has_move = false, has_rest = false;
    for (int label : y) (label ? has_move : has_rest) = true;
    if (!has_move || !has_rest) throw DataError("svm training labels contain a single class");

    std::vector<double> mu(d, 0.0), sd(d, 0.0);
    for (const auto& row : x)
        for (std::size_t j = 0; j < d; ++j) mu[j] += row[j];
    for (std::size_t j = 0; j < d; ++j) mu[j] /= static_cast<double>(x.size());
    for (const auto& row : x)
        for (std::size_t j = 0; j < d; ++j) sd[j] += (row[j] - mu[j]) * (row[j] - mu[j]);
    for (std::size_t j = 0; j < d; ++j) sd[j] = std::sqrt(sd[j] / static_cast<double>(x.size()));

    auto standardized = [&](const std::vector<std::vector<double>>& rows) {
        std::vector<std::vector<double>> z(rows.size(), std::vector<double>(d));
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < d; ++j)
                z[i][j] = (rows[i][j] - mu[j]) / (sd[j] + dsp::kNormEps);
        return z;
    };
    const auto xs = standardized(x);
    const auto xvs = standardized(xv);

    const double n_inv = 1.0 / static_cast<double>(xs.size());
    SvmModel best;
    double best_acc = -1.0;
    for (double lambda : cfg.lambda_grid) {
        std::vector<double> w(d, 0.0);
        double b = 0.0;
        std::vector<double> gw(d);
        for (int it = 0; it < cfg.iterations; ++it) {
            const double lr = cfg.base_lr / (1.0 + cfg.lr_decay * it);
            std::fill(gw.begin(), gw.end(), 0.0);
            double gb = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                double dot = b;
                for (std::size_t j = 0; j < d; ++j) dot += w[j] * xs[i][j];
                const double yi = y[i] ? 1.0 : -1.0;
                if (yi * dot < 1.0) {
                    for (std::size_t j = 0; j < d; ++j) gw[j] -= yi * xs[i][j];
                    gb -= yi;
                }
            }
            for (std::size_t j = 0; j < d; ++j) w[j] -= lr * (2.0 * lambda * w[j] + gw[j] * n_inv);
            b -= lr * gb * n_inv;
        }

        long correct = 0;
        for (std::size_t i = 0; i < xvs.size(); ++i) {
            double dot = b;
            for (std::size_t j = 0; j < d; ++j) dot += w[j] * xvs[i][j];
            const int pred = dot > 0.0 ? 1 : 0;
            if (pred == yv[i]) ++correct;
        }
        const double acc = static_cast<double>(correct) / static_cast<double>(xvs.size());
        if (acc > best_acc) {
            best_acc = acc;
            best.w = w;
            best.b = b;
            best.lambda = lambda;
        }
    }
    best.feature_mu = mu;
    best.feature_sd = sd;
    return best;
}

double svm_decision(const SvmModel& m, const std::vector<double>& x) {
    if (x.size() != m.w.size()) throw ShapeError("feature width does not match the model");
    double dot = m.b;
    for (std::size_t j = 0; j < x.size(); ++j)
        dot += m.w[j] * (x[j] - m.feature_mu[j]) / (m.feature_sd[j] + dsp::kNormEps);
    return dot;
}

int svm_predict(const SvmModel& m, const std::vector<double>& x) {
    return svm_decision(m, x) > 0.0 ? 1 : 0;
}

}  // namespace movedec::models
