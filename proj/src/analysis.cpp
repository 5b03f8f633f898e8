#include "movedec/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "movedec/error.hpp"
#include "movedec/layers.hpp"
#include "movedec/rng.hpp"
#include "movedec/tape.hpp"

namespace movedec::analysis {

namespace {

double l2_norm(const nn::Tensor& t) {
    double s = 0.0;
    for (double e : t.v) s += e * e;
    return std::sqrt(s);
}

std::string fmt_acc(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

struct LayerRef {
    const std::vector<nn::LayerParams>* tower = nullptr;
    std::size_t index = 0;
};

LayerRef find_conv_layer(const models::Model& m, const std::string& layer) {
    LayerRef ref;
    std::string rest;
    if (layer.rfind("ecog_conv", 0) == 0) {
        ref.tower = &m.ecog_tower;
        rest = layer.substr(9);
    } else if (layer.rfind("video_conv", 0) == 0) {
        ref.tower = &m.video_tower;
        rest = layer.substr(10);
    } else {
        throw std::invalid_argument("unknown layer '" + layer + "'");
    }
    std::size_t pos = 0;
    int idx = 0;
    try {
        idx = std::stoi(rest, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("unknown layer '" + layer + "'");
    }
    if (pos != rest.size() || idx < 1 || static_cast<std::size_t>(idx) > ref.tower->size())
        throw std::invalid_argument("unknown layer '" + layer + "'");
    ref.index = static_cast<std::size_t>(idx - 1);
    if ((*ref.tower)[ref.index].weights.value.numel() == 0)
        throw std::invalid_argument("layer '" + layer + "' is not part of this variant");
    return ref;
}

std::vector<int> tower_input_shape(const models::Model& m, const LayerRef& ref) {
    const nn::LayerParams& first = (*ref.tower)[0];
    const int in_ch = first.weights.value.shape[1];
    switch (first.kind) {
        case nn::LayerKind::conv1d:
            return {1, in_ch, m.geometry.chunk_samples};
        case nn::LayerKind::conv2d:
            return {1, in_ch, m.geometry.frame_size, m.geometry.frame_size};
        case nn::LayerKind::conv3d:
            return {1, in_ch, m.geometry.grid_rows, m.geometry.grid_cols,
                    m.geometry.chunk_samples};
        default:
            throw StateError("tower starts with a non-conv layer");
    }
}

}  // namespace

double ablate_electrode(models::Model& m, const dataset::Dataset& test_set, int electrode) {
    dataset::Dataset copy = test_set;
    dataset::ablate_channel(copy, electrode);
    return models::evaluate(m, copy).accuracy;
}

AblationMap ablation_map(models::Model& m, const dataset::Dataset& test_set) {
    AblationMap map;
    map.original_accuracy = models::evaluate(m, test_set).accuracy;
    map.entries.reserve(static_cast<std::size_t>(test_set.n_channels));
    const int grid = test_set.grid_rows * test_set.grid_cols;
    for (int c = 0; c < test_set.n_channels; ++c) {
        AblationEntry e;
        e.electrode = c;
        if (test_set.grid_cols > 0 && c < grid) {
            e.row = c / test_set.grid_cols;
            e.col = c % test_set.grid_cols;
        }
        e.ablated_accuracy = ablate_electrode(m, test_set, c);
        e.delta = map.original_accuracy - e.ablated_accuracy;
        map.entries.push_back(e);
    }
    map.worst_case_delta = map.entries.front().delta;
    for (const AblationEntry& e : map.entries)
        map.worst_case_delta = std::max(map.worst_case_delta, e.delta);
    return map;
}

double ablate_all(models::Model& m, const dataset::Dataset& test_set) {
    dataset::Dataset copy = test_set;
    for (int c = 0; c < copy.n_channels; ++c) dataset::ablate_channel(copy, c);
    return models::evaluate(m, copy).accuracy;
}

std::string ablation_csv(const AblationMap& map) {
    std::ostringstream out;
    out << "electrode_id,row,col,original_acc,ablated_acc,delta\n";
    for (const AblationEntry& e : map.entries)
        out << e.electrode << ',' << e.row << ',' << e.col << ','
            << fmt_acc(map.original_accuracy) << ',' << fmt_acc(e.ablated_accuracy) << ','
            << fmt_acc(e.delta) << '\n';
    return out.str();
}

VizResult visualize_unit(models::Model& m, const std::string& layer, int unit,
                         const VizConfig& cfg) {
    if (cfg.steps < 1) throw ConfigError("viz steps must be at least 1");
    if (cfg.step_size <= 0.0) throw ConfigError("viz step size must be positive");
    if (cfg.norm_bound < 0.0) throw ConfigError("viz norm bound must be non-negative");
    const LayerRef ref = find_conv_layer(m, layer);
    const std::vector<nn::LayerParams>& layers = *ref.tower;
    if (unit < 0 || unit >= layers[ref.index].weights.value.shape[0])
        throw std::invalid_argument("layer '" + layer + "' has no unit " + std::to_string(unit));

    auto eval = [&](const nn::Tensor& x, nn::Tensor* grad_out) -> double {
        nn::Graph g;
        nn::Param px(x);
        const nn::Graph::NodeId in = grad_out ? g.param(px) : g.constant(x);
        nn::Graph::NodeId cur = in;
        for (std::size_t i = 0; i < ref.index; ++i) {
            const nn::kernels::ConvSpec spec = nn::conv_spec_of(layers[i], g.value(cur).shape[1]);
            cur = g.maxpool(g.relu(g.conv(cur, g.constant(layers[i].weights.value),
                                          g.constant(layers[i].biases.value), spec)),
                            {spec.rank, 2});
        }
        const nn::LayerParams& target = layers[ref.index];
        const nn::kernels::ConvSpec spec = nn::conv_spec_of(target, g.value(cur).shape[1]);
        const nn::Graph::NodeId act = g.relu(g.conv(cur, g.constant(target.weights.value),
                                                    g.constant(target.biases.value), spec));
        const nn::Graph::NodeId obj = g.channel_mean(act, unit);
        if (grad_out) {
            g.backward(obj);
            *grad_out = px.grad;
        }
        return g.value(obj).v[0];
    };

    VizResult r;
    r.layer = layer;
    r.unit = unit;

    nn::Tensor x(tower_input_shape(m, ref));
    const double bound =
        cfg.norm_bound > 0.0 ? cfg.norm_bound : std::sqrt(static_cast<double>(x.numel()));
    Rng rng(Rng::derive(cfg.seed, 7));
    for (double& e : x.v) e = rng.gaussian();
    const double n0 = l2_norm(x);
    if (n0 > 0.0)
        for (double& e : x.v) e *= 0.01 * bound / n0;

    nn::Tensor grad;
    double act = eval(x, &grad);
    r.trace.push_back(act);
    if (l2_norm(grad) < 1e-300) {
        r.dead = true;
        r.input = std::move(x);
        return r;
    }

    double step = cfg.step_size;
    for (int it = 0; it < cfg.steps; ++it) {
        bool accepted = false;
        for (int half = 0; half < 40 && !accepted; ++half) {
            nn::Tensor cand = x;
            for (std::size_t i = 0; i < cand.v.size(); ++i) cand.v[i] += step * grad.v[i];
            const double n = l2_norm(cand);
            if (n > bound)
                for (double& e : cand.v) e *= bound / n;
            const double cand_act = eval(cand, nullptr);
            if (cand_act >= act) {
                x = std::move(cand);
                act = cand_act;
                r.trace.push_back(act);
                accepted = true;
            } else {
                step *= 0.5;
            }
        }
        if (!accepted) break;
        if (it + 1 < cfg.steps) eval(x, &grad);
    }

    r.input = std::move(x);
    return r;
}

void save_viz(const VizResult& v, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::string base = "viz_" + v.layer + "_" + std::to_string(v.unit);
    {
        std::ofstream f(dir / (base + ".f32"), std::ios::binary);
        if (!f) throw DataError("cannot write " + (dir / (base + ".f32")).string());
        for (double d : v.input.v) {
            const float x = static_cast<float>(d);
            f.write(reinterpret_cast<const char*>(&x), sizeof x);
        }
        if (!f) throw DataError("short write to " + (dir / (base + ".f32")).string());
    }
    nlohmann::json j;
    j["layer"] = v.layer;
    j["unit"] = v.unit;
    j["shape"] = v.input.shape;
    j["trace"] = v.trace;
    j["dead"] = v.dead;
    std::ofstream f(dir / (base + ".json"));
    if (!f) throw DataError("cannot write " + (dir / (base + ".json")).string());
    f << j.dump(2) << '\n';
}

void write_metrics(const MetricsRecord& r, const std::filesystem::path& file) {
    nlohmann::json j;
    j["variant"] = r.variant;
    j["condition"] = r.condition;
    j["dataset_id"] = r.dataset_id;
    j["config_hash"] = r.config_hash;
    j["seed"] = r.seed;
    j["train_acc"] = r.train_acc;
    j["valid_acc"] = r.valid_acc;
    j["test_acc"] = r.test_acc;
    j["epochs_ran"] = r.epochs_ran;
    j["run_index_selected"] = r.run_index_selected;
    std::ofstream f(file);
    if (!f) throw DataError("cannot write metrics file " + file.string());
    f << j.dump(2) << '\n';
}

MetricsRecord read_metrics(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open metrics file " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("metrics file " + file.string() + " is not valid JSON: " + e.what());
    }
    MetricsRecord r;
    try {
        r.variant = j.at("variant").get<std::string>();
        r.condition = j.at("condition").get<std::string>();
        r.dataset_id = j.at("dataset_id").get<std::string>();
        r.config_hash = j.at("config_hash").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.train_acc = j.at("train_acc").get<double>();
        r.valid_acc = j.at("valid_acc").get<double>();
        r.test_acc = j.at("test_acc").get<double>();
        r.epochs_ran = j.at("epochs_ran").get<int>();
        r.run_index_selected = j.at("run_index_selected").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("metrics file " + file.string() + " is missing fields: " + e.what());
    }
    return r;
}

Report make_report(const std::vector<MetricsRecord>& results) {
    if (results.empty()) throw DataError("report needs at least one metrics record");
    const std::string& ds = results.front().dataset_id;
    for (const MetricsRecord& r : results)
        if (r.dataset_id != ds)
            throw DataError("metrics records mix dataset identities: '" + ds + "' and '" +
                            r.dataset_id + "'");

    std::vector<std::string> variants;
    std::vector<std::string> conditions;
    for (const MetricsRecord& r : results) {
        if (std::find(variants.begin(), variants.end(), r.variant) == variants.end())
            variants.push_back(r.variant);
        if (std::find(conditions.begin(), conditions.end(), r.condition) == conditions.end())
            conditions.push_back(r.condition);
    }

    std::map<std::pair<std::size_t, std::size_t>, std::pair<double, int>> cells;
    for (const MetricsRecord& r : results) {
        const std::size_t ci = static_cast<std::size_t>(
            std::find(conditions.begin(), conditions.end(), r.condition) - conditions.begin());
        const std::size_t vi = static_cast<std::size_t>(
            std::find(variants.begin(), variants.end(), r.variant) - variants.begin());
        auto& cell = cells[{ci, vi}];
        cell.first += r.test_acc;
        cell.second += 1;
    }
    auto cell_value = [&cells](std::size_t ci, std::size_t vi, double* out) -> bool {
        const auto it = cells.find({ci, vi});
        if (it == cells.end()) return false;
        *out = it->second.first / it->second.second;
        return true;
    };

    std::vector<double> averages(variants.size(), 0.0);
    std::vector<bool> has_average(variants.size(), false);
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
        double sum = 0.0;
        int n = 0;
        for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
            double v = 0.0;
            if (cell_value(ci, vi, &v)) {
                sum += v;
                ++n;
            }
        }
        if (n > 0) {
            averages[vi] = sum / n;
            has_average[vi] = true;
        }
    }

    Report rep;
    {
        std::ostringstream csv;
        csv << "condition";
        for (const std::string& v : variants) csv << ',' << v;
        csv << '\n';
        for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
            csv << conditions[ci];
            for (std::size_t vi = 0; vi < variants.size(); ++vi) {
                double v = 0.0;
                csv << ',';
                if (cell_value(ci, vi, &v)) csv << fmt_acc(v);
            }
            csv << '\n';
        }
        csv << "average";
        for (std::size_t vi = 0; vi < variants.size(); ++vi) {
            csv << ',';
            if (has_average[vi]) csv << fmt_acc(averages[vi]);
        }
        csv << '\n';
        rep.csv = csv.str();
    }
    {
        std::size_t label_w = std::string("condition").size();
        for (const std::string& c : conditions) label_w = std::max(label_w, c.size());
        label_w = std::max(label_w, std::string("average").size());
        std::vector<std::size_t> col_w(variants.size());
        for (std::size_t vi = 0; vi < variants.size(); ++vi)
            col_w[vi] = std::max<std::size_t>(variants[vi].size(), 8);

        std::ostringstream txt;
        txt << "dataset " << ds << ", test accuracy\n\n";
        auto pad_left = [&txt](const std::string& s, std::size_t w) {
            for (std::size_t i = s.size(); i < w; ++i) txt << ' ';
            txt << s;
        };
        auto pad_right = [&txt](const std::string& s, std::size_t w) {
            txt << s;
            for (std::size_t i = s.size(); i < w; ++i) txt << ' ';
        };
        pad_right("condition", label_w);
        for (std::size_t vi = 0; vi < variants.size(); ++vi) {
            txt << "  ";
            pad_left(variants[vi], col_w[vi]);
        }
        txt << '\n';
        for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
            pad_right(conditions[ci], label_w);
            for (std::size_t vi = 0; vi < variants.size(); ++vi) {
                double v = 0.0;
                txt << "  ";
                pad_left(cell_value(ci, vi, &v) ? fmt_acc(v) : "-", col_w[vi]);
            }
            txt << '\n';
        }
        pad_right("average", label_w);
        for (std::size_t vi = 0; vi < variants.size(); ++vi) {
            txt << "  ";
            pad_left(has_average[vi] ? fmt_acc(averages[vi]) : "-", col_w[vi]);
        }
        txt << '\n';
        rep.text = txt.str();
    }
    return rep;
}

}  // namespace movedec::analysis
