#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "movedec/analysis.hpp"
#include "movedec/dataset.hpp"
#include "movedec/error.hpp"
#include "movedec/fft.hpp"
#include "movedec/models.hpp"
#include "movedec/rng.hpp"

using movedec::ConfigError;
using movedec::DataError;
using movedec::Rng;
using movedec::nn::Tensor;
namespace analysis = movedec::analysis;
namespace dataset = movedec::dataset;
namespace models = movedec::models;
namespace fs = std::filesystem;
using models::Variant;

namespace {

dataset::Dataset toy_set(int n, int channels, double amp, double noise_sd, std::uint64_t seed,
                         int grid_rows = 1, int grid_cols = 0) {
    dataset::Dataset ds;
    ds.n_channels = channels;
    ds.window_samples = 1000;
    ds.margin_samples = 100;
    ds.frame_size = 16;
    ds.grid_rows = grid_rows;
    ds.grid_cols = grid_cols > 0 ? grid_cols : channels;
    ds.condition = "det";
    ds.channel_means["toy"] = std::vector<double>(static_cast<std::size_t>(channels), 0.0);
    Rng rng(seed);
    const std::size_t ext = static_cast<std::size_t>(channels) * 1200;
    for (int i = 0; i < n; ++i) {
        dataset::LabeledSample s;
        s.label = i % 2;
        const double center = s.label ? amp : -amp;
        s.extended.resize(ext);
        for (auto& v : s.extended) v = static_cast<float>(center + noise_sd * rng.gaussian());
        s.mu.assign(static_cast<std::size_t>(channels), 0.0);
        s.sigma.assign(static_cast<std::size_t>(channels), 1.0);
        s.frames.assign(static_cast<std::size_t>(5) * 16 * 16, 0.0f);
        s.day = 0;
        s.t_ms = 10000 + 7000L * i;
        s.session_id = "toy";
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

models::Model ecog_model(const dataset::Dataset& ds, std::uint64_t seed) {
    models::ModelConfig cfg;
    cfg.variant = Variant::ecog_only;
    cfg.ecog_tower = {{4, 7}, {4, 5}, {8, 3}};
    cfg.seed = seed;
    return models::build_model(cfg, models::DataGeometry::of(ds));
}

// Single-channel model whose first conv layer has a wide kernel so a
// hand-set sinusoid spans two full cycles at 1 kHz.
models::Model sine_kernel_model(std::uint64_t seed) {
    models::DataGeometry g;
    g.n_channels = 1;
    g.chunk_samples = 200;
    g.n_chunks = 5;
    g.frame_size = 16;
    g.grid_rows = 1;
    g.grid_cols = 1;
    models::ModelConfig cfg;
    cfg.variant = Variant::ecog_only;
    cfg.ecog_tower = {{2, 101}, {2, 5}, {4, 3}};
    cfg.seed = seed;
    models::Model m = models::build_model(cfg, g);
    Tensor& w = m.ecog_tower[0].weights.value;  // [2, 1, 101]
    for (int k = 0; k < 101; ++k)
        w.v[static_cast<std::size_t>(k)] = std::sin(2.0 * M_PI * 20.0 * k / 1000.0);
    return m;
}

std::vector<Tensor> param_values(models::Model& m) {
    std::vector<Tensor> out;
    for (auto* p : m.params()) out.push_back(p->value);
    return out;
}

analysis::MetricsRecord rec(const std::string& variant, const std::string& condition, double acc,
                            const std::string& ds_id = "d0", std::uint64_t seed = 1) {
    analysis::MetricsRecord r;
    r.variant = variant;
    r.condition = condition;
    r.dataset_id = ds_id;
    r.config_hash = "cfg";
    r.seed = seed;
    r.train_acc = acc;
    r.valid_acc = acc;
    r.test_acc = acc;
    r.epochs_ran = 1;
    r.run_index_selected = 0;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace

TEST_CASE("ablating a channel already at its recording mean is an exact no-op") {
    dataset::Dataset ds = toy_set(20, 3, 0.8, 0.3, 11);
    for (auto& s : ds.samples)
        for (std::size_t j = 0; j < 1200; ++j) s.extended[1200 + j] = 0.0f;
    models::Model m = ecog_model(ds, 5);

    const models::EvalResult before = models::evaluate(m, ds);
    CHECK(analysis::ablate_electrode(m, ds, 1) == before.accuracy);

    dataset::Dataset copy = ds;
    dataset::ablate_channel(copy, 1);
    CHECK(models::predict(m, copy) == models::predict(m, ds));
}

TEST_CASE("ablate_electrode rejects channels the dataset does not have") {
    dataset::Dataset ds = toy_set(6, 2, 0.5, 0.2, 3);
    models::Model m = ecog_model(ds, 5);
    CHECK_THROWS_AS(analysis::ablate_electrode(m, ds, 2), std::invalid_argument);
    CHECK_THROWS_AS(analysis::ablate_electrode(m, ds, -1), std::invalid_argument);
}

TEST_CASE("ablation map covers every electrode once and leaves the model untouched") {
    dataset::Dataset ds = toy_set(24, 4, 0.8, 0.4, 12, 2, 2);
    models::Model m = ecog_model(ds, 7);
    const std::vector<Tensor> w0 = param_values(m);
    const double acc0 = models::evaluate(m, ds).accuracy;

    const analysis::AblationMap map = analysis::ablation_map(m, ds);

    REQUIRE(map.entries.size() == 4);
    CHECK(map.original_accuracy == acc0);
    double worst = map.entries.front().delta;
    for (int c = 0; c < 4; ++c) {
        const analysis::AblationEntry& e = map.entries[static_cast<std::size_t>(c)];
        CHECK(e.electrode == c);
        CHECK(e.row == c / 2);
        CHECK(e.col == c % 2);
        CHECK(e.delta == map.original_accuracy - e.ablated_accuracy);
        CHECK(e.ablated_accuracy == analysis::ablate_electrode(m, ds, c));
        worst = std::max(worst, e.delta);
    }
    CHECK(map.worst_case_delta == worst);

    const std::vector<Tensor> w1 = param_values(m);
    REQUIRE(w0.size() == w1.size());
    for (std::size_t i = 0; i < w0.size(); ++i) CHECK(w0[i].v == w1[i].v);
    CHECK(models::evaluate(m, ds).accuracy == acc0);
}

TEST_CASE("strip channels beyond the grid get row and col -1") {
    dataset::Dataset ds = toy_set(10, 5, 0.5, 0.3, 13, 2, 2);
    models::Model m = ecog_model(ds, 9);
    const analysis::AblationMap map = analysis::ablation_map(m, ds);
    REQUIRE(map.entries.size() == 5);
    CHECK(map.entries[3].row == 1);
    CHECK(map.entries[3].col == 1);
    CHECK(map.entries[4].row == -1);
    CHECK(map.entries[4].col == -1);
}

TEST_CASE("zero first-layer fan-in makes ablation of that channel invisible") {
    dataset::Dataset ds = toy_set(16, 3, 0.8, 0.5, 14);
    models::Model m = ecog_model(ds, 21);
    Tensor& w = m.ecog_tower[0].weights.value;  // [4, 3, 7]
    for (int o = 0; o < 4; ++o)
        for (int k = 0; k < 7; ++k) w.v[static_cast<std::size_t>((o * 3 + 2) * 7 + k)] = 0.0;

    const std::vector<double> p0 = models::predict(m, ds);
    dataset::Dataset copy = ds;
    dataset::ablate_channel(copy, 2);
    const std::vector<double> p1 = models::predict(m, copy);

    REQUIRE(p0.size() == p1.size());
    double change = 0.0;
    for (std::size_t i = 0; i < p0.size(); ++i) change += p1[i] - p0[i];
    CHECK(change == 0.0);
    CHECK(p0 == p1);
}

TEST_CASE("ablating every channel flattens predictions to one value") {
    dataset::Dataset ds = toy_set(20, 3, 0.8, 0.4, 15);
    models::Model m = ecog_model(ds, 23);

    dataset::Dataset copy = ds;
    for (int c = 0; c < copy.n_channels; ++c) dataset::ablate_channel(copy, c);
    const std::vector<double> p = models::predict(m, copy);
    for (double v : p) CHECK(v == p.front());

    CHECK(analysis::ablate_all(m, ds) == 0.5);
}

TEST_CASE("ablation csv has the pinned header and one row per electrode") {
    dataset::Dataset ds = toy_set(12, 3, 0.7, 0.4, 16);
    models::Model m = ecog_model(ds, 25);
    const analysis::AblationMap map = analysis::ablation_map(m, ds);

    const std::string csv = analysis::ablation_csv(map);
    std::vector<std::string> lines;
    std::istringstream in(csv);
    for (std::string l; std::getline(in, l);) lines.push_back(l);

    REQUIRE(lines.size() == map.entries.size() + 1);
    CHECK(lines[0] == "electrode_id,row,col,original_acc,ablated_acc,delta");
    char want[160];
    std::snprintf(want, sizeof want, "1,0,1,%.6f,%.6f,%.6f", map.original_accuracy,
                  map.entries[1].ablated_accuracy, map.entries[1].delta);
    CHECK(lines[2] == want);
}

TEST_CASE("gradient ascent on a 20 Hz kernel lands on a 20 Hz input") {
    models::Model m = sine_kernel_model(9);
    analysis::VizConfig cfg;
    cfg.seed = 3;
    const analysis::VizResult r = analysis::visualize_unit(m, "ecog_conv1", 0, cfg);

    CHECK_FALSE(r.dead);
    REQUIRE(r.trace.size() >= 2);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] >= r.trace[i - 1]);
    CHECK(r.trace.back() > r.trace.front());
    REQUIRE(r.input.shape == std::vector<int>{1, 1, 200});

    double norm = 0.0;
    for (double v : r.input.v) norm += v * v;
    CHECK(std::sqrt(norm) <= std::sqrt(200.0) + 1e-9);

    const std::vector<double> ps = movedec::dsp::power_spectrum(r.input.v);
    std::size_t peak = 1;
    for (std::size_t k = 2; k <= 100; ++k)
        if (ps[k] > ps[peak]) peak = k;
    const double freq = static_cast<double>(peak) * 1000.0 / 200.0;
    CHECK(freq >= 18.0);
    CHECK(freq <= 22.0);
}

TEST_CASE("the input norm stays inside the bound for every step budget") {
    models::Model m = sine_kernel_model(9);
    for (int steps : {1, 2, 3, 5, 8, 13}) {
        analysis::VizConfig cfg;
        cfg.steps = steps;
        cfg.norm_bound = 2.5;
        cfg.seed = 3;
        const analysis::VizResult r = analysis::visualize_unit(m, "ecog_conv1", 0, cfg);
        double norm = 0.0;
        for (double v : r.input.v) norm += v * v;
        CHECK(std::sqrt(norm) <= 2.5 + 1e-12);
        for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] >= r.trace[i - 1]);
    }
}

TEST_CASE("a unit with zero weights is flagged dead and the start input returned") {
    models::Model m = sine_kernel_model(9);
    Tensor& w = m.ecog_tower[0].weights.value;
    for (int k = 0; k < 101; ++k) w.v[static_cast<std::size_t>(101 + k)] = 0.0;

    analysis::VizConfig cfg;
    cfg.steps = 50;
    cfg.seed = 5;
    const analysis::VizResult r = analysis::visualize_unit(m, "ecog_conv1", 1, cfg);
    CHECK(r.dead);
    CHECK(r.trace.size() == 1);
    CHECK(r.trace[0] == 0.0);

    double norm = 0.0;
    for (double v : r.input.v) norm += v * v;
    CHECK(std::sqrt(norm) == doctest::Approx(0.01 * std::sqrt(200.0)).epsilon(1e-12));

    const analysis::VizResult again = analysis::visualize_unit(m, "ecog_conv1", 1, cfg);
    CHECK(again.input.v == r.input.v);
}

TEST_CASE("visualize_unit rejects unknown layers, units, and bad configs") {
    models::Model m = sine_kernel_model(9);
    CHECK_THROWS_AS(analysis::visualize_unit(m, "fc_merge", 0), std::invalid_argument);
    CHECK_THROWS_AS(analysis::visualize_unit(m, "ecog_conv9", 0), std::invalid_argument);
    CHECK_THROWS_AS(analysis::visualize_unit(m, "ecog_convx", 0), std::invalid_argument);
    CHECK_THROWS_AS(analysis::visualize_unit(m, "video_conv1", 0), std::invalid_argument);
    CHECK_THROWS_AS(analysis::visualize_unit(m, "ecog_conv1", 2), std::invalid_argument);
    CHECK_THROWS_AS(analysis::visualize_unit(m, "ecog_conv1", -1), std::invalid_argument);

    analysis::VizConfig bad;
    bad.steps = 0;
    CHECK_THROWS_AS(analysis::visualize_unit(m, "ecog_conv1", 0, bad), ConfigError);
    bad = {};
    bad.step_size = 0.0;
    CHECK_THROWS_AS(analysis::visualize_unit(m, "ecog_conv1", 0, bad), ConfigError);
    bad = {};
    bad.norm_bound = -1.0;
    CHECK_THROWS_AS(analysis::visualize_unit(m, "ecog_conv1", 0, bad), ConfigError);
}

TEST_CASE("save_viz writes the raw f32 input and a faithful sidecar") {
    models::Model m = sine_kernel_model(9);
    analysis::VizConfig cfg;
    cfg.steps = 5;
    cfg.seed = 3;
    const analysis::VizResult r = analysis::visualize_unit(m, "ecog_conv1", 0, cfg);

    const fs::path dir = fs::temp_directory_path() / "movedec_viz_test";
    fs::remove_all(dir);
    analysis::save_viz(r, dir);

    const fs::path raw = dir / "viz_ecog_conv1_0.f32";
    const fs::path side = dir / "viz_ecog_conv1_0.json";
    REQUIRE(fs::exists(raw));
    REQUIRE(fs::exists(side));
    CHECK(fs::file_size(raw) == r.input.v.size() * 4);

    std::ifstream fin(raw, std::ios::binary);
    for (double d : r.input.v) {
        float got = 0.0f;
        fin.read(reinterpret_cast<char*>(&got), sizeof got);
        CHECK(got == static_cast<float>(d));
    }

    nlohmann::json j;
    std::ifstream(side) >> j;
    CHECK(j.at("layer") == "ecog_conv1");
    CHECK(j.at("unit") == 0);
    CHECK(j.at("shape") == std::vector<int>{1, 1, 200});
    CHECK(j.at("dead") == false);
    REQUIRE(j.at("trace").size() == r.trace.size());
    for (std::size_t i = 0; i < r.trace.size(); ++i)
        CHECK(j.at("trace")[i].get<double>() == r.trace[i]);

    const std::string raw1 = slurp(raw);
    const std::string side1 = slurp(side);
    analysis::save_viz(r, dir);
    CHECK(slurp(raw) == raw1);
    CHECK(slurp(side) == side1);
    fs::remove_all(dir);
}

TEST_CASE("metrics files round-trip and junk is rejected") {
    const fs::path dir = fs::temp_directory_path() / "movedec_metrics_test";
    fs::remove_all(dir);
    fs::create_directories(dir);

    analysis::MetricsRecord r = rec("late_fusion", "pred", 0.8125, "ds-abc", 42);
    r.config_hash = "f00dfeed";
    r.train_acc = 0.91;
    r.valid_acc = 0.8333333333333334;
    r.epochs_ran = 37;
    r.run_index_selected = 2;
    const fs::path file = dir / "metrics.json";
    analysis::write_metrics(r, file);

    const analysis::MetricsRecord got = analysis::read_metrics(file);
    CHECK(got.variant == r.variant);
    CHECK(got.condition == r.condition);
    CHECK(got.dataset_id == r.dataset_id);
    CHECK(got.config_hash == r.config_hash);
    CHECK(got.seed == r.seed);
    CHECK(got.train_acc == r.train_acc);
    CHECK(got.valid_acc == r.valid_acc);
    CHECK(got.test_acc == r.test_acc);
    CHECK(got.epochs_ran == r.epochs_ran);
    CHECK(got.run_index_selected == r.run_index_selected);

    std::ofstream(dir / "junk.json") << "not json at all";
    CHECK_THROWS_AS(analysis::read_metrics(dir / "junk.json"), DataError);
    std::ofstream(dir / "partial.json") << R"({"variant": "x"})";
    CHECK_THROWS_AS(analysis::read_metrics(dir / "partial.json"), DataError);
    CHECK_THROWS_AS(analysis::read_metrics(dir / "absent.json"), DataError);
    fs::remove_all(dir);
}

TEST_CASE("report lays conditions by variants with per-variant averages") {
    std::vector<analysis::MetricsRecord> rs;
    rs.push_back(rec("late_fusion", "det", 0.85));
    rs.push_back(rec("late_fusion", "pred", 0.75));
    rs.push_back(rec("ecog_only", "det", 0.80));
    rs.push_back(rec("ecog_only", "pred", 0.70));
    rs.push_back(rec("late_fusion", "det", 0.87, "d0", 2));

    const analysis::Report rep = analysis::make_report(rs);

    std::vector<std::string> lines;
    std::istringstream in(rep.csv);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "condition,late_fusion,ecog_only");
    CHECK(lines[1] == "det,0.860000,0.800000");
    CHECK(lines[2] == "pred,0.750000,0.700000");
    CHECK(lines[3] == "average,0.805000,0.750000");

    CHECK(rep.text.find("dataset d0") != std::string::npos);
    CHECK(rep.text.find("late_fusion") != std::string::npos);
    CHECK(rep.text.find("0.805000") != std::string::npos);

    const analysis::Report again = analysis::make_report(rs);
    CHECK(again.csv == rep.csv);
    CHECK(again.text == rep.text);
}

TEST_CASE("report handles single records and missing cells") {
    const analysis::Report one = analysis::make_report({rec("ecog_only", "det", 0.7)});
    CHECK(one.csv == "condition,ecog_only\ndet,0.700000\naverage,0.700000\n");

    std::vector<analysis::MetricsRecord> rs;
    rs.push_back(rec("a", "det", 0.65));
    rs.push_back(rec("b", "pred", 0.55));
    const analysis::Report rep = analysis::make_report(rs);
    std::vector<std::string> lines;
    std::istringstream in(rep.csv);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "condition,a,b");
    CHECK(lines[1] == "det,0.650000,");
    CHECK(lines[2] == "pred,,0.550000");
    CHECK(lines[3] == "average,0.650000,0.550000");
    CHECK(rep.text.find('-') != std::string::npos);
}

TEST_CASE("report refuses mixed dataset identities and empty input") {
    std::vector<analysis::MetricsRecord> rs;
    rs.push_back(rec("a", "det", 0.6, "d0"));
    rs.push_back(rec("a", "pred", 0.6, "d1"));
    CHECK_THROWS_AS(analysis::make_report(rs), DataError);
    CHECK_THROWS_AS(analysis::make_report({}), DataError);
}
