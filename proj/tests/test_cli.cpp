#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "movedec/cli.hpp"
#include "movedec/error.hpp"
#include "movedec/session.hpp"

using namespace movedec;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
    const auto dir = fs::temp_directory_path() / "movedec_test_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

json tiny_config(const fs::path& out) {
    json j;
    j["seed"] = 11;
    j["out"] = out.string();
    j["sessions"] = {{{"id", "s0"}, {"day", 0}}, {{"id", "s1"}, {"day", 1}}};
    j["variants"] = {"lstm_only"};
    j["conditions"] = {"det"};
    j["synth"] = {{"n_channels", 4}, {"grid_rows", 2}, {"grid_cols", 2},
                  {"duration_s", 120.0}, {"n_events", 6},  {"snr", 4.0}};
    j["train"] = {{"max_epochs", 2}, {"runs", 1}, {"patience", 2}, {"batch_size", 4}};
    j["viz"] = {{"layer", "ecog_conv1"}, {"units", json::array({0})}, {"steps", 6}};
    return j;
}

fs::path write_config(const fs::path& dir, const json& j, const char* name = "cfg.json") {
    const fs::path p = dir / name;
    std::ofstream(p) << j.dump(2) << "\n";
    return p;
}

int run_cmd(const std::string& command, const fs::path& config, std::ostream* log = nullptr) {
    cli::CliOptions opt;
    opt.command = command;
    opt.config_path = config;
    std::ostringstream sink;
    return cli::run(opt, log ? *log : sink);
}

void run_pipeline(const fs::path& config, std::initializer_list<const char*> commands) {
    for (const char* c : commands) REQUIRE(run_cmd(c, config) == 0);
}

}  // namespace

TEST_CASE("config loading fills defaults and rejects malformed input") {
    const fs::path dir = temp_dir("config");
    const fs::path minimal = write_config(dir, json{{"seed", 5}}, "minimal.json");
    const cli::ExperimentConfig cfg = cli::load_config(minimal);
    CHECK(cfg.seed == 5);
    CHECK(cfg.out == fs::path("out"));
    CHECK(cfg.sessions.empty());
    CHECK(cfg.synth.n_channels == 64);
    CHECK(cfg.train.batch_size == 24);
    CHECK(cfg.dataset.build.frame_size == 32);
    CHECK(cfg.viz.layer == "ecog_conv1");

    const cli::ExperimentConfig overridden = cli::load_config(minimal, 9, "elsewhere");
    CHECK(overridden.seed == 9);
    CHECK(overridden.out == fs::path("elsewhere"));

    CHECK_THROWS_AS(cli::load_config(dir / "absent.json"), ConfigError);
    CHECK_THROWS_AS(cli::load_config(write_config(dir, json{{"seed", 1}, {"bogus", 2}}, "a.json")),
                    ConfigError);
    CHECK_THROWS_AS(cli::load_config(write_config(dir, json{{"out", "x"}}, "b.json")),
                    ConfigError);
    CHECK(cli::load_config(write_config(dir, json{{"out", "x"}}, "b2.json"), 3).seed == 3);

    json bad_synth{{"seed", 1}, {"synth", {{"n_channel", 4}}}};
    CHECK_THROWS_AS(cli::load_config(write_config(dir, bad_synth, "c.json")), ConfigError);
    json bad_aug{{"seed", 1}, {"train", {{"augment", {{"nois_sd", 0.1}}}}}};
    CHECK_THROWS_AS(cli::load_config(write_config(dir, bad_aug, "d.json")), ConfigError);
    json bad_type{{"seed", 1}, {"train", {{"batch_size", "lots"}}}};
    CHECK_THROWS_AS(cli::load_config(write_config(dir, bad_type, "e.json")), ConfigError);
    json dup{{"seed", 1}, {"sessions", {{{"id", "a"}, {"day", 0}}, {{"id", "a"}, {"day", 1}}}}};
    CHECK_THROWS_AS(cli::load_config(write_config(dir, dup, "f.json")), ConfigError);
    json neg_day{{"seed", 1}, {"sessions", {{{"id", "a"}, {"day", -2}}}}};
    CHECK_THROWS_AS(cli::load_config(write_config(dir, neg_day, "g.json")), ConfigError);
    json bad_joint{{"seed", 1}, {"events", {{"joint", "r_elbow_v2"}}}};
    CHECK_THROWS_AS(cli::load_config(write_config(dir, bad_joint, "h.json")), ConfigError);
    json bad_variant{{"seed", 1}, {"variants", {"super_fusion"}}};
    CHECK_THROWS_AS(cli::load_config(write_config(dir, bad_variant, "i.json")), ConfigError);
    json bad_cond{{"seed", 1}, {"conditions", {"soon"}}};
    CHECK_THROWS_AS(cli::load_config(write_config(dir, bad_cond, "j.json")),
                    std::invalid_argument);
}

TEST_CASE("config hash ignores the output directory and dataset id ignores variants") {
    const fs::path dir = temp_dir("hash");
    json a = tiny_config(dir / "out_a");
    json b = tiny_config(dir / "out_b");
    const cli::ExperimentConfig ca = cli::load_config(write_config(dir, a, "a.json"));
    const cli::ExperimentConfig cb = cli::load_config(write_config(dir, b, "b.json"));
    CHECK(cli::config_hash(ca) == cli::config_hash(cb));
    CHECK(cli::dataset_id(ca) == cli::dataset_id(cb));
    CHECK(cli::config_hash(ca).size() == 16);

    json c = tiny_config(dir / "out_a");
    c["seed"] = 12;
    const cli::ExperimentConfig cc = cli::load_config(write_config(dir, c, "c.json"));
    CHECK(cli::config_hash(cc) != cli::config_hash(ca));
    CHECK(cli::dataset_id(cc) != cli::dataset_id(ca));

    json d = tiny_config(dir / "out_a");
    d["variants"] = {"lstm_only", "ecog_only"};
    const cli::ExperimentConfig cd = cli::load_config(write_config(dir, d, "d.json"));
    CHECK(cli::config_hash(cd) != cli::config_hash(ca));
    CHECK(cli::dataset_id(cd) == cli::dataset_id(ca));

    json e = tiny_config(dir / "out_a");
    e["synth"]["snr"] = 1.5;
    const cli::ExperimentConfig ce = cli::load_config(write_config(dir, e, "e.json"));
    CHECK(cli::dataset_id(ce) != cli::dataset_id(ca));
}

TEST_CASE("synth writes session files plus generation metadata under the out dir") {
    const fs::path dir = temp_dir("synth");
    const fs::path cfg_path = write_config(dir, tiny_config(dir / "out"));
    REQUIRE(run_cmd("synth", cfg_path) == 0);
    for (const char* id : {"s0", "s1"}) {
        const fs::path sd = dir / "out" / "sessions" / id;
        for (const char* f : {"manifest.json", "ecog.f32", "pose.csv", "truth.jsonl", "gen.json"})
            CHECK(fs::exists(sd / f));
        const json gen = json::parse(slurp(sd / "gen.json"));
        CHECK(gen.at("seed") == 11);
        CHECK(gen.at("config_hash").get<std::string>().size() == 16);
        CHECK(gen.contains("session_seed"));
    }

    json explicit_path = tiny_config(dir / "out");
    explicit_path["sessions"] = {{{"id", "s0"}, {"day", 0}, {"path", (dir / "elsewhere").string()}}};
    CHECK(run_cmd("synth", write_config(dir, explicit_path, "ep.json")) == 2);
}

TEST_CASE("events emits a metadata line the loader skips and scores full agreement") {
    const fs::path dir = temp_dir("events");
    const fs::path cfg_path = write_config(dir, tiny_config(dir / "out"));
    run_pipeline(cfg_path, {"synth", "events"});

    const fs::path ef = dir / "out" / "events" / "s0.jsonl";
    const std::string text = slurp(ef);
    const json first = json::parse(text.substr(0, text.find('\n')));
    CHECK(first.contains("config_hash"));
    CHECK(first.at("seed") == 11);
    CHECK_FALSE(first.contains("t_ms"));

    std::size_t lines = 0;
    for (char ch : text)
        if (ch == '\n') ++lines;
    const auto evs = session::load_events_jsonl(ef);
    CHECK(evs.size() == lines - 1);
    CHECK(!evs.empty());

    const std::string agreement = slurp(dir / "out" / "events" / "agreement.txt");
    CHECK(agreement.rfind("# config_hash=", 0) == 0);
    CHECK(agreement.find("(100.00%), false_alarms 0") != std::string::npos);
}

TEST_CASE("events jsonl loader ignores lines without a timestamp key") {
    const fs::path dir = temp_dir("jsonl_meta");
    const fs::path f = dir / "mixed.jsonl";
    std::ofstream(f) << R"({"config_hash":"deadbeef","seed":4})" << "\n"
                     << R"({"t_ms":1200,"kind":"initiation","joint":"r_wrist","source":"auto"})"
                     << "\n"
                     << R"({"note":"another header"})" << "\n"
                     << R"({"t_ms":2400,"kind":"rest","joint":"","source":"auto"})" << "\n";
    const auto evs = session::load_events_jsonl(f);
    REQUIRE(evs.size() == 2);
    CHECK(evs[0].t_ms == 1200);
    CHECK(evs[1].t_ms == 2400);
}

TEST_CASE("dataset command caches splits keyed by dataset id and reuses them") {
    const fs::path dir = temp_dir("dataset");
    const fs::path cfg_path = write_config(dir, tiny_config(dir / "out"));
    run_pipeline(cfg_path, {"synth", "events", "dataset"});

    const cli::ExperimentConfig cfg = cli::load_config(cfg_path);
    const std::string did = cli::dataset_id(cfg);
    const fs::path ftrain = dir / "out" / "cache" / ("det_" + did + "_train.bin");
    const fs::path ftest = dir / "out" / "cache" / ("det_" + did + "_test.bin");
    REQUIRE(fs::exists(ftrain));
    REQUIRE(fs::exists(ftest));
    const json meta = json::parse(slurp(dir / "out" / "cache" / ("det_" + did + ".json")));
    CHECK(meta.at("dataset_id") == did);
    CHECK(meta.at("train_samples").get<int>() > 0);

    const std::string before = slurp(ftrain);
    std::ostringstream log;
    REQUIRE(run_cmd("dataset", cfg_path, &log) == 0);
    CHECK(log.str().find("cache hit") != std::string::npos);
    CHECK(slurp(ftrain) == before);
}

TEST_CASE("train writes metrics and a checkpoint that reproduces the scored accuracy") {
    const fs::path dir = temp_dir("train");
    const fs::path cfg_path = write_config(dir, tiny_config(dir / "out"));
    run_pipeline(cfg_path, {"synth", "events", "train"});

    const fs::path mp = dir / "out" / "metrics" / "lstm_only_det.json";
    const analysis::MetricsRecord rec = analysis::read_metrics(mp);
    CHECK(rec.variant == "lstm_only");
    CHECK(rec.condition == "det");
    CHECK(rec.seed == 11);
    CHECK(rec.config_hash.size() == 16);
    CHECK(rec.epochs_ran >= 1);
    CHECK(rec.run_index_selected == 0);
    CHECK(rec.test_acc >= 0.0);
    CHECK(rec.test_acc <= 1.0);

    const cli::ExperimentConfig cfg = cli::load_config(cfg_path);
    cli::CheckpointMeta meta;
    models::Model m =
        cli::load_checkpoint(dir / "out" / "checkpoints" / "lstm_only_det", &meta);
    CHECK(meta.variant == "lstm_only");
    CHECK(meta.condition == "det");
    CHECK(meta.dataset_id == rec.dataset_id);
    const fs::path ftest =
        dir / "out" / "cache" / ("det_" + cli::dataset_id(cfg) + "_test.bin");
    const dataset::Dataset test = dataset::load_dataset(ftest);
    CHECK(models::evaluate(m, test).accuracy == rec.test_acc);
}

TEST_CASE("svm and naive variants round-trip through their checkpoints") {
    const fs::path dir = temp_dir("variants");
    json j = tiny_config(dir / "out");
    j["variants"] = {"svm_spectral", "naive_average"};
    const fs::path cfg_path = write_config(dir, j);
    run_pipeline(cfg_path, {"synth", "events", "train", "evaluate"});

    for (const char* v : {"svm_spectral", "naive_average"}) {
        const fs::path mp = dir / "out" / "metrics" / (std::string(v) + "_det.json");
        const analysis::MetricsRecord rec = analysis::read_metrics(mp);
        const json ev = json::parse(
            slurp(dir / "out" / "metrics" / (std::string(v) + "_det_eval.json")));
        CHECK(ev.at("test_acc").get<double>() == rec.test_acc);
        CHECK(ev.at("n_samples").get<int>() > 0);
    }

    const fs::path nd = dir / "out" / "checkpoints" / "naive_average_det";
    const json top = json::parse(slurp(nd / "model.json"));
    CHECK(top.at("members") == json({"ecog", "video"}));
    CHECK(fs::exists(nd / "ecog" / "weights.bin"));
    CHECK(fs::exists(nd / "video" / "weights.bin"));

    cli::CheckpointMeta meta;
    const models::SvmModel sm =
        cli::load_svm_checkpoint(dir / "out" / "checkpoints" / "svm_spectral_det", &meta);
    CHECK(meta.variant == "svm_spectral");
    CHECK(sm.w.size() == sm.feature_mu.size());
    CHECK(sm.lambda > 0.0);
}

TEST_CASE("ablate and viz write annotated artifacts for a trained network") {
    const fs::path dir = temp_dir("ablate_viz");
    json j = tiny_config(dir / "out");
    j["variants"] = {"ecog_only"};
    const fs::path cfg_path = write_config(dir, j);
    run_pipeline(cfg_path, {"synth", "events", "train", "ablate", "viz"});

    const std::string csv = slurp(dir / "out" / "ablation" / "ecog_only_det.csv");
    CHECK(csv.rfind("# config_hash=", 0) == 0);
    std::size_t lines = 0;
    for (char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == 2 + 4);

    const fs::path vd = dir / "out" / "viz" / "ecog_only_det";
    CHECK(fs::exists(vd / "viz_ecog_conv1_0.f32"));
    const json side = json::parse(slurp(vd / "viz_ecog_conv1_0.json"));
    CHECK(side.at("config_hash").get<std::string>().size() == 16);
    CHECK(side.at("seed") == 11);
    CHECK(side.at("layer") == "ecog_conv1");
}

TEST_CASE("report tabulates stored metrics with a meta header") {
    const fs::path dir = temp_dir("report");
    json j = tiny_config(dir / "out");
    j["conditions"] = {"det", "pred"};
    const fs::path cfg_path = write_config(dir, j);
    run_pipeline(cfg_path, {"synth", "events", "train", "report"});

    const std::string csv = slurp(dir / "out" / "report" / "report.csv");
    CHECK(csv.rfind("# config_hash=", 0) == 0);
    std::size_t lines = 0;
    for (char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == 1 + 1 + 2 + 1);
    CHECK(csv.find("\ndet,") != std::string::npos);
    CHECK(csv.find("\npred,") != std::string::npos);
    CHECK(csv.find("\naverage,") != std::string::npos);
    const std::string txt = slurp(dir / "out" / "report" / "report.txt");
    CHECK(txt.rfind("config ", 0) == 0);

    const fs::path empty_out = temp_dir("report_empty");
    json k = tiny_config(empty_out / "out");
    CHECK(run_cmd("report", write_config(empty_out, k)) == 3);
}

TEST_CASE("run maps error classes to distinct exit codes") {
    const fs::path dir = temp_dir("codes");
    CHECK(run_cmd("synth", dir / "missing.json") == 2);

    json missing_session = tiny_config(dir / "out");
    const fs::path cfg_path = write_config(dir, missing_session);
    CHECK(run_cmd("train", cfg_path) == 3);

    run_pipeline(cfg_path, {"synth", "events", "train"});
    CHECK(run_cmd("viz", cfg_path) == 2);

    const fs::path wb = dir / "out" / "checkpoints" / "lstm_only_det" / "weights.bin";
    const std::string blob = slurp(wb);
    std::ofstream(wb, std::ios::binary) << blob.substr(0, 64);
    CHECK(run_cmd("evaluate", cfg_path) == 3);

    cli::CliOptions opt;
    opt.command = "train";
    opt.config_path = cfg_path;
    opt.variant = "no_such_model";
    std::ostringstream sink;
    CHECK(cli::run(opt, sink) == 2);
    opt.variant.reset();
    opt.jobs = 0;
    CHECK(cli::run(opt, sink) == 2);
}

TEST_CASE("identical config and seed give byte-identical artifacts in fresh out dirs") {
    const fs::path dir = temp_dir("determinism");
    json base = tiny_config(dir / "ignored");
    const fs::path cfg_path = write_config(dir, base);

    for (const char* out : {"run1", "run2"}) {
        cli::CliOptions opt;
        opt.config_path = cfg_path;
        opt.out = (dir / out).string();
        std::ostringstream sink;
        for (const char* c : {"synth", "events", "dataset", "train", "report"}) {
            opt.command = c;
            REQUIRE(cli::run(opt, sink) == 0);
        }
    }
    for (const char* rel : {"metrics/lstm_only_det.json", "report/report.csv",
                            "checkpoints/lstm_only_det/weights.bin", "events/agreement.txt"})
        CHECK(slurp(dir / "run1" / rel) == slurp(dir / "run2" / rel));
}
