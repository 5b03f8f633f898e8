#include "movedec/cli.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>
#include <omp.h>

#include "movedec/error.hpp"
#include "movedec/rng.hpp"
#include "movedec/session.hpp"

namespace movedec::cli {

using nlohmann::json;

namespace {

void check_keys(const json& o, const std::string& block,
                std::initializer_list<const char*> allowed) {
    for (auto it = o.begin(); it != o.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw ConfigError("unknown key '" + it.key() + "' in " + block);
    }
}

template <typename T>
T get_field(const json& o, const std::string& block, const char* key, T def) {
    if (!o.contains(key)) return def;
    try {
        return o.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value for '" + std::string(key) + "' in " + block);
    }
}

std::string hex16(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_file_atomic(const std::filesystem::path& p, const std::string& content) {
    std::filesystem::create_directories(p.parent_path());
    std::filesystem::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        f << content;
        if (!f) throw DataError("write failed on " + tmp.string());
    }
    std::filesystem::rename(tmp, p);
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot open " + p.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

json parse_artifact_json(const std::filesystem::path& p) {
    try {
        return json::parse(read_file(p));
    } catch (const json::exception& e) {
        throw DataError(p.string() + " is not valid JSON: " + e.what());
    }
}

json tower_json(const std::vector<models::TowerLayer>& tower) {
    json a = json::array();
    for (const models::TowerLayer& l : tower) a.push_back({l.filters, l.kernel});
    return a;
}

std::vector<models::TowerLayer> tower_from(const json& a, const std::string& where) {
    std::vector<models::TowerLayer> tower;
    try {
        for (const json& e : a) tower.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    } catch (const json::exception&) {
        throw DataError("bad tower layout in " + where);
    }
    return tower;
}

json model_config_json(const models::ModelConfig& c) {
    json j;
    j["variant"] = models::variant_name(c.variant);
    j["ecog_tower"] = tower_json(c.ecog_tower);
    j["video_tower"] = tower_json(c.video_tower);
    j["lstm_units"] = c.lstm_units;
    j["fc_merge"] = c.fc_merge;
    j["dropout"] = c.dropout;
    j["frame_size"] = c.frame_size;
    j["seed"] = c.seed;
    return j;
}

models::ModelConfig model_config_from(const json& j, const std::string& where) {
    models::ModelConfig c;
    try {
        c.variant = models::variant_by_name(j.at("variant").get<std::string>());
        c.ecog_tower = tower_from(j.at("ecog_tower"), where);
        c.video_tower = tower_from(j.at("video_tower"), where);
        c.lstm_units = j.at("lstm_units").get<int>();
        c.fc_merge = j.at("fc_merge").get<int>();
        c.dropout = j.at("dropout").get<double>();
        c.frame_size = j.at("frame_size").get<int>();
        c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw DataError(where + " has a bad model block: " + e.what());
    }
    return c;
}

json geometry_json(const models::DataGeometry& g) {
    json j;
    j["n_channels"] = g.n_channels;
    j["chunk_samples"] = g.chunk_samples;
    j["n_chunks"] = g.n_chunks;
    j["frame_size"] = g.frame_size;
    j["grid_rows"] = g.grid_rows;
    j["grid_cols"] = g.grid_cols;
    return j;
}

models::DataGeometry geometry_from(const json& j, const std::string& where) {
    models::DataGeometry g;
    try {
        g.n_channels = j.at("n_channels").get<int>();
        g.chunk_samples = j.at("chunk_samples").get<int>();
        g.n_chunks = j.at("n_chunks").get<int>();
        g.frame_size = j.at("frame_size").get<int>();
        g.grid_rows = j.at("grid_rows").get<int>();
        g.grid_cols = j.at("grid_cols").get<int>();
    } catch (const json::exception& e) {
        throw DataError(where + " has a bad geometry block: " + e.what());
    }
    return g;
}

json meta_json(const CheckpointMeta& meta) {
    json j;
    j["config_hash"] = meta.config_hash;
    j["seed"] = meta.seed;
    j["dataset_id"] = meta.dataset_id;
    j["variant"] = meta.variant;
    j["condition"] = meta.condition;
    return j;
}

void meta_from(const json& j, const std::string& where, CheckpointMeta* meta) {
    if (!meta) return;
    try {
        meta->config_hash = j.at("config_hash").get<std::string>();
        meta->seed = j.at("seed").get<std::uint64_t>();
        meta->dataset_id = j.at("dataset_id").get<std::string>();
        meta->variant = j.at("variant").get<std::string>();
        meta->condition = j.at("condition").get<std::string>();
    } catch (const json::exception& e) {
        throw DataError(where + " has a bad meta block: " + e.what());
    }
}

// Canonical JSON for hashing: every semantic field, keys sorted by
// nlohmann's object ordering, output directory excluded.
json synth_json(const synth::SynthSpec& s) {
    json j;
    j["n_channels"] = s.n_channels;
    j["grid_rows"] = s.grid_rows;
    j["grid_cols"] = s.grid_cols;
    j["fs"] = s.fs;
    j["fps"] = s.fps;
    j["duration_s"] = s.duration_s;
    j["n_events"] = s.n_events;
    j["motor_channels"] = s.motor_channels;
    j["gamma"] = {{"band_lo_hz", s.gamma.band_lo_hz}, {"band_hi_hz", s.gamma.band_hi_hz},
                  {"amplitude", s.gamma.amplitude},   {"lead_ms", s.gamma.lead_ms},
                  {"dur_ms", s.gamma.dur_ms}};
    j["beta"] = {{"band_lo_hz", s.beta.band_lo_hz}, {"band_hi_hz", s.beta.band_hi_hz},
                 {"factor", s.beta.factor},         {"lead_ms", s.beta.lead_ms},
                 {"dur_ms", s.beta.dur_ms}};
    json drops = json::array();
    for (const auto& [a, b] : s.conf_dropouts_ms) drops.push_back({a, b});
    j["conf_dropouts_ms"] = drops;
    j["snr"] = s.snr;
    return j;
}

json sessions_json(const std::vector<SessionRef>& sessions) {
    json a = json::array();
    for (const SessionRef& s : sessions)
        a.push_back({{"id", s.id}, {"day", s.day}, {"path", s.path}});
    return a;
}

json dataset_block_json(const DatasetParams& d, int joint) {
    json j;
    j["train_days"] = d.train_days;
    j["test_day"] = d.test_day;
    j["bandpass_low_hz"] = d.build.bandpass_low_hz;
    j["bandpass_high_hz"] = d.build.bandpass_high_hz;
    j["margin_ms"] = d.build.margin_ms;
    j["frame_size"] = d.build.frame_size;
    j["neighborhood_lead_ms"] = d.build.neighborhood_lead_ms;
    j["neighborhood_len_ms"] = d.build.neighborhood_len_ms;
    j["rest_gap_after_ms"] = d.build.rest_gap_after_ms;
    j["rest_gap_before_ms"] = d.build.rest_gap_before_ms;
    j["joint"] = session::joint_name_of(joint);
    return j;
}

json dataset_scope_json(const ExperimentConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["sessions"] = sessions_json(cfg.sessions);
    j["synth"] = synth_json(cfg.synth);
    j["dataset"] = dataset_block_json(cfg.dataset, cfg.events.joint);
    return j;
}

json config_json(const ExperimentConfig& cfg) {
    json j = dataset_scope_json(cfg);
    j["variants"] = cfg.variants;
    j["conditions"] = cfg.conditions;
    j["train"] = {{"batch_size", cfg.train.batch_size},
                  {"max_epochs", cfg.train.max_epochs},
                  {"patience", cfg.train.patience},
                  {"runs", cfg.train.runs},
                  {"validation_fraction", cfg.train.validation_fraction},
                  {"augment_enabled", cfg.train.augment_enabled},
                  {"augment",
                   {{"probability", cfg.train.augment.probability},
                    {"noise_sd", cfg.train.augment.noise_sd},
                    {"max_shift_ms", cfg.train.augment.max_shift_ms}}},
                  {"optim",
                   {{"base_lr", cfg.train.optim.base_lr},
                    {"momentum", cfg.train.optim.momentum},
                    {"decay", cfg.train.optim.decay}}}};
    j["svm"] = {{"lambda_grid", cfg.svm.lambda_grid},
                {"iterations", cfg.svm.iterations},
                {"base_lr", cfg.svm.base_lr},
                {"lr_decay", cfg.svm.lr_decay}};
    j["events_manual"] = cfg.events.manual;
    j["viz"] = {{"layer", cfg.viz.layer},         {"units", cfg.viz.units},
                {"steps", cfg.viz.steps},         {"step_size", cfg.viz.step_size},
                {"norm_bound", cfg.viz.norm_bound}};
    return j;
}

// Seeds for one (variant, condition) pair hash the names so list order does
// not matter.
std::uint64_t pair_seed_of(const ExperimentConfig& cfg, const std::string& variant,
                           const std::string& condition) {
    return Rng::derive(Rng::derive(Rng::derive(cfg.seed, 700), fnv1a64(variant)),
                       fnv1a64(condition));
}

std::uint64_t split_seed_of(const ExperimentConfig& cfg, const std::string& condition) {
    return Rng::derive(Rng::derive(cfg.seed, 600), fnv1a64(condition));
}

std::string meta_comment(const ExperimentConfig& cfg) {
    return "# config_hash=" + config_hash(cfg) + " seed=" + std::to_string(cfg.seed) +
           " dataset_id=" + dataset_id(cfg) + "\n";
}

std::filesystem::path metrics_path(const ExperimentConfig& cfg, const std::string& variant,
                                   const std::string& condition) {
    return cfg.out / "metrics" / (variant + "_" + condition + ".json");
}

std::filesystem::path checkpoint_dir(const ExperimentConfig& cfg, const std::string& variant,
                                     const std::string& condition) {
    return cfg.out / "checkpoints" / (variant + "_" + condition);
}

std::vector<std::vector<double>> feature_rows(const dataset::Dataset& ds) {
    std::vector<std::vector<double>> rows;
    rows.reserve(ds.samples.size());
    for (const auto& s : ds.samples) rows.push_back(models::spectral_features(ds, s));
    return rows;
}

std::vector<int> labels_of(const dataset::Dataset& ds) {
    std::vector<int> y;
    y.reserve(ds.samples.size());
    for (const auto& s : ds.samples) y.push_back(s.label);
    return y;
}

double svm_accuracy(const models::SvmModel& m, const std::vector<std::vector<double>>& x,
                    const std::vector<int>& y) {
    if (x.empty()) throw DataError("svm evaluation needs at least one sample");
    int hit = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (models::svm_predict(m, x[i]) == y[i]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(x.size());
}

struct Agreement {
    int n_ref = 0;
    int n_det = 0;
    int matched = 0;
    long max_offset_frames = 0;
};

std::vector<long> initiation_frames(const std::vector<events::MovementEvent>& evs, double fps) {
    std::vector<long> f;
    for (const auto& e : evs)
        if (e.kind == events::MovementEvent::Kind::initiation)
            f.push_back(events::frame_of(e.t_ms, fps));
    std::sort(f.begin(), f.end());
    return f;
}

Agreement match_events(const std::vector<events::MovementEvent>& reference,
                       const std::vector<events::MovementEvent>& detected, double fps,
                       long tol_frames = 2) {
    const std::vector<long> ref = initiation_frames(reference, fps);
    const std::vector<long> det = initiation_frames(detected, fps);
    Agreement a;
    a.n_ref = static_cast<int>(ref.size());
    a.n_det = static_cast<int>(det.size());
    std::size_t i = 0, j = 0;
    while (i < ref.size() && j < det.size()) {
        const long off = det[j] - ref[i];
        if (std::labs(off) <= tol_frames) {
            ++a.matched;
            a.max_offset_frames = std::max(a.max_offset_frames, std::labs(off));
            ++i;
            ++j;
        } else if (off < 0) {
            ++j;
        } else {
            ++i;
        }
    }
    return a;
}

models::Model train_network(const ExperimentConfig& cfg, models::Variant variant,
                            const dataset::Dataset& tr, const dataset::Dataset& va,
                            std::uint64_t seed, models::TrainResult* result) {
    models::ModelConfig mc;
    mc.variant = variant;
    mc.frame_size = tr.frame_size;
    mc.seed = Rng::derive(seed, 5);
    models::Model m = models::build_model(mc, models::DataGeometry::of(tr));
    models::TrainConfig tc = cfg.train;
    tc.seed = seed;
    tc.log = nullptr;
    models::TrainResult res = models::train(m, tr, va, tc);
    const bool all_diverged =
        std::all_of(res.runs.begin(), res.runs.end(),
                    [](const models::RunHistory& h) { return h.diverged; });
    if (all_diverged)
        throw DivergenceError("every training run of " + models::variant_name(variant) +
                              " lost its loss to NaN");
    if (result) *result = std::move(res);
    return m;
}

void train_one(const ExperimentConfig& cfg, const std::string& variant,
               const std::string& condition, const dataset::Dataset& train_all,
               const dataset::Dataset& test, std::ostream& log) {
    const models::Variant v = models::variant_by_name(variant);
    const std::uint64_t pair_seed = pair_seed_of(cfg, variant, condition);
    const auto [tr, va] =
        models::split_validation(train_all, cfg.train.validation_fraction, Rng::derive(pair_seed, 3));

    CheckpointMeta meta;
    meta.config_hash = config_hash(cfg);
    meta.seed = cfg.seed;
    meta.dataset_id = dataset_id(cfg);
    meta.variant = variant;
    meta.condition = condition;

    analysis::MetricsRecord rec;
    rec.variant = variant;
    rec.condition = condition;
    rec.dataset_id = meta.dataset_id;
    rec.config_hash = meta.config_hash;
    rec.seed = cfg.seed;

    const std::filesystem::path ckdir = checkpoint_dir(cfg, variant, condition);

    if (v == models::Variant::svm_spectral) {
        const auto xtr = feature_rows(tr), xva = feature_rows(va), xte = feature_rows(test);
        const auto ytr = labels_of(tr), yva = labels_of(va), yte = labels_of(test);
        const models::SvmModel sm = models::svm_train(xtr, ytr, xva, yva, cfg.svm);
        rec.train_acc = svm_accuracy(sm, xtr, ytr);
        rec.valid_acc = svm_accuracy(sm, xva, yva);
        rec.test_acc = svm_accuracy(sm, xte, yte);
        rec.epochs_ran = cfg.svm.iterations;
        rec.run_index_selected = 0;
        save_svm_checkpoint(sm, ckdir, meta);
    } else if (v == models::Variant::naive_average) {
        models::TrainResult re, rv;
        models::Model me = train_network(cfg, models::Variant::ecog_only, tr, va,
                                         Rng::derive(pair_seed, 11), &re);
        models::Model mv = train_network(cfg, models::Variant::video_only, tr, va,
                                         Rng::derive(pair_seed, 12), &rv);
        rec.train_acc = models::evaluate_naive(me, mv, tr).accuracy;
        rec.valid_acc = models::evaluate_naive(me, mv, va).accuracy;
        rec.test_acc = models::evaluate_naive(me, mv, test).accuracy;
        rec.epochs_ran = re.epochs_ran + rv.epochs_ran;
        rec.run_index_selected = -1;
        CheckpointMeta sub = meta;
        sub.variant = "ecog_only";
        save_checkpoint(me, ckdir / "ecog", sub);
        sub.variant = "video_only";
        save_checkpoint(mv, ckdir / "video", sub);
        json j = meta_json(meta);
        j["members"] = {"ecog", "video"};
        write_file_atomic(ckdir / "model.json", j.dump(2) + "\n");
    } else {
        models::TrainResult res;
        models::Model m = train_network(cfg, v, tr, va, pair_seed, &res);
        rec.train_acc = res.train_acc;
        rec.valid_acc = res.valid_acc;
        rec.test_acc = models::evaluate(m, test).accuracy;
        rec.epochs_ran = res.epochs_ran;
        rec.run_index_selected = res.selected_run;
        save_checkpoint(m, ckdir, meta);
    }

    const std::filesystem::path mp = metrics_path(cfg, variant, condition);
    std::filesystem::create_directories(mp.parent_path());
    std::filesystem::path tmp = mp;
    tmp += ".tmp";
    analysis::write_metrics(rec, tmp);
    std::filesystem::rename(tmp, mp);
    log << "train " << variant << " " << condition << ": train " << rec.train_acc << " valid "
        << rec.valid_acc << " test " << rec.test_acc << " (" << rec.epochs_ran << " epochs)\n";
}

double test_accuracy_of(const ExperimentConfig& cfg, const std::string& variant,
                        const dataset::Dataset& test, std::size_t* n_samples) {
    const models::Variant v = models::variant_by_name(variant);
    const std::filesystem::path ckdir = checkpoint_dir(cfg, variant, test.condition);
    *n_samples = test.samples.size();
    if (v == models::Variant::svm_spectral) {
        const models::SvmModel sm = load_svm_checkpoint(ckdir);
        return svm_accuracy(sm, feature_rows(test), labels_of(test));
    }
    if (v == models::Variant::naive_average) {
        models::Model me = load_checkpoint(ckdir / "ecog");
        models::Model mv = load_checkpoint(ckdir / "video");
        return models::evaluate_naive(me, mv, test).accuracy;
    }
    models::Model m = load_checkpoint(ckdir);
    if (m.geometry.n_channels != test.n_channels)
        throw DataError("checkpoint was trained on " + std::to_string(m.geometry.n_channels) +
                        " channels, dataset has " + std::to_string(test.n_channels));
    return models::evaluate(m, test).accuracy;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void ExperimentConfig::validate() const {
    std::set<std::string> ids;
    for (const SessionRef& s : sessions) {
        if (s.id.empty()) throw ConfigError("session entries need a non-empty id");
        if (s.day < 0) throw ConfigError("session '" + s.id + "' has a negative day");
        if (!ids.insert(s.id).second)
            throw ConfigError("duplicate session id '" + s.id + "'");
    }
    synth.validate();
    train.validate();
    svm.validate();
    if (dataset.build.frame_size < 1) throw ConfigError("dataset frame_size must be positive");
    if (events.joint < 0 || events.joint >= events::kNumJoints)
        throw ConfigError("events joint is out of range");
    if (viz.steps < 1) throw ConfigError("viz steps must be at least 1");
    if (viz.step_size <= 0.0) throw ConfigError("viz step_size must be positive");
    if (viz.norm_bound < 0.0) throw ConfigError("viz norm_bound must be non-negative");
    if (viz.units.empty()) throw ConfigError("viz needs at least one unit");
    for (int u : viz.units)
        if (u < 0) throw ConfigError("viz units must be non-negative");
}

std::filesystem::path ExperimentConfig::session_dir(const SessionRef& s) const {
    return s.path.empty() ? out / "sessions" / s.id : std::filesystem::path(s.path);
}

ExperimentConfig load_config(const std::filesystem::path& file,
                             std::optional<std::uint64_t> seed_override,
                             std::optional<std::string> out_override) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file " + file.string() + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    check_keys(j, "config", {"seed", "out", "sessions", "variants", "conditions", "synth",
                             "train", "svm", "dataset", "events", "viz"});

    ExperimentConfig cfg;
    if (seed_override) {
        cfg.seed = *seed_override;
    } else if (j.contains("seed")) {
        cfg.seed = get_field<std::uint64_t>(j, "config", "seed", 1);
    } else {
        throw ConfigError("config needs a seed ('seed' field or --seed); "
                          "wall-clock seeding is not supported");
    }
    cfg.out = out_override ? *out_override : get_field<std::string>(j, "config", "out", "out");

    if (j.contains("sessions")) {
        if (!j.at("sessions").is_array()) throw ConfigError("'sessions' must be an array");
        for (const json& e : j.at("sessions")) {
            if (!e.is_object()) throw ConfigError("session entries must be objects");
            check_keys(e, "session entry", {"id", "day", "path"});
            SessionRef s;
            s.id = get_field<std::string>(e, "session entry", "id", "");
            s.day = get_field<int>(e, "session entry", "day", 0);
            s.path = get_field<std::string>(e, "session entry", "path", "");
            cfg.sessions.push_back(std::move(s));
        }
    }

    for (const std::string& name :
         get_field<std::vector<std::string>>(j, "config", "variants", {}))
        cfg.variants.push_back(models::variant_name(models::variant_by_name(name)));
    for (const std::string& name :
         get_field<std::vector<std::string>>(j, "config", "conditions", {}))
        cfg.conditions.push_back(events::TimingCondition::by_name(name).name);

    if (j.contains("synth")) {
        const json& s = j.at("synth");
        check_keys(s, "synth", {"n_channels", "grid_rows", "grid_cols", "fs", "fps",
                                "duration_s", "n_events", "motor_channels", "snr", "gamma",
                                "beta", "conf_dropouts_ms"});
        synth::SynthSpec& sp = cfg.synth;
        sp.n_channels = get_field<int>(s, "synth", "n_channels", sp.n_channels);
        sp.grid_rows = get_field<int>(s, "synth", "grid_rows", sp.grid_rows);
        sp.grid_cols = get_field<int>(s, "synth", "grid_cols", sp.grid_cols);
        sp.fs = get_field<double>(s, "synth", "fs", sp.fs);
        sp.fps = get_field<double>(s, "synth", "fps", sp.fps);
        sp.duration_s = get_field<double>(s, "synth", "duration_s", sp.duration_s);
        sp.n_events = get_field<int>(s, "synth", "n_events", sp.n_events);
        sp.motor_channels =
            get_field<std::vector<int>>(s, "synth", "motor_channels", sp.motor_channels);
        sp.snr = get_field<double>(s, "synth", "snr", sp.snr);
        if (s.contains("gamma")) {
            const json& g = s.at("gamma");
            check_keys(g, "synth.gamma",
                       {"band_lo_hz", "band_hi_hz", "amplitude", "lead_ms", "dur_ms"});
            sp.gamma.band_lo_hz = get_field<double>(g, "synth.gamma", "band_lo_hz", sp.gamma.band_lo_hz);
            sp.gamma.band_hi_hz = get_field<double>(g, "synth.gamma", "band_hi_hz", sp.gamma.band_hi_hz);
            sp.gamma.amplitude = get_field<double>(g, "synth.gamma", "amplitude", sp.gamma.amplitude);
            sp.gamma.lead_ms = get_field<long>(g, "synth.gamma", "lead_ms", sp.gamma.lead_ms);
            sp.gamma.dur_ms = get_field<long>(g, "synth.gamma", "dur_ms", sp.gamma.dur_ms);
        }
        if (s.contains("beta")) {
            const json& b = s.at("beta");
            check_keys(b, "synth.beta",
                       {"band_lo_hz", "band_hi_hz", "factor", "lead_ms", "dur_ms"});
            sp.beta.band_lo_hz = get_field<double>(b, "synth.beta", "band_lo_hz", sp.beta.band_lo_hz);
            sp.beta.band_hi_hz = get_field<double>(b, "synth.beta", "band_hi_hz", sp.beta.band_hi_hz);
            sp.beta.factor = get_field<double>(b, "synth.beta", "factor", sp.beta.factor);
            sp.beta.lead_ms = get_field<long>(b, "synth.beta", "lead_ms", sp.beta.lead_ms);
            sp.beta.dur_ms = get_field<long>(b, "synth.beta", "dur_ms", sp.beta.dur_ms);
        }
        if (s.contains("conf_dropouts_ms")) {
            try {
                for (const json& d : s.at("conf_dropouts_ms"))
                    cfg.synth.conf_dropouts_ms.emplace_back(d.at(0).get<long>(),
                                                            d.at(1).get<long>());
            } catch (const json::exception&) {
                throw ConfigError("bad value for 'conf_dropouts_ms' in synth");
            }
        }
    }

    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t, "train", {"batch_size", "max_epochs", "patience", "runs",
                                "validation_fraction", "augment_enabled", "augment", "optim"});
        models::TrainConfig& tc = cfg.train;
        tc.batch_size = get_field<int>(t, "train", "batch_size", tc.batch_size);
        tc.max_epochs = get_field<int>(t, "train", "max_epochs", tc.max_epochs);
        tc.patience = get_field<int>(t, "train", "patience", tc.patience);
        tc.runs = get_field<int>(t, "train", "runs", tc.runs);
        tc.validation_fraction =
            get_field<double>(t, "train", "validation_fraction", tc.validation_fraction);
        tc.augment_enabled = get_field<bool>(t, "train", "augment_enabled", tc.augment_enabled);
        if (t.contains("augment")) {
            const json& a = t.at("augment");
            check_keys(a, "train.augment", {"probability", "noise_sd", "max_shift_ms"});
            tc.augment.probability =
                get_field<double>(a, "train.augment", "probability", tc.augment.probability);
            tc.augment.noise_sd =
                get_field<double>(a, "train.augment", "noise_sd", tc.augment.noise_sd);
            tc.augment.max_shift_ms =
                get_field<int>(a, "train.augment", "max_shift_ms", tc.augment.max_shift_ms);
        }
        if (t.contains("optim")) {
            const json& o = t.at("optim");
            check_keys(o, "train.optim", {"base_lr", "momentum", "decay"});
            tc.optim.base_lr = get_field<double>(o, "train.optim", "base_lr", tc.optim.base_lr);
            tc.optim.momentum = get_field<double>(o, "train.optim", "momentum", tc.optim.momentum);
            tc.optim.decay = get_field<double>(o, "train.optim", "decay", tc.optim.decay);
        }
    }

    if (j.contains("svm")) {
        const json& s = j.at("svm");
        check_keys(s, "svm", {"lambda_grid", "iterations", "base_lr", "lr_decay"});
        cfg.svm.lambda_grid =
            get_field<std::vector<double>>(s, "svm", "lambda_grid", cfg.svm.lambda_grid);
        cfg.svm.iterations = get_field<int>(s, "svm", "iterations", cfg.svm.iterations);
        cfg.svm.base_lr = get_field<double>(s, "svm", "base_lr", cfg.svm.base_lr);
        cfg.svm.lr_decay = get_field<double>(s, "svm", "lr_decay", cfg.svm.lr_decay);
    }

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        check_keys(d, "dataset",
                   {"train_days", "test_day", "bandpass_low_hz", "bandpass_high_hz", "margin_ms",
                    "frame_size", "neighborhood_lead_ms", "neighborhood_len_ms",
                    "rest_gap_after_ms", "rest_gap_before_ms"});
        DatasetParams& dp = cfg.dataset;
        dp.train_days = get_field<std::vector<int>>(d, "dataset", "train_days", dp.train_days);
        dp.test_day = get_field<int>(d, "dataset", "test_day", dp.test_day);
        dp.build.bandpass_low_hz =
            get_field<double>(d, "dataset", "bandpass_low_hz", dp.build.bandpass_low_hz);
        dp.build.bandpass_high_hz =
            get_field<double>(d, "dataset", "bandpass_high_hz", dp.build.bandpass_high_hz);
        dp.build.margin_ms = get_field<int>(d, "dataset", "margin_ms", dp.build.margin_ms);
        dp.build.frame_size = get_field<int>(d, "dataset", "frame_size", dp.build.frame_size);
        dp.build.neighborhood_lead_ms =
            get_field<long>(d, "dataset", "neighborhood_lead_ms", dp.build.neighborhood_lead_ms);
        dp.build.neighborhood_len_ms =
            get_field<long>(d, "dataset", "neighborhood_len_ms", dp.build.neighborhood_len_ms);
        dp.build.rest_gap_after_ms =
            get_field<long>(d, "dataset", "rest_gap_after_ms", dp.build.rest_gap_after_ms);
        dp.build.rest_gap_before_ms =
            get_field<long>(d, "dataset", "rest_gap_before_ms", dp.build.rest_gap_before_ms);
    }

    if (j.contains("events")) {
        const json& e = j.at("events");
        check_keys(e, "events", {"joint", "manual"});
        if (e.contains("joint")) {
            const std::string name = get_field<std::string>(e, "events", "joint", "");
            try {
                cfg.events.joint = session::joint_id_of(name);
            } catch (const DataError&) {
                cfg.events.joint = -1;
            }
            if (cfg.events.joint < 0)
                throw ConfigError("unknown joint '" + name + "' in events");
        }
        cfg.events.manual = get_field<std::string>(e, "events", "manual", "");
    }

    if (j.contains("viz")) {
        const json& v = j.at("viz");
        check_keys(v, "viz", {"layer", "units", "steps", "step_size", "norm_bound"});
        cfg.viz.layer = get_field<std::string>(v, "viz", "layer", cfg.viz.layer);
        cfg.viz.units = get_field<std::vector<int>>(v, "viz", "units", cfg.viz.units);
        cfg.viz.steps = get_field<int>(v, "viz", "steps", cfg.viz.steps);
        cfg.viz.step_size = get_field<double>(v, "viz", "step_size", cfg.viz.step_size);
        cfg.viz.norm_bound = get_field<double>(v, "viz", "norm_bound", cfg.viz.norm_bound);
    }

    cfg.validate();
    return cfg;
}

std::string config_hash(const ExperimentConfig& cfg) {
    return hex16(fnv1a64(config_json(cfg).dump()));
}

std::string dataset_id(const ExperimentConfig& cfg) {
    return hex16(fnv1a64(dataset_scope_json(cfg).dump()));
}

void save_checkpoint(models::Model& m, const std::filesystem::path& dir,
                     const CheckpointMeta& meta) {
    json j = meta_json(meta);
    j["model"] = model_config_json(m.config);
    j["geometry"] = geometry_json(m.geometry);
    json manifest = json::array();
    long total = 0;
    std::string blob;
    for (auto& [name, p] : m.named_params()) {
        manifest.push_back({{"name", name}, {"shape", p->value.shape}});
        total += p->value.numel();
        blob.append(reinterpret_cast<const char*>(p->value.v.data()),
                    p->value.v.size() * sizeof(double));
    }
    j["params"] = manifest;
    j["total_values"] = total;
    write_file_atomic(dir / "model.json", j.dump(2) + "\n");
    write_file_atomic(dir / "weights.bin", blob);
}

models::Model load_checkpoint(const std::filesystem::path& dir, CheckpointMeta* meta) {
    const std::filesystem::path mj = dir / "model.json";
    const json j = parse_artifact_json(mj);
    meta_from(j, mj.string(), meta);
    if (!j.contains("model") || !j.contains("geometry") || !j.contains("params") ||
        !j.contains("total_values"))
        throw DataError(mj.string() + " is missing checkpoint fields");
    const models::ModelConfig mc = model_config_from(j.at("model"), mj.string());
    const models::DataGeometry geom = geometry_from(j.at("geometry"), mj.string());
    models::Model m = models::build_model(mc, geom);

    const auto named = m.named_params();
    const json& manifest = j.at("params");
    if (manifest.size() != named.size())
        throw DataError(mj.string() + " parameter manifest does not match the architecture");
    long total = 0;
    for (std::size_t i = 0; i < named.size(); ++i) {
        const json& e = manifest[i];
        if (e.at("name").get<std::string>() != named[i].first ||
            e.at("shape").get<std::vector<int>>() != named[i].second->value.shape)
            throw DataError(mj.string() + " parameter manifest does not match the architecture");
        total += named[i].second->value.numel();
    }
    if (j.at("total_values").get<long>() != total)
        throw DataError(mj.string() + " total_values disagrees with the manifest");

    const std::string blob = read_file(dir / "weights.bin");
    if (blob.size() != static_cast<std::size_t>(total) * sizeof(double))
        throw DataError((dir / "weights.bin").string() + " is truncated or padded: expected " +
                        std::to_string(total * sizeof(double)) + " bytes, found " +
                        std::to_string(blob.size()));
    std::size_t off = 0;
    for (auto& [name, p] : m.named_params()) {
        std::memcpy(p->value.v.data(), blob.data() + off, p->value.v.size() * sizeof(double));
        off += p->value.v.size() * sizeof(double);
    }
    return m;
}

void save_svm_checkpoint(const models::SvmModel& m, const std::filesystem::path& dir,
                         const CheckpointMeta& meta) {
    json j = meta_json(meta);
    j["w"] = m.w;
    j["b"] = m.b;
    j["lambda"] = m.lambda;
    j["feature_mu"] = m.feature_mu;
    j["feature_sd"] = m.feature_sd;
    write_file_atomic(dir / "svm.json", j.dump(2) + "\n");
}

models::SvmModel load_svm_checkpoint(const std::filesystem::path& dir, CheckpointMeta* meta) {
    const std::filesystem::path sj = dir / "svm.json";
    const json j = parse_artifact_json(sj);
    meta_from(j, sj.string(), meta);
    models::SvmModel m;
    try {
        m.w = j.at("w").get<std::vector<double>>();
        m.b = j.at("b").get<double>();
        m.lambda = j.at("lambda").get<double>();
        m.feature_mu = j.at("feature_mu").get<std::vector<double>>();
        m.feature_sd = j.at("feature_sd").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw DataError(sj.string() + " is missing svm fields: " + e.what());
    }
    if (m.feature_mu.size() != m.w.size() || m.feature_sd.size() != m.w.size())
        throw DataError(sj.string() + " has inconsistent feature layout");
    return m;
}

std::vector<events::MovementEvent> detect_events(const events::PoseTrack& pose, int joint) {
    const events::PoseTrack smoothed = events::smooth_pose(pose);
    std::vector<events::MovementEvent> evs = events::detect_initiations(smoothed, joint);
    for (const events::MovementEvent& e : events::detect_rest(smoothed)) evs.push_back(e);
    evs = events::apply_confidence_gate(smoothed, evs);
    std::stable_sort(evs.begin(), evs.end(),
                     [](const events::MovementEvent& a, const events::MovementEvent& b) {
                         return a.t_ms < b.t_ms;
                     });
    return evs;
}

void cmd_synth(const ExperimentConfig& cfg, std::ostream& log) {
    if (cfg.sessions.empty()) throw ConfigError("synth needs at least one session entry");
    for (std::size_t i = 0; i < cfg.sessions.size(); ++i) {
        const SessionRef& s = cfg.sessions[i];
        const std::filesystem::path dir = cfg.out / "sessions" / s.id;
        if (!s.path.empty() && std::filesystem::path(s.path) != dir)
            throw ConfigError("synth writes under the output directory; session '" + s.id +
                              "' has an explicit path");
        synth::SynthSpec sp = cfg.synth;
        sp.session_id = s.id;
        sp.day = s.day;
        sp.seed = Rng::derive(cfg.seed, 500 + i);
        session::Session sess = synth::generate_session(sp);
        session::write_session(sess, dir);
        json meta;
        meta["config_hash"] = config_hash(cfg);
        meta["seed"] = cfg.seed;
        meta["session_seed"] = sp.seed;
        write_file_atomic(dir / "gen.json", meta.dump(2) + "\n");
        log << "synth " << s.id << ": day " << s.day << ", " << sess.truth.size()
            << " scheduled events\n";
    }
}

void cmd_events(const ExperimentConfig& cfg, std::ostream& log) {
    if (cfg.sessions.empty()) throw ConfigError("events needs at least one session entry");
    std::vector<events::MovementEvent> manual;
    if (!cfg.events.manual.empty()) {
        if (cfg.sessions.size() != 1)
            throw ConfigError("a manual events file needs a config with exactly one session");
        manual = session::load_events_jsonl(cfg.events.manual);
    }
    const std::string meta_line =
        json{{"config_hash", config_hash(cfg)}, {"seed", cfg.seed}}.dump() + "\n";
    std::ostringstream report;
    report << meta_comment(cfg);
    int total_ref = 0, total_matched = 0, total_false = 0;
    for (const SessionRef& s : cfg.sessions) {
        const session::Session sess = session::load_session(cfg.session_dir(s));
        const auto evs = detect_events(sess.pose, cfg.events.joint);

        const std::filesystem::path tmp = cfg.out / "events" / (s.id + ".jsonl.part");
        std::filesystem::create_directories(tmp.parent_path());
        session::write_events_jsonl(tmp, evs);
        const std::string body = read_file(tmp);
        std::filesystem::remove(tmp);
        write_file_atomic(cfg.out / "events" / (s.id + ".jsonl"), meta_line + body);

        const std::vector<events::MovementEvent>& ref =
            !cfg.events.manual.empty() ? manual : sess.truth;
        if (ref.empty()) {
            report << s.id << ": no reference events\n";
            log << "events " << s.id << ": " << evs.size() << " events, no reference\n";
            continue;
        }
        const Agreement a = match_events(ref, evs, sess.manifest.fps);
        report << s.id << ": reference " << a.n_ref << " detected " << a.n_det << " matched "
               << a.matched << " missed " << (a.n_ref - a.matched) << " false_alarms "
               << (a.n_det - a.matched) << " max_offset_frames " << a.max_offset_frames << "\n";
        total_ref += a.n_ref;
        total_matched += a.matched;
        total_false += a.n_det - a.matched;
        log << "events " << s.id << ": " << evs.size() << " events, " << a.matched << "/"
            << a.n_ref << " matched\n";
    }
    if (total_ref > 0) {
        char pct[32];
        std::snprintf(pct, sizeof pct, "%.2f",
                      100.0 * static_cast<double>(total_matched) / static_cast<double>(total_ref));
        report << "total: matched " << total_matched << "/" << total_ref << " (" << pct
               << "%), false_alarms " << total_false << "\n";
    }
    write_file_atomic(cfg.out / "events" / "agreement.txt", report.str());
}

std::pair<dataset::Dataset, dataset::Dataset> ensure_dataset(const ExperimentConfig& cfg,
                                                             const std::string& condition,
                                                             std::ostream& log) {
    if (cfg.sessions.empty()) throw ConfigError("dataset needs at least one session entry");
    const std::string did = dataset_id(cfg);
    const std::filesystem::path cache = cfg.out / "cache";
    const std::filesystem::path ftrain = cache / (condition + "_" + did + "_train.bin");
    const std::filesystem::path ftest = cache / (condition + "_" + did + "_test.bin");
    if (std::filesystem::exists(ftrain) && std::filesystem::exists(ftest)) {
        log << "dataset " << condition << ": cache hit (" << did << ")\n";
        return {dataset::load_dataset(ftrain), dataset::load_dataset(ftest)};
    }

    dataset::Dataset all;
    bool first = true;
    std::set<int> days_present;
    for (const SessionRef& s : cfg.sessions) {
        days_present.insert(s.day);
        const session::Session sess = session::load_session(cfg.session_dir(s));
        const std::filesystem::path ef = cfg.out / "events" / (s.id + ".jsonl");
        const std::vector<events::MovementEvent> evs =
            std::filesystem::exists(ef) ? session::load_events_jsonl(ef)
                                        : detect_events(sess.pose, cfg.events.joint);
        dataset::BuildConfig bc = cfg.dataset.build;
        bc.condition = events::TimingCondition::by_name(condition);
        bc.warnings = &log;
        dataset::Dataset ds = dataset::build_dataset(sess, evs, bc);
        if (first) {
            all = std::move(ds);
            first = false;
        } else {
            dataset::append(all, ds);
        }
    }

    const int test_day =
        cfg.dataset.test_day >= 0 ? cfg.dataset.test_day : *days_present.rbegin();
    std::set<int> train_days(cfg.dataset.train_days.begin(), cfg.dataset.train_days.end());
    if (train_days.empty()) {
        train_days = days_present;
        train_days.erase(test_day);
    }
    if (train_days.empty())
        throw ConfigError("no training days remain once day " + std::to_string(test_day) +
                          " is held out");
    if (train_days.count(test_day))
        throw ConfigError("test day " + std::to_string(test_day) + " is also a training day");

    auto [tr, te] = dataset::split_and_balance(all, train_days, test_day,
                                               split_seed_of(cfg, condition));

    std::filesystem::create_directories(cache);
    std::filesystem::path tmp = ftrain;
    tmp += ".tmp";
    dataset::save_dataset(tr, tmp);
    std::filesystem::rename(tmp, ftrain);
    tmp = ftest;
    tmp += ".tmp";
    dataset::save_dataset(te, tmp);
    std::filesystem::rename(tmp, ftest);

    json meta;
    meta["config_hash"] = config_hash(cfg);
    meta["seed"] = cfg.seed;
    meta["dataset_id"] = did;
    meta["condition"] = condition;
    meta["train_samples"] = tr.samples.size();
    meta["test_samples"] = te.samples.size();
    write_file_atomic(cache / (condition + "_" + did + ".json"), meta.dump(2) + "\n");

    log << "dataset " << condition << ": " << tr.samples.size() << " train / "
        << te.samples.size() << " test samples\n";
    return {std::move(tr), std::move(te)};
}

void cmd_dataset(const ExperimentConfig& cfg, const std::vector<std::string>& conditions,
                 std::ostream& log) {
    for (const std::string& cond : conditions) ensure_dataset(cfg, cond, log);
}

void cmd_train(const ExperimentConfig& cfg, const std::vector<std::string>& variants,
               const std::vector<std::string>& conditions, std::ostream& log) {
    for (const std::string& cond : conditions) {
        const auto [train_all, test] = ensure_dataset(cfg, cond, log);
        for (const std::string& variant : variants)
            train_one(cfg, variant, cond, train_all, test, log);
    }
}

void cmd_evaluate(const ExperimentConfig& cfg, const std::vector<std::string>& variants,
                  const std::vector<std::string>& conditions, std::ostream& log) {
    for (const std::string& cond : conditions) {
        const auto [train_all, test] = ensure_dataset(cfg, cond, log);
        (void)train_all;
        for (const std::string& variant : variants) {
            std::size_t n = 0;
            const double acc = test_accuracy_of(cfg, variant, test, &n);
            json j;
            j["variant"] = variant;
            j["condition"] = cond;
            j["config_hash"] = config_hash(cfg);
            j["seed"] = cfg.seed;
            j["dataset_id"] = dataset_id(cfg);
            j["test_acc"] = acc;
            j["n_samples"] = n;
            write_file_atomic(cfg.out / "metrics" / (variant + "_" + cond + "_eval.json"),
                              j.dump(2) + "\n");
            log << "evaluate " << variant << " " << cond << ": " << acc << " on " << n
                << " samples\n";
        }
    }
}

void cmd_ablate(const ExperimentConfig& cfg, const std::vector<std::string>& variants,
                const std::vector<std::string>& conditions, std::ostream& log) {
    for (const std::string& cond : conditions) {
        const auto [train_all, test] = ensure_dataset(cfg, cond, log);
        (void)train_all;
        for (const std::string& variant : variants) {
            const models::Variant v = models::variant_by_name(variant);
            if (v == models::Variant::svm_spectral || v == models::Variant::naive_average)
                throw ConfigError("ablation needs a single trained network, not " + variant);
            models::Model m = load_checkpoint(checkpoint_dir(cfg, variant, cond));
            const analysis::AblationMap map = analysis::ablation_map(m, test);
            write_file_atomic(cfg.out / "ablation" / (variant + "_" + cond + ".csv"),
                              meta_comment(cfg) + analysis::ablation_csv(map));
            log << "ablate " << variant << " " << cond << ": original "
                << map.original_accuracy << ", worst-case delta " << map.worst_case_delta
                << "\n";
        }
    }
}

void cmd_viz(const ExperimentConfig& cfg, const std::vector<std::string>& variants,
             const std::vector<std::string>& conditions, std::ostream& log) {
    for (const std::string& cond : conditions) {
        for (const std::string& variant : variants) {
            const models::Variant v = models::variant_by_name(variant);
            if (v == models::Variant::svm_spectral || v == models::Variant::naive_average)
                throw ConfigError("viz needs a single trained network, not " + variant);
            models::Model m = load_checkpoint(checkpoint_dir(cfg, variant, cond));
            const std::filesystem::path dir = cfg.out / "viz" / (variant + "_" + cond);
            for (int unit : cfg.viz.units) {
                analysis::VizConfig vc;
                vc.steps = cfg.viz.steps;
                vc.step_size = cfg.viz.step_size;
                vc.norm_bound = cfg.viz.norm_bound;
                vc.seed = Rng::derive(cfg.seed, 800 + static_cast<std::uint64_t>(unit));
                const analysis::VizResult r =
                    analysis::visualize_unit(m, cfg.viz.layer, unit, vc);
                analysis::save_viz(r, dir);
                const std::filesystem::path side =
                    dir / ("viz_" + cfg.viz.layer + "_" + std::to_string(unit) + ".json");
                json j = parse_artifact_json(side);
                j["config_hash"] = config_hash(cfg);
                j["seed"] = cfg.seed;
                write_file_atomic(side, j.dump(2) + "\n");
                log << "viz " << variant << " " << cond << " " << cfg.viz.layer << "[" << unit
                    << "]: " << (r.dead ? "dead unit" : "activation " +
                                                            std::to_string(r.trace.back()))
                    << "\n";
            }
        }
    }
}

void cmd_report(const ExperimentConfig& cfg, std::ostream& log) {
    if (cfg.variants.empty() || cfg.conditions.empty())
        throw ConfigError("report needs variants and conditions in the config");
    std::vector<analysis::MetricsRecord> recs;
    for (const std::string& variant : cfg.variants)
        for (const std::string& cond : cfg.conditions) {
            const std::filesystem::path p = metrics_path(cfg, variant, cond);
            if (std::filesystem::exists(p)) recs.push_back(analysis::read_metrics(p));
        }
    if (recs.empty())
        throw DataError("no metrics found under " + (cfg.out / "metrics").string() +
                        "; run train first");
    const analysis::Report rep = analysis::make_report(recs);
    write_file_atomic(cfg.out / "report" / "report.csv", meta_comment(cfg) + rep.csv);
    write_file_atomic(cfg.out / "report" / "report.txt",
                      "config " + config_hash(cfg) + " seed " + std::to_string(cfg.seed) + "\n" +
                          rep.text);
    log << rep.text;
}

int run(const CliOptions& opt, std::ostream& log) {
    try {
        if (opt.jobs < 1) throw ConfigError("--jobs must be at least 1");
        omp_set_num_threads(opt.jobs);
        const ExperimentConfig cfg = load_config(opt.config_path, opt.seed, opt.out);

        std::vector<std::string> variants = cfg.variants;
        if (opt.variant)
            variants = {models::variant_name(models::variant_by_name(*opt.variant))};
        std::vector<std::string> conditions = cfg.conditions;
        if (opt.condition) conditions = {events::TimingCondition::by_name(*opt.condition).name};

        const bool needs_pairs = opt.command == "train" || opt.command == "evaluate" ||
                                 opt.command == "ablate" || opt.command == "viz";
        if (needs_pairs && variants.empty())
            throw ConfigError(opt.command + " needs a variant list or --variant");
        if ((needs_pairs || opt.command == "dataset") && conditions.empty())
            throw ConfigError(opt.command + " needs a condition list or --condition");

        if (opt.command == "synth") {
            cmd_synth(cfg, log);
        } else if (opt.command == "events") {
            cmd_events(cfg, log);
        } else if (opt.command == "dataset") {
            cmd_dataset(cfg, conditions, log);
        } else if (opt.command == "train") {
            cmd_train(cfg, variants, conditions, log);
        } else if (opt.command == "evaluate") {
            cmd_evaluate(cfg, variants, conditions, log);
        } else if (opt.command == "ablate") {
            cmd_ablate(cfg, variants, conditions, log);
        } else if (opt.command == "viz") {
            cmd_viz(cfg, variants, conditions, log);
        } else if (opt.command == "report") {
            cmd_report(cfg, log);
        } else {
            throw ConfigError("unknown command '" + opt.command + "'");
        }
        return 0;
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        log << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DivergenceError& e) {
        log << "numeric divergence: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        log << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace movedec::cli
