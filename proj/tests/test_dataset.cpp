#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "movedec/dataset.hpp"
#include "movedec/error.hpp"
#include "movedec/rng.hpp"
#include "movedec/synth.hpp"

using namespace movedec;
using namespace movedec::dataset;

namespace {

// 80 s single-day session with 4 scheduled movements
session::Session tiny_session(std::uint64_t seed, int day = 0) {
    synth::SynthSpec spec;
    spec.n_channels = 4;
    spec.grid_rows = 2;
    spec.grid_cols = 2;
    spec.duration_s = 80.0;
    spec.n_events = 4;
    spec.seed = seed;
    spec.day = day;
    spec.session_id = "tiny-" + std::to_string(seed) + "-" + std::to_string(day);
    return synth::generate_session(spec);
}

// truth initiations plus rest events recovered from the track
std::vector<events::MovementEvent> full_events(const session::Session& s) {
    const auto smoothed = events::smooth_pose(s.pose);
    auto evs = s.truth;
    for (auto& e : events::detect_rest(smoothed)) evs.push_back(e);
    return evs;
}

}  // namespace

TEST_CASE("build: det window covers [t-500, t+500) of the bandpassed signal") {
    const auto s = tiny_session(1);
    const auto band = dsp::bandpass(s.ecog);
    const auto ds = build_dataset(s, s.truth);
    REQUIRE(ds.samples.size() == 4);
    CHECK(ds.n_channels == 4);
    CHECK(ds.window_samples == 1000);
    CHECK(ds.margin_samples == 100);
    CHECK(ds.condition == "det");

    const auto& smp = ds.samples[0];
    CHECK(smp.label == 1);
    CHECK(smp.session_id == "tiny-1-0");
    const long t = smp.t_ms;
    // extended buffer starts margin samples before the window
    for (int c = 0; c < 4; ++c) {
        const double* x = band.channel(c);
        const std::size_t base = static_cast<std::size_t>(c) * 1200;
        CHECK(smp.extended[base] == static_cast<float>(x[t - 500 - 100]));
        CHECK(smp.extended[base + 100] == static_cast<float>(x[t - 500]));
        CHECK(smp.extended[base + 1199] == static_cast<float>(x[t + 500 + 99]));
        const auto [mu, sd] = dsp::mean_std(x + (t - 4800), 3000);
        CHECK(smp.mu[static_cast<std::size_t>(c)] == mu);
        CHECK(smp.sigma[static_cast<std::size_t>(c)] == sd);
    }
}

TEST_CASE("build: prediction conditions shift the window, frames follow the window") {
    const auto s = tiny_session(2);
    const auto band = dsp::bandpass(s.ecog);

    BuildConfig pred;
    pred.condition = events::TimingCondition::pred();
    const auto dpred = build_dataset(s, s.truth, pred);
    REQUIRE(!dpred.samples.empty());
    const auto& smp = dpred.samples[0];
    const long t = smp.t_ms;
    CHECK(smp.extended[100] == static_cast<float>(band.channel(0)[t - 1300]));

    // first frame shows the middle of chunk 0: window start + 100 ms
    const long f = events::chunk_to_frame(t - 1300, 0, 30.0, 0, s.pose.n_frames);
    const auto img = synth::render_frame(s.pose, f, 32);
    for (int i = 0; i < 32 * 32; ++i)
        CHECK(smp.frames[static_cast<std::size_t>(i)] == static_cast<float>(img.v[static_cast<std::size_t>(i)]));

    BuildConfig predb;
    predb.condition = events::TimingCondition::pred_b();
    const auto dpredb = build_dataset(s, s.truth, predb);
    REQUIRE(!dpredb.samples.empty());
    CHECK(dpredb.samples[0].extended[100] ==
          static_cast<float>(band.channel(0)[dpredb.samples[0].t_ms - 1800]));
    CHECK(dpredb.condition == "pred_b");
}

TEST_CASE("build: events without full coverage are skipped with a warning") {
    const auto s = tiny_session(3);
    auto evs = s.truth;
    events::MovementEvent early;
    early.t_ms = 3000;  // neighborhood would start at -1800 ms
    early.joint = events::kRWrist;
    evs.push_back(early);

    std::ostringstream log;
    BuildConfig cfg;
    cfg.warnings = &log;
    const auto ds = build_dataset(s, evs, cfg);
    CHECK(ds.samples.size() == 4);
    CHECK(log.str().find("3000 ms") != std::string::npos);
    CHECK(log.str().find("outside the recording") != std::string::npos);
}

TEST_CASE("build: rest events near a movement are excluded, far ones kept") {
    const auto s = tiny_session(4);
    REQUIRE(s.truth.size() == 4);
    const long t0 = s.truth[0].t_ms;

    auto make_rest = [](long t) {
        events::MovementEvent e;
        e.t_ms = t;
        e.kind = events::MovementEvent::Kind::rest;
        e.joint = -1;
        return e;
    };
    std::vector<events::MovementEvent> evs = s.truth;
    evs.push_back(make_rest(t0 + 3000));   // inside the 5.5 s tail
    evs.push_back(make_rest(t0 - 1000));   // inside the 2.5 s lead
    evs.push_back(make_rest(t0 - 2600));   // clear

    std::ostringstream log;
    BuildConfig cfg;
    cfg.warnings = &log;
    const auto ds = build_dataset(s, evs, cfg);

    int rests = 0;
    for (const auto& smp : ds.samples)
        if (smp.label == 0) {
            ++rests;
            CHECK(smp.t_ms == t0 - 2600);
        }
    CHECK(rests == 1);
    CHECK(log.str().find("rest too close") != std::string::npos);
}

TEST_CASE("build: final dataset never holds contradictory labels within a second") {
    const auto s = tiny_session(5);
    const auto ds = build_dataset(s, full_events(s));
    int moves = 0, rests = 0;
    for (const auto& a : ds.samples) {
        (a.label == 1 ? moves : rests)++;
        for (const auto& b : ds.samples)
            if (a.label != b.label) CHECK(std::abs(a.t_ms - b.t_ms) >= 1000);
    }
    CHECK(moves == 4);
    CHECK(rests > 4);
}

TEST_CASE("chunks: center extraction matches the normalization oracle") {
    const auto s = tiny_session(6);
    const auto ds = build_dataset(s, s.truth);
    const auto& smp = ds.samples[1];

    const auto chunks = sample_chunks(ds, smp);
    REQUIRE(chunks.size() == 5);
    for (const auto& ch : chunks) CHECK(ch.shape == std::vector<int>{4, 200});

    // oracle: normalize the center window against the stored stats directly
    const nn::Tensor ext = ds.extended_tensor(smp);
    for (int c = 0; c < 4; ++c) {
        for (int i = 0; i < 1000; ++i) {
            const double raw = ext.v[static_cast<std::size_t>(c) * 1200 + 100 + i];
            const double want =
                (raw - smp.mu[static_cast<std::size_t>(c)]) /
                (smp.sigma[static_cast<std::size_t>(c)] + dsp::kNormEps);
            const double got = chunks[static_cast<std::size_t>(i / 200)]
                                   .v[static_cast<std::size_t>(c) * 200 + i % 200];
            CHECK(got == doctest::Approx(want).epsilon(1e-12));
        }
    }

    // augmentation with probability 1 changes the window, deterministically per seed
    dsp::AugmentConfig aug;
    aug.probability = 1.0;
    const auto a1 = sample_chunks(ds, smp, 9, &aug);
    const auto a2 = sample_chunks(ds, smp, 9, &aug);
    const auto a3 = sample_chunks(ds, smp, 10, &aug);
    CHECK(a1[0].v == a2[0].v);
    CHECK(a1[0].v != a3[0].v);
    CHECK(a1[0].v != chunks[0].v);
}

TEST_CASE("split: day partition with seeded balancing") {
    Dataset all;
    all.n_channels = 1;
    all.window_samples = 1000;
    all.margin_samples = 0;
    all.frame_size = 2;
    all.channel_means["s"] = {0.0};
    Rng rng(3);
    auto add = [&](int day, int label) {
        LabeledSample s;
        s.extended.assign(1000, 0.0f);
        s.mu = {0.0};
        s.sigma = {1.0};
        s.frames.assign(5 * 2 * 2, 0.0f);
        s.label = label;
        s.day = day;
        s.t_ms = static_cast<long>(all.samples.size());
        s.session_id = "s";
        all.samples.push_back(std::move(s));
    };
    for (int i = 0; i < 30; ++i) add(0, 1);
    for (int i = 0; i < 42; ++i) add(0, 0);
    for (int i = 0; i < 11; ++i) add(1, 1);
    for (int i = 0; i < 9; ++i) add(1, 0);
    for (int i = 0; i < 7; ++i) add(2, 1);  // day excluded from both splits

    const auto [train, test] = split_and_balance(all, {0}, 1, 77);
    int tr_move = 0, tr_rest = 0;
    for (const auto& s : train.samples) {
        CHECK(s.day == 0);
        (s.label == 1 ? tr_move : tr_rest)++;
    }
    CHECK(tr_move == 30);
    CHECK(tr_rest == 30);
    int te_move = 0, te_rest = 0;
    for (const auto& s : test.samples) {
        CHECK(s.day == 1);
        (s.label == 1 ? te_move : te_rest)++;
    }
    CHECK(te_move == 9);
    CHECK(te_rest == 9);

    // deterministic: same seed keeps the same subset
    const auto [train2, test2] = split_and_balance(all, {0}, 1, 77);
    REQUIRE(train2.samples.size() == train.samples.size());
    for (std::size_t i = 0; i < train.samples.size(); ++i)
        CHECK(train2.samples[i].t_ms == train.samples[i].t_ms);
    const auto [train3, _] = split_and_balance(all, {0}, 1, 78);
    bool same = train3.samples.size() == train.samples.size();
    if (same)
        for (std::size_t i = 0; i < train.samples.size(); ++i)
            same = same && train3.samples[i].t_ms == train.samples[i].t_ms;
    CHECK(!same);

    CHECK_THROWS_AS(split_and_balance(all, {0, 1}, 1, 1), ConfigError);
    // day 3 has no samples at all
    try {
        split_and_balance(all, {0}, 3, 1);
        FAIL("expected DataError");
    } catch (const DataError& ex) {
        const std::string msg = ex.what();
        CHECK(msg.find("test") != std::string::npos);
    }
}

TEST_CASE("ablation: channel becomes its recording mean, normalized to zero") {
    const auto s = tiny_session(7);
    auto ds = build_dataset(s, s.truth);
    const double mean = ds.channel_means.at("tiny-7-0")[2];

    ablate_channel(ds, 2);
    for (const auto& smp : ds.samples) {
        CHECK(smp.sigma[2] == 0.0);
        CHECK(smp.mu[2] == static_cast<double>(static_cast<float>(mean)));
        for (int i = 0; i < 1200; ++i)
            CHECK(smp.extended[2 * 1200 + static_cast<std::size_t>(i)] ==
                  static_cast<float>(mean));
    }
    const auto chunks = sample_chunks(ds, ds.samples[0]);
    for (const auto& ch : chunks)
        for (int i = 0; i < 200; ++i) CHECK(ch.v[2 * 200 + static_cast<std::size_t>(i)] == 0.0);
    // other channels untouched
    CHECK(ds.samples[0].sigma[1] > 0.0);

    CHECK_THROWS_AS(ablate_channel(ds, 4), std::invalid_argument);
}

TEST_CASE("append: geometry must match, sessions must be distinct") {
    const auto s0 = tiny_session(8, 0);
    const auto s1 = tiny_session(9, 1);
    auto d0 = build_dataset(s0, s0.truth);
    const auto d1 = build_dataset(s1, s1.truth);
    append(d0, d1);
    CHECK(d0.samples.size() == 8);
    CHECK(d0.channel_means.size() == 2);

    CHECK_THROWS_AS(append(d0, d1), DataError);  // same session again

    BuildConfig pred;
    pred.condition = events::TimingCondition::pred();
    const auto dp = build_dataset(s0, s0.truth, pred);
    auto d2 = build_dataset(s1, s1.truth);
    CHECK_THROWS_AS(append(d2, dp), DataError);
}

TEST_CASE("serialization: byte round trip preserves every field") {
    const auto s = tiny_session(10);
    const auto ds = build_dataset(s, full_events(s));
    const auto dir = std::filesystem::temp_directory_path() / "movedec_test";
    std::filesystem::create_directories(dir);
    const auto file = dir / "ds.bin";
    save_dataset(ds, file);
    const auto back = load_dataset(file);

    CHECK(back.n_channels == ds.n_channels);
    CHECK(back.window_samples == ds.window_samples);
    CHECK(back.margin_samples == ds.margin_samples);
    CHECK(back.frame_size == ds.frame_size);
    CHECK(back.grid_rows == 2);
    CHECK(back.condition == ds.condition);
    CHECK(back.channel_means.at("tiny-10-0") == ds.channel_means.at("tiny-10-0"));
    REQUIRE(back.samples.size() == ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        CHECK(back.samples[i].extended == ds.samples[i].extended);
        CHECK(back.samples[i].mu == ds.samples[i].mu);
        CHECK(back.samples[i].sigma == ds.samples[i].sigma);
        CHECK(back.samples[i].frames == ds.samples[i].frames);
        CHECK(back.samples[i].label == ds.samples[i].label);
        CHECK(back.samples[i].day == ds.samples[i].day);
        CHECK(back.samples[i].t_ms == ds.samples[i].t_ms);
        CHECK(back.samples[i].session_id == ds.samples[i].session_id);
    }

    // corrupt file is rejected
    {
        std::ofstream bad(file, std::ios::binary | std::ios::trunc);
        bad << "not a dataset";
    }
    CHECK_THROWS_AS(load_dataset(file), DataError);
}
