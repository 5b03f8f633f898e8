#include "movedec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "movedec/error.hpp"
#include "movedec/rng.hpp"
#include "movedec/synth.hpp"

namespace movedec::dataset {

namespace {

constexpr int kChunks = 5;

long ms_to_samples(long ms, double fs) { return std::lround(ms * fs / 1000.0); }

}  // namespace

nn::Tensor Dataset::extended_tensor(const LabeledSample& s) const {
    const int ext = window_samples + 2 * margin_samples;
    nn::Tensor t = nn::Tensor::zeros({n_channels, ext});
    if (s.extended.size() != t.v.size())
        throw ShapeError("sample buffer does not match dataset geometry");
    for (std::size_t i = 0; i < t.v.size(); ++i) t.v[i] = static_cast<double>(s.extended[i]);
    return t;
}

nn::Tensor Dataset::frames_tensor(const LabeledSample& s) const {
    nn::Tensor t = nn::Tensor::zeros({kChunks, frame_size, frame_size});
    if (s.frames.size() != t.v.size())
        throw ShapeError("sample frames do not match dataset geometry");
    for (std::size_t i = 0; i < t.v.size(); ++i) t.v[i] = static_cast<double>(s.frames[i]);
    return t;
}

void Dataset::validate() const {
    if (n_channels <= 0 || window_samples <= 0 || margin_samples < 0 || frame_size <= 0)
        throw ShapeError("dataset geometry must be positive");
    if (window_samples % kChunks != 0)
        throw ShapeError("window length must split into 5 chunks");
    const std::size_t ext =
        static_cast<std::size_t>(n_channels) * (window_samples + 2 * margin_samples);
    const std::size_t fr = static_cast<std::size_t>(kChunks) * frame_size * frame_size;
    for (const auto& s : samples) {
        if (s.extended.size() != ext || s.frames.size() != fr)
            throw ShapeError("sample buffers do not match dataset geometry");
        if (s.mu.size() != static_cast<std::size_t>(n_channels) ||
            s.sigma.size() != static_cast<std::size_t>(n_channels))
            throw ShapeError("sample stats do not match channel count");
        if (s.label != 0 && s.label != 1) throw DataError("labels must be 0 or 1");
        if (channel_means.count(s.session_id) == 0)
            throw DataError("sample references unknown session " + s.session_id);
    }
}

Dataset build_dataset(const session::Session& s, const std::vector<events::MovementEvent>& evs,
                      const BuildConfig& cfg) {
    s.manifest.validate();
    s.ecog.validate();
    if (cfg.condition.length_ms() != 1000)
        throw ConfigError("timing windows must be exactly 1000 ms long");
    if (cfg.margin_ms < 0 || cfg.frame_size <= 0) throw ConfigError("bad dataset geometry");
    if (cfg.neighborhood_len_ms < 3000)
        throw ConfigError("normalization neighborhood must cover at least 3 s");

    const double fs = s.ecog.sample_rate_hz;
    const long T = s.ecog.n_samples();
    const dsp::EcogRecording band = dsp::bandpass(s.ecog, cfg.bandpass_low_hz, cfg.bandpass_high_hz);

    Dataset ds;
    ds.n_channels = band.n_channels();
    ds.window_samples = static_cast<int>(ms_to_samples(cfg.condition.length_ms(), fs));
    ds.margin_samples = static_cast<int>(ms_to_samples(cfg.margin_ms, fs));
    ds.frame_size = cfg.frame_size;
    ds.grid_rows = s.manifest.grid_rows;
    ds.grid_cols = s.manifest.grid_cols;
    ds.condition = cfg.condition.name;
    if (ds.window_samples % kChunks != 0)
        throw ConfigError("window of " + std::to_string(ds.window_samples) +
                          " samples does not split into 5 chunks");

    std::vector<double>& means = ds.channel_means[s.manifest.session_id];
    means.resize(static_cast<std::size_t>(ds.n_channels));
    for (int c = 0; c < ds.n_channels; ++c)
        means[static_cast<std::size_t>(c)] = dsp::mean_std(band.channel(c), T).first;

    std::vector<long> initiations;
    for (const auto& e : evs)
        if (e.kind == events::MovementEvent::Kind::initiation) initiations.push_back(e.t_ms);

    auto warn = [&](long t_ms, const std::string& why) {
        if (cfg.warnings)
            *cfg.warnings << "skipping event at " << t_ms << " ms in " << s.manifest.session_id
                          << ": " << why << '\n';
    };

    for (const auto& e : evs) {
        const bool move = e.kind == events::MovementEvent::Kind::initiation;
        if (!move) {
            bool contaminated = false;
            for (long ti : initiations) {
                const long after = e.t_ms - ti;  // rest following the initiation
                const long before = ti - e.t_ms;
                if ((after >= 0 && after < cfg.rest_gap_after_ms) ||
                    (before > 0 && before < cfg.rest_gap_before_ms)) {
                    contaminated = true;
                    break;
                }
            }
            if (contaminated) {
                warn(e.t_ms, "rest too close to a movement");
                continue;
            }
        }

        const long win_lo = ms_to_samples(e.t_ms + cfg.condition.window_start_ms, fs);
        const long ext_lo = win_lo - ds.margin_samples;
        const long ext_hi = win_lo + ds.window_samples + ds.margin_samples;
        const long nb_lo = ms_to_samples(e.t_ms - cfg.neighborhood_lead_ms - cfg.neighborhood_len_ms, fs);
        const long nb_hi = ms_to_samples(e.t_ms - cfg.neighborhood_lead_ms, fs);
        if (ext_lo < 0 || ext_hi > T || nb_lo < 0 || nb_hi > T) {
            warn(e.t_ms, "window or neighborhood outside the recording");
            continue;
        }

        LabeledSample sample;
        sample.label = move ? 1 : 0;
        sample.day = s.manifest.day;
        sample.t_ms = e.t_ms;
        sample.session_id = s.manifest.session_id;

        bool frames_ok = true;
        for (int k = 0; k < kChunks && frames_ok; ++k) {
            try {
                const long f = events::chunk_to_frame(e.t_ms + cfg.condition.window_start_ms, k,
                                                      s.manifest.fps, s.manifest.alignment_frame,
                                                      s.pose.n_frames);
                const nn::Tensor img = synth::render_frame(s.pose, f, cfg.frame_size);
                for (double v : img.v) sample.frames.push_back(static_cast<float>(v));
            } catch (const std::out_of_range&) {
                frames_ok = false;
            }
        }
        if (!frames_ok) {
            warn(e.t_ms, "video frames outside the track");
            continue;
        }

        const long ext_len = ext_hi - ext_lo;
        sample.extended.reserve(static_cast<std::size_t>(ds.n_channels * ext_len));
        for (int c = 0; c < ds.n_channels; ++c) {
            const double* x = band.channel(c);
            for (long t = ext_lo; t < ext_hi; ++t)
                sample.extended.push_back(static_cast<float>(x[t]));
            const auto [mu, sd] = dsp::mean_std(x + nb_lo, nb_hi - nb_lo);
            sample.mu.push_back(mu);
            sample.sigma.push_back(sd);
        }
        ds.samples.push_back(std::move(sample));
    }
    return ds;
}

void append(Dataset& dst, const Dataset& src) {
    if (dst.samples.empty() && dst.channel_means.empty()) {
        dst = src;
        return;
    }
    if (dst.n_channels != src.n_channels || dst.window_samples != src.window_samples ||
        dst.margin_samples != src.margin_samples || dst.frame_size != src.frame_size ||
        dst.condition != src.condition || dst.grid_rows != src.grid_rows ||
        dst.grid_cols != src.grid_cols)
        throw DataError("cannot merge datasets with different geometry or condition");
    for (const auto& [id, means] : src.channel_means) {
        if (dst.channel_means.count(id) != 0)
            throw DataError("session " + id + " appears in both datasets");
        dst.channel_means[id] = means;
    }
    dst.samples.insert(dst.samples.end(), src.samples.begin(), src.samples.end());
}

namespace {

void balance_split(std::vector<LabeledSample>& samples, const std::string& split_name, Rng& rng) {
    std::vector<std::size_t> move, rest;
    for (std::size_t i = 0; i < samples.size(); ++i)
        (samples[i].label == 1 ? move : rest).push_back(i);
    if (move.empty())
        throw DataError(split_name + " split has no initiation samples");
    if (rest.empty()) throw DataError(split_name + " split has no rest samples");

    std::vector<std::size_t>& major = move.size() > rest.size() ? move : rest;
    const std::size_t keep = std::min(move.size(), rest.size());
    for (std::size_t i = major.size() - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<long>(i)));
        std::swap(major[i], major[j]);
    }
    major.resize(keep);

    std::vector<std::size_t> kept;
    kept.reserve(2 * keep);
    kept.insert(kept.end(), move.begin(), move.end());
    kept.insert(kept.end(), rest.begin(), rest.end());
    std::sort(kept.begin(), kept.end());
    std::vector<LabeledSample> out;
    out.reserve(kept.size());
    for (std::size_t i : kept) out.push_back(std::move(samples[i]));
    samples = std::move(out);
}

}  // namespace

std::pair<Dataset, Dataset> split_and_balance(const Dataset& all, const std::set<int>& train_days,
                                              int test_day, std::uint64_t seed) {
    if (train_days.count(test_day) != 0)
        throw ConfigError("test day " + std::to_string(test_day) + " is also a train day");
    if (train_days.empty()) throw ConfigError("no train days given");

    Dataset train = all, test = all;
    train.samples.clear();
    test.samples.clear();
    for (const auto& s : all.samples) {
        if (s.day == test_day) {
            test.samples.push_back(s);
        } else if (train_days.count(s.day) != 0) {
            train.samples.push_back(s);
        }
    }

    Rng train_rng(Rng::derive(seed, 101));
    Rng test_rng(Rng::derive(seed, 102));
    balance_split(train.samples, "train", train_rng);
    balance_split(test.samples, "test", test_rng);
    return {std::move(train), std::move(test)};
}

std::vector<nn::Tensor> sample_chunks(const Dataset& ds, const LabeledSample& s,
                                      std::uint64_t aug_seed, const dsp::AugmentConfig* aug) {
    dsp::AugmentConfig cfg;
    if (aug) {
        cfg = *aug;
    } else {
        cfg.probability = 0.0;
    }
    const nn::Tensor win =
        dsp::augment(ds.extended_tensor(s), ds.margin_samples, s.mu, s.sigma, aug_seed, cfg);
    return dsp::chunk_window(win, kChunks);
}

void ablate_channel(Dataset& ds, int channel) {
    if (channel < 0 || channel >= ds.n_channels)
        throw std::invalid_argument("channel " + std::to_string(channel) + " out of range");
    const int ext = ds.window_samples + 2 * ds.margin_samples;
    for (auto& s : ds.samples) {
        const double mean = ds.channel_means.at(s.session_id)[static_cast<std::size_t>(channel)];
        const std::size_t base = static_cast<std::size_t>(channel) * ext;
        std::fill(s.extended.begin() + static_cast<std::ptrdiff_t>(base),
                  s.extended.begin() + static_cast<std::ptrdiff_t>(base + ext),
                  static_cast<float>(mean));
        s.mu[static_cast<std::size_t>(channel)] = static_cast<double>(static_cast<float>(mean));
        s.sigma[static_cast<std::size_t>(channel)] = 0.0;
    }
}

namespace {

template <typename T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

void put_string(std::ofstream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& in) {
    const auto n = get<std::uint32_t>(in);
    if (n > (1u << 20)) throw DataError("corrupt dataset file: oversized string");
    std::string s(n, '\0');
    in.read(s.data(), n);
    return s;
}

template <typename T>
void put_vec(std::ofstream& out, const std::vector<T>& v) {
    put<std::uint64_t>(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
std::vector<T> get_vec(std::ifstream& in, std::size_t expect) {
    const auto n = get<std::uint64_t>(in);
    if (n != expect) throw DataError("corrupt dataset file: array size mismatch");
    std::vector<T> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    return v;
}

constexpr std::uint32_t kMagic = 0x4d444453;  // "MDDS"
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& file) {
    ds.validate();
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + file.string() + " for writing");
    put(out, kMagic);
    put(out, kVersion);
    put_string(out, ds.condition);
    put<std::int32_t>(out, ds.n_channels);
    put<std::int32_t>(out, ds.window_samples);
    put<std::int32_t>(out, ds.margin_samples);
    put<std::int32_t>(out, ds.frame_size);
    put<std::int32_t>(out, ds.grid_rows);
    put<std::int32_t>(out, ds.grid_cols);
    put<std::uint64_t>(out, ds.channel_means.size());
    for (const auto& [id, means] : ds.channel_means) {
        put_string(out, id);
        put_vec(out, means);
    }
    put<std::uint64_t>(out, ds.samples.size());
    for (const auto& s : ds.samples) {
        put<std::int32_t>(out, s.label);
        put<std::int32_t>(out, s.day);
        put<std::int64_t>(out, s.t_ms);
        put_string(out, s.session_id);
        put_vec(out, s.extended);
        put_vec(out, s.mu);
        put_vec(out, s.sigma);
        put_vec(out, s.frames);
    }
    if (!out) throw DataError("write failed on " + file.string());
}

Dataset load_dataset(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open " + file.string() + " for reading");
    if (get<std::uint32_t>(in) != kMagic) throw DataError(file.string() + ": not a dataset file");
    if (get<std::uint32_t>(in) != kVersion)
        throw DataError(file.string() + ": unsupported dataset version");

    Dataset ds;
    ds.condition = get_string(in);
    ds.n_channels = get<std::int32_t>(in);
    ds.window_samples = get<std::int32_t>(in);
    ds.margin_samples = get<std::int32_t>(in);
    ds.frame_size = get<std::int32_t>(in);
    ds.grid_rows = get<std::int32_t>(in);
    ds.grid_cols = get<std::int32_t>(in);
    if (ds.n_channels <= 0 || ds.window_samples <= 0 || ds.margin_samples < 0 ||
        ds.frame_size <= 0)
        throw DataError(file.string() + ": corrupt geometry");

    const auto n_sessions = get<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < n_sessions; ++i) {
        const std::string id = get_string(in);
        ds.channel_means[id] =
            get_vec<double>(in, static_cast<std::size_t>(ds.n_channels));
    }

    const std::size_t ext =
        static_cast<std::size_t>(ds.n_channels) * (ds.window_samples + 2 * ds.margin_samples);
    const std::size_t fr = static_cast<std::size_t>(kChunks) * ds.frame_size * ds.frame_size;
    const auto n_samples = get<std::uint64_t>(in);
    ds.samples.reserve(n_samples);
    for (std::uint64_t i = 0; i < n_samples; ++i) {
        LabeledSample s;
        s.label = get<std::int32_t>(in);
        s.day = get<std::int32_t>(in);
        s.t_ms = get<std::int64_t>(in);
        s.session_id = get_string(in);
        s.extended = get_vec<float>(in, ext);
        s.mu = get_vec<double>(in, static_cast<std::size_t>(ds.n_channels));
        s.sigma = get_vec<double>(in, static_cast<std::size_t>(ds.n_channels));
        s.frames = get_vec<float>(in, fr);
        ds.samples.push_back(std::move(s));
    }
    if (!in) throw DataError(file.string() + ": truncated dataset file");
    ds.validate();
    return ds;
}

}  // namespace movedec::dataset
