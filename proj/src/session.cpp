#include "movedec/session.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "movedec/error.hpp"

namespace movedec::session {

using json = nlohmann::json;

void SessionManifest::validate() const {
    if (session_id.empty()) throw ConfigError("session_id must not be empty");
    if (fs <= 0.0 || fps <= 0.0) throw ConfigError("fs and fps must be positive");
    if (n_channels <= 0) throw ConfigError("n_channels must be positive");
    if (grid_rows <= 0 || grid_cols <= 0) throw ConfigError("grid dimensions must be positive");
    if (grid_rows * grid_cols > n_channels)
        throw ConfigError("grid " + std::to_string(grid_rows) + "x" + std::to_string(grid_cols) +
                          " does not fit in " + std::to_string(n_channels) + " channels");
    if (day < 0) throw ConfigError("day index must be nonnegative");
}

std::vector<dsp::ChannelMeta> channel_layout(const SessionManifest& m) {
    std::vector<dsp::ChannelMeta> metas(static_cast<std::size_t>(m.n_channels));
    const int grid = m.grid_rows * m.grid_cols;
    for (int c = 0; c < m.n_channels; ++c) {
        dsp::ChannelMeta& meta = metas[static_cast<std::size_t>(c)];
        if (c < grid) {
            meta.row = c / m.grid_cols;
            meta.col = c % m.grid_cols;
        } else {
            meta.strip = c - grid;
        }
    }
    return metas;
}

std::string joint_name_of(int joint) {
    if (joint < 0) return "";
    if (joint >= events::kNumJoints)
        throw std::invalid_argument("joint id " + std::to_string(joint) + " out of range");
    return events::kJointNames[static_cast<std::size_t>(joint)];
}

int joint_id_of(const std::string& name) {
    if (name.empty()) return -1;
    for (int j = 0; j < events::kNumJoints; ++j)
        if (name == events::kJointNames[static_cast<std::size_t>(j)]) return j;
    throw DataError("unknown joint name '" + name + "'");
}

namespace {

std::ofstream open_out(const std::filesystem::path& file, std::ios::openmode extra = {}) {
    std::ofstream out(file, std::ios::out | std::ios::trunc | extra);
    if (!out) throw DataError("cannot open " + file.string() + " for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& file, std::ios::openmode extra = {}) {
    std::ifstream in(file, std::ios::in | extra);
    if (!in) throw DataError("cannot open " + file.string() + " for reading");
    return in;
}

// shortest decimal form that parses back to the identical double
std::string format_double(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

}  // namespace

void write_events_jsonl(const std::filesystem::path& file,
                        const std::vector<events::MovementEvent>& evs, bool scheduled) {
    std::ofstream out = open_out(file);
    for (const auto& e : evs) {
        json o;
        o["t_ms"] = e.t_ms;
        o["kind"] = e.kind == events::MovementEvent::Kind::initiation ? "initiation" : "rest";
        o["joint"] = joint_name_of(e.joint);
        o["source"] = e.source == events::MovementEvent::Source::automatic ? "auto" : "manual";
        if (scheduled) o["scheduled"] = true;
        out << o.dump() << '\n';
    }
    if (!out) throw DataError("write failed on " + file.string());
}

std::vector<events::MovementEvent> load_events_jsonl(const std::filesystem::path& file) {
    std::ifstream in = open_in(file);
    std::vector<events::MovementEvent> evs;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json o;
        try {
            o = json::parse(line);
        } catch (const json::exception& ex) {
            throw DataError(file.string() + ":" + std::to_string(line_no) + ": " + ex.what());
        }
        if (!o.contains("t_ms")) continue;
        events::MovementEvent e;
        e.t_ms = o.at("t_ms").get<long>();
        const std::string kind = o.at("kind").get<std::string>();
        if (kind == "initiation") {
            e.kind = events::MovementEvent::Kind::initiation;
        } else if (kind == "rest") {
            e.kind = events::MovementEvent::Kind::rest;
        } else {
            throw DataError(file.string() + ":" + std::to_string(line_no) + ": unknown kind '" +
                            kind + "'");
        }
        e.joint = joint_id_of(o.at("joint").get<std::string>());
        const std::string source = o.at("source").get<std::string>();
        if (source == "auto") {
            e.source = events::MovementEvent::Source::automatic;
        } else if (source == "manual") {
            e.source = events::MovementEvent::Source::manual;
        } else {
            throw DataError(file.string() + ":" + std::to_string(line_no) + ": unknown source '" +
                            source + "'");
        }
        evs.push_back(e);
    }
    return evs;
}

void write_pose_csv(const std::filesystem::path& file, const events::PoseTrack& track) {
    track.validate();
    std::ofstream out = open_out(file);
    out << "frame";
    for (int j = 0; j < events::kNumJoints; ++j) {
        const char* n = events::kJointNames[static_cast<std::size_t>(j)];
        out << ',' << n << "_x," << n << "_y," << n << "_c";
    }
    out << '\n';
    for (int f = 0; f < track.n_frames; ++f) {
        out << f;
        for (int j = 0; j < events::kNumJoints; ++j) {
            const std::size_t i = track.idx(f, j);
            out << ',' << format_double(track.x[i]) << ',' << format_double(track.y[i]) << ','
                << format_double(track.conf[i]);
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed on " + file.string());
}

events::PoseTrack load_pose_csv(const std::filesystem::path& file, double fps) {
    std::ifstream in = open_in(file);
    std::string line;
    if (!std::getline(in, line)) throw DataError(file.string() + ": missing header");

    std::string expected = "frame";
    for (int j = 0; j < events::kNumJoints; ++j) {
        const std::string n = events::kJointNames[static_cast<std::size_t>(j)];
        expected += "," + n + "_x," + n + "_y," + n + "_c";
    }
    if (line != expected) throw DataError(file.string() + ": unexpected header '" + line + "'");

    std::vector<double> fields;
    events::PoseTrack track;
    track.frame_rate_hz = fps;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        fields.clear();
        const char* p = line.c_str();
        while (true) {
            char* end = nullptr;
            fields.push_back(std::strtod(p, &end));
            if (end == p)
                throw DataError(file.string() + ":" + std::to_string(line_no) + ": bad number");
            p = end;
            if (*p == '\0') break;
            if (*p != ',')
                throw DataError(file.string() + ":" + std::to_string(line_no) +
                                ": expected comma");
            ++p;
        }
        if (fields.size() != 1 + 3 * events::kNumJoints)
            throw DataError(file.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(1 + 3 * events::kNumJoints) + " fields, got " +
                            std::to_string(fields.size()));
        if (static_cast<long>(fields[0]) != track.n_frames)
            throw DataError(file.string() + ":" + std::to_string(line_no) +
                            ": frame indices must be consecutive from 0");
        for (int j = 0; j < events::kNumJoints; ++j) {
            track.x.push_back(fields[static_cast<std::size_t>(1 + 3 * j)]);
            track.y.push_back(fields[static_cast<std::size_t>(2 + 3 * j)]);
            track.conf.push_back(fields[static_cast<std::size_t>(3 + 3 * j)]);
        }
        ++track.n_frames;
    }
    track.validate();
    return track;
}

void write_ecog_f32(const std::filesystem::path& file, const nn::Tensor& samples) {
    if (samples.rank() != 2) throw ShapeError("ecog tensor must be [channels, time]");
    const long C = samples.dim(0), T = samples.dim(1);
    std::ofstream out = open_out(file, std::ios::binary);
    std::vector<float> block;
    const long block_frames = 8192;
    for (long t0 = 0; t0 < T; t0 += block_frames) {
        const long tn = std::min(block_frames, T - t0);
        block.resize(static_cast<std::size_t>(tn * C));
        for (long t = 0; t < tn; ++t)
            for (long c = 0; c < C; ++c)
                block[static_cast<std::size_t>(t * C + c)] =
                    static_cast<float>(samples.v[static_cast<std::size_t>(c * T + t0 + t)]);
        out.write(reinterpret_cast<const char*>(block.data()),
                  static_cast<std::streamsize>(block.size() * sizeof(float)));
    }
    if (!out) throw DataError("write failed on " + file.string());
}

nn::Tensor load_ecog_f32(const std::filesystem::path& file, int n_channels) {
    std::ifstream in = open_in(file, std::ios::binary);
    in.seekg(0, std::ios::end);
    const long bytes = static_cast<long>(in.tellg());
    in.seekg(0, std::ios::beg);
    const long record = static_cast<long>(n_channels) * static_cast<long>(sizeof(float));
    if (bytes % record != 0)
        throw DataError(file.string() + ": size " + std::to_string(bytes) +
                        " is not a whole number of " + std::to_string(n_channels) +
                        "-channel records");
    const long T = bytes / record;
    if (T == 0) throw DataError(file.string() + ": empty recording");

    nn::Tensor samples = nn::Tensor::zeros({n_channels, static_cast<int>(T)});
    std::vector<float> block;
    const long block_frames = 8192;
    for (long t0 = 0; t0 < T; t0 += block_frames) {
        const long tn = std::min(block_frames, T - t0);
        block.resize(static_cast<std::size_t>(tn * n_channels));
        in.read(reinterpret_cast<char*>(block.data()),
                static_cast<std::streamsize>(block.size() * sizeof(float)));
        if (!in) throw DataError("read failed on " + file.string());
        for (long t = 0; t < tn; ++t)
            for (long c = 0; c < n_channels; ++c)
                samples.v[static_cast<std::size_t>(c * T + t0 + t)] =
                    static_cast<double>(block[static_cast<std::size_t>(t * n_channels + c)]);
    }
    return samples;
}

void write_session(const Session& s, const std::filesystem::path& dir) {
    s.manifest.validate();
    s.ecog.validate();
    s.pose.validate();
    if (s.ecog.n_channels() != s.manifest.n_channels)
        throw DataError("manifest declares " + std::to_string(s.manifest.n_channels) +
                        " channels but recording has " + std::to_string(s.ecog.n_channels()));

    std::filesystem::create_directories(dir);
    json m;
    m["session_id"] = s.manifest.session_id;
    m["fs"] = s.manifest.fs;
    m["fps"] = s.manifest.fps;
    m["n_channels"] = s.manifest.n_channels;
    m["grid"] = {{"rows", s.manifest.grid_rows}, {"cols", s.manifest.grid_cols}};
    m["alignment_frame"] = s.manifest.alignment_frame;
    m["day"] = s.manifest.day;
    m["format_version"] = s.manifest.format_version;
    open_out(dir / "manifest.json") << m.dump(2) << '\n';

    write_ecog_f32(dir / "ecog.f32", s.ecog.samples);
    write_pose_csv(dir / "pose.csv", s.pose);
    write_events_jsonl(dir / "truth.jsonl", s.truth, true);
}

Session load_session(const std::filesystem::path& dir) {
    std::ifstream mf = open_in(dir / "manifest.json");
    json m;
    try {
        m = json::parse(mf);
    } catch (const json::exception& ex) {
        throw DataError((dir / "manifest.json").string() + ": " + ex.what());
    }

    Session s;
    try {
        s.manifest.session_id = m.at("session_id").get<std::string>();
        s.manifest.fs = m.at("fs").get<double>();
        s.manifest.fps = m.at("fps").get<double>();
        s.manifest.n_channels = m.at("n_channels").get<int>();
        s.manifest.grid_rows = m.at("grid").at("rows").get<int>();
        s.manifest.grid_cols = m.at("grid").at("cols").get<int>();
        s.manifest.alignment_frame = m.at("alignment_frame").get<long>();
        s.manifest.day = m.at("day").get<int>();
        s.manifest.format_version = m.at("format_version").get<int>();
    } catch (const json::exception& ex) {
        throw DataError((dir / "manifest.json").string() + ": " + ex.what());
    }
    s.manifest.validate();
    if (s.manifest.format_version != 1)
        throw DataError("unsupported session format_version " +
                        std::to_string(s.manifest.format_version));

    s.ecog.samples = load_ecog_f32(dir / "ecog.f32", s.manifest.n_channels);
    s.ecog.sample_rate_hz = s.manifest.fs;
    s.ecog.channel_meta = channel_layout(s.manifest);
    s.pose = load_pose_csv(dir / "pose.csv", s.manifest.fps);
    s.truth = load_events_jsonl(dir / "truth.jsonl");
    return s;
}

}  // namespace movedec::session
