#pragma once

// Dataset model, file ingestion and deterministic synthetic datasets.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "affect/error.hpp"
#include "affect/face_model.hpp"
#include "affect/types.hpp"

namespace affect {

inline constexpr std::array<std::string_view, 4> kQuaternionChannels{"AF3", "F7", "F8", "AF4"};

// ---------------------------------------------------------------------------
// EEG recordings

class EegRecording {
public:
    EegRecording() = default;

    EegRecording(double sample_rate_hz, std::vector<std::pair<std::string, std::vector<double>>> channels,
                 std::optional<double> start_time = std::nullopt)
        : sample_rate_hz_(sample_rate_hz), channels_(std::move(channels)), start_time_(start_time) {
        validate();
    }

    double sample_rate_hz() const { return sample_rate_hz_; }
    std::optional<double> start_time() const { return start_time_; }
    std::size_t length() const { return channels_.empty() ? 0 : channels_.front().second.size(); }
    std::size_t channel_count() const { return channels_.size(); }

    const std::vector<std::pair<std::string, std::vector<double>>>& channels() const { return channels_; }

    bool has_channel(std::string_view name) const {
        return std::any_of(channels_.begin(), channels_.end(), [&](const auto& c) { return c.first == name; });
    }

    const std::vector<double>& channel(std::string_view name) const {
        for (const auto& c : channels_)
            if (c.first == name) return c.second;
        throw FormatError("EEG recording has no channel " + std::string(name));
    }

    std::vector<double>& channel(std::string_view name) {
        return const_cast<std::vector<double>&>(std::as_const(*this).channel(name));
    }

    void validate() const {
        if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_))
            throw ValidationError("EEG sample rate must be positive");
        for (auto name : kQuaternionChannels)
            if (!has_channel(name)) throw FormatError("EEG recording is missing required channel " + std::string(name));
        const std::size_t n = length();
        if (n < 2) throw ValidationError("EEG recording needs at least 2 samples");
        for (const auto& [name, series] : channels_) {
            if (series.size() != n) throw FormatError("EEG channel " + name + " has a different length");
            for (double v : series)
                if (!std::isfinite(v)) throw ValidationError("EEG channel " + name + " has a non-finite sample");
        }
    }

    friend bool operator==(const EegRecording&, const EegRecording&) = default;

private:
    double sample_rate_hz_ = 128.0;
    std::vector<std::pair<std::string, std::vector<double>>> channels_;
    std::optional<double> start_time_;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace detail

/// Writes `contents` next to `path` and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

/// Parses an EEG CSV document. A leading `t` column carries timestamps; every
/// other column is a channel.
inline EegRecording parse_eeg_csv(std::string_view text, double sample_rate_hz = 128.0) {
    std::vector<std::string_view> lines;
    for (auto l : detail::split(text, '\n'))
        if (!detail::trim(l).empty()) lines.push_back(l);
    if (lines.empty()) throw FormatError("EEG CSV is empty");

    auto header = detail::split(lines.front(), ',');
    std::vector<std::string> names;
    for (auto h : header) names.emplace_back(detail::trim(h));
    const bool has_time = !names.empty() && names.front() == "t";
    for (auto required : kQuaternionChannels)
        if (std::find(names.begin(), names.end(), required) == names.end())
            throw FormatError("EEG CSV is missing required channel " + std::string(required));

    std::vector<std::vector<double>> columns(names.size());
    for (std::size_t row = 1; row < lines.size(); ++row) {
        auto cells = detail::split(lines[row], ',');
        if (cells.size() != names.size())
            throw FormatError("EEG CSV row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                              " cells, expected " + std::to_string(names.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            auto v = detail::parse_double(cells[c]);
            if (!v) throw ParseError("EEG CSV cell '" + std::string(detail::trim(cells[c])) + "' is not a number", row);
            if (!std::isfinite(*v)) throw ParseError("EEG CSV value in column " + names[c] + " is not finite", row);
            columns[c].push_back(*v);
        }
    }

    std::vector<std::pair<std::string, std::vector<double>>> channels;
    std::optional<double> start;
    for (std::size_t c = 0; c < names.size(); ++c) {
        if (c == 0 && has_time) {
            if (!columns[c].empty()) start = columns[c].front();
            continue;
        }
        channels.emplace_back(names[c], std::move(columns[c]));
    }
    return EegRecording(sample_rate_hz, std::move(channels), start);
}

inline EegRecording load_eeg_csv(const std::filesystem::path& path, double sample_rate_hz = 128.0) {
    return parse_eeg_csv(detail::read_text(path), sample_rate_hz);
}

inline std::string format_eeg_csv(const EegRecording& rec) {
    std::string out = "t";
    for (const auto& c : rec.channels()) out += "," + c.first;
    out += '\n';
    const double t0 = rec.start_time().value_or(0.0);
    for (std::size_t i = 0; i < rec.length(); ++i) {
        out += detail::format_double(t0 + static_cast<double>(i) / rec.sample_rate_hz());
        for (const auto& c : rec.channels()) {
            out += ',';
            out += detail::format_double(c.second[i]);
        }
        out += '\n';
    }
    return out;
}

inline void write_eeg_csv(const std::filesystem::path& path, const EegRecording& rec) {
    write_file_atomic(path, format_eeg_csv(rec));
}

// ---------------------------------------------------------------------------
// Landmark sequences

struct LandmarkSequence {
    double fps = 30.0;
    std::vector<Frame> frames;

    void validate() const {
        if (!(fps > 0.0)) throw ValidationError("landmark fps must be positive");
        if (frames.size() < 2) throw ValidationError("landmark sequence needs at least 2 frames");
        for (const auto& f : frames)
            for (const auto& p : f)
                if (!std::isfinite(p.x) || !std::isfinite(p.y))
                    throw ValidationError("landmark coordinate is not finite");
    }

    friend bool operator==(const LandmarkSequence&, const LandmarkSequence&) = default;
};

inline LandmarkSequence parse_landmarks_jsonl(std::string_view text, double fps = 30.0) {
    std::map<long long, Frame> by_index;
    std::size_t line_no = 0;
    for (auto raw : detail::split(text, '\n')) {
        ++line_no;
        auto line = detail::trim(raw);
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("landmark line is not valid JSON: ") + e.what(), line_no);
        }
        if (!j.contains("frame") || !j["frame"].is_number_integer() || !j.contains("pts") || !j["pts"].is_array())
            throw FormatError("landmark line " + std::to_string(line_no) + " needs integer 'frame' and array 'pts'");
        const auto& pts = j["pts"];
        if (pts.size() != kLandmarkCount)
            throw FormatError("landmark line " + std::to_string(line_no) + " has " + std::to_string(pts.size()) +
                              " points, expected 68");
        Frame f{};
        for (std::size_t i = 0; i < kLandmarkCount; ++i) {
            const auto& p = pts[i];
            if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
                throw FormatError("landmark line " + std::to_string(line_no) + " point " + std::to_string(i) +
                                  " is not an [x, y] pair");
            f[i] = {p[0].get<double>(), p[1].get<double>()};
        }
        const auto idx = j["frame"].get<long long>();
        if (!by_index.emplace(idx, f).second)
            throw FormatError("landmark frame index " + std::to_string(idx) + " appears twice");
    }
    LandmarkSequence seq{fps, {}};
    long long expected = 0;
    for (auto& [idx, f] : by_index) {
        if (idx != expected) throw FormatError("landmark frame index " + std::to_string(expected) + " is missing");
        seq.frames.push_back(f);
        ++expected;
    }
    seq.validate();
    return seq;
}

inline LandmarkSequence load_landmarks_jsonl(const std::filesystem::path& path, double fps = 30.0) {
    return parse_landmarks_jsonl(detail::read_text(path), fps);
}

inline std::string format_landmarks_jsonl(const LandmarkSequence& seq) {
    std::string out;
    for (std::size_t k = 0; k < seq.frames.size(); ++k) {
        out += "{\"frame\":" + std::to_string(k) + ",\"pts\":[";
        for (std::size_t i = 0; i < kLandmarkCount; ++i) {
            if (i) out += ',';
            out += '[' + detail::format_double(seq.frames[k][i].x) + ',' + detail::format_double(seq.frames[k][i].y) + ']';
        }
        out += "]}\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Grayscale images (binary or ASCII PGM)

inline GrayImage load_pgm(const std::filesystem::path& path) {
    const std::string data = detail::read_text(path);
    std::istringstream in(data);
    std::string magic;
    in >> magic;
    if (magic != "P2" && magic != "P5") throw FormatError(path.string() + " is not a PGM image");
    auto next_int = [&]() {
        std::string tok;
        while (in >> tok) {
            if (tok.front() == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return std::stoi(tok);
        }
        throw FormatError(path.string() + ": truncated PGM header");
    };
    const int w = next_int(), h = next_int(), maxval = next_int();
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw FormatError(path.string() + ": unsupported PGM header");
    GrayImage img(w, h);
    if (magic == "P2") {
        for (auto& px : img.pixels) px = next_int() / static_cast<double>(maxval);
    } else {
        in.get();
        for (auto& px : img.pixels) {
            const int c = in.get();
            if (c == EOF) throw FormatError(path.string() + ": truncated PGM data");
            px = static_cast<unsigned char>(c) / static_cast<double>(maxval);
        }
    }
    return img;
}

inline std::string format_pgm(const GrayImage& img) {
    std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    for (double v : img.pixels) out += static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    return out;
}

// ---------------------------------------------------------------------------
// Dataset model

enum class TaskKind { gaze9, sem_pair, ck_emotion7 };

inline std::string_view to_string(TaskKind t) {
    switch (t) {
        case TaskKind::gaze9: return "gaze9";
        case TaskKind::sem_pair: return "sem_pair";
        case TaskKind::ck_emotion7: return "ck_emotion7";
    }
    return "?";
}

inline TaskKind parse_task_kind(std::string_view s) {
    if (s == "gaze9") return TaskKind::gaze9;
    if (s == "sem_pair") return TaskKind::sem_pair;
    if (s == "ck_emotion7") return TaskKind::ck_emotion7;
    throw ValidationError("unknown task kind '" + std::string(s) + "'");
}

inline std::vector<std::string> gaze_class_names() {
    return {"top_left", "top_center", "top_right", "middle_left", "center",
            "middle_right", "bottom_left", "bottom_center", "bottom_right"};
}

/// Class pairs of the autobiographical-memory task, ids 1 to 4.
inline std::vector<std::string> sem_pair_class_names(int pair_id) {
    switch (pair_id) {
        case 1: return {"famous_faces", "unknown_faces"};
        case 2: return {"distant_past_family_faces", "recent_past_family_faces"};
        case 3: return {"distant_past_group_images", "recent_past_group_images"};
        case 4: return {"famous_places_objects", "unknown_places_objects"};
        default: throw ParameterError("class-pair id must be in 1..4, got " + std::to_string(pair_id));
    }
}

inline std::vector<std::string> ck_emotion_class_names() {
    return {"anger", "contempt", "disgust", "fear", "happy", "sadness", "surprise"};
}

struct LabeledInstance {
    std::string subject_id;
    int label = 0;
    std::optional<EegRecording> eeg;
    std::optional<LandmarkSequence> landmarks;
    std::optional<GrayImage> image;

    friend bool operator==(const LabeledInstance& a, const LabeledInstance& b) {
        auto same_image = [](const std::optional<GrayImage>& x, const std::optional<GrayImage>& y) {
            if (x.has_value() != y.has_value()) return false;
            return !x || (x->width == y->width && x->height == y->height && x->pixels == y->pixels);
        };
        return a.subject_id == b.subject_id && a.label == b.label && a.eeg == b.eeg && a.landmarks == b.landmarks &&
               same_image(a.image, b.image);
    }
};

struct Dataset {
    TaskKind task_kind = TaskKind::gaze9;
    int pair_id = 0;  // meaningful for sem_pair only
    std::vector<std::string> class_names;
    std::vector<LabeledInstance> instances;

    std::size_t class_count() const { return class_names.size(); }

    std::vector<std::string> subjects() const {
        std::vector<std::string> s;
        for (const auto& i : instances) s.push_back(i.subject_id);
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
        return s;
    }

    std::vector<int> labels() const {
        std::vector<int> y;
        y.reserve(instances.size());
        for (const auto& i : instances) y.push_back(i.label);
        return y;
    }

    Dataset subset(std::span<const std::size_t> indices) const {
        Dataset d{task_kind, pair_id, class_names, {}};
        d.instances.reserve(indices.size());
        for (auto i : indices) d.instances.push_back(instances.at(i));
        return d;
    }

    void validate() const {
        if (class_names.empty()) throw ValidationError("dataset declares no classes");
        for (std::size_t n = 0; n < instances.size(); ++n) {
            const auto& inst = instances[n];
            if (inst.subject_id.empty()) throw ValidationError("instance " + std::to_string(n) + " has no subject id");
            if (inst.label < 0 || static_cast<std::size_t>(inst.label) >= class_names.size())
                throw ValidationError("instance " + std::to_string(n) + " has label " + std::to_string(inst.label) +
                                      " outside the class set");
            if (!inst.eeg && !inst.landmarks && !inst.image)
                throw ValidationError("instance " + std::to_string(n) + " carries no modality");
            if (inst.eeg) inst.eeg->validate();
            if (inst.landmarks) inst.landmarks->validate();
        }
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// ---------------------------------------------------------------------------
// Manifest I/O

/// Loads a dataset manifest; modality paths are resolved relative to it.
inline Dataset load_manifest(const std::filesystem::path& manifest_path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_text(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest " + manifest_path.string() + " is not valid JSON: " + e.what());
    }
    const auto base = manifest_path.parent_path();
    Dataset ds;
    try {
        ds.task_kind = parse_task_kind(j.at("task").get<std::string>());
        ds.pair_id = j.value("pair", 0);
        ds.class_names = j.at("classes").get<std::vector<std::string>>();
        const double rate = j.value("sample_rate_hz", 128.0);
        const double fps = j.value("fps", 30.0);
        for (const auto& ji : j.at("instances")) {
            LabeledInstance inst;
            inst.subject_id = ji.at("subject").get<std::string>();
            inst.label = ji.at("label").get<int>();
            if (ji.contains("eeg")) inst.eeg = load_eeg_csv(base / ji["eeg"].get<std::string>(), rate);
            if (ji.contains("landmarks"))
                inst.landmarks = load_landmarks_jsonl(base / ji["landmarks"].get<std::string>(), fps);
            if (ji.contains("image")) inst.image = load_pgm(base / ji["image"].get<std::string>());
            ds.instances.push_back(std::move(inst));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest " + manifest_path.string() + ": " + e.what());
    }
    ds.validate();
    return ds;
}

/// Writes a dataset as manifest.json plus one file per modality per instance.
inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["task"] = std::string(to_string(ds.task_kind));
    if (ds.task_kind == TaskKind::sem_pair) j["pair"] = ds.pair_id;
    j["classes"] = ds.class_names;
    double rate = 128.0, fps = 30.0;
    for (const auto& inst : ds.instances) {
        if (inst.eeg) rate = inst.eeg->sample_rate_hz();
        if (inst.landmarks) fps = inst.landmarks->fps;
    }
    j["sample_rate_hz"] = rate;
    j["fps"] = fps;
    j["instances"] = nlohmann::json::array();
    for (std::size_t n = 0; n < ds.instances.size(); ++n) {
        const auto& inst = ds.instances[n];
        char stem[32];
        std::snprintf(stem, sizeof(stem), "%05zu", n);
        nlohmann::json ji;
        ji["subject"] = inst.subject_id;
        ji["label"] = inst.label;
        if (inst.eeg) {
            const std::string name = std::string("eeg/") + stem + ".csv";
            write_eeg_csv(dir / name, *inst.eeg);
            ji["eeg"] = name;
        }
        if (inst.landmarks) {
            const std::string name = std::string("landmarks/") + stem + ".jsonl";
            write_file_atomic(dir / name, format_landmarks_jsonl(*inst.landmarks));
            ji["landmarks"] = name;
        }
        if (inst.image) {
            const std::string name = std::string("images/") + stem + ".pgm";
            write_file_atomic(dir / name, format_pgm(*inst.image));
            ji["image"] = name;
        }
        j["instances"].push_back(std::move(ji));
    }
    write_file_atomic(dir / "manifest.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Synthetic datasets

namespace detail {

/// SplitMix64 finaliser; derives independent stream seeds from a root seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    return mix_seed(mix_seed(mix_seed(mix_seed(seed) ^ a) ^ b) ^ c);
}

inline std::string subject_name(int s) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "S%02d", s + 1);
    return buf;
}

}  // namespace detail

/// Nine-position gaze task: 5 s windows of the four frontal channels at
/// 128 Hz. Each class has its own saccade direction (F7/F8 anti-correlated for
/// horizontal, AF3/AF4 correlated for vertical) and its own per-channel
/// sinusoid frequency and phase. Subjects add a channel gain and DC offset.
/// `snr` is the ratio of signal amplitude to white-noise standard deviation.
inline Dataset synth_gaze_dataset(std::uint64_t seed, int n_subjects, int reps_per_class, double snr) {
    if (n_subjects < 2) throw ParameterError("synth_gaze_dataset needs at least 2 subjects");
    if (reps_per_class < 1) throw ParameterError("synth_gaze_dataset needs at least 1 repetition per class");
    if (!(snr > 0.0)) throw ParameterError("synth_gaze_dataset needs snr > 0");

    constexpr double rate = 128.0;
    constexpr std::size_t samples = 640;
    constexpr double scale_uv = 20.0;
    constexpr double two_pi = 2.0 * std::numbers::pi;

    Dataset ds{TaskKind::gaze9, 0, gaze_class_names(), {}};
    for (int s = 0; s < n_subjects; ++s) {
        std::mt19937_64 subject_rng(detail::stream_seed(seed, 1, static_cast<std::uint64_t>(s)));
        std::uniform_real_distribution<double> gain_dist(0.8, 1.2);
        std::normal_distribution<double> offset_dist(0.0, 5.0);
        std::array<double, 4> gain{}, offset{};
        for (int c = 0; c < 4; ++c) {
            gain[c] = gain_dist(subject_rng);
            offset[c] = offset_dist(subject_rng);
        }
        for (int cls = 0; cls < 9; ++cls) {
            const double gx = cls % 3 - 1.0;
            const double gy = cls / 3 - 1.0;
            // channel order: AF3, F7, F8, AF4
            const std::array<double, 4> saccade{gy, gx, -gx, gy};
            for (int r = 0; r < reps_per_class; ++r) {
                std::mt19937_64 rng(detail::stream_seed(seed, 2, static_cast<std::uint64_t>(s),
                                                        static_cast<std::uint64_t>(cls * 1000 + r)));
                std::normal_distribution<double> noise(0.0, 1.0 / snr);
                std::uniform_real_distribution<double> latency(0.20, 0.30);
                const double onset = latency(rng);
                std::vector<std::pair<std::string, std::vector<double>>> channels;
                for (int c = 0; c < 4; ++c) {
                    const double freq = 1.0 + 0.5 * cls + 0.25 * c;
                    const double phase = two_pi * std::fmod(0.137 * (cls + 1) * (c + 1) + 0.31 * c, 1.0);
                    std::vector<double> x(samples);
                    for (std::size_t i = 0; i < samples; ++i) {
                        const double t = static_cast<double>(i) / rate;
                        const double step = 1.0 / (1.0 + std::exp(-(t - onset) / 0.02));
                        const double clean = 0.6 * std::sin(two_pi * freq * t + phase) + 0.8 * saccade[c] * step;
                        x[i] = scale_uv * (gain[c] * clean + noise(rng)) + offset[c];
                    }
                    channels.emplace_back(std::string(kQuaternionChannels[c]), std::move(x));
                }
                LabeledInstance inst;
                inst.subject_id = detail::subject_name(s);
                inst.label = cls;
                inst.eeg = EegRecording(rate, std::move(channels), 0.0);
                ds.instances.push_back(std::move(inst));
            }
        }
    }
    return ds;
}

namespace detail {

/// Named displacement fields (pixels at unit scale) used as expression
/// prototypes by the synthetic expression generator.
enum class Expression { smile, lip_press, smile_squint, surprise, brow_raise, frown };

inline std::array<Point2, kLandmarkCount> expression_field(Expression e) {
    std::array<Point2, kLandmarkCount> d{};
    auto sym = [&d](std::size_t i, Point2 v) {
        d[i] = v;
        const auto m = landmarks::mirror(i);
        if (m != i) d[m] = Point2{-v.x, v.y};
    };
    switch (e) {
        case Expression::smile:
            sym(48, {-5, -4}); sym(49, {-2, -2}); sym(59, {-3, -1}); sym(58, {-1, 1}); sym(57, {0, 1});
            sym(60, {-4, -3}); sym(67, {-1, 0});
            sym(41, {0, -1}); sym(40, {0, -1});
            break;
        case Expression::lip_press:
            sym(48, {2, 0}); sym(49, {1, 2}); sym(50, {0, 2}); sym(51, {0, 2}); sym(57, {0, -3}); sym(58, {0, -2});
            sym(59, {1, -1}); sym(61, {0, 1}); sym(62, {0, 1}); sym(66, {0, -1}); sym(67, {0, -1});
            break;
        case Expression::smile_squint:
            sym(48, {-6, -5}); sym(49, {-2, -3}); sym(59, {-3, -2}); sym(60, {-5, -4});
            sym(37, {0, 2}); sym(38, {0, 2}); sym(40, {0, -2}); sym(41, {0, -2}); sym(36, {-1, 0});
            sym(17, {0, 2}); sym(18, {0, 1});
            break;
        case Expression::surprise:
            sym(17, {0, -4}); sym(18, {0, -6}); sym(19, {0, -7}); sym(20, {0, -6}); sym(21, {0, -4});
            sym(37, {0, -2}); sym(38, {0, -2}); sym(57, {0, 8}); sym(58, {0, 7}); sym(59, {0, 5}); sym(66, {0, 7});
            sym(67, {0, 6}); sym(8, {0, 6}); sym(7, {0, 5}); sym(48, {1, 2});
            break;
        case Expression::brow_raise:
            sym(17, {0, -3}); sym(18, {0, -4}); sym(19, {0, -5}); sym(20, {0, -5}); sym(21, {0, -4});
            sym(37, {0, -1}); sym(38, {0, -1});
            break;
        case Expression::frown:
            sym(20, {1, 3}); sym(21, {2, 4}); sym(19, {0, 2}); sym(48, {-1, 4}); sym(49, {0, 1}); sym(59, {0, 2});
            sym(60, {-1, 3}); sym(57, {0, -1});
            break;
    }
    return d;
}

inline std::pair<Expression, Expression> pair_expressions(int pair_id) {
    switch (pair_id) {
        case 1: return {Expression::smile, Expression::lip_press};
        case 2: return {Expression::smile_squint, Expression::brow_raise};
        case 3: return {Expression::smile, Expression::surprise};
        case 4: return {Expression::brow_raise, Expression::frown};
        default: throw ParameterError("class-pair id must be in 1..4, got " + std::to_string(pair_id));
    }
}

}  // namespace detail

inline constexpr int kSynthFramesPerSequence = 24;

/// Binary class-pair expression task. Each sequence starts at a neutral face
/// and morphs toward the class displacement field, peaking near frame 15.
/// Head translation varies per frame; all facial deformation (including
/// tracking jitter) scales with `displacement_scale`.
inline Dataset synth_expression_dataset(std::uint64_t seed, int n_subjects, int reps_per_class,
                                        double displacement_scale, int pair_id = 1) {
    if (n_subjects < 2) throw ParameterError("synth_expression_dataset needs at least 2 subjects");
    if (reps_per_class < 1) throw ParameterError("synth_expression_dataset needs at least 1 repetition per class");
    if (!(displacement_scale >= 0.0) || !std::isfinite(displacement_scale))
        throw ParameterError("displacement_scale must be a finite non-negative number");
    const auto [expr_a, expr_b] = detail::pair_expressions(pair_id);
    const std::array<std::array<Point2, kLandmarkCount>, 2> fields{detail::expression_field(expr_a),
                                                                   detail::expression_field(expr_b)};

    Dataset ds{TaskKind::sem_pair, pair_id, sem_pair_class_names(pair_id), {}};
    const auto& neutral = canonical_face();
    for (int s = 0; s < n_subjects; ++s) {
        std::mt19937_64 subject_rng(detail::stream_seed(seed, 11, static_cast<std::uint64_t>(s)));
        std::normal_distribution<double> shape_noise(0.0, 2.0);
        std::uniform_real_distribution<double> scale_dist(0.9, 1.1);
        std::uniform_real_distribution<double> style_dist(0.8, 1.2);
        const double face_scale = scale_dist(subject_rng);
        const double style = style_dist(subject_rng);
        Frame subject_face{};
        for (std::size_t i = 0; i < kLandmarkCount; ++i)
            subject_face[i] = face_scale * neutral[i] + Point2{shape_noise(subject_rng), shape_noise(subject_rng)};
        const Point2 base{320.0 + 20.0 * s, 240.0};

        for (int cls = 0; cls < 2; ++cls) {
            for (int r = 0; r < reps_per_class; ++r) {
                std::mt19937_64 rng(detail::stream_seed(seed, 12, static_cast<std::uint64_t>(s),
                                                        static_cast<std::uint64_t>(cls * 1000 + r)));
                std::uniform_real_distribution<double> intensity_dist(0.7, 1.3);
                std::normal_distribution<double> field_noise(0.0, 0.8);
                std::normal_distribution<double> jitter(0.0, 0.3);
                std::normal_distribution<double> head_step(0.0, 0.8);
                std::uniform_int_distribution<int> peak_dist(12, 17);
                const double intensity = intensity_dist(rng) * style;
                std::array<Point2, kLandmarkCount> field{};
                for (std::size_t i = 0; i < kLandmarkCount; ++i)
                    field[i] = intensity * fields[cls][i] + Point2{field_noise(rng), field_noise(rng)};
                const int peak = peak_dist(rng);

                LandmarkSequence seq{30.0, {}};
                Point2 head = base;
                for (int k = 0; k < kSynthFramesPerSequence; ++k) {
                    double w = k <= peak ? 0.5 - 0.5 * std::cos(std::numbers::pi * k / peak)
                                         : 1.0 - 0.15 * (k - peak) / (kSynthFramesPerSequence - peak);
                    Frame f{};
                    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
                        Point2 deform = w * field[i];
                        if (k > 0) deform = deform + Point2{jitter(rng), jitter(rng)};
                        f[i] = head + subject_face[i] + displacement_scale * deform;
                    }
                    seq.frames.push_back(f);
                    head = head + Point2{head_step(rng), head_step(rng)};
                }
                LabeledInstance inst;
                inst.subject_id = detail::subject_name(s);
                inst.label = cls;
                inst.landmarks = std::move(seq);
                ds.instances.push_back(std::move(inst));
            }
        }
    }
    return ds;
}

}  // namespace affect
