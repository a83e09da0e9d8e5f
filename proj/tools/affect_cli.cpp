// affect_cli: synthesise datasets, extract features, run leave-persons-out
// evaluations and render crease patterns.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "affect/affect.hpp"

namespace fs = std::filesystem;
using namespace affect;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    fs::path out = ".";
};

fs::path manifest_path(const fs::path& data) {
    if (fs::is_directory(data)) return data / "manifest.json";
    return data;
}

Dataset load_data(const fs::path& data) {
    const auto p = manifest_path(data);
    if (!fs::exists(p)) throw ValidationError("dataset manifest not found: " + p.string());
    return load_manifest(p);
}

PipelineConfig load_resolved_config(const fs::path& path, const Globals& g) {
    if (!fs::exists(path)) throw ValidationError("config file not found: " + path.string());
    auto cfg = load_config(path);
    if (g.seed) {
        cfg.eval_seed = *g.seed;
        cfg.tsne.seed = *g.seed;
        cfg.classifier.forest.seed = *g.seed;
    }
    return cfg;
}

void cmd_synth(const Globals& g, const std::string& task, int subjects, int reps, double snr, double scale, int pair) {
    const auto seed = g.seed.value_or(1);
    const auto kind = parse_task_kind(task);
    Dataset ds;
    if (kind == TaskKind::gaze9)
        ds = synth_gaze_dataset(seed, subjects, reps, snr);
    else if (kind == TaskKind::sem_pair)
        ds = synth_expression_dataset(seed, subjects, reps, scale, pair);
    else
        throw ValidationError("no synthetic generator for task " + task);
    save_dataset(ds, g.out);
    std::cout << "wrote " << ds.instances.size() << " instances to " << (g.out / "manifest.json").string() << '\n';
}

void cmd_extract(const Globals& g, const fs::path& config, const fs::path& data) {
    const auto cfg = load_resolved_config(config, g);
    const auto ds = load_data(data);
    FeatureMatrix X;
    const auto fp = pipeline_fit(cfg, ds, &X);

    std::string csv = "subject,label";
    for (const auto& c : fp.columns) csv += "," + c;
    csv += '\n';
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        const auto& inst = ds.instances[static_cast<std::size_t>(r)];
        csv += inst.subject_id + "," + std::to_string(inst.label);
        for (Eigen::Index c = 0; c < X.cols(); ++c) csv += "," + detail::format_double(X(r, c));
        csv += '\n';
    }
    write_file_atomic(g.out / "features.csv", csv);
    write_file_atomic(g.out / "features.cfg", serialize_config(cfg));
    std::cout << "wrote " << X.rows() << " x " << X.cols() << " features to " << (g.out / "features.csv").string() << '\n';
}

void cmd_eval(const Globals& g, const fs::path& config, const fs::path& data) {
    const auto cfg = load_resolved_config(config, g);
    const auto ds = load_data(data);
    const auto report = evaluate(cfg, ds, g.jobs);

    nlohmann::json j;
    j["schema"] = "affect.report/1";
    j["config"] = config_json(cfg);
    j["dataset"] = {{"task", std::string(to_string(ds.task_kind))},
                    {"instances", ds.instances.size()},
                    {"subjects", ds.subjects().size()},
                    {"classes", ds.class_names}};
    j["report"] = to_json(report);
    write_file_atomic(g.out / "report.json", j.dump(2) + "\n");
    write_file_atomic(g.out / "report.csv", format_report_csv(report));
    write_file_atomic(g.out / "confusion.txt", format_confusion_table(report.confusion));
    std::cout << "macro F1 " << detail::format_double(report.macro_f1) << ", accuracy "
              << detail::format_double(report.accuracy) << '\n';
}

void cmd_render(const Globals& g, const fs::path& pattern, const fs::path& landmarks, double size_px) {
    CreasePattern cp;
    if (!pattern.empty()) {
        try {
            cp = crease_pattern_from_json(nlohmann::json::parse(detail::read_text(pattern)));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("crease pattern " + pattern.string() + ": " + e.what());
        }
    } else if (!landmarks.empty()) {
        const auto seq = load_landmarks_jsonl(landmarks);
        cp = face_crease_pattern(seq.frames[select_peak_frame(seq)]);
    } else {
        cp = face_crease_pattern(canonical_face());
    }
    write_file_atomic(g.out / "crease.svg", render_svg(cp, size_px));
    write_file_atomic(g.out / "crease.json", to_json(cp).dump(2) + "\n");
    std::cout << "wrote " << cp.nodes.size() << " nodes, " << cp.edges.size() << " edges to "
              << (g.out / "crease.svg").string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Affect and gaze recognition from EEG and facial landmarks"};
    app.require_subcommand(1);

    Globals g;
    std::uint64_t seed = 1;
    auto* seed_opt = app.add_option("--seed", seed, "Seed for every random stream")->capture_default_str();
    app.add_option("--jobs", g.jobs, "Worker threads for cross-validation folds")->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "Output directory");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    std::string task = "gaze9";
    int subjects = 9, reps = 5, pair = 1;
    double snr = 1.0, scale = 1.0;
    synth->add_option("--task", task, "gaze9 or sem_pair")->capture_default_str();
    synth->add_option("--subjects", subjects)->capture_default_str();
    synth->add_option("--reps", reps, "Repetitions per class and subject")->capture_default_str();
    synth->add_option("--snr", snr, "Signal to noise ratio (gaze)")->capture_default_str();
    synth->add_option("--scale", scale, "Expression displacement scale")->capture_default_str();
    synth->add_option("--pair", pair, "Emotion pair id (sem_pair)")->capture_default_str();

    fs::path config, data;
    auto* extract = app.add_subcommand("extract", "Fit the feature pipeline on a dataset and write the matrix");
    extract->add_option("--config", config)->required();
    extract->add_option("--data", data, "Dataset directory or manifest")->required();

    auto* eval = app.add_subcommand("eval", "Leave-persons-out evaluation");
    eval->add_option("--config", config)->required();
    eval->add_option("--data", data, "Dataset directory or manifest")->required();

    fs::path pattern, landmarks;
    double size_px = 600.0;
    auto* render = app.add_subcommand("render", "Render a crease pattern as SVG");
    auto* pat_opt = render->add_option("--pattern", pattern, "Crease pattern JSON");
    render->add_option("--landmarks", landmarks, "Landmark JSONL; the peak frame is folded")->excludes(pat_opt);
    render->add_option("--size", size_px, "Canvas size in pixels")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (seed_opt->count()) g.seed = seed;

    try {
        if (synth->parsed()) cmd_synth(g, task, subjects, reps, snr, scale, pair);
        else if (extract->parsed()) cmd_extract(g, config, data);
        else if (eval->parsed()) cmd_eval(g, config, data);
        else if (render->parsed()) cmd_render(g, pattern, landmarks, size_px);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
