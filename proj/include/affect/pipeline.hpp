#pragma once

// Declarative experiment pipeline: preprocessing, feature recipe, optional
// reduction and a classifier, all fitted on training subjects only.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "affect/classify.hpp"
#include "affect/dataio.hpp"
#include "affect/dimred.hpp"
#include "affect/error.hpp"
#include "affect/eval.hpp"
#include "affect/features.hpp"
#include "affect/origami.hpp"
#include "affect/preprocess.hpp"
#include "affect/quaternion.hpp"

namespace affect {

enum class FeatureBlock { qpca, vpca, dtnnp, dtnnp_mag, phog, phog_mag, origami };

inline std::string_view to_string(FeatureBlock b) {
    switch (b) {
        case FeatureBlock::qpca: return "qpca";
        case FeatureBlock::vpca: return "vpca";
        case FeatureBlock::dtnnp: return "dtnnp";
        case FeatureBlock::dtnnp_mag: return "dtnnp_mag";
        case FeatureBlock::phog: return "phog";
        case FeatureBlock::phog_mag: return "phog_mag";
        case FeatureBlock::origami: return "origami";
    }
    return "?";
}

inline FeatureBlock parse_feature_block(std::string_view s) {
    for (auto b : {FeatureBlock::qpca, FeatureBlock::vpca, FeatureBlock::dtnnp, FeatureBlock::dtnnp_mag, FeatureBlock::phog,
                   FeatureBlock::phog_mag, FeatureBlock::origami})
        if (to_string(b) == s) return b;
    throw ValidationError("unknown feature '" + std::string(s) + "'");
}

enum class Reducer { none, pca, tsne };

inline std::string_view to_string(Reducer r) {
    switch (r) {
        case Reducer::none: return "none";
        case Reducer::pca: return "pca";
        case Reducer::tsne: return "tsne";
    }
    return "?";
}

inline Reducer parse_reducer(std::string_view s) {
    for (auto r : {Reducer::none, Reducer::pca, Reducer::tsne})
        if (to_string(r) == s) return r;
    throw ValidationError("unknown reducer '" + std::string(s) + "'");
}

struct PipelineConfig {
    TaskKind task = TaskKind::gaze9;

    bool normalize = true;
    int median_window = 5;  // <= 1 disables the filter
    MagnificationParams magnification;

    std::vector<FeatureBlock> features{FeatureBlock::qpca};
    std::string qpca_map = "A";
    int qpca_k = 15;
    QpcaSolver qpca_solver = QpcaSolver::automatic;
    int vpca_k = 60;
    int origami_nodes = static_cast<int>(kDefaultOrigamiNodes);
    int origami_edges = static_cast<int>(kDefaultOrigamiEdges);
    Reducer origami_reduce = Reducer::none;
    int origami_dims = 10;

    Reducer reduce = Reducer::none;
    int reduce_k = 10;
    TsneParams tsne;

    ClassifierSpec classifier = [] {
        ClassifierSpec s;
        s.knn_k = 5;
        return s;
    }();

    int folds = 9;
    std::uint64_t eval_seed = 1;

    friend bool operator==(const PipelineConfig& a, const PipelineConfig& b);
};

namespace detail {

inline std::string qpca_solver_name(QpcaSolver s) {
    switch (s) {
        case QpcaSolver::automatic: return "auto";
        case QpcaSolver::covariance: return "covariance";
        case QpcaSolver::gram: return "gram";
    }
    return "?";
}

inline QpcaSolver parse_qpca_solver(std::string_view s) {
    if (s == "auto") return QpcaSolver::automatic;
    if (s == "covariance") return QpcaSolver::covariance;
    if (s == "gram") return QpcaSolver::gram;
    throw ValidationError("unknown qpca.solver '" + std::string(s) + "'");
}

inline bool parse_bool_value(const std::string& key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("config key " + key + ": expected a boolean, got '" + std::string(v) + "'");
}

inline double parse_double_value(const std::string& key, std::string_view v) {
    auto d = parse_double(v);
    if (!d || !std::isfinite(*d)) throw ValidationError("config key " + key + ": expected a number, got '" + std::string(v) + "'");
    return *d;
}

inline long long parse_int_value(const std::string& key, std::string_view v) {
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ValidationError("config key " + key + ": expected an integer, got '" + std::string(v) + "'");
    return out;
}

// Ordered key/value view of a config; the single source for both
// serialisation and the set of accepted keys.
inline std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& c) {
    std::string feats;
    for (std::size_t i = 0; i < c.features.size(); ++i) {
        if (i) feats += ',';
        feats += to_string(c.features[i]);
    }
    const auto& k = c.classifier;
    return {
        {"task", std::string(to_string(c.task))},
        {"preprocess.normalize", c.normalize ? "true" : "false"},
        {"preprocess.median", std::to_string(c.median_window)},
        {"mag.alpha", format_double(c.magnification.alpha)},
        {"mag.lo_hz", format_double(c.magnification.band_lo_hz)},
        {"mag.hi_hz", format_double(c.magnification.band_hi_hz)},
        {"features", feats},
        {"qpca.map", c.qpca_map},
        {"qpca.k", std::to_string(c.qpca_k)},
        {"qpca.solver", qpca_solver_name(c.qpca_solver)},
        {"vpca.k", std::to_string(c.vpca_k)},
        {"origami.nodes", std::to_string(c.origami_nodes)},
        {"origami.edges", std::to_string(c.origami_edges)},
        {"origami.reduce", std::string(to_string(c.origami_reduce))},
        {"origami.dims", std::to_string(c.origami_dims)},
        {"reduce", std::string(to_string(c.reduce))},
        {"reduce.k", std::to_string(c.reduce_k)},
        {"tsne.perplexity", format_double(c.tsne.perplexity)},
        {"tsne.iterations", std::to_string(c.tsne.iterations)},
        {"tsne.learning_rate", format_double(c.tsne.learning_rate)},
        {"tsne.seed", std::to_string(c.tsne.seed)},
        {"classifier", std::string(to_string(k.kind))},
        {"knn.k", std::to_string(k.knn_k)},
        {"knn.metric", std::string(to_string(k.knn_metric))},
        {"knn.rule", std::string(to_string(k.knn_rule))},
        {"svm.kernel", std::string(to_string(k.svm.kernel))},
        {"svm.C", format_double(k.svm.C)},
        {"svm.gamma", format_double(k.svm.gamma)},
        {"boost.rounds", std::to_string(k.boost_rounds)},
        {"rf.trees", std::to_string(k.forest.n_trees)},
        {"rf.depth", std::to_string(k.forest.max_depth)},
        {"rf.bootstrap", k.forest.bootstrap ? "true" : "false"},
        {"rf.seed", std::to_string(k.forest.seed)},
        {"eval.folds", std::to_string(c.folds)},
        {"eval.seed", std::to_string(c.eval_seed)},
    };
}

inline void apply_config_entry(PipelineConfig& c, const std::string& key, const std::string& v) {
    auto i = [&] { return parse_int_value(key, v); };
    auto u64 = [&] {
        const auto x = i();
        if (x < 0) throw ValidationError("config key " + key + " must be non-negative");
        return static_cast<std::uint64_t>(x);
    };
    auto d = [&] { return parse_double_value(key, v); };
    auto& k = c.classifier;
    if (key == "task") c.task = parse_task_kind(v);
    else if (key == "preprocess.normalize") c.normalize = parse_bool_value(key, v);
    else if (key == "preprocess.median") c.median_window = static_cast<int>(i());
    else if (key == "mag.alpha") c.magnification.alpha = d();
    else if (key == "mag.lo_hz") c.magnification.band_lo_hz = d();
    else if (key == "mag.hi_hz") c.magnification.band_hi_hz = d();
    else if (key == "features") {
        c.features.clear();
        for (auto part : split(v, ',')) {
            const auto t = trim(part);
            if (!t.empty()) c.features.push_back(parse_feature_block(t));
        }
    } else if (key == "qpca.map") {
        ChannelMap::preset(v);
        c.qpca_map = v;
    } else if (key == "qpca.k") c.qpca_k = static_cast<int>(i());
    else if (key == "qpca.solver") c.qpca_solver = parse_qpca_solver(v);
    else if (key == "vpca.k") c.vpca_k = static_cast<int>(i());
    else if (key == "origami.nodes") c.origami_nodes = static_cast<int>(i());
    else if (key == "origami.edges") c.origami_edges = static_cast<int>(i());
    else if (key == "origami.reduce") c.origami_reduce = parse_reducer(v);
    else if (key == "origami.dims") c.origami_dims = static_cast<int>(i());
    else if (key == "reduce") c.reduce = parse_reducer(v);
    else if (key == "reduce.k") c.reduce_k = static_cast<int>(i());
    else if (key == "tsne.perplexity") c.tsne.perplexity = d();
    else if (key == "tsne.iterations") c.tsne.iterations = static_cast<int>(i());
    else if (key == "tsne.learning_rate") c.tsne.learning_rate = d();
    else if (key == "tsne.seed") c.tsne.seed = u64();
    else if (key == "classifier") k.kind = parse_classifier(v);
    else if (key == "knn.k") k.knn_k = static_cast<int>(i());
    else if (key == "knn.metric") k.knn_metric = parse_metric(v);
    else if (key == "knn.rule") k.knn_rule = parse_knn_rule(v);
    else if (key == "svm.kernel") k.svm.kernel = parse_kernel(v);
    else if (key == "svm.C") k.svm.C = d();
    else if (key == "svm.gamma") k.svm.gamma = d();
    else if (key == "boost.rounds") k.boost_rounds = static_cast<int>(i());
    else if (key == "rf.trees") k.forest.n_trees = static_cast<int>(i());
    else if (key == "rf.depth") k.forest.max_depth = static_cast<int>(i());
    else if (key == "rf.bootstrap") k.forest.bootstrap = parse_bool_value(key, v);
    else if (key == "rf.seed") k.forest.seed = u64();
    else if (key == "eval.folds") c.folds = static_cast<int>(i());
    else if (key == "eval.seed") c.eval_seed = u64();
    else throw ValidationError("unknown config key: " + key);
}

}  // namespace detail

inline bool operator==(const PipelineConfig& a, const PipelineConfig& b) {
    return detail::config_entries(a) == detail::config_entries(b);
}

/// Checks ranges and cross-field consistency.
inline void validate(const PipelineConfig& c) {
    if (c.features.empty()) throw ValidationError("config: features must list at least one feature");
    if (c.median_window > 1 && c.median_window % 2 == 0) throw ValidationError("config: preprocess.median must be odd");
    if (c.qpca_k < 1 || c.vpca_k < 1) throw ValidationError("config: qpca.k and vpca.k must be >= 1");
    if (c.origami_nodes < 1 || c.origami_edges < 1) throw ValidationError("config: origami targets must be >= 1");
    if (c.origami_dims < 1 || c.reduce_k < 1) throw ValidationError("config: reduction dimensions must be >= 1");
    if (!(c.tsne.perplexity > 0) || c.tsne.iterations < 1 || !(c.tsne.learning_rate > 0))
        throw ValidationError("config: invalid t-SNE parameters");
    const auto& k = c.classifier;
    if (k.knn_k < 1) throw ValidationError("config: knn.k must be >= 1");
    if (!(k.svm.C > 0) || k.svm.gamma < 0) throw ValidationError("config: svm.C must be > 0 and svm.gamma >= 0");
    if (k.boost_rounds < 1) throw ValidationError("config: boost.rounds must be >= 1");
    if (k.forest.n_trees < 1 || k.forest.max_depth < 0) throw ValidationError("config: invalid random forest parameters");
    if (c.folds < 2) throw ValidationError("config: eval.folds must be >= 2");
    for (auto f : c.features)
        if ((f == FeatureBlock::dtnnp_mag || f == FeatureBlock::phog_mag)) {
            MagnificationParams p = c.magnification;
            p.sample_rate_hz = 1e9;  // rate is checked against the data later
            try {
                p.validate();
            } catch (const ParameterError& e) {
                throw ValidationError(std::string("config: ") + e.what());
            }
        }
}

/// Parses `key = value` lines; '#' starts a comment. Later keys override
/// earlier ones. Unknown keys are rejected.
inline PipelineConfig parse_config(std::string_view text) {
    PipelineConfig c;
    std::size_t line_no = 0;
    for (auto raw : detail::split(text, '\n')) {
        ++line_no;
        auto line = raw;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ValidationError("config line " + std::to_string(line_no) + ": expected key=value");
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string value(detail::trim(line.substr(eq + 1)));
        detail::apply_config_entry(c, key, value);
    }
    validate(c);
    return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) { return parse_config(detail::read_text(path)); }

inline std::string serialize_config(const PipelineConfig& c) {
    std::string out;
    for (const auto& [k, v] : detail::config_entries(c)) out += k + " = " + v + "\n";
    return out;
}

inline nlohmann::json config_json(const PipelineConfig& c) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : detail::config_entries(c)) j[k] = v;
    return j;
}

/// Rejects recipes whose modalities the dataset lacks.
inline void check_modalities(const PipelineConfig& c, const Dataset& ds) {
    if (c.task != ds.task_kind)
        throw ValidationError("config task " + std::string(to_string(c.task)) + " does not match dataset task " +
                              std::string(to_string(ds.task_kind)));
    for (auto f : c.features)
        for (std::size_t n = 0; n < ds.instances.size(); ++n) {
            const auto& inst = ds.instances[n];
            const bool eeg = f == FeatureBlock::qpca || f == FeatureBlock::vpca;
            const bool image_ok = f == FeatureBlock::phog && (inst.image || inst.landmarks);
            if (eeg && !inst.eeg)
                throw ValidationError("feature " + std::string(to_string(f)) + " needs EEG but instance " + std::to_string(n) + " has none");
            if (!eeg && !image_ok && !inst.landmarks)
                throw ValidationError("feature " + std::string(to_string(f)) + " needs landmarks but instance " +
                                      std::to_string(n) + " has none");
        }
}

// ---------------------------------------------------------------------------
// Fitting

namespace detail {

inline std::vector<double> condition_series(std::span<const double> s, const PipelineConfig& c) {
    std::vector<double> out(s.begin(), s.end());
    if (c.median_window > 1) out = median_filter(out, c.median_window);
    if (c.normalize) out = normalize_channel(out);
    return out;
}

inline EegRecording condition_eeg(const EegRecording& rec, const PipelineConfig& c) {
    std::vector<std::pair<std::string, std::vector<double>>> chans;
    for (auto name : kQuaternionChannels) chans.emplace_back(std::string(name), condition_series(rec.channel(name), c));
    return EegRecording(rec.sample_rate_hz(), std::move(chans));
}

inline Frame peak_frame(const LandmarkSequence& seq) { return seq.frames[select_peak_frame(seq)]; }

inline LandmarkSequence magnified(const LandmarkSequence& seq, const PipelineConfig& c) {
    return magnify_landmarks(seq, c.magnification);
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace detail

/// A reducer fitted on training rows.
struct FittedReducer {
    Reducer kind = Reducer::none;
    std::optional<PcaModel> pca;
    std::optional<TsneModel> tsne;

    FeatureMatrix transform(const FeatureMatrix& X) const {
        if (pca) return pca->transform(X);
        if (tsne) return tsne->transform(X);
        return X;
    }

    nlohmann::json to_json() const {
        if (pca) return affect::to_json(*pca);
        if (tsne) return {{"embedding", detail::matrix_json(tsne->embedding)}, {"train", detail::matrix_json(tsne->train)}};
        return nullptr;
    }
};

inline FittedReducer fit_reducer(Reducer kind, const FeatureMatrix& X, int dims, const TsneParams& tsne_params,
                                 FeatureMatrix* train_out) {
    FittedReducer r;
    r.kind = kind;
    if (kind == Reducer::pca) {
        const auto k = std::min<Eigen::Index>(dims, std::min(X.rows(), X.cols()));
        r.pca = pca_fit(X, k);
        *train_out = r.pca->transform(X);
    } else if (kind == Reducer::tsne) {
        TsneParams p = tsne_params;
        p.out_dims = dims;
        r.tsne = tsne_fit(X, p);
        *train_out = r.tsne->embedding;
    } else {
        *train_out = X;
    }
    return r;
}

struct FittedPipeline {
    PipelineConfig config;
    std::optional<QpcaModel> qpca;
    std::optional<PcaModel> vpca;
    FittedReducer origami_reducer;
    FittedReducer reducer;
    TrainedModel model;
    std::vector<std::string> columns;  // names of the classifier inputs

    /// Hash of every fitted parameter, for leakage checks.
    std::string fingerprint() const {
        nlohmann::json j;
        if (qpca) j["qpca"] = to_json(*qpca);
        if (vpca) j["vpca"] = to_json(*vpca);
        j["origami_reducer"] = origami_reducer.to_json();
        j["reducer"] = reducer.to_json();
        j["model"] = to_json(model);
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(detail::fnv1a(j.dump())));
        return buf;
    }
};

namespace detail {

// Per-instance feature blocks before any fitted transform.
struct RawBlocks {
    std::vector<QuatVector> quats;
    FeatureMatrix vectors;  // vpca input
    std::vector<FeatureMatrix> direct;  // one matrix per feature block, in recipe order (empty if fitted)
};

inline FeatureTag block_tag(FeatureBlock b) {
    switch (b) {
        case FeatureBlock::qpca: return FeatureTag::quaternion_pca;
        case FeatureBlock::vpca: return FeatureTag::vector_pca;
        case FeatureBlock::dtnnp: return FeatureTag::dtnnp;
        case FeatureBlock::dtnnp_mag: return FeatureTag::dtnnp_magnified;
        case FeatureBlock::phog: return FeatureTag::phog;
        case FeatureBlock::phog_mag: return FeatureTag::phog_magnified;
        case FeatureBlock::origami: return FeatureTag::origami;
    }
    return FeatureTag::mixed;
}

inline FeatureMatrix rows_to_matrix(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    FeatureMatrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.front().size()) throw ValidationError("feature vectors have inconsistent lengths");
        for (std::size_t c = 0; c < rows[r].size(); ++c) M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return M;
}

inline std::vector<double> block_values(FeatureBlock b, const LabeledInstance& inst, const PipelineConfig& c) {
    switch (b) {
        case FeatureBlock::dtnnp: return dtnnp(*inst.landmarks).values;
        case FeatureBlock::dtnnp_mag: return dtnnp(magnified(*inst.landmarks, c), FeatureTag::dtnnp_magnified).values;
        case FeatureBlock::phog:
            if (inst.image) return phog(*inst.image).values;
            return phog(rasterize_landmarks(peak_frame(*inst.landmarks))).values;
        case FeatureBlock::phog_mag:
            return phog(rasterize_landmarks(peak_frame(magnified(*inst.landmarks, c))), FeatureTag::phog_magnified).values;
        case FeatureBlock::origami:
            return origami_descriptor(peak_frame(*inst.landmarks), static_cast<std::size_t>(c.origami_nodes),
                                      static_cast<std::size_t>(c.origami_edges))
                .values;
        default: break;
    }
    throw Error("feature block has no direct extractor");
}

inline std::vector<double> eeg_vector(const EegRecording& rec) {
    std::vector<double> v;
    for (const auto& name : {"F7", "F8", "AF3", "AF4"}) {
        const auto s = rec.channel(name);
        v.insert(v.end(), s.begin(), s.end());
    }
    return v;
}

inline RawBlocks raw_blocks(const PipelineConfig& c, const Dataset& ds) {
    RawBlocks rb;
    const bool need_eeg = std::any_of(c.features.begin(), c.features.end(),
                                      [](auto f) { return f == FeatureBlock::qpca || f == FeatureBlock::vpca; });
    std::vector<std::vector<double>> vecs;
    if (need_eeg) {
        const auto map = ChannelMap::preset(c.qpca_map);
        for (const auto& inst : ds.instances) {
            const auto rec = condition_eeg(*inst.eeg, c);
            rb.quats.push_back(eeg_to_quats(rec, map));
            vecs.push_back(eeg_vector(rec));
        }
        rb.vectors = rows_to_matrix(vecs);
    }
    for (auto f : c.features) {
        if (f == FeatureBlock::qpca || f == FeatureBlock::vpca) {
            rb.direct.emplace_back();
            continue;
        }
        std::vector<std::vector<double>> rows;
        for (const auto& inst : ds.instances) rows.push_back(block_values(f, inst, c));
        rb.direct.push_back(rows_to_matrix(rows));
    }
    return rb;
}

inline FeatureMatrix hconcat(const std::vector<FeatureMatrix>& parts) {
    Eigen::Index cols = 0;
    for (const auto& p : parts) cols += p.cols();
    FeatureMatrix out(parts.front().rows(), cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.middleCols(at, p.cols()) = p;
        at += p.cols();
    }
    return out;
}

inline FeatureMatrix qpca_matrix(const QpcaModel& m, const std::vector<QuatVector>& quats) {
    std::vector<std::vector<double>> rows;
    for (const auto& q : quats) rows.push_back(quaternion_pca_project(m, q).values);
    return rows_to_matrix(rows);
}

}  // namespace detail

/// Features of `ds` under a fitted pipeline (no refitting).
inline FeatureMatrix pipeline_features(const FittedPipeline& fp, const Dataset& ds) {
    const auto& c = fp.config;
    auto rb = detail::raw_blocks(c, ds);
    std::vector<FeatureMatrix> parts;
    for (std::size_t b = 0; b < c.features.size(); ++b) {
        switch (c.features[b]) {
            case FeatureBlock::qpca: parts.push_back(detail::qpca_matrix(*fp.qpca, rb.quats)); break;
            case FeatureBlock::vpca: parts.push_back(fp.vpca->transform(rb.vectors)); break;
            case FeatureBlock::origami: parts.push_back(fp.origami_reducer.transform(rb.direct[b])); break;
            default: parts.push_back(rb.direct[b]);
        }
    }
    return fp.reducer.transform(detail::hconcat(parts));
}

inline FittedPipeline pipeline_fit(const PipelineConfig& c, const Dataset& train, FeatureMatrix* train_features = nullptr) {
    validate(c);
    check_modalities(c, train);
    FittedPipeline fp;
    fp.config = c;
    auto rb = detail::raw_blocks(c, train);
    std::vector<FeatureMatrix> parts;
    for (std::size_t b = 0; b < c.features.size(); ++b) {
        switch (c.features[b]) {
            case FeatureBlock::qpca:
                fp.qpca = quaternion_pca_fit(rb.quats, static_cast<std::size_t>(c.qpca_k), c.qpca_solver);
                parts.push_back(detail::qpca_matrix(*fp.qpca, rb.quats));
                break;
            case FeatureBlock::vpca: {
                const auto k = std::min<Eigen::Index>(c.vpca_k, std::min(rb.vectors.rows(), rb.vectors.cols()));
                fp.vpca = pca_fit(rb.vectors, k);
                parts.push_back(fp.vpca->transform(rb.vectors));
                break;
            }
            case FeatureBlock::origami: {
                FeatureMatrix reduced;
                fp.origami_reducer = fit_reducer(c.origami_reduce, rb.direct[b], c.origami_dims, c.tsne, &reduced);
                parts.push_back(std::move(reduced));
                break;
            }
            default: parts.push_back(rb.direct[b]);
        }
    }
    FeatureMatrix X;
    if (c.reduce == Reducer::none) {
        for (std::size_t b = 0; b < c.features.size(); ++b) {
            const auto names = column_names(detail::block_tag(c.features[b]), static_cast<std::size_t>(parts[b].cols()));
            fp.columns.insert(fp.columns.end(), names.begin(), names.end());
        }
    }
    fp.reducer = fit_reducer(c.reduce, detail::hconcat(parts), c.reduce_k, c.tsne, &X);
    if (c.reduce != Reducer::none)
        for (Eigen::Index i = 0; i < X.cols(); ++i) fp.columns.push_back(std::string(to_string(c.reduce)) + "_" + std::to_string(i));
    fp.model = affect::train(c.classifier, X, train.labels());
    if (train_features) *train_features = X;
    return fp;
}

inline Labels pipeline_predict(const FittedPipeline& fp, const Dataset& test) {
    if (test.instances.empty()) return {};
    return predict(fp.model, pipeline_features(fp, test));
}

inline EvalReport evaluate(const PipelineConfig& c, const Dataset& ds, int jobs = 1) {
    validate(c);
    check_modalities(c, ds);
    return kfold_leave_persons_out(
        ds, c.folds,
        [&c](const Dataset& train, const Dataset& test) {
            const auto fp = pipeline_fit(c, train);
            return FoldOutput{pipeline_predict(fp, test), fp.fingerprint()};
        },
        c.eval_seed, jobs);
}

}  // namespace affect
