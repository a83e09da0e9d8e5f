#pragma once

// Confusion matrices, precision / recall / F1, and leave-persons-out
// cross-validation.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "affect/classify.hpp"
#include "affect/dataio.hpp"
#include "affect/error.hpp"

namespace affect {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::vector<std::string> class_names)
        : names_(std::move(class_names)), counts_(names_.size() * names_.size(), 0) {}
    explicit ConfusionMatrix(std::size_t n_classes) : ConfusionMatrix(default_names(n_classes)) {}

    static ConfusionMatrix from_rows(const std::vector<std::vector<std::int64_t>>& rows,
                                     std::vector<std::string> names = {}) {
        if (names.empty()) names = default_names(rows.size());
        ConfusionMatrix cm(std::move(names));
        if (rows.size() != cm.size()) throw ParameterError("confusion matrix: row count does not match class count");
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != cm.size()) throw ParameterError("confusion matrix must be square");
            for (std::size_t c = 0; c < rows.size(); ++c) {
                if (rows[r][c] < 0) throw ParameterError("confusion matrix entries must be non-negative");
                cm.at(r, c) = rows[r][c];
            }
        }
        return cm;
    }

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& class_names() const { return names_; }

    std::int64_t& at(std::size_t truth, std::size_t pred) { return counts_.at(truth * size() + pred); }
    std::int64_t at(std::size_t truth, std::size_t pred) const { return counts_.at(truth * size() + pred); }

    void add(int truth, int pred, std::int64_t n = 1) {
        if (truth < 0 || pred < 0 || static_cast<std::size_t>(truth) >= size() || static_cast<std::size_t>(pred) >= size())
            throw ParameterError("confusion matrix: class index out of range");
        at(static_cast<std::size_t>(truth), static_cast<std::size_t>(pred)) += n;
    }

    std::int64_t total() const {
        std::int64_t t = 0;
        for (auto v : counts_) t += v;
        return t;
    }

    std::int64_t row_sum(std::size_t r) const {
        std::int64_t s = 0;
        for (std::size_t c = 0; c < size(); ++c) s += at(r, c);
        return s;
    }

    ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
        if (o.size() != size()) throw ParameterError("confusion matrix size mismatch");
        for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
        return *this;
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    static std::vector<std::string> default_names(std::size_t n) {
        std::vector<std::string> v;
        for (std::size_t i = 0; i < n; ++i) v.push_back(std::to_string(i));
        return v;
    }

    std::vector<std::string> names_;
    std::vector<std::int64_t> counts_;
};

struct ClassMetrics {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct FoldSummary {
    std::vector<std::string> test_subjects;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::string model_fingerprint;
};

struct EvalReport {
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    double accuracy = 0.0;
    ConfusionMatrix confusion;
    std::vector<EvalReport> folds;
    std::vector<FoldSummary> fold_info;
    // Unweighted mean of the per-fold metrics, for comparison with the
    // aggregated values above.
    double fold_mean_macro_f1 = 0.0, fold_mean_accuracy = 0.0;
};

/// One-vs-rest counts per class. Undefined precision or recall is 0, as is
/// F1 when P + R = 0. Accuracy is the trace over the total.
inline EvalReport metrics(const ConfusionMatrix& cm) {
    EvalReport r;
    r.confusion = cm;
    const std::size_t n = cm.size();
    const std::int64_t total = cm.total();
    std::int64_t trace = 0;
    for (std::size_t c = 0; c < n; ++c) {
        ClassMetrics m;
        m.tp = cm.at(c, c);
        for (std::size_t o = 0; o < n; ++o) {
            if (o == c) continue;
            m.fp += cm.at(o, c);
            m.fn += cm.at(c, o);
        }
        m.tn = total - m.tp - m.fp - m.fn;
        m.precision = (m.tp + m.fp) > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
        m.recall = (m.tp + m.fn) > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
        m.f1 = (m.precision + m.recall) > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        trace += m.tp;
        r.macro_precision += m.precision;
        r.macro_recall += m.recall;
        r.macro_f1 += m.f1;
        r.per_class.push_back(m);
    }
    if (n > 0) {
        r.macro_precision /= static_cast<double>(n);
        r.macro_recall /= static_cast<double>(n);
        r.macro_f1 /= static_cast<double>(n);
    }
    r.accuracy = total > 0 ? static_cast<double>(trace) / static_cast<double>(total) : 0.0;
    return r;
}

inline ConfusionMatrix confusion_from_labels(const Labels& truth, const Labels& pred, std::vector<std::string> names) {
    if (truth.size() != pred.size()) throw ParameterError("confusion matrix: label vectors differ in length");
    ConfusionMatrix cm(std::move(names));
    for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], pred[i]);
    return cm;
}

// ---------------------------------------------------------------------------
// Leave-persons-out

/// Assigns each subject to one of n_folds groups: subjects are sorted,
/// shuffled with the seed, and dealt round-robin.
inline std::vector<std::vector<std::string>> partition_subjects(std::vector<std::string> subjects, int n_folds,
                                                                std::uint64_t seed) {
    std::sort(subjects.begin(), subjects.end());
    subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
    if (n_folds < 2) throw ParameterError("leave-persons-out needs at least 2 folds");
    if (static_cast<std::size_t>(n_folds) > subjects.size())
        throw ParameterError("leave-persons-out: " + std::to_string(n_folds) + " folds but only " +
                             std::to_string(subjects.size()) + " subjects");
    std::mt19937_64 rng(seed);
    for (std::size_t i = subjects.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(subjects[i - 1], subjects[j]);
    }
    std::vector<std::vector<std::string>> folds(static_cast<std::size_t>(n_folds));
    for (std::size_t i = 0; i < subjects.size(); ++i) folds[i % folds.size()].push_back(subjects[i]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

struct FoldOutput {
    Labels predictions;
    std::string model_fingerprint;
};

/// Fits on the training subset, predicts the test subset.
using FitPredict = std::function<FoldOutput(const Dataset& train, const Dataset& test)>;

inline EvalReport kfold_leave_persons_out(const Dataset& ds, int n_folds, const FitPredict& fit_predict,
                                          std::uint64_t seed, int jobs = 1) {
    ds.validate();
    {
        std::map<std::string, std::set<int>> seen;
        for (const auto& inst : ds.instances) seen[inst.subject_id].insert(inst.label);
        for (const auto& [s, labels] : seen)
            if (labels.size() == 1) warn("subject " + s + " has instances of only one class");
    }
    const auto folds = partition_subjects(ds.subjects(), n_folds, seed);
    std::vector<std::vector<std::size_t>> train_idx(folds.size()), test_idx(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const std::set<std::string> held(folds[f].begin(), folds[f].end());
        for (std::size_t i = 0; i < ds.instances.size(); ++i)
            (held.count(ds.instances[i].subject_id) ? test_idx[f] : train_idx[f]).push_back(i);
    }

    std::vector<FoldOutput> outputs(folds.size());
    std::vector<std::exception_ptr> errors(folds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t f = next++; f < folds.size(); f = next++) {
            try {
                outputs[f] = fit_predict(ds.subset(train_idx[f]), ds.subset(test_idx[f]));
            } catch (...) {
                errors[f] = std::current_exception();
            }
        }
    };
    const auto n_threads = static_cast<std::size_t>(std::clamp(jobs, 1, n_folds));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    EvalReport report;
    report.confusion = ConfusionMatrix(ds.class_names);
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const auto& out = outputs[f];
        if (out.predictions.size() != test_idx[f].size()) throw Error("pipeline returned the wrong number of predictions");
        Labels truth;
        for (auto i : test_idx[f]) truth.push_back(ds.instances[i].label);
        const auto cm = confusion_from_labels(truth, out.predictions, ds.class_names);
        report.confusion += cm;
        report.folds.push_back(metrics(cm));
        report.fold_info.push_back({folds[f], train_idx[f].size(), test_idx[f].size(), out.model_fingerprint});
    }
    auto agg = metrics(report.confusion);
    agg.folds = std::move(report.folds);
    agg.fold_info = std::move(report.fold_info);
    for (const auto& f : agg.folds) {
        agg.fold_mean_macro_f1 += f.macro_f1;
        agg.fold_mean_accuracy += f.accuracy;
    }
    agg.fold_mean_macro_f1 /= static_cast<double>(agg.folds.size());
    agg.fold_mean_accuracy /= static_cast<double>(agg.folds.size());
    return agg;
}

// ---------------------------------------------------------------------------
// Export

inline nlohmann::json confusion_json(const ConfusionMatrix& cm) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < cm.size(); ++r) {
        std::vector<std::int64_t> row;
        for (std::size_t c = 0; c < cm.size(); ++c) row.push_back(cm.at(r, c));
        rows.push_back(row);
    }
    return {{"classes", cm.class_names()}, {"rows", rows}};
}

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json j;
    j["accuracy"] = r.accuracy;
    j["macro_precision"] = r.macro_precision;
    j["macro_recall"] = r.macro_recall;
    j["macro_f1"] = r.macro_f1;
    j["per_class"] = nlohmann::json::array();
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& m = r.per_class[c];
        j["per_class"].push_back({{"class", r.confusion.class_names().at(c)},
                                  {"precision", m.precision},
                                  {"recall", m.recall},
                                  {"f1", m.f1},
                                  {"tp", m.tp},
                                  {"fp", m.fp},
                                  {"fn", m.fn},
                                  {"tn", m.tn}});
    }
    j["confusion"] = confusion_json(r.confusion);
    if (!r.folds.empty()) {
        j["fold_mean"] = {{"macro_f1", r.fold_mean_macro_f1}, {"accuracy", r.fold_mean_accuracy}};
        j["folds"] = nlohmann::json::array();
        for (std::size_t f = 0; f < r.folds.size(); ++f) {
            nlohmann::json jf{{"accuracy", r.folds[f].accuracy},
                              {"macro_precision", r.folds[f].macro_precision},
                              {"macro_recall", r.folds[f].macro_recall},
                              {"macro_f1", r.folds[f].macro_f1},
                              {"confusion", confusion_json(r.folds[f].confusion)}};
            if (f < r.fold_info.size()) {
                jf["test_subjects"] = r.fold_info[f].test_subjects;
                jf["train_size"] = r.fold_info[f].train_size;
                jf["test_size"] = r.fold_info[f].test_size;
                jf["model_fingerprint"] = r.fold_info[f].model_fingerprint;
            }
            j["folds"].push_back(std::move(jf));
        }
    }
    return j;
}

/// One row per class plus a macro row.
inline std::string format_report_csv(const EvalReport& r) {
    std::ostringstream out;
    out << "class,precision,recall,f1,tp,fp,fn,tn\n";
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& m = r.per_class[c];
        out << r.confusion.class_names().at(c) << ',' << detail::format_double(m.precision) << ','
            << detail::format_double(m.recall) << ',' << detail::format_double(m.f1) << ',' << m.tp << ',' << m.fp << ','
            << m.fn << ',' << m.tn << '\n';
    }
    out << "macro," << detail::format_double(r.macro_precision) << ',' << detail::format_double(r.macro_recall) << ','
        << detail::format_double(r.macro_f1) << ",,,,\n";
    out << "accuracy,,," << detail::format_double(r.accuracy) << ",,,,\n";
    return out.str();
}

/// Aligned text table of a confusion matrix.
inline std::string format_confusion_table(const ConfusionMatrix& cm) {
    std::size_t w = 5;
    for (const auto& n : cm.class_names()) w = std::max(w, n.size());
    for (std::size_t r = 0; r < cm.size(); ++r)
        for (std::size_t c = 0; c < cm.size(); ++c) w = std::max(w, std::to_string(cm.at(r, c)).size());
    std::ostringstream out;
    out << std::setw(static_cast<int>(w)) << "" << " |";
    for (const auto& n : cm.class_names()) out << ' ' << std::setw(static_cast<int>(w)) << n;
    out << '\n' << std::string(w + 2 + (w + 1) * cm.size(), '-') << '\n';
    for (std::size_t r = 0; r < cm.size(); ++r) {
        out << std::setw(static_cast<int>(w)) << cm.class_names()[r] << " |";
        for (std::size_t c = 0; c < cm.size(); ++c) out << ' ' << std::setw(static_cast<int>(w)) << cm.at(r, c);
        out << '\n';
    }
    return out.str();
}

}  // namespace affect
