#pragma once

// Classifier backends: kNN, one-vs-all SVM (SMO), GentleBoost, AdaBoost.M2
// and random forests. Labels are arbitrary integers; ties always resolve to
// the smallest class id.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "affect/error.hpp"
#include "affect/types.hpp"

namespace affect {

using Labels = std::vector<int>;

namespace detail {

inline std::vector<int> unique_classes(const Labels& y) {
    std::vector<int> c(y.begin(), y.end());
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    return c;
}

inline std::vector<int> class_indices(const Labels& y, const std::vector<int>& classes) {
    std::vector<int> idx(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        idx[i] = static_cast<int>(std::lower_bound(classes.begin(), classes.end(), y[i]) - classes.begin());
    return idx;
}

inline void check_training_set(const FeatureMatrix& X, const Labels& y) {
    if (X.rows() == 0) throw ParameterError("empty training set");
    if (static_cast<std::size_t>(X.rows()) != y.size()) throw ParameterError("feature rows and labels differ in count");
    if (!X.allFinite()) throw ParameterError("training features must be finite");
}

// Index of the largest score; the first (smallest class) wins ties.
template <class Scores>
inline std::size_t argmax_first(const Scores& s) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < static_cast<std::size_t>(s.size()); ++i)
        if (s[i] > s[best]) best = i;
    return best;
}

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        j.push_back(row);
    }
    return j;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
    return m;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> vector_json(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace detail

/// Train-set mean / standard deviation scaling; constant columns keep scale 1.
struct Standardizer {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale;

    static Standardizer fit(const FeatureMatrix& X) {
        Standardizer s;
        s.mean = X.colwise().mean();
        s.scale.resize(X.cols());
        for (Eigen::Index c = 0; c < X.cols(); ++c) {
            const double var = X.rows() > 1 ? (X.col(c).array() - s.mean(c)).square().sum() / static_cast<double>(X.rows() - 1) : 0.0;
            s.scale(c) = var > 0 ? std::sqrt(var) : 1.0;
        }
        return s;
    }

    FeatureMatrix apply(const FeatureMatrix& X) const {
        if (X.cols() != mean.size()) throw ParameterError("standardizer: feature count mismatch");
        return (X.rowwise() - mean).array().rowwise() / scale.array();
    }

    nlohmann::json to_json() const {
        return {{"mean", detail::vector_json(mean.transpose())}, {"scale", detail::vector_json(scale.transpose())}};
    }
    static Standardizer from_json(const nlohmann::json& j) {
        return {detail::vector_from_json(j.at("mean")).transpose(), detail::vector_from_json(j.at("scale")).transpose()};
    }
};

// ---------------------------------------------------------------------------
// kNN

enum class DistanceMetric { euclidean, cityblock, cosine, correlation };
enum class KnnRule { majority, weighted };

inline std::string_view to_string(DistanceMetric m) {
    switch (m) {
        case DistanceMetric::euclidean: return "euclidean";
        case DistanceMetric::cityblock: return "cityblock";
        case DistanceMetric::cosine: return "cosine";
        case DistanceMetric::correlation: return "correlation";
    }
    return "?";
}

inline DistanceMetric parse_metric(std::string_view s) {
    for (auto m : {DistanceMetric::euclidean, DistanceMetric::cityblock, DistanceMetric::cosine, DistanceMetric::correlation})
        if (to_string(m) == s) return m;
    throw ValidationError("unknown distance metric '" + std::string(s) + "'");
}

inline std::string_view to_string(KnnRule r) { return r == KnnRule::majority ? "majority" : "weighted"; }

inline KnnRule parse_knn_rule(std::string_view s) {
    if (s == "majority") return KnnRule::majority;
    if (s == "weighted") return KnnRule::weighted;
    throw ValidationError("unknown kNN rule '" + std::string(s) + "'");
}

namespace detail {

inline double euclidean(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) { return (a - b).norm(); }

}  // namespace detail

/// Distance under `metric`; cosine and correlation fall back to euclidean
/// when either vector has zero norm (after centring, for correlation).
inline double metric_distance(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b, DistanceMetric metric,
                              bool* fell_back = nullptr) {
    if (fell_back) *fell_back = false;
    switch (metric) {
        case DistanceMetric::euclidean: return detail::euclidean(a, b);
        case DistanceMetric::cityblock: return (a - b).cwiseAbs().sum();
        case DistanceMetric::cosine:
        case DistanceMetric::correlation: {
            Eigen::RowVectorXd u = a, v = b;
            if (metric == DistanceMetric::correlation) {
                u.array() -= u.mean();
                v.array() -= v.mean();
            }
            const double nu = u.norm(), nv = v.norm();
            if (!(nu > 0) || !(nv > 0)) {
                if (fell_back) *fell_back = true;
                return detail::euclidean(a, b);
            }
            return 1.0 - u.dot(v) / (nu * nv);
        }
    }
    return 0.0;
}

/// Similarity used by the weighted rule.
inline double metric_similarity(double dist, DistanceMetric metric, bool fell_back) {
    if (!fell_back && (metric == DistanceMetric::cosine || metric == DistanceMetric::correlation)) return 1.0 - dist;
    return 1.0 / (1.0 + dist);
}

struct KnnModel {
    FeatureMatrix X;
    std::vector<int> y;  // class indices
    int k = 1;
    DistanceMetric metric = DistanceMetric::cosine;
    KnnRule rule = KnnRule::majority;
};

// ---------------------------------------------------------------------------
// SVM

enum class KernelKind { linear, quadratic, rbf };

inline std::string_view to_string(KernelKind k) {
    switch (k) {
        case KernelKind::linear: return "linear";
        case KernelKind::quadratic: return "quadratic";
        case KernelKind::rbf: return "rbf";
    }
    return "?";
}

inline KernelKind parse_kernel(std::string_view s) {
    for (auto k : {KernelKind::linear, KernelKind::quadratic, KernelKind::rbf})
        if (to_string(k) == s) return k;
    throw ValidationError("unknown SVM kernel '" + std::string(s) + "'");
}

struct Kernel {
    KernelKind kind = KernelKind::linear;
    double gamma = 1.0;

    double operator()(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) const {
        switch (kind) {
            case KernelKind::linear: return a.dot(b);
            case KernelKind::quadratic: {
                const double v = a.dot(b) + 1.0;
                return v * v;
            }
            case KernelKind::rbf: return std::exp(-gamma * (a - b).squaredNorm());
        }
        return 0.0;
    }

    Eigen::MatrixXd gram(const FeatureMatrix& A, const FeatureMatrix& B) const {
        if (kind == KernelKind::linear) return A * B.transpose();
        if (kind == KernelKind::quadratic) return (A * B.transpose()).array().unaryExpr([](double v) { return (v + 1) * (v + 1); });
        Eigen::MatrixXd K(A.rows(), B.rows());
        for (Eigen::Index i = 0; i < A.rows(); ++i)
            for (Eigen::Index j = 0; j < B.rows(); ++j) K(i, j) = std::exp(-gamma * (A.row(i) - B.row(j)).squaredNorm());
        return K;
    }
};

struct SvmParams {
    KernelKind kernel = KernelKind::linear;
    double C = 1.0;
    double gamma = 0.0;  // 0 selects 1 / D
    double tolerance = 1e-3;
    int max_iterations = 1000000;
    bool record_trace = false;
};

/// Binary soft-margin SVM in dual form: f(x) = sum_i coef_i K(sv_i, x) - rho.
struct BinarySvm {
    Eigen::VectorXd alpha;  // per training point
    Eigen::VectorXd coef;   // alpha_i y_i for support vectors
    FeatureMatrix support;
    double rho = 0.0;
    int iterations = 0;
    std::vector<double> dual_trace;  // dual objective after each update
};

namespace detail {

/// SMO with maximal-violating-pair working-set selection on a precomputed
/// kernel matrix. y in {-1, +1}.
inline BinarySvm smo_solve(const Eigen::MatrixXd& K, const std::vector<double>& y, const SvmParams& p) {
    const auto n = static_cast<Eigen::Index>(y.size());
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd G = -Eigen::VectorXd::Ones(n);  // gradient of 0.5 a'Qa - e'a
    const double C = p.C;
    auto Q = [&](Eigen::Index i, Eigen::Index j) { return y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)] * K(i, j); };
    auto in_up = [&](Eigen::Index t) {
        const double yt = y[static_cast<std::size_t>(t)];
        return (yt > 0 && alpha(t) < C) || (yt < 0 && alpha(t) > 0);
    };
    auto in_low = [&](Eigen::Index t) {
        const double yt = y[static_cast<std::size_t>(t)];
        return (yt > 0 && alpha(t) > 0) || (yt < 0 && alpha(t) < C);
    };

    BinarySvm out;
    double dual = 0.0;
    int iter = 0;
    for (; iter < p.max_iterations; ++iter) {
        Eigen::Index i = -1, j = -1;
        double gmax = -std::numeric_limits<double>::infinity(), gmin = std::numeric_limits<double>::infinity();
        for (Eigen::Index t = 0; t < n; ++t) {
            const double v = -y[static_cast<std::size_t>(t)] * G(t);
            if (in_up(t) && v > gmax) {
                gmax = v;
                i = t;
            }
            if (in_low(t) && v < gmin) {
                gmin = v;
                j = t;
            }
        }
        if (i < 0 || j < 0 || gmax - gmin < p.tolerance) break;

        const double yi = y[static_cast<std::size_t>(i)], yj = y[static_cast<std::size_t>(j)];
        double quad = K(i, i) + K(j, j) - 2.0 * K(i, j);
        if (quad <= 0) quad = 1e-12;
        const double ai_old = alpha(i), aj_old = alpha(j);
        // Move along y_i d_i = -y_j d_j by the unconstrained optimum, then clip.
        double step = (gmax - gmin) / quad;
        // Feasible range for the step s with alpha_i += y_i s, alpha_j -= y_j s.
        double smax = std::numeric_limits<double>::infinity();
        smax = std::min(smax, yi > 0 ? C - ai_old : ai_old);
        smax = std::min(smax, yj > 0 ? aj_old : C - aj_old);
        step = std::clamp(step, 0.0, smax);
        alpha(i) = ai_old + yi * step;
        alpha(j) = aj_old - yj * step;
        if (alpha(i) < 1e-15 * C) alpha(i) = 0.0;
        if (alpha(j) < 1e-15 * C) alpha(j) = 0.0;
        if (alpha(i) > C * (1 - 1e-15)) alpha(i) = C;
        if (alpha(j) > C * (1 - 1e-15)) alpha(j) = C;
        const double di = alpha(i) - ai_old, dj = alpha(j) - aj_old;
        for (Eigen::Index t = 0; t < n; ++t) G(t) += Q(t, i) * di + Q(t, j) * dj;
        if (p.record_trace) {
            // dual = e'a - 0.5 a'Qa = -0.5 a'(G - e) + ... computed directly from G: a'Qa = a'(G + e)
            dual = alpha.sum() - 0.5 * alpha.dot(G + Eigen::VectorXd::Ones(n));
            out.dual_trace.push_back(dual);
        }
    }
    out.iterations = iter;

    // rho from free vectors, else the middle of the feasible interval.
    double sum = 0.0;
    int free = 0;
    double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
        const double yg = y[static_cast<std::size_t>(t)] * G(t);
        if (alpha(t) > 0 && alpha(t) < C) {
            sum += yg;
            ++free;
        } else {
            const bool upper = (alpha(t) >= C);
            const double yt = y[static_cast<std::size_t>(t)];
            if ((upper && yt < 0) || (!upper && yt > 0))
                ub = std::min(ub, yg);
            else
                lb = std::max(lb, yg);
        }
    }
    if (free > 0)
        out.rho = sum / free;
    else if (std::isfinite(ub) && std::isfinite(lb))
        out.rho = 0.5 * (ub + lb);
    else
        out.rho = std::isfinite(ub) ? ub : (std::isfinite(lb) ? lb : 0.0);
    out.alpha = alpha;
    return out;
}

}  // namespace detail

struct SvmModel {
    Standardizer standardizer;
    Kernel kernel;
    double C = 1.0;
    std::vector<BinarySvm> machines;  // one per class, that class positive

    Eigen::VectorXd decision_values(const Eigen::RowVectorXd& x_raw) const {
        const Eigen::RowVectorXd x = standardizer.apply(x_raw);
        Eigen::VectorXd d(static_cast<Eigen::Index>(machines.size()));
        for (std::size_t c = 0; c < machines.size(); ++c) {
            const auto& m = machines[c];
            double f = -m.rho;
            for (Eigen::Index s = 0; s < m.support.rows(); ++s) f += m.coef(s) * kernel(m.support.row(s), x);
            d(static_cast<Eigen::Index>(c)) = f;
        }
        return d;
    }
};

// ---------------------------------------------------------------------------
// Boosting

/// Decision stump on one feature: left if x[feature] <= threshold.
struct RegressionStump {
    int feature = 0;
    double threshold = 0.0;
    double left = 0.0;
    double right = 0.0;

    double operator()(const Eigen::RowVectorXd& x) const { return x(feature) <= threshold ? left : right; }
};

struct GentleBoostModel {
    Standardizer standardizer;
    std::vector<RegressionStump> stumps;
    std::vector<double> train_exp_loss;  // after each round

    double score(const Eigen::RowVectorXd& x_raw) const {
        const Eigen::RowVectorXd x = standardizer.apply(x_raw);
        double f = 0.0;
        for (const auto& s : stumps) f += s(x);
        return f;
    }
};

/// Multiclass stump: h(x, c) in {0, 1} per side and class.
struct ClassStump {
    int feature = 0;
    double threshold = 0.0;
    std::vector<std::uint8_t> left;
    std::vector<std::uint8_t> right;
};

struct AdaBoostM2Model {
    Standardizer standardizer;
    std::vector<ClassStump> stumps;
    std::vector<double> weights;  // log(1 / beta)

    Eigen::VectorXd scores(const Eigen::RowVectorXd& x_raw, std::size_t n_classes) const {
        const Eigen::RowVectorXd x = standardizer.apply(x_raw);
        Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_classes));
        for (std::size_t t = 0; t < stumps.size(); ++t) {
            const auto& h = x(stumps[t].feature) <= stumps[t].threshold ? stumps[t].left : stumps[t].right;
            for (std::size_t c = 0; c < n_classes; ++c) s(static_cast<Eigen::Index>(c)) += weights[t] * h[c];
        }
        return s;
    }
};

namespace detail {

struct SortedColumns {
    std::vector<std::vector<int>> order;  // per feature, instance indices by value
    std::vector<bool> constant;
};

inline SortedColumns sort_columns(const FeatureMatrix& X) {
    SortedColumns s;
    s.order.resize(static_cast<std::size_t>(X.cols()));
    s.constant.resize(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index f = 0; f < X.cols(); ++f) {
        auto& o = s.order[static_cast<std::size_t>(f)];
        o.resize(static_cast<std::size_t>(X.rows()));
        std::iota(o.begin(), o.end(), 0);
        std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return X(a, f) < X(b, f); });
        s.constant[static_cast<std::size_t>(f)] = X(o.front(), f) == X(o.back(), f);
    }
    return s;
}

inline RegressionStump fit_regression_stump(const FeatureMatrix& X, const SortedColumns& cols, const std::vector<double>& y,
                                            const std::vector<double>& w) {
    const std::size_t n = y.size();
    double tw = 0, twy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        tw += w[i];
        twy += w[i] * y[i];
    }
    RegressionStump best;
    best.feature = 0;
    best.threshold = std::numeric_limits<double>::infinity();
    best.left = best.right = tw > 0 ? twy / tw : 0.0;
    // Weighted squared error = sum w y^2 - (Swy_l^2 / Sw_l + Swy_r^2 / Sw_r); maximise the gain term.
    double best_gain = tw > 0 ? twy * twy / tw : 0.0;
    for (std::size_t f = 0; f < cols.order.size(); ++f) {
        if (cols.constant[f]) continue;
        const auto& o = cols.order[f];
        const auto fi = static_cast<Eigen::Index>(f);
        double lw = 0, lwy = 0;
        for (std::size_t r = 0; r + 1 < n; ++r) {
            const int i = o[r];
            lw += w[static_cast<std::size_t>(i)];
            lwy += w[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
            const double xv = X(i, fi), xn = X(o[r + 1], fi);
            if (xv == xn) continue;
            const double rw = tw - lw, rwy = twy - lwy;
            if (lw <= 0 || rw <= 0) continue;
            const double gain = lwy * lwy / lw + rwy * rwy / rw;
            if (gain > best_gain * (1 + 1e-12) + 1e-300) {
                best_gain = gain;
                best.feature = static_cast<int>(f);
                best.threshold = 0.5 * (xv + xn);
                best.left = lwy / lw;
                best.right = rwy / rw;
            }
        }
    }
    return best;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Random forest

struct TreeNodeRF {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int label = 0;  // class index for leaves
};

struct DecisionTree {
    std::vector<TreeNodeRF> nodes;

    int predict(const Eigen::RowVectorXd& x) const {
        int at = 0;
        while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
            const auto& nd = nodes[static_cast<std::size_t>(at)];
            at = x(nd.feature) <= nd.threshold ? nd.left : nd.right;
        }
        return nodes[static_cast<std::size_t>(at)].label;
    }
};

struct ForestParams {
    int n_trees = 100;
    int max_depth = 0;  // 0 = unlimited
    bool bootstrap = true;
    std::uint64_t seed = 0;
};

struct ForestModel {
    std::vector<DecisionTree> trees;
};

namespace detail {

class TreeBuilder {
public:
    TreeBuilder(const FeatureMatrix& X, const std::vector<int>& y, std::size_t n_classes, const std::vector<int>& candidates,
                int max_depth, std::mt19937_64& rng)
        : X_(X), y_(y), n_classes_(n_classes), candidates_(candidates), max_depth_(max_depth), rng_(rng) {}

    DecisionTree build(std::vector<int> rows) {
        DecisionTree t;
        grow(t, rows, 0);
        return t;
    }

private:
    int majority(const std::vector<int>& rows) const {
        std::vector<int> cnt(n_classes_, 0);
        for (int r : rows) ++cnt[static_cast<std::size_t>(y_[static_cast<std::size_t>(r)])];
        return static_cast<int>(argmax_first(cnt));
    }

    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double impurity = std::numeric_limits<double>::infinity();
    };

    Split best_split(const std::vector<int>& rows, const std::vector<int>& features) const {
        Split best;
        const std::size_t n = rows.size();
        std::vector<int> order(rows);
        std::vector<double> left(n_classes_), total(n_classes_, 0.0);
        for (int r : rows) total[static_cast<std::size_t>(y_[static_cast<std::size_t>(r)])] += 1;
        for (int f : features) {
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return X_(a, f) < X_(b, f); });
            std::fill(left.begin(), left.end(), 0.0);
            for (std::size_t k = 0; k + 1 < n; ++k) {
                left[static_cast<std::size_t>(y_[static_cast<std::size_t>(order[k])])] += 1;
                const double xv = X_(order[k], f), xn = X_(order[k + 1], f);
                if (xv == xn) continue;
                const double nl = static_cast<double>(k + 1), nr = static_cast<double>(n - k - 1);
                double gl = 1.0, gr = 1.0;
                for (std::size_t c = 0; c < n_classes_; ++c) {
                    gl -= (left[c] / nl) * (left[c] / nl);
                    const double rc = total[c] - left[c];
                    gr -= (rc / nr) * (rc / nr);
                }
                const double imp = nl * gl + nr * gr;
                if (imp < best.impurity - 1e-12) {
                    best.impurity = imp;
                    best.feature = f;
                    best.threshold = 0.5 * (xv + xn);
                }
            }
        }
        return best;
    }

    int grow(DecisionTree& t, const std::vector<int>& rows, int depth) {
        const int id = static_cast<int>(t.nodes.size());
        t.nodes.push_back({});
        t.nodes.back().label = majority(rows);
        bool pure = true;
        for (int r : rows)
            if (y_[static_cast<std::size_t>(r)] != y_[static_cast<std::size_t>(rows.front())]) pure = false;
        if (pure || rows.size() < 2 || (max_depth_ > 0 && depth >= max_depth_) || candidates_.empty()) return id;

        const std::size_t mtry = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(candidates_.size()))));
        std::vector<int> pool = candidates_;
        for (std::size_t k = 0; k < mtry && k < pool.size(); ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
            std::swap(pool[k], pool[pick(rng_)]);
        }
        pool.resize(std::min(mtry, pool.size()));
        std::sort(pool.begin(), pool.end());
        Split s = best_split(rows, pool);
        if (s.feature < 0) s = best_split(rows, candidates_);
        if (s.feature < 0) return id;

        std::vector<int> l, r;
        for (int row : rows) (X_(row, s.feature) <= s.threshold ? l : r).push_back(row);
        const int li = grow(t, l, depth + 1);
        const int ri = grow(t, r, depth + 1);
        auto& nd = t.nodes[static_cast<std::size_t>(id)];
        nd.feature = s.feature;
        nd.threshold = s.threshold;
        nd.left = li;
        nd.right = ri;
        return id;
    }

    const FeatureMatrix& X_;
    const std::vector<int>& y_;
    std::size_t n_classes_;
    const std::vector<int>& candidates_;
    int max_depth_;
    std::mt19937_64& rng_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Trained model

enum class ClassifierKind { knn, svm_ova, gentleboost, adaboost_m2, random_forest };

inline std::string_view to_string(ClassifierKind k) {
    switch (k) {
        case ClassifierKind::knn: return "knn";
        case ClassifierKind::svm_ova: return "svm";
        case ClassifierKind::gentleboost: return "gentleboost";
        case ClassifierKind::adaboost_m2: return "adaboost_m2";
        case ClassifierKind::random_forest: return "random_forest";
    }
    return "?";
}

inline ClassifierKind parse_classifier(std::string_view s) {
    for (auto k : {ClassifierKind::knn, ClassifierKind::svm_ova, ClassifierKind::gentleboost, ClassifierKind::adaboost_m2,
                   ClassifierKind::random_forest})
        if (to_string(k) == s) return k;
    throw ValidationError("unknown classifier '" + std::string(s) + "'");
}

struct TrainedModel {
    std::vector<int> classes;  // sorted class ids; internal index -> id
    std::variant<KnnModel, SvmModel, GentleBoostModel, AdaBoostM2Model, ForestModel> impl;

    Eigen::Index n_features = 0;

    ClassifierKind kind() const { return static_cast<ClassifierKind>(impl.index()); }
};

// ---- training ----

inline TrainedModel knn_train(const FeatureMatrix& X, const Labels& y, int k,
                              DistanceMetric metric = DistanceMetric::cosine, KnnRule rule = KnnRule::majority) {
    detail::check_training_set(X, y);
    if (k < 1 || k > X.rows()) throw ParameterError("kNN: k must be in [1, N]");
    TrainedModel m;
    m.classes = detail::unique_classes(y);
    m.n_features = X.cols();
    m.impl = KnnModel{X, detail::class_indices(y, m.classes), k, metric, rule};
    return m;
}

inline TrainedModel svm_train(const FeatureMatrix& X, const Labels& y, const SvmParams& params = {}) {
    detail::check_training_set(X, y);
    if (!(params.C > 0)) throw ParameterError("SVM: C must be positive");
    TrainedModel m;
    m.classes = detail::unique_classes(y);
    if (m.classes.size() < 2) throw ParameterError("SVM needs at least 2 classes");
    m.n_features = X.cols();
    const auto idx = detail::class_indices(y, m.classes);

    SvmModel svm;
    svm.standardizer = Standardizer::fit(X);
    svm.C = params.C;
    svm.kernel = {params.kernel, params.gamma > 0 ? params.gamma : 1.0 / static_cast<double>(X.cols())};
    const FeatureMatrix Z = svm.standardizer.apply(X);
    const Eigen::MatrixXd K = svm.kernel.gram(Z, Z);
    // Binary problems: for two classes a single machine would do, but one per
    // class keeps the argmax rule uniform.
    for (std::size_t c = 0; c < m.classes.size(); ++c) {
        std::vector<double> yy(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) yy[i] = idx[i] == static_cast<int>(c) ? 1.0 : -1.0;
        auto bin = detail::smo_solve(K, yy, params);
        std::vector<Eigen::Index> sv;
        for (Eigen::Index i = 0; i < bin.alpha.size(); ++i)
            if (bin.alpha(i) > 0) sv.push_back(i);
        bin.support.resize(static_cast<Eigen::Index>(sv.size()), Z.cols());
        bin.coef.resize(static_cast<Eigen::Index>(sv.size()));
        for (std::size_t s = 0; s < sv.size(); ++s) {
            bin.support.row(static_cast<Eigen::Index>(s)) = Z.row(sv[s]);
            bin.coef(static_cast<Eigen::Index>(s)) = bin.alpha(sv[s]) * yy[static_cast<std::size_t>(sv[s])];
        }
        svm.machines.push_back(std::move(bin));
    }
    m.impl = std::move(svm);
    return m;
}

inline TrainedModel gentleboost_train(const FeatureMatrix& X, const Labels& y, int rounds) {
    detail::check_training_set(X, y);
    if (rounds < 1) throw ParameterError("boosting needs rounds >= 1");
    TrainedModel m;
    m.classes = detail::unique_classes(y);
    if (m.classes.size() != 2) throw ParameterError("GentleBoost needs exactly 2 classes");
    m.n_features = X.cols();
    const auto idx = detail::class_indices(y, m.classes);
    GentleBoostModel gb;
    gb.standardizer = Standardizer::fit(X);
    const FeatureMatrix Z = gb.standardizer.apply(X);
    const auto cols = detail::sort_columns(Z);
    const std::size_t n = idx.size();
    std::vector<double> yy(n), w(n, 1.0 / static_cast<double>(n)), F(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) yy[i] = idx[i] == 1 ? 1.0 : -1.0;
    for (int r = 0; r < rounds; ++r) {
        const auto stump = detail::fit_regression_stump(Z, cols, yy, w);
        double sum = 0.0, loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double h = stump(Z.row(static_cast<Eigen::Index>(i)));
            F[i] += h;
            w[i] *= std::exp(-yy[i] * h);
            sum += w[i];
            loss += std::exp(-yy[i] * F[i]);
        }
        for (auto& v : w) v /= sum;
        gb.stumps.push_back(stump);
        gb.train_exp_loss.push_back(loss / static_cast<double>(n));
    }
    m.impl = std::move(gb);
    return m;
}

inline TrainedModel adaboost_m2_train(const FeatureMatrix& X, const Labels& y, int rounds) {
    detail::check_training_set(X, y);
    if (rounds < 1) throw ParameterError("boosting needs rounds >= 1");
    TrainedModel m;
    m.classes = detail::unique_classes(y);
    if (m.classes.size() < 2) throw ParameterError("AdaBoost.M2 needs at least 2 classes");
    m.n_features = X.cols();
    const auto idx = detail::class_indices(y, m.classes);
    AdaBoostM2Model ab;
    ab.standardizer = Standardizer::fit(X);
    const FeatureMatrix Z = ab.standardizer.apply(X);
    const auto cols = detail::sort_columns(Z);
    const std::size_t n = idx.size(), nc = m.classes.size();

    // Mislabel distribution D(i, c), c != y_i.
    Eigen::MatrixXd D = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(nc),
                                                  1.0 / static_cast<double>(n * (nc - 1)));
    for (std::size_t i = 0; i < n; ++i) D(static_cast<Eigen::Index>(i), idx[i]) = 0.0;

    for (int r = 0; r < rounds; ++r) {
        // Per instance: benefit mass when its own class is switched on, and
        // penalty mass per wrong class when that class is switched on.
        std::vector<double> own(n);
        for (std::size_t i = 0; i < n; ++i) own[i] = D.row(static_cast<Eigen::Index>(i)).sum();
        std::vector<double> tot_plus(nc, 0.0), tot_minus(nc, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            tot_plus[static_cast<std::size_t>(idx[i])] += own[i];
            for (std::size_t c = 0; c < nc; ++c)
                if (static_cast<int>(c) != idx[i]) tot_minus[c] += D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
        }
        auto side_gain = [&](const std::vector<double>& plus, const std::vector<double>& minus, std::vector<std::uint8_t>* h) {
            double g = 0.0;
            for (std::size_t c = 0; c < nc; ++c) {
                const bool on = plus[c] > minus[c];
                if (on) g += plus[c] - minus[c];
                if (h) (*h)[c] = on ? 1 : 0;
            }
            return g;
        };

        ClassStump best;
        best.feature = 0;
        best.threshold = std::numeric_limits<double>::infinity();
        best.left.assign(nc, 0);
        best.right.assign(nc, 0);
        double best_gain = side_gain(tot_plus, tot_minus, &best.left);
        best.right = best.left;
        std::vector<double> lp(nc), lm(nc), rp(nc), rm(nc);
        for (std::size_t f = 0; f < cols.order.size(); ++f) {
            if (cols.constant[f]) continue;
            const auto& o = cols.order[f];
            const auto fi = static_cast<Eigen::Index>(f);
            std::fill(lp.begin(), lp.end(), 0.0);
            std::fill(lm.begin(), lm.end(), 0.0);
            for (std::size_t k = 0; k + 1 < n; ++k) {
                const auto i = static_cast<std::size_t>(o[k]);
                lp[static_cast<std::size_t>(idx[i])] += own[i];
                for (std::size_t c = 0; c < nc; ++c)
                    if (static_cast<int>(c) != idx[i]) lm[c] += D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
                const double xv = Z(o[k], fi), xn = Z(o[k + 1], fi);
                if (xv == xn) continue;
                for (std::size_t c = 0; c < nc; ++c) {
                    rp[c] = tot_plus[c] - lp[c];
                    rm[c] = tot_minus[c] - lm[c];
                }
                const double g = side_gain(lp, lm, nullptr) + side_gain(rp, rm, nullptr);
                if (g > best_gain * (1 + 1e-12) + 1e-300) {
                    best_gain = g;
                    best.feature = static_cast<int>(f);
                    best.threshold = 0.5 * (xv + xn);
                    side_gain(lp, lm, &best.left);
                    side_gain(rp, rm, &best.right);
                }
            }
        }

        // Pseudo-loss of the chosen stump.
        double eps = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& h = Z(static_cast<Eigen::Index>(i), best.feature) <= best.threshold ? best.left : best.right;
            for (std::size_t c = 0; c < nc; ++c)
                if (static_cast<int>(c) != idx[i])
                    eps += D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) * (1.0 - h[static_cast<std::size_t>(idx[i])] + h[c]);
        }
        eps *= 0.5;
        if (eps >= 0.5 - 1e-12) break;  // no weak learner beats chance
        eps = std::max(eps, 1e-10);
        const double beta = eps / (1.0 - eps);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& h = Z(static_cast<Eigen::Index>(i), best.feature) <= best.threshold ? best.left : best.right;
            for (std::size_t c = 0; c < nc; ++c) {
                if (static_cast<int>(c) == idx[i]) continue;
                auto& d = D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
                d *= std::pow(beta, 0.5 * (1.0 + h[static_cast<std::size_t>(idx[i])] - h[c]));
                sum += d;
            }
        }
        D /= sum;
        ab.stumps.push_back(std::move(best));
        ab.weights.push_back(std::log(1.0 / beta));
    }
    if (ab.stumps.empty()) {
        // Degenerate data: a constant stump voting for nothing; predictions fall to the first class.
        ab.stumps.push_back({0, std::numeric_limits<double>::infinity(), std::vector<std::uint8_t>(nc, 0),
                             std::vector<std::uint8_t>(nc, 0)});
        ab.weights.push_back(0.0);
    }
    m.impl = std::move(ab);
    return m;
}

inline TrainedModel rf_train(const FeatureMatrix& X, const Labels& y, const ForestParams& params = {}) {
    detail::check_training_set(X, y);
    if (params.n_trees < 1) throw ParameterError("random forest needs n_trees >= 1");
    if (params.max_depth < 0) throw ParameterError("random forest max_depth must be >= 0");
    TrainedModel m;
    m.classes = detail::unique_classes(y);
    m.n_features = X.cols();
    const auto idx = detail::class_indices(y, m.classes);
    // Constant columns can never split; leaving them out of the candidate
    // pool keeps the feature sampling independent of them.
    std::vector<int> candidates;
    for (Eigen::Index f = 0; f < X.cols(); ++f)
        if (X.col(f).maxCoeff() > X.col(f).minCoeff()) candidates.push_back(static_cast<int>(f));
    ForestModel fm;
    std::mt19937_64 rng(params.seed);
    const auto n = static_cast<int>(idx.size());
    for (int t = 0; t < params.n_trees; ++t) {
        std::vector<int> rows(static_cast<std::size_t>(n));
        if (params.bootstrap) {
            std::uniform_int_distribution<int> pick(0, n - 1);
            for (auto& r : rows) r = pick(rng);
        } else {
            std::iota(rows.begin(), rows.end(), 0);
        }
        detail::TreeBuilder builder(X, idx, m.classes.size(), candidates, params.max_depth, rng);
        fm.trees.push_back(builder.build(std::move(rows)));
    }
    m.impl = std::move(fm);
    return m;
}

// ---- prediction ----

/// Per-class scores; the predicted class is the first maximum.
inline Eigen::VectorXd decision_scores(const TrainedModel& m, const Eigen::RowVectorXd& x) {
    if (x.size() != m.n_features) throw ParameterError("predict: feature count mismatch");
    const auto nc = static_cast<Eigen::Index>(m.classes.size());
    return std::visit(
        [&](const auto& impl) -> Eigen::VectorXd {
            using T = std::decay_t<decltype(impl)>;
            if constexpr (std::is_same_v<T, KnnModel>) {
                const auto n = impl.X.rows();
                std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
                std::vector<bool> fell(static_cast<std::size_t>(n));
                std::size_t fallbacks = 0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    bool fb = false;
                    dist[static_cast<std::size_t>(i)] = {metric_distance(impl.X.row(i), x, impl.metric, &fb), i};
                    fell[static_cast<std::size_t>(i)] = fb;
                    if (fb) ++fallbacks;
                }
                if (fallbacks) warn("kNN: zero-norm vector, euclidean distance used for " + std::to_string(fallbacks) + " pair(s)");
                std::partial_sort(dist.begin(), dist.begin() + impl.k, dist.end());
                Eigen::VectorXd s = Eigen::VectorXd::Zero(nc);
                for (int r = 0; r < impl.k; ++r) {
                    const auto [d, i] = dist[static_cast<std::size_t>(r)];
                    const int c = impl.y[static_cast<std::size_t>(i)];
                    s(c) += impl.rule == KnnRule::majority ? 1.0 : metric_similarity(d, impl.metric, fell[static_cast<std::size_t>(i)]);
                }
                return s;
            } else if constexpr (std::is_same_v<T, SvmModel>) {
                return impl.decision_values(x);
            } else if constexpr (std::is_same_v<T, GentleBoostModel>) {
                Eigen::VectorXd s(2);
                const double f = impl.score(x);
                s << -f, f;
                return s;
            } else if constexpr (std::is_same_v<T, AdaBoostM2Model>) {
                return impl.scores(x, static_cast<std::size_t>(nc));
            } else {
                Eigen::VectorXd s = Eigen::VectorXd::Zero(nc);
                for (const auto& t : impl.trees) s(t.predict(x)) += 1.0;
                return s;
            }
        },
        m.impl);
}

inline int predict(const TrainedModel& m, const Eigen::RowVectorXd& x) {
    return m.classes[detail::argmax_first(decision_scores(m, x))];
}

inline Labels predict(const TrainedModel& m, const FeatureMatrix& X) {
    Labels out(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) out[static_cast<std::size_t>(i)] = predict(m, Eigen::RowVectorXd(X.row(i)));
    return out;
}

inline double accuracy(const Labels& truth, const Labels& pred) {
    if (truth.size() != pred.size() || truth.empty()) throw ParameterError("accuracy: size mismatch");
    std::size_t ok = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) ok += truth[i] == pred[i];
    return static_cast<double>(ok) / static_cast<double>(truth.size());
}

// ---- specification-driven training ----

struct ClassifierSpec {
    ClassifierKind kind = ClassifierKind::knn;
    int knn_k = 1;
    DistanceMetric knn_metric = DistanceMetric::cosine;
    KnnRule knn_rule = KnnRule::majority;
    SvmParams svm;
    int boost_rounds = 100;
    ForestParams forest;
};

inline TrainedModel train(const ClassifierSpec& spec, const FeatureMatrix& X, const Labels& y) {
    switch (spec.kind) {
        case ClassifierKind::knn: return knn_train(X, y, spec.knn_k, spec.knn_metric, spec.knn_rule);
        case ClassifierKind::svm_ova: return svm_train(X, y, spec.svm);
        case ClassifierKind::gentleboost: return gentleboost_train(X, y, spec.boost_rounds);
        case ClassifierKind::adaboost_m2: return adaboost_m2_train(X, y, spec.boost_rounds);
        case ClassifierKind::random_forest: return rf_train(X, y, spec.forest);
    }
    throw ParameterError("unknown classifier kind");
}

// ---- persistence ----

inline constexpr std::string_view kModelSchema = "affect.model/1";

inline nlohmann::json to_json(const TrainedModel& m) {
    nlohmann::json j;
    j["schema"] = std::string(kModelSchema);
    j["variant"] = std::string(to_string(m.kind()));
    j["classes"] = m.classes;
    j["features"] = m.n_features;
    std::visit(
        [&](const auto& impl) {
            using T = std::decay_t<decltype(impl)>;
            if constexpr (std::is_same_v<T, KnnModel>) {
                j["k"] = impl.k;
                j["metric"] = std::string(to_string(impl.metric));
                j["rule"] = std::string(to_string(impl.rule));
                j["X"] = detail::matrix_json(impl.X);
                j["y"] = impl.y;
            } else if constexpr (std::is_same_v<T, SvmModel>) {
                j["standardizer"] = impl.standardizer.to_json();
                j["kernel"] = std::string(to_string(impl.kernel.kind));
                j["gamma"] = impl.kernel.gamma;
                j["C"] = impl.C;
                j["machines"] = nlohmann::json::array();
                for (const auto& b : impl.machines)
                    j["machines"].push_back({{"rho", b.rho}, {"coef", detail::vector_json(b.coef)}, {"support", detail::matrix_json(b.support)}});
            } else if constexpr (std::is_same_v<T, GentleBoostModel>) {
                j["standardizer"] = impl.standardizer.to_json();
                j["stumps"] = nlohmann::json::array();
                for (const auto& s : impl.stumps)
                    j["stumps"].push_back({{"feature", s.feature}, {"threshold", s.threshold}, {"left", s.left}, {"right", s.right}});
            } else if constexpr (std::is_same_v<T, AdaBoostM2Model>) {
                j["standardizer"] = impl.standardizer.to_json();
                j["weights"] = impl.weights;
                j["stumps"] = nlohmann::json::array();
                for (const auto& s : impl.stumps)
                    j["stumps"].push_back({{"feature", s.feature}, {"threshold", s.threshold}, {"left", s.left}, {"right", s.right}});
            } else {
                j["trees"] = nlohmann::json::array();
                for (const auto& t : impl.trees) {
                    nlohmann::json jt = nlohmann::json::array();
                    for (const auto& nd : t.nodes) jt.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.label});
                    j["trees"].push_back(std::move(jt));
                }
            }
        },
        m.impl);
    return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema").get<std::string>() != kModelSchema) throw FormatError("unsupported model schema");
        TrainedModel m;
        m.classes = j.at("classes").get<std::vector<int>>();
        m.n_features = j.at("features").get<Eigen::Index>();
        if (m.classes.empty()) throw FormatError("model has no classes");
        auto threshold = [](const nlohmann::json& v) {
            return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
        };
        switch (parse_classifier(j.at("variant").get<std::string>())) {
            case ClassifierKind::knn:
                m.impl = KnnModel{detail::matrix_from_json(j.at("X")), j.at("y").get<std::vector<int>>(), j.at("k").get<int>(),
                                  parse_metric(j.at("metric").get<std::string>()), parse_knn_rule(j.at("rule").get<std::string>())};
                break;
            case ClassifierKind::svm_ova: {
                SvmModel s;
                s.standardizer = Standardizer::from_json(j.at("standardizer"));
                s.kernel = {parse_kernel(j.at("kernel").get<std::string>()), j.at("gamma").get<double>()};
                s.C = j.at("C").get<double>();
                for (const auto& jm : j.at("machines")) {
                    BinarySvm b;
                    b.rho = jm.at("rho").get<double>();
                    b.coef = detail::vector_from_json(jm.at("coef"));
                    b.support = detail::matrix_from_json(jm.at("support"));
                    if (b.support.rows() == 0) b.support.resize(0, m.n_features);
                    s.machines.push_back(std::move(b));
                }
                m.impl = std::move(s);
                break;
            }
            case ClassifierKind::gentleboost: {
                GentleBoostModel g;
                g.standardizer = Standardizer::from_json(j.at("standardizer"));
                for (const auto& js : j.at("stumps"))
                    g.stumps.push_back({js.at("feature").get<int>(), threshold(js.at("threshold")), js.at("left").get<double>(),
                                        js.at("right").get<double>()});
                m.impl = std::move(g);
                break;
            }
            case ClassifierKind::adaboost_m2: {
                AdaBoostM2Model a;
                a.standardizer = Standardizer::from_json(j.at("standardizer"));
                a.weights = j.at("weights").get<std::vector<double>>();
                for (const auto& js : j.at("stumps"))
                    a.stumps.push_back({js.at("feature").get<int>(), threshold(js.at("threshold")),
                                        js.at("left").get<std::vector<std::uint8_t>>(), js.at("right").get<std::vector<std::uint8_t>>()});
                m.impl = std::move(a);
                break;
            }
            case ClassifierKind::random_forest: {
                ForestModel f;
                for (const auto& jt : j.at("trees")) {
                    DecisionTree t;
                    for (const auto& jn : jt)
                        t.nodes.push_back({jn[0].get<int>(), jn[1].get<double>(), jn[2].get<int>(), jn[3].get<int>(), jn[4].get<int>()});
                    f.trees.push_back(std::move(t));
                }
                m.impl = std::move(f);
                break;
            }
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model JSON: ") + e.what());
    }
}

}  // namespace affect
