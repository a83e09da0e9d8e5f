#pragma once

// PCA and exact t-SNE.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "affect/error.hpp"
#include "affect/types.hpp"

namespace affect {

// ---------------------------------------------------------------------------
// PCA

struct PcaModel {
    Eigen::RowVectorXd mean;
    Eigen::MatrixXd components;  // D x k, orthonormal columns
    Eigen::VectorXd eigenvalues;  // covariance eigenvalues, descending

    Eigen::Index k() const { return components.cols(); }

    FeatureMatrix transform(const FeatureMatrix& X) const {
        if (X.cols() != mean.size()) throw ParameterError("PCA transform: feature count mismatch");
        return (X.rowwise() - mean) * components;
    }

    FeatureMatrix inverse_transform(const FeatureMatrix& Z) const {
        return (Z * components.transpose()).rowwise() + mean;
    }
};

namespace detail {

// Makes each column's largest-magnitude entry positive.
inline void fix_signs(Eigen::MatrixXd& V) {
    for (Eigen::Index c = 0; c < V.cols(); ++c) {
        Eigen::Index arg = 0;
        V.col(c).cwiseAbs().maxCoeff(&arg);
        if (V(arg, c) < 0) V.col(c) *= -1.0;
    }
}

}  // namespace detail

/// Principal directions of the covariance (N - 1 normalisation). Uses the
/// N x N Gram matrix when there are fewer instances than features.
inline PcaModel pca_fit(const FeatureMatrix& X, Eigen::Index k) {
    const Eigen::Index n = X.rows(), d = X.cols();
    if (n < 2) throw ParameterError("PCA needs at least 2 instances");
    if (k < 1 || k > std::min(n, d)) throw ParameterError("PCA: k must be in [1, min(N, D)]");
    PcaModel m;
    m.mean = X.colwise().mean();
    const Eigen::MatrixXd Xc = X.rowwise() - m.mean;
    const double denom = static_cast<double>(n - 1);
    if (n < d) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((Xc * Xc.transpose()) / denom);
        m.components.resize(d, k);
        m.eigenvalues.resize(k);
        for (Eigen::Index c = 0; c < k; ++c) {
            const Eigen::Index src = n - 1 - c;
            const double lam = std::max(es.eigenvalues()(src), 0.0);
            m.eigenvalues(c) = lam;
            Eigen::VectorXd v = Xc.transpose() * es.eigenvectors().col(src);
            const double nv = v.norm();
            if (nv > 1e-12 * (1.0 + std::sqrt(lam))) {
                m.components.col(c) = v / nv;
            } else {
                m.components.col(c).setZero();
            }
        }
        // Directions with no variance are completed to an orthonormal set.
        for (Eigen::Index c = 0; c < k; ++c) {
            if (m.components.col(c).squaredNorm() > 0.5) continue;
            for (Eigen::Index e = 0; e < d; ++e) {
                Eigen::VectorXd v = Eigen::VectorXd::Unit(d, e);
                for (Eigen::Index o = 0; o < k; ++o)
                    if (o != c && m.components.col(o).squaredNorm() > 0.5)
                        v -= m.components.col(o).dot(v) * m.components.col(o);
                if (v.norm() > 1e-6) {
                    m.components.col(c) = v.normalized();
                    break;
                }
            }
        }
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((Xc.transpose() * Xc) / denom);
        m.components = es.eigenvectors().rightCols(k).rowwise().reverse();
        m.eigenvalues = es.eigenvalues().tail(k).reverse().cwiseMax(0.0);
    }
    detail::fix_signs(m.components);
    return m;
}

inline FeatureMatrix pca_fit_transform(const FeatureMatrix& X, Eigen::Index k) { return pca_fit(X, k).transform(X); }

inline nlohmann::json to_json(const PcaModel& m) {
    nlohmann::json j;
    j["mean"] = std::vector<double>(m.mean.data(), m.mean.data() + m.mean.size());
    j["eigenvalues"] = std::vector<double>(m.eigenvalues.data(), m.eigenvalues.data() + m.eigenvalues.size());
    j["components"] = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.components.cols(); ++c) {
        Eigen::VectorXd col = m.components.col(c);
        j["components"].push_back(std::vector<double>(col.data(), col.data() + col.size()));
    }
    return j;
}

// ---------------------------------------------------------------------------
// t-SNE

struct TsneParams {
    int out_dims = 2;
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 100.0;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch = 250;
    double exaggeration = 4.0;
    int exaggeration_iters = 100;
    std::uint64_t seed = 0;

    void validate(Eigen::Index n) const {
        if (out_dims < 1) throw ParameterError("t-SNE out_dims must be >= 1");
        if (!(perplexity > 0)) throw ParameterError("t-SNE perplexity must be positive");
        if (n < 4) throw ParameterError("t-SNE needs at least 4 instances");
        if (!(perplexity < static_cast<double>(n)))
            throw ParameterError("t-SNE perplexity must be smaller than the number of instances");
        if (iterations < 1 || !(learning_rate > 0)) throw ParameterError("t-SNE iterations and learning rate must be positive");
    }
};

namespace detail {

inline Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& X) {
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd D(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        D(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) D(i, j) = D(j, i) = (X.row(i) - X.row(j)).squaredNorm();
    }
    return D;
}

/// Conditional distribution over `dist` (squared distances, self excluded by
/// the caller via +inf) with precision beta tuned so exp(H) = perplexity.
/// Returns the achieved perplexity.
inline double conditional_row(const Eigen::VectorXd& dist, double perplexity, Eigen::VectorXd& p) {
    const double target = std::log(perplexity);
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < dist.size(); ++j)
        if (std::isfinite(dist(j))) dmin = std::min(dmin, dist(j));
    double entropy = 0.0;
    p.resize(dist.size());
    for (int iter = 0; iter < 200; ++iter) {
        double sum = 0.0, wsum = 0.0;
        for (Eigen::Index j = 0; j < dist.size(); ++j) {
            if (!std::isfinite(dist(j))) {
                p(j) = 0.0;
                continue;
            }
            const double w = std::exp(-beta * (dist(j) - dmin));
            p(j) = w;
            sum += w;
            wsum += w * (dist(j) - dmin);
        }
        for (Eigen::Index j = 0; j < dist.size(); ++j) p(j) /= sum;
        entropy = std::log(sum) + beta * wsum / sum;
        const double diff = entropy - target;
        if (std::abs(diff) < 1e-10) break;
        if (diff > 0) {
            lo = beta;
            beta = std::isfinite(hi) ? 0.5 * (beta + hi) : beta * 2.0;
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
    }
    return std::exp(entropy);
}

}  // namespace detail

/// Symmetric joint probabilities p_ij = (p_j|i + p_i|j) / 2N.
/// `achieved` receives each row's perplexity when non-null.
inline Eigen::MatrixXd tsne_joint_probabilities(const FeatureMatrix& X, double perplexity,
                                                std::vector<double>* achieved = nullptr) {
    const Eigen::Index n = X.rows();
    const Eigen::MatrixXd D = detail::squared_distances(X);
    Eigen::MatrixXd Pc(n, n);
    Eigen::VectorXd row, p;
    if (achieved) achieved->assign(static_cast<std::size_t>(n), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        row = D.row(i).transpose();
        row(i) = std::numeric_limits<double>::infinity();
        const double perp = detail::conditional_row(row, perplexity, p);
        if (achieved) (*achieved)[static_cast<std::size_t>(i)] = perp;
        Pc.row(i) = p.transpose();
    }
    Eigen::MatrixXd P = (Pc + Pc.transpose()) / (2.0 * static_cast<double>(n));
    for (Eigen::Index i = 0; i < n; ++i) P(i, i) = 0.0;
    return P;
}

/// Student-t affinities (unnormalised numerators and their sum).
inline double tsne_kernel(const Eigen::MatrixXd& Y, Eigen::MatrixXd& num) {
    const Eigen::Index n = Y.rows();
    num.resize(n, n);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        num(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = 1.0 / (1.0 + (Y.row(i) - Y.row(j)).squaredNorm());
            num(i, j) = num(j, i) = v;
            sum += 2.0 * v;
        }
    }
    return sum;
}

inline double tsne_kl(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Y) {
    Eigen::MatrixXd num;
    const double sum = tsne_kernel(Y, num);
    double kl = 0.0;
    for (Eigen::Index i = 0; i < P.rows(); ++i)
        for (Eigen::Index j = 0; j < P.cols(); ++j) {
            if (i == j || P(i, j) <= 0) continue;
            const double q = std::max(num(i, j) / sum, std::numeric_limits<double>::min());
            kl += P(i, j) * std::log(P(i, j) / q);
        }
    return kl;
}

/// dKL/dy_i = 4 sum_j (p_ij - q_ij)(1 + |y_i - y_j|^2)^-1 (y_i - y_j)
inline Eigen::MatrixXd tsne_gradient(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Y) {
    Eigen::MatrixXd num;
    const double sum = tsne_kernel(Y, num);
    const Eigen::Index n = Y.rows();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, Y.cols());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double m = (P(i, j) - num(i, j) / sum) * num(i, j);
            G.row(i) += 4.0 * m * (Y.row(i) - Y.row(j));
        }
    return G;
}

struct TsneResult {
    FeatureMatrix embedding;
    double kl_initial = 0.0;
    double kl_final = 0.0;
};

namespace detail {

inline Eigen::MatrixXd gaussian_init(Eigen::Index n, int dims, std::uint64_t seed, double sigma) {
    std::mt19937_64 rng(seed);
    auto uniform = [&rng] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
    Eigen::MatrixXd Y(n, dims);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int d = 0; d < dims; ++d) {
            const double u1 = uniform(), u2 = uniform();
            Y(i, d) = sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        }
    return Y;
}

}  // namespace detail

inline TsneResult tsne_run(const FeatureMatrix& X, const TsneParams& params) {
    params.validate(X.rows());
    const Eigen::Index n = X.rows();
    const Eigen::MatrixXd P = tsne_joint_probabilities(X, params.perplexity);
    Eigen::MatrixXd Y = detail::gaussian_init(n, params.out_dims, params.seed, 1e-4);
    Y = Y.rowwise() - Y.colwise().mean();
    Eigen::MatrixXd update = Eigen::MatrixXd::Zero(n, params.out_dims);
    Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, params.out_dims);

    TsneResult res;
    res.kl_initial = tsne_kl(P, Y);
    for (int it = 0; it < params.iterations; ++it) {
        const double ex = it < params.exaggeration_iters ? params.exaggeration : 1.0;
        const Eigen::MatrixXd G = tsne_gradient(ex * P, Y);
        const double momentum = it < params.momentum_switch ? params.initial_momentum : params.final_momentum;
        for (Eigen::Index i = 0; i < n; ++i)
            for (int d = 0; d < params.out_dims; ++d) {
                double& g = gains(i, d);
                g = ((G(i, d) > 0) != (update(i, d) > 0)) ? g + 0.2 : g * 0.8;
                g = std::max(g, 0.01);
                update(i, d) = momentum * update(i, d) - params.learning_rate * g * G(i, d);
            }
        Y += update;
        Y = Y.rowwise() - Y.colwise().mean();
    }
    res.kl_final = tsne_kl(P, Y);
    res.embedding = std::move(Y);
    return res;
}

inline FeatureMatrix tsne(const FeatureMatrix& X, const TsneParams& params) { return tsne_run(X, params).embedding; }

/// t-SNE fitted on training data. New points are placed at the average of
/// training embeddings weighted by their conditional affinities at the
/// training perplexity.
struct TsneModel {
    FeatureMatrix train;
    FeatureMatrix embedding;
    double perplexity = 30.0;

    FeatureMatrix transform(const FeatureMatrix& X) const {
        if (X.cols() != train.cols()) throw ParameterError("t-SNE transform: feature count mismatch");
        const double perp = std::min(perplexity, static_cast<double>(train.rows()) - 1.0);
        FeatureMatrix out(X.rows(), embedding.cols());
        Eigen::VectorXd dist(train.rows()), p;
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            for (Eigen::Index j = 0; j < train.rows(); ++j) dist(j) = (X.row(i) - train.row(j)).squaredNorm();
            detail::conditional_row(dist, perp, p);
            out.row(i) = p.transpose() * embedding;
        }
        return out;
    }
};

inline TsneModel tsne_fit(const FeatureMatrix& X, const TsneParams& params) {
    return {X, tsne(X, params), params.perplexity};
}

}  // namespace affect
