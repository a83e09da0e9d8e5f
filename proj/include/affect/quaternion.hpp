#pragma once

// Quaternion algebra, the quaternion <-> complex 2x2 isomorphism, and
// quaternion PCA computed through the isomorphic complex Hermitian form.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "affect/dataio.hpp"
#include "affect/error.hpp"
#include "affect/types.hpp"

namespace affect {

/// q = r + i*i + j*j + k*k
struct Quat {
    double r = 0.0;
    double i = 0.0;
    double j = 0.0;
    double k = 0.0;

    friend constexpr Quat operator+(Quat a, Quat b) { return {a.r + b.r, a.i + b.i, a.j + b.j, a.k + b.k}; }
    friend constexpr Quat operator-(Quat a, Quat b) { return {a.r - b.r, a.i - b.i, a.j - b.j, a.k - b.k}; }
    friend constexpr Quat operator-(Quat a) { return {-a.r, -a.i, -a.j, -a.k}; }
    friend constexpr Quat operator*(double s, Quat a) { return {s * a.r, s * a.i, s * a.j, s * a.k}; }
    friend constexpr bool operator==(Quat, Quat) = default;
};

/// Hamilton product: i^2 = j^2 = k^2 = -1, ij = -ji = k, jk = -kj = i, ki = -ik = j.
constexpr Quat qmul(Quat a, Quat b) {
    return {a.r * b.r - a.i * b.i - a.j * b.j - a.k * b.k,
            a.r * b.i + a.i * b.r + a.j * b.k - a.k * b.j,
            a.r * b.j - a.i * b.k + a.j * b.r + a.k * b.i,
            a.r * b.k + a.i * b.j - a.j * b.i + a.k * b.r};
}

constexpr Quat operator*(Quat a, Quat b) { return qmul(a, b); }

constexpr Quat qconj(Quat q) { return {q.r, -q.i, -q.j, -q.k}; }

constexpr double qnorm2(Quat q) { return q.r * q.r + q.i * q.i + q.j * q.j + q.k * q.k; }

inline double qnorm(Quat q) { return std::sqrt(qnorm2(q)); }

using QuatVector = std::vector<Quat>;

/// Complex 2x2 representation [[r + i i, j + k i], [-j + k i, r - i i]];
/// a ring homomorphism H -> C^{2x2}.
inline Eigen::Matrix2cd quat_to_complex(Quat q) {
    using C = std::complex<double>;
    Eigen::Matrix2cd m;
    m << C(q.r, q.i), C(q.j, q.k), C(-q.j, q.k), C(q.r, -q.i);
    return m;
}

/// Inverse of quat_to_complex for a matrix in its image.
inline Quat complex_to_quat(const Eigen::Matrix2cd& m) {
    return {m(0, 0).real(), m(0, 0).imag(), m(0, 1).real(), m(0, 1).imag()};
}

/// Quaternion inner product u^H w.
inline Quat qdot(std::span<const Quat> u, std::span<const Quat> w) {
    Quat s{};
    for (std::size_t f = 0; f < u.size(); ++f) s = s + qmul(qconj(u[f]), w[f]);
    return s;
}

inline double qvec_norm2(std::span<const Quat> u) {
    double s = 0.0;
    for (const auto& q : u) s += qnorm2(q);
    return s;
}

// ---------------------------------------------------------------------------
// EEG channels -> quaternion series

/// Assignment of EEG channels to the (r, i, j, k) slots, each with a sign.
struct ChannelMap {
    struct Slot {
        std::string channel;
        double sign = 1.0;
    };
    std::array<Slot, 4> slots;
    std::string name;

    /// q_A = (F7, F8, AF3, AF4): sides of the head, then above the eyes.
    static ChannelMap preset_a() { return {{{{"F7", 1.0}, {"F8", 1.0}, {"AF3", 1.0}, {"AF4", 1.0}}}, "A"}; }

    /// q_B = (q_r, -q_j, q_i, q_k) of q_A: channels 2 and 3 exchanged, one negated.
    static ChannelMap preset_b() { return {{{{"F7", 1.0}, {"AF3", -1.0}, {"F8", 1.0}, {"AF4", 1.0}}}, "B"}; }

    static ChannelMap preset(std::string_view id) {
        if (id == "A" || id == "a") return preset_a();
        if (id == "B" || id == "b") return preset_b();
        throw ParameterError("unknown channel map '" + std::string(id) + "' (expected A or B)");
    }

    void validate() const {
        for (std::size_t a = 0; a < 4; ++a) {
            if (slots[a].sign != 1.0 && slots[a].sign != -1.0) throw ParameterError("channel map sign must be +1 or -1");
            for (std::size_t b = a + 1; b < 4; ++b)
                if (slots[a].channel == slots[b].channel)
                    throw ParameterError("channel map assigns " + slots[a].channel + " twice");
        }
    }
};

inline QuatVector eeg_to_quats(const EegRecording& rec, const ChannelMap& map) {
    map.validate();
    std::array<const std::vector<double>*, 4> src{};
    for (std::size_t s = 0; s < 4; ++s) {
        if (!rec.has_channel(map.slots[s].channel))
            throw FormatError("EEG recording is missing channel " + map.slots[s].channel);
        src[s] = &rec.channel(map.slots[s].channel);
    }
    QuatVector out(rec.length());
    for (std::size_t t = 0; t < out.size(); ++t)
        out[t] = {map.slots[0].sign * (*src[0])[t], map.slots[1].sign * (*src[1])[t], map.slots[2].sign * (*src[2])[t],
                  map.slots[3].sign * (*src[3])[t]};
    return out;
}

// ---------------------------------------------------------------------------
// Quaternion PCA

struct QpcaModel {
    QuatVector mean;
    std::vector<QuatVector> components;  // K unit quaternion eigenvectors of length F
    std::vector<double> eigenvalues;     // descending, >= 0

    std::size_t dim() const { return mean.size(); }
    std::size_t k() const { return components.size(); }
};

enum class QpcaSolver {
    automatic,   // picks the smaller of the two eigenproblems
    covariance,  // eigen-decomposes the 2F x 2F complex form of S = Xc Xc^H
    gram,        // eigen-decomposes the 2N x 2N complex Gram matrix and maps back
};

namespace detail {

/// Complex form of the centred F x N quaternion data matrix (2F x 2N).
inline Eigen::MatrixXcd complex_data_form(std::span<const QuatVector> data, const QuatVector& mean) {
    const auto F = static_cast<Eigen::Index>(mean.size());
    const auto N = static_cast<Eigen::Index>(data.size());
    using C = std::complex<double>;
    Eigen::MatrixXcd g(2 * F, 2 * N);
    for (Eigen::Index n = 0; n < N; ++n) {
        const auto& x = data[static_cast<std::size_t>(n)];
        for (Eigen::Index f = 0; f < F; ++f) {
            const Quat q = x[static_cast<std::size_t>(f)] - mean[static_cast<std::size_t>(f)];
            g(f, n) = C(q.r, q.i);
            g(f, N + n) = C(q.j, q.k);
            g(F + f, n) = C(-q.j, q.k);
            g(F + f, N + n) = C(q.r, -q.i);
        }
    }
    return g;
}

/// Quaternion vector whose complex form has first column v = [a; b].
inline QuatVector column_to_quats(const Eigen::Ref<const Eigen::VectorXcd>& v) {
    const Eigen::Index F = v.size() / 2;
    QuatVector u(static_cast<std::size_t>(F));
    for (Eigen::Index f = 0; f < F; ++f)
        u[static_cast<std::size_t>(f)] = {v(f).real(), v(f).imag(), -v(F + f).real(), v(F + f).imag()};
    return u;
}

/// Removes the components of `u` along the orthonormal quaternion basis:
/// u <- u - sum_b b (b^H u).
inline void quat_gram_schmidt(QuatVector& u, std::span<const QuatVector> basis) {
    for (int pass = 0; pass < 2; ++pass) {
        for (const auto& b : basis) {
            const Quat c = qdot(b, u);
            for (std::size_t f = 0; f < u.size(); ++f) u[f] = u[f] - qmul(b[f], c);
        }
    }
}

}  // namespace detail

/// Fits quaternion PCA on N quaternion vectors of length F, keeping k
/// components. Eigenpairs come from the complex Hermitian form of
/// S = Xc Xc^H, whose spectrum repeats each quaternion eigenvalue twice; one
/// quaternion eigenvector is recovered per pair.
namespace detail {

// Largest m eigenpairs of a Hermitian matrix, descending. The rotations run on
// the real tridiagonal form and only m columns are mapped back.
inline void leading_eigenpairs(const Eigen::MatrixXcd& h, Eigen::Index m, Eigen::VectorXd& values,
                               Eigen::MatrixXcd& vectors) {
    const Eigen::Index n = h.rows();
    m = std::min(m, n);
    if (n == 1) {
        values = Eigen::VectorXd::Constant(1, h(0, 0).real());
        vectors = Eigen::MatrixXcd::Identity(1, 1);
        return;
    }
    double scale = h.cwiseAbs().maxCoeff();
    if (!(scale > 0.0)) scale = 1.0;
    Eigen::Tridiagonalization<Eigen::MatrixXcd> tri(h / scale);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(tri.diagonal(), tri.subDiagonal(), Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> full(h);
        values = full.eigenvalues().tail(m).reverse();
        vectors = full.eigenvectors().rightCols(m).rowwise().reverse();
        return;
    }
    values = scale * es.eigenvalues().tail(m).reverse();
    const Eigen::MatrixXcd top = es.eigenvectors().rightCols(m).rowwise().reverse().cast<std::complex<double>>();
    vectors = tri.matrixQ() * top;
}

}  // namespace detail

inline QpcaModel quaternion_pca_fit(std::span<const QuatVector> data, std::size_t k,
                                    QpcaSolver solver = QpcaSolver::automatic) {
    if (data.size() < 2) throw ParameterError("quaternion PCA needs at least 2 samples");
    const std::size_t F = data.front().size();
    if (F == 0) throw ParameterError("quaternion PCA needs non-empty vectors");
    for (const auto& x : data)
        if (x.size() != F) throw ParameterError("quaternion PCA samples have different lengths");
    if (k < 1 || k > F) throw ParameterError("quaternion PCA: k must be in [1, F]");

    QpcaModel model;
    model.mean.assign(F, Quat{});
    for (const auto& x : data)
        for (std::size_t f = 0; f < F; ++f) model.mean[f] = model.mean[f] + x[f];
    const double inv_n = 1.0 / static_cast<double>(data.size());
    for (auto& m : model.mean) m = inv_n * m;

    const Eigen::MatrixXcd gamma = detail::complex_data_form(data, model.mean);
    if (solver == QpcaSolver::automatic) solver = data.size() < F ? QpcaSolver::gram : QpcaSolver::covariance;

    // Each quaternion direction shows up as a pair, plus slack for near-ties.
    const auto wanted = static_cast<Eigen::Index>(2 * k + 4);
    Eigen::VectorXd values;
    Eigen::MatrixXcd vectors;  // columns are unit eigenvectors of the 2F x 2F form
    if (solver == QpcaSolver::covariance) {
        detail::leading_eigenpairs(gamma * gamma.adjoint(), wanted, values, vectors);
    } else {
        // Eigenvectors of Gamma Gamma^H for non-zero eigenvalues are
        // Gamma U_B Lambda^{-1/2}, where (Lambda, U_B) diagonalise Gamma^H Gamma.
        Eigen::VectorXd lam;
        Eigen::MatrixXcd ub;
        detail::leading_eigenpairs(gamma.adjoint() * gamma, wanted, lam, ub);
        const double cutoff = std::max(lam.size() ? lam(0) : 0.0, 0.0) * 1e-12;
        Eigen::Index nonzero = 0;
        while (nonzero < lam.size() && lam(nonzero) > cutoff && lam(nonzero) > 0.0) ++nonzero;
        values = lam.head(nonzero);
        vectors = gamma * ub.leftCols(nonzero);
        for (Eigen::Index c = 0; c < nonzero; ++c) vectors.col(c) /= std::sqrt(lam(c));
    }

    for (Eigen::Index c = 0; c < values.size() && model.components.size() < k; ++c) {
        QuatVector u = detail::column_to_quats(vectors.col(c));
        detail::quat_gram_schmidt(u, model.components);
        const double n2 = qvec_norm2(u);
        if (!(n2 > 1e-8)) continue;  // second member of an already-taken pair
        const double inv = 1.0 / std::sqrt(n2);
        for (auto& q : u) q = inv * q;
        model.components.push_back(std::move(u));
        model.eigenvalues.push_back(std::max(values(c), 0.0));
    }
    // Rank-deficient data: complete the basis with zero-variance directions.
    for (std::size_t f = 0; f < F && model.components.size() < k; ++f) {
        QuatVector u(F, Quat{});
        u[f] = {1.0, 0.0, 0.0, 0.0};
        detail::quat_gram_schmidt(u, model.components);
        const double n2 = qvec_norm2(u);
        if (!(n2 > 1e-8)) continue;
        const double inv = 1.0 / std::sqrt(n2);
        for (auto& q : u) q = inv * q;
        model.components.push_back(std::move(u));
        model.eigenvalues.push_back(0.0);
    }
    return model;
}

/// Quaternion projections y_k = u_k^H (x - mean).
inline QuatVector quaternion_pca_scores(const QpcaModel& model, std::span<const Quat> sample) {
    if (sample.size() != model.dim())
        throw ParameterError("quaternion PCA projection: sample length " + std::to_string(sample.size()) +
                             " does not match model dimension " + std::to_string(model.dim()));
    QuatVector centred(sample.size());
    for (std::size_t f = 0; f < sample.size(); ++f) centred[f] = sample[f] - model.mean[f];
    QuatVector y(model.k());
    for (std::size_t c = 0; c < model.k(); ++c) y[c] = qdot(model.components[c], centred);
    return y;
}

/// Projections flattened to 4k reals, (r, i, j, k) per component.
inline FeatureVector quaternion_pca_project(const QpcaModel& model, std::span<const Quat> sample) {
    const auto y = quaternion_pca_scores(model, sample);
    FeatureVector out{{}, FeatureTag::quaternion_pca};
    out.values.reserve(4 * y.size());
    for (const auto& q : y) out.values.insert(out.values.end(), {q.r, q.i, q.j, q.k});
    return out;
}

/// mean + sum_k u_k y_k
inline QuatVector quaternion_pca_reconstruct(const QpcaModel& model, std::span<const Quat> scores) {
    QuatVector x = model.mean;
    for (std::size_t c = 0; c < scores.size() && c < model.k(); ++c)
        for (std::size_t f = 0; f < x.size(); ++f) x[f] = x[f] + qmul(model.components[c][f], scores[c]);
    return x;
}

inline nlohmann::json to_json(const QpcaModel& m) {
    auto qv = [](const QuatVector& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& q : v) a.push_back({q.r, q.i, q.j, q.k});
        return a;
    };
    nlohmann::json j;
    j["mean"] = qv(m.mean);
    j["eigenvalues"] = m.eigenvalues;
    j["eigenvectors"] = nlohmann::json::array();
    for (const auto& u : m.components) j["eigenvectors"].push_back(qv(u));
    return j;
}

inline QpcaModel qpca_from_json(const nlohmann::json& j) {
    auto qv = [](const nlohmann::json& a) {
        QuatVector v;
        for (const auto& e : a) {
            if (e.size() != 4) throw FormatError("quaternion entries must be 4-tuples");
            v.push_back({e[0].get<double>(), e[1].get<double>(), e[2].get<double>(), e[3].get<double>()});
        }
        return v;
    };
    QpcaModel m;
    m.mean = qv(j.at("mean"));
    m.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    for (const auto& u : j.at("eigenvectors")) m.components.push_back(qv(u));
    if (m.components.size() != m.eigenvalues.size()) throw FormatError("QPCA model: eigenvalue/vector count mismatch");
    for (const auto& u : m.components)
        if (u.size() != m.mean.size()) throw FormatError("QPCA model: eigenvector length mismatch");
    return m;
}

}  // namespace affect
