#pragma once

// Seeded generators and independent reference implementations for the tests.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "affect/affect.hpp"

namespace testing_support {

using affect::Frame;
using affect::Point2;
using affect::Quat;

struct Rng {
    explicit Rng(std::uint64_t seed) : gen(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
    double normal(double mu = 0.0, double sigma = 1.0) { return std::normal_distribution<double>(mu, sigma)(gen); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); }

    Quat quat(double scale = 1.0) { return {normal(0, scale), normal(0, scale), normal(0, scale), normal(0, scale)}; }

    Eigen::MatrixXd matrix(Eigen::Index r, Eigen::Index c, double sigma = 1.0) {
        Eigen::MatrixXd m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = normal(0, sigma);
        return m;
    }

    std::mt19937_64 gen;
};

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

inline double quat_dist(Quat a, Quat b) { return std::sqrt(affect::qnorm2(a - b)); }

// ---------------------------------------------------------------------------
// Cyclic Jacobi eigensolver for real symmetric matrices. Ascending eigenvalues.

struct JacobiResult {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};

inline JacobiResult jacobi_eigen(Eigen::MatrixXd a, int max_sweeps = 100) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30 * std::max(1.0, a.squaredNorm())) break;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) < a(y, y); });
    JacobiResult r{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        r.values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
        r.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
    }
    return r;
}

/// Eigenvalues of a Hermitian matrix via the real embedding [[A, -B], [B, A]],
/// whose spectrum is the Hermitian one with every value doubled.
inline Eigen::VectorXd hermitian_eigenvalues(const Eigen::MatrixXcd& h) {
    const Eigen::Index n = h.rows();
    Eigen::MatrixXd m(2 * n, 2 * n);
    m << h.real(), -h.imag(), h.imag(), h.real();
    const auto all = jacobi_eigen(m).values;
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out(i) = 0.5 * (all(2 * i) + all(2 * i + 1));
    return out;
}

// ---------------------------------------------------------------------------
// Confusion-matrix metrics by enumerating individual predictions.

struct BruteMetrics {
    std::vector<std::int64_t> tp, fp, fn, tn;
    std::vector<double> precision, recall, f1;
    double accuracy = 0.0, macro_p = 0.0, macro_r = 0.0, macro_f1 = 0.0;
};

inline BruteMetrics brute_force_metrics(const std::vector<std::vector<std::int64_t>>& rows) {
    const std::size_t n = rows.size();
    std::vector<std::pair<std::size_t, std::size_t>> samples;
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t p = 0; p < n; ++p)
            for (std::int64_t c = 0; c < rows[t][p]; ++c) samples.emplace_back(t, p);
    BruteMetrics m;
    m.tp.assign(n, 0), m.fp.assign(n, 0), m.fn.assign(n, 0), m.tn.assign(n, 0);
    std::int64_t correct = 0;
    for (auto [t, p] : samples) {
        if (t == p) ++correct;
        for (std::size_t c = 0; c < n; ++c) {
            const bool is_t = t == c, is_p = p == c;
            if (is_t && is_p) ++m.tp[c];
            else if (!is_t && is_p) ++m.fp[c];
            else if (is_t && !is_p) ++m.fn[c];
            else ++m.tn[c];
        }
    }
    for (std::size_t c = 0; c < n; ++c) {
        const double p = m.tp[c] + m.fp[c] ? double(m.tp[c]) / double(m.tp[c] + m.fp[c]) : 0.0;
        const double r = m.tp[c] + m.fn[c] ? double(m.tp[c]) / double(m.tp[c] + m.fn[c]) : 0.0;
        const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
        m.precision.push_back(p), m.recall.push_back(r), m.f1.push_back(f);
        m.macro_p += p, m.macro_r += r, m.macro_f1 += f;
    }
    if (n) m.macro_p /= double(n), m.macro_r /= double(n), m.macro_f1 /= double(n);
    m.accuracy = samples.empty() ? 0.0 : double(correct) / double(samples.size());
    return m;
}

// ---------------------------------------------------------------------------
// Faces

/// Canonical face with independent landmark jitter, then a random similarity.
inline Frame random_face(Rng& rng, double jitter = 0.02) {
    const auto& base = affect::canonical_face();
    double lo = 1e300, hi = -1e300;
    for (const auto& p : base) lo = std::min(lo, p.x), hi = std::max(hi, p.x);
    const double size = hi - lo;
    const double angle = rng.uniform(-0.15, 0.15), scale = rng.uniform(0.7, 1.4);
    const Point2 shift{rng.uniform(-50, 50), rng.uniform(-50, 50)};
    Frame f;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const Point2 p{base[i].x + rng.normal(0, jitter * size), base[i].y + rng.normal(0, jitter * size)};
        f[i] = {scale * (std::cos(angle) * p.x - std::sin(angle) * p.y) + shift.x,
                scale * (std::sin(angle) * p.x + std::cos(angle) * p.y) + shift.y};
    }
    return f;
}

/// Jittered face that is exactly mirror-symmetric about the nose's vertical line.
inline Frame random_symmetric_face(Rng& rng, double jitter = 0.02) {
    const auto& base = affect::canonical_face();
    const double cx = base[affect::landmarks::kNoseTip].x;
    Frame f = base;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const std::size_t m = affect::landmarks::mirror(i);
        if (m < i) continue;
        const Point2 d{rng.normal(0, jitter * 100), rng.normal(0, jitter * 100)};
        if (m == i) {
            f[i] = {cx, base[i].y + d.y};
        } else {
            f[i] = {base[i].x + d.x, base[i].y + d.y};
            f[m] = {2 * cx - f[i].x, f[i].y};
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// Finite differences

template <class F>
Eigen::MatrixXd numeric_gradient(F&& f, Eigen::MatrixXd y, double h = 1e-6) {
    Eigen::MatrixXd g(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            const double keep = y(i, j);
            y(i, j) = keep + h;
            const double up = f(y);
            y(i, j) = keep - h;
            const double down = f(y);
            y(i, j) = keep;
            g(i, j) = (up - down) / (2 * h);
        }
    return g;
}

// Sinusoid amplitude by projection onto sin/cos at an integer-bin frequency.
inline double amplitude_at(const std::vector<double>& x, double freq_hz, double rate_hz) {
    double s = 0, c = 0;
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double ph = 2 * std::numbers::pi * freq_hz * double(n) / rate_hz;
        s += x[n] * std::sin(ph);
        c += x[n] * std::cos(ph);
    }
    return 2.0 * std::hypot(s, c) / double(x.size());
}

inline std::vector<double> sinusoid(std::size_t n, double freq_hz, double rate_hz, double amp, double offset = 0.0) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = offset + amp * std::sin(2 * std::numbers::pi * freq_hz * double(i) / rate_hz);
    return x;
}

// Two isotropic Gaussian blobs in D dimensions, labels 0 and 1.
inline std::pair<Eigen::MatrixXd, affect::Labels> blobs(Rng& rng, int per_class, int dims, double sep, int classes = 2) {
    Eigen::MatrixXd X(per_class * classes, dims);
    affect::Labels y;
    for (int c = 0; c < classes; ++c)
        for (int i = 0; i < per_class; ++i) {
            const int r = c * per_class + i;
            for (int d = 0; d < dims; ++d) X(r, d) = rng.normal() + (d == c % dims ? sep : 0.0) + (d == 0 ? sep * 0.5 * c : 0.0);
            y.push_back(c);
        }
    return {X, y};
}

}  // namespace testing_support
