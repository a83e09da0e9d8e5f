#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace affect;
using testing_support::Rng;

namespace {

double affine_residual(const Eigen::Matrix<double, 2, 3>& T, const Frame& f, const Frame& templ) {
    double r = 0;
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        const double x = T(0, 0) * f[i].x + T(0, 1) * f[i].y + T(0, 2) - templ[i].x;
        const double y = T(1, 0) * f[i].x + T(1, 1) * f[i].y + T(1, 2) - templ[i].y;
        r += x * x + y * y;
    }
    return r;
}

Frame translated(const Frame& f, Point2 d) {
    Frame out = f;
    for (auto& p : out) p = p + d;
    return out;
}

}  // namespace

TEST(Normalize, HandExample) {
    const std::vector<double> x{1, 2, 3};
    EXPECT_EQ(normalize_channel(x), (std::vector<double>{-1, 0, 1}));
    EXPECT_THROW(normalize_channel(std::vector<double>{5, 5, 5}), DegenerateInput);
    EXPECT_THROW(normalize_channel(std::vector<double>{5}), ParameterError);
}

TEST(Normalize, RandomSeriesHaveUnitMoments) {
    Rng rng(21);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> x(static_cast<std::size_t>(rng.integer(2, 400)));
        const double mu = rng.normal(0, 100), sd = std::exp(rng.uniform(-5, 5));
        for (auto& v : x) v = rng.normal(mu, sd);
        const auto y = normalize_channel(x);
        double m = 0, ss = 0;
        for (double v : y) m += v;
        m /= double(y.size());
        for (double v : y) ss += (v - m) * (v - m);
        EXPECT_NEAR(m, 0.0, 1e-9);
        EXPECT_NEAR(std::sqrt(ss / double(y.size() - 1)), 1.0, 1e-9);
    }
}

TEST(Median, HandExamples) {
    EXPECT_EQ(median_filter(std::vector<double>{1, 9, 1, 9, 1}, 3), (std::vector<double>{1, 1, 9, 1, 1}));
    EXPECT_EQ(median_filter(std::vector<double>{0, 0, 100, 0, 0}, 3), (std::vector<double>(5, 0.0)));
    const std::vector<double> x{3, -1, 4, 1, 5};
    EXPECT_EQ(median_filter(x, 1), x);
    EXPECT_THROW(median_filter(x, 2), ParameterError);
    EXPECT_THROW(median_filter(x, 7), ParameterError);
}

TEST(Median, OutputsComeFromInput) {
    Rng rng(22);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> x(static_cast<std::size_t>(rng.integer(1, 60)));
        for (auto& v : x) v = rng.normal();
        int w = 2 * rng.integer(0, 10) + 1;
        if (static_cast<std::size_t>(w) > x.size()) w = 1;
        const auto y = median_filter(x, w);
        ASSERT_EQ(y.size(), x.size());
        const std::set<double> pool(x.begin(), x.end());
        for (double v : y) EXPECT_TRUE(pool.count(v));
        // brute force: sort the replicated window
        const auto n = static_cast<int>(x.size());
        for (int i = 0; i < n; ++i) {
            std::vector<double> win;
            for (int k = i - w / 2; k <= i + w / 2; ++k) win.push_back(x[static_cast<std::size_t>(std::clamp(k, 0, n - 1))]);
            std::sort(win.begin(), win.end());
            EXPECT_EQ(y[static_cast<std::size_t>(i)], win[win.size() / 2]);
        }
    }
}

TEST(Magnify, InBandSinusoidGain) {
    MagnificationParams p;
    p.alpha = 1.0;
    const auto x = testing_support::sinusoid(300, 1.0, 30.0, 2.5);
    const auto y = magnify_motion(x, p);
    EXPECT_NEAR(testing_support::amplitude_at(y, 1.0, 30.0) / 2.5, 2.0, 0.1);
    p.alpha = 10.0;
    EXPECT_NEAR(testing_support::amplitude_at(magnify_motion(x, p), 1.0, 30.0) / 2.5, 11.0, 0.55);
}

TEST(Magnify, StopbandAndDcUnchanged) {
    MagnificationParams p;
    p.alpha = 5.0;
    const auto x = testing_support::sinusoid(300, 6.0, 30.0, 1.5, 40.0);
    const auto y = magnify_motion(x, p);
    EXPECT_NEAR(testing_support::amplitude_at(y, 6.0, 30.0), 1.5, 0.015);
    const std::vector<double> c(64, 7.25);
    for (double v : magnify_motion(c, p)) EXPECT_NEAR(v, 7.25, 1e-9);
}

TEST(Magnify, Linear) {
    Rng rng(23);
    MagnificationParams p;
    std::vector<double> a(90), b(90), ab(90);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
        ab[i] = 2.0 * a[i] - 3.0 * b[i];
    }
    const auto ya = magnify_motion(a, p), yb = magnify_motion(b, p), yab = magnify_motion(ab, p);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(yab[i], 2.0 * ya[i] - 3.0 * yb[i], 1e-9);
}

TEST(Magnify, ParameterChecks) {
    const std::vector<double> x(32, 1.0);
    MagnificationParams p;
    p.band_hi_hz = 15.0;
    EXPECT_THROW(magnify_motion(x, p), ParameterError);
    p = {};
    p.band_lo_hz = 4.0;
    EXPECT_THROW(magnify_motion(x, p), ParameterError);
    p = {};
    p.alpha = -1;
    EXPECT_THROW(magnify_motion(x, p), ParameterError);
    EXPECT_THROW(magnify_motion(std::vector<double>(7, 1.0), MagnificationParams{}), ParameterError);
}

TEST(Affine, IdentityAndRigidMotion) {
    const Frame& templ = canonical_face();
    const auto same = fit_affine(templ, templ);
    EXPECT_LE(same.residual, 1e-18 * 1e6);
    EXPECT_TRUE(same.transform.isApprox((Eigen::Matrix<double, 2, 3>() << 1, 0, 0, 0, 1, 0).finished(), 1e-9));

    const double a = std::numbers::pi / 6;
    Frame moved;
    for (std::size_t i = 0; i < kLandmarkCount; ++i)
        moved[i] = {std::cos(a) * templ[i].x - std::sin(a) * templ[i].y + 17,
                    std::sin(a) * templ[i].x + std::cos(a) * templ[i].y - 4};
    const auto fit = fit_affine(moved, templ);
    EXPECT_LT(fit.residual, 1e-9);
    const auto aligned = align_landmarks_affine(moved, templ);
    EXPECT_EQ(aligned.provenance, FrameProvenance::affine);
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        EXPECT_NEAR(aligned.points[i].x, templ[i].x, 1e-6);
        EXPECT_NEAR(aligned.points[i].y, templ[i].y, 1e-6);
    }
}

TEST(Affine, ResidualIsMinimal) {
    Rng rng(24);
    for (int t = 0; t < 10; ++t) {
        const Frame f = testing_support::random_face(rng, 0.05), g = testing_support::random_face(rng, 0.05);
        const auto fit = fit_affine(f, g);
        EXPECT_NEAR(affine_residual(fit.transform, f, g), fit.residual, 1e-9 * std::max(1.0, fit.residual));
        for (int k = 0; k < 100; ++k) {
            Eigen::Matrix<double, 2, 3> T = fit.transform;
            const double s = k < 50 ? 1e-3 : 1.0;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 3; ++j) T(i, j) += rng.normal(0, j == 2 ? 10 * s : s);
            EXPECT_GE(affine_residual(T, f, g), fit.residual);
        }
    }
}

TEST(Affine, CollinearTemplateRejected) {
    Frame line;
    for (std::size_t i = 0; i < kLandmarkCount; ++i) line[i] = {double(i), 2.0 * double(i) + 1};
    EXPECT_THROW(fit_affine(canonical_face(), line), DegenerateInput);
}

TEST(Nose, TranslatesToOrigin) {
    Frame f = canonical_face();
    f = translated(f, Point2{10, 20} - f[landmarks::kNoseTip]);
    const auto n = normalize_to_nose(f);
    EXPECT_EQ(n.provenance, FrameProvenance::nose_normalized);
    EXPECT_EQ(n.points[landmarks::kNoseTip], (Point2{0, 0}));
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        EXPECT_NEAR(n.points[i].x, f[i].x - 10, 1e-12);
        EXPECT_NEAR(n.points[i].y, f[i].y - 20, 1e-12);
    }
    EXPECT_EQ(normalize_to_nose(n.points).points, n.points);
}

TEST(Nose, TranslationInvariant) {
    Rng rng(25);
    for (int t = 0; t < 20; ++t) {
        const Frame f = testing_support::random_face(rng);
        const auto a = normalize_to_nose(f).points;
        const auto b = normalize_to_nose(translated(f, {rng.normal(0, 100), rng.normal(0, 100)})).points;
        for (std::size_t i = 0; i < kLandmarkCount; ++i) {
            EXPECT_NEAR(a[i].x, b[i].x, 1e-9);
            EXPECT_NEAR(a[i].y, b[i].y, 1e-9);
        }
    }
}

TEST(PeakFrame, MatchesBruteForce) {
    Rng rng(26);
    for (int t = 0; t < 30; ++t) {
        LandmarkSequence seq;
        const Frame base = testing_support::random_face(rng);
        const int T = rng.integer(2, 12);
        for (int k = 0; k < T; ++k) {
            Frame f = base;
            for (auto& p : f) p = p + Point2{rng.normal(0, 0.5), rng.normal(0, 0.5)};
            seq.frames.push_back(translated(f, {rng.normal(0, 30), rng.normal(0, 30)}));
        }
        std::size_t best = 1;
        double best_dev = -1;
        for (std::size_t k = 1; k < seq.frames.size(); ++k) {
            double d = 0;
            const Point2 n0 = seq.frames[0][landmarks::kNoseTip], nk = seq.frames[k][landmarks::kNoseTip];
            for (std::size_t i = 0; i < kLandmarkCount; ++i) {
                const Point2 e = (seq.frames[k][i] - nk) - (seq.frames[0][i] - n0);
                d += dot(e, e);
            }
            if (d > best_dev) best_dev = d, best = k;
        }
        EXPECT_EQ(select_peak_frame(seq), best);
        // a global shift of the sequence leaves the choice unchanged
        LandmarkSequence shifted = seq;
        for (auto& f : shifted.frames) f = translated(f, {123.0, -45.0});
        EXPECT_EQ(select_peak_frame(shifted), best);
    }
}

TEST(PeakFrame, TiesAndMonotone) {
    LandmarkSequence seq;
    seq.frames.assign(6, canonical_face());
    EXPECT_EQ(select_peak_frame(seq), 1u);
    for (std::size_t k = 0; k < seq.frames.size(); ++k) seq.frames[k][48].x += double(k);
    EXPECT_EQ(select_peak_frame(seq), 5u);
    seq.frames[3][48].x += 100;
    EXPECT_EQ(select_peak_frame(seq), 3u);
    seq.frames.resize(1);
    EXPECT_THROW(select_peak_frame(seq), ParameterError);
}
