#include <gtest/gtest.h>

#include "support.hpp"

using namespace affect;
using testing_support::Rng;
using testing_support::quat_dist;

namespace {

constexpr Quat kOne{1, 0, 0, 0}, kI{0, 1, 0, 0}, kJ{0, 0, 1, 0}, kK{0, 0, 0, 1};

std::vector<QuatVector> quat_data(Rng& rng, std::size_t n, std::size_t f) {
    std::vector<QuatVector> data(n, QuatVector(f));
    for (auto& x : data)
        for (auto& q : x) q = rng.quat();
    return data;
}

}  // namespace

TEST(QuatAlgebra, BasisIdentities) {
    EXPECT_EQ(kI * kI, -kOne);
    EXPECT_EQ(kJ * kJ, -kOne);
    EXPECT_EQ(kK * kK, -kOne);
    EXPECT_EQ(kI * kJ, kK);
    EXPECT_EQ(kJ * kK, kI);
    EXPECT_EQ(kK * kI, kJ);
    EXPECT_EQ(kJ * kI, -kK);
    EXPECT_EQ(kK * kJ, -kI);
    EXPECT_EQ(kI * kK, -kJ);
    EXPECT_EQ(kI * kJ * kK, -kOne);
}

TEST(QuatAlgebra, ConjugateAndNorm) {
    EXPECT_EQ(qconj(Quat{1, 2, 3, 4}), (Quat{1, -2, -3, -4}));
    EXPECT_EQ(qnorm(Quat{}), 0.0);
    EXPECT_DOUBLE_EQ(qnorm(Quat{1, 2, 3, 4}), std::sqrt(30.0));
    const Quat q{0.3, -1.2, 2.5, 0.7};
    const Quat qqh = q * qconj(q);
    EXPECT_NEAR(qqh.r, qnorm2(q), 1e-15);
    EXPECT_NEAR(qnorm(qqh - Quat{qqh.r, 0, 0, 0}), 0.0, 1e-15);
}

TEST(QuatAlgebra, RandomProperties) {
    Rng rng(11);
    for (int t = 0; t < 2000; ++t) {
        const Quat a = rng.quat(), b = rng.quat(), c = rng.quat();
        EXPECT_LE(quat_dist(a * kOne, a), 0.0);
        EXPECT_LE(quat_dist(qconj(a * b), qconj(b) * qconj(a)), 1e-12 * (1 + qnorm(a) * qnorm(b)));
        EXPECT_LE(testing_support::rel_err(qnorm(a * b), qnorm(a) * qnorm(b)), 1e-12);
        EXPECT_LE(quat_dist((a * b) * c, a * (b * c)), 1e-12 * (1 + qnorm(a) * qnorm(b) * qnorm(c)));
    }
}

TEST(QuatIsomorphism, ImagesOfBasis) {
    EXPECT_TRUE(quat_to_complex(kOne).isApprox(Eigen::Matrix2cd::Identity()));
    Eigen::Matrix2cd i_img;
    i_img << std::complex<double>(0, 1), 0, 0, std::complex<double>(0, -1);
    EXPECT_TRUE(quat_to_complex(kI).isApprox(i_img));
}

TEST(QuatIsomorphism, RingHomomorphism) {
    Rng rng(12);
    for (int t = 0; t < 1000; ++t) {
        const Quat a = rng.quat(), b = rng.quat();
        EXPECT_LE((quat_to_complex(a * b) - quat_to_complex(a) * quat_to_complex(b)).norm(), 1e-12 * (1 + qnorm(a) * qnorm(b)));
        EXPECT_LE((quat_to_complex(a + b) - quat_to_complex(a) - quat_to_complex(b)).norm(), 1e-14);
        EXPECT_LE((quat_to_complex(qconj(a)) - quat_to_complex(a).adjoint()).norm(), 1e-14);
        EXPECT_EQ(complex_to_quat(quat_to_complex(a)), a);
    }
}

TEST(ChannelMaps, PresetsMatchTheirDefinitions) {
    EegRecording rec(128.0, {{"AF3", {3, 0}}, {"F7", {1, 0}}, {"F8", {2, 0}}, {"AF4", {4, 0}}});
    EXPECT_EQ(eeg_to_quats(rec, ChannelMap::preset_a())[0], (Quat{1, 2, 3, 4}));
    EXPECT_EQ(eeg_to_quats(rec, ChannelMap::preset_b())[0], (Quat{1, -3, 2, 4}));
    EXPECT_EQ(eeg_to_quats(rec, ChannelMap::preset("A")).size(), 2u);
    EXPECT_THROW(ChannelMap::preset("C"), ParameterError);
}

TEST(ChannelMaps, MissingChannelIsNamed) {
    ChannelMap m = ChannelMap::preset_a();
    m.slots[3].channel = "O1";
    EegRecording rec(128.0, {{"AF3", {3, 0}}, {"F7", {1, 0}}, {"F8", {2, 0}}, {"AF4", {4, 0}}});
    try {
        eeg_to_quats(rec, m);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("O1"), std::string::npos);
    }
}

TEST(Qpca, EigenvaluesMatchDenseHermitianOracle) {
    Rng rng(13);
    for (std::size_t F : {3u, 8u, 16u}) {
        const auto data = quat_data(rng, 2 * F + 5, F);
        const auto model = quaternion_pca_fit(data, F, QpcaSolver::covariance);
        const Eigen::MatrixXcd g = detail::complex_data_form(data, model.mean);
        const Eigen::VectorXd oracle = testing_support::hermitian_eigenvalues(g * g.adjoint());
        // oracle ascending; pairs duplicated
        for (Eigen::Index i = 0; i + 1 < oracle.size(); i += 2)
            EXPECT_NEAR(oracle(i), oracle(i + 1), 1e-8 * std::max(1.0, oracle(oracle.size() - 1)));
        for (std::size_t c = 0; c < F; ++c) {
            const double want = oracle(oracle.size() - 1 - 2 * static_cast<Eigen::Index>(c));
            EXPECT_NEAR(model.eigenvalues[c], want, 1e-8 * std::max(1.0, want)) << "F=" << F << " c=" << c;
        }
    }
}

TEST(Qpca, GramRouteAgreesWithCovarianceRoute) {
    Rng rng(14);
    const auto data = quat_data(rng, 6, 20);
    const auto cov = quaternion_pca_fit(data, 4, QpcaSolver::covariance);
    const auto gram = quaternion_pca_fit(data, 4, QpcaSolver::gram);
    for (std::size_t c = 0; c < 4; ++c) {
        EXPECT_NEAR(cov.eigenvalues[c], gram.eigenvalues[c], 1e-8 * cov.eigenvalues[0]);
        // components agree up to a right unit factor: |u^H w| = 1
        EXPECT_NEAR(qnorm(qdot(cov.components[c], gram.components[c])), 1.0, 1e-8);
    }
}

TEST(Qpca, ComponentsAreOrthonormal) {
    Rng rng(15);
    const auto data = quat_data(rng, 40, 10);
    const auto m = quaternion_pca_fit(data, 10);
    for (std::size_t a = 0; a < m.k(); ++a)
        for (std::size_t b = 0; b < m.k(); ++b) {
            const Quat d = qdot(m.components[a], m.components[b]);
            EXPECT_LE(quat_dist(d, a == b ? kOne : Quat{}), 1e-6);
        }
    for (std::size_t c = 1; c < m.k(); ++c) EXPECT_GE(m.eigenvalues[c - 1], m.eigenvalues[c]);
}

TEST(Qpca, RankOneDataHasOneNonZeroEigenvalue) {
    Rng rng(16);
    QuatVector u(6);
    for (auto& q : u) q = rng.quat();
    std::vector<QuatVector> data;
    for (int n = 0; n < 12; ++n) {
        const Quat s = rng.quat();
        QuatVector x(6);
        for (std::size_t f = 0; f < 6; ++f) x[f] = u[f] * s;
        data.push_back(x);
    }
    const auto m = quaternion_pca_fit(data, 6);
    EXPECT_GT(m.eigenvalues[0], 1e-9);
    for (std::size_t c = 1; c < 6; ++c) EXPECT_LE(m.eigenvalues[c], 1e-9 * m.eigenvalues[0]);
}

TEST(Qpca, ConstantDataGivesZeroSpectrum) {
    std::vector<QuatVector> data(5, QuatVector(4, Quat{1, 2, 3, 4}));
    const auto m = quaternion_pca_fit(data, 3);
    ASSERT_EQ(m.k(), 3u);
    for (double e : m.eigenvalues) EXPECT_EQ(e, 0.0);
}

TEST(Qpca, ProjectionShapeAndCentering) {
    Rng rng(17);
    const auto data = quat_data(rng, 30, 20);
    const auto m = quaternion_pca_fit(data, 15);
    const auto f = quaternion_pca_project(m, data[0]);
    EXPECT_EQ(f.size(), 60u);
    EXPECT_EQ(f.tag, FeatureTag::quaternion_pca);
    for (double v : quaternion_pca_project(m, m.mean).values) EXPECT_EQ(v, 0.0);
    EXPECT_THROW(quaternion_pca_project(m, QuatVector(19)), ParameterError);
    EXPECT_THROW(quaternion_pca_fit(data, 21), ParameterError);
}

TEST(Qpca, FullBasisPreservesVarianceAndReconstructs) {
    Rng rng(18);
    const std::size_t F = 7;
    const auto data = quat_data(rng, 25, F);
    const auto m = quaternion_pca_fit(data, F);
    double total_x = 0, total_y = 0;
    for (const auto& x : data) {
        const auto y = quaternion_pca_scores(m, x);
        const auto back = quaternion_pca_reconstruct(m, y);
        for (std::size_t f = 0; f < F; ++f) {
            EXPECT_LE(quat_dist(back[f], x[f]), 1e-6);
            total_x += qnorm2(x[f] - m.mean[f]);
        }
        total_y += qvec_norm2(y);
    }
    EXPECT_LE(testing_support::rel_err(total_x, total_y), 1e-6);
    // sum of eigenvalues is the total variance
    double s = 0;
    for (double e : m.eigenvalues) s += e;
    EXPECT_LE(testing_support::rel_err(s, total_x), 1e-6);
}

TEST(Qpca, JsonRoundTrip) {
    Rng rng(19);
    const auto data = quat_data(rng, 10, 5);
    const auto m = quaternion_pca_fit(data, 3);
    const auto back = qpca_from_json(to_json(m));
    EXPECT_EQ(back.mean, m.mean);
    EXPECT_EQ(back.components, m.components);
    EXPECT_EQ(back.eigenvalues, m.eigenvalues);
}
