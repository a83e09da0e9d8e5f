#include <gtest/gtest.h>

#include "support.hpp"

using namespace affect;
using testing_support::Rng;

namespace {

// Conditional row by bisection on log(sigma); independent of the library search.
Eigen::VectorXd oracle_conditional(const Eigen::MatrixXd& X, Eigen::Index i, double perplexity, double* achieved) {
    const Eigen::Index n = X.rows();
    double lo = -30, hi = 30;
    Eigen::VectorXd p(n);
    for (int it = 0; it < 300; ++it) {
        const double ls = 0.5 * (lo + hi), s2 = std::exp(2 * ls);
        double mn = 1e300;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) mn = std::min(mn, (X.row(i) - X.row(j)).squaredNorm());
        double sum = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            p(j) = j == i ? 0.0 : std::exp(-((X.row(i) - X.row(j)).squaredNorm() - mn) / (2 * s2));
            sum += p(j);
        }
        p /= sum;
        double h = 0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (p(j) > 0) h -= p(j) * std::log(p(j));
        *achieved = std::exp(h);
        if (*achieved < perplexity) lo = ls;
        else hi = ls;
    }
    return p;
}

double oracle_kl(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Y) {
    const Eigen::Index n = Y.rows();
    double z = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j) z += 1.0 / (1.0 + (Y.row(i) - Y.row(j)).squaredNorm());
    double kl = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j || P(i, j) == 0) continue;
            const double q = 1.0 / (1.0 + (Y.row(i) - Y.row(j)).squaredNorm()) / z;
            kl += P(i, j) * std::log(P(i, j) / q);
        }
    return kl;
}

}  // namespace

TEST(Pca, EigenvaluesMatchJacobiOracle) {
    Rng rng(41);
    for (auto [n, d] : {std::pair{30, 6}, std::pair{8, 12}}) {
        const Eigen::MatrixXd X = rng.matrix(n, d) * rng.matrix(d, d);
        const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
        const auto oracle = testing_support::jacobi_eigen(Xc.transpose() * Xc / double(n - 1)).values;
        const Eigen::Index k = std::min(n, d);
        const auto m = pca_fit(X, k);
        for (Eigen::Index c = 0; c < k; ++c) {
            const double want = std::max(0.0, oracle(d - 1 - c));
            EXPECT_NEAR(m.eigenvalues(c), want, 1e-8 * std::max(1.0, oracle(d - 1))) << n << "x" << d << " c=" << c;
        }
        EXPECT_TRUE((m.components.transpose() * m.components).isApprox(Eigen::MatrixXd::Identity(k, k), 1e-9));
    }
}

TEST(Pca, FullRankPreservesDistances) {
    Rng rng(42);
    const Eigen::MatrixXd X = rng.matrix(20, 5, 3.0);
    const auto Z = pca_fit_transform(X, 5);
    for (Eigen::Index i = 0; i < 20; ++i)
        for (Eigen::Index j = 0; j < 20; ++j)
            EXPECT_NEAR((Z.row(i) - Z.row(j)).norm(), (X.row(i) - X.row(j)).norm(), 1e-9);
}

TEST(Pca, RankOneReconstructs) {
    Rng rng(43);
    const Eigen::VectorXd u = Eigen::VectorXd::Random(7);
    Eigen::MatrixXd X(15, 7);
    for (Eigen::Index i = 0; i < 15; ++i) X.row(i) = rng.normal(0, 4) * u.transpose() + Eigen::RowVectorXd::Constant(7, 2.0);
    const auto m = pca_fit(X, 1);
    EXPECT_LT((m.inverse_transform(m.transform(X)) - X).norm(), 1e-9);
}

TEST(Pca, ScoresAreOrderedAndDecorrelated) {
    Rng rng(44);
    const Eigen::MatrixXd X = rng.matrix(60, 8) * rng.matrix(8, 8);
    const auto Z = pca_fit_transform(X, 4);
    const Eigen::MatrixXd C = Z.transpose() * Z / 59.0;
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b)
            if (a != b) {
                EXPECT_NEAR(C(a, b), 0.0, 1e-9 * C(0, 0));
            }
        if (a) {
            EXPECT_GE(C(a - 1, a - 1), C(a, a));
        }
    }
}

TEST(Pca, RangeErrors) {
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 3);
    EXPECT_THROW(pca_fit(X, 0), ParameterError);
    EXPECT_THROW(pca_fit(X, 4), ParameterError);
    EXPECT_THROW(pca_fit(X.topRows(1), 1), ParameterError);
}

TEST(Tsne, JointProbabilitiesMatchOracle) {
    Rng rng(45);
    const Eigen::MatrixXd X = rng.matrix(25, 6);
    for (double perp : {3.0, 10.0}) {
        std::vector<double> achieved;
        const Eigen::MatrixXd P = tsne_joint_probabilities(X, perp, &achieved);
        Eigen::MatrixXd Pc(25, 25);
        for (Eigen::Index i = 0; i < 25; ++i) {
            double a = 0;
            Pc.row(i) = oracle_conditional(X, i, perp, &a).transpose();
            EXPECT_NEAR(a, perp, 1e-4);
            EXPECT_NEAR(achieved[static_cast<std::size_t>(i)], perp, 1e-4);
        }
        const Eigen::MatrixXd want = (Pc + Pc.transpose()) / 50.0;
        EXPECT_LT((P - want).cwiseAbs().maxCoeff(), 1e-7);
        EXPECT_EQ(P, P.transpose());
        EXPECT_NEAR(P.sum(), 1.0, 1e-9);
        for (Eigen::Index i = 0; i < 25; ++i) EXPECT_EQ(P(i, i), 0.0);
    }
}

TEST(Tsne, EquidistantTriangle) {
    // basis vectors are exactly equidistant in floating point
    const Eigen::MatrixXd X = 5.0 * Eigen::MatrixXd::Identity(3, 3);
    for (double perp : {1.5, 2.0}) {
        const auto P = tsne_joint_probabilities(X, perp);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (i != j) {
                    EXPECT_NEAR(P(i, j), 1.0 / 6.0, 1e-12);
                }
    }
}

TEST(Tsne, GradientMatchesFiniteDifferences) {
    Rng rng(46);
    for (int t = 0; t < 10; ++t) {
        const Eigen::MatrixXd X = rng.matrix(5, 4);
        const auto P = tsne_joint_probabilities(X, 2.0);
        const Eigen::MatrixXd Y = rng.matrix(5, 2);
        EXPECT_NEAR(tsne_kl(P, Y), oracle_kl(P, Y), 1e-12);
        EXPECT_GE(tsne_kl(P, Y), 0.0);
        const auto g = tsne_gradient(P, Y);
        const auto fd = testing_support::numeric_gradient([&](const Eigen::MatrixXd& y) { return oracle_kl(P, y); }, Y);
        EXPECT_LE((g - fd).norm(), 1e-5 * std::max(1.0, fd.norm()));
    }
}

TEST(Tsne, SeparatesTwoClustersAndLowersKl) {
    Rng rng(47);
    Eigen::MatrixXd X(20, 50);
    for (Eigen::Index i = 0; i < 20; ++i)
        for (Eigen::Index d = 0; d < 50; ++d) X(i, d) = rng.normal() + (i < 10 && d == 0 ? 12.0 : 0.0);
    TsneParams p;
    p.perplexity = 5;
    p.seed = 3;
    const auto res = tsne_run(X, p);
    EXPECT_LT(res.kl_final, res.kl_initial);
    EXPECT_GE(res.kl_final, 0.0);
    const auto& Y = res.embedding;
    EXPECT_LT(Y.colwise().mean().norm(), 1e-9);
    int correct = 0;
    for (Eigen::Index i = 0; i < 20; ++i) {
        Eigen::Index best = -1;
        double bd = 1e300;
        for (Eigen::Index j = 0; j < 20; ++j)
            if (j != i && (Y.row(i) - Y.row(j)).squaredNorm() < bd) bd = (Y.row(i) - Y.row(j)).squaredNorm(), best = j;
        correct += (best < 10) == (i < 10);
    }
    EXPECT_GE(correct, 19);
}

TEST(Tsne, KlDecreasesOnRandomInputs) {
    Rng rng(48);
    for (int t = 0; t < 3; ++t) {
        const Eigen::MatrixXd X = rng.matrix(12, 5);
        TsneParams p;
        p.perplexity = 4;
        p.seed = static_cast<std::uint64_t>(t);
        const auto res = tsne_run(X, p);
        EXPECT_LT(res.kl_final, res.kl_initial);
    }
}

TEST(Tsne, DeterministicUnderSeed) {
    Rng rng(49);
    const Eigen::MatrixXd X = rng.matrix(15, 4);
    TsneParams p;
    p.perplexity = 5;
    p.iterations = 200;
    p.seed = 9;
    EXPECT_EQ(tsne(X, p), tsne(X, p));
    p.perplexity = 15;
    EXPECT_THROW(tsne(X, p), ParameterError);
    p.perplexity = 2;
    EXPECT_THROW(tsne(X.topRows(3), p), ParameterError);
}

TEST(Tsne, OutOfSampleLandsNearTrainingNeighbour) {
    Rng rng(50);
    Eigen::MatrixXd X(20, 10);
    for (Eigen::Index i = 0; i < 20; ++i)
        for (Eigen::Index d = 0; d < 10; ++d) X(i, d) = rng.normal() + (i < 10 && d == 0 ? 15.0 : 0.0);
    TsneParams p;
    p.perplexity = 5;
    p.seed = 2;
    const auto m = tsne_fit(X, p);
    const Eigen::RowVectorXd c0 = m.embedding.topRows(10).colwise().mean(), c1 = m.embedding.bottomRows(10).colwise().mean();
    Eigen::MatrixXd q(2, 10);
    q.row(0) = X.row(3) + 0.01 * Eigen::RowVectorXd::Ones(10);
    q.row(1) = X.row(15) - 0.01 * Eigen::RowVectorXd::Ones(10);
    const auto z = m.transform(q);
    EXPECT_LT((z.row(0) - c0).norm(), (z.row(0) - c1).norm());
    EXPECT_LT((z.row(1) - c1).norm(), (z.row(1) - c0).norm());
}
