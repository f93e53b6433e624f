#include "msloss/core.hpp"
#include "msloss/gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace msloss;

TEST(L2Normalize, ThreeFourFive) {
    FeatureMatrix f(1, 2);
    f << 3.0, 4.0;
    const EmbeddingMatrix e = l2_normalize(f);
    EXPECT_DOUBLE_EQ(e(0, 0), 0.6);
    EXPECT_DOUBLE_EQ(e(0, 1), 0.8);
}

TEST(L2Normalize, UnitRowUnchanged) {
    FeatureMatrix f(1, 3);
    f << 1.0, 0.0, 0.0;
    EXPECT_EQ(l2_normalize(f), f);
}

TEST(L2Normalize, Diagonal) {
    FeatureMatrix f(1, 2);
    f << 1.0, 1.0;
    const EmbeddingMatrix e = l2_normalize(f);
    EXPECT_NEAR(e(0, 0), 0.70710678, 1e-8);
    EXPECT_NEAR(e(0, 1), 0.70710678, 1e-8);
}

TEST(L2Normalize, ZeroRowReportsIndex) {
    FeatureMatrix f(3, 2);
    f << 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
    try {
        (void)l2_normalize(f);
        FAIL() << "expected ZeroNormRow";
    } catch (const ZeroNormRow& e) {
        EXPECT_EQ(e.row(), 1);
    }
}

TEST(SimilarityMatrix, HandCases) {
    EmbeddingMatrix same(2, 2);
    same << 1.0, 0.0, 1.0, 0.0;
    EXPECT_DOUBLE_EQ(similarity_matrix(same)(0, 1), 1.0);

    EmbeddingMatrix ortho(2, 2);
    ortho << 1.0, 0.0, 0.0, 1.0;
    EXPECT_DOUBLE_EQ(similarity_matrix(ortho)(0, 1), 0.0);

    const double r = 1.0 / std::sqrt(2.0);
    EmbeddingMatrix diag(2, 2);
    diag << 1.0, 0.0, r, r;
    EXPECT_NEAR(similarity_matrix(diag)(0, 1), 0.70710678, 1e-8);
}

TEST(PairMasks, SmallExample) {
    const PairMasks masks = pair_masks({1, 1, 2});
    BoolMatrix pos(3, 3), neg(3, 3);
    pos << false, true, false, true, false, false, false, false, false;
    neg << false, false, true, false, false, true, true, true, false;
    EXPECT_EQ(masks.positive, pos);
    EXPECT_EQ(masks.negative, neg);
}

TEST(PairMasks, AllEqualAndAllDistinct) {
    EXPECT_FALSE(pair_masks({4, 4, 4, 4}).negative.any());
    EXPECT_FALSE(pair_masks({1, 2, 3, 4}).positive.any());
}

TEST(HyperParams, DefaultsAndValidation) {
    HyperParams hp;
    EXPECT_EQ(hp.alpha, 2.0);
    EXPECT_EQ(hp.beta, 50.0);
    EXPECT_EQ(hp.lambda, 1.0);
    EXPECT_EQ(hp.epsilon, 0.1);
    EXPECT_NO_THROW(hp.validate());
    hp.alpha = 0.0;
    EXPECT_THROW(hp.validate(), InvalidArgument);
    hp = {};
    hp.epsilon = -0.1;
    EXPECT_THROW(hp.validate(), InvalidArgument);
}

TEST(CoreProperties, RandomSimilarityIsSymmetricWithUnitDiagonal) {
    Rng rng(1);
    std::uniform_int_distribution<int> pick_m(2, 16), pick_d(1, 8);
    for (int trial = 0; trial < 200; ++trial) {
        const FeatureMatrix f = random_gaussian(pick_m(rng), pick_d(rng), rng);
        const SimilarityMatrix s = similarity_matrix(l2_normalize(f));
        EXPECT_LE((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE((s.diagonal().array() - 1.0).abs().maxCoeff(), 1e-9);
        EXPECT_LE(s.cwiseAbs().maxCoeff(), 1.0 + 1e-9);
    }
}

TEST(CoreProperties, RowScalingLeavesEmbeddingUnchanged) {
    Rng rng(2);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    for (int trial = 0; trial < 100; ++trial) {
        const FeatureMatrix f = random_gaussian(6, 4, rng);
        FeatureMatrix g = f;
        for (Eigen::Index i = 0; i < g.rows(); ++i)
            g.row(i) *= scale(rng);
        EXPECT_LE((l2_normalize(f) - l2_normalize(g)).cwiseAbs().maxCoeff(), 1e-9);
        const auto ef = l2_normalize(f);
        EXPECT_LE((ef.rowwise().norm().array() - 1.0).abs().maxCoeff(), 1e-12);
    }
}

TEST(CoreProperties, MasksPartitionOffDiagonal) {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const Labels y = random_labels(9, rng);
        const PairMasks masks = pair_masks(y);
        for (Eigen::Index i = 0; i < 9; ++i)
            for (Eigen::Index j = 0; j < 9; ++j) {
                const int count = int(masks.positive(i, j)) + int(masks.negative(i, j));
                EXPECT_EQ(count, i == j ? 0 : 1);
            }
    }
}

TEST(CheckBatch, RejectsMismatch) {
    EXPECT_THROW(check_batch(Matrix::Identity(3, 3), {1, 2}), InvalidArgument);
    EXPECT_THROW(check_batch(Matrix::Identity(1, 1), {1}), InvalidArgument);
    EXPECT_NO_THROW(check_batch(Matrix::Identity(2, 2), {1, 2}));
}
