#include "msloss/gradcheck.hpp"
#include "msloss/trainer.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

using namespace msloss;

// --- batch sampling --------------------------------------------------------

TEST(BatchSample, TakesEverythingWhenExact) {
    Rng rng(1);
    IndexVector batch = batch_sample({0, 1, 1, 0}, {2, 2}, rng);
    std::sort(batch.begin(), batch.end());
    EXPECT_EQ(batch, (IndexVector{0, 1, 2, 3}));
}

TEST(BatchSample, SmallClassesAreIneligible) {
    const Labels y{0, 0, 0, 1, 1, 1, 2, 2};
    Rng rng(2);
    for (int n = 0; n < 50; ++n)
        for (auto i : batch_sample(y, {2, 3}, rng))
            EXPECT_NE(y[std::size_t(i)], 2);
    EXPECT_THROW(batch_sample(y, {3, 3}, rng), InsufficientClassPopulation);
}

TEST(BatchSample, DeterministicPerSeed) {
    Labels y;
    for (int c = 0; c < 10; ++c)
        for (int k = 0; k < 7; ++k)
            y.push_back(c);
    Rng a(99), b(99);
    for (int n = 0; n < 5; ++n)
        EXPECT_EQ(batch_sample(y, {4, 5}, a), batch_sample(y, {4, 5}, b));
}

TEST(BatchSample, CompositionIsBalanced) {
    Labels y;
    for (int c = 0; c < 12; ++c)
        for (int k = 0; k < 3 + c; ++k)
            y.push_back(c);
    Rng rng(3);
    for (int n = 0; n < 100; ++n) {
        const IndexVector batch = batch_sample(y, {6, 5}, rng);
        ASSERT_EQ(batch.size(), 30u);
        EXPECT_EQ(std::set<Eigen::Index>(batch.begin(), batch.end()).size(), 30u);
        std::map<int, int> per_class;
        for (auto i : batch)
            ++per_class[y[std::size_t(i)]];
        EXPECT_EQ(per_class.size(), 6u);
        for (auto [label, count] : per_class)
            EXPECT_EQ(count, 5);
    }
}

TEST(BatchSpec, Validation) {
    EXPECT_THROW((BatchSpec{1, 5}.validate()), InvalidArgument);
    EXPECT_THROW((BatchSpec{4, 1}.validate()), InvalidArgument);
}

// --- forward / backward ----------------------------------------------------

TEST(Forward, IdentityOnUnitInputs) {
    Rng rng(4);
    const FeatureMatrix x = l2_normalize(random_gaussian(5, 3, rng));
    EXPECT_LE((forward(Matrix::Identity(3, 3), x).e - x).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((forward(2.0 * Matrix::Identity(3, 3), x).e - x).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Forward, HandComputed) {
    Matrix w(1, 2);
    w << 1.0, 0.0;
    FeatureMatrix x(1, 2);
    x << 3.0, 4.0;
    const ForwardCache cache = forward(w, x);
    EXPECT_DOUBLE_EQ(cache.z(0, 0), 3.0);
    EXPECT_DOUBLE_EQ(cache.e(0, 0), 1.0);
}

TEST(Forward, ZeroProjectionThrows) {
    Matrix w = Matrix::Zero(2, 2);
    FeatureMatrix x(1, 2);
    x << 1.0, 1.0;
    EXPECT_THROW(forward(w, x), ZeroNormRow);
}

TEST(Backward, ZeroUpstreamGradient) {
    Rng rng(5);
    const FeatureMatrix x = random_gaussian(6, 4, rng);
    const Matrix w = random_gaussian(3, 4, rng);
    const ForwardCache cache = forward(w, x);
    EXPECT_EQ(backward(GradMatrix::Zero(6, 6), cache, x).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, RadialGradientVanishes) {
    Rng rng(6);
    const FeatureMatrix x = random_gaussian(4, 3, rng);
    const ForwardCache cache = forward(random_gaussian(3, 3, rng), x);
    Matrix radial = cache.e;
    for (Eigen::Index i = 0; i < radial.rows(); ++i)
        radial.row(i) *= double(i + 1);
    EXPECT_LE(normalize_backward(radial, cache).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Backward, NormalizationGradientIsTangent) {
    Rng rng(7);
    for (int n = 0; n < 50; ++n) {
        const FeatureMatrix x = random_gaussian(8, 5, rng);
        const ForwardCache cache = forward(random_gaussian(4, 5, rng), x);
        const Matrix grad_z = normalize_backward(random_gaussian(8, 4, rng), cache);
        for (Eigen::Index i = 0; i < grad_z.rows(); ++i)
            EXPECT_LE(std::abs(grad_z.row(i).dot(cache.e.row(i))), 1e-9);
    }
}

TEST(Backward, MatchesFiniteDifferencesSmallInstance) {
    HyperParams hp;
    Rng rng(8);
    const MethodLoss loss(Method::ms);
    for (int n = 0; n < 5; ++n) {
        const ParamInstance inst = sample_param_instance(loss, hp, 1e-3, rng);
        EXPECT_LT(param_gradient_error(loss, inst, hp, 1e-6), 1e-4);
    }
}

TEST(Backward, EveryScalarLossEndToEnd) {
    HyperParams hp;
    for (Method m : kAllMethods) {
        const MethodLoss loss(m);
        if (!loss.has_value())
            continue;
        Rng rng(200 + static_cast<int>(m));
        double worst = 0.0;
        for (int n = 0; n < 20; ++n)
            worst = std::max(worst, param_gradient_error(loss, sample_param_instance(loss, hp, 1e-3, rng),
                                                         hp, 1e-6));
        EXPECT_LT(worst, 1e-4) << loss.name();
    }
}

// --- Adam ------------------------------------------------------------------

TEST(Adam, ZeroGradientLeavesParams) {
    ModelParams p{Matrix::Constant(2, 3, 0.25)};
    AdamState state = AdamState::fresh(p.w);
    adam_step(state, p, Matrix::Zero(2, 3));
    EXPECT_EQ(p.w, Matrix::Constant(2, 3, 0.25));
    EXPECT_EQ(state.t, 1);
}

TEST(Adam, FirstStepIsLearningRate) {
    ModelParams p{Matrix::Zero(1, 1)};
    AdamState state = AdamState::fresh(p.w, {0.1, 0.9, 0.999, 1e-8});
    adam_step(state, p, Matrix::Ones(1, 1));
    // m_hat = 1, v_hat = 1.
    EXPECT_NEAR(p.w(0, 0), -0.1, 1e-8);
}

TEST(Adam, Deterministic) {
    Rng rng(9);
    const Matrix g = random_gaussian(3, 3, rng);
    ModelParams a{Matrix::Ones(3, 3)}, b{Matrix::Ones(3, 3)};
    AdamState sa = AdamState::fresh(a.w), sb = AdamState::fresh(b.w);
    for (int n = 0; n < 10; ++n) {
        adam_step(sa, a, g * n);
        adam_step(sb, b, g * n);
    }
    EXPECT_EQ(a.w, b.w);
}

TEST(Adam, ShapeMismatch) {
    ModelParams p{Matrix::Zero(2, 2)};
    AdamState state = AdamState::fresh(p.w);
    EXPECT_THROW(adam_step(state, p, Matrix::Zero(3, 2)), InvalidArgument);
}

TEST(Adam, SmallStepDoesNotIncreaseLoss) {
    HyperParams hp;
    for (Method m : kAllMethods) {
        const MethodLoss loss(m);
        if (!loss.has_value())
            continue;
        for (int seed = 0; seed < 20; ++seed) {
            Rng rng(1000 + seed);
            const ParamInstance inst = sample_param_instance(loss, hp, 1e-2, rng);
            ModelParams p{inst.w};
            const BatchLoss before = batch_loss(loss, p, inst.x, inst.y, hp);
            AdamState state = AdamState::fresh(p.w, {1e-4, 0.9, 0.999, 1e-8});
            adam_step(state, p, before.grad_w);
            const double after = loss_at_params(loss, p.w, inst.x, inst.y, hp);
            EXPECT_LE(after, before.value + 1e-12) << loss.name() << " seed " << seed;
        }
    }
}

// --- training loop ---------------------------------------------------------

namespace {

Dataset small_synth() {
    return synth_dataset({4, 20, 8, 0.3, 5});
}

TrainConfig small_config(int epochs) {
    TrainConfig tc;
    tc.batch = {4, 5};
    tc.embedding_dim = 4;
    tc.epochs = epochs;
    tc.adam.lr = 1e-2;
    tc.seed = 3;
    return tc;
}

}  // namespace

TEST(Train, ZeroEpochsKeepsInitialization) {
    const TrainConfig tc = small_config(0);
    const TrainResult result = train(tc, small_synth());
    Rng rng(tc.seed);
    EXPECT_EQ(result.params.w, init_params(tc.embedding_dim, 8, rng).w);
    EXPECT_TRUE(result.history.epochs.empty());
    EXPECT_EQ(result.initial.recall, result.final.recall);
}

TEST(Train, DeterministicHistories) {
    const TrainConfig tc = small_config(5);
    const TrainResult a = train(tc, small_synth());
    const TrainResult b = train(tc, small_synth());
    ASSERT_EQ(a.history.epochs.size(), 5u);
    for (std::size_t e = 0; e < 5; ++e) {
        EXPECT_EQ(a.history.epochs[e].loss_mean, b.history.epochs[e].loss_mean);
        EXPECT_EQ(a.history.epochs[e].recall_at_1, b.history.epochs[e].recall_at_1);
    }
    EXPECT_EQ(a.params.w, b.params.w);
}

TEST(Train, MsImprovesRecallOnSeparableData) {
    const Dataset data = synth_dataset({4, 20, 8, 0.5, 11});
    TrainConfig tc = small_config(40);
    const TrainResult result = train(tc, data);
    EXPECT_GT(result.final.at(1), result.initial.at(1));
}

TEST(Train, EveryMethodRuns) {
    for (Method m : kAllMethods) {
        TrainConfig tc = small_config(2);
        tc.method = m;
        const TrainResult result = train(tc, small_synth());
        EXPECT_EQ(result.history.epochs.size(), 2u) << method_name(m);
        EXPECT_TRUE(std::isfinite(result.history.epochs.back().loss_mean)) << method_name(m);
    }
}

TEST(Train, RejectsDatasetWithoutSplit) {
    Dataset d = small_synth();
    d.train.clear();
    d.test.clear();
    EXPECT_THROW(train(small_config(1), d), InvalidArgument);
}

TEST(InitParams, ScaledUniform) {
    Rng rng(10);
    const ModelParams p = init_params(16, 64, rng);
    EXPECT_LE(p.w.cwiseAbs().maxCoeff(), 1.0 / 8.0);
    EXPECT_THROW(init_params(1, 4, rng), InvalidArgument);
}
