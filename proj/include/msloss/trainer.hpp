#pragma once

// Desk-scale learner: a linear map followed by L2 normalization, trained with
// Adam on class-balanced batches.

#include "msloss/core.hpp"
#include "msloss/eval.hpp"
#include "msloss/gpw.hpp"
#include "msloss/losses.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

namespace msloss {

using Rng = std::mt19937_64;

struct BatchSpec {
    int classes = 8;    ///< classes per batch
    int per_class = 5;  ///< instances per class

    void validate() const {
        if (classes < 2)
            throw InvalidArgument("batch.classes must be >= 2");
        if (per_class < 2)
            throw InvalidArgument("batch.m must be >= 2");
    }
    int size() const noexcept { return classes * per_class; }
};

class InsufficientClassPopulation : public std::runtime_error {
public:
    InsufficientClassPopulation(std::size_t eligible, int wanted)
        : std::runtime_error("only " + std::to_string(eligible) + " classes have enough samples, " +
                             std::to_string(wanted) + " needed per batch") {}
};

/// Picks `spec.classes` distinct classes among those with at least
/// `spec.per_class` members, then `spec.per_class` members of each, all
/// without replacement. Indices come back grouped by class.
inline IndexVector batch_sample(const Labels& y, const BatchSpec& spec, Rng& rng) {
    spec.validate();
    std::map<int, IndexVector> by_class;
    for (std::size_t i = 0; i < y.size(); ++i)
        by_class[y[i]].push_back(static_cast<Eigen::Index>(i));
    std::vector<const IndexVector*> eligible;
    for (const auto& [label, members] : by_class)
        if (members.size() >= static_cast<std::size_t>(spec.per_class))
            eligible.push_back(&members);
    if (eligible.size() < static_cast<std::size_t>(spec.classes))
        throw InsufficientClassPopulation(eligible.size(), spec.classes);

    std::shuffle(eligible.begin(), eligible.end(), rng);
    IndexVector batch;
    batch.reserve(static_cast<std::size_t>(spec.size()));
    for (int c = 0; c < spec.classes; ++c) {
        IndexVector members = *eligible[static_cast<std::size_t>(c)];
        std::shuffle(members.begin(), members.end(), rng);
        batch.insert(batch.end(), members.begin(), members.begin() + spec.per_class);
    }
    return batch;
}

// ---------------------------------------------------------------------------
// Model

/// f(x) = normalize(W x); W is l x d.
struct ModelParams {
    Matrix w;
};

/// Entries uniform in [-1, 1) scaled by 1/sqrt(d).
inline ModelParams init_params(Eigen::Index embedding_dim, Eigen::Index input_dim, Rng& rng) {
    if (embedding_dim < 2 || input_dim < 1)
        throw InvalidArgument("model needs l >= 2 and d >= 1");
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
    ModelParams p{Matrix(embedding_dim, input_dim)};
    for (Eigen::Index r = 0; r < p.w.rows(); ++r)
        for (Eigen::Index c = 0; c < p.w.cols(); ++c)
            p.w(r, c) = scale * unif(rng);
    return p;
}

struct ForwardCache {
    Matrix z;            ///< pre-normalization outputs, m x l
    Vector norms;        ///< ||z_i||
    EmbeddingMatrix e;   ///< z_i / ||z_i||
};

inline ForwardCache forward(const Matrix& w, const FeatureMatrix& x) {
    if (w.cols() != x.cols())
        throw InvalidArgument("feature dim does not match model input dim");
    ForwardCache cache;
    cache.z = x * w.transpose();
    cache.norms = cache.z.rowwise().norm();
    cache.e = l2_normalize(cache.z);
    return cache;
}

inline EmbeddingMatrix embed(const ModelParams& params, const FeatureMatrix& x) {
    return forward(params.w, x).e;
}

/// dL/dZ from dL/dE through e_i = z_i / ||z_i||: the radial component of
/// each row is projected out.
inline Matrix normalize_backward(const Matrix& grad_e, const ForwardCache& cache) {
    Matrix grad_z(grad_e.rows(), grad_e.cols());
    for (Eigen::Index i = 0; i < grad_e.rows(); ++i) {
        const auto e = cache.e.row(i);
        const auto g = grad_e.row(i);
        grad_z.row(i) = (g - g.dot(e) * e) / cache.norms(i);
    }
    return grad_z;
}

/// Backpropagates dL/dS through S = E E^T, row normalization and Z = X W^T.
/// The loss emits one entry per ordered pair, so both (i, j) and (j, i)
/// reach S_ij.
inline Matrix backward(const GradMatrix& grad_s, const ForwardCache& cache, const FeatureMatrix& x) {
    const Matrix grad_e = (grad_s + grad_s.transpose()) * cache.e;
    return normalize_backward(grad_e, cache).transpose() * x;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamSettings {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Matrix m;
    Matrix v;
    std::int64_t t = 0;
    AdamSettings settings;

    static AdamState fresh(const Matrix& like, AdamSettings settings = {}) {
        return {Matrix::Zero(like.rows(), like.cols()), Matrix::Zero(like.rows(), like.cols()), 0,
                settings};
    }
};

inline void adam_step(AdamState& state, ModelParams& params, const Matrix& grad) {
    if (grad.rows() != params.w.rows() || grad.cols() != params.w.cols() ||
        state.m.rows() != grad.rows() || state.m.cols() != grad.cols())
        throw InvalidArgument("adam: shape mismatch");
    const auto& s = state.settings;
    ++state.t;
    state.m = s.beta1 * state.m + (1.0 - s.beta1) * grad;
    state.v = s.beta2 * state.v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.t));
    params.w.array() -=
        s.lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + s.eps);
}

// ---------------------------------------------------------------------------
// Loss through the model

struct BatchLoss {
    double value = 0.0;  ///< loss value, or the surrogate value for weight-only methods
    Matrix grad_w;
    bool degenerate = false;
};

/// Loss and dL/dW for one batch. Methods without a scalar loss report the
/// surrogate sum_ij g_ij S_ij with their gradient frozen.
inline BatchLoss batch_loss(const PairLoss& loss, const ModelParams& params, const FeatureMatrix& x,
                            const Labels& y, const HyperParams& hp) {
    const ForwardCache cache = forward(params.w, x);
    const SimilarityMatrix s = similarity_matrix(cache.e);
    LossOutput out = loss.evaluate(s, y, hp);
    BatchLoss result;
    result.value = loss.has_value() ? out.value : surrogate_F(s, y, out.grad);
    result.degenerate = out.degenerate;
    result.grad_w = backward(out.grad, cache, x);
    return result;
}

/// Loss value as a function of W, for finite-difference checks.
inline double loss_at_params(const PairLoss& loss, const Matrix& w, const FeatureMatrix& x,
                             const Labels& y, const HyperParams& hp) {
    const EmbeddingMatrix e = forward(w, x).e;
    return loss.value(similarity_matrix(e), y, hp);
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainConfig {
    Method method = Method::ms;
    HyperParams hp;
    BatchSpec batch;
    // lr and l are calibrated on the desk-scale synthetic set; larger steps
    // overfit the 25-per-class train split within a few dozen epochs.
    int embedding_dim = 32;
    AdamSettings adam{1e-4};
    int epochs = 200;
    int iters_per_epoch = 0;  ///< 0: train-split size / batch size, at least 1
    std::uint64_t seed = 7;
    std::vector<int> ks{1, 2, 4, 8};
};

struct EpochRecord {
    double loss_mean = 0.0;
    double recall_at_1 = 0.0;
    double wall_seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
};

struct TrainResult {
    ModelParams params;
    TrainHistory history;
    RecallReport initial;  ///< held-out recall of the untrained projection
    RecallReport final;
};

/// Held-out split used for evaluation.
struct EvalSplit {
    FeatureMatrix queries;
    Labels query_labels;
    /// Empty for single-set retrieval.
    FeatureMatrix gallery;
    Labels gallery_labels;

    bool two_set() const noexcept { return gallery.rows() > 0; }
};

inline RecallReport evaluate(const ModelParams& params, const EvalSplit& split,
                             const std::vector<int>& ks) {
    if (split.two_set())
        return recall_at_k(embed(params, split.queries), split.query_labels,
                           embed(params, split.gallery), split.gallery_labels, ks);
    return recall_at_k(embed(params, split.queries), split.query_labels, ks);
}

inline TrainResult train(const TrainConfig& config, const FeatureMatrix& train_x,
                         const Labels& train_y, const EvalSplit& held_out) {
    config.hp.validate();
    config.batch.validate();
    if (config.epochs < 0)
        throw InvalidArgument("epochs must be >= 0");
    if (static_cast<std::size_t>(train_x.rows()) != train_y.size())
        throw InvalidArgument("train labels do not match features");

    Rng rng(config.seed);
    TrainResult result;
    result.params = init_params(config.embedding_dim, train_x.cols(), rng);
    result.initial = evaluate(result.params, held_out, config.ks);

    const MethodLoss loss(config.method);
    AdamState adam = AdamState::fresh(result.params.w, config.adam);
    const int iters = config.iters_per_epoch > 0
                          ? config.iters_per_epoch
                          : std::max<int>(1, static_cast<int>(train_x.rows()) / config.batch.size());

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        double total = 0.0;
        for (int it = 0; it < iters; ++it) {
            const IndexVector batch = batch_sample(train_y, config.batch, rng);
            const FeatureMatrix bx = select_rows(train_x, batch);
            const Labels by = select_labels(train_y, batch);
            const BatchLoss step = batch_loss(loss, result.params, bx, by, config.hp);
            total += step.value;
            adam_step(adam, result.params, step.grad_w);
        }
        EpochRecord record;
        record.loss_mean = total / iters;
        record.recall_at_1 = evaluate(result.params, held_out, {1}).recall.front();
        record.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.history.epochs.push_back(record);
    }
    result.final = evaluate(result.params, held_out, config.ks);
    return result;
}

/// Trains on the dataset's train split and evaluates on its test split
/// (single-set retrieval).
inline TrainResult train(const TrainConfig& config, const Dataset& data) {
    if (!data.has_split())
        throw InvalidArgument("dataset has no train/test split");
    EvalSplit split{select_rows(data.x, data.test), select_labels(data.y, data.test), {}, {}};
    return train(config, select_rows(data.x, data.train), select_labels(data.y, data.train), split);
}

}  // namespace msloss
