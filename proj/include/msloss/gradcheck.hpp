#pragma once

// Finite-difference verification harness: random boundary-avoiding batches,
// loss-level checks against fd_gradient, and end-to-end checks of dL/dW.

#include "msloss/core.hpp"
#include "msloss/gpw.hpp"
#include "msloss/losses.hpp"
#include "msloss/trainer.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>
#include <vector>

namespace msloss {

struct Instance {
    SimilarityMatrix s;
    Labels y;
};

/// m labels over 2..max(2, m/2) classes with at least one positive pair.
inline Labels random_labels(int m, Rng& rng) {
    if (m < 3)
        throw InvalidArgument("random_labels needs m >= 3");
    std::uniform_int_distribution<int> num_classes(2, std::max(2, m / 2));
    while (true) {
        const int c = num_classes(rng);
        std::uniform_int_distribution<int> pick(0, c - 1);
        Labels y(static_cast<std::size_t>(m));
        for (auto& v : y)
            v = pick(rng);
        Labels sorted = y;
        std::sort(sorted.begin(), sorted.end());
        const bool has_pair = std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
        const bool has_two_classes = sorted.front() != sorted.back();
        if (has_pair && has_two_classes)
            return y;
    }
}

inline FeatureMatrix random_gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    FeatureMatrix x(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            x(r, c) = normal(rng);
    return x;
}

/// Cosine similarities of m random directions in R^dim.
inline SimilarityMatrix random_similarity(int m, int dim, Rng& rng) {
    return similarity_matrix(l2_normalize(random_gaussian(m, dim, rng)));
}

class SamplingFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Draws (S, y) until the loss is defined there and every kink is farther
/// than `min_kink` away.
inline Instance sample_instance(const PairLoss& loss, const HyperParams& hp, int m, double min_kink,
                                Rng& rng, int max_tries = 10000) {
    std::uniform_int_distribution<int> dim(2, 4);
    for (int attempt = 0; attempt < max_tries; ++attempt) {
        Instance inst{random_similarity(m, dim(rng), rng), random_labels(m, rng)};
        try {
            (void)loss.evaluate(inst.s, inst.y, hp);
        } catch (const std::runtime_error&) {
            continue;
        }
        if (loss.kink_distance(inst.s, inst.y, hp) > min_kink)
            return inst;
    }
    throw SamplingFailed("no boundary-avoiding instance for " + loss.name());
}

/// Worst entrywise disagreement between an analytic and a numeric gradient:
/// relative (differences under the floor count as agreement) and raw absolute.
struct GradientDiscrepancy {
    double relative = 0.0;
    double absolute = 0.0;

    void merge(const GradientDiscrepancy& o) {
        relative = std::max(relative, o.relative);
        absolute = std::max(absolute, o.absolute);
    }
};

inline GradientDiscrepancy discrepancy(const Matrix& analytic, const Matrix& numeric, double floor) {
    return {max_relative_error(analytic, numeric, floor), (analytic - numeric).cwiseAbs().maxCoeff()};
}

/// Against both oracle modes: the symmetric perturbation versus the
/// symmetrized gradient, and the ordered perturbation versus the raw
/// per-pair gradient.
inline GradientDiscrepancy loss_gradient_discrepancy(const PairLoss& loss, const Instance& inst,
                                                     const HyperParams& hp, double h, double floor = 1e-8) {
    const GradMatrix analytic = loss.grad(inst.s, inst.y, hp);
    const GradMatrix sym = fd_gradient(loss, inst.s, inst.y, hp, h, Perturbation::symmetric);
    const GradMatrix ord = fd_gradient(loss, inst.s, inst.y, hp, h, Perturbation::ordered);
    GradientDiscrepancy d = discrepancy(symmetrized(analytic), sym, floor);
    d.merge(discrepancy(analytic, ord, floor));
    return d;
}

inline double loss_gradient_error(const PairLoss& loss, const Instance& inst, const HyperParams& hp,
                                  double h, double floor = 1e-8) {
    return loss_gradient_discrepancy(loss, inst, hp, h, floor).relative;
}

struct ParamInstance {
    Matrix w;
    FeatureMatrix x;
    Labels y;
};

/// Random (W, X, y) with m in [6, 10], d in [2, 6], l in [2, 4] whose
/// similarity matrix keeps clear of every kink.
inline ParamInstance sample_param_instance(const PairLoss& loss, const HyperParams& hp,
                                           double min_kink, Rng& rng, int max_tries = 10000) {
    std::uniform_int_distribution<int> pick_m(6, 10), pick_d(2, 6), pick_l(2, 4);
    for (int attempt = 0; attempt < max_tries; ++attempt) {
        const int m = pick_m(rng);
        const int d = pick_d(rng);
        const int l = pick_l(rng);
        ParamInstance inst{random_gaussian(l, d, rng), random_gaussian(m, d, rng), random_labels(m, rng)};
        try {
            const SimilarityMatrix s = similarity_matrix(forward(inst.w, inst.x).e);
            (void)loss.evaluate(s, inst.y, hp);
            if (loss.kink_distance(s, inst.y, hp) > min_kink)
                return inst;
        } catch (const std::runtime_error&) {
        }
    }
    throw SamplingFailed("no boundary-avoiding parameter instance for " + loss.name());
}

/// dL/dW from backward() against central differences over the entries of W.
inline GradientDiscrepancy param_gradient_discrepancy(const PairLoss& loss, const ParamInstance& inst,
                                                      const HyperParams& hp, double h,
                                                      double floor = 1e-8) {
    const BatchLoss analytic = batch_loss(loss, ModelParams{inst.w}, inst.x, inst.y, hp);
    Matrix numeric(inst.w.rows(), inst.w.cols());
    Matrix w = inst.w;
    for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
            w(r, c) = inst.w(r, c) + h;
            const double plus = loss_at_params(loss, w, inst.x, inst.y, hp);
            w(r, c) = inst.w(r, c) - h;
            const double minus = loss_at_params(loss, w, inst.x, inst.y, hp);
            w(r, c) = inst.w(r, c);
            numeric(r, c) = (plus - minus) / (2.0 * h);
        }
    return discrepancy(analytic.grad_w, numeric, floor);
}

inline double param_gradient_error(const PairLoss& loss, const ParamInstance& inst,
                                   const HyperParams& hp, double h, double floor = 1e-8) {
    return param_gradient_discrepancy(loss, inst, hp, h, floor).relative;
}

/// Wraps a loss and perturbs its analytic gradient. Used to confirm that the
/// harness notices a wrong gradient.
class CorruptedLoss final : public PairLoss {
public:
    explicit CorruptedLoss(const PairLoss& inner) : inner_(inner) {}

    std::string name() const override { return inner_.name(); }
    bool has_value() const override { return inner_.has_value(); }

    LossOutput evaluate(const SimilarityMatrix& s, const Labels& y,
                        const HyperParams& hp) const override {
        LossOutput out = inner_.evaluate(s, y, hp);
        out.grad *= 1.01;
        if (out.grad.rows() > 1)
            out.grad(0, 1) += 1e-3;
        return out;
    }

    double kink_distance(const SimilarityMatrix& s, const Labels& y,
                         const HyperParams& hp) const override {
        return inner_.kink_distance(s, y, hp);
    }

private:
    const PairLoss& inner_;
};

}  // namespace msloss
