#pragma once

// General pair weighting: every pair-based loss is seen through its gradient
// with respect to the similarity matrix, and |dL/dS_ij| is the weight of pair
// (i, j).

#include "msloss/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace msloss {

struct LossOutput {
    double value = 0.0;
    GradMatrix grad;
    /// Set when no anchor contributed anything (empty mined sets everywhere).
    bool degenerate = false;
};

class SignViolation : public std::runtime_error {
public:
    SignViolation(Eigen::Index i, Eigen::Index j, double grad)
        : std::runtime_error("gradient sign violation at (" + std::to_string(i) + ", " +
                             std::to_string(j) + "): " + std::to_string(grad)),
          i_(i), j_(j) {}
    Eigen::Index row() const noexcept { return i_; }
    Eigen::Index col() const noexcept { return j_; }

private:
    Eigen::Index i_, j_;
};

class NotDifferentiable : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A loss over (S, y). Implementations emit one gradient entry per ordered
/// pair and leave the diagonal at zero.
class PairLoss {
public:
    virtual ~PairLoss() = default;

    virtual std::string name() const = 0;

    /// False for methods defined only through their pair weights.
    virtual bool has_value() const { return true; }

    virtual LossOutput evaluate(const SimilarityMatrix& s, const Labels& y,
                                const HyperParams& hp) const = 0;

    double value(const SimilarityMatrix& s, const Labels& y, const HyperParams& hp) const {
        if (!has_value())
            throw NotDifferentiable(name() + " has no scalar loss value");
        return evaluate(s, y, hp).value;
    }

    GradMatrix grad(const SimilarityMatrix& s, const Labels& y, const HyperParams& hp) const {
        return evaluate(s, y, hp).grad;
    }

    /// Distance from S to the nearest kink of the objective (hinge argument or
    /// mining threshold). Infinite for smooth losses.
    virtual double kink_distance(const SimilarityMatrix&, const Labels&,
                                 const HyperParams&) const {
        return std::numeric_limits<double>::infinity();
    }
};

inline constexpr double kSignTolerance = 1e-9;

/// Checks the sign convention (positive pairs <= 0, negative pairs >= 0).
inline void check_gradient_signs(const GradMatrix& grad, const Labels& y) {
    for (Eigen::Index i = 0; i < grad.rows(); ++i) {
        for (Eigen::Index j = 0; j < grad.cols(); ++j) {
            if (i == j)
                continue;
            const double g = grad(i, j);
            const bool positive = y[i] == y[j];
            if ((positive && g > kSignTolerance) || (!positive && g < -kSignTolerance))
                throw SignViolation(i, j, g);
        }
    }
}

inline WeightMatrix weights_from_gradient(const GradMatrix& grad, const Labels& y) {
    check_gradient_signs(grad, y);
    return grad.cwiseAbs();
}

inline WeightMatrix weights_from_gradient(const PairLoss& loss, const SimilarityMatrix& s,
                                          const Labels& y, const HyperParams& hp) {
    return weights_from_gradient(loss.grad(s, y, hp), y);
}

enum class Perturbation {
    /// Moves S_ij and S_ji together and halves the difference quotient, which
    /// keeps S symmetric and estimates (g_ij + g_ji) / 2.
    symmetric,
    /// Moves S_ij alone and estimates g_ij directly.
    ordered,
};

/// Central-difference estimate of dL/dS.
inline GradMatrix fd_gradient(const PairLoss& loss, const SimilarityMatrix& s, const Labels& y,
                              const HyperParams& hp, double h,
                              Perturbation mode = Perturbation::symmetric) {
    if (!(h > 0.0))
        throw InvalidArgument("finite-difference step must be > 0");
    const Eigen::Index m = s.rows();
    GradMatrix out = GradMatrix::Zero(m, m);
    SimilarityMatrix work = s;
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            if (i == j)
                continue;
            if (mode == Perturbation::symmetric) {
                if (j < i)
                    continue;
                work(i, j) = s(i, j) + h;
                work(j, i) = s(j, i) + h;
                const double plus = loss.value(work, y, hp);
                work(i, j) = s(i, j) - h;
                work(j, i) = s(j, i) - h;
                const double minus = loss.value(work, y, hp);
                work(i, j) = s(i, j);
                work(j, i) = s(j, i);
                const double d = 0.5 * (plus - minus) / (2.0 * h);
                out(i, j) = d;
                out(j, i) = d;
            } else {
                work(i, j) = s(i, j) + h;
                const double plus = loss.value(work, y, hp);
                work(i, j) = s(i, j) - h;
                const double minus = loss.value(work, y, hp);
                work(i, j) = s(i, j);
                out(i, j) = (plus - minus) / (2.0 * h);
            }
        }
    }
    return out;
}

/// Symmetric part of an ordered-pair gradient; what the symmetric oracle sees.
inline GradMatrix symmetrized(const GradMatrix& g) {
    return (0.5 * (g + g.transpose())).eval();
}

/// F(S) = sum_ij g_ij S_ij with g frozen, so dF/dS = g.
inline double surrogate_F(const SimilarityMatrix& s, const Labels& /*y*/,
                          const GradMatrix& frozen_grad) {
    return frozen_grad.cwiseProduct(s).sum();
}

/// The surrogate as a PairLoss: a linear functional in S with a fixed gradient.
class FrozenSurrogate final : public PairLoss {
public:
    explicit FrozenSurrogate(GradMatrix frozen_grad) : frozen_(std::move(frozen_grad)) {}

    std::string name() const override { return "surrogate"; }

    LossOutput evaluate(const SimilarityMatrix& s, const Labels& y,
                        const HyperParams&) const override {
        return {surrogate_F(s, y, frozen_), frozen_, false};
    }

private:
    GradMatrix frozen_;
};

/// |a - b| relative to the larger magnitude; differences below `floor` count as
/// exact agreement.
inline double relative_error(double a, double b, double floor = 1e-8) {
    const double diff = std::abs(a - b);
    if (diff <= floor)
        return 0.0;
    return diff / std::max(std::abs(a), std::abs(b));
}

inline double max_relative_error(const Matrix& a, const Matrix& b, double floor = 1e-8) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            worst = std::max(worst, relative_error(a(i, j), b(i, j), floor));
    return worst;
}

}  // namespace msloss
