#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace msloss {

/// Dense real matrix used for features, embeddings, similarities and gradients.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Per-sample class ids. Values are arbitrary ints; only equality matters.
using Labels = std::vector<int>;

/// Row-major semantics: row i is sample i.
using FeatureMatrix = Matrix;
/// Rows are unit-norm embeddings.
using EmbeddingMatrix = Matrix;
/// S(i, j) = <e_i, e_j>.
using SimilarityMatrix = Matrix;
/// Entry (i, j) = dL/dS_ij, one entry per ordered pair.
using GradMatrix = Matrix;
/// Entry (i, j) = |dL/dS_ij|.
using WeightMatrix = Matrix;

inline constexpr double kZeroNormTolerance = 1e-12;

class ZeroNormRow : public std::runtime_error {
public:
    explicit ZeroNormRow(std::ptrdiff_t row)
        : std::runtime_error("zero-norm row " + std::to_string(row)), row_(row) {}
    std::ptrdiff_t row() const noexcept { return row_; }

private:
    std::ptrdiff_t row_;
};

class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Shared hyperparameter record. Defaults follow the standard MS setup
/// (alpha=2, beta=50, lambda=1, epsilon=0.1); `margin` drives the hinge losses
/// (contrastive, triplet, lifted).
struct HyperParams {
    double alpha = 2.0;
    double beta = 50.0;
    double lambda = 1.0;
    double epsilon = 0.1;
    double margin = 0.5;

    void validate() const {
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw InvalidArgument("alpha must be > 0");
        if (!(beta > 0.0) || !std::isfinite(beta))
            throw InvalidArgument("beta must be > 0");
        if (!std::isfinite(lambda))
            throw InvalidArgument("lambda must be finite");
        if (!(epsilon >= 0.0))
            throw InvalidArgument("epsilon must be >= 0");
        if (!std::isfinite(margin))
            throw InvalidArgument("margin must be finite");
    }
};

struct PairMasks {
    BoolMatrix positive;  ///< y_i == y_j, i != j
    BoolMatrix negative;  ///< y_i != y_j
};

/// Divides every row by its L2 norm.
inline EmbeddingMatrix l2_normalize(const FeatureMatrix& features) {
    EmbeddingMatrix out(features.rows(), features.cols());
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const double norm = features.row(i).norm();
        if (!(norm > kZeroNormTolerance))
            throw ZeroNormRow(i);
        out.row(i) = features.row(i) / norm;
    }
    return out;
}

inline SimilarityMatrix similarity_matrix(const EmbeddingMatrix& embeddings) {
    SimilarityMatrix s = embeddings * embeddings.transpose();
    // The product is symmetric only up to rounding; enforce it exactly.
    return (0.5 * (s + s.transpose())).eval();
}

inline PairMasks pair_masks(const Labels& labels) {
    const auto m = static_cast<Eigen::Index>(labels.size());
    PairMasks masks{BoolMatrix::Constant(m, m, false), BoolMatrix::Constant(m, m, false)};
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            if (i == j)
                continue;
            if (labels[i] == labels[j])
                masks.positive(i, j) = true;
            else
                masks.negative(i, j) = true;
        }
    }
    return masks;
}

/// Throws unless S is square and matches the label count.
inline void check_batch(const SimilarityMatrix& s, const Labels& labels) {
    if (s.rows() != s.cols())
        throw InvalidArgument("similarity matrix must be square");
    if (static_cast<std::size_t>(s.rows()) != labels.size())
        throw InvalidArgument("label count does not match similarity matrix");
    if (labels.size() < 2)
        throw InvalidArgument("need at least two samples");
    if (!s.allFinite())
        throw InvalidArgument("similarity matrix has non-finite entries");
}

}  // namespace msloss
