#pragma once

// Pair-based losses over a similarity matrix: contrastive, triplet, lifted
// structure, binomial deviance, the softened lifted structure, and the
// multi-similarity (MS) loss with its mining and weighting steps.
//
// Conventions shared by every loss here:
//  * gradients are emitted per ordered pair (i, j); row i is anchor i
//  * the diagonal is never read and its gradient is zero
//  * anchor-averaged losses carry a 1/m factor on value and gradient
//  * mined sets are recomputed on every call and are constants for the
//    gradient

#include "msloss/core.hpp"
#include "msloss/gpw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace msloss {

using Index = Eigen::Index;
using IndexList = std::vector<Index>;

class NoValidTriplets : public std::runtime_error {
public:
    NoValidTriplets() : std::runtime_error("no (anchor, positive, negative) triplet in batch") {}
};

class AnchorWithoutPartners : public std::runtime_error {
public:
    explicit AnchorWithoutPartners(Index anchor)
        : std::runtime_error("anchor " + std::to_string(anchor) +
                             " has no positive or no negative partner, and neither does any other anchor"),
          anchor_(anchor) {}
    Index anchor() const noexcept { return anchor_; }

private:
    Index anchor_;
};

/// Per-anchor partner sets. Produced either by MS mining or as the full
/// candidate sets of a batch.
struct MinedSets {
    std::vector<IndexList> positives;
    std::vector<IndexList> negatives;

    std::size_t size() const noexcept { return positives.size(); }
    bool empty_everywhere() const noexcept {
        for (std::size_t i = 0; i < positives.size(); ++i)
            if (!positives[i].empty() || !negatives[i].empty())
                return false;
        return true;
    }
};

/// Per-anchor counts of positive and negative partners.
struct BinomialCounts {
    std::vector<Index> positives;
    std::vector<Index> negatives;
};

namespace detail {

inline double log_sum_exp(std::span<const double> xs) {
    if (xs.empty())
        return -std::numeric_limits<double>::infinity();
    const double top = *std::max_element(xs.begin(), xs.end());
    double acc = 0.0;
    for (double x : xs)
        acc += std::exp(x - top);
    return top + std::log(acc);
}

inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double anchor_scale(Index m) { return 1.0 / static_cast<double>(m); }

}  // namespace detail

inline MinedSets candidate_sets(const Labels& y) {
    const auto m = static_cast<Index>(y.size());
    MinedSets sets{std::vector<IndexList>(m), std::vector<IndexList>(m)};
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j) {
            if (i == j)
                continue;
            (y[i] == y[j] ? sets.positives[i] : sets.negatives[i]).push_back(j);
        }
    return sets;
}

inline BinomialCounts binomial_counts(const Labels& y) {
    const MinedSets c = candidate_sets(y);
    BinomialCounts counts;
    for (std::size_t i = 0; i < c.size(); ++i) {
        counts.positives.push_back(static_cast<Index>(c.positives[i].size()));
        counts.negatives.push_back(static_cast<Index>(c.negatives[i].size()));
    }
    return counts;
}

// ---------------------------------------------------------------------------
// Mining

/// MS pair mining. A negative is kept when it is more similar than the
/// hardest positive minus epsilon; a positive is kept when it is less similar
/// than the hardest negative plus epsilon. Thresholds are taken over all
/// candidates of the anchor. Anchors lacking either candidate group get empty
/// sets.
inline MinedSets ms_mine(const SimilarityMatrix& s, const Labels& y, double epsilon) {
    if (!(epsilon >= 0.0))
        throw InvalidArgument("epsilon must be >= 0");
    const MinedSets c = candidate_sets(y);
    const auto m = static_cast<Index>(y.size());
    MinedSets mined{std::vector<IndexList>(m), std::vector<IndexList>(m)};
    for (Index i = 0; i < m; ++i) {
        if (c.positives[i].empty() || c.negatives[i].empty())
            continue;
        double min_pos = std::numeric_limits<double>::infinity();
        for (Index k : c.positives[i])
            min_pos = std::min(min_pos, s(i, k));
        double max_neg = -std::numeric_limits<double>::infinity();
        for (Index k : c.negatives[i])
            max_neg = std::max(max_neg, s(i, k));
        for (Index j : c.negatives[i])
            if (s(i, j) > min_pos - epsilon)
                mined.negatives[i].push_back(j);
        for (Index j : c.positives[i])
            if (s(i, j) < max_neg + epsilon)
                mined.positives[i].push_back(j);
    }
    return mined;
}

/// Distance of S from any mining threshold crossing.
inline double mining_kink_distance(const SimilarityMatrix& s, const Labels& y, double epsilon) {
    const MinedSets c = candidate_sets(y);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t ii = 0; ii < c.size(); ++ii) {
        const auto i = static_cast<Index>(ii);
        if (c.positives[ii].empty() || c.negatives[ii].empty())
            continue;
        double min_pos = std::numeric_limits<double>::infinity();
        for (Index k : c.positives[ii])
            min_pos = std::min(min_pos, s(i, k));
        double max_neg = -std::numeric_limits<double>::infinity();
        for (Index k : c.negatives[ii])
            max_neg = std::max(max_neg, s(i, k));
        for (Index j : c.negatives[ii])
            best = std::min(best, std::abs(s(i, j) - (min_pos - epsilon)));
        for (Index j : c.positives[ii])
            best = std::min(best, std::abs(s(i, j) - (max_neg + epsilon)));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Closed-form pair weights (pair level, without the 1/m anchor factor). These
// are written in the printed algebraic forms and serve as the second route
// against the differentiated losses.

/// Lifted-structure weights: relative-similarity softmax within each group of
/// an anchor whose hinge is active; zero elsewhere.
inline WeightMatrix lifted_weights(const SimilarityMatrix& s, const Labels& y, double margin) {
    const MinedSets c = candidate_sets(y);
    const Index m = s.rows();
    WeightMatrix w = WeightMatrix::Zero(m, m);
    for (Index i = 0; i < m; ++i) {
        const auto& pos = c.positives[i];
        const auto& neg = c.negatives[i];
        if (pos.empty() || neg.empty())
            continue;
        double pos_sum = 0.0, neg_sum = 0.0;
        for (Index k : pos)
            pos_sum += std::exp(margin - s(i, k));
        for (Index k : neg)
            neg_sum += std::exp(s(i, k));
        if (std::log(pos_sum) + std::log(neg_sum) <= 0.0)
            continue;
        for (Index j : pos) {
            double denom = 0.0;
            for (Index k : pos)
                denom += std::exp(s(i, j) - s(i, k));
            w(i, j) = 1.0 / denom;
        }
        for (Index j : neg) {
            double denom = 0.0;
            for (Index k : neg)
                denom += std::exp(s(i, k) - s(i, j));
            w(i, j) = 1.0 / denom;
        }
    }
    return w;
}

/// Binomial-deviance weights, including the per-anchor 1/P_i and 1/N_i.
inline WeightMatrix binomial_weights(const SimilarityMatrix& s, const MinedSets& groups,
                                     const HyperParams& hp) {
    const Index m = s.rows();
    WeightMatrix w = WeightMatrix::Zero(m, m);
    for (Index i = 0; i < m; ++i) {
        const auto& pos = groups.positives[i];
        const auto& neg = groups.negatives[i];
        for (Index j : pos) {
            const double e = std::exp(hp.alpha * (hp.lambda - s(i, j)));
            w(i, j) = hp.alpha * e / (1.0 + e) / static_cast<double>(pos.size());
        }
        for (Index j : neg) {
            const double e = std::exp(hp.beta * (s(i, j) - hp.lambda));
            w(i, j) = hp.beta * e / (1.0 + e) / static_cast<double>(neg.size());
        }
    }
    return w;
}

inline WeightMatrix binomial_weights(const SimilarityMatrix& s, const Labels& y,
                                     const HyperParams& hp) {
    return binomial_weights(s, candidate_sets(y), hp);
}

/// MS weights over mined sets. The sums over k run over the whole mined set,
/// k = j included.
inline WeightMatrix ms_weights(const SimilarityMatrix& s, const MinedSets& mined,
                               double alpha, double beta, double lambda) {
    const Index m = s.rows();
    WeightMatrix w = WeightMatrix::Zero(m, m);
    for (Index i = 0; i < m; ++i) {
        for (Index j : mined.negatives[i]) {
            double denom = std::exp(beta * (lambda - s(i, j)));
            for (Index k : mined.negatives[i])
                denom += std::exp(beta * (s(i, k) - s(i, j)));
            w(i, j) = 1.0 / denom;
        }
        for (Index j : mined.positives[i]) {
            double denom = std::exp(-alpha * (lambda - s(i, j)));
            for (Index k : mined.positives[i])
                denom += std::exp(-alpha * (s(i, k) - s(i, j)));
            w(i, j) = 1.0 / denom;
        }
    }
    return w;
}

/// Softmax weights of the softened lifted structure over the given groups.
/// Anchors lacking either group get zero weight.
inline WeightMatrix lifted_star_weights(const SimilarityMatrix& s, const MinedSets& groups,
                                        double alpha, double beta) {
    const Index m = s.rows();
    WeightMatrix w = WeightMatrix::Zero(m, m);
    std::vector<double> buf;
    for (Index i = 0; i < m; ++i) {
        const auto& pos = groups.positives[i];
        const auto& neg = groups.negatives[i];
        if (pos.empty() || neg.empty())
            continue;
        buf.clear();
        for (Index k : pos)
            buf.push_back(-alpha * s(i, k));
        const double lse_pos = detail::log_sum_exp(buf);
        for (Index j : pos)
            w(i, j) = std::exp(-alpha * s(i, j) - lse_pos);
        buf.clear();
        for (Index k : neg)
            buf.push_back(beta * s(i, k));
        const double lse_neg = detail::log_sum_exp(buf);
        for (Index j : neg)
            w(i, j) = std::exp(beta * s(i, j) - lse_neg);
    }
    return w;
}

// ---------------------------------------------------------------------------
// Losses

/// Hinge on negatives above the margin, linear attraction on positives,
/// averaged over the m(m-1) ordered pairs.
inline LossOutput contrastive_loss(const SimilarityMatrix& s, const Labels& y, double margin) {
    check_batch(s, y);
    const Index m = s.rows();
    const double scale = 1.0 / static_cast<double>(m * (m - 1));
    LossOutput out{0.0, GradMatrix::Zero(m, m), false};
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j) {
            if (i == j)
                continue;
            if (y[i] == y[j]) {
                out.value -= s(i, j);
                out.grad(i, j) = -scale;
            } else if (s(i, j) > margin) {
                out.value += s(i, j) - margin;
                out.grad(i, j) = scale;
            }
        }
    out.value *= scale;
    return out;
}

/// Number of ordered triplets (a, p, n) in the batch.
inline std::size_t triplet_count(const Labels& y) {
    const MinedSets c = candidate_sets(y);
    std::size_t total = 0;
    for (std::size_t a = 0; a < c.size(); ++a)
        total += c.positives[a].size() * c.negatives[a].size();
    return total;
}

/// Mean hinge over every enumerable triplet. A pair shared by several
/// violating triplets accumulates one unit of gradient per triplet.
inline LossOutput triplet_loss(const SimilarityMatrix& s, const Labels& y, double margin) {
    check_batch(s, y);
    const MinedSets c = candidate_sets(y);
    const Index m = s.rows();
    const std::size_t count = triplet_count(y);
    if (count == 0)
        throw NoValidTriplets();
    const double scale = 1.0 / static_cast<double>(count);
    LossOutput out{0.0, GradMatrix::Zero(m, m), false};
    for (Index a = 0; a < m; ++a)
        for (Index p : c.positives[a])
            for (Index n : c.negatives[a]) {
                const double violation = s(a, n) - s(a, p) + margin;
                if (violation <= 0.0)
                    continue;
                out.value += violation;
                out.grad(a, n) += scale;
                out.grad(a, p) -= scale;
            }
    out.value *= scale;
    return out;
}

/// Lifted structure with a per-anchor hinge on the sum of the positive and
/// negative log-sum-exp terms.
inline LossOutput lifted_loss(const SimilarityMatrix& s, const Labels& y, double margin) {
    check_batch(s, y);
    const MinedSets c = candidate_sets(y);
    const Index m = s.rows();
    const double scale = detail::anchor_scale(m);
    LossOutput out{0.0, GradMatrix::Zero(m, m), false};
    bool any = false;
    std::vector<double> pos_terms, neg_terms;
    for (Index i = 0; i < m; ++i) {
        const auto& pos = c.positives[i];
        const auto& neg = c.negatives[i];
        if (pos.empty() || neg.empty())
            continue;
        any = true;
        pos_terms.clear();
        neg_terms.clear();
        for (Index k : pos)
            pos_terms.push_back(margin - s(i, k));
        for (Index k : neg)
            neg_terms.push_back(s(i, k));
        const double lse_pos = detail::log_sum_exp(pos_terms);
        const double lse_neg = detail::log_sum_exp(neg_terms);
        const double hinge = lse_pos + lse_neg;
        if (hinge <= 0.0)
            continue;
        out.value += hinge;
        for (Index j : pos)
            out.grad(i, j) = -scale * std::exp(margin - s(i, j) - lse_pos);
        for (Index j : neg)
            out.grad(i, j) = scale * std::exp(s(i, j) - lse_neg);
    }
    if (!any)
        throw AnchorWithoutPartners(0);
    out.value *= scale;
    return out;
}

inline double lifted_kink_distance(const SimilarityMatrix& s, const Labels& y, double margin) {
    const MinedSets c = candidate_sets(y);
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> pos_terms, neg_terms;
    for (std::size_t ii = 0; ii < c.size(); ++ii) {
        const auto i = static_cast<Index>(ii);
        if (c.positives[ii].empty() || c.negatives[ii].empty())
            continue;
        pos_terms.clear();
        neg_terms.clear();
        for (Index k : c.positives[ii])
            pos_terms.push_back(margin - s(i, k));
        for (Index k : c.negatives[ii])
            neg_terms.push_back(s(i, k));
        best = std::min(best, std::abs(detail::log_sum_exp(pos_terms) +
                                       detail::log_sum_exp(neg_terms)));
    }
    return best;
}

/// Binomial deviance restricted to the given per-anchor groups. Empty groups
/// contribute nothing.
inline LossOutput binomial_loss_over(const SimilarityMatrix& s, const MinedSets& groups,
                                     const HyperParams& hp) {
    const Index m = s.rows();
    const double scale = detail::anchor_scale(m);
    LossOutput out{0.0, GradMatrix::Zero(m, m), groups.empty_everywhere()};
    for (Index i = 0; i < m; ++i) {
        const auto& pos = groups.positives[i];
        const auto& neg = groups.negatives[i];
        if (!pos.empty()) {
            const double inv = 1.0 / static_cast<double>(pos.size());
            for (Index j : pos) {
                const double z = hp.alpha * (hp.lambda - s(i, j));
                out.value += inv * detail::softplus(z);
                out.grad(i, j) = -scale * inv * hp.alpha * detail::sigmoid(z);
            }
        }
        if (!neg.empty()) {
            const double inv = 1.0 / static_cast<double>(neg.size());
            for (Index j : neg) {
                const double z = hp.beta * (s(i, j) - hp.lambda);
                out.value += inv * detail::softplus(z);
                out.grad(i, j) = scale * inv * hp.beta * detail::sigmoid(z);
            }
        }
    }
    out.value *= scale;
    return out;
}

inline LossOutput binomial_loss(const SimilarityMatrix& s, const Labels& y, const HyperParams& hp) {
    check_batch(s, y);
    return binomial_loss_over(s, candidate_sets(y), hp);
}

/// Softened lifted structure: separate log-sum-exp terms with temperatures
/// alpha (positives) and beta (negatives), no hinge.
inline LossOutput lifted_star_loss_over(const SimilarityMatrix& s, const MinedSets& groups,
                                        double alpha, double beta) {
    const Index m = s.rows();
    const double scale = detail::anchor_scale(m);
    LossOutput out{0.0, GradMatrix::Zero(m, m), true};
    std::vector<double> buf;
    for (Index i = 0; i < m; ++i) {
        const auto& pos = groups.positives[i];
        const auto& neg = groups.negatives[i];
        if (pos.empty() || neg.empty())
            continue;
        out.degenerate = false;
        buf.clear();
        for (Index k : pos)
            buf.push_back(-alpha * s(i, k));
        const double lse_pos = detail::log_sum_exp(buf);
        buf.clear();
        for (Index k : neg)
            buf.push_back(beta * s(i, k));
        const double lse_neg = detail::log_sum_exp(buf);
        out.value += lse_pos / alpha + lse_neg / beta;
        for (Index j : pos)
            out.grad(i, j) = -scale * std::exp(-alpha * s(i, j) - lse_pos);
        for (Index j : neg)
            out.grad(i, j) = scale * std::exp(beta * s(i, j) - lse_neg);
    }
    out.value *= scale;
    return out;
}

inline LossOutput lifted_star_loss(const SimilarityMatrix& s, const Labels& y, double alpha,
                                   double beta) {
    check_batch(s, y);
    LossOutput out = lifted_star_loss_over(s, candidate_sets(y), alpha, beta);
    if (out.degenerate)
        throw AnchorWithoutPartners(0);
    return out;
}

/// MS loss over fixed mined sets.
inline LossOutput ms_loss_over(const SimilarityMatrix& s, const MinedSets& mined, double alpha,
                               double beta, double lambda) {
    const Index m = s.rows();
    const double scale = detail::anchor_scale(m);
    LossOutput out{0.0, GradMatrix::Zero(m, m), mined.empty_everywhere()};
    std::vector<double> buf;
    for (Index i = 0; i < m; ++i) {
        const auto& pos = mined.positives[i];
        const auto& neg = mined.negatives[i];
        if (!pos.empty()) {
            // log(1 + sum e^a) as a log-sum-exp with an extra zero term.
            buf.assign(1, 0.0);
            for (Index k : pos)
                buf.push_back(-alpha * (s(i, k) - lambda));
            const double lse = detail::log_sum_exp(buf);
            out.value += lse / alpha;
            for (Index j : pos)
                out.grad(i, j) = -scale * std::exp(-alpha * (s(i, j) - lambda) - lse);
        }
        if (!neg.empty()) {
            buf.assign(1, 0.0);
            for (Index k : neg)
                buf.push_back(beta * (s(i, k) - lambda));
            const double lse = detail::log_sum_exp(buf);
            out.value += lse / beta;
            for (Index j : neg)
                out.grad(i, j) = scale * std::exp(beta * (s(i, j) - lambda) - lse);
        }
    }
    out.value *= scale;
    return out;
}

inline LossOutput ms_loss(const SimilarityMatrix& s, const Labels& y, const HyperParams& hp) {
    check_batch(s, y);
    hp.validate();
    return ms_loss_over(s, ms_mine(s, y, hp.epsilon), hp.alpha, hp.beta, hp.lambda);
}

/// MS weighting without the mining step: every candidate pair is weighted.
inline LossOutput ms_weighting_loss(const SimilarityMatrix& s, const Labels& y,
                                    const HyperParams& hp) {
    check_batch(s, y);
    hp.validate();
    return ms_loss_over(s, candidate_sets(y), hp.alpha, hp.beta, hp.lambda);
}

/// MS mining with unit weights: the linear functional
/// (1/m) sum_i (sum over mined negatives S_ij - sum over mined positives S_ij).
inline LossOutput ms_mining_only_loss(const SimilarityMatrix& s, const Labels& y,
                                      double epsilon) {
    check_batch(s, y);
    const MinedSets mined = ms_mine(s, y, epsilon);
    const Index m = s.rows();
    const double scale = detail::anchor_scale(m);
    LossOutput out{0.0, GradMatrix::Zero(m, m), mined.empty_everywhere()};
    for (Index i = 0; i < m; ++i) {
        for (Index j : mined.negatives[i]) {
            out.value += s(i, j);
            out.grad(i, j) = scale;
        }
        for (Index j : mined.positives[i]) {
            out.value -= s(i, j);
            out.grad(i, j) = -scale;
        }
    }
    out.value *= scale;
    return out;
}

/// Binomial deviance applied to MS-mined pairs only.
inline LossOutput binomial_mined_loss(const SimilarityMatrix& s, const Labels& y,
                                      const HyperParams& hp) {
    check_batch(s, y);
    return binomial_loss_over(s, ms_mine(s, y, hp.epsilon), hp);
}

/// Softened lifted structure applied to MS-mined pairs only. Anchors without
/// a mined pair on both sides contribute nothing.
inline LossOutput lifted_star_mined_loss(const SimilarityMatrix& s, const Labels& y,
                                         const HyperParams& hp) {
    check_batch(s, y);
    return lifted_star_loss_over(s, ms_mine(s, y, hp.epsilon), hp.alpha, hp.beta);
}

/// Average of the binomial and softened-lifted weights, signed per pair type
/// and carrying the 1/m factor. There is no scalar loss behind it.
inline GradMatrix binlifted_grad(const SimilarityMatrix& s, const Labels& y,
                                 const HyperParams& hp) {
    check_batch(s, y);
    const MinedSets groups = candidate_sets(y);
    const WeightMatrix combined =
        0.5 * (binomial_weights(s, groups, hp) + lifted_star_weights(s, groups, hp.alpha, hp.beta));
    const Index m = s.rows();
    const double scale = detail::anchor_scale(m);
    GradMatrix g = GradMatrix::Zero(m, m);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j) {
            if (i == j)
                continue;
            g(i, j) = (y[i] == y[j] ? -scale : scale) * combined(i, j);
        }
    return g;
}

// ---------------------------------------------------------------------------
// Method registry

enum class Method {
    contrastive,
    triplet,
    lifted,
    binomial,
    lifted_star,
    binlifted,
    ms,
    ms_mining,
    ms_weighting,
    binomial_mined,
    lifted_star_mined,
};

inline constexpr Method kAllMethods[] = {
    Method::contrastive,  Method::triplet,        Method::lifted,
    Method::binomial,     Method::lifted_star,    Method::binlifted,
    Method::ms,           Method::ms_mining,      Method::ms_weighting,
    Method::binomial_mined, Method::lifted_star_mined,
};

inline std::string_view method_name(Method method) {
    switch (method) {
        case Method::contrastive: return "contrastive";
        case Method::triplet: return "triplet";
        case Method::lifted: return "lifted";
        case Method::binomial: return "binomial";
        case Method::lifted_star: return "lifted_star";
        case Method::binlifted: return "binlifted";
        case Method::ms: return "ms";
        case Method::ms_mining: return "ms_mining";
        case Method::ms_weighting: return "ms_weighting";
        case Method::binomial_mined: return "binomial_m";
        case Method::lifted_star_mined: return "lifted_star_m";
    }
    return "unknown";
}

class UnknownMethod : public std::runtime_error {
public:
    explicit UnknownMethod(std::string_view name)
        : std::runtime_error("UnknownMethod: '" + std::string(name) + "'") {}
};

inline Method parse_method(std::string_view name) {
    for (Method m : kAllMethods)
        if (method_name(m) == name)
            return m;
    throw UnknownMethod(name);
}

inline bool uses_mining(Method method) {
    return method == Method::ms || method == Method::ms_mining ||
           method == Method::binomial_mined || method == Method::lifted_star_mined;
}

/// Adapts a Method to the PairLoss interface.
class MethodLoss final : public PairLoss {
public:
    explicit MethodLoss(Method method) : method_(method) {}

    Method method() const noexcept { return method_; }
    std::string name() const override { return std::string(method_name(method_)); }
    bool has_value() const override { return method_ != Method::binlifted; }

    LossOutput evaluate(const SimilarityMatrix& s, const Labels& y,
                        const HyperParams& hp) const override {
        switch (method_) {
            case Method::contrastive: return contrastive_loss(s, y, hp.margin);
            case Method::triplet: return triplet_loss(s, y, hp.margin);
            case Method::lifted: return lifted_loss(s, y, hp.margin);
            case Method::binomial: return binomial_loss(s, y, hp);
            case Method::lifted_star: return lifted_star_loss(s, y, hp.alpha, hp.beta);
            case Method::binlifted: return {0.0, binlifted_grad(s, y, hp), false};
            case Method::ms: return ms_loss(s, y, hp);
            case Method::ms_mining: return ms_mining_only_loss(s, y, hp.epsilon);
            case Method::ms_weighting: return ms_weighting_loss(s, y, hp);
            case Method::binomial_mined: return binomial_mined_loss(s, y, hp);
            case Method::lifted_star_mined: return lifted_star_mined_loss(s, y, hp);
        }
        throw UnknownMethod(name());
    }

    double kink_distance(const SimilarityMatrix& s, const Labels& y,
                         const HyperParams& hp) const override {
        switch (method_) {
            case Method::contrastive: {
                double best = std::numeric_limits<double>::infinity();
                for (Index i = 0; i < s.rows(); ++i)
                    for (Index j = 0; j < s.cols(); ++j)
                        if (i != j && y[i] != y[j])
                            best = std::min(best, std::abs(s(i, j) - hp.margin));
                return best;
            }
            case Method::triplet: {
                const MinedSets c = candidate_sets(y);
                double best = std::numeric_limits<double>::infinity();
                for (Index a = 0; a < s.rows(); ++a)
                    for (Index p : c.positives[a])
                        for (Index n : c.negatives[a])
                            best = std::min(best, std::abs(s(a, n) - s(a, p) + hp.margin));
                return best;
            }
            case Method::lifted: return lifted_kink_distance(s, y, hp.margin);
            default:
                if (uses_mining(method_))
                    return mining_kink_distance(s, y, hp.epsilon);
                return std::numeric_limits<double>::infinity();
        }
    }

private:
    Method method_;
};

}  // namespace msloss
