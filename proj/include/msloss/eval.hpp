#pragma once

// Retrieval evaluation (Recall@K) and datasets: seeded synthetic clusters and
// a plain-text feature-file format.
//
// Feature file: one sample per line, comma-separated, integer label first and
// then exactly d decimal values. No header, blank lines ignored, d taken from
// the first data line.

#include "msloss/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace msloss {

using IndexVector = std::vector<Eigen::Index>;

struct Dataset {
    FeatureMatrix x;
    Labels y;
    IndexVector train;  ///< optional; empty when the source carries no split
    IndexVector test;

    Eigen::Index size() const noexcept { return x.rows(); }
    Eigen::Index dim() const noexcept { return x.cols(); }
    bool has_split() const noexcept { return !train.empty() || !test.empty(); }
};

/// Rows and labels of `indices`, in that order.
inline FeatureMatrix select_rows(const FeatureMatrix& x, const IndexVector& indices) {
    FeatureMatrix out(static_cast<Eigen::Index>(indices.size()), x.cols());
    for (std::size_t r = 0; r < indices.size(); ++r)
        out.row(static_cast<Eigen::Index>(r)) = x.row(indices[r]);
    return out;
}

inline Labels select_labels(const Labels& y, const IndexVector& indices) {
    Labels out;
    out.reserve(indices.size());
    for (auto i : indices)
        out.push_back(y[static_cast<std::size_t>(i)]);
    return out;
}

/// First half (rounded down) of each class's samples, in file order, go to
/// train; the rest to test.
inline void split_half_per_class(Dataset& data) {
    std::map<int, IndexVector> by_class;
    for (std::size_t i = 0; i < data.y.size(); ++i)
        by_class[data.y[i]].push_back(static_cast<Eigen::Index>(i));
    data.train.clear();
    data.test.clear();
    for (const auto& [label, members] : by_class) {
        const std::size_t half = members.size() / 2;
        for (std::size_t r = 0; r < members.size(); ++r)
            (r < half ? data.train : data.test).push_back(members[r]);
    }
    std::sort(data.train.begin(), data.train.end());
    std::sort(data.test.begin(), data.test.end());
}

// ---------------------------------------------------------------------------
// Recall@K

struct RecallReport {
    std::vector<int> ks;
    std::vector<double> recall;
    std::size_t queries = 0;   ///< queries that were scored
    std::size_t excluded = 0;  ///< queries whose class has no other gallery member

    double at(int k) const {
        for (std::size_t r = 0; r < ks.size(); ++r)
            if (ks[r] == k)
                return recall[r];
        throw InvalidArgument("K=" + std::to_string(k) + " not in report");
    }
};

class DegenerateGallery : public std::runtime_error {
public:
    DegenerateGallery() : std::runtime_error("every query lacks a same-class gallery sample") {}
};

namespace detail {

/// 1-based rank of the first same-class gallery item for one query, or 0
/// when there is none. Gallery order: similarity descending, ties by lower
/// gallery index. `skip` is excluded from the gallery (self match).
inline std::size_t first_hit_rank(const Eigen::Ref<const Vector>& sims, const Labels& gallery_y,
                                  int query_label, Eigen::Index skip) {
    Eigen::Index best = -1;
    for (Eigen::Index j = 0; j < sims.size(); ++j) {
        if (j == skip || gallery_y[static_cast<std::size_t>(j)] != query_label)
            continue;
        if (best < 0 || sims(j) > sims(best))
            best = j;
    }
    if (best < 0)
        return 0;
    std::size_t ahead = 0;
    for (Eigen::Index j = 0; j < sims.size(); ++j) {
        if (j == skip || gallery_y[static_cast<std::size_t>(j)] == query_label)
            continue;
        if (sims(j) > sims(best) || (sims(j) == sims(best) && j < best))
            ++ahead;
    }
    return ahead + 1;
}

inline RecallReport tally(const std::vector<std::size_t>& ranks, const std::vector<int>& ks) {
    RecallReport report;
    report.ks = ks;
    for (auto r : ranks)
        (r == 0 ? report.excluded : report.queries) += 1;
    if (report.queries == 0)
        throw DegenerateGallery();
    for (int k : ks) {
        if (k < 1)
            throw InvalidArgument("K must be >= 1");
        std::size_t hits = 0;
        for (auto r : ranks)
            if (r != 0 && r <= static_cast<std::size_t>(k))
                ++hits;
        report.recall.push_back(static_cast<double>(hits) / static_cast<double>(report.queries));
    }
    return report;
}

}  // namespace detail

/// Single-set retrieval: every sample queries all others.
inline RecallReport recall_at_k(const EmbeddingMatrix& e, const Labels& y,
                                const std::vector<int>& ks) {
    if (static_cast<std::size_t>(e.rows()) != y.size())
        throw InvalidArgument("label count does not match embeddings");
    const SimilarityMatrix s = e * e.transpose();
    std::vector<std::size_t> ranks(y.size());
    for (Eigen::Index i = 0; i < e.rows(); ++i)
        ranks[static_cast<std::size_t>(i)] =
            detail::first_hit_rank(s.row(i).transpose(), y, y[static_cast<std::size_t>(i)], i);
    return detail::tally(ranks, ks);
}

/// Two-set retrieval: queries against a separate gallery, nothing excluded.
inline RecallReport recall_at_k(const EmbeddingMatrix& queries, const Labels& query_y,
                                const EmbeddingMatrix& gallery, const Labels& gallery_y,
                                const std::vector<int>& ks) {
    if (static_cast<std::size_t>(queries.rows()) != query_y.size() ||
        static_cast<std::size_t>(gallery.rows()) != gallery_y.size())
        throw InvalidArgument("label count does not match embeddings");
    const Matrix s = queries * gallery.transpose();
    std::vector<std::size_t> ranks(query_y.size());
    for (Eigen::Index i = 0; i < queries.rows(); ++i)
        ranks[static_cast<std::size_t>(i)] = detail::first_hit_rank(
            s.row(i).transpose(), gallery_y, query_y[static_cast<std::size_t>(i)], -1);
    return detail::tally(ranks, ks);
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthSpec {
    int classes = 8;
    int per_class = 50;
    int dim = 32;
    double noise = 0.3;
    std::uint64_t seed = 7;
};

/// Class centers uniform on the unit sphere; each sample is its center plus
/// isotropic Gaussian noise, renormalized. Samples are stored class-major and
/// split half/half per class.
inline Dataset synth_dataset(const SynthSpec& spec) {
    if (spec.classes < 2 || spec.per_class < 2 || spec.dim < 1 || !(spec.noise >= 0.0))
        throw InvalidArgument("synthetic dataset needs classes >= 2, per_class >= 2, dim >= 1, noise >= 0");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto gaussian = [&](Eigen::Index n) {
        Vector v(n);
        for (Eigen::Index t = 0; t < n; ++t)
            v(t) = normal(rng);
        return v;
    };

    Matrix centers(spec.classes, spec.dim);
    for (int c = 0; c < spec.classes; ++c) {
        Vector v = gaussian(spec.dim);
        while (!(v.norm() > kZeroNormTolerance))
            v = gaussian(spec.dim);
        centers.row(c) = v.normalized().transpose();
    }

    Dataset data;
    data.x.resize(static_cast<Eigen::Index>(spec.classes) * spec.per_class, spec.dim);
    Eigen::Index row = 0;
    for (int c = 0; c < spec.classes; ++c) {
        for (int k = 0; k < spec.per_class; ++k, ++row) {
            if (spec.noise == 0.0) {
                data.x.row(row) = centers.row(c);
            } else {
                Vector v = centers.row(c).transpose() + spec.noise * gaussian(spec.dim);
                data.x.row(row) = v.normalized().transpose();
            }
            data.y.push_back(c);
        }
    }
    split_half_per_class(data);
    return data;
}

// ---------------------------------------------------------------------------
// Feature files

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& reason)
        : std::runtime_error("line " + std::to_string(line) + ": " + reason), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class EmptyFile : public std::runtime_error {
public:
    explicit EmptyFile(const std::string& path)
        : std::runtime_error("no samples in " + path) {}
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace detail

/// Parses the feature format from a stream. Labels are remapped to 0..C-1 in
/// increasing order of the original ids.
inline Dataset parse_dataset(std::istream& in, const std::string& source = "<stream>") {
    std::vector<int> raw_labels;
    std::vector<double> values;
    std::size_t dim = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view text = detail::trim(line);
        if (text.empty())
            continue;
        std::size_t fields = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const auto comma = text.find(',', pos);
            const std::string_view field =
                detail::trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
            const char* first = field.data();
            const char* last = field.data() + field.size();
            if (field.empty())
                throw ParseError(line_no, "empty field " + std::to_string(fields));
            if (fields == 0) {
                int label = 0;
                auto [ptr, ec] = std::from_chars(first, last, label);
                if (ec != std::errc() || ptr != last)
                    throw ParseError(line_no, "label is not an integer");
                raw_labels.push_back(label);
            } else {
                double v = 0.0;
                auto [ptr, ec] = std::from_chars(first, last, v);
                if (ec != std::errc() || ptr != last || !std::isfinite(v))
                    throw ParseError(line_no, "bad value in field " + std::to_string(fields));
                values.push_back(v);
            }
            ++fields;
            if (comma == std::string_view::npos)
                break;
            pos = comma + 1;
        }
        if (fields < 2)
            throw ParseError(line_no, "expected a label and at least one value");
        if (dim == 0)
            dim = fields - 1;
        else if (fields - 1 != dim)
            throw ParseError(line_no, "expected " + std::to_string(dim) + " values, got " +
                                          std::to_string(fields - 1));
    }
    if (raw_labels.empty())
        throw EmptyFile(source);

    std::vector<int> ids = raw_labels;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

    Dataset data;
    const auto m = static_cast<Eigen::Index>(raw_labels.size());
    data.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), m, static_cast<Eigen::Index>(dim));
    for (int raw : raw_labels)
        data.y.push_back(static_cast<int>(std::lower_bound(ids.begin(), ids.end(), raw) - ids.begin()));
    return data;
}

inline Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path);
    return parse_dataset(in, path);
}

/// Writes the feature format with round-trip precision.
inline void write_dataset(std::ostream& out, const FeatureMatrix& x, const Labels& y) {
    char buf[32];
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        out << y[static_cast<std::size_t>(i)];
        for (Eigen::Index t = 0; t < x.cols(); ++t) {
            std::snprintf(buf, sizeof buf, "%.17g", x(i, t));
            out << ',' << buf;
        }
        out << '\n';
    }
}

inline void save_dataset(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path);
    write_dataset(out, data.x, data.y);
}

}  // namespace msloss
