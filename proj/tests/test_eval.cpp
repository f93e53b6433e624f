#include "msloss/eval.hpp"
#include "msloss/gradcheck.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>

using namespace msloss;

namespace {

EmbeddingMatrix points(std::initializer_list<std::pair<double, double>> xy) {
    EmbeddingMatrix e(static_cast<Eigen::Index>(xy.size()), 2);
    Eigen::Index r = 0;
    for (auto [a, b] : xy) {
        e(r, 0) = a;
        e(r, 1) = b;
        ++r;
    }
    return l2_normalize(e);
}

}  // namespace

TEST(Recall, PerfectClusters) {
    const EmbeddingMatrix e = points({{1, 0}, {1, 0.01}, {0, 1}, {0.01, 1}});
    const RecallReport r = recall_at_k(e, {0, 0, 1, 1}, {1, 2});
    EXPECT_EQ(r.at(1), 1.0);
    EXPECT_EQ(r.at(2), 1.0);
    EXPECT_EQ(r.queries, 4u);
}

TEST(Recall, InterleavedClasses) {
    // Nearest neighbour of every sample belongs to the other class.
    const EmbeddingMatrix e = points({{1, 0}, {1, 0.1}, {0, 1}, {0.1, 1}});
    const RecallReport r = recall_at_k(e, {0, 1, 0, 1}, {1, 2, 3});
    EXPECT_EQ(r.at(1), 0.0);
    EXPECT_EQ(r.at(2), 0.5);
    EXPECT_EQ(r.at(3), 1.0);
}

TEST(Recall, TiesGoToLowerIndex) {
    const EmbeddingMatrix e = points({{1, 0}, {0, 1}, {0, 1}});
    // Query 0 sees 1 and 2 at equal similarity; index 1 ranks first.
    EXPECT_EQ(recall_at_k(e, {0, 1, 0}, {1}).at(1), 0.0);
    // Query 0 now hits via index 1; query 1's nearest is the class-1 copy.
    EXPECT_EQ(recall_at_k(e, {0, 0, 1}, {1}).at(1), 0.5);
}

TEST(Recall, SingletonQueriesAreExcluded) {
    const EmbeddingMatrix e = points({{1, 0}, {1, 0.1}, {0, 1}});
    const RecallReport r = recall_at_k(e, {0, 0, 1}, {1});
    EXPECT_EQ(r.queries, 2u);
    EXPECT_EQ(r.excluded, 1u);
    EXPECT_EQ(r.at(1), 1.0);
}

TEST(Recall, DegenerateGallery) {
    const EmbeddingMatrix e = points({{1, 0}, {0, 1}, {1, 1}});
    EXPECT_THROW(recall_at_k(e, {0, 1, 2}, {1}), DegenerateGallery);
}

TEST(Recall, RejectsBadK) {
    const EmbeddingMatrix e = points({{1, 0}, {1, 0.1}});
    EXPECT_THROW(recall_at_k(e, {0, 0}, {0}), InvalidArgument);
    EXPECT_THROW(recall_at_k(e, {0, 0}, {1}).at(4), InvalidArgument);
}

TEST(Recall, MatchesSortingOracle) {
    Rng rng(41);
    std::uniform_int_distribution<int> pick_m(3, 30), pick_d(1, 5), pick_c(2, 6);
    const std::vector<int> ks{1, 2, 3, 5, 8};
    int checked = 0;
    while (checked < 100) {
        const int m = pick_m(rng);
        const int c = pick_c(rng);
        std::uniform_int_distribution<int> pick_label(0, c - 1);
        Labels y(static_cast<std::size_t>(m));
        for (auto& label : y)
            label = pick_label(rng);
        EmbeddingMatrix e = l2_normalize(random_gaussian(m, pick_d(rng), rng));
        // Duplicate a row now and then so ties are exercised.
        if (m > 3 && checked % 4 == 0)
            e.row(2) = e.row(1);
        RecallReport r;
        try {
            r = recall_at_k(e, y, ks);
        } catch (const DegenerateGallery&) {
            continue;
        }
        const std::vector<double> expected = oracle::recall_by_sorting(e, y, ks);
        for (std::size_t k = 0; k < ks.size(); ++k)
            EXPECT_DOUBLE_EQ(r.recall[k], expected[k]) << "trial " << checked << " K=" << ks[k];
        ++checked;
    }
}

TEST(Recall, Properties) {
    Rng rng(43);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = 12;
        Labels y = random_labels(m, rng);
        const EmbeddingMatrix e = l2_normalize(random_gaussian(m, 3, rng));
        std::vector<int> ks(static_cast<std::size_t>(m - 1));
        std::iota(ks.begin(), ks.end(), 1);
        const RecallReport r = recall_at_k(e, y, ks);
        for (std::size_t k = 1; k < ks.size(); ++k)
            EXPECT_GE(r.recall[k], r.recall[k - 1]);
        EXPECT_EQ(r.recall.back(), 1.0);

        // Relabelling classes by a permutation changes nothing.
        Labels renamed = y;
        for (auto& label : renamed)
            label = 100 - 3 * label;
        EXPECT_EQ(recall_at_k(e, renamed, ks).recall, r.recall);
    }
}

TEST(Recall, TwoSetMode) {
    const EmbeddingMatrix q = points({{1, 0}, {0, 1}});
    const EmbeddingMatrix g = points({{1, 0.05}, {0.05, 1}, {1, 0.01}});
    const RecallReport r = recall_at_k(q, {0, 1}, g, {1, 1, 0}, {1, 2});
    // Query 0: nearest gallery item is index 2 (class 0) -> hit.
    // Query 1: nearest is index 1 (class 1) -> hit.
    EXPECT_EQ(r.at(1), 1.0);

    const RecallReport miss = recall_at_k(q, {0, 1}, g, {1, 0, 1}, {1, 2, 3});
    EXPECT_EQ(miss.at(1), 0.0);
    EXPECT_EQ(miss.at(2), 0.5);
    EXPECT_EQ(miss.at(3), 1.0);
    // A query whose class is absent from the gallery does not count.
    const RecallReport partial = recall_at_k(q, {0, 7}, g, {0, 0, 0}, {1});
    EXPECT_EQ(partial.queries, 1u);
    EXPECT_EQ(partial.excluded, 1u);
}

// --- synthetic data --------------------------------------------------------

TEST(Synth, ZeroNoiseCollapsesToCenters) {
    const Dataset d = synth_dataset({3, 4, 5, 0.0, 1});
    ASSERT_EQ(d.size(), 12);
    for (int c = 0; c < 3; ++c)
        for (int k = 1; k < 4; ++k)
            EXPECT_EQ(d.x.row(c * 4 + k), d.x.row(c * 4));
    EXPECT_LE((d.x.rowwise().norm().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(Synth, ShapeLabelsAndSplit) {
    const Dataset d = synth_dataset({8, 50, 32, 0.3, 7});
    EXPECT_EQ(d.size(), 400);
    EXPECT_EQ(d.dim(), 32);
    EXPECT_EQ(d.train.size(), 200u);
    EXPECT_EQ(d.test.size(), 200u);
    std::vector<int> per_class(8, 0);
    for (auto i : d.train)
        ++per_class[static_cast<std::size_t>(d.y[static_cast<std::size_t>(i)])];
    for (int count : per_class)
        EXPECT_EQ(count, 25);
}

TEST(Synth, DeterministicPerSeed) {
    EXPECT_EQ(synth_dataset({4, 10, 6, 0.3, 9}).x, synth_dataset({4, 10, 6, 0.3, 9}).x);
    EXPECT_NE(synth_dataset({4, 10, 6, 0.3, 9}).x, synth_dataset({4, 10, 6, 0.3, 10}).x);
}

TEST(Synth, RawFeaturesAlreadyRetrieve) {
    const Dataset d = synth_dataset({8, 50, 32, 0.3, 7});
    EXPECT_GT(recall_at_k(l2_normalize(d.x), d.y, {1}).at(1), 0.5);
}

// --- feature files ---------------------------------------------------------

TEST(ParseDataset, SimpleFile) {
    std::istringstream in("3, 0.5, 1.0\n\n7,-2,4e-1\n3 , 1 , 1\n");
    const Dataset d = parse_dataset(in);
    ASSERT_EQ(d.size(), 3);
    EXPECT_EQ(d.dim(), 2);
    EXPECT_EQ(d.y, (Labels{0, 1, 0}));
    EXPECT_DOUBLE_EQ(d.x(1, 0), -2.0);
    EXPECT_DOUBLE_EQ(d.x(1, 1), 0.4);
    EXPECT_FALSE(d.has_split());
}

TEST(ParseDataset, ErrorsCarryLineNumber) {
    auto line_of = [](const std::string& text) -> std::size_t {
        std::istringstream in(text);
        try {
            (void)parse_dataset(in);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    EXPECT_EQ(line_of("1,2,3\n1,2\n"), 2u);      // width change
    EXPECT_EQ(line_of("1,2,x\n"), 1u);           // not a number
    EXPECT_EQ(line_of("1.5,2,3\n"), 1u);         // non-integer label
    EXPECT_EQ(line_of("1,2,3\n\n2,nan,1\n"), 3u);
    EXPECT_EQ(line_of("1\n"), 1u);
    EXPECT_EQ(line_of("1,,2\n"), 1u);
}

TEST(ParseDataset, EmptyInput) {
    std::istringstream in("\n  \n");
    EXPECT_THROW(parse_dataset(in), EmptyFile);
}

TEST(LoadDataset, MissingFile) {
    EXPECT_THROW(load_dataset("/nonexistent/definitely/missing.csv"), IoError);
}

TEST(LoadDataset, RoundTrip) {
    const Dataset d = synth_dataset({3, 5, 4, 0.3, 2});
    const auto path = std::filesystem::temp_directory_path() / "msloss_roundtrip.csv";
    save_dataset(path.string(), d);
    const Dataset back = load_dataset(path.string());
    std::filesystem::remove(path);
    EXPECT_EQ(back.x, d.x);
    EXPECT_EQ(back.y, d.y);
}

TEST(SplitHalfPerClass, FloorHalfInFileOrder) {
    Dataset d;
    d.x = Matrix::Zero(7, 1);
    d.y = {0, 1, 0, 1, 0, 1, 1};
    split_half_per_class(d);
    EXPECT_EQ(d.train, (IndexVector{0, 1, 3}));
    EXPECT_EQ(d.test, (IndexVector{2, 4, 5, 6}));
}
