#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "mwand/errors.hpp"
#include "mwand/random.hpp"
#include "mwand/retrieve.hpp"

using namespace mwand;

namespace {

/// Every part its own group, embeddings drawn around per-cluster centers.
EmbeddingIndex clustered_index(Rng& rng, const std::vector<int>& cluster_of, int dim, double spread, double sep) {
    std::map<PartId, std::vector<float>> vecs;
    std::vector<std::vector<double>> centers;
    for (int c = 0; c <= *std::max_element(cluster_of.begin(), cluster_of.end()); ++c) {
        std::vector<double> ctr;
        for (int d = 0; d < dim; ++d) ctr.push_back(rng.uniform(-sep, sep));
        centers.push_back(ctr);
    }
    for (std::size_t p = 0; p < cluster_of.size(); ++p) {
        std::vector<float> v;
        for (int d = 0; d < dim; ++d) {
            v.push_back(static_cast<float>(centers[static_cast<std::size_t>(cluster_of[p])][static_cast<std::size_t>(d)] +
                                           rng.uniform(-spread, spread)));
        }
        vecs[static_cast<PartId>(p)] = v;
    }
    return EmbeddingIndex("m", singleton_groups(cluster_of.size()), vecs);
}

std::set<PartId> ids(const std::vector<RankedPart>& sel) {
    std::set<PartId> out;
    for (const auto& r : sel) out.insert(r.part_id);
    return out;
}

}  // namespace

TEST(Similarity, Arithmetic) {
    const std::vector<float> a{1, 2}, b{3, 0};
    EXPECT_EQ(similarity(a, a), 0.0);
    EXPECT_EQ(similarity(a, b), -4.0);
    EXPECT_THROW(l1_distance(a, std::vector<float>{1}), ConfigError);
}

TEST(Similarity, MatchesExtendedPrecisionAndIsSymmetric) {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        std::vector<float> a(1152), b(1152);
        for (auto& v : a) v = static_cast<float>(rng.uniform(-2, 2));
        for (auto& v : b) v = static_cast<float>(rng.uniform(-2, 2));
        long double acc = 0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += std::fabs(static_cast<long double>(a[i]) - b[i]);
        EXPECT_NEAR(similarity(a, b), -static_cast<double>(acc), 1e-9);
        EXPECT_EQ(similarity(a, b), similarity(b, a));
    }
}

TEST(Rank, DedupSiblingAtZero) {
    DuplicateGroups g;
    g.groups = {{0, {0, 1}}};
    g.group_of = {0, 0};
    const EmbeddingIndex index("m", g, {{0, {1.0f, 2.0f}}});
    const auto r = rank_parts(index, 0);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].part_id, 1);
    EXPECT_EQ(r[0].distance, 0.0);
    EXPECT_EQ(index.vector_of(1)[1], 2.0f);
}

TEST(Rank, SinglePartIsEmptyAndUnknownThrows) {
    const EmbeddingIndex index("m", singleton_groups(1), {{0, {1.0f}}});
    EXPECT_TRUE(rank_parts(index, 0).empty());
    EXPECT_THROW(rank_parts(index, 3), NotFoundError);
    EXPECT_THROW(EmbeddingIndex("m", singleton_groups(2), {{0, {1.0f}}}), NotFoundError);
}

TEST(Rank, ThreeClustersMatchBruteForce) {
    Rng rng(5);
    std::vector<int> cluster_of;
    for (int i = 0; i < 24; ++i) cluster_of.push_back(i % 3);
    const auto index = clustered_index(rng, cluster_of, 16, 0.1, 5.0);
    for (PartId q = 0; q < 24; ++q) {
        const auto r = rank_parts(index, q);
        // Brute force: all pairs, sort by (distance, id).
        std::vector<std::pair<double, PartId>> bf;
        for (PartId p = 0; p < 24; ++p) {
            if (p != q) bf.push_back({l1_distance(index.vector_of(q), index.vector_of(p)), p});
        }
        std::sort(bf.begin(), bf.end());
        ASSERT_EQ(r.size(), bf.size());
        for (std::size_t i = 0; i < r.size(); ++i) {
            EXPECT_EQ(r[i].part_id, bf[i].second);
            EXPECT_EQ(r[i].distance, bf[i].first);
        }
        // Within-cluster parts come first.
        for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(cluster_of[static_cast<std::size_t>(r[i].part_id)], cluster_of[static_cast<std::size_t>(q)]);
    }
}

TEST(Rank, TiesByPartId) {
    const EmbeddingIndex index("m", singleton_groups(4), {{0, {0.0f}}, {1, {1.0f}}, {2, {-1.0f}}, {3, {1.0f}}});
    const auto r = rank_parts(index, 0);
    EXPECT_EQ(r[0].part_id, 1);
    EXPECT_EQ(r[1].part_id, 2);
    EXPECT_EQ(r[2].part_id, 3);
}

TEST(Select, ZeroAndInfiniteLambda) {
    DuplicateGroups g;
    g.groups = {{0, {0, 2}}, {1, {1}}, {3, {3}}};
    g.group_of = {0, 1, 0, 2};
    const EmbeddingIndex index("m", g, {{0, {0.0f}}, {1, {1.0f}}, {3, {5.0f}}});
    EXPECT_EQ(ids(select_group(index, {{0}, 0.0})), (std::set<PartId>{0, 2}));
    EXPECT_EQ(ids(select_group(index, {{0}, std::numeric_limits<double>::infinity()})), (std::set<PartId>{0, 1, 2, 3}));
    EXPECT_THROW(select_group(index, {{}, 1.0}), RequestError);
    EXPECT_THROW(select_group(index, {{0}, -1.0}), RequestError);
    EXPECT_THROW(select_group(index, {{9}, 1.0}), NotFoundError);
}

TEST(Select, TwoClusterMultiClickUnion) {
    // Two sail clusters: one click captures its own cluster, a second click adds the other.
    Rng rng(7);
    std::vector<int> cluster_of{0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2};
    const auto index = clustered_index(rng, cluster_of, 8, 0.05, 4.0);
    double lambda = 0.0;
    for (PartId a = 0; a < 9; ++a) {
        for (PartId b = 0; b < 9; ++b) {
            if (cluster_of[static_cast<std::size_t>(a)] == cluster_of[static_cast<std::size_t>(b)]) {
                lambda = std::max(lambda, l1_distance(index.vector_of(a), index.vector_of(b)));
            }
        }
    }
    const auto one = ids(select_group(index, {{0}, lambda}));
    EXPECT_EQ(one, (std::set<PartId>{0, 1, 2, 3}));
    const auto two = ids(select_group(index, {{0, 5}, lambda}));
    EXPECT_EQ(two, (std::set<PartId>{0, 1, 2, 3, 4, 5, 6, 7, 8}));
}

TEST(Select, MonotonicityConsistencyAndSymmetry) {
    Rng rng(11);
    std::vector<int> cluster_of;
    for (int i = 0; i < 30; ++i) cluster_of.push_back(static_cast<int>(rng.index(4)));
    const auto index = clustered_index(rng, cluster_of, 12, 1.0, 2.0);
    std::vector<double> grid;
    for (int k = 0; k < 50; ++k) grid.push_back(k * 1.0);
    for (PartId q = 0; q < 30; q += 3) {
        std::set<PartId> prev;
        for (double lam : grid) {
            const auto cur = ids(select_group(index, {{q}, lam}));
            EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
            // Ranking prefix plus the query.
            std::set<PartId> prefix{q};
            for (const auto& r : rank_parts(index, q)) {
                if (r.distance <= lam) prefix.insert(r.part_id);
            }
            EXPECT_EQ(cur, prefix);
            const auto more = ids(select_group(index, {{q, static_cast<PartId>((q + 7) % 30)}, lam}));
            EXPECT_TRUE(std::includes(more.begin(), more.end(), cur.begin(), cur.end()));
            for (PartId p : cur) EXPECT_TRUE(ids(select_group(index, {{p}, lam})).count(q));
            prev = cur;
        }
    }
}

TEST(Select, JsonAndCsv) {
    const EmbeddingIndex index("m", singleton_groups(3), {{0, {0.0f}}, {1, {1.0f}}, {2, {3.0f}}});
    const auto sel = select_group(index, {{0}, 1.5});
    const auto j = selection_to_json(sel, 1.5);
    EXPECT_EQ(j["lambda"], 1.5);
    ASSERT_EQ(j["selected"].size(), 2u);
    EXPECT_EQ(j["selected"][1]["part_id"], 1);
    const auto csv = ranking_csv(rank_parts(index, 0));
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "rank,part_id,distance");
    EXPECT_EQ(embedding_space_from_string("z"), EmbeddingSpace::z);
    EXPECT_THROW(embedding_space_from_string("w"), ConfigError);
}
