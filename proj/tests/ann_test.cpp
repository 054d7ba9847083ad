#include "lakejoin/ann.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <queue>
#include <sstream>
#include <thread>

namespace lakejoin {
namespace {

HnswParams small_params() {
    HnswParams p;
    p.m = 8;
    p.ef_construction = 64;
    p.ef_search = 64;
    return p;
}

std::vector<Neighbor> as_neighbors(const std::vector<std::pair<std::string, double>>& v) {
    std::vector<Neighbor> out;
    for (const auto& [id, d] : v) out.push_back({id, d});
    return out;
}

double recall_at(const HnswIndex& idx, const std::vector<std::pair<std::string, EmbeddingVector>>& data,
                 const std::vector<std::pair<std::string, EmbeddingVector>>& queries, std::size_t k, std::size_t ef) {
    std::size_t hit = 0;
    for (const auto& [qid, q] : queries) {
        auto truth = testing::brute_knn(data, q, k);
        std::set<std::string> want;
        for (const auto& [id, d] : truth) want.insert(id);
        for (const auto& n : idx.knn(q, k, ef)) hit += want.count(n.id);
    }
    return static_cast<double>(hit) / static_cast<double>(k * queries.size());
}

TEST(Hnsw, EmptyIndex) {
    HnswIndex idx(4, small_params());
    EXPECT_TRUE(idx.knn(EmbeddingVector{1, 0, 0, 0}, 3).empty());
    std::stringstream buf;
    idx.save(buf);
    auto back = HnswIndex::load(buf);
    EXPECT_EQ(back.size(), 0u);
    EXPECT_TRUE(back.knn(EmbeddingVector{1, 0, 0, 0}, 3).empty());
}

TEST(Hnsw, SingleVector) {
    HnswIndex idx(3, small_params());
    idx.add("only", EmbeddingVector{0.0, 2.0, 0.0});
    auto r = idx.knn(EmbeddingVector{0.0, 1.0, 0.0}, 5);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].id, "only");
    EXPECT_NEAR(r[0].distance, 0.0, 1e-12);
}

TEST(Hnsw, AddErrors) {
    HnswIndex idx(3, small_params());
    idx.add("a", EmbeddingVector{1.0, 0.0, 0.0});
    EXPECT_THROW(idx.add("b", EmbeddingVector{1.0, 0.0}), DimensionMismatch);
    EXPECT_THROW(idx.add("c", EmbeddingVector{0.0, 0.0, 0.0}), InvalidArgument);
    EXPECT_THROW(idx.add("a", EmbeddingVector{0.0, 1.0, 0.0}), InvalidArgument);
    EXPECT_THROW(idx.knn(EmbeddingVector{1.0, 0.0, 0.0}, 0), InvalidArgument);
    HnswParams bad;
    bad.m = 1;
    EXPECT_THROW(HnswIndex(3, bad), InvalidArgument);
}

TEST(Hnsw, DuplicateVectorsAreAllFound) {
    auto data = testing::random_unit_vectors(4, 300, 8);
    const auto dup = data[17].second;
    for (int i = 0; i < 20; ++i) data.emplace_back("dup" + testing::zero_pad(static_cast<std::size_t>(i), 2), dup);
    auto idx = build_hnsw(data, small_params());
    EXPECT_EQ(idx.size(), 320u);
    EXPECT_EQ(idx.node_count(), 300u);
    auto r = idx.knn(dup, 21, 64);
    ASSERT_EQ(r.size(), 21u);
    for (const auto& n : r) EXPECT_NEAR(n.distance, 0.0, 1e-9) << n.id;
    EXPECT_EQ(r.front().id, "dup00");
    std::stringstream buf;
    idx.save(buf);
    auto back = HnswIndex::load(buf);
    EXPECT_EQ(back.size(), 320u);
    EXPECT_EQ(back.knn(dup, 21, 64), idx.knn(dup, 21, 64));
    EXPECT_THROW(back.add("dup05", dup), InvalidArgument);
    back.add("dup99", dup);
    EXPECT_EQ(back.node_count(), 300u);
}

TEST(Hnsw, ExhaustiveEfMatchesBruteForce) {
    auto data = testing::random_unit_vectors(5, 500, 16);
    auto idx = build_hnsw(data, small_params());
    auto queries = testing::random_unit_vectors(6, 30, 16);
    for (const auto& [qid, q] : queries) {
        auto got = idx.knn(q, 10, data.size());
        auto want = as_neighbors(testing::brute_knn(data, q, 10));
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].id, want[i].id);
            EXPECT_NEAR(got[i].distance, want[i].distance, 1e-12);
        }
    }
}

TEST(Hnsw, DegreeBoundsAndReachability) {
    auto data = testing::random_unit_vectors(7, 3000, 12);
    HnswParams p = small_params();
    auto idx = build_hnsw(data, p);
    std::size_t above = 0;
    ASSERT_EQ(idx.node_count(), idx.size());
    for (std::uint32_t n = 0; n < idx.node_count(); ++n) {
        EXPECT_LE(idx.neighbors(n, 0).size(), p.max_degree0());
        for (int l = 1; l <= idx.level(n); ++l) EXPECT_LE(idx.neighbors(n, l).size(), p.m);
        for (int l = 0; l <= idx.level(n); ++l) {
            for (auto nb : idx.neighbors(n, l)) {
                EXPECT_NE(nb, n);
                EXPECT_GE(idx.level(nb), l);
            }
        }
        above += idx.level(n) >= 1;
    }
    EXPECT_EQ(idx.level(idx.entry_point()), idx.max_level());
    // Level 1 or higher with probability 1/m.
    double frac = static_cast<double>(above) / static_cast<double>(idx.size());
    EXPECT_NEAR(frac, 1.0 / static_cast<double>(p.m), 0.03);

    std::vector<bool> seen(idx.size(), false);
    std::queue<std::uint32_t> todo;
    todo.push(idx.entry_point());
    seen[idx.entry_point()] = true;
    std::size_t reached = 1;
    while (!todo.empty()) {
        auto n = todo.front();
        todo.pop();
        for (auto nb : idx.neighbors(n, 0)) {
            if (!seen[nb]) {
                seen[nb] = true;
                ++reached;
                todo.push(nb);
            }
        }
    }
    EXPECT_EQ(reached, idx.size());
}

TEST(Hnsw, RecallOnRandomVectors) {
    auto data = testing::random_unit_vectors(8, 2000, 32);
    auto queries = testing::random_unit_vectors(9, 50, 32);
    HnswParams p;
    auto idx = build_hnsw(data, p);
    EXPECT_GE(recall_at(idx, data, queries, 10, 200), 0.95);
}

TEST(Hnsw, NormalizationMakesScaleIrrelevant) {
    auto data = testing::random_unit_vectors(10, 200, 8);
    auto scaled = data;
    for (auto& [id, v] : scaled) {
        std::vector<double> s(v.values());
        for (auto& x : s) x *= 7.5;
        v = EmbeddingVector(std::move(s));
    }
    auto a = build_hnsw(data, small_params());
    auto b = build_hnsw(scaled, small_params());
    auto q = testing::random_unit_vectors(11, 1, 8).front().second;
    auto ra = a.knn(q, 5), rb = b.knn(q, 5);
    ASSERT_EQ(ra.size(), rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i) {
        EXPECT_EQ(ra[i].id, rb[i].id);
        EXPECT_NEAR(ra[i].distance, rb[i].distance, 1e-9);
    }
}

TEST(Hnsw, SaveLoadRoundTrip) {
    auto data = testing::random_unit_vectors(12, 1000, 16);
    auto idx = build_hnsw(data, small_params());
    idx.metadata = "{\"embedder\":\"hash:16:0\"}";
    std::stringstream buf;
    idx.save(buf);
    auto back = HnswIndex::load(buf);
    EXPECT_EQ(back.size(), idx.size());
    EXPECT_EQ(back.metadata, idx.metadata);
    EXPECT_EQ(back.max_level(), idx.max_level());
    EXPECT_EQ(back.params().max_degree0(), idx.params().max_degree0());
    for (const auto& [qid, q] : testing::random_unit_vectors(13, 100, 16)) {
        EXPECT_EQ(back.knn(q, 10), idx.knn(q, 10));
    }
}

TEST(Hnsw, CorruptFilesRejected) {
    auto idx = build_hnsw(testing::random_unit_vectors(14, 50, 8), small_params());
    std::stringstream buf;
    idx.save(buf);
    const std::string bytes = buf.str();

    std::stringstream magic("NOPE" + bytes.substr(4));
    EXPECT_THROW(HnswIndex::load(magic), FormatError);

    for (std::size_t cut : {std::size_t{3}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1}) {
        std::stringstream truncated(bytes.substr(0, cut));
        EXPECT_THROW(HnswIndex::load(truncated), FormatError) << cut;
    }

    std::string version = bytes;
    version[4] = 7;
    std::stringstream v(version);
    EXPECT_THROW(HnswIndex::load(v), FormatError);

    // The last four bytes are the final neighbor id of the last node.
    std::string dangling = bytes;
    for (std::size_t i = dangling.size() - 4; i < dangling.size(); ++i) dangling[i] = '\xff';
    std::stringstream d(dangling);
    EXPECT_THROW(HnswIndex::load(d), FormatError);
}

TEST(Hnsw, ConcurrentQueriesMatchSerial) {
    auto data = testing::random_unit_vectors(15, 2000, 16);
    auto idx = build_hnsw(data, small_params());
    auto queries = testing::random_unit_vectors(16, 64, 16);
    std::vector<std::vector<Neighbor>> serial, parallel(queries.size());
    for (const auto& [id, q] : queries) serial.push_back(idx.knn(q, 10));
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < 4; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < queries.size(); i += 4) parallel[i] = idx.knn(queries[i].second, 10);
        });
    }
    for (auto& th : pool) th.join();
    EXPECT_EQ(parallel, serial);
}

TEST(Hnsw, LibraryBruteForceAgreesWithTestReference) {
    auto data = testing::random_unit_vectors(17, 300, 8);
    auto q = testing::random_unit_vectors(18, 1, 8).front().second;
    auto lib = brute_force_knn(data, q, 7);
    auto ref = as_neighbors(testing::brute_knn(data, q, 7));
    ASSERT_EQ(lib.size(), ref.size());
    for (std::size_t i = 0; i < lib.size(); ++i) {
        EXPECT_EQ(lib[i].id, ref[i].id);
        EXPECT_NEAR(lib[i].distance, ref[i].distance, 1e-12);
    }
}

}  // namespace
}  // namespace lakejoin
