#include "lakejoin/evalkit.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

namespace lakejoin {
namespace {

SearchResult ranked(std::vector<std::pair<std::string, double>> hits) {
    SearchResult r;
    for (auto& [id, s] : hits) r.hits.push_back({id, s});
    return r;
}

SearchResult random_result(std::mt19937_64& rng, std::size_t n, std::size_t universe) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < universe; ++i) ids.push_back("c" + std::to_string(i));
    std::shuffle(ids.begin(), ids.end(), rng);
    std::uniform_real_distribution<double> u;
    std::vector<double> scores(n);
    for (auto& s : scores) s = u(rng);
    std::sort(scores.rbegin(), scores.rend());
    SearchResult r;
    for (std::size_t i = 0; i < n; ++i) r.hits.push_back({ids[i], scores[i]});
    return r;
}

TEST(Precision, Identity) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20; ++i) {
        auto r = random_result(rng, 10, 50);
        for (std::size_t k : {1u, 5u, 10u}) EXPECT_DOUBLE_EQ(precision_at_k(r, r, k), 1.0);
    }
}

TEST(Precision, DisjointAndCounted) {
    auto exact = ranked({{"a", 1}, {"b", 0.9}, {"c", 0.8}, {"d", 0.5}});
    auto other = ranked({{"x", 1}, {"y", 1}, {"z", 1}, {"w", 1}});
    EXPECT_DOUBLE_EQ(precision_at_k(other, exact, 4), 0.0);
    auto partial = ranked({{"c", 1}, {"x", 1}, {"a", 1}, {"b", 1}});
    EXPECT_DOUBLE_EQ(precision_at_k(partial, exact, 2), 0.0);
    EXPECT_DOUBLE_EQ(precision_at_k(partial, exact, 3), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(precision_at_k(partial, exact, 4), 0.75);
    EXPECT_THROW(precision_at_k(partial, exact, 0), InvalidArgument);
}

TEST(Precision, MatchesHandCount) {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 50; ++i) {
        auto a = random_result(rng, 10, 20), b = random_result(rng, 10, 20);
        std::set<std::string> sa, sb;
        for (const auto& h : a.hits) sa.insert(h.id);
        for (const auto& h : b.hits) sb.insert(h.id);
        std::size_t common = 0;
        for (const auto& id : sa) common += sb.count(id);
        EXPECT_DOUBLE_EQ(precision_at_k(a, b, 10), static_cast<double>(common) / 10.0);
    }
}

TEST(Ndcg, IdentityAndSwappedPair) {
    auto exact = ranked({{"a", 1.0}, {"b", 0.5}});
    auto jn = scores_of(exact);
    EXPECT_DOUBLE_EQ(ndcg_at_k(exact, exact, jn, 2), 1.0);
    auto swapped = ranked({{"b", 0.5}, {"a", 1.0}});
    EXPECT_NEAR(dcg_at_k(swapped, jn, 2), 1.130930, 1e-6);
    EXPECT_NEAR(dcg_at_k(exact, jn, 2), 1.315465, 1e-6);
    EXPECT_NEAR(ndcg_at_k(swapped, exact, jn, 2), 0.859719, 1e-6);
}

TEST(Ndcg, DegenerateCases) {
    auto exact = ranked({{"a", 0.7}, {"b", 0.2}});
    auto jn = scores_of(exact);
    EXPECT_DOUBLE_EQ(ndcg_at_k(ranked({{"x", 0.9}, {"y", 0.9}}), exact, jn, 2), 0.0);
    auto zero = ranked({{"a", 0.0}, {"b", 0.0}});
    EXPECT_DOUBLE_EQ(ndcg_at_k(ranked({{"q", 0.0}}), zero, scores_of(zero), 2), 1.0);
    EXPECT_THROW(ndcg_at_k(exact, exact, jn, 0), InvalidArgument);
}

TEST(Ndcg, MovingBetterItemEarlierNeverHurts) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 200; ++t) {
        auto exact = random_result(rng, 10, 30);
        auto jn = scores_of(exact);
        auto model = random_result(rng, 10, 30);
        // Mix in some exact ids so gains are nonzero.
        for (std::size_t i = 0; i < 10; i += 2) model.hits[i].id = exact.hits[(i * 7 + t) % 10].id;
        std::set<std::string> seen;
        bool unique = true;
        for (const auto& h : model.hits) unique &= seen.insert(h.id).second;
        if (!unique) continue;
        for (std::size_t i = 0; i + 1 < model.size(); ++i) {
            if (jn(model[i + 1].id) > jn(model[i].id)) {
                auto better = model;
                std::swap(better.hits[i], better.hits[i + 1]);
                EXPECT_GE(ndcg_at_k(better, exact, jn, 10), ndcg_at_k(model, exact, jn, 10) - 1e-15);
            }
        }
        double v = ndcg_at_k(model, exact, jn, 10);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

LabelPool pool_of(std::vector<std::string> positives, std::vector<std::string> judged) {
    LabelPool pool;
    LabelPool::Entry e;
    e.positives.insert(positives.begin(), positives.end());
    e.judged.emplace(judged.begin(), judged.end());
    pool.queries["q"] = e;
    return pool;
}

TEST(Prf, PoolFixture) {
    // Pool of 20 columns with 8 positives; the method retrieves 10, 6 of
    // them positive.
    std::vector<std::string> all, positives;
    for (int i = 0; i < 20; ++i) all.push_back("p" + std::to_string(i));
    positives.assign(all.begin(), all.begin() + 8);
    auto pool = pool_of(positives, all);
    std::vector<std::string> retrieved(all.begin() + 2, all.begin() + 12);
    auto s = prf(retrieved, pool.queries["q"]);
    EXPECT_NEAR(s.precision, 0.6, 1e-12);
    EXPECT_NEAR(s.recall, 0.75, 1e-12);
    EXPECT_NEAR(s.f1, 0.666667, 1e-6);

    SearchResult r;
    for (const auto& id : retrieved) r.hits.push_back({id, 1.0});
    auto pooled = pooled_prf({{"model", {{"q", r}}}, {"exact", {{"q", ranked({{"p0", 1}, {"p1", 1}})}}}}, pool);
    EXPECT_NEAR(pooled["model"].f1, 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(pooled["exact"].precision, 1.0, 1e-12);
    EXPECT_NEAR(pooled["exact"].recall, 0.25, 1e-12);
}

TEST(Prf, PerfectAndEmpty) {
    auto pool = pool_of({"a", "b"}, {"a", "b", "c"});
    auto perfect = prf({"a", "b"}, pool.queries["q"]);
    EXPECT_DOUBLE_EQ(perfect.precision, 1.0);
    EXPECT_DOUBLE_EQ(perfect.recall, 1.0);
    EXPECT_DOUBLE_EQ(perfect.f1, 1.0);
    auto none = prf({}, pool.queries["q"]);
    EXPECT_DOUBLE_EQ(none.precision, 0.0);
    EXPECT_DOUBLE_EQ(none.recall, 0.0);
    EXPECT_DOUBLE_EQ(none.f1, 0.0);
    // A method absent for a query counts as retrieving nothing.
    auto pooled = pooled_prf({{"m", {}}}, pool);
    EXPECT_DOUBLE_EQ(pooled["m"].precision, 0.0);
}

TEST(Prf, RetrievalOutsidePoolIsAnError) {
    auto pool = pool_of({"a"}, {"a", "b"});
    EXPECT_THROW(prf({"a", "zzz"}, pool.queries["q"]), InvalidArgument);
}

TEST(LabelPoolFile, Parse) {
    std::stringstream in(
        "{\"query_id\":\"q1\",\"positive_ids\":[\"a\",\"b\"],\"pool_ids\":[\"c\"]}\n"
        "\n"
        "{\"query_id\":\"q2\",\"positive_ids\":[]}\n");
    auto pool = LabelPool::read_jsonl(in);
    ASSERT_EQ(pool.queries.size(), 2u);
    EXPECT_EQ(pool.queries["q1"].judged->size(), 3u);
    EXPECT_FALSE(pool.queries["q2"].judged.has_value());
    std::stringstream bad("{\"query_id\":\"q\"}\n");
    EXPECT_THROW(LabelPool::read_jsonl(bad), ParseError);
}

TEST(Evaluate, MeansArePerQueryAverages) {
    MethodResults exact{{"q1", ranked({{"a", 1.0}, {"b", 0.5}})}, {"q2", ranked({{"c", 0.8}, {"d", 0.4}})}};
    MethodResults model{{"q1", ranked({{"b", 0}, {"a", 0}})}, {"q2", ranked({{"x", 0}, {"c", 0}})}};
    auto rep = evaluate(exact, model, {1, 2});
    ASSERT_EQ(rep.per_query.size(), 2u);
    EXPECT_DOUBLE_EQ(rep.mean_precision[0], 0.0);
    EXPECT_DOUBLE_EQ(rep.mean_precision[1], (1.0 + 0.5) / 2.0);
    double q2 = (0.8 / std::log2(3.0)) / (0.8 + 0.4 / std::log2(3.0));
    EXPECT_NEAR(rep.mean_ndcg[1], (0.859719 + q2) / 2.0, 1e-6);
    auto j = rep.to_json();
    EXPECT_EQ(j["queries"].size(), 2u);
    EXPECT_NE(rep.to_text().find("precision"), std::string::npos);
}

TEST(ResultsFile, RoundTrip) {
    auto r = ranked({{"a", 0.75}, {"b", 0.5}});
    std::stringstream buf;
    buf << result_to_json("q", r).dump() << "\n";
    auto back = read_results_jsonl(buf);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back["q"], r);
    std::stringstream bad("{\"results\":[]}\n");
    EXPECT_THROW(read_results_jsonl(bad), ParseError);
}

}  // namespace
}  // namespace lakejoin
