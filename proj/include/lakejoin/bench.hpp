#pragma once

#include "lakejoin/corpus.hpp"
#include "lakejoin/util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <string>
#include <tuple>
#include <unordered_set>
#include <vector>

#include <json.hpp>

namespace lakejoin {

/// Shape of a synthetic corpus. Background columns draw cells from a shared
/// vocabulary; each query gets `targets_per_query` planted target columns
/// that contain a chosen fraction of the query's cells.
struct CorpusSpec {
    std::size_t n_columns = 1000;
    std::size_t min_cells = 5;
    std::size_t max_cells = 50;
    std::size_t vocab_size = 100000;
    /// Zipf exponent of vocabulary draws; 0 gives uniform draws.
    double zipf_s = 0.0;
    std::size_t n_queries = 10;
    /// Query column size; 0 draws it like any other column.
    std::size_t query_cells = 0;
    std::size_t targets_per_query = 0;
    /// Planted joinabilities are spread evenly over [jn_min, jn_max].
    double jn_min = 0.5;
    double jn_max = 1.0;
    std::uint64_t seed = 1;

    void validate() const {
        if (min_cells == 0 || min_cells > max_cells) throw InvalidArgument("corpus spec: need 0 < min_cells <= max_cells");
        if (vocab_size < 2 * max_cells) throw InvalidArgument("corpus spec: vocab_size must be at least 2 * max_cells");
        if (n_queries * targets_per_query > n_columns) {
            throw InvalidArgument("corpus spec: more planted targets than columns");
        }
        if (!(jn_min >= 0.0 && jn_min <= jn_max && jn_max <= 1.0)) {
            throw InvalidArgument("corpus spec: need 0 <= jn_min <= jn_max <= 1");
        }
    }

    static CorpusSpec from_json(const nlohmann::json& j) {
        CorpusSpec s;
        s.n_columns = j.value("n_columns", s.n_columns);
        s.min_cells = j.value("min_cells", s.min_cells);
        s.max_cells = j.value("max_cells", s.max_cells);
        s.vocab_size = j.value("vocab_size", s.vocab_size);
        s.zipf_s = j.value("zipf_s", s.zipf_s);
        s.n_queries = j.value("n_queries", s.n_queries);
        s.query_cells = j.value("query_cells", s.query_cells);
        s.targets_per_query = j.value("targets_per_query", s.targets_per_query);
        s.jn_min = j.value("jn_min", s.jn_min);
        s.jn_max = j.value("jn_max", s.jn_max);
        s.seed = j.value("seed", s.seed);
        s.validate();
        return s;
    }

    nlohmann::json to_json() const {
        return {{"n_columns", n_columns}, {"min_cells", min_cells},   {"max_cells", max_cells},
                {"vocab_size", vocab_size}, {"zipf_s", zipf_s},       {"n_queries", n_queries},
                {"query_cells", query_cells}, {"targets_per_query", targets_per_query},
                {"jn_min", jn_min},         {"jn_max", jn_max},       {"seed", seed}};
    }
};

struct PlantedPair {
    std::string query_id;
    std::string target_id;
    double jn = 0.0;
};

struct SyntheticCorpus {
    Repository repository;
    std::vector<Column> queries;
    std::vector<PlantedPair> planted;
};

namespace detail {

inline std::string padded(char prefix, std::size_t i, std::size_t width) {
    std::string digits = std::to_string(i);
    if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
    return prefix + digits;
}

class VocabSampler {
public:
    VocabSampler(std::size_t n, double s) {
        if (s > 0.0) {
            cdf_.resize(n);
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += 1.0 / std::pow(static_cast<double>(i + 1), s);
                cdf_[i] = acc;
            }
            for (double& c : cdf_) c /= acc;
        }
        n_ = n;
    }

    std::size_t operator()(SplitMix& rng) const {
        if (cdf_.empty()) return rng.below(n_);
        double u = rng.uniform_open0();
        auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), n_ - 1);
    }

private:
    std::size_t n_ = 0;
    std::vector<double> cdf_;
};

}  // namespace detail

/// Generates a corpus deterministically from the spec. Column ids are
/// zero-padded ("t00042") so id order equals generation order; query cells
/// ("q3c7") never occur in the vocabulary, so a planted target's joinability
/// is exactly its share of query cells.
inline SyntheticCorpus generate(const CorpusSpec& spec) {
    spec.validate();
    detail::SplitMix rng(spec.seed);
    detail::VocabSampler vocab(spec.vocab_size, spec.zipf_s);
    const std::size_t width = std::to_string(std::max<std::size_t>(spec.n_columns, 1)).size();
    const std::size_t qwidth = std::to_string(std::max<std::size_t>(spec.n_queries, 1)).size();

    auto draw_size = [&] { return spec.min_cells + rng.below(spec.max_cells - spec.min_cells + 1); };
    auto fill_vocab = [&](std::vector<std::string>& cells, std::unordered_set<std::size_t>& used, std::size_t n) {
        while (cells.size() < n) {
            auto v = vocab(rng);
            if (used.insert(v).second) cells.push_back("v" + std::to_string(v));
        }
    };

    SyntheticCorpus out;
    std::vector<std::vector<std::string>> query_cells(spec.n_queries);
    for (std::size_t qi = 0; qi < spec.n_queries; ++qi) {
        std::size_t n = spec.query_cells ? spec.query_cells : draw_size();
        for (std::size_t j = 0; j < n; ++j) query_cells[qi].push_back("q" + std::to_string(qi) + "c" + std::to_string(j));
        out.queries.emplace_back(detail::padded('q', qi, qwidth), query_cells[qi]);
    }

    // Planted targets occupy a seeded random subset of the column slots.
    std::vector<std::size_t> slots(spec.n_columns);
    for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
    detail::shuffle(slots, rng);
    std::vector<long long> plant_of(spec.n_columns, -1);
    const std::size_t planted_total = spec.n_queries * spec.targets_per_query;
    for (std::size_t p = 0; p < planted_total; ++p) plant_of[slots[p]] = static_cast<long long>(p);

    std::vector<Column> cols;
    cols.reserve(spec.n_columns);
    for (std::size_t i = 0; i < spec.n_columns; ++i) {
        std::vector<std::string> cells;
        std::unordered_set<std::size_t> used;
        std::string id = detail::padded('t', i, width);
        if (plant_of[i] >= 0) {
            auto p = static_cast<std::size_t>(plant_of[i]);
            std::size_t qi = p / spec.targets_per_query;
            std::size_t slot = p % spec.targets_per_query;
            double target = spec.targets_per_query == 1
                                ? spec.jn_max
                                : spec.jn_max - (spec.jn_max - spec.jn_min) * static_cast<double>(slot) /
                                                    static_cast<double>(spec.targets_per_query - 1);
            const auto& qc = query_cells[qi];
            auto shared = static_cast<std::size_t>(std::llround(target * static_cast<double>(qc.size())));
            std::vector<std::string> pick = qc;
            detail::shuffle(pick, rng);
            pick.resize(shared);
            cells = pick;
            std::size_t size = std::max(draw_size(), std::max<std::size_t>(shared, spec.min_cells));
            fill_vocab(cells, used, size);
            detail::shuffle(cells, rng);
            out.planted.push_back({out.queries[qi].id(), id,
                                   static_cast<double>(shared) / static_cast<double>(qc.size())});
        } else {
            fill_vocab(cells, used, draw_size());
        }
        cols.emplace_back(std::move(id), std::move(cells));
    }
    out.repository = Repository(std::move(cols));
    std::sort(out.planted.begin(), out.planted.end(), [](const PlantedPair& a, const PlantedPair& b) {
        return std::tie(a.query_id, a.target_id) < std::tie(b.query_id, b.target_id);
    });
    return out;
}

/// Per-query latency summary in milliseconds. For embedding methods the
/// encode phase (text rendering and query embedding) is reported apart from
/// the search phase; total = encode + search for every sample.
struct LatencyStats {
    std::size_t queries = 0;
    std::size_t repeats = 0;
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    double encode_mean_ms = 0.0;
    double search_mean_ms = 0.0;
    double search_p50_ms = 0.0;

    nlohmann::json to_json() const {
        return {{"queries", queries},         {"repeats", repeats},
                {"mean_ms", mean_ms},         {"p50_ms", p50_ms},
                {"p95_ms", p95_ms},           {"encode_mean_ms", encode_mean_ms},
                {"search_mean_ms", search_mean_ms}, {"search_p50_ms", search_p50_ms}};
    }
};

namespace detail {

inline double percentile(std::vector<double> v, double p) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size()))) ;
    idx = std::clamp<std::size_t>(idx, 1, v.size()) - 1;
    return v[idx];
}

}  // namespace detail

/// Wall-clock timing of `search(encode(query))` over every query,
/// `repeats` times each, after one untimed warm-up call on the first query.
template <typename Query, typename Encode, typename Search>
LatencyStats time_search(const std::vector<Query>& queries, Encode&& encode, Search&& search, std::size_t repeats = 1) {
    using clock = std::chrono::steady_clock;
    LatencyStats st;
    st.queries = queries.size();
    st.repeats = std::max<std::size_t>(repeats, 1);
    if (queries.empty()) return st;
    {
        auto enc = encode(queries.front());
        [[maybe_unused]] auto r = search(enc);
    }
    std::vector<double> total, enc_t, search_t;
    for (std::size_t rep = 0; rep < st.repeats; ++rep) {
        for (const auto& q : queries) {
            auto t0 = clock::now();
            auto enc = encode(q);
            auto t1 = clock::now();
            [[maybe_unused]] auto r = search(enc);
            auto t2 = clock::now();
            double e = std::chrono::duration<double, std::milli>(t1 - t0).count();
            double s = std::chrono::duration<double, std::milli>(t2 - t1).count();
            enc_t.push_back(e);
            search_t.push_back(s);
            total.push_back(e + s);
        }
    }
    auto mean = [](const std::vector<double>& v) {
        double a = 0.0;
        for (double x : v) a += x;
        return a / static_cast<double>(v.size());
    };
    st.mean_ms = mean(total);
    st.p50_ms = detail::percentile(total, 0.5);
    st.p95_ms = detail::percentile(total, 0.95);
    st.encode_mean_ms = mean(enc_t);
    st.search_mean_ms = mean(search_t);
    st.search_p50_ms = detail::percentile(search_t, 0.5);
    return st;
}

}  // namespace lakejoin
