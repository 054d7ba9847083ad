#pragma once

#include "lakejoin/corpus.hpp"
#include "lakejoin/embed.hpp"
#include "lakejoin/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace lakejoin {

/// One ranked column. `score` is a joinability in [0, 1] for the exact and
/// sketch searches.
struct Hit {
    std::string id;
    double score = 0.0;

    bool operator==(const Hit&) const = default;
};

/// Ranked hits: scores non-increasing, ties by ascending id, no duplicates.
struct SearchResult {
    std::vector<Hit> hits;

    std::size_t size() const { return hits.size(); }
    bool empty() const { return hits.empty(); }
    const Hit& operator[](std::size_t i) const { return hits[i]; }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        out.reserve(hits.size());
        for (const auto& h : hits) out.push_back(h.id);
        return out;
    }

    bool operator==(const SearchResult&) const = default;
};

/// Ordering used by every ranked result in the library.
inline bool ranks_before(const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

struct SearchQuery {
    Column query;
    std::size_t k = 10;
};

/// Vector matching parameters for semantic joins: two cells match when
/// their embeddings are within Euclidean distance `tau`.
struct MatchConfig {
    double tau = 0.0;
    CellEmbedder* cell_embedder = nullptr;
};

// ---------------------------------------------------------------------------
// Joinability

/// Fraction of query cells that have an equal cell in `x`.
inline double equi_joinability(const Column& q, const Column& x) {
    if (q.size() == 0) throw InvalidArgument("equi_joinability: empty query");
    std::unordered_set<std::string_view> target(x.cells().begin(), x.cells().end());
    std::size_t hit = 0;
    for (const auto& c : q.cells()) hit += target.contains(c);
    return static_cast<double>(hit) / static_cast<double>(q.size());
}

namespace detail {

inline void check_match_config(const MatchConfig& cfg) {
    if (!(cfg.tau >= 0.0)) throw InvalidArgument("tau must be non-negative");
    if (cfg.cell_embedder == nullptr) throw InvalidArgument("semantic join requires a cell embedder");
}

/// Match predicate shared by every semantic code path so that the scan,
/// the pruned search and the tests agree bit for bit.
inline bool within(const double* a, const double* b, std::size_t dim, double tau) {
    return std::sqrt(squared_l2(a, b, dim)) <= tau;
}

}  // namespace detail

/// Fraction of query cells whose embedding has at least one cell embedding
/// of `x` within `cfg.tau`. Not symmetric in general.
inline double semantic_joinability(const Column& q, const Column& x, const MatchConfig& cfg) {
    if (q.size() == 0) throw InvalidArgument("semantic_joinability: empty query");
    detail::check_match_config(cfg);
    std::vector<EmbeddingVector> xv;
    xv.reserve(x.size());
    for (const auto& c : x.cells()) xv.push_back(cfg.cell_embedder->embed_cell(c));
    std::size_t hit = 0;
    for (const auto& c : q.cells()) {
        auto qv = cfg.cell_embedder->embed_cell(c);
        for (const auto& v : xv) {
            detail::check_dims(qv.dim(), v.dim());
            if (detail::within(qv.data(), v.data(), qv.dim(), cfg.tau)) {
                ++hit;
                break;
            }
        }
    }
    return static_cast<double>(hit) / static_cast<double>(q.size());
}

namespace detail {

/// Keeps the best k (count, position) pairs: higher count first, then lower
/// position. Positions follow ascending column id.
class TopCounts {
public:
    explicit TopCounts(std::size_t k) : k_(k) {}

    bool full() const { return heap_.size() >= k_; }
    std::size_t size() const { return heap_.size(); }

    /// The entry that would be evicted next.
    std::pair<std::size_t, std::size_t> worst() const { return heap_.top(); }

    /// True if (count, pos) would enter the current top-k.
    bool admits(std::size_t count, std::size_t pos) const {
        if (!full()) return true;
        auto [wc, wp] = heap_.top();
        return count > wc || (count == wc && pos < wp);
    }

    void offer(std::size_t count, std::size_t pos) {
        if (k_ == 0 || !admits(count, pos)) return;
        if (full()) heap_.pop();
        heap_.emplace(count, pos);
    }

    /// Drains into best-first order.
    std::vector<std::pair<std::size_t, std::size_t>> take() {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        while (!heap_.empty()) {
            out.push_back(heap_.top());
            heap_.pop();
        }
        std::reverse(out.begin(), out.end());
        return out;
    }

private:
    struct WorseOnTop {
        // Priority is "goodness reversed": the worst element sits on top.
        bool operator()(const std::pair<std::size_t, std::size_t>& a,
                        const std::pair<std::size_t, std::size_t>& b) const {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        }
    };
    std::size_t k_;
    std::priority_queue<std::pair<std::size_t, std::size_t>, std::vector<std::pair<std::size_t, std::size_t>>,
                        WorseOnTop>
        heap_;
};

/// Converts drained (count, pos) pairs into a SearchResult and pads with
/// zero-score columns in ascending id order when fewer than k matched.
inline SearchResult finish_topk(std::vector<std::pair<std::size_t, std::size_t>> best, const Repository& repo,
                                std::size_t query_size, std::size_t k) {
    SearchResult r;
    std::vector<char> taken(repo.size(), 0);
    for (auto [count, pos] : best) {
        r.hits.push_back({repo[pos].id(), static_cast<double>(count) / static_cast<double>(query_size)});
        taken[pos] = 1;
    }
    for (std::size_t pos = 0; pos < repo.size() && r.hits.size() < k; ++pos) {
        if (!taken[pos]) r.hits.push_back({repo[pos].id(), 0.0});
    }
    return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Exact equi-join search

/// Inverted index over a repository for exact overlap search. Cells are
/// interned as tokens ranked by ascending document frequency (the global
/// order used for prefix filtering); each column is kept as a sorted token
/// list for verification.
class EquiIndex {
public:
    explicit EquiIndex(const Repository& repo) : repo_(&repo) {
        std::vector<std::pair<std::uint32_t, std::string_view>> vocab;
        vocab.reserve(repo.doc_freq().size());
        for (const auto& [cell, df] : repo.doc_freq()) vocab.emplace_back(df, cell);
        std::sort(vocab.begin(), vocab.end());
        token_of_.reserve(vocab.size());
        for (std::uint32_t t = 0; t < vocab.size(); ++t) token_of_.emplace(std::string(vocab[t].second), t);

        postings_.assign(vocab.size(), {});
        column_tokens_.resize(repo.size());
        for (std::size_t pos = 0; pos < repo.size(); ++pos) {
            auto& toks = column_tokens_[pos];
            toks.reserve(repo[pos].size());
            for (const auto& cell : repo[pos].cells()) toks.push_back(token_of_.find(cell)->second);
            std::sort(toks.begin(), toks.end());
            for (auto t : toks) postings_[t].push_back(static_cast<std::uint32_t>(pos));
        }
    }

    const Repository& repository() const { return *repo_; }

    /// Exact top-k by equi-joinability, identical to a linear scan. Query
    /// tokens are probed in global order; a column first met at probe i can
    /// overlap the query in at most |Q| - i cells, which bounds both the
    /// candidates worth verifying and when the probing can stop.
    SearchResult topk(const Column& q, std::size_t k) const {
        if (q.size() == 0) throw InvalidArgument("exact_equi_topk: empty query");
        if (k == 0) throw InvalidArgument("k must be at least 1");
        const std::size_t qsize = q.size();
        auto probe = sorted_query_tokens(q);
        std::size_t unknown = qsize - probe.size();

        detail::TopCounts top(k);
        std::vector<char> seen(repo_->size(), 0);
        for (std::size_t j = 0; j < probe.size(); ++j) {
            const std::size_t bound = qsize - (unknown + j);
            if (top.full() && bound < top.worst().first) break;
            for (auto pos : postings_[probe[j]]) {
                if (seen[pos]) continue;
                seen[pos] = 1;
                std::size_t ub = std::min(bound, column_tokens_[pos].size());
                if (!top.admits(ub, pos)) continue;
                top.offer(overlap(probe, column_tokens_[pos]), pos);
            }
        }
        return detail::finish_topk(top.take(), *repo_, qsize, k);
    }

    /// All columns x with equi_joinability(q, x) >= t, as (position, overlap)
    /// in ascending position. Only the first |Q| - c + 1 query tokens in
    /// global order are probed, where c is the smallest passing overlap.
    std::vector<std::pair<std::size_t, std::size_t>> threshold(const Column& q, double t) const {
        if (q.size() == 0) throw InvalidArgument("threshold search: empty query");
        const std::size_t qsize = q.size();
        std::size_t need = static_cast<std::size_t>(std::max(0.0, std::ceil(t * static_cast<double>(qsize))));
        while (need > 0 && static_cast<double>(need - 1) / static_cast<double>(qsize) >= t) --need;
        while (need <= qsize && static_cast<double>(need) / static_cast<double>(qsize) < t) ++need;

        std::vector<std::pair<std::size_t, std::size_t>> out;
        if (need > qsize) return out;
        if (need == 0) {
            auto probe = sorted_query_tokens(q);
            for (std::size_t pos = 0; pos < repo_->size(); ++pos) {
                out.emplace_back(pos, overlap(probe, column_tokens_[pos]));
            }
            return out;
        }
        auto probe = sorted_query_tokens(q);
        std::size_t unknown = qsize - probe.size();
        std::size_t prefix = qsize - need + 1;
        std::vector<std::uint32_t> candidates;
        for (std::size_t j = 0; j + unknown < prefix && j < probe.size(); ++j) {
            const auto& plist = postings_[probe[j]];
            candidates.insert(candidates.end(), plist.begin(), plist.end());
        }
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
        for (auto pos : candidates) {
            if (column_tokens_[pos].size() < need) continue;
            std::size_t ov = overlap(probe, column_tokens_[pos]);
            if (ov >= need) out.emplace_back(pos, ov);
        }
        return out;
    }

private:
    /// Known query tokens sorted by token id, which is the global order.
    std::vector<std::uint32_t> sorted_query_tokens(const Column& q) const {
        std::vector<std::uint32_t> toks;
        toks.reserve(q.size());
        for (const auto& cell : q.cells()) {
            auto it = token_of_.find(cell);
            if (it != token_of_.end()) toks.push_back(it->second);
        }
        std::sort(toks.begin(), toks.end());
        return toks;
    }

    static std::size_t overlap(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
        std::size_t i = 0, j = 0, n = 0;
        while (i < a.size() && j < b.size()) {
            if (a[i] < b[j]) ++i;
            else if (b[j] < a[i]) ++j;
            else {
                ++n;
                ++i;
                ++j;
            }
        }
        return n;
    }

    const Repository* repo_;
    std::unordered_map<std::string, std::uint32_t, StringHash, std::equal_to<>> token_of_;
    std::vector<std::vector<std::uint32_t>> postings_;
    std::vector<std::vector<std::uint32_t>> column_tokens_;
};

/// Exact top-k equi-joinable columns. k larger than the repository returns
/// every column.
inline SearchResult exact_equi_topk(const SearchQuery& q, const Repository& repo) {
    if (repo.empty()) return {};
    return EquiIndex(repo).topk(q.query, q.k);
}

// ---------------------------------------------------------------------------
// Exact semantic-join search

struct SemanticIndexOptions {
    /// Number of pivots for triangle-inequality pruning; 0 disables it.
    std::size_t pivots = 8;
    std::size_t pivot_sample = 1000;
    std::uint64_t seed = 42;
};

/// Cell embeddings of a repository, computed once per distinct cell value,
/// with optional pivot distances for pruning. Pruning only skips distance
/// computations whose lower bound already exceeds tau, so results never
/// depend on it.
class SemanticIndex {
public:
    SemanticIndex(const Repository& repo, const MatchConfig& cfg, SemanticIndexOptions opt = {})
        : repo_(&repo), cfg_(cfg) {
        detail::check_match_config(cfg);
        std::unordered_map<std::string_view, std::uint32_t> vec_of;
        column_vecs_.resize(repo.size());
        for (std::size_t pos = 0; pos < repo.size(); ++pos) {
            for (const auto& cell : repo[pos].cells()) {
                auto [it, inserted] = vec_of.try_emplace(cell, static_cast<std::uint32_t>(vec_of.size()));
                if (inserted) add_vector(cfg.cell_embedder->embed_cell(cell));
                column_vecs_[pos].push_back(it->second);
            }
        }
        if (opt.pivots > 0 && count_ > 0) choose_pivots(opt);
    }

    std::size_t dim() const { return dim_; }
    std::size_t pivot_count() const { return pivots_.size(); }
    const Repository& repository() const { return *repo_; }
    const MatchConfig& config() const { return cfg_; }

    /// Exact top-k by semantic joinability, identical to a linear scan.
    /// Columns are scanned in id order and a column is abandoned as soon as
    /// its matched-plus-remaining count cannot beat the current k-th entry.
    SearchResult topk(const Column& q, std::size_t k, bool use_pivots = true) const {
        if (q.size() == 0) throw InvalidArgument("exact_semantic_topk: empty query");
        if (k == 0) throw InvalidArgument("k must be at least 1");
        auto qv = embed_query(q);
        std::vector<double> qpiv = pivot_distances(qv);
        const bool prune = use_pivots && !pivots_.empty();
        const std::size_t qsize = q.size();

        detail::TopCounts top(k);
        for (std::size_t pos = 0; pos < repo_->size(); ++pos) {
            std::size_t floor = 0;
            if (top.full()) {
                // Later positions only enter with a strictly larger count.
                floor = top.worst().first;
                if (qsize <= floor) break;
            }
            std::size_t matched = 0;
            bool abandoned = false;
            for (std::size_t i = 0; i < qsize; ++i) {
                if (top.full() && matched + (qsize - i) <= floor) {
                    abandoned = true;
                    break;
                }
                if (matches(qv, qpiv, i, column_vecs_[pos], prune)) ++matched;
            }
            if (!abandoned) top.offer(matched, pos);
        }
        return detail::finish_topk(top.take(), *repo_, qsize, k);
    }

    /// All columns whose semantic joinability with `q` is at least `t`, as
    /// (position, matched count) in ascending position. A column is dropped
    /// as soon as the cells left cannot reach the required count.
    std::vector<std::pair<std::size_t, std::size_t>> threshold(const Column& q, double t,
                                                               bool use_pivots = true) const {
        if (q.size() == 0) throw InvalidArgument("threshold search: empty query");
        auto qv = embed_query(q);
        auto qpiv = pivot_distances(qv);
        const bool prune = use_pivots && !pivots_.empty();
        const std::size_t qsize = q.size();
        std::size_t need = 0;
        while (need <= qsize && static_cast<double>(need) / static_cast<double>(qsize) < t) ++need;

        std::vector<std::pair<std::size_t, std::size_t>> out;
        if (need > qsize) return out;
        for (std::size_t pos = 0; pos < repo_->size(); ++pos) {
            std::size_t matched = 0;
            for (std::size_t i = 0; i < qsize && matched + (qsize - i) >= need; ++i) {
                matched += matches(qv, qpiv, i, column_vecs_[pos], prune);
            }
            if (matched >= need) out.emplace_back(pos, matched);
        }
        return out;
    }

    /// Semantic joinability of `q` against the column at `pos`.
    double joinability(const Column& q, std::size_t pos, bool use_pivots = true) const {
        auto qv = embed_query(q);
        auto qpiv = pivot_distances(qv);
        std::size_t matched = 0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            matched += matches(qv, qpiv, i, column_vecs_[pos], use_pivots && !pivots_.empty());
        }
        return static_cast<double>(matched) / static_cast<double>(q.size());
    }

    /// Number of exact distance computations performed so far (pruning
    /// effectiveness counter; not synchronized).
    std::size_t distance_evaluations() const { return distance_evals_; }

private:
    void add_vector(const EmbeddingVector& v) {
        if (count_ == 0) dim_ = v.dim();
        detail::check_dims(dim_, v.dim());
        vectors_.insert(vectors_.end(), v.values().begin(), v.values().end());
        ++count_;
    }

    const double* vec(std::size_t i) const { return vectors_.data() + i * dim_; }

    std::vector<double> embed_query(const Column& q) const {
        std::vector<double> out;
        out.reserve(q.size() * dim_);
        for (const auto& cell : q.cells()) {
            auto v = cfg_.cell_embedder->embed_cell(cell);
            detail::check_dims(dim_, v.dim());
            out.insert(out.end(), v.values().begin(), v.values().end());
        }
        return out;
    }

    std::vector<double> pivot_distances(const std::vector<double>& qv) const {
        const std::size_t p = pivots_.size();
        if (p == 0 || dim_ == 0) return {};
        std::size_t n = qv.size() / dim_;
        std::vector<double> out(n * p);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < p; ++j) {
                out[i * p + j] = std::sqrt(detail::squared_l2(qv.data() + i * dim_, pivots_[j].data(), dim_));
            }
        }
        return out;
    }

    bool matches(const std::vector<double>& qv, const std::vector<double>& qpiv, std::size_t i,
                 const std::vector<std::uint32_t>& target, bool prune) const {
        const double* a = qv.data() + i * dim_;
        const std::size_t p = pivots_.size();
        for (auto t : target) {
            if (prune) {
                const double* qd = qpiv.data() + i * p;
                const double* td = pivot_dist_.data() + static_cast<std::size_t>(t) * p;
                bool skip = false;
                for (std::size_t j = 0; j < p; ++j) {
                    // Slack keeps rounding in the triangle inequality from
                    // discarding a pair whose distance equals tau.
                    if (std::abs(qd[j] - td[j]) > cfg_.tau + 1e-9) {
                        skip = true;
                        break;
                    }
                }
                if (skip) continue;
            }
            ++distance_evals_;
            if (detail::within(a, vec(t), dim_, cfg_.tau)) return true;
        }
        return false;
    }

    /// Farthest-first traversal over a seeded sample of the cell vectors.
    void choose_pivots(const SemanticIndexOptions& opt) {
        detail::SplitMix rng(opt.seed);
        std::vector<std::size_t> sample(count_);
        std::iota(sample.begin(), sample.end(), std::size_t{0});
        detail::shuffle(sample, rng);
        if (sample.size() > opt.pivot_sample) sample.resize(opt.pivot_sample);

        std::vector<double> nearest(sample.size(), std::numeric_limits<double>::infinity());
        std::size_t next = 0;
        for (std::size_t p = 0; p < opt.pivots && p < sample.size(); ++p) {
            const double* pv = vec(sample[next]);
            pivots_.emplace_back(pv, pv + dim_);
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t s = 0; s < sample.size(); ++s) {
                double d = std::sqrt(detail::squared_l2(pv, vec(sample[s]), dim_));
                nearest[s] = std::min(nearest[s], d);
                if (nearest[s] > far_d) {
                    far_d = nearest[s];
                    far = s;
                }
            }
            if (far_d <= 0.0) break;
            next = far;
        }
        const std::size_t pc = pivots_.size();
        pivot_dist_.resize(count_ * pc);
        for (std::size_t i = 0; i < count_; ++i) {
            for (std::size_t j = 0; j < pc; ++j) {
                pivot_dist_[i * pc + j] = std::sqrt(detail::squared_l2(vec(i), pivots_[j].data(), dim_));
            }
        }
    }

    const Repository* repo_;
    MatchConfig cfg_;
    std::size_t dim_ = 0;
    std::size_t count_ = 0;
    std::vector<double> vectors_;
    std::vector<std::vector<std::uint32_t>> column_vecs_;
    std::vector<std::vector<double>> pivots_;
    std::vector<double> pivot_dist_;
    mutable std::size_t distance_evals_ = 0;
};

/// Exact top-k semantic-joinable columns.
inline SearchResult exact_semantic_topk(const SearchQuery& q, const Repository& repo, const MatchConfig& cfg,
                                        SemanticIndexOptions opt = {}) {
    if (repo.empty()) return {};
    return SemanticIndex(repo, cfg, opt).topk(q.query, q.k, opt.pivots > 0);
}

}  // namespace lakejoin
