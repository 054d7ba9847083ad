#pragma once

#include "lakejoin/embed.hpp"
#include "lakejoin/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <string_view>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lakejoin {

struct HnswParams {
    /// Maximum out-degree on layers above 0.
    std::size_t m = 16;
    /// Maximum out-degree on layer 0; 0 means 2 * m.
    std::size_t m0 = 0;
    std::size_t ef_construction = 200;
    std::size_t ef_search = 50;
    /// Level multiplier mL; 0 means 1 / ln(m).
    double level_mult = 0.0;
    std::uint64_t seed = 100;
    /// Store vectors unit-normalized so Euclidean order equals cosine order.
    bool normalize = true;

    std::size_t max_degree0() const { return m0 ? m0 : 2 * m; }
    double mult() const { return level_mult > 0.0 ? level_mult : 1.0 / std::log(static_cast<double>(m)); }

    void validate() const {
        if (m < 2) throw InvalidArgument("hnsw: m must be at least 2");
        if (ef_construction < m) throw InvalidArgument("hnsw: ef_construction must be at least m");
        if (max_degree0() < m) throw InvalidArgument("hnsw: m0 must be at least m");
    }
};

struct Neighbor {
    std::string id;
    double distance = 0.0;

    bool operator==(const Neighbor&) const = default;
};

/// Hierarchical navigable small world graph over fixed-length vectors.
///
/// Nodes are inserted one at a time. Each node draws a top level
/// floor(-ln(U) * mL); it is linked on every layer up to that level to
/// neighbors chosen by the diversity heuristic (a candidate is kept only if
/// it is closer to the new node than to every neighbor already kept), and
/// lists that overflow their degree bound are re-pruned the same way.
/// An id whose stored vector is bit-identical to an existing node's becomes
/// an alias of that node and is returned alongside it.
///
/// Construction is single-writer. Once built, knn() may be called
/// concurrently.
class HnswIndex {
public:
    HnswIndex() = default;

    HnswIndex(std::size_t dim, HnswParams params) : params_(params), dim_(dim), rng_(params.seed) {
        params_.validate();
    }

    /// Number of indexed ids, aliases included.
    std::size_t size() const { return count_; }
    bool empty() const { return count_ == 0; }
    /// Number of graph nodes.
    std::size_t node_count() const { return ids_.size(); }
    std::size_t dim() const { return dim_; }
    const HnswParams& params() const { return params_; }
    int max_level() const { return max_level_; }
    std::uint32_t entry_point() const { return entry_; }
    const std::string& id(std::uint32_t node) const { return ids_[node]; }
    const std::vector<std::string>& aliases(std::uint32_t node) const { return aliases_[node]; }
    int level(std::uint32_t node) const { return static_cast<int>(links_[node].size()) - 1; }
    const std::vector<std::uint32_t>& neighbors(std::uint32_t node, int layer) const { return links_[node][layer]; }
    std::span<const double> vector(std::uint32_t node) const { return {vec(node), dim_}; }

    /// Free-form metadata persisted with the index (the CLI stores how
    /// queries must be encoded).
    std::string metadata;

    void reserve(std::size_t n) {
        ids_.reserve(n);
        aliases_.reserve(n);
        vectors_.reserve(n * dim_);
        links_.reserve(n);
    }

    void add(std::string id, const EmbeddingVector& v) {
        detail::check_dims(dim_, v.dim());
        if (v.is_zero()) throw InvalidArgument("hnsw: cannot index a zero vector ('" + id + "')");
        if (id_set_.contains(id)) throw InvalidArgument("hnsw: duplicate id '" + id + "'");
        EmbeddingVector stored = params_.normalize ? normalize(v) : v;
        const std::uint64_t key = content_key(stored.data());
        if (auto twin = find_identical(key, stored.data())) {
            id_set_.emplace(id, *twin);
            aliases_[*twin].push_back(std::move(id));
            ++count_;
            return;
        }
        const auto node = static_cast<std::uint32_t>(ids_.size());
        id_set_.emplace(id, node);
        by_content_.emplace(key, node);
        ids_.push_back(std::move(id));
        aliases_.emplace_back();
        ++count_;
        vectors_.insert(vectors_.end(), stored.values().begin(), stored.values().end());
        const int lvl = draw_level();
        links_.emplace_back(static_cast<std::size_t>(lvl) + 1);
        visited_.grow(ids_.size());

        if (node == 0) {
            entry_ = 0;
            max_level_ = lvl;
            return;
        }

        const double* q = vec(node);
        std::uint32_t ep = entry_;
        for (int layer = max_level_; layer > lvl; --layer) ep = greedy_closest(q, ep, layer);

        for (int layer = std::min(lvl, max_level_); layer >= 0; --layer) {
            auto found = search_layer(q, {ep}, params_.ef_construction, layer);
            // `found` is ascending by distance; its head seeds the next layer.
            ep = found.front().second;
            auto chosen = select_neighbors(found, params_.m);
            auto& mine = links_[node][layer];
            mine.reserve(chosen.size());
            for (const auto& c : chosen) mine.push_back(c.second);
            const std::size_t cap = layer == 0 ? params_.max_degree0() : params_.m;
            for (const auto& c : chosen) link_back(c.second, node, c.first, layer, cap);
        }
        if (lvl > max_level_) {
            max_level_ = lvl;
            entry_ = node;
        }
    }

    /// Up to k approximate nearest neighbors by Euclidean distance, sorted by
    /// ascending distance and then ascending id.
    std::vector<Neighbor> knn(const EmbeddingVector& query, std::size_t k, std::size_t ef_search = 0) const {
        if (k == 0) throw InvalidArgument("knn: k must be at least 1");
        if (ids_.empty()) return {};
        detail::check_dims(dim_, query.dim());
        EmbeddingVector q = (params_.normalize && !query.is_zero()) ? normalize(query) : query;
        const std::size_t ef = std::max(ef_search ? ef_search : params_.ef_search, k);

        std::uint32_t ep = entry_;
        for (int layer = max_level_; layer > 0; --layer) ep = greedy_closest(q.data(), ep, layer);
        auto found = search_layer(q.data(), {ep}, ef, 0);

        std::vector<Neighbor> out;
        out.reserve(found.size());
        for (const auto& [d2, node] : found) {
            const double d = std::sqrt(d2);
            out.push_back({ids_[node], d});
            for (const auto& alias : aliases_[node]) out.push_back({alias, d});
        }
        std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
            if (a.distance != b.distance) return a.distance < b.distance;
            return a.id < b.id;
        });
        if (out.size() > k) out.resize(k);
        return out;
    }

    // Binary format: "LJH1", u32 version, params, metadata, dim, node count,
    // entry point, max level, then per node its id, aliases, vector, level
    // and the adjacency list of each layer.
    static constexpr std::string_view kMagic = "LJH1";
    static constexpr std::uint32_t kVersion = 1;

    void save(std::ostream& out) const {
        using namespace detail;
        out.write(kMagic.data(), kMagic.size());
        write_pod<std::uint32_t>(out, kVersion);
        write_pod<std::uint64_t>(out, params_.m);
        write_pod<std::uint64_t>(out, params_.max_degree0());
        write_pod<std::uint64_t>(out, params_.ef_construction);
        write_pod<std::uint64_t>(out, params_.ef_search);
        write_pod<double>(out, params_.mult());
        write_pod<std::uint64_t>(out, params_.seed);
        write_pod<std::uint8_t>(out, params_.normalize ? 1 : 0);
        write_string(out, metadata);
        write_pod<std::uint64_t>(out, dim_);
        write_pod<std::uint64_t>(out, ids_.size());
        write_pod<std::uint32_t>(out, entry_);
        write_pod<std::int32_t>(out, max_level_);
        for (std::uint32_t n = 0; n < ids_.size(); ++n) {
            write_string(out, ids_[n]);
            write_pod<std::uint64_t>(out, aliases_[n].size());
            for (const auto& a : aliases_[n]) write_string(out, a);
            out.write(reinterpret_cast<const char*>(vec(n)), static_cast<std::streamsize>(dim_ * sizeof(double)));
            write_pod<std::int32_t>(out, level(n));
            for (const auto& layer : links_[n]) {
                write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(layer.size()));
                out.write(reinterpret_cast<const char*>(layer.data()),
                          static_cast<std::streamsize>(layer.size() * sizeof(std::uint32_t)));
            }
        }
    }

    static HnswIndex load(std::istream& in) {
        using namespace detail;
        expect_magic(in, kMagic);
        auto version = read_pod<std::uint32_t>(in);
        if (version != kVersion) throw FormatError("unsupported index version " + std::to_string(version));
        HnswParams p;
        p.m = read_pod<std::uint64_t>(in);
        p.m0 = read_pod<std::uint64_t>(in);
        p.ef_construction = read_pod<std::uint64_t>(in);
        p.ef_search = read_pod<std::uint64_t>(in);
        p.level_mult = read_pod<double>(in);
        p.seed = read_pod<std::uint64_t>(in);
        p.normalize = read_pod<std::uint8_t>(in) != 0;
        try {
            p.validate();
        } catch (const InvalidArgument& e) {
            throw FormatError(std::string("corrupt index parameters: ") + e.what());
        }
        HnswIndex idx(0, p);
        idx.metadata = read_string(in);
        idx.dim_ = read_pod<std::uint64_t>(in);
        auto n = read_pod<std::uint64_t>(in);
        if (idx.dim_ > (1u << 20) || n > (1ULL << 32)) throw FormatError("corrupt index header");
        idx.entry_ = read_pod<std::uint32_t>(in);
        idx.max_level_ = read_pod<std::int32_t>(in);
        if (n > 0 && (idx.entry_ >= n || idx.max_level_ < 0 || idx.max_level_ > 64)) {
            throw FormatError("corrupt entry point");
        }
        idx.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            auto id = read_string(in);
            if (!idx.id_set_.emplace(id, static_cast<std::uint32_t>(i)).second) {
                throw FormatError("duplicate id in index file");
            }
            idx.ids_.push_back(std::move(id));
            auto n_alias = read_pod<std::uint64_t>(in);
            if (n_alias > (1ULL << 32)) throw FormatError("corrupt alias count");
            auto& node_aliases = idx.aliases_.emplace_back();
            for (std::uint64_t a = 0; a < n_alias; ++a) {
                auto alias = read_string(in);
                if (!idx.id_set_.emplace(alias, static_cast<std::uint32_t>(i)).second) {
                    throw FormatError("duplicate id in index file");
                }
                node_aliases.push_back(std::move(alias));
            }
            idx.count_ += 1 + n_alias;
            std::size_t off = idx.vectors_.size();
            idx.vectors_.resize(off + idx.dim_);
            in.read(reinterpret_cast<char*>(idx.vectors_.data() + off),
                    static_cast<std::streamsize>(idx.dim_ * sizeof(double)));
            if (!in) throw FormatError("unexpected end of file");
            idx.by_content_.emplace(idx.content_key(idx.vec(static_cast<std::uint32_t>(i))), static_cast<std::uint32_t>(i));
            auto lvl = read_pod<std::int32_t>(in);
            if (lvl < 0 || lvl > idx.max_level_) throw FormatError("corrupt node level");
            auto& node_links = idx.links_.emplace_back(static_cast<std::size_t>(lvl) + 1);
            for (auto& layer : node_links) {
                auto deg = read_pod<std::uint32_t>(in);
                if (deg > std::max(p.m0, p.m)) throw FormatError("corrupt adjacency list");
                layer.resize(deg);
                in.read(reinterpret_cast<char*>(layer.data()),
                        static_cast<std::streamsize>(deg * sizeof(std::uint32_t)));
                if (!in) throw FormatError("unexpected end of file");
                for (auto nb : layer) {
                    if (nb >= n) throw FormatError("adjacency references unknown node");
                }
            }
        }
        if (n > 0 && idx.level(idx.entry_) != idx.max_level_) throw FormatError("corrupt entry point level");
        idx.visited_.grow(n);
        return idx;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write " + path);
        save(out);
        if (!out) throw Error("write failed: " + path);
    }

    static HnswIndex load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot open " + path);
        return load(in);
    }

    HnswIndex(HnswIndex&&) noexcept = default;
    HnswIndex& operator=(HnswIndex&&) noexcept = default;

private:
    using Candidate = std::pair<double, std::uint32_t>;  // (squared distance, node)

    /// Reusable visited markers; one list per concurrent search.
    class VisitedPool {
    public:
        struct List {
            std::vector<std::uint32_t> tag;
            std::uint32_t epoch = 0;

            void reset(std::size_t n) {
                if (tag.size() < n) tag.resize(n, 0);
                if (++epoch == 0) {
                    std::fill(tag.begin(), tag.end(), 0);
                    epoch = 1;
                }
            }
            bool visit(std::uint32_t i) {
                if (tag[i] == epoch) return false;
                tag[i] = epoch;
                return true;
            }
        };

        VisitedPool() = default;
        VisitedPool(VisitedPool&& o) noexcept : free_(std::move(o.free_)), capacity_(o.capacity_) {}
        VisitedPool& operator=(VisitedPool&& o) noexcept {
            free_ = std::move(o.free_);
            capacity_ = o.capacity_;
            return *this;
        }

        void grow(std::size_t n) { capacity_ = std::max(capacity_, n); }

        std::unique_ptr<List> acquire() {
            std::unique_ptr<List> l;
            {
                std::lock_guard lock(mu_);
                if (!free_.empty()) {
                    l = std::move(free_.back());
                    free_.pop_back();
                }
            }
            if (!l) l = std::make_unique<List>();
            l->reset(capacity_);
            return l;
        }

        void release(std::unique_ptr<List> l) {
            std::lock_guard lock(mu_);
            free_.push_back(std::move(l));
        }

    private:
        std::mutex mu_;
        std::vector<std::unique_ptr<List>> free_;
        std::size_t capacity_ = 0;
    };

    const double* vec(std::uint32_t node) const { return vectors_.data() + static_cast<std::size_t>(node) * dim_; }

    double dist2(const double* q, std::uint32_t node) const { return detail::squared_l2(q, vec(node), dim_); }

    std::uint64_t content_key(const double* v) const {
        return detail::hash_string(std::string_view(reinterpret_cast<const char*>(v), dim_ * sizeof(double)));
    }

    std::optional<std::uint32_t> find_identical(std::uint64_t key, const double* v) const {
        auto [lo, hi] = by_content_.equal_range(key);
        for (auto it = lo; it != hi; ++it) {
            if (std::equal(v, v + dim_, vec(it->second))) return it->second;
        }
        return std::nullopt;
    }

    int draw_level() {
        double u = rng_.uniform_open0();
        return static_cast<int>(std::floor(-std::log(u) * params_.mult()));
    }

    std::uint32_t greedy_closest(const double* q, std::uint32_t ep, int layer) const {
        double best = dist2(q, ep);
        bool moved = true;
        while (moved) {
            moved = false;
            for (auto nb : links_[ep][layer]) {
                double d = dist2(q, nb);
                if (d < best || (d == best && nb < ep)) {
                    best = d;
                    ep = nb;
                    moved = true;
                }
            }
        }
        return ep;
    }

    /// Best-first beam search on one layer; returns up to `ef` nodes sorted
    /// by ascending (distance, node).
    std::vector<Candidate> search_layer(const double* q, std::vector<std::uint32_t> entries, std::size_t ef,
                                        int layer) const {
        auto visited = visited_.acquire();
        std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> frontier;
        std::priority_queue<Candidate> best;
        for (auto e : entries) {
            visited->visit(e);
            double d = dist2(q, e);
            frontier.emplace(d, e);
            best.emplace(d, e);
        }
        while (!frontier.empty()) {
            auto [d, node] = frontier.top();
            if (best.size() >= ef && d > best.top().first) break;
            frontier.pop();
            for (auto nb : links_[node][layer]) {
                if (!visited->visit(nb)) continue;
                double dn = dist2(q, nb);
                if (best.size() < ef || Candidate{dn, nb} < best.top()) {
                    frontier.emplace(dn, nb);
                    best.emplace(dn, nb);
                    if (best.size() > ef) best.pop();
                }
            }
        }
        visited_.release(std::move(visited));
        std::vector<Candidate> out(best.size());
        for (std::size_t i = out.size(); i-- > 0;) {
            out[i] = best.top();
            best.pop();
        }
        return out;
    }

    /// Diversity heuristic over candidates sorted by ascending distance.
    std::vector<Candidate> select_neighbors(const std::vector<Candidate>& sorted, std::size_t limit) const {
        std::vector<Candidate> kept;
        kept.reserve(limit);
        for (const auto& c : sorted) {
            if (kept.size() >= limit) break;
            bool diverse = true;
            for (const auto& r : kept) {
                if (detail::squared_l2(vec(c.second), vec(r.second), dim_) < c.first) {
                    diverse = false;
                    break;
                }
            }
            if (diverse) kept.push_back(c);
        }
        return kept;
    }

    void link_back(std::uint32_t node, std::uint32_t added, double d2, int layer, std::size_t cap) {
        auto& list = links_[node][layer];
        if (list.size() < cap) {
            list.push_back(added);
            return;
        }
        std::vector<Candidate> cands;
        cands.reserve(list.size() + 1);
        const double* base = vec(node);
        for (auto nb : list) cands.emplace_back(dist2(base, nb), nb);
        cands.emplace_back(d2, added);
        std::sort(cands.begin(), cands.end());
        auto kept = select_neighbors(cands, cap);
        list.clear();
        for (const auto& c : kept) list.push_back(c.second);
    }

    HnswParams params_;
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<std::vector<std::string>> aliases_;
    std::unordered_map<std::string, std::uint32_t> id_set_;
    std::unordered_multimap<std::uint64_t, std::uint32_t> by_content_;
    std::size_t count_ = 0;
    std::vector<double> vectors_;
    // links_[node][layer] -> neighbor nodes
    std::vector<std::vector<std::vector<std::uint32_t>>> links_;
    std::uint32_t entry_ = 0;
    int max_level_ = -1;
    detail::SplitMix rng_{0};
    mutable VisitedPool visited_;
};

/// Builds an index by inserting the vectors in order.
inline HnswIndex build_hnsw(const std::vector<std::pair<std::string, EmbeddingVector>>& vectors, HnswParams params) {
    std::size_t dim = vectors.empty() ? 0 : vectors.front().second.dim();
    HnswIndex idx(dim, params);
    idx.reserve(vectors.size());
    for (const auto& [id, v] : vectors) idx.add(id, v);
    return idx;
}

/// Exhaustive kNN with the same ordering as HnswIndex::knn; the reference
/// for recall measurements.
inline std::vector<Neighbor> brute_force_knn(const std::vector<std::pair<std::string, EmbeddingVector>>& vectors,
                                             const EmbeddingVector& query, std::size_t k, bool normalized = true) {
    EmbeddingVector q = (normalized && !query.is_zero()) ? normalize(query) : query;
    std::vector<Neighbor> all;
    all.reserve(vectors.size());
    for (const auto& [id, v] : vectors) {
        EmbeddingVector x = normalized ? normalize(v) : v;
        all.push_back({id, euclidean(q, x)});
    }
    auto cmp = [](const Neighbor& a, const Neighbor& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.id < b.id;
    };
    std::size_t n = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), cmp);
    all.resize(n);
    return all;
}

}  // namespace lakejoin
