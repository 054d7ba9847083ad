#pragma once

#include "lakejoin/corpus.hpp"
#include "lakejoin/oracle.hpp"
#include "lakejoin/util.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace lakejoin {

inline constexpr std::size_t kDefaultSketchSize = 256;

/// MinHash signature of a column plus its cardinality, which the overlap
/// estimate needs.
struct MinHashSketch {
    std::vector<std::uint64_t> signature;
    std::size_t set_size = 0;
    std::uint64_t seed = 0;

    std::size_t size() const { return signature.size(); }
    bool operator==(const MinHashSketch&) const = default;
};

/// m hash functions h_i(x) = a_i * base(x) + b_i (mod 2^64), with odd a_i
/// and b_i drawn from a splitmix64 stream seeded by `seed`.
class MinHasher {
public:
    MinHasher(std::size_t m, std::uint64_t seed) : seed_(seed) {
        if (m == 0) throw InvalidArgument("minhash: m must be at least 1");
        detail::SplitMix rng(seed);
        a_.resize(m);
        b_.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            a_[i] = rng() | 1ULL;
            b_[i] = rng();
        }
    }

    std::size_t size() const { return a_.size(); }

    MinHashSketch operator()(const Column& col) const { return sketch(col.cells()); }

    MinHashSketch sketch(const std::vector<std::string>& cells) const {
        MinHashSketch s;
        s.seed = seed_;
        s.set_size = cells.size();
        s.signature.assign(a_.size(), std::numeric_limits<std::uint64_t>::max());
        for (const auto& cell : cells) {
            const std::uint64_t x = detail::hash_string(cell);
            for (std::size_t i = 0; i < a_.size(); ++i) {
                s.signature[i] = std::min(s.signature[i], a_[i] * x + b_[i]);
            }
        }
        return s;
    }

private:
    std::uint64_t seed_;
    std::vector<std::uint64_t> a_;
    std::vector<std::uint64_t> b_;
};

inline MinHashSketch minhash(const Column& col, std::size_t m = kDefaultSketchSize, std::uint64_t seed = 0) {
    return MinHasher(m, seed)(col);
}

/// Fraction of signature positions that agree: an unbiased estimate of the
/// Jaccard similarity of the two sets.
inline double estimate_jaccard(const MinHashSketch& a, const MinHashSketch& b) {
    if (a.size() != b.size() || a.seed != b.seed || a.size() == 0) {
        throw DimensionMismatch("incompatible MinHash sketches");
    }
    std::size_t eq = 0;
    for (std::size_t i = 0; i < a.size(); ++i) eq += a.signature[i] == b.signature[i];
    return static_cast<double>(eq) / static_cast<double>(a.size());
}

/// Joinability from a Jaccard estimate J. With I = |Q ∩ X| and
/// |Q ∪ X| = |Q| + |X| - I, J = I / (|Q| + |X| - I) rearranges to
/// I = J (|Q| + |X|) / (1 + J); jn = I / |Q|, clamped to [0, 1].
inline double joinability_from_jaccard(double jaccard, std::size_t query_size, std::size_t target_size) {
    if (query_size == 0) return 0.0;
    double inter = jaccard * static_cast<double>(query_size + target_size) / (1.0 + jaccard);
    return std::clamp(inter / static_cast<double>(query_size), 0.0, 1.0);
}

inline double estimate_joinability(const MinHashSketch& query, const MinHashSketch& target) {
    return joinability_from_jaccard(estimate_jaccard(query, target), query.set_size, target.set_size);
}

/// Sketches of every repository column, in repository order.
class SketchIndex {
public:
    SketchIndex(const Repository& repo, std::size_t m = kDefaultSketchSize, std::uint64_t seed = 0)
        : repo_(&repo), hasher_(m, seed) {
        sketches_.reserve(repo.size());
        for (const auto& c : repo.columns()) sketches_.push_back(hasher_(c));
    }

    const MinHasher& hasher() const { return hasher_; }
    const std::vector<MinHashSketch>& sketches() const { return sketches_; }

    /// Ranks every column by estimated joinability with the exact searches'
    /// tie rule (ascending id).
    SearchResult topk(const Column& q, std::size_t k) const {
        if (k == 0) throw InvalidArgument("k must be at least 1");
        return sketch_topk(hasher_(q), k);
    }

    SearchResult sketch_topk(const MinHashSketch& q, std::size_t k) const {
        std::vector<Hit> all;
        all.reserve(sketches_.size());
        for (std::size_t pos = 0; pos < sketches_.size(); ++pos) {
            all.push_back({(*repo_)[pos].id(), estimate_joinability(q, sketches_[pos])});
        }
        std::size_t n = std::min(k, all.size());
        std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), ranks_before);
        all.resize(n);
        return SearchResult{std::move(all)};
    }

private:
    const Repository* repo_;
    MinHasher hasher_;
    std::vector<MinHashSketch> sketches_;
};

}  // namespace lakejoin
