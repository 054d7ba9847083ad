#pragma once

#include "lakejoin/contextualize.hpp"
#include "lakejoin/util.hpp"

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lakejoin {

/// Fixed-length real vector for a column or a cell.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    explicit EmbeddingVector(std::size_t dim) : values_(dim, 0.0) {}
    explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {}
    EmbeddingVector(std::initializer_list<double> values) : values_(values) {}

    std::size_t dim() const { return values_.size(); }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> span() const { return values_; }
    const std::vector<double>& values() const { return values_; }
    const double* data() const { return values_.data(); }

    bool is_zero() const {
        for (double v : values_) {
            if (v != 0.0) return false;
        }
        return true;
    }

    bool operator==(const EmbeddingVector&) const = default;

private:
    std::vector<double> values_;
};

namespace detail {

inline void check_dims(std::size_t a, std::size_t b) {
    if (a != b) {
        throw DimensionMismatch("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
    }
}

inline double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double squared_l2(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace detail

inline double dot(const EmbeddingVector& u, const EmbeddingVector& v) {
    detail::check_dims(u.dim(), v.dim());
    return detail::dot(u.data(), v.data(), u.dim());
}

inline double norm(const EmbeddingVector& v) { return std::sqrt(detail::dot(v.data(), v.data(), v.dim())); }

inline double euclidean(const EmbeddingVector& u, const EmbeddingVector& v) {
    detail::check_dims(u.dim(), v.dim());
    return std::sqrt(detail::squared_l2(u.data(), v.data(), u.dim()));
}

/// Cosine similarity; both vectors must be nonzero.
inline double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
    detail::check_dims(u.dim(), v.dim());
    double nu = norm(u), nv = norm(v);
    if (nu == 0.0 || nv == 0.0) throw InvalidArgument("cosine of a zero vector");
    return detail::dot(u.data(), v.data(), u.dim()) / (nu * nv);
}

inline EmbeddingVector normalize(const EmbeddingVector& v) {
    double n = norm(v);
    if (n == 0.0) throw InvalidArgument("cannot normalize a zero vector");
    std::vector<double> out(v.values());
    for (double& x : out) x /= n;
    return EmbeddingVector(std::move(out));
}

inline constexpr std::size_t kMinHashEmbedDim = 8;

namespace detail {

inline void accumulate_feature(std::vector<double>& acc, std::string_view feature, std::uint64_t seed) {
    std::uint64_t h = hash_string(feature, seed);
    std::size_t idx = static_cast<std::size_t>(h % acc.size());
    acc[idx] += (h >> 63) ? -1.0 : 1.0;
}

inline EmbeddingVector finish_features(std::vector<double> acc) {
    double n = std::sqrt(dot(acc.data(), acc.data(), acc.size()));
    if (n > 0.0) {
        for (double& x : acc) x /= n;
    }
    return EmbeddingVector(std::move(acc));
}

}  // namespace detail

/// Signed feature hashing over whitespace tokens, L2-normalized. Order of
/// tokens does not matter; text without tokens maps to the zero vector.
inline EmbeddingVector hash_embed(std::string_view text, std::size_t dim, std::uint64_t seed) {
    if (dim < kMinHashEmbedDim) throw InvalidArgument("hash_embed: dim must be at least 8");
    std::vector<double> acc(dim, 0.0);
    for (auto tok : detail::whitespace_tokens(text)) detail::accumulate_feature(acc, tok, seed);
    return detail::finish_features(std::move(acc));
}

/// Signed feature hashing over character n-grams of the padded string
/// "<text>", so cells with shared substrings land near each other.
inline EmbeddingVector ngram_embed(std::string_view text, std::size_t dim, std::uint64_t seed, std::size_t n = 3) {
    if (dim < kMinHashEmbedDim) throw InvalidArgument("ngram_embed: dim must be at least 8");
    std::vector<double> acc(dim, 0.0);
    std::string padded = "<" + std::string(text) + ">";
    if (padded.size() <= n) {
        detail::accumulate_feature(acc, padded, seed);
    } else {
        for (std::size_t i = 0; i + n <= padded.size(); ++i) {
            detail::accumulate_feature(acc, std::string_view(padded).substr(i, n), seed);
        }
    }
    return detail::finish_features(std::move(acc));
}

/// Turns column text into a vector.
class ColumnEmbedder {
public:
    virtual ~ColumnEmbedder() = default;

    virtual std::size_t dim() const = 0;
    /// Maximum input length in tokens (max_seq_length).
    virtual std::size_t token_budget() const = 0;
    virtual std::string name() const = 0;

    virtual EmbeddingVector embed(std::string_view text) = 0;

    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(embed(t));
        return out;
    }

    /// Token counter matching the embedder's own tokenizer.
    virtual TokenCounter token_counter() { return whitespace_token_count; }
};

/// Turns a single cell value into a vector of the metric space used by
/// semantic joins.
class CellEmbedder {
public:
    virtual ~CellEmbedder() = default;
    virtual std::size_t dim() const = 0;
    virtual EmbeddingVector embed_cell(std::string_view cell) = 0;
};

class HashColumnEmbedder final : public ColumnEmbedder {
public:
    HashColumnEmbedder(std::size_t dim, std::uint64_t seed, std::size_t budget = 512)
        : dim_(dim), seed_(seed), budget_(budget) {
        if (dim < kMinHashEmbedDim) throw InvalidArgument("hash embedder: dim must be at least 8");
    }

    std::size_t dim() const override { return dim_; }
    std::size_t token_budget() const override { return budget_; }
    std::string name() const override { return "hash:" + std::to_string(dim_) + ":" + std::to_string(seed_); }
    EmbeddingVector embed(std::string_view text) override { return hash_embed(text, dim_, seed_); }

private:
    std::size_t dim_;
    std::uint64_t seed_;
    std::size_t budget_;
};

class HashCellEmbedder final : public CellEmbedder {
public:
    HashCellEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
        if (dim < kMinHashEmbedDim) throw InvalidArgument("cell embedder: dim must be at least 8");
    }

    std::size_t dim() const override { return dim_; }
    EmbeddingVector embed_cell(std::string_view cell) override { return ngram_embed(cell, dim_, seed_); }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

struct HashEmbedderSpec {
    std::size_t dim = 64;
    std::uint64_t seed = 0;
};

/// Parses "hash:<dim>:<seed>".
inline HashEmbedderSpec parse_hash_spec(std::string_view s) {
    if (!s.starts_with("hash:")) throw InvalidArgument("not a hash embedder spec: '" + std::string(s) + "'");
    auto rest = s.substr(5);
    auto colon = rest.find(':');
    try {
        HashEmbedderSpec spec;
        spec.dim = std::stoull(std::string(rest.substr(0, colon)));
        if (colon != std::string_view::npos) spec.seed = std::stoull(std::string(rest.substr(colon + 1)));
        return spec;
    } catch (const std::exception&) {
        throw InvalidArgument("bad hash embedder spec '" + std::string(s) + "'");
    }
}

}  // namespace lakejoin
