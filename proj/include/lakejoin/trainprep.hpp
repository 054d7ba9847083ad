#pragma once

#include "lakejoin/contextualize.hpp"
#include "lakejoin/corpus.hpp"
#include "lakejoin/embed.hpp"
#include "lakejoin/oracle.hpp"
#include "lakejoin/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

namespace lakejoin {

enum class JoinMode { Equi, Semantic };

inline JoinMode parse_join_mode(std::string_view s) {
    if (s == "equi") return JoinMode::Equi;
    if (s == "semantic") return JoinMode::Semantic;
    throw InvalidArgument("unknown join mode '" + std::string(s) + "'");
}

struct TrainConfig {
    /// Joinability threshold for positive pairs, in (0, 1].
    double threshold = 0.7;
    /// Shuffle rate r: r * |positives| shuffled copies are added.
    double shuffle_rate = 0.0;
    /// Batch size N.
    std::size_t batch_size = 32;
    JoinMode join_mode = JoinMode::Equi;
    /// Used when join_mode is Semantic.
    MatchConfig match;
    std::uint64_t seed = 0;
    /// Self-join runs on a uniform sample of this many columns when the
    /// repository is larger.
    std::size_t sample_size = 30000;
    Pattern pattern = kDefaultPattern;
    SampleStrategy strategy = SampleStrategy::frequency(512);

    void validate() const {
        if (!(threshold > 0.0 && threshold <= 1.0)) throw InvalidArgument("threshold t must be in (0, 1]");
        if (!(shuffle_rate >= 0.0)) throw InvalidArgument("shuffle rate r must be non-negative");
        if (batch_size < 2) throw InvalidArgument("batch size N must be at least 2");
    }
};

struct PositivePair {
    std::string x_id;
    std::string y_id;
    std::string x_text;
    std::string y_text;
    double jn = 0.0;
    bool augmented = false;

    bool operator==(const PositivePair&) const = default;
};

/// Positions of the repository columns the self-join runs over.
inline std::vector<std::size_t> self_join_sample(const Repository& repo, const TrainConfig& cfg) {
    std::vector<std::size_t> pos(repo.size());
    std::iota(pos.begin(), pos.end(), std::size_t{0});
    if (repo.size() > cfg.sample_size) {
        detail::SplitMix rng(cfg.seed ^ 0x5e1f'9a11ULL);
        detail::shuffle(pos, rng);
        pos.resize(cfg.sample_size);
        std::sort(pos.begin(), pos.end());
    }
    return pos;
}

/// Every ordered pair (X, Y), X != Y, of (sampled) repository columns with
/// jn(X, Y) >= t, ordered by (x_id, y_id). Equi-joins use a prefix-filtered
/// threshold search; semantic joins use the exact semantic matcher.
inline std::vector<PositivePair> self_join_positives(const Repository& repo, const TrainConfig& cfg) {
    cfg.validate();
    auto positions = self_join_sample(repo, cfg);
    std::vector<Column> cols;
    cols.reserve(positions.size());
    for (auto p : positions) cols.push_back(repo[p]);
    Repository sample(std::move(cols));

    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> matches(sample.size());
    if (cfg.join_mode == JoinMode::Equi) {
        EquiIndex index(sample);
        for (std::size_t x = 0; x < sample.size(); ++x) matches[x] = index.threshold(sample[x], cfg.threshold);
    } else {
        SemanticIndex index(sample, cfg.match);
        for (std::size_t x = 0; x < sample.size(); ++x) matches[x] = index.threshold(sample[x], cfg.threshold);
    }

    std::vector<std::optional<std::string>> text(sample.size());
    auto text_of = [&](std::size_t p) -> const std::string& {
        if (!text[p]) text[p] = render(sample[p], cfg.pattern, cfg.strategy, repo.doc_freq()).text;
        return *text[p];
    };

    std::vector<PositivePair> out;
    for (std::size_t x = 0; x < sample.size(); ++x) {
        for (auto [y, count] : matches[x]) {
            if (y == x) continue;
            out.push_back({sample[x].id(), sample[y].id(), text_of(x), text_of(y),
                           static_cast<double>(count) / static_cast<double>(sample[x].size()), false});
        }
    }
    return out;
}

/// Appends round(r * |pairs|) pairs whose X cells are a seeded random
/// permutation, so that r / (1 + r) of the result is augmented. Source pairs
/// are drawn without replacement while r <= 1 and with replacement beyond.
inline std::vector<PositivePair> augment_shuffle(const std::vector<PositivePair>& pairs, double r,
                                                 std::uint64_t seed, const Repository& repo, Pattern pattern,
                                                 const SampleStrategy& strategy) {
    if (!(r >= 0.0)) throw InvalidArgument("shuffle rate r must be non-negative");
    std::vector<PositivePair> out = pairs;
    const auto extra = static_cast<std::size_t>(std::llround(r * static_cast<double>(pairs.size())));
    if (extra == 0 || pairs.empty()) return out;

    detail::SplitMix rng(seed);
    std::vector<std::size_t> sources;
    if (extra <= pairs.size()) {
        sources.resize(pairs.size());
        std::iota(sources.begin(), sources.end(), std::size_t{0});
        // Partial Fisher-Yates: the first `extra` slots are a uniform sample.
        for (std::size_t i = 0; i < extra; ++i) {
            std::size_t j = i + rng.below(pairs.size() - i);
            std::swap(sources[i], sources[j]);
        }
        sources.resize(extra);
        std::sort(sources.begin(), sources.end());
    } else {
        for (std::size_t i = 0; i < extra; ++i) sources.push_back(rng.below(pairs.size()));
    }

    out.reserve(pairs.size() + extra);
    for (auto s : sources) {
        const Column* x = repo.find(pairs[s].x_id);
        if (x == nullptr) throw InvalidArgument("augment_shuffle: unknown column '" + pairs[s].x_id + "'");
        auto cells = x->cells();
        detail::shuffle(cells, rng);
        PositivePair p = pairs[s];
        p.x_text = render(x->with_cells(std::move(cells)), pattern, strategy, repo.doc_freq()).text;
        p.augmented = true;
        out.push_back(std::move(p));
    }
    return out;
}

/// Pair indices forming one training batch.
struct TrainBatch {
    std::vector<std::size_t> members;
};

struct BatchPlan {
    std::vector<TrainBatch> batches;
    std::size_t dropped = 0;
};

/// Shuffles pairs by seed and packs them first-fit into batches of exactly
/// N pairs with pairwise-distinct y_id. Pairs left in incomplete batches
/// are dropped and counted.
inline BatchPlan make_batches(const std::vector<PositivePair>& pairs, std::size_t n, std::uint64_t seed) {
    if (n < 2) throw InvalidArgument("batch size N must be at least 2");
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    detail::SplitMix rng(seed);
    detail::shuffle(order, rng);

    struct Open {
        TrainBatch batch;
        std::unordered_set<std::string_view> ys;
    };
    std::vector<Open> open;
    BatchPlan plan;
    for (auto i : order) {
        std::string_view y = pairs[i].y_id;
        auto it = std::find_if(open.begin(), open.end(), [&](const Open& o) { return !o.ys.contains(y); });
        if (it == open.end()) {
            open.emplace_back();
            it = std::prev(open.end());
        }
        it->batch.members.push_back(i);
        it->ys.insert(y);
        if (it->batch.members.size() == n) {
            plan.batches.push_back(std::move(it->batch));
            open.erase(it);
        }
    }
    for (const auto& o : open) plan.dropped += o.batch.members.size();
    return plan;
}

/// Multiple negatives ranking loss with cosine scores:
/// L = -(1/N) sum_i [ S(x_i, y_i) - log sum_j exp S(x_i, y_j) ],
/// evaluated with a max-shifted log-sum-exp.
inline double mnr_loss(const std::vector<EmbeddingVector>& xs, const std::vector<EmbeddingVector>& ys) {
    if (xs.size() != ys.size()) {
        throw DimensionMismatch("mnr_loss: " + std::to_string(xs.size()) + " anchors vs " +
                                std::to_string(ys.size()) + " positives");
    }
    if (xs.empty()) throw InvalidArgument("mnr_loss: empty batch");
    const std::size_t n = xs.size();
    double total = 0.0;
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) s[j] = cosine(xs[i], ys[j]);
        double m = *std::max_element(s.begin(), s.end());
        double acc = 0.0;
        for (double v : s) acc += std::exp(v - m);
        total += s[i] - (m + std::log(acc));
    }
    return -total / static_cast<double>(n);
}

inline nlohmann::json to_json(const PositivePair& p) {
    return {{"x_id", p.x_id}, {"y_id", p.y_id}, {"x_text", p.x_text},
            {"y_text", p.y_text}, {"jn", p.jn},     {"augmented", p.augmented}};
}

inline void write_pairs_jsonl(std::ostream& out, const std::vector<PositivePair>& pairs) {
    for (const auto& p : pairs) out << to_json(p).dump() << '\n';
}

/// Batch manifest: {"batch_size": N, "dropped": d, "batches": [[i, ...], ...]}
/// where indices are line numbers (0-based) in the pairs file.
inline nlohmann::json batch_manifest(const BatchPlan& plan, std::size_t n) {
    nlohmann::json batches = nlohmann::json::array();
    for (const auto& b : plan.batches) batches.push_back(b.members);
    return {{"batch_size", n}, {"dropped", plan.dropped}, {"batches", std::move(batches)}};
}

}  // namespace lakejoin
