#pragma once

#include "lakejoin/corpus.hpp"
#include "lakejoin/util.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

namespace lakejoin {

/// Column-to-text patterns.
enum class Pattern {
    Col,
    ColnameCol,
    ColnameColContext,
    ColnameStatCol,
    TitleColnameCol,
    TitleColnameColContext,
    TitleColnameStatCol,
};

inline constexpr std::array<std::pair<Pattern, std::string_view>, 7> kPatternNames{{
    {Pattern::Col, "col"},
    {Pattern::ColnameCol, "colname-col"},
    {Pattern::ColnameColContext, "colname-col-context"},
    {Pattern::ColnameStatCol, "colname-stat-col"},
    {Pattern::TitleColnameCol, "title-colname-col"},
    {Pattern::TitleColnameColContext, "title-colname-col-context"},
    {Pattern::TitleColnameStatCol, "title-colname-stat-col"},
}};

inline constexpr Pattern kDefaultPattern = Pattern::TitleColnameStatCol;

inline std::string_view to_string(Pattern p) {
    for (auto [value, name] : kPatternNames) {
        if (value == p) return name;
    }
    return "?";
}

inline Pattern parse_pattern(std::string_view name) {
    for (auto [value, n] : kPatternNames) {
        if (n == name) return value;
    }
    throw InvalidArgument("unknown pattern '" + std::string(name) + "'");
}

/// What a cell "length" counts in the stat patterns.
enum class LengthUnit { Characters, Words };

struct ColumnStats {
    std::size_t n = 0;
    std::size_t max_len = 0;
    std::size_t min_len = 0;
    double avg_len = 0.0;
};

namespace detail {

/// Number of code points in a UTF-8 string (continuation bytes are skipped).
inline std::size_t utf8_length(std::string_view s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

}  // namespace detail

/// Cell-length statistics over a list of cells. Lengths are counted in
/// characters by default, which is what the reference rendering
/// "Company contains 5 values (9, 2, 5.6)" uses.
inline ColumnStats compute_stats(const std::vector<std::string>& cells, LengthUnit unit = LengthUnit::Characters) {
    if (cells.empty()) throw InvalidArgument("compute_stats: empty column");
    ColumnStats s;
    s.n = cells.size();
    s.min_len = static_cast<std::size_t>(-1);
    std::size_t total = 0;
    for (const auto& c : cells) {
        std::size_t len = unit == LengthUnit::Characters ? detail::utf8_length(c) : detail::count_whitespace_tokens(c);
        s.max_len = std::max(s.max_len, len);
        s.min_len = std::min(s.min_len, len);
        total += len;
    }
    s.avg_len = static_cast<double>(total) / static_cast<double>(s.n);
    return s;
}

inline ColumnStats compute_stats(const Column& col, LengthUnit unit = LengthUnit::Characters) {
    return compute_stats(col.cells(), unit);
}

/// How cells are chosen when a rendering exceeds the token budget.
struct SampleStrategy {
    enum class Kind { Frequency, Random, Truncate };

    Kind kind = Kind::Frequency;
    std::uint64_t seed = 0;
    std::size_t token_budget = 512;

    static SampleStrategy frequency(std::size_t budget = 512) { return {Kind::Frequency, 0, budget}; }
    static SampleStrategy random(std::uint64_t seed, std::size_t budget = 512) { return {Kind::Random, seed, budget}; }
    static SampleStrategy truncate(std::size_t budget = 512) { return {Kind::Truncate, 0, budget}; }
};

inline constexpr std::size_t kMinTokenBudget = 8;

/// Parses "frequency", "random:<seed>" or "truncate".
inline SampleStrategy parse_strategy(std::string_view s, std::size_t budget) {
    if (budget < kMinTokenBudget) {
        throw InvalidArgument("token budget must be at least " + std::to_string(kMinTokenBudget));
    }
    if (s == "frequency") return SampleStrategy::frequency(budget);
    if (s == "truncate") return SampleStrategy::truncate(budget);
    if (s.starts_with("random:")) {
        try {
            return SampleStrategy::random(std::stoull(std::string(s.substr(7))), budget);
        } catch (const std::exception&) {
        }
    }
    throw InvalidArgument("bad sample strategy '" + std::string(s) + "'");
}

using TokenCounter = std::function<std::size_t(std::string_view)>;

inline std::size_t whitespace_token_count(std::string_view s) { return detail::count_whitespace_tokens(s); }

/// Chooses cells whose token total stays within `budget`. Candidates are
/// ordered by the strategy (descending document frequency with ties kept in
/// original order, a seeded shuffle, or the original order) and taken until
/// the next one would not fit. If not even the first candidate fits, its
/// first `budget` whitespace tokens are returned instead.
inline std::vector<std::string> sample(const std::vector<std::string>& cells, const SampleStrategy& strategy,
                                       const DocFreq& df, std::size_t budget,
                                       const TokenCounter& count = whitespace_token_count) {
    if (budget == 0) throw InvalidArgument("sample: budget must be positive");
    std::vector<std::size_t> order(cells.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    switch (strategy.kind) {
        case SampleStrategy::Kind::Frequency: {
            std::vector<std::uint32_t> freq(cells.size());
            for (std::size_t i = 0; i < cells.size(); ++i) {
                auto it = df.find(std::string_view(cells[i]));
                freq[i] = it == df.end() ? 0 : it->second;
            }
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return freq[a] > freq[b]; });
            break;
        }
        case SampleStrategy::Kind::Random: {
            detail::SplitMix rng(strategy.seed);
            detail::shuffle(order, rng);
            break;
        }
        case SampleStrategy::Kind::Truncate:
            break;
    }

    std::vector<std::string> out;
    std::size_t used = 0;
    for (std::size_t idx : order) {
        std::size_t t = count(cells[idx]);
        if (used + t > budget) break;
        used += t;
        out.push_back(cells[idx]);
    }
    if (out.empty() && !order.empty()) {
        auto toks = detail::whitespace_tokens(cells[order.front()]);
        std::string cut;
        for (std::size_t i = 0; i < std::min(budget, toks.size()); ++i) {
            if (i) cut += ' ';
            cut += toks[i];
        }
        out.push_back(std::move(cut));
    }
    return out;
}

struct ColumnText {
    std::string text;
    Pattern pattern = kDefaultPattern;
    bool truncated = false;
};

struct RenderOptions {
    LengthUnit length_unit = LengthUnit::Characters;
    /// Token counter used for the budget; whitespace tokens unless an
    /// external embedder supplies its own.
    TokenCounter count = whitespace_token_count;
};

namespace detail {

inline std::string join_cells(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ", ";
        out += cells[i];
    }
    return out;
}

inline std::string format_avg(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

inline std::string render_cells(const Column& col, const std::vector<std::string>& cells, Pattern p,
                                LengthUnit unit) {
    const std::string body = join_cells(cells);
    auto colname_col = [&] { return col.column_name() + " : " + body + "."; };
    auto colname_stat_col = [&] {
        auto s = compute_stats(cells, unit);
        return col.column_name() + " contains " + std::to_string(s.n) + " values (" + std::to_string(s.max_len) +
               ", " + std::to_string(s.min_len) + ", " + format_avg(s.avg_len) + "): " + body + ".";
    };
    switch (p) {
        case Pattern::Col: return body;
        case Pattern::ColnameCol: return colname_col();
        case Pattern::ColnameColContext: return colname_col() + " " + col.table_context();
        case Pattern::ColnameStatCol: return colname_stat_col();
        case Pattern::TitleColnameCol: return col.table_title() + ". " + colname_col();
        case Pattern::TitleColnameColContext: return col.table_title() + ". " + colname_col() + " " + col.table_context();
        case Pattern::TitleColnameStatCol: return col.table_title() + ". " + colname_stat_col();
    }
    return body;
}

inline std::string first_tokens(std::string_view text, std::size_t n) {
    auto toks = whitespace_tokens(text);
    std::string out;
    for (std::size_t i = 0; i < std::min(n, toks.size()); ++i) {
        if (i) out += ' ';
        out += toks[i];
    }
    return out;
}

}  // namespace detail

/// Renders a column as text under pattern `p`. When the rendering exceeds
/// the strategy's token budget, the cells are replaced by a sample before
/// rendering and `truncated` is set; the result then never exceeds the budget.
inline ColumnText render(const Column& col, Pattern p, const SampleStrategy& strategy, const DocFreq& df,
                         const RenderOptions& opt = {}) {
    ColumnText out{detail::render_cells(col, col.cells(), p, opt.length_unit), p, false};
    const std::size_t budget = strategy.token_budget;
    const std::size_t total = opt.count(out.text);
    if (total <= budget) return out;

    const std::vector<std::string> first{col.cells().front()};
    const std::size_t single = opt.count(detail::render_cells(col, first, p, opt.length_unit));
    const std::size_t first_tokens = opt.count(first.front());
    const std::size_t overhead = single > first_tokens ? single - first_tokens : 0;
    const std::size_t cell_budget = budget > overhead ? budget - overhead : 1;

    auto chosen = sample(col.cells(), strategy, df, cell_budget, opt.count);
    out.text = detail::render_cells(col, chosen, p, opt.length_unit);
    while (opt.count(out.text) > budget && chosen.size() > 1) {
        chosen.pop_back();
        out.text = detail::render_cells(col, chosen, p, opt.length_unit);
    }
    if (opt.count(out.text) > budget) out.text = detail::first_tokens(out.text, budget);
    out.truncated = true;
    return out;
}

/// Renders with the repository's document frequencies.
inline ColumnText render(const Column& col, Pattern p, const SampleStrategy& strategy, const Repository& repo,
                         const RenderOptions& opt = {}) {
    return render(col, p, strategy, repo.doc_freq(), opt);
}

}  // namespace lakejoin
