#pragma once

#include "lakejoin/util.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include <json.hpp>

namespace lakejoin {

/// Transparent hash so string-keyed maps can be probed with string_view.
struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
        return std::hash<std::string_view>{}(s);
    }
};

using DocFreq = std::unordered_map<std::string, std::uint32_t, StringHash, std::equal_to<>>;

/// Columns with fewer distinct cells than this are not admitted at ingestion.
inline constexpr std::size_t kDefaultMinCells = 5;

/// A column modeled as a set of cells: distinct, non-empty, trimmed strings
/// kept in first-occurrence order, plus the metadata of its table.
class Column {
public:
    Column() = default;

    /// Normalizes `raw_cells` (trim, drop empty, deduplicate keeping the first
    /// occurrence). Throws InvalidArgument if nothing survives.
    Column(std::string id, std::vector<std::string> raw_cells, std::string table_title = {},
           std::string column_name = {}, std::string table_context = {})
        : id_(std::move(id)),
          table_title_(std::move(table_title)),
          column_name_(std::move(column_name)),
          table_context_(std::move(table_context)) {
        cells_ = normalize_cells(raw_cells);
        if (cells_.empty()) {
            throw InvalidArgument("column '" + id_ + "' has no non-empty cells");
        }
    }

    static std::vector<std::string> normalize_cells(const std::vector<std::string>& raw) {
        std::vector<std::string> out;
        std::unordered_set<std::string_view> seen;
        out.reserve(raw.size());
        for (const auto& c : raw) {
            auto t = detail::trim(c);
            if (t.empty()) continue;
            if (seen.contains(t)) continue;
            out.emplace_back(t);
            seen.insert(t);
        }
        return out;
    }

    const std::string& id() const { return id_; }
    const std::string& table_title() const { return table_title_; }
    const std::string& column_name() const { return column_name_; }
    const std::string& table_context() const { return table_context_; }
    const std::vector<std::string>& cells() const { return cells_; }
    std::size_t size() const { return cells_.size(); }

    /// Copy of this column with a different cell list; `cells` must already be
    /// normalized (shuffle augmentation passes a permutation).
    Column with_cells(std::vector<std::string> cells) const {
        Column c = *this;
        c.cells_ = std::move(cells);
        return c;
    }

    Column with_id(std::string id) const {
        Column c = *this;
        c.id_ = std::move(id);
        return c;
    }

    bool operator==(const Column&) const = default;

private:
    std::string id_;
    std::string table_title_;
    std::string column_name_;
    std::string table_context_;
    std::vector<std::string> cells_;
};

/// An immutable, id-addressable collection of columns with the document
/// frequency of every cell value. Columns are stored in ascending id order,
/// so position order doubles as the tie-break order used by searches.
class Repository {
public:
    Repository() = default;

    /// Throws InvalidArgument on duplicate ids.
    explicit Repository(std::vector<Column> columns) : columns_(std::move(columns)) {
        std::sort(columns_.begin(), columns_.end(),
                  [](const Column& a, const Column& b) { return a.id() < b.id(); });
        for (std::size_t i = 1; i < columns_.size(); ++i) {
            if (columns_[i].id() == columns_[i - 1].id()) {
                throw InvalidArgument("duplicate column id '" + columns_[i].id() + "'");
            }
        }
        by_id_.reserve(columns_.size());
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            by_id_.emplace(columns_[i].id(), i);
            for (const auto& cell : columns_[i].cells()) ++doc_freq_[cell];
        }
    }

    const std::vector<Column>& columns() const { return columns_; }
    std::size_t size() const { return columns_.size(); }
    bool empty() const { return columns_.empty(); }
    const Column& operator[](std::size_t i) const { return columns_[i]; }

    const DocFreq& doc_freq() const { return doc_freq_; }

    std::uint32_t doc_freq(std::string_view cell) const {
        auto it = doc_freq_.find(cell);
        return it == doc_freq_.end() ? 0 : it->second;
    }

    std::optional<std::size_t> position(std::string_view id) const {
        auto it = by_id_.find(id);
        if (it == by_id_.end()) return std::nullopt;
        return it->second;
    }

    const Column* find(std::string_view id) const {
        auto p = position(id);
        return p ? &columns_[*p] : nullptr;
    }

    bool operator==(const Repository& other) const {
        return columns_ == other.columns_ && doc_freq_ == other.doc_freq_;
    }

private:
    std::vector<Column> columns_;
    DocFreq doc_freq_;
    std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>> by_id_;
};

inline Repository build_repository(std::vector<Column> cols) {
    return Repository(std::move(cols));
}

// ---------------------------------------------------------------------------
// Delimited tables

/// A parsed delimited table: header row (column names), rectangular body and
/// optional metadata taken from leading `#title:` / `#context:` lines.
struct TableSource {
    std::string name;
    std::string title;
    std::string context;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t num_columns() const { return header.size(); }
};

struct CsvOptions {
    char delimiter = ',';
    bool has_header = true;
};

/// RFC-4180 style parser: quoted fields may contain delimiters, doubled
/// quotes and line breaks. Ragged rows are an error.
inline TableSource parse_delimited(std::istream& in, std::string name = {}, CsvOptions opt = {}) {
    TableSource src;
    src.name = std::move(name);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::size_t pos = 0;
    // Metadata lines precede the header.
    while (pos < text.size() && text[pos] == '#') {
        auto eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string_view line(text.data() + pos, eol - pos);
        auto colon = line.find(':');
        if (colon != std::string_view::npos) {
            auto key = detail::trim(line.substr(1, colon - 1));
            auto value = std::string(detail::trim(line.substr(colon + 1)));
            if (key == "title") src.title = value;
            else if (key == "context") src.context = value;
        }
        pos = eol + 1;
    }

    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line_no = 1;
    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        bool blank = record.size() == 1 && record[0].empty();
        if (!blank) records.push_back(std::move(record));
        record.clear();
    };
    for (; pos < text.size(); ++pos) {
        char c = text[pos];
        if (in_quotes) {
            if (c == '"') {
                if (pos + 1 < text.size() && text[pos + 1] == '"') {
                    field.push_back('"');
                    ++pos;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line_no;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == opt.delimiter) {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            end_record();
            ++line_no;
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) {
        throw ParseError(src.name + ": unterminated quoted field at line " + std::to_string(line_no));
    }
    if (!field.empty() || field_started || !record.empty()) {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        end_record();
    }

    if (records.empty()) return src;
    std::size_t width = records.front().size();
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].size() != width) {
            throw ParseError(src.name + ": row " + std::to_string(i + 1) + " has " +
                             std::to_string(records[i].size()) + " fields, expected " +
                             std::to_string(width));
        }
    }
    if (opt.has_header) {
        src.header = std::move(records.front());
        records.erase(records.begin());
    } else {
        src.header.assign(width, std::string{});
    }
    src.rows = std::move(records);
    return src;
}

inline TableSource parse_delimited(std::string_view text, std::string name = {}, CsvOptions opt = {}) {
    std::istringstream in{std::string(text)};
    return parse_delimited(in, std::move(name), opt);
}

struct ExplicitIndex {
    std::size_t index;
};
struct MaxDistinct {};
using KeySelector = std::variant<ExplicitIndex, MaxDistinct>;

/// Parses "explicit:<n>" or "maxdistinct".
inline KeySelector parse_key_selector(std::string_view s) {
    if (s == "maxdistinct") return MaxDistinct{};
    constexpr std::string_view prefix = "explicit:";
    if (s.starts_with(prefix)) {
        try {
            return ExplicitIndex{static_cast<std::size_t>(std::stoull(std::string(s.substr(prefix.size()))))};
        } catch (const std::exception&) {
        }
    }
    throw InvalidArgument("bad key selector '" + std::string(s) + "'");
}

struct IngestResult {
    std::vector<Column> columns;
    std::vector<std::string> warnings;
};

struct IngestOptions {
    std::size_t min_cells = kDefaultMinCells;
};

/// Extracts the key column of a table. The id of the produced column is
/// `<table name>#<column index>`.
inline IngestResult ingest_table(const TableSource& src, KeySelector key, IngestOptions opt = {}) {
    IngestResult result;
    auto column_cells = [&](std::size_t j) {
        std::vector<std::string> raw;
        raw.reserve(src.rows.size());
        for (const auto& row : src.rows) raw.push_back(row[j]);
        return Column::normalize_cells(raw);
    };

    std::size_t chosen = 0;
    std::vector<std::string> cells;
    if (auto* e = std::get_if<ExplicitIndex>(&key)) {
        if (e->index >= src.num_columns()) {
            throw InvalidArgument(src.name + ": key column " + std::to_string(e->index) +
                                  " out of bounds (table has " + std::to_string(src.num_columns()) +
                                  " columns)");
        }
        chosen = e->index;
        cells = column_cells(chosen);
    } else {
        for (std::size_t j = 0; j < src.num_columns(); ++j) {
            auto c = column_cells(j);
            if (j == 0 || c.size() > cells.size()) {
                chosen = j;
                cells = std::move(c);
            }
        }
    }

    if (cells.size() < opt.min_cells || cells.empty()) {
        result.warnings.push_back(src.name + ": key column has " + std::to_string(cells.size()) +
                                  " distinct cells (< " + std::to_string(opt.min_cells) + "), skipped");
        return result;
    }
    result.columns.emplace_back(src.name + "#" + std::to_string(chosen), std::move(cells), src.title,
                                src.header.empty() ? std::string{} : src.header[chosen], src.context);
    return result;
}

// ---------------------------------------------------------------------------
// JSON lines column format

inline nlohmann::json column_to_json(const Column& c) {
    return nlohmann::json{{"id", c.id()},
                          {"table_title", c.table_title()},
                          {"column_name", c.column_name()},
                          {"table_context", c.table_context()},
                          {"cells", c.cells()}};
}

inline Column column_from_json(const nlohmann::json& j) {
    try {
        auto get_str = [&](const char* key) {
            return j.contains(key) && !j[key].is_null() ? j[key].get<std::string>() : std::string{};
        };
        return Column(j.at("id").get<std::string>(), j.at("cells").get<std::vector<std::string>>(),
                      get_str("table_title"), get_str("column_name"), get_str("table_context"));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad column object: ") + e.what());
    }
}

/// Reads one column object per non-blank line. Columns below `min_cells`
/// are skipped and reported in `warnings`.
inline IngestResult read_columns_jsonl(std::istream& in, IngestOptions opt = {}) {
    IngestResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        Column c = column_from_json(j);
        if (c.size() < opt.min_cells) {
            result.warnings.push_back(c.id() + ": " + std::to_string(c.size()) +
                                      " distinct cells (< " + std::to_string(opt.min_cells) + "), skipped");
            continue;
        }
        result.columns.push_back(std::move(c));
    }
    return result;
}

inline std::vector<Column> read_columns_jsonl_file(const std::string& path, IngestOptions opt = {}) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return read_columns_jsonl(in, opt).columns;
}

inline void write_columns_jsonl(std::ostream& out, const std::vector<Column>& cols) {
    for (const auto& c : cols) out << column_to_json(c).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Binary repository file: "LJN1", u32 version, u64 count, then per column the
// id, title, name and context strings followed by the cell list. Document
// frequencies are rebuilt on load.

inline constexpr std::string_view kRepositoryMagic = "LJN1";
inline constexpr std::uint32_t kRepositoryVersion = 1;

inline void save_repository(const Repository& repo, std::ostream& out) {
    out.write(kRepositoryMagic.data(), kRepositoryMagic.size());
    detail::write_pod<std::uint32_t>(out, kRepositoryVersion);
    detail::write_pod<std::uint64_t>(out, repo.size());
    for (const auto& c : repo.columns()) {
        detail::write_string(out, c.id());
        detail::write_string(out, c.table_title());
        detail::write_string(out, c.column_name());
        detail::write_string(out, c.table_context());
        detail::write_pod<std::uint64_t>(out, c.size());
        for (const auto& cell : c.cells()) detail::write_string(out, cell);
    }
}

inline Repository load_repository(std::istream& in) {
    detail::expect_magic(in, kRepositoryMagic);
    auto version = detail::read_pod<std::uint32_t>(in);
    if (version != kRepositoryVersion) {
        throw FormatError("unsupported repository version " + std::to_string(version));
    }
    auto n = detail::read_pod<std::uint64_t>(in);
    std::vector<Column> cols;
    for (std::uint64_t i = 0; i < n; ++i) {
        auto id = detail::read_string(in);
        auto title = detail::read_string(in);
        auto name = detail::read_string(in);
        auto context = detail::read_string(in);
        auto ncells = detail::read_pod<std::uint64_t>(in);
        if (ncells == 0 || ncells > (1ULL << 32)) throw FormatError("corrupt cell count");
        std::vector<std::string> cells;
        cells.reserve(ncells);
        for (std::uint64_t k = 0; k < ncells; ++k) cells.push_back(detail::read_string(in));
        Column c(std::move(id), cells, std::move(title), std::move(name), std::move(context));
        if (c.cells() != cells) throw FormatError("corrupt column '" + c.id() + "': cells not normalized");
        cols.push_back(std::move(c));
    }
    try {
        return Repository(std::move(cols));
    } catch (const InvalidArgument& e) {
        throw FormatError(e.what());
    }
}

inline void save_repository(const Repository& repo, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    save_repository(repo, out);
    if (!out) throw Error("write failed: " + path);
}

inline Repository load_repository(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return load_repository(in);
}

}  // namespace lakejoin
