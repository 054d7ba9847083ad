#pragma once

#include "lakejoin/ann.hpp"
#include "lakejoin/contextualize.hpp"
#include "lakejoin/util.hpp"

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>

namespace lakejoin {

/// Defaults shared by the CLI subcommands. Loaded from a key/value file;
/// command-line flags override whatever the file sets.
///
///   # comment
///   pattern = "title-colname-stat-col"
///   budget = 512
///   [hnsw]
///   m = 16
///
/// Section headers prefix the keys that follow ("hnsw.m").
struct Config {
    std::string pattern = std::string(to_string(kDefaultPattern));
    std::string strategy = "frequency";
    std::size_t budget = 512;
    std::string embedder = "hash:64:0";
    std::string cell_embedder = "hash:32:0";
    std::size_t hnsw_m = 16;
    std::size_t hnsw_ef_construction = 200;
    std::size_t hnsw_ef_search = 200;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    static std::map<std::string, std::string> parse_pairs(std::istream& in) {
        std::map<std::string, std::string> kv;
        std::string line, section;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            auto t = detail::trim(line);
            if (t.empty() || t.front() == '#') continue;
            if (t.front() == '[') {
                if (t.back() != ']') throw ParseError("config line " + std::to_string(line_no) + ": bad section");
                section = std::string(detail::trim(t.substr(1, t.size() - 2)));
                continue;
            }
            auto eq = t.find('=');
            if (eq == std::string_view::npos) {
                throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
            }
            auto key = std::string(detail::trim(t.substr(0, eq)));
            auto value = detail::trim(t.substr(eq + 1));
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
            kv[section.empty() ? key : section + "." + key] = std::string(value);
        }
        return kv;
    }

    void apply(const std::map<std::string, std::string>& kv) {
        auto num = [](const std::string& key, const std::string& v) -> std::uint64_t {
            try {
                std::size_t used = 0;
                auto n = std::stoull(v, &used);
                if (used != v.size()) throw std::invalid_argument(v);
                return n;
            } catch (const std::exception&) {
                throw ParseError("config: '" + key + "' expects an integer, got '" + v + "'");
            }
        };
        for (const auto& [k, v] : kv) {
            if (k == "pattern") pattern = v;
            else if (k == "strategy") strategy = v;
            else if (k == "budget") budget = num(k, v);
            else if (k == "embedder") embedder = v;
            else if (k == "cell_embedder") cell_embedder = v;
            else if (k == "hnsw.m") hnsw_m = num(k, v);
            else if (k == "hnsw.ef_construction") hnsw_ef_construction = num(k, v);
            else if (k == "hnsw.ef_search") hnsw_ef_search = num(k, v);
            else if (k == "seed") seed = num(k, v);
            else if (k == "workers") workers = num(k, v);
            else throw ParseError("config: unknown key '" + k + "'");
        }
    }

    /// Checks ranges; throws InvalidArgument.
    void validate() const {
        parse_pattern(pattern);
        parse_strategy(strategy, budget);
        HnswParams p;
        p.m = hnsw_m;
        p.ef_construction = hnsw_ef_construction;
        p.validate();
        if (hnsw_ef_search == 0) throw InvalidArgument("hnsw.ef_search must be positive");
        if (workers == 0) throw InvalidArgument("workers must be positive");
    }

    static Config load(std::istream& in) {
        Config c;
        c.apply(parse_pairs(in));
        return c;
    }

    static Config load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open config " + path);
        return load(in);
    }
};

}  // namespace lakejoin
