#pragma once

#include "lakejoin/oracle.hpp"
#include "lakejoin/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

namespace lakejoin {

/// Fraction of the exact top-k ids that also appear in the model's top-k.
inline double precision_at_k(const SearchResult& model, const SearchResult& exact, std::size_t k) {
    if (k == 0) throw InvalidArgument("precision_at_k: k must be positive");
    std::unordered_set<std::string_view> truth;
    for (std::size_t i = 0; i < std::min(k, exact.size()); ++i) truth.insert(exact[i].id);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < std::min(k, model.size()); ++i) hit += truth.contains(model[i].id);
    return static_cast<double>(hit) / static_cast<double>(k);
}

/// Gain of a column for one query: its true joinability.
using JoinabilityFn = std::function<double(std::string_view column_id)>;

inline double dcg_at_k(const SearchResult& ranked, const JoinabilityFn& jn, std::size_t k) {
    double dcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
        dcg += jn(ranked[i].id) / std::log2(static_cast<double>(i) + 2.0);
    }
    return dcg;
}

/// DCG of the model's top-k over DCG of the exact top-k. A query whose
/// exact top-k has zero total gain scores 1.
inline double ndcg_at_k(const SearchResult& model, const SearchResult& exact, const JoinabilityFn& jn,
                        std::size_t k) {
    if (k == 0) throw InvalidArgument("ndcg_at_k: k must be positive");
    double ideal = dcg_at_k(exact, jn, k);
    if (ideal <= 0.0) return 1.0;
    return std::clamp(dcg_at_k(model, jn, k) / ideal, 0.0, 1.0);
}

/// Joinability lookup backed by the scores stored in an exact result;
/// columns outside it count as 0.
inline JoinabilityFn scores_of(const SearchResult& exact) {
    auto table = std::make_shared<std::map<std::string, double, std::less<>>>();
    for (const auto& h : exact.hits) table->emplace(h.id, h.score);
    return [table](std::string_view id) {
        auto it = table->find(id);
        return it == table->end() ? 0.0 : it->second;
    };
}

/// Judged columns per query. `positives` are the ones labeled joinable;
/// `judged`, when present, is the full retrieved pool that was labeled.
struct LabelPool {
    struct Entry {
        std::set<std::string, std::less<>> positives;
        std::optional<std::set<std::string, std::less<>>> judged;
    };
    std::map<std::string, Entry, std::less<>> queries;

    /// Reads {"query_id", "positive_ids": [...], optional "pool_ids": [...]}
    /// objects, one per line.
    static LabelPool read_jsonl(std::istream& in) {
        LabelPool pool;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (detail::trim(line).empty()) continue;
            try {
                auto j = nlohmann::json::parse(line);
                Entry e;
                for (const auto& id : j.at("positive_ids")) e.positives.insert(id.get<std::string>());
                if (j.contains("pool_ids")) {
                    e.judged.emplace();
                    for (const auto& id : j["pool_ids"]) e.judged->insert(id.get<std::string>());
                    e.judged->insert(e.positives.begin(), e.positives.end());
                }
                pool.queries[j.at("query_id").get<std::string>()] = std::move(e);
            } catch (const nlohmann::json::exception& ex) {
                throw ParseError("label pool line " + std::to_string(line_no) + ": " + ex.what());
            }
        }
        return pool;
    }
};

struct PrfScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Precision, recall and F1 of one query's retrievals against the pool.
/// Empty retrieval has precision 0; a pool without positives has recall 1.
inline PrfScores prf(const std::vector<std::string>& retrieved, const LabelPool::Entry& labels) {
    PrfScores s;
    std::size_t hits = 0;
    for (const auto& id : retrieved) {
        if (labels.judged && !labels.judged->contains(id)) {
            throw InvalidArgument("retrieved column '" + id + "' is not in the labeled pool");
        }
        hits += labels.positives.contains(id);
    }
    s.precision = retrieved.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(retrieved.size());
    s.recall = labels.positives.empty() ? 1.0
                                        : static_cast<double>(hits) / static_cast<double>(labels.positives.size());
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

/// Retrievals of one method: query id -> ranked result.
using MethodResults = std::map<std::string, SearchResult, std::less<>>;

/// Per-method precision/recall/F1 averaged over the pool's queries. A
/// method with no result for a query counts as retrieving nothing.
inline std::map<std::string, PrfScores> pooled_prf(const std::map<std::string, MethodResults>& results_by_method,
                                                   const LabelPool& pool) {
    std::map<std::string, PrfScores> out;
    for (const auto& [method, results] : results_by_method) {
        PrfScores mean;
        for (const auto& [qid, labels] : pool.queries) {
            auto it = results.find(qid);
            std::vector<std::string> ids = it == results.end() ? std::vector<std::string>{} : it->second.ids();
            auto s = prf(ids, labels);
            mean.precision += s.precision;
            mean.recall += s.recall;
            mean.f1 += s.f1;
        }
        if (!pool.queries.empty()) {
            double n = static_cast<double>(pool.queries.size());
            mean.precision /= n;
            mean.recall /= n;
            mean.f1 /= n;
        }
        out[method] = mean;
    }
    return out;
}

struct QueryMetrics {
    std::string query_id;
    std::vector<double> precision;  // aligned with EvalReport::ks
    std::vector<double> ndcg;
};

struct EvalReport {
    std::vector<std::size_t> ks;
    std::vector<QueryMetrics> per_query;
    std::vector<double> mean_precision;
    std::vector<double> mean_ndcg;
    std::optional<PrfScores> pooled;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["k"] = ks;
        j["mean_precision"] = mean_precision;
        j["mean_ndcg"] = mean_ndcg;
        j["queries"] = nlohmann::json::array();
        for (const auto& q : per_query) {
            j["queries"].push_back({{"query_id", q.query_id}, {"precision", q.precision}, {"ndcg", q.ndcg}});
        }
        if (pooled) j["pooled"] = {{"precision", pooled->precision}, {"recall", pooled->recall}, {"f1", pooled->f1}};
        return j;
    }

    /// Aligned text table of the means.
    std::string to_text() const {
        std::string out = "     k  precision       ndcg\n";
        char buf[96];
        for (std::size_t i = 0; i < ks.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%6zu  %9.6f  %9.6f\n", ks[i], mean_precision[i], mean_ndcg[i]);
            out += buf;
        }
        if (pooled) {
            std::snprintf(buf, sizeof buf, "pooled  P=%.6f  R=%.6f  F1=%.6f\n", pooled->precision, pooled->recall,
                          pooled->f1);
            out += buf;
        }
        return out;
    }
};

/// Precision@k and NDCG@k for every query present in both result sets,
/// with unweighted means over queries. `jn_for` supplies the gain function
/// of a query; by default the exact result's own scores are used.
inline EvalReport evaluate(const MethodResults& exact, const MethodResults& model, std::vector<std::size_t> ks,
                           const std::function<JoinabilityFn(std::string_view)>& jn_for = {}) {
    EvalReport rep;
    rep.ks = std::move(ks);
    rep.mean_precision.assign(rep.ks.size(), 0.0);
    rep.mean_ndcg.assign(rep.ks.size(), 0.0);
    for (const auto& [qid, truth] : exact) {
        auto it = model.find(qid);
        if (it == model.end()) continue;
        QueryMetrics qm{qid, {}, {}};
        JoinabilityFn jn = jn_for ? jn_for(qid) : scores_of(truth);
        for (std::size_t i = 0; i < rep.ks.size(); ++i) {
            qm.precision.push_back(precision_at_k(it->second, truth, rep.ks[i]));
            qm.ndcg.push_back(ndcg_at_k(it->second, truth, jn, rep.ks[i]));
            rep.mean_precision[i] += qm.precision.back();
            rep.mean_ndcg[i] += qm.ndcg.back();
        }
        rep.per_query.push_back(std::move(qm));
    }
    if (!rep.per_query.empty()) {
        for (std::size_t i = 0; i < rep.ks.size(); ++i) {
            rep.mean_precision[i] /= static_cast<double>(rep.per_query.size());
            rep.mean_ndcg[i] /= static_cast<double>(rep.per_query.size());
        }
    }
    return rep;
}

// Ranked-result files: one {"query_id", "results": [{"id", "score"}, ...]}
// object per line.

inline nlohmann::json result_to_json(std::string_view query_id, const SearchResult& r) {
    nlohmann::json hits = nlohmann::json::array();
    for (const auto& h : r.hits) hits.push_back({{"id", h.id}, {"score", h.score}});
    return {{"query_id", query_id}, {"results", std::move(hits)}};
}

inline MethodResults read_results_jsonl(std::istream& in) {
    MethodResults out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            SearchResult r;
            for (const auto& h : j.at("results")) {
                double score = h.contains("score") ? h["score"].get<double>() : 0.0;
                r.hits.push_back({h.at("id").get<std::string>(), score});
            }
            out[j.at("query_id").get<std::string>()] = std::move(r);
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError("results line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return out;
}

}  // namespace lakejoin
