// Copyright 2026 The HBRB-BoW Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>

#include <json.hpp>

#include "hbrb/bow.hpp"
#include "hbrb/evaluation.hpp"
#include "hbrb/io.hpp"

namespace hbrb {

inline constexpr const char* kComparisonCsvHeader =
    "strategy,seed,mean_qe,p95_qe,words_used,entropy,recall_at_1,max_f1,train_seconds";

inline std::string comparison_csv(std::span<const ComparisonRow> rows) {
    std::string out = std::string(kComparisonCsvHeader) + '\n';
    for (const auto& r : rows) {
        out += std::string(to_string(r.strategy)) + ',' + std::to_string(r.seed) + ',' +
               detail::format_double(r.quant.mean_qe) + ',' + detail::format_double(r.quant.p95_qe) + ',' +
               std::to_string(r.quant.words_used) + ',' + detail::format_double(r.quant.word_entropy) + ',' +
               detail::format_double(r.retrieval.recall_at_1) + ',' + detail::format_double(r.retrieval.max_f1) +
               ',' + detail::format_double(r.train_seconds) + '\n';
    }
    return out;
}

inline nlohmann::json to_json(const QuantReport& q) {
    return {{"mean_qe", q.mean_qe},
            {"p50_qe", q.p50_qe},
            {"p95_qe", q.p95_qe},
            {"words_used", q.words_used},
            {"entropy", q.word_entropy}};
}

inline nlohmann::json to_json(const RetrievalReport& r) {
    nlohmann::json pr = nlohmann::json::array();
    for (const auto& p : r.pr_points) {
        pr.push_back({{"threshold", p.threshold}, {"precision", p.precision}, {"recall", p.recall}});
    }
    return {{"recall_at_1", r.recall_at_1}, {"max_f1", r.max_f1}, {"vacuous", r.vacuous},
            {"queries", r.queries},         {"positives", r.positives}, {"pr_points", pr}};
}

inline nlohmann::json comparison_json(std::span<const ComparisonRow> rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json row = {{"strategy", std::string(to_string(r.strategy))},
                              {"seed", r.seed},
                              {"word_count", r.word_count},
                              {"train_seconds", r.train_seconds}};
        row.update(to_json(r.quant));
        row.update(to_json(r.retrieval));
        out.push_back(std::move(row));
    }
    return out;
}

/// Entries as [word_id, weight] pairs.
inline nlohmann::json to_json(const BowVector& v) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : v.entries) entries.push_back({e.word, e.weight});
    return entries;
}

inline nlohmann::json to_json(const QueryResult& r) {
    nlohmann::json hits = nlohmann::json::array();
    for (const auto& h : r.hits) hits.push_back({{"entry", h.entry}, {"score", h.score}});
    return hits;
}

}  // namespace hbrb
