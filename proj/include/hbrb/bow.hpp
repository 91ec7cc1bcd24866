// Copyright 2026 The HBRB-BoW Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hbrb/descriptor.hpp"
#include "hbrb/error.hpp"
#include "hbrb/vocabulary.hpp"

namespace hbrb {

struct BowEntry {
    WordId word = 0;
    double weight = 0.0;

    friend bool operator==(const BowEntry&, const BowEntry&) = default;
};

/// Sparse TF-IDF histogram, sorted by word id, positive weights only.
/// Either empty or L1-normalized.
struct BowVector {
    std::vector<BowEntry> entries;

    bool empty() const noexcept { return entries.empty(); }
    std::size_t size() const noexcept { return entries.size(); }

    double l1_norm() const noexcept {
        double s = 0.0;
        for (const auto& e : entries) s += std::abs(e.weight);
        return s;
    }

    void normalize() {
        const double s = l1_norm();
        if (s <= 0.0) {
            entries.clear();
            return;
        }
        for (auto& e : entries) e.weight /= s;
    }

    /// Builds a vector from an arbitrary word -> weight map, dropping non-positive weights.
    static BowVector from_map(const std::map<WordId, double>& m) {
        BowVector v;
        for (const auto& [w, x] : m) {
            if (x > 0.0) v.entries.push_back({w, x});
        }
        return v;
    }

    friend bool operator==(const BowVector&, const BowVector&) = default;
};

inline BowVector transform(const Vocabulary& vocab, std::span<const BinaryDescriptor> image_descs) {
    BowVector v;
    if (image_descs.empty()) return v;
    std::map<WordId, std::size_t> counts;
    for (const auto& d : image_descs) ++counts[lookup_word(vocab, d).word_id];
    const double total = static_cast<double>(image_descs.size());
    for (const auto& [w, c] : counts) {
        const double weight = static_cast<double>(c) / total * vocab.leaf_of(w).weight;
        if (weight > 0.0) v.entries.push_back({w, weight});
    }
    v.normalize();
    return v;
}

/// 1 - 0.5 * sum |a_i - b_i| over the union of words. 0 when the supports
/// do not overlap (including either vector being empty).
inline double score_l1(const BowVector& a, const BowVector& b) noexcept {
    double diff = 0.0;
    bool overlap = false;
    auto ia = a.entries.begin();
    auto ib = b.entries.begin();
    while (ia != a.entries.end() || ib != b.entries.end()) {
        if (ib == b.entries.end() || (ia != a.entries.end() && ia->word < ib->word)) {
            diff += std::abs(ia->weight);
            ++ia;
        } else if (ia == a.entries.end() || ib->word < ia->word) {
            diff += std::abs(ib->weight);
            ++ib;
        } else {
            overlap = true;
            diff += std::abs(ia->weight - ib->weight);
            ++ia;
            ++ib;
        }
    }
    if (!overlap) return 0.0;
    return std::clamp(1.0 - 0.5 * diff, 0.0, 1.0);
}

using EntryId = std::size_t;

struct QueryHit {
    EntryId entry = 0;
    double score = 0.0;

    friend bool operator==(const QueryHit&, const QueryHit&) = default;
};

/// Hits ordered by descending score, ties by ascending entry id.
struct QueryResult {
    std::vector<QueryHit> hits;

    bool empty() const noexcept { return hits.empty(); }
    friend bool operator==(const QueryResult&, const QueryResult&) = default;
};

/// Inverted index over stored BoW vectors. Single writer or many readers,
/// never both at once.
class RetrievalDatabase {
public:
    struct Posting {
        EntryId entry = 0;
        double weight = 0.0;
    };

    explicit RetrievalDatabase(const Vocabulary& vocab) : vocab_(&vocab), postings_(vocab.word_count()) {}

    const Vocabulary& vocabulary() const noexcept { return *vocab_; }
    std::size_t size() const noexcept { return entries_.size(); }
    const BowVector& entry(EntryId id) const { return entries_.at(id); }
    const std::vector<Posting>& postings(WordId w) const { return postings_.at(w); }

    EntryId add(BowVector v) {
        const EntryId id = entries_.size();
        for (const auto& e : v.entries) {
            if (e.word >= postings_.size()) throw ConsistencyError("BoW word id outside the vocabulary");
        }
        for (const auto& e : v.entries) postings_[e.word].push_back({id, e.weight});
        entries_.push_back(std::move(v));
        return id;
    }

    /// Scores every stored entry sharing at least one word with `v`.
    QueryResult query(const BowVector& v, std::size_t max_results,
                      const std::unordered_set<EntryId>* exclude = nullptr) const {
        if (max_results < 1) throw ConfigError("max_results must be >= 1");
        std::vector<char> candidate(entries_.size(), 0);
        std::vector<EntryId> ids;
        for (const auto& e : v.entries) {
            if (e.word >= postings_.size()) continue;
            for (const auto& p : postings_[e.word]) {
                if (candidate[p.entry]) continue;
                candidate[p.entry] = 1;
                ids.push_back(p.entry);
            }
        }
        QueryResult out;
        out.hits.reserve(ids.size());
        for (auto id : ids) {
            if (exclude != nullptr && exclude->contains(id)) continue;
            out.hits.push_back({id, score_l1(v, entries_[id])});
        }
        std::sort(out.hits.begin(), out.hits.end(), [](const QueryHit& a, const QueryHit& b) {
            return a.score != b.score ? a.score > b.score : a.entry < b.entry;
        });
        if (out.hits.size() > max_results) out.hits.resize(max_results);
        return out;
    }

    /// Full scan: every posting matches its entry and vice versa, lists sorted.
    bool audit() const {
        std::size_t total = 0;
        for (WordId w = 0; w < postings_.size(); ++w) {
            const auto& list = postings_[w];
            for (std::size_t i = 0; i < list.size(); ++i) {
                if (i > 0 && list[i - 1].entry >= list[i].entry) return false;
                if (list[i].entry >= entries_.size()) return false;
                const auto& ents = entries_[list[i].entry].entries;
                auto it = std::lower_bound(ents.begin(), ents.end(), w,
                                           [](const BowEntry& e, WordId word) { return e.word < word; });
                if (it == ents.end() || it->word != w || it->weight != list[i].weight) return false;
            }
            total += list.size();
        }
        std::size_t support = 0;
        for (const auto& e : entries_) support += e.size();
        return total == support;
    }

private:
    const Vocabulary* vocab_;
    std::vector<std::vector<Posting>> postings_;
    std::vector<BowVector> entries_;
};

}  // namespace hbrb
