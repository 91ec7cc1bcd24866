// Copyright 2026 The HBRB-BoW Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hbrb/bow.hpp"
#include "hbrb/descriptor.hpp"
#include "hbrb/error.hpp"
#include "hbrb/random.hpp"
#include "hbrb/vocabulary.hpp"

namespace hbrb {

inline BinaryDescriptor random_descriptor(std::size_t bits, Rng& rng) {
    BinaryDescriptor d(bits);
    auto oct = d.octets();
    for (std::size_t o = 0; o < oct.size(); o += 8) {
        std::uint64_t r = rng.next();
        for (std::size_t b = 0; b < 8 && o + b < oct.size(); ++b, r >>= 8) oct[o + b] = static_cast<std::uint8_t>(r);
    }
    return d;
}

/// Copy of `d` with every bit flipped independently with probability p.
inline BinaryDescriptor corrupt(const BinaryDescriptor& d, double p, Rng& rng) {
    BinaryDescriptor out(d);
    if (p <= 0.0) return out;
    for (std::size_t i = 0; i < out.bits(); ++i) {
        if (rng.bernoulli(p)) out.flip_bit(i);
    }
    return out;
}

struct SynthConfig {
    std::size_t num_places = 50;
    std::size_t descriptors_per_place = 200;
    /// Fraction of all frames that re-observe an earlier place; must be < 1.
    double revisit_fraction = 0.3;
    double bit_flip_prob = 0.05;
    std::size_t descriptor_bits = kDefaultDescriptorBits;
    std::uint64_t seed = 0;

    void validate() const {
        if (num_places < 1) throw ConfigError("num_places must be positive");
        if (descriptors_per_place < 1) throw ConfigError("descriptors_per_place must be positive");
        if (!(revisit_fraction >= 0.0 && revisit_fraction < 1.0)) {
            throw ConfigError("revisit_fraction must lie in [0, 1)");
        }
        if (!(bit_flip_prob >= 0.0 && bit_flip_prob < 0.5)) throw ConfigError("bit_flip_prob must lie in [0, 0.5)");
        if (descriptor_bits == 0 || descriptor_bits % 8 != 0) {
            throw ConfigError("descriptor_bits must be a positive multiple of 8");
        }
    }
};

struct RevisitPair {
    std::size_t query = 0;
    std::size_t earlier = 0;

    friend auto operator<=>(const RevisitPair&, const RevisitPair&) = default;
};

/// A traversal of places: one group per frame, plus ground truth.
struct SynthSequence {
    /// One group per place holding its prototype descriptors.
    DescriptorSet training;
    /// One group per frame, in traversal order.
    DescriptorSet frames;
    std::vector<std::size_t> frame_place;
    /// (query frame, earlier frame of the same place), sorted.
    std::vector<RevisitPair> ground_truth;
};

inline std::size_t revisit_count(const SynthConfig& cfg) {
    return static_cast<std::size_t>(
        std::llround(cfg.revisit_fraction / (1.0 - cfg.revisit_fraction) * static_cast<double>(cfg.num_places)));
}

/// Every place is visited once fresh (its prototype, verbatim); revisits are
/// noisy copies of an earlier place other than the one seen in the previous
/// frame, interleaved at random.
inline SynthSequence synth_sequence(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    std::vector<std::vector<BinaryDescriptor>> prototypes(cfg.num_places);
    for (auto& place : prototypes) {
        place.reserve(cfg.descriptors_per_place);
        for (std::size_t i = 0; i < cfg.descriptors_per_place; ++i) {
            place.push_back(random_descriptor(cfg.descriptor_bits, rng));
        }
    }

    SynthSequence seq;
    for (const auto& place : prototypes) seq.training.add_group(place);

    const std::size_t revisits = revisit_count(cfg);
    const std::size_t total = cfg.num_places + revisits;
    std::size_t revisits_left = revisits;
    std::size_t next_fresh = 0;
    std::vector<std::vector<std::size_t>> visits(cfg.num_places);

    for (std::size_t f = 0; f < total; ++f) {
        std::vector<std::size_t> eligible;
        for (std::size_t p = 0; p < next_fresh; ++p) {
            if (f == 0 || seq.frame_place[f - 1] != p) eligible.push_back(p);
        }
        if (eligible.empty() && next_fresh == cfg.num_places) {
            for (std::size_t p = 0; p < next_fresh; ++p) eligible.push_back(p);
        }
        const std::size_t remaining = total - f;
        const bool fresh_available = next_fresh < cfg.num_places;
        bool revisit = false;
        if (revisits_left > 0 && !eligible.empty()) {
            revisit = !fresh_available ||
                      rng.unit() < static_cast<double>(revisits_left) / static_cast<double>(remaining);
        }

        std::size_t place = 0;
        if (revisit) {
            place = eligible[rng.index(eligible.size())];
            std::vector<BinaryDescriptor> noisy;
            noisy.reserve(cfg.descriptors_per_place);
            for (const auto& d : prototypes[place]) noisy.push_back(corrupt(d, cfg.bit_flip_prob, rng));
            seq.frames.add_group(noisy);
            for (auto e : visits[place]) seq.ground_truth.push_back({f, e});
            --revisits_left;
        } else {
            place = next_fresh++;
            seq.frames.add_group(prototypes[place]);
        }
        visits[place].push_back(f);
        seq.frame_place.push_back(place);
    }
    std::sort(seq.ground_truth.begin(), seq.ground_truth.end());
    return seq;
}

struct ClusteredConfig {
    std::size_t num_centers = 200;
    std::size_t count = 50000;
    double bit_flip_prob = 0.1;
    std::size_t descriptor_bits = kDefaultDescriptorBits;
    /// Descriptors per group (image); the last group may be shorter.
    std::size_t group_size = 500;
    std::uint64_t seed = 0;
};

/// Descriptors scattered around random centers by independent bit flips.
inline DescriptorSet synth_clustered(const ClusteredConfig& cfg) {
    if (cfg.num_centers < 1 || cfg.count < 1 || cfg.group_size < 1) throw ConfigError("clustered corpus sizes must be positive");
    Rng rng(cfg.seed);
    std::vector<BinaryDescriptor> centers;
    for (std::size_t c = 0; c < cfg.num_centers; ++c) centers.push_back(random_descriptor(cfg.descriptor_bits, rng));
    std::vector<BinaryDescriptor> descs;
    descs.reserve(cfg.count);
    std::vector<std::size_t> ends;
    for (std::size_t i = 0; i < cfg.count; ++i) {
        descs.push_back(corrupt(centers[rng.index(centers.size())], cfg.bit_flip_prob, rng));
        if ((i + 1) % cfg.group_size == 0 || i + 1 == cfg.count) ends.push_back(i + 1);
    }
    return DescriptorSet(std::move(descs), std::move(ends));
}

struct QuantReport {
    double mean_qe = 0.0;
    double p50_qe = 0.0;
    double p95_qe = 0.0;
    std::size_t words_used = 0;
    /// Shannon entropy of the empirical word distribution, in bits.
    double word_entropy = 0.0;
};

/// Nearest-rank percentile of sorted values, q in (0, 1].
inline double nearest_rank(const std::vector<std::size_t>& sorted, double q) {
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return static_cast<double>(sorted[rank - 1]);
}

/// Hamming distance from every descriptor to the centroid of the word it maps to.
inline QuantReport quantization_report(const Vocabulary& vocab, const DescriptorSet& descs) {
    if (descs.empty()) throw PreconditionError("quantization report needs at least one descriptor");
    std::vector<std::size_t> errors;
    errors.reserve(descs.size());
    std::vector<std::size_t> hits(vocab.word_count(), 0);
    std::size_t total = 0;
    for (const auto& d : descs.descriptors()) {
        const auto w = lookup_word(vocab, d);
        const std::size_t e = hamming_unchecked(d, vocab.nodes[w.node_id].centroid);
        errors.push_back(e);
        total += e;
        ++hits[w.word_id];
    }
    QuantReport r;
    const double n = static_cast<double>(descs.size());
    r.mean_qe = static_cast<double>(total) / n;
    std::sort(errors.begin(), errors.end());
    r.p50_qe = nearest_rank(errors, 0.50);
    r.p95_qe = nearest_rank(errors, 0.95);
    for (auto h : hits) {
        if (h == 0) continue;
        ++r.words_used;
        const double p = static_cast<double>(h) / n;
        r.word_entropy -= p * std::log2(p);
    }
    return r;
}

struct PrPoint {
    double threshold = 0.0;
    double precision = 1.0;
    double recall = 0.0;
};

struct RetrievalReport {
    double recall_at_1 = 0.0;
    double max_f1 = 0.0;
    /// Sorted by ascending threshold.
    std::vector<PrPoint> pr_points;
    /// No ground-truth revisits: recall is reported as 1.0 but means nothing.
    bool vacuous = false;
    std::size_t queries = 0;
    std::size_t positives = 0;
};

/// Streams the frames through a retrieval database: each frame queries the
/// entries added so far (minus the last `temporal_exclusion` frames), then is
/// added itself. A query is correct when its top hit is an earlier frame of
/// the same place.
inline RetrievalReport retrieval_report(const Vocabulary& vocab, const DescriptorSet& frames,
                                        std::span<const RevisitPair> ground_truth, std::size_t temporal_exclusion) {
    const auto groups = frames.groups();
    if (groups.empty()) throw PreconditionError("retrieval report needs a nonempty sequence");
    std::map<std::size_t, std::set<std::size_t>> truth;
    for (const auto& p : ground_truth) truth[p.query].insert(p.earlier);

    RetrievalDatabase db(vocab);
    struct Top {
        bool found = false;
        double score = 0.0;
        bool correct = false;
    };
    std::vector<Top> tops(groups.size());
    for (std::size_t f = 0; f < groups.size(); ++f) {
        BowVector v = transform(vocab, frames.group(groups[f]));
        std::unordered_set<EntryId> exclude;
        for (std::size_t back = 1; back <= temporal_exclusion && back <= f; ++back) exclude.insert(f - back);
        const auto res = db.query(v, 1, &exclude);
        if (!res.empty()) {
            tops[f].found = true;
            tops[f].score = res.hits.front().score;
            auto it = truth.find(f);
            tops[f].correct = it != truth.end() && it->second.contains(res.hits.front().entry);
        }
        db.add(std::move(v));
    }

    RetrievalReport r;
    r.queries = groups.size();
    r.positives = truth.size();
    r.vacuous = r.positives == 0;
    std::size_t correct = 0;
    for (const auto& t : tops) correct += t.correct ? 1 : 0;
    r.recall_at_1 = r.vacuous ? 1.0 : static_cast<double>(correct) / static_cast<double>(r.positives);

    std::vector<double> thresholds;
    for (const auto& t : tops) {
        if (t.found) thresholds.push_back(t.score);
    }
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    auto point_at = [&](double threshold, bool above_all) {
        std::size_t predicted = 0;
        std::size_t tp = 0;
        for (const auto& t : tops) {
            if (!t.found || above_all || t.score < threshold) continue;
            ++predicted;
            tp += t.correct ? 1 : 0;
        }
        PrPoint p;
        p.threshold = threshold;
        p.precision = predicted == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(predicted);
        p.recall = r.vacuous ? 1.0 : static_cast<double>(tp) / static_cast<double>(r.positives);
        return p;
    };
    for (double t : thresholds) r.pr_points.push_back(point_at(t, false));
    r.pr_points.push_back(point_at(thresholds.empty() ? 0.0 : std::nextafter(thresholds.back(), 2.0), true));
    for (const auto& p : r.pr_points) {
        if (p.precision + p.recall > 0.0) {
            r.max_f1 = std::max(r.max_f1, 2.0 * p.precision * p.recall / (p.precision + p.recall));
        }
    }
    return r;
}

inline RetrievalReport retrieval_report(const Vocabulary& vocab, const SynthSequence& seq,
                                        std::size_t temporal_exclusion = 1) {
    return retrieval_report(vocab, seq.frames, seq.ground_truth, temporal_exclusion);
}

struct ComparisonRow {
    Strategy strategy = Strategy::GlobalHBRB;
    std::uint64_t seed = 0;
    std::size_t word_count = 0;
    QuantReport quant;
    RetrievalReport retrieval;
    double train_seconds = 0.0;
};

/// Trains every configuration on `seq.training` and evaluates quantization
/// over all frame descriptors plus retrieval over the frame sequence.
inline std::vector<ComparisonRow> compare_strategies(const SynthSequence& seq, std::span<const TrainConfig> configs,
                                                     std::size_t temporal_exclusion = 1) {
    if (configs.size() < 2) throw PreconditionError("comparison needs at least two training configurations");
    std::vector<ComparisonRow> rows;
    for (const auto& cfg : configs) {
        const auto start = std::chrono::steady_clock::now();
        const Vocabulary vocab = train(seq.training, cfg);
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        ComparisonRow row;
        row.strategy = cfg.strategy;
        row.seed = cfg.seed;
        row.word_count = vocab.word_count();
        row.train_seconds = elapsed.count();
        row.quant = quantization_report(vocab, seq.frames);
        row.retrieval = retrieval_report(vocab, seq, temporal_exclusion);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace hbrb
