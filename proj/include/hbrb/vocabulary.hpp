// Copyright 2026 The HBRB-BoW Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hbrb/clustering.hpp"
#include "hbrb/descriptor.hpp"
#include "hbrb/error.hpp"
#include "hbrb/random.hpp"

namespace hbrb {

/// How each level of the tree is clustered.
enum class Strategy {
    KMajority,   ///< Hamming assignment, per-bit majority centroids at every node.
    LocalBRB,    ///< Binary-to-real-and-back k-means run independently at every node.
    GlobalHBRB,  ///< Realize once at the root, real-domain Lloyd down the tree, binarize at the leaves.
};

inline std::string_view to_string(Strategy s) noexcept {
    switch (s) {
        case Strategy::KMajority: return "kmajority";
        case Strategy::LocalBRB: return "local-brb";
        case Strategy::GlobalHBRB: return "hbrb";
    }
    return "unknown";
}

inline Strategy parse_strategy(std::string_view name) {
    if (name == "kmajority") return Strategy::KMajority;
    if (name == "local-brb") return Strategy::LocalBRB;
    if (name == "hbrb") return Strategy::GlobalHBRB;
    throw ConfigError("unknown strategy '" + std::string(name) + "' (expected kmajority, local-brb or hbrb)");
}

using NodeId = std::uint32_t;
using WordId = std::uint32_t;

inline constexpr NodeId kNoParent = std::numeric_limits<NodeId>::max();
inline constexpr std::size_t kDefaultBranching = 10;
inline constexpr std::size_t kDefaultLevels = 6;

struct VocabNode {
    NodeId id = 0;
    NodeId parent = kNoParent;
    std::vector<NodeId> children;
    /// Empty (zero-width) for the root.
    BinaryDescriptor centroid;
    std::optional<WordId> word_id;
    /// IDF weight; leaves only.
    double weight = 0.0;

    bool is_leaf() const noexcept { return id != 0 && children.empty(); }
};

/// Hierarchical vocabulary. Node ids follow breadth-first creation order,
/// word ids follow depth-first leaf order. Scoring is L1, weighting TF-IDF.
struct Vocabulary {
    std::size_t k = kDefaultBranching;
    std::size_t levels = kDefaultLevels;
    /// Unknown for vocabularies loaded from the ORB-SLAM text format.
    std::optional<Strategy> strategy;
    std::size_t descriptor_bits = kDefaultDescriptorBits;
    std::vector<VocabNode> nodes;
    /// word id -> leaf node id
    std::vector<NodeId> words;

    std::size_t word_count() const noexcept { return words.size(); }
    const VocabNode& leaf_of(WordId w) const { return nodes.at(words.at(w)); }
};

struct TrainConfig {
    std::size_t k = kDefaultBranching;
    std::size_t levels = kDefaultLevels;
    Strategy strategy = Strategy::GlobalHBRB;
    /// Per-node clustering options; k and seed are overridden per node.
    ClusterConfig cluster{};
    std::uint64_t seed = 0;
    /// 0 = HBRB_THREADS from the environment, else all cores.
    std::size_t threads = 0;

    void validate() const {
        if (k < 2) throw ConfigError("branching factor k must be >= 2");
        if (levels < 1) throw ConfigError("depth L must be >= 1");
        if (cluster.max_iters < 1) throw ConfigError("max_iters must be >= 1");
    }
};

inline std::size_t resolve_thread_count(std::size_t requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("HBRB_THREADS"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

struct ChildPlan {
    enum class Kind { Leaf, SplitDistinct, SplitK };
    Kind kind = Kind::Leaf;
    std::size_t children = 0;
};

/// Decides how a node holding `points` at `depth` is split.
inline ChildPlan small_node_rule(std::span<const BinaryDescriptor* const> points, std::size_t k, std::size_t depth,
                                 std::size_t levels) {
    if (points.size() <= 1 || depth >= levels) return {ChildPlan::Kind::Leaf, 0};
    std::unordered_set<BinaryDescriptor, BinaryDescriptorHash> distinct;
    for (const auto* p : points) {
        distinct.insert(*p);
        if (distinct.size() >= k) return {ChildPlan::Kind::SplitK, k};
    }
    if (distinct.size() == 1) return {ChildPlan::Kind::Leaf, 0};
    return {ChildPlan::Kind::SplitDistinct, distinct.size()};
}

inline ChildPlan small_node_rule(std::span<const BinaryDescriptor> points, std::size_t k, std::size_t depth,
                                 std::size_t levels) {
    const auto ptrs = detail::pointers_to(points);
    return small_node_rule(std::span<const BinaryDescriptor* const>(ptrs), k, depth, levels);
}

struct WordLookup {
    WordId word_id = 0;
    double weight = 0.0;
    NodeId node_id = 0;
};

/// Greedy descent: at each level take the child with the smallest Hamming
/// distance, ties to the first child in stored order.
inline WordLookup lookup_word(const Vocabulary& vocab, const BinaryDescriptor& d) {
    if (d.bits() != vocab.descriptor_bits) {
        throw ConsistencyError("descriptor width " + std::to_string(d.bits()) + " does not match vocabulary width " +
                               std::to_string(vocab.descriptor_bits));
    }
    if (vocab.nodes.empty() || vocab.nodes.front().children.empty()) throw PreconditionError("vocabulary is empty");
    NodeId cur = 0;
    while (!vocab.nodes[cur].children.empty()) {
        const auto& children = vocab.nodes[cur].children;
        NodeId best = children.front();
        std::size_t best_d = hamming_unchecked(d, vocab.nodes[best].centroid);
        for (std::size_t c = 1; c < children.size(); ++c) {
            const std::size_t dist = hamming_unchecked(d, vocab.nodes[children[c]].centroid);
            if (dist < best_d) {
                best_d = dist;
                best = children[c];
            }
        }
        cur = best;
    }
    const auto& leaf = vocab.nodes[cur];
    if (!leaf.word_id) throw InternalError("leaf " + std::to_string(cur) + " has no word id");
    return {*leaf.word_id, leaf.weight, cur};
}

/// Numbers the leaves 0..W-1 depth-first, children in stored order.
inline void assign_word_ids(Vocabulary& vocab) {
    vocab.words.clear();
    if (vocab.nodes.empty()) return;
    std::vector<NodeId> stack{0};
    while (!stack.empty()) {
        const NodeId id = stack.back();
        stack.pop_back();
        auto& node = vocab.nodes[id];
        if (node.is_leaf()) {
            if (node.word_id) throw InternalError("node " + std::to_string(id) + " already has a word id");
            node.word_id = static_cast<WordId>(vocab.words.size());
            vocab.words.push_back(id);
            continue;
        }
        for (auto it = node.children.rbegin(); it != node.children.rend(); ++it) stack.push_back(*it);
    }
}

/// weight_i = ln(N / N_i) over the corpus groups; unseen words get 0.
inline void compute_idf(Vocabulary& vocab, const DescriptorSet& corpus) {
    const auto groups = corpus.groups();
    if (groups.empty()) throw PreconditionError("IDF needs at least one group");
    std::vector<std::size_t> doc_freq(vocab.word_count(), 0);
    std::vector<std::size_t> last_seen(vocab.word_count(), std::numeric_limits<std::size_t>::max());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (const auto& d : corpus.group(groups[g])) {
            const WordId w = lookup_word(vocab, d).word_id;
            if (last_seen[w] != g) {
                last_seen[w] = g;
                ++doc_freq[w];
            }
        }
    }
    const double n = static_cast<double>(groups.size());
    for (auto& node : vocab.nodes) node.weight = 0.0;
    for (WordId w = 0; w < vocab.word_count(); ++w) {
        vocab.nodes[vocab.words[w]].weight = doc_freq[w] == 0 ? 0.0 : std::log(n / static_cast<double>(doc_freq[w]));
    }
}

/// Throws InternalError when a structural invariant does not hold.
inline void check_invariants(const Vocabulary& vocab) {
    auto fail = [](const std::string& what) { throw InternalError("vocabulary invariant violated: " + what); };
    if (vocab.nodes.empty()) fail("no root");
    const auto& root = vocab.nodes.front();
    if (root.id != 0 || root.parent != kNoParent) fail("node 0 is not a root");
    if (root.centroid.bits() != 0) fail("root carries a centroid");
    if (root.children.empty()) fail("root has no children");

    std::vector<std::size_t> depth(vocab.nodes.size(), 0);
    std::vector<char> seen(vocab.nodes.size(), 0);
    std::vector<NodeId> queue{0};
    seen[0] = 1;
    std::size_t leaves = 0;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const auto& node = vocab.nodes[queue[qi]];
        if (node.children.size() > vocab.k) fail("node " + std::to_string(node.id) + " has more than k children");
        if (node.is_leaf()) {
            ++leaves;
            if (depth[node.id] > vocab.levels) fail("leaf deeper than L");
            if (!node.word_id) fail("leaf without word id");
            if (!(node.weight >= 0.0) || !std::isfinite(node.weight)) fail("bad leaf weight");
        } else if (node.word_id) {
            fail("internal node with word id");
        } else if (node.weight != 0.0) {
            fail("internal node with nonzero weight");
        }
        for (auto c : node.children) {
            if (c >= vocab.nodes.size()) fail("child id out of range");
            if (seen[c]) fail("node reachable twice");
            const auto& child = vocab.nodes[c];
            if (child.id != c) fail("node id does not match its position");
            if (child.parent != node.id) fail("parent/child links disagree at node " + std::to_string(c));
            if (child.centroid.bits() != vocab.descriptor_bits) fail("centroid width mismatch");
            seen[c] = 1;
            depth[c] = depth[node.id] + 1;
            queue.push_back(c);
        }
    }
    if (queue.size() != vocab.nodes.size()) fail("unreachable nodes");
    if (leaves != vocab.word_count()) fail("word count differs from leaf count");
    std::vector<char> used(vocab.word_count(), 0);
    for (WordId w = 0; w < vocab.word_count(); ++w) {
        const NodeId id = vocab.words[w];
        if (id >= vocab.nodes.size() || !vocab.nodes[id].is_leaf()) fail("word maps to a non-leaf");
        if (vocab.nodes[id].word_id != w) fail("word table disagrees with node word ids");
        if (used[w]) fail("duplicate word id");
        used[w] = 1;
    }
}

namespace detail {

struct NodeTask {
    NodeId node = 0;
    std::size_t depth = 0;
    std::vector<std::size_t> members;
    std::vector<std::uint32_t> path;
};

struct ChildSpec {
    BinaryDescriptor centroid;
    std::vector<std::size_t> members;
};

inline std::vector<ChildSpec> group_by_cluster(const std::vector<BinaryDescriptor>& centroids,
                                               const std::vector<std::size_t>& assignments,
                                               const std::vector<std::size_t>& members) {
    std::vector<ChildSpec> children(centroids.size());
    for (std::size_t j = 0; j < centroids.size(); ++j) children[j].centroid = centroids[j];
    for (std::size_t i = 0; i < assignments.size(); ++i) children[assignments[i]].members.push_back(members[i]);
    return children;
}

/// Children of one node; empty means the node is a leaf.
inline std::vector<ChildSpec> plan_children(const std::vector<BinaryDescriptor>& corpus, const NodeTask& task,
                                            const TrainConfig& cfg) {
    std::vector<const BinaryDescriptor*> pts;
    pts.reserve(task.members.size());
    for (auto m : task.members) pts.push_back(&corpus[m]);

    const ChildPlan plan = small_node_rule(std::span<const BinaryDescriptor* const>(pts), cfg.k, task.depth, cfg.levels);
    if (plan.kind == ChildPlan::Kind::Leaf) {
        if (task.node != 0) return {};
        // The root never stores a centroid, so a degenerate corpus still gets one word.
        std::vector<ChildSpec> one(1);
        one[0].centroid = *pts.front();
        one[0].members = task.members;
        return one;
    }
    if (plan.kind == ChildPlan::Kind::SplitDistinct) {
        std::unordered_map<BinaryDescriptor, std::size_t, BinaryDescriptorHash> slot;
        std::vector<ChildSpec> children;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            auto [it, inserted] = slot.emplace(*pts[i], children.size());
            if (inserted) children.push_back({*pts[i], {}});
            children[it->second].members.push_back(task.members[i]);
        }
        return children;
    }

    ClusterConfig cc = cfg.cluster;
    cc.k = cfg.k;
    cc.seed = derive_seed(cfg.seed, task.path);
    switch (cfg.strategy) {
        case Strategy::KMajority: {
            auto r = detail::kmajority(std::move(pts), cc);
            return group_by_cluster(r.centroids, r.assignments, task.members);
        }
        case Strategy::LocalBRB: {
            auto r = detail::brb_kmeans(pts, cc);
            return group_by_cluster(r.centroids, r.assignments, task.members);
        }
        case Strategy::GlobalHBRB: {
            // Children are partitioned by the real-domain assignment; the
            // binarized centroid is only what gets stored in the tree.
            auto r = detail::lloyd_realized(std::move(pts), cc);
            std::vector<BinaryDescriptor> binary;
            binary.reserve(r.counts.size());
            for (const auto& c : r.counts) binary.push_back(majority_from_counts(c.counts, c.size));
            return group_by_cluster(binary, r.result.assignments, task.members);
        }
    }
    throw InternalError("unhandled strategy");
}

template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace detail

/// Training-time partition of the corpus: member indices per leaf node id
/// (empty for internal nodes).
struct TrainDiagnostics {
    std::vector<std::vector<std::size_t>> leaf_members;
};

/// Builds a vocabulary tree over the corpus, one level at a time. Nodes of a
/// level are clustered independently (possibly in parallel) and their children
/// appended in node order, so the result does not depend on the thread count.
inline Vocabulary train(const DescriptorSet& corpus, const TrainConfig& cfg, TrainDiagnostics* diagnostics = nullptr) {
    cfg.validate();
    if (corpus.empty()) throw PreconditionError("cannot train on an empty corpus");
    const auto& descs = corpus.descriptors();
    const std::size_t threads = resolve_thread_count(cfg.threads);

    Vocabulary vocab;
    vocab.k = cfg.k;
    vocab.levels = cfg.levels;
    vocab.strategy = cfg.strategy;
    vocab.descriptor_bits = corpus.bits();
    vocab.nodes.push_back(VocabNode{});

    if (diagnostics != nullptr) diagnostics->leaf_members.assign(1, {});
    std::vector<detail::NodeTask> frontier(1);
    frontier[0].members.resize(descs.size());
    for (std::size_t i = 0; i < descs.size(); ++i) frontier[0].members[i] = i;

    while (!frontier.empty()) {
        std::vector<std::vector<detail::ChildSpec>> plans(frontier.size());
        detail::parallel_for(frontier.size(), threads,
                             [&](std::size_t i) { plans[i] = detail::plan_children(descs, frontier[i], cfg); });

        std::vector<detail::NodeTask> next;
        for (std::size_t t = 0; t < frontier.size(); ++t) {
            auto& task = frontier[t];
            for (std::size_t c = 0; c < plans[t].size(); ++c) {
                auto& spec = plans[t][c];
                const auto id = static_cast<NodeId>(vocab.nodes.size());
                VocabNode node;
                node.id = id;
                node.parent = task.node;
                node.centroid = std::move(spec.centroid);
                vocab.nodes.push_back(std::move(node));
                vocab.nodes[task.node].children.push_back(id);

                detail::NodeTask child;
                child.node = id;
                child.depth = task.depth + 1;
                child.members = std::move(spec.members);
                child.path = task.path;
                child.path.push_back(static_cast<std::uint32_t>(c));
                next.push_back(std::move(child));
            }
            if (diagnostics != nullptr) {
                diagnostics->leaf_members.resize(vocab.nodes.size());
                if (plans[t].empty()) diagnostics->leaf_members[task.node] = std::move(task.members);
            }
            task.members.clear();
            task.members.shrink_to_fit();
        }
        frontier = std::move(next);
    }

    assign_word_ids(vocab);
    compute_idf(vocab, corpus);
    check_invariants(vocab);
    return vocab;
}

}  // namespace hbrb
