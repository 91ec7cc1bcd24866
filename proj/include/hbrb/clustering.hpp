// Copyright 2026 The HBRB-BoW Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hbrb/descriptor.hpp"
#include "hbrb/error.hpp"
#include "hbrb/random.hpp"

namespace hbrb {

struct ClusterConfig {
    std::size_t k = 10;
    std::size_t max_iters = 100;
    std::uint64_t seed = 0;
    /// 0 runs until the assignment fixpoint (or max_iters).
    double min_relative_improvement = 0.0;

    void validate() const {
        if (k < 1) throw ConfigError("cluster count k must be >= 1");
        if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
        if (!(min_relative_improvement >= 0.0)) throw ConfigError("min_relative_improvement must be >= 0");
    }
};

template <class C>
struct ClusterResult {
    std::vector<C> centroids;
    std::vector<std::size_t> assignments;
    /// Hamming sum for binary results, squared-Euclidean sum for real ones.
    double objective = 0.0;
    std::size_t iterations_run = 0;
    /// Objective after each centroid update, one entry per iteration.
    std::vector<double> objective_trace;
};

/// k-means++ seeding over point indices. `weight(i, j)` is the selection
/// weight of point i given chosen point j (squared distance for real points,
/// Hamming distance for binary ones).
template <class WeightFn>
std::vector<std::size_t> kmeanspp_seed_indices(std::size_t n, std::size_t k, WeightFn&& weight, Rng& rng) {
    if (k == 0) throw ConfigError("k-means++ needs k >= 1");
    if (n < k) {
        throw InsufficientPointsError("k-means++ needs at least k points (k = " + std::to_string(k) +
                                      ", points = " + std::to_string(n) + ")");
    }
    std::vector<std::size_t> chosen;
    chosen.reserve(k);
    std::vector<char> taken(n, 0);
    const auto first = static_cast<std::size_t>(rng.index(n));
    chosen.push_back(first);
    taken[first] = 1;

    std::vector<double> residual(n);
    for (std::size_t i = 0; i < n; ++i) residual[i] = static_cast<double>(weight(i, first));

    while (chosen.size() < k) {
        double total = 0.0;
        for (double r : residual) total += r;
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = rng.unit() * total;
            double cum = 0.0;
            std::size_t last_positive = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (residual[i] <= 0.0) continue;
                last_positive = i;
                cum += residual[i];
                if (cum > target) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) pick = last_positive;
        } else {
            // Every remaining point duplicates a chosen one.
            const auto remaining = static_cast<std::uint64_t>(n - chosen.size());
            auto skip = rng.index(remaining);
            for (std::size_t i = 0; i < n; ++i) {
                if (taken[i]) continue;
                if (skip-- == 0) {
                    pick = i;
                    break;
                }
            }
        }
        chosen.push_back(pick);
        taken[pick] = 1;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = static_cast<double>(weight(i, pick));
            if (w < residual[i]) residual[i] = w;
        }
    }
    return chosen;
}

/// k-means++ seeding returning copies of the chosen points.
template <class Point, class Distance>
std::vector<Point> kmeanspp_seed(std::span<const Point> points, std::size_t k, Distance&& distance, Rng& rng) {
    const auto idx = kmeanspp_seed_indices(
        points.size(), k, [&](std::size_t i, std::size_t j) { return distance(points[i], points[j]); }, rng);
    std::vector<Point> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(points[i]);
    return out;
}

namespace detail {

/// Exact squared Euclidean distance between a 0/1 point and a mean of 0/1
/// points, kept as num / den with den = size^2.
struct RationalDistance {
    std::int64_t num = 0;
    std::int64_t den = 1;

    friend bool operator<(const RationalDistance& a, const RationalDistance& b) noexcept {
        return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
    }
    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
};

inline double to_double(std::size_t d) noexcept { return static_cast<double>(d); }
inline double to_double(double d) noexcept { return d; }
inline double to_double(const RationalDistance& d) noexcept { return d.value(); }

/// Binary points, Hamming distance, per-bit majority centroids (k-majority).
class HammingSpace {
public:
    using Centroid = BinaryDescriptor;
    using Distance = std::size_t;

    explicit HammingSpace(std::vector<const BinaryDescriptor*> pts) : pts_(std::move(pts)) {}

    std::size_t size() const noexcept { return pts_.size(); }
    Centroid point_centroid(std::size_t i) const { return *pts_[i]; }
    double seed_weight(std::size_t i, std::size_t j) const noexcept {
        return static_cast<double>(hamming_unchecked(*pts_[i], *pts_[j]));
    }
    void prepare(const std::vector<Centroid>& c) { centroids_ = &c; }
    Distance distance(std::size_t i, std::size_t j) const noexcept {
        return hamming_unchecked(*pts_[i], (*centroids_)[j]);
    }
    static Distance zero() noexcept { return 0; }

    Centroid fit(std::span<const std::size_t> members) const {
        std::vector<std::uint32_t> counts(pts_.front()->bits(), 0);
        for (auto i : members) accumulate_bits(*pts_[i], counts);
        return majority_from_counts(counts, members.size());
    }

    double objective(const std::vector<std::size_t>& assign) const {
        std::size_t total = 0;
        for (std::size_t i = 0; i < pts_.size(); ++i) total += distance(i, assign[i]);
        return static_cast<double>(total);
    }

private:
    static void accumulate_bits(const BinaryDescriptor& d, std::vector<std::uint32_t>& counts) {
        for (std::size_t o = 0; o < d.num_octets(); ++o) {
            const std::uint8_t v = d.octets()[o];
            if (v == 0) continue;
            for (std::size_t b = 0; b < 8; ++b) counts[o * 8 + b] += (v >> (7 - b)) & 1u;
        }
    }

    std::vector<const BinaryDescriptor*> pts_;
    const std::vector<Centroid>* centroids_ = nullptr;
};

/// Arbitrary real points, squared Euclidean distance, arithmetic-mean centroids.
class DenseRealSpace {
public:
    using Centroid = RealDescriptor;
    using Distance = double;

    explicit DenseRealSpace(std::span<const RealDescriptor> pts) : pts_(pts) {}

    std::size_t size() const noexcept { return pts_.size(); }
    Centroid point_centroid(std::size_t i) const { return pts_[i]; }
    double seed_weight(std::size_t i, std::size_t j) const { return euclidean_sq(pts_[i], pts_[j]); }
    void prepare(const std::vector<Centroid>& c) { centroids_ = &c; }
    Distance distance(std::size_t i, std::size_t j) const { return euclidean_sq(pts_[i], (*centroids_)[j]); }
    static Distance zero() noexcept { return 0.0; }

    Centroid fit(std::span<const std::size_t> members) const {
        RealDescriptor mean(pts_.front().size());
        for (auto i : members) {
            for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += pts_[i][d];
        }
        const double n = static_cast<double>(members.size());
        for (auto& v : mean.values) v /= n;
        return mean;
    }

    double objective(const std::vector<std::size_t>& assign) const {
        double total = 0.0;
        for (std::size_t i = 0; i < pts_.size(); ++i) total += distance(i, assign[i]);
        return total;
    }

private:
    std::span<const RealDescriptor> pts_;
    const std::vector<Centroid>* centroids_ = nullptr;
};

/// Mean of realized binary points, kept exactly as per-bit counts over a size.
struct CountCentroid {
    std::vector<std::uint32_t> counts;
    std::uint32_t size = 0;

    RealDescriptor to_real() const {
        RealDescriptor r(counts.size());
        for (std::size_t i = 0; i < counts.size(); ++i) r[i] = static_cast<double>(counts[i]) / size;
        return r;
    }
};

/// Realized binary points in the real domain. Distances are exact rationals:
///   |x - S/n|^2 = (sum_i S_i^2 + sum_{i in x} (n^2 - 2 n S_i)) / n^2.
/// Produces the same clustering as DenseRealSpace over realize(points),
/// without rounding in the distance comparisons.
class RealizedBinarySpace {
public:
    using Centroid = CountCentroid;
    using Distance = RationalDistance;

    explicit RealizedBinarySpace(std::vector<const BinaryDescriptor*> pts) : pts_(std::move(pts)) {
        octets_ = pts_.front()->num_octets();
        use_tables_ = pts_.size() >= kTableThreshold;
    }

    std::size_t size() const noexcept { return pts_.size(); }

    Centroid point_centroid(std::size_t i) const {
        const BinaryDescriptor& d = *pts_[i];
        Centroid c{std::vector<std::uint32_t>(d.bits(), 0), 1};
        for (std::size_t b = 0; b < d.bits(); ++b) c.counts[b] = d.bit(b) ? 1 : 0;
        return c;
    }

    double seed_weight(std::size_t i, std::size_t j) const noexcept {
        return static_cast<double>(hamming_unchecked(*pts_[i], *pts_[j]));
    }

    void prepare(const std::vector<Centroid>& cs) {
        const std::size_t k = cs.size();
        const std::size_t bits = octets_ * 8;
        constants_.assign(k, 0);
        dens_.assign(k, 1);
        weights_.assign(k * bits, 0);
        for (std::size_t j = 0; j < k; ++j) {
            const auto n = static_cast<std::int64_t>(cs[j].size);
            std::int64_t c = 0;
            for (std::size_t b = 0; b < bits; ++b) {
                const auto s = static_cast<std::int64_t>(cs[j].counts[b]);
                c += s * s;
                weights_[j * bits + b] = n * n - 2 * n * s;
            }
            constants_[j] = c;
            dens_[j] = n * n;
        }
        if (!use_tables_) return;
        tables_.assign(k * octets_ * 256, 0);
        for (std::size_t j = 0; j < k; ++j) {
            for (std::size_t o = 0; o < octets_; ++o) {
                std::int64_t* tab = &tables_[(j * octets_ + o) * 256];
                const std::int64_t* w = &weights_[j * bits + o * 8];
                for (unsigned v = 1; v < 256; ++v) {
                    const unsigned low = static_cast<unsigned>(std::countr_zero(v));
                    tab[v] = tab[v & (v - 1)] + w[7 - low];
                }
            }
        }
    }

    Distance distance(std::size_t i, std::size_t j) const noexcept {
        const std::uint8_t* x = pts_[i]->octets().data();
        std::int64_t acc = constants_[j];
        if (use_tables_) {
            const std::int64_t* tab = &tables_[j * octets_ * 256];
            for (std::size_t o = 0; o < octets_; ++o) acc += tab[o * 256 + x[o]];
        } else {
            const std::int64_t* w = &weights_[j * octets_ * 8];
            for (std::size_t o = 0; o < octets_; ++o) {
                unsigned v = x[o];
                while (v != 0) {
                    acc += w[o * 8 + 7 - static_cast<unsigned>(std::countr_zero(v))];
                    v &= v - 1;
                }
            }
        }
        return {acc, dens_[j]};
    }

    static Distance zero() noexcept { return {0, 1}; }

    Centroid fit(std::span<const std::size_t> members) const {
        Centroid c{std::vector<std::uint32_t>(octets_ * 8, 0), static_cast<std::uint32_t>(members.size())};
        for (auto i : members) {
            const auto oct = pts_[i]->octets();
            for (std::size_t o = 0; o < octets_; ++o) {
                unsigned v = oct[o];
                while (v != 0) {
                    ++c.counts[o * 8 + 7 - static_cast<unsigned>(std::countr_zero(v))];
                    v &= v - 1;
                }
            }
        }
        return c;
    }

    double objective(const std::vector<std::size_t>& assign) const {
        std::vector<__int128> sums(dens_.size(), 0);
        for (std::size_t i = 0; i < pts_.size(); ++i) sums[assign[i]] += distance(i, assign[i]).num;
        long double total = 0.0L;
        for (std::size_t j = 0; j < sums.size(); ++j) {
            total += static_cast<long double>(sums[j]) / static_cast<long double>(dens_[j]);
        }
        return static_cast<double>(total);
    }

private:
    static constexpr std::size_t kTableThreshold = 128;

    std::vector<const BinaryDescriptor*> pts_;
    std::size_t octets_ = 0;
    bool use_tables_ = false;
    std::vector<std::int64_t> constants_;
    std::vector<std::int64_t> dens_;
    std::vector<std::int64_t> weights_;
    std::vector<std::int64_t> tables_;
};

template <class Distance>
struct Assignment {
    std::vector<std::size_t> cluster;
    std::vector<Distance> distance;
};

/// Nearest centroid per point, ties to the lowest centroid index.
template <class Space>
Assignment<typename Space::Distance> assign_nearest(const Space& space, std::size_t k) {
    Assignment<typename Space::Distance> out;
    out.cluster.resize(space.size());
    out.distance.resize(space.size());
    for (std::size_t i = 0; i < space.size(); ++i) {
        std::size_t best = 0;
        auto best_d = space.distance(i, 0);
        for (std::size_t j = 1; j < k; ++j) {
            const auto d = space.distance(i, j);
            if (d < best_d) {
                best = j;
                best_d = d;
            }
        }
        out.cluster[i] = best;
        out.distance[i] = best_d;
    }
    return out;
}

/// Refills every empty cluster with the member of the currently largest
/// cluster that is farthest from its centroid (lowest point index on ties).
/// `on_move(point, cluster)` is called once per repair.
template <class Distance, class OnMove>
void repair_empty_clusters(Assignment<Distance>& a, std::size_t k, Distance zero, OnMove&& on_move) {
    std::vector<std::size_t> counts(k, 0);
    for (auto c : a.cluster) ++counts[c];
    for (std::size_t j = 0; j < k; ++j) {
        if (counts[j] != 0) continue;
        std::size_t largest = 0;
        for (std::size_t c = 1; c < k; ++c) {
            if (counts[c] > counts[largest]) largest = c;
        }
        if (counts[largest] < 2) throw InternalError("cannot repair empty cluster: too few points");
        std::size_t far = a.cluster.size();
        for (std::size_t i = 0; i < a.cluster.size(); ++i) {
            if (a.cluster[i] != largest) continue;
            if (far == a.cluster.size() || a.distance[far] < a.distance[i]) far = i;
        }
        a.cluster[far] = j;
        a.distance[far] = zero;
        --counts[largest];
        counts[j] = 1;
        on_move(far, j);
    }
}

inline std::vector<std::vector<std::size_t>> members_of(const std::vector<std::size_t>& assign, std::size_t k) {
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < assign.size(); ++i) members[assign[i]].push_back(i);
    return members;
}

/// Lloyd iteration shared by every metric space: assign, repair, update,
/// until the assignment reaches a fixpoint or max_iters runs out.
template <class Space>
ClusterResult<typename Space::Centroid> lloyd_loop(Space& space, const ClusterConfig& cfg) {
    cfg.validate();
    const std::size_t n = space.size();
    if (n == 0) throw PreconditionError("clustering needs at least one point");
    Rng rng(cfg.seed);
    const auto seeds = kmeanspp_seed_indices(
        n, cfg.k, [&](std::size_t i, std::size_t j) { return space.seed_weight(i, j); }, rng);

    ClusterResult<typename Space::Centroid> result;
    result.centroids.reserve(cfg.k);
    for (auto s : seeds) result.centroids.push_back(space.point_centroid(s));
    space.prepare(result.centroids);

    double prev_objective = std::numeric_limits<double>::infinity();
    for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
        auto a = assign_nearest(space, cfg.k);
        repair_empty_clusters(a, cfg.k, Space::zero(), [](std::size_t, std::size_t) {});
        const bool changed = a.cluster != result.assignments;
        result.assignments = std::move(a.cluster);

        const auto members = members_of(result.assignments, cfg.k);
        for (std::size_t j = 0; j < cfg.k; ++j) result.centroids[j] = space.fit(members[j]);
        space.prepare(result.centroids);

        result.objective = space.objective(result.assignments);
        result.objective_trace.push_back(result.objective);
        result.iterations_run = iter;
        if (!changed) break;
        if (cfg.min_relative_improvement > 0.0 && prev_objective > 0.0 &&
            prev_objective != std::numeric_limits<double>::infinity() &&
            (prev_objective - result.objective) / prev_objective < cfg.min_relative_improvement) {
            break;
        }
        prev_objective = result.objective;
    }
    return result;
}

inline std::vector<const BinaryDescriptor*> pointers_to(std::span<const BinaryDescriptor> descs) {
    std::vector<const BinaryDescriptor*> out;
    out.reserve(descs.size());
    for (const auto& d : descs) {
        require_same_width(descs.front(), d);
        out.push_back(&d);
    }
    return out;
}

inline ClusterResult<BinaryDescriptor> kmajority(std::vector<const BinaryDescriptor*> pts, const ClusterConfig& cfg) {
    HammingSpace space(std::move(pts));
    return lloyd_loop(space, cfg);
}

/// Lloyd in the real domain over realized binary points. Also returns the
/// exact count centroids so callers can binarize without rounding.
struct RealizedLloyd {
    ClusterResult<RealDescriptor> result;
    std::vector<CountCentroid> counts;
};

inline RealizedLloyd lloyd_realized(std::vector<const BinaryDescriptor*> pts, const ClusterConfig& cfg) {
    RealizedBinarySpace space(std::move(pts));
    auto exact = lloyd_loop(space, cfg);
    RealizedLloyd out;
    out.result.assignments = std::move(exact.assignments);
    out.result.objective = exact.objective;
    out.result.iterations_run = exact.iterations_run;
    out.result.objective_trace = std::move(exact.objective_trace);
    for (const auto& c : exact.centroids) out.result.centroids.push_back(c.to_real());
    out.counts = std::move(exact.centroids);
    return out;
}

inline ClusterResult<BinaryDescriptor> brb_kmeans(const std::vector<const BinaryDescriptor*>& pts,
                                                  const ClusterConfig& cfg) {
    auto real = lloyd_realized(pts, cfg);

    ClusterResult<BinaryDescriptor> out;
    out.iterations_run = real.result.iterations_run;
    out.objective_trace = real.result.objective_trace;
    for (const auto& c : real.counts) out.centroids.push_back(majority_from_counts(c.counts, c.size));

    HammingSpace space(pts);
    space.prepare(out.centroids);
    auto a = assign_nearest(space, cfg.k);
    repair_empty_clusters(a, cfg.k, HammingSpace::zero(),
                          [&](std::size_t point, std::size_t cluster) { out.centroids[cluster] = *pts[point]; });
    out.assignments = std::move(a.cluster);
    space.prepare(out.centroids);
    out.objective = space.objective(out.assignments);
    return out;
}

}  // namespace detail

/// k-majority: Hamming assignment plus per-bit majority centroids.
inline ClusterResult<BinaryDescriptor> kmajority(std::span<const BinaryDescriptor> descs, const ClusterConfig& cfg) {
    if (descs.empty()) throw PreconditionError("kmajority needs at least one descriptor");
    return detail::kmajority(detail::pointers_to(descs), cfg);
}

/// Standard Lloyd k-means with squared Euclidean distance.
inline ClusterResult<RealDescriptor> lloyd_real(std::span<const RealDescriptor> points, const ClusterConfig& cfg) {
    if (points.empty()) throw PreconditionError("lloyd_real needs at least one point");
    for (const auto& p : points) {
        if (p.size() != points.front().size()) throw ConsistencyError("real descriptor length mismatch");
    }
    detail::DenseRealSpace space(points);
    return detail::lloyd_loop(space, cfg);
}

/// lloyd_real(realize(descs)) computed with exact arithmetic on the 0/1 points.
inline ClusterResult<RealDescriptor> lloyd_realized(std::span<const BinaryDescriptor> descs,
                                                    const ClusterConfig& cfg) {
    if (descs.empty()) throw PreconditionError("lloyd_realized needs at least one descriptor");
    return detail::lloyd_realized(detail::pointers_to(descs), cfg).result;
}

/// Binary-to-real-and-back k-means: realize once, run Lloyd, binarize the
/// centroids at 0.5, then re-assign every descriptor by Hamming distance.
inline ClusterResult<BinaryDescriptor> brb_kmeans(std::span<const BinaryDescriptor> descs, const ClusterConfig& cfg) {
    if (descs.empty()) throw PreconditionError("brb_kmeans needs at least one descriptor");
    return detail::brb_kmeans(detail::pointers_to(descs), cfg);
}

}  // namespace hbrb
