// Copyright 2026 The HBRB-BoW Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hbrb/error.hpp"

namespace hbrb {

inline constexpr std::size_t kDefaultDescriptorBits = 256;

/// Fixed-width bit string. Bit i lives in octet i / 8 at position 7 - i % 8,
/// so octets print the same way ORB-SLAM vocabulary files print them.
class BinaryDescriptor {
public:
    BinaryDescriptor() = default;

    explicit BinaryDescriptor(std::size_t bits) : octets_(checked_octets(bits), 0) {}

    explicit BinaryDescriptor(std::vector<std::uint8_t> octets) : octets_(std::move(octets)) {
        if (octets_.empty()) throw ConfigError("descriptor must have at least one octet");
    }

    BinaryDescriptor(std::initializer_list<std::uint8_t> octets)
        : BinaryDescriptor(std::vector<std::uint8_t>(octets)) {}

    std::size_t bits() const noexcept { return octets_.size() * 8; }
    std::size_t num_octets() const noexcept { return octets_.size(); }

    std::span<const std::uint8_t> octets() const noexcept { return octets_; }
    std::span<std::uint8_t> octets() noexcept { return octets_; }

    bool bit(std::size_t i) const noexcept { return (octets_[i >> 3] >> (7 - (i & 7))) & 1u; }

    void set_bit(std::size_t i, bool value) noexcept {
        const auto mask = static_cast<std::uint8_t>(1u << (7 - (i & 7)));
        if (value) {
            octets_[i >> 3] |= mask;
        } else {
            octets_[i >> 3] &= static_cast<std::uint8_t>(~mask);
        }
    }

    void flip_bit(std::size_t i) noexcept { octets_[i >> 3] ^= static_cast<std::uint8_t>(1u << (7 - (i & 7))); }

    std::size_t popcount() const noexcept {
        std::size_t n = 0;
        for (auto o : octets_) n += static_cast<std::size_t>(std::popcount(o));
        return n;
    }

    BinaryDescriptor operator~() const {
        BinaryDescriptor out(*this);
        for (auto& o : out.octets_) o = static_cast<std::uint8_t>(~o);
        return out;
    }

    friend bool operator==(const BinaryDescriptor&, const BinaryDescriptor&) = default;
    friend auto operator<=>(const BinaryDescriptor&, const BinaryDescriptor&) = default;

    /// "0b..." style string of all bits, bit 0 first.
    std::string to_bit_string() const {
        std::string s;
        s.reserve(bits());
        for (std::size_t i = 0; i < bits(); ++i) s.push_back(bit(i) ? '1' : '0');
        return s;
    }

    /// Parses a string of '0'/'1' characters (underscores ignored), bit 0 first.
    static BinaryDescriptor from_bit_string(std::string_view text) {
        std::string clean;
        for (char c : text) {
            if (c == '_') continue;
            if (c != '0' && c != '1') throw ConfigError("bit string may only contain 0, 1 and _");
            clean.push_back(c);
        }
        BinaryDescriptor d(clean.size());
        for (std::size_t i = 0; i < clean.size(); ++i) d.set_bit(i, clean[i] == '1');
        return d;
    }

private:
    static std::size_t checked_octets(std::size_t bits) {
        if (bits == 0 || bits % 8 != 0) {
            throw ConfigError("descriptor width must be a positive multiple of 8, got " + std::to_string(bits));
        }
        return bits / 8;
    }

    std::vector<std::uint8_t> octets_;
};

struct BinaryDescriptorHash {
    std::size_t operator()(const BinaryDescriptor& d) const noexcept {
        // FNV-1a
        std::uint64_t h = 1469598103934665603ULL;
        for (auto o : d.octets()) {
            h ^= o;
            h *= 1099511628211ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

/// Per-bit relaxation of a binary descriptor; every component in [0, 1].
struct RealDescriptor {
    std::vector<double> values;

    RealDescriptor() = default;
    explicit RealDescriptor(std::size_t dims, double fill = 0.0) : values(dims, fill) {}
    explicit RealDescriptor(std::vector<double> v) : values(std::move(v)) {}
    RealDescriptor(std::initializer_list<double> v) : values(v) {}

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t i) const noexcept { return values[i]; }
    double& operator[](std::size_t i) noexcept { return values[i]; }

    friend bool operator==(const RealDescriptor&, const RealDescriptor&) = default;
};

inline void require_same_width(const BinaryDescriptor& a, const BinaryDescriptor& b) {
    if (a.bits() != b.bits()) {
        throw ConsistencyError("descriptor width mismatch: " + std::to_string(a.bits()) + " vs " +
                               std::to_string(b.bits()));
    }
}

/// Hamming distance without the width check. Callers guarantee equal widths.
inline std::size_t hamming_unchecked(const BinaryDescriptor& a, const BinaryDescriptor& b) noexcept {
    const std::uint8_t* pa = a.octets().data();
    const std::uint8_t* pb = b.octets().data();
    const std::size_t n = a.num_octets();
    std::size_t dist = 0;
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        std::uint64_t wa;
        std::uint64_t wb;
        std::memcpy(&wa, pa + i, 8);
        std::memcpy(&wb, pb + i, 8);
        dist += static_cast<std::size_t>(std::popcount(wa ^ wb));
    }
    for (; i < n; ++i) dist += static_cast<std::size_t>(std::popcount(static_cast<std::uint8_t>(pa[i] ^ pb[i])));
    return dist;
}

inline std::size_t hamming(const BinaryDescriptor& a, const BinaryDescriptor& b) {
    require_same_width(a, b);
    return hamming_unchecked(a, b);
}

inline RealDescriptor realize(const BinaryDescriptor& b) {
    RealDescriptor r(b.bits());
    for (std::size_t i = 0; i < b.bits(); ++i) r[i] = b.bit(i) ? 1.0 : 0.0;
    return r;
}

/// Bit i is set iff values[i] > threshold. Values equal to the threshold map to 0.
inline BinaryDescriptor binarize(const RealDescriptor& r, double threshold = 0.5) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("binarize threshold must lie in (0, 1)");
    BinaryDescriptor b(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) b.set_bit(i, r[i] > threshold);
    return b;
}

/// Per-bit set-counts over a list of descriptors.
inline std::vector<std::uint32_t> bit_counts(std::span<const BinaryDescriptor> descs) {
    std::vector<std::uint32_t> counts(descs.empty() ? 0 : descs.front().bits(), 0);
    for (const auto& d : descs) {
        require_same_width(descs.front(), d);
        for (std::size_t o = 0; o < d.num_octets(); ++o) {
            const std::uint8_t v = d.octets()[o];
            if (v == 0) continue;
            for (std::size_t b = 0; b < 8; ++b) counts[o * 8 + b] += (v >> (7 - b)) & 1u;
        }
    }
    return counts;
}

/// Bit i is set iff 2 * counts[i] > total (ties go to 0).
inline BinaryDescriptor majority_from_counts(std::span<const std::uint32_t> counts, std::size_t total) {
    BinaryDescriptor out(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) out.set_bit(i, 2 * static_cast<std::size_t>(counts[i]) > total);
    return out;
}

/// Per-bit strict majority vote; exact ties resolve to 0.
inline BinaryDescriptor majority_centroid(std::span<const BinaryDescriptor> descs) {
    if (descs.empty()) throw PreconditionError("majority_centroid of an empty set");
    const auto counts = bit_counts(descs);
    return majority_from_counts(counts, descs.size());
}

inline RealDescriptor real_mean(std::span<const RealDescriptor> points) {
    if (points.empty()) throw PreconditionError("real_mean of an empty set");
    RealDescriptor mean(points.front().size());
    for (const auto& p : points) {
        if (p.size() != mean.size()) throw ConsistencyError("real descriptor length mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) mean[i] += p[i];
    }
    const double n = static_cast<double>(points.size());
    for (auto& v : mean.values) v /= n;
    return mean;
}

inline double euclidean_sq(const RealDescriptor& a, const RealDescriptor& b) {
    if (a.size() != b.size()) {
        throw ConsistencyError("real descriptor length mismatch: " + std::to_string(a.size()) + " vs " +
                               std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

/// Half-open index range of one source image inside a DescriptorSet.
struct GroupRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    friend bool operator==(const GroupRange&, const GroupRange&) = default;
};

/// Descriptors of a corpus plus per-image grouping, stored as group end offsets.
/// No group metadata means the whole set is one group.
class DescriptorSet {
public:
    DescriptorSet() = default;

    explicit DescriptorSet(std::vector<BinaryDescriptor> descs, std::vector<std::size_t> group_ends = {})
        : descriptors_(std::move(descs)), group_ends_(std::move(group_ends)) {
        if (group_ends_.empty() && !descriptors_.empty()) group_ends_.push_back(descriptors_.size());
        validate();
    }

    /// Appends one image worth of descriptors as a new group.
    void add_group(std::span<const BinaryDescriptor> descs) {
        if (group_ends_.empty() && !descriptors_.empty()) group_ends_.push_back(descriptors_.size());
        for (const auto& d : descs) push_checked(d);
        group_ends_.push_back(descriptors_.size());
    }

    const std::vector<BinaryDescriptor>& descriptors() const noexcept { return descriptors_; }
    const std::vector<std::size_t>& group_ends() const noexcept { return group_ends_; }

    std::size_t size() const noexcept { return descriptors_.size(); }
    bool empty() const noexcept { return descriptors_.empty(); }

    /// Width of the descriptors, 0 for an empty set.
    std::size_t bits() const noexcept { return descriptors_.empty() ? 0 : descriptors_.front().bits(); }

    std::vector<GroupRange> groups() const {
        std::vector<GroupRange> out;
        if (group_ends_.empty()) {
            if (!descriptors_.empty()) out.push_back({0, descriptors_.size()});
            return out;
        }
        std::size_t begin = 0;
        for (auto end : group_ends_) {
            out.push_back({begin, end});
            begin = end;
        }
        return out;
    }

    std::size_t group_count() const noexcept {
        return group_ends_.empty() ? (descriptors_.empty() ? 0 : 1) : group_ends_.size();
    }

    std::span<const BinaryDescriptor> group(const GroupRange& r) const noexcept {
        return std::span<const BinaryDescriptor>(descriptors_).subspan(r.begin, r.size());
    }

    friend bool operator==(const DescriptorSet&, const DescriptorSet&) = default;

private:
    void push_checked(const BinaryDescriptor& d) {
        if (!descriptors_.empty()) require_same_width(descriptors_.front(), d);
        descriptors_.push_back(d);
    }

    void validate() const {
        for (const auto& d : descriptors_) require_same_width(descriptors_.front(), d);
        std::size_t prev = 0;
        for (auto end : group_ends_) {
            if (end < prev) throw PreconditionError("group ranges must be ordered");
            prev = end;
        }
        if (!group_ends_.empty() && group_ends_.back() != descriptors_.size()) {
            throw PreconditionError("group ranges must cover every descriptor");
        }
    }

    std::vector<BinaryDescriptor> descriptors_;
    std::vector<std::size_t> group_ends_;
};

}  // namespace hbrb
