// Copyright 2026 The HBRB-BoW Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "hbrb/descriptor.hpp"
#include "oracles.hpp"

namespace hbrb {
namespace {

BinaryDescriptor bits(const char* s) { return BinaryDescriptor::from_bit_string(s); }

TEST(BinaryDescriptor, BitOrderIsMsbFirstWithinOctets) {
    const BinaryDescriptor d{0x81, 0x40};
    EXPECT_TRUE(d.bit(0));
    EXPECT_TRUE(d.bit(7));
    EXPECT_FALSE(d.bit(1));
    EXPECT_TRUE(d.bit(9));
    EXPECT_EQ(bits("1100_1010"), (BinaryDescriptor{0xCA}));
}

TEST(BinaryDescriptor, RejectsWidthsThatAreNotOctetMultiples) {
    EXPECT_THROW(BinaryDescriptor(0), ConfigError);
    EXPECT_THROW(BinaryDescriptor(12), ConfigError);
    EXPECT_EQ(BinaryDescriptor().bits(), 0u);
    EXPECT_EQ(BinaryDescriptor(kDefaultDescriptorBits).num_octets(), 32u);
}

TEST(Hamming, Examples) {
    const auto x = bits("1011_0001");
    EXPECT_EQ(hamming(x, x), 0u);
    EXPECT_EQ(hamming(BinaryDescriptor(8), ~BinaryDescriptor(8)), 8u);
    EXPECT_EQ(hamming(bits("1100_1010"), bits("1010_1010")), 2u);
}

TEST(Hamming, WidthMismatchIsAConsistencyError) {
    EXPECT_THROW(hamming(BinaryDescriptor(8), BinaryDescriptor(16)), ConsistencyError);
}

TEST(Hamming, MatchesBitwiseOracleAndIsAMetric) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 500; ++t) {
        // Odd octet counts exercise the tail loop.
        const std::size_t width = 8 * (1 + rng() % 40);
        const auto a = oracle::random_descriptor(width, rng);
        const auto b = oracle::random_descriptor(width, rng);
        const auto c = oracle::random_descriptor(width, rng);
        EXPECT_EQ(hamming(a, b), oracle::bitwise_hamming(a, b));
        EXPECT_EQ(hamming(a, b), hamming(b, a));
        EXPECT_LE(hamming(a, b), width);
        EXPECT_LE(hamming(a, c), hamming(a, b) + hamming(b, c));
    }
}

TEST(Realize, Examples) {
    EXPECT_EQ(realize(BinaryDescriptor(8)), RealDescriptor(8, 0.0));
    EXPECT_EQ(realize(bits("1000_0001")), (RealDescriptor{1, 0, 0, 0, 0, 0, 0, 1}));
}

TEST(Binarize, ExamplesAndTieRule) {
    EXPECT_EQ(binarize(RealDescriptor{1, 1, 0, 0, 0, 0, 0, 0}), bits("1100_0000"));
    EXPECT_EQ(binarize(RealDescriptor(8, 0.5), 0.5), BinaryDescriptor(8));
    const auto b = binarize(RealDescriptor{0.51, 0.49, 0, 0, 0, 0, 0, 0});
    EXPECT_TRUE(b.bit(0));
    EXPECT_FALSE(b.bit(1));
    EXPECT_THROW(binarize(RealDescriptor(8), 1.0), ConfigError);
}

TEST(Binarize, RealizeRoundTripIsIdentity) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 1000; ++t) {
        const auto x = oracle::random_descriptor(256, rng);
        ASSERT_EQ(binarize(realize(x), 0.5), x);
    }
}

TEST(MajorityCentroid, Examples) {
    const auto x = bits("0110_1001");
    EXPECT_EQ(majority_centroid(std::vector{x}), x);
    // Per-bit votes (3, 1, 1, 0) out of 3.
    EXPECT_EQ(majority_centroid(std::vector{bits("1100_0000"), bits("1010_0000"), bits("1000_0000")}),
              bits("1000_0000"));
    EXPECT_EQ(majority_centroid(std::vector{x, ~x}), BinaryDescriptor(8));
    EXPECT_THROW(majority_centroid(std::vector<BinaryDescriptor>{}), PreconditionError);
    EXPECT_THROW(majority_centroid(std::vector{BinaryDescriptor(8), BinaryDescriptor(16)}), ConsistencyError);
}

TEST(MajorityCentroid, EqualsBinarizedRealMean) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 200; ++t) {
        const auto descs = oracle::random_descriptors(1 + rng() % 12, 64, rng);
        std::vector<RealDescriptor> reals;
        for (const auto& d : descs) reals.push_back(realize(d));
        ASSERT_EQ(majority_centroid(descs), binarize(real_mean(reals), 0.5));
    }
}

TEST(MajorityCentroid, MinimizesTotalHammingExhaustively) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 60; ++t) {
        const std::size_t n = 1 + rng() % 7;
        const auto descs = oracle::random_descriptors(n, 8, rng);
        const auto m = majority_centroid(descs);
        std::size_t total = 0;
        for (const auto& d : descs) total += oracle::bitwise_hamming(d, m);
        ASSERT_EQ(total, oracle::brute_force_min_total(descs, 8));
    }
}

TEST(RealMean, Examples) {
    const RealDescriptor r{0.25, 0.75, 1.0};
    EXPECT_EQ(real_mean(std::vector{r}), r);
    EXPECT_EQ(real_mean(std::vector{RealDescriptor(4, 0.0), RealDescriptor(4, 1.0)}), RealDescriptor(4, 0.5));
    EXPECT_THROW(real_mean(std::vector<RealDescriptor>{}), PreconditionError);
}

TEST(RealMean, MatchesSummationOracleAndStaysInUnitBox) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<RealDescriptor> pts(10, RealDescriptor(32));
    for (auto& p : pts) {
        for (auto& v : p.values) v = unit(rng);
    }
    const auto mean = real_mean(pts);
    for (std::size_t i = 0; i < 32; ++i) {
        double s = 0.0;
        for (const auto& p : pts) s += p[i];
        EXPECT_NEAR(mean[i], s / 10.0, 1e-12);
        EXPECT_GE(mean[i], 0.0);
        EXPECT_LE(mean[i], 1.0);
    }
}

TEST(RealMean, IsAStationaryPointOfSquaredError) {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<RealDescriptor> pts(15, RealDescriptor(16));
    for (auto& p : pts) {
        for (auto& v : p.values) v = unit(rng);
    }
    const auto mean = real_mean(pts);
    auto objective = [&](const RealDescriptor& c) {
        double s = 0.0;
        for (const auto& p : pts) s += euclidean_sq(p, c);
        return s;
    };
    const double base = objective(mean);
    for (std::size_t i = 0; i < 16; ++i) {
        for (double eps : {1e-3, -1e-3}) {
            auto moved = mean;
            moved[i] += eps;
            EXPECT_GE(objective(moved), base);
        }
    }
}

TEST(EuclideanSq, ExamplesAndHammingEquivalence) {
    const RealDescriptor a{0.3, 0.6};
    EXPECT_EQ(euclidean_sq(a, a), 0.0);
    EXPECT_DOUBLE_EQ(euclidean_sq(RealDescriptor{0.5, 0.5}, RealDescriptor{0.0, 1.0}), 0.5);
    EXPECT_THROW(euclidean_sq(RealDescriptor(2), RealDescriptor(3)), ConsistencyError);

    std::mt19937_64 rng(23);
    for (int t = 0; t < 1000; ++t) {
        const auto x = oracle::random_descriptor(256, rng);
        const auto y = oracle::random_descriptor(256, rng);
        ASSERT_EQ(euclidean_sq(realize(x), realize(y)), static_cast<double>(hamming(x, y)));
    }
}

TEST(DescriptorSet, GroupsDefaultToOneAndMustCover) {
    std::mt19937_64 rng(29);
    const auto descs = oracle::random_descriptors(5, 32, rng);
    const DescriptorSet whole(descs);
    ASSERT_EQ(whole.groups().size(), 1u);
    EXPECT_EQ(whole.groups()[0], (GroupRange{0, 5}));
    EXPECT_EQ(whole.group_count(), 1u);
    EXPECT_EQ(DescriptorSet().group_count(), 0u);

    const DescriptorSet split(descs, {2, 5});
    EXPECT_EQ(split.groups(), (std::vector<GroupRange>{{0, 2}, {2, 5}}));
    EXPECT_THROW(DescriptorSet(descs, {2, 4}), PreconditionError);
    EXPECT_THROW(DescriptorSet(descs, {3, 2, 5}), PreconditionError);

    DescriptorSet built;
    built.add_group(std::span(descs).first(2));
    built.add_group(std::span(descs).subspan(2));
    EXPECT_EQ(built, split);
    EXPECT_THROW(built.add_group(std::vector{BinaryDescriptor(8)}), ConsistencyError);
}

}  // namespace
}  // namespace hbrb
