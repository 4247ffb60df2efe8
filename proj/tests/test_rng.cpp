#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "shiftlab/rng.hpp"

using shiftlab::Philox4x32;
using shiftlab::RandomStream;

// Known-answer vectors of the Random123 reference implementation.
TEST(Philox, KnownAnswerZero) {
  const auto out = Philox4x32::block({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out, (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerOnes) {
  const auto out = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out, (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi) {
  const auto out = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out, (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, UsableAtCompileTime) {
  constexpr auto out = Philox4x32::block({0, 0, 0, 0}, {0, 0});
  static_assert(out[0] == 0x6627e8d5u);
  SUCCEED();
}

TEST(RandomStream, KeyedDrawsIgnoreOrder) {
  RandomStream a(7, 3, 0);
  RandomStream b(7, 3, 0);
  const auto x5 = a.normal_pair(5);
  (void)b.next_normal();
  (void)b.normal_pair(2);
  EXPECT_EQ(b.normal_pair(5), x5);
}

TEST(RandomStream, StreamsDiffer) {
  RandomStream base(7, 3, 0);
  EXPECT_NE(base.normal_pair(1), RandomStream(8, 3, 0).normal_pair(1));
  EXPECT_NE(base.normal_pair(1), RandomStream(7, 4, 0).normal_pair(1));
  EXPECT_NE(base.normal_pair(1), RandomStream(7, 3, 1).normal_pair(1));
  EXPECT_EQ(base.split(1).normal_pair(1), RandomStream(7, 3, 1).normal_pair(1));
}

TEST(RandomStream, SequentialDoesNotAliasKeyed) {
  RandomStream a(1, 0, 0);
  RandomStream b(1, 0, 0);
  std::set<double> keyed;
  for (int i = 0; i < 100; ++i) keyed.insert(a.uniform(static_cast<std::uint64_t>(i)));
  for (int i = 0; i < 100; ++i) EXPECT_EQ(keyed.count(b.next_uniform()), 0u);
}

TEST(RandomStream, SameSeedSameSequence) {
  RandomStream a(99), b(99);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_normal(), b.next_normal());
}

TEST(RandomStream, UniformOpenInterval) {
  RandomStream a(5);
  for (int i = 0; i < 100000; ++i) {
    const double u = a.next_uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(RandomStream, NormalMoments) {
  RandomStream a(11);
  const int n = 200000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n / 2; ++i) {
    const auto p = a.normal_pair(static_cast<std::uint64_t>(i));
    for (double x : p) {
      s1 += x;
      s2 += x * x;
      s4 += x * x * x * x;
    }
  }
  const double m1 = s1 / n, m2 = s2 / n, m4 = s4 / n;
  EXPECT_NEAR(m1, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(m2, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(m4, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(RandomStream, PairComponentsUncorrelated) {
  RandomStream a(12);
  const int n = 100000;
  double s = 0;
  for (int i = 0; i < n; ++i) {
    const auto p = a.normal_pair(static_cast<std::uint64_t>(i));
    s += p[0] * p[1];
  }
  EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(n));
}
