#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gmclab/parallel.hpp"
#include "gmclab/rng.hpp"

using gmclab::RandomStream;

// Known-answer vectors of the Random123 distribution for Philox4x32-10.
TEST(Philox, KnownAnswers) {
  using A4 = std::array<std::uint32_t, 4>;
  using A2 = std::array<std::uint32_t, 2>;
  EXPECT_EQ(gmclab::philox4x32(A4{0, 0, 0, 0}, A2{0, 0}), (A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(gmclab::philox4x32(A4{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, A2{0xffffffff, 0xffffffff}),
            (A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(gmclab::philox4x32(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}),
            (A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(RandomStream, Deterministic) {
  RandomStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  bool differs_stream = false, differs_seed = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs_stream |= x != c.next_u64();
    differs_seed |= x != d.next_u64();
  }
  EXPECT_TRUE(differs_stream);
  EXPECT_TRUE(differs_seed);
}

TEST(RandomStream, UniformOpenInterval) {
  RandomStream s(1, 0);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(RandomStream, NormalMoments) {
  RandomStream s(3, 1);
  std::vector<double> z(400000);
  s.fill_normal(z);
  double m1 = 0, m2 = 0, m4 = 0;
  for (double x : z) {
    m1 += x;
    m2 += x * x;
    m4 += x * x * x * x;
  }
  const double n = static_cast<double>(z.size());
  EXPECT_NEAR(m1 / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(m2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(m4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(RandomStream, ExponentialMean) {
  RandomStream s(5, 2);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += s.exponential(2.5);
  EXPECT_NEAR(sum / n, 0.4, 4.0 * 0.4 / std::sqrt(n));
}

TEST(Streams, DomainsDoNotCollide) {
  using gmclab::StreamDomain;
  EXPECT_NE(gmclab::derive_stream(StreamDomain::Field, 0), gmclab::derive_stream(StreamDomain::Maximum, 0));
  EXPECT_NE(gmclab::derive_stream(StreamDomain::Field, 5), gmclab::derive_stream(StreamDomain::Field, 6));
}

TEST(ParallelFor, VisitsEachIndexOnce) {
  for (std::size_t threads : {1u, 2u, 3u, 8u}) {
    std::vector<int> hits(1001, 0);
    gmclab::parallel_for(hits.size(), threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) hits[i] += 1;
    });
    for (int h : hits) ASSERT_EQ(h, 1);
  }
}
