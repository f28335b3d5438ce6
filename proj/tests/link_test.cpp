// Copyright 2026 The fleetwatch Authors
// SPDX-License-Identifier: Apache-2.0

#include <vector>

#include <gtest/gtest.h>

#include "fleet/link.hpp"

namespace fleet {
namespace {

TEST(CoverageAt, EmptyMapIsFullCoverage) {
  CoverageMap map;
  for (double pos : {0.0, 500.0, 9999.0, 10000.0}) EXPECT_EQ(coverage_at(map, pos, 10000.0), (Coverage{true, true}));
}

TEST(CoverageAt, HalfOpenGaps) {
  CoverageMap map{{{1000.0, 1200.0}}, {{5000.0, 5100.0}}};
  EXPECT_FALSE(coverage_at(map, 1100.0, 10000.0).gsm);
  EXPECT_TRUE(coverage_at(map, 1100.0, 10000.0).gps);
  EXPECT_FALSE(coverage_at(map, 1000.0, 10000.0).gsm);
  EXPECT_TRUE(coverage_at(map, 1200.0, 10000.0).gsm);
  EXPECT_FALSE(coverage_at(map, 5050.0, 10000.0).gps);
}

TEST(CoverageAt, OutsideRouteIsAnError) {
  CoverageMap map;
  EXPECT_THROW(coverage_at(map, -1.0, 100.0), std::out_of_range);
  EXPECT_THROW(coverage_at(map, 100.5, 100.0), std::out_of_range);
}

TEST(CoverageMap, ValidatesIntervals) {
  EXPECT_THROW((CoverageMap{{{10.0, 5.0}}, {}}.validate(100.0)), LinkConfigError);
  EXPECT_THROW((CoverageMap{{}, {{50.0, 150.0}}}.validate(100.0)), LinkConfigError);
  EXPECT_NO_THROW((CoverageMap{{{0.0, 100.0}}, {}}.validate(100.0)));
}

TEST(Transmit, DelayFromBandwidthRegistrationAndRtt) {
  LinkParams p;
  p.loss_prob = 0.0;
  // 200 B * 8 / 85 600 bit/s = 0.018691588... s
  EXPECT_NEAR(transmission_delay_s(200, p), 0.0186916, 1e-7);
  LinkRng rng(1);
  const auto out = transmit(200, p, rng);
  ASSERT_TRUE(out.delivered);
  EXPECT_NEAR(out.delay_s, 4.0 + 1.5 + 1600.0 / 85600.0, 1e-12);
  EXPECT_NEAR(out.delay_s, 5.519, 0.001);
}

TEST(Transmit, LossExtremes) {
  LinkParams p;
  LinkRng rng(5);
  p.loss_prob = 0.0;
  for (int i = 0; i < 1000; ++i) EXPECT_TRUE(transmit(150, p, rng).delivered);
  p.loss_prob = 1.0;
  for (int i = 0; i < 1000; ++i) {
    const auto out = transmit(150, p, rng);
    EXPECT_FALSE(out.delivered);
    EXPECT_DOUBLE_EQ(out.delay_s, p.rtt_s + LinkParams::kTimeoutSlackS);
    EXPECT_FALSE(out.reached_server);
  }
}

TEST(Transmit, LossRateMatchesParameter) {
  LinkParams p;
  p.loss_prob = 0.2;
  p.response_loss_share = 0.5;
  LinkRng rng(77);
  int lost = 0, reached = 0;
  for (int i = 0; i < 50000; ++i) {
    const auto out = transmit(150, p, rng);
    if (!out.delivered) {
      ++lost;
      if (out.reached_server) ++reached;
    }
  }
  EXPECT_NEAR(lost / 50000.0, 0.2, 0.01);
  EXPECT_NEAR(static_cast<double>(reached) / lost, 0.5, 0.03);
}

TEST(Transmit, DelayMonotoneInPayload) {
  LinkParams p;
  double prev = 0.0;
  for (std::size_t bytes = 0; bytes <= 4096; bytes += 17) {
    const double d = delivery_delay_s(bytes, p);
    EXPECT_GE(d, prev);
    prev = d;
  }
}

TEST(LinkSimulator, SeededDeterminism) {
  LinkParams p;
  p.loss_prob = 0.3;
  auto sequence = [&](std::uint64_t seed) {
    LinkSimulator link(p, seed);
    std::vector<bool> v;
    for (int i = 0; i < 200; ++i) v.push_back(link.transmit(180).delivered);
    return v;
  };
  EXPECT_EQ(sequence(42), sequence(42));
  EXPECT_NE(sequence(42), sequence(43));
}

TEST(LinkParams, Validation) {
  LinkParams p;
  p.bandwidth_bps = 0;
  EXPECT_THROW(p.validate(), LinkConfigError);
  p = {};
  p.loss_prob = -0.1;
  EXPECT_THROW(p.validate(), LinkConfigError);
  p.loss_prob = 1.5;
  EXPECT_THROW(p.validate(), LinkConfigError);
  p = {};
  p.response_loss_share = 2.0;
  EXPECT_THROW(p.validate(), LinkConfigError);
}

}  // namespace
}  // namespace fleet
