// Copyright 2026 The SRM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "srm/schedule.hpp"

namespace srm {
namespace {

TEST(ScheduleTest, LinearValues) {
  const NoiseSchedule linear(ScheduleKind::linear);
  const auto [a, b] = linear(0.3);
  EXPECT_DOUBLE_EQ(a, 0.7);
  EXPECT_DOUBLE_EQ(b, 0.3);
  EXPECT_EQ(linear.a(0.0), 1.0);
  EXPECT_EQ(linear.b(0.0), 0.0);
}

TEST(ScheduleTest, CosineMidpoint) {
  const NoiseSchedule cosine(ScheduleKind::cosine);
  const auto [a, b] = cosine(0.5);
  EXPECT_NEAR(a, std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(b, std::sqrt(0.5), 1e-15);
}

TEST(ScheduleTest, EndpointsAreExact) {
  for (auto kind : {ScheduleKind::linear, ScheduleKind::cosine}) {
    const NoiseSchedule s(kind);
    EXPECT_EQ(s.a(0.0), 1.0);
    EXPECT_EQ(s.b(0.0), 0.0);
    EXPECT_EQ(s.a(1.0), 0.0);
    EXPECT_EQ(s.b(1.0), 1.0);
  }
}

TEST(ScheduleTest, StrictlyMonotoneAndBoundedOnGrid) {
  for (auto kind : {ScheduleKind::linear, ScheduleKind::cosine}) {
    const NoiseSchedule s(kind);
    constexpr int K = 1000;
    double prev_a = 2.0, prev_b = -1.0;
    for (int k = 0; k <= K; ++k) {
      const auto [a, b] = s(static_cast<double>(k) / K);
      EXPECT_LT(a, prev_a) << "k=" << k;
      EXPECT_GT(b, prev_b) << "k=" << k;
      EXPECT_GE(a, 0.0);
      EXPECT_LE(a, 1.0);
      EXPECT_GE(b, 0.0);
      EXPECT_LE(b, 1.0);
      prev_a = a;
      prev_b = b;
    }
  }
}

TEST(ScheduleTest, RejectsLevelsOutsideUnitInterval) {
  const NoiseSchedule s;
  EXPECT_THROW(s(-1e-12), DomainError);
  EXPECT_THROW(s(1.0 + 1e-12), DomainError);
  EXPECT_THROW(s(std::nan("")), DomainError);
}

TEST(ScheduleTest, ParsesConfigNames) {
  EXPECT_EQ(parse_schedule_kind("linear"), ScheduleKind::linear);
  EXPECT_EQ(parse_schedule_kind("cosine"), ScheduleKind::cosine);
  EXPECT_THROW(parse_schedule_kind("sigmoid"), ConfigError);
}

}  // namespace
}  // namespace srm
