// Copyright 2026 The SRM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "srm/error.hpp"

namespace srm {

enum class ScheduleKind { linear, cosine };

inline std::string_view to_string(ScheduleKind k) {
  return k == ScheduleKind::linear ? "linear" : "cosine";
}

inline ScheduleKind parse_schedule_kind(std::string_view s) {
  if (s == "linear") return ScheduleKind::linear;
  if (s == "cosine") return ScheduleKind::cosine;
  throw ConfigError("unknown schedule '" + std::string(s) + "' (expected linear|cosine)");
}

struct ScheduleCoeffs {
  double a;  ///< signal weight
  double b;  ///< noise weight
};

/// Interpolation path x_t = a(t) x0 + b(t) eps.
///
/// linear: a = 1 - t, b = t (rectified flow).
/// cosine: a = cos(pi t / 2), b = sin(pi t / 2) (variance preserving).
/// Both satisfy a(0)=1, b(0)=0, a(1)=0, b(1)=1 exactly.
class NoiseSchedule {
 public:
  constexpr NoiseSchedule() = default;
  constexpr explicit NoiseSchedule(ScheduleKind kind) : kind_(kind) {}

  constexpr ScheduleKind kind() const { return kind_; }

  ScheduleCoeffs operator()(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw DomainError("noise level outside [0,1]: " + std::to_string(t));
    }
    if (kind_ == ScheduleKind::linear) return {1.0 - t, t};
    // Pin the endpoints: cos(pi/2) is not exactly zero in floating point.
    if (t == 0.0) return {1.0, 0.0};
    if (t == 1.0) return {0.0, 1.0};
    const double phase = 0.5 * std::numbers::pi * t;
    return {std::cos(phase), std::sin(phase)};
  }

  double a(double t) const { return (*this)(t).a; }
  double b(double t) const { return (*this)(t).b; }

 private:
  ScheduleKind kind_ = ScheduleKind::linear;
};

inline ScheduleCoeffs eval_schedule(const NoiseSchedule& schedule, double t) { return schedule(t); }

}  // namespace srm
