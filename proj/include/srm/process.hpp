// Copyright 2026 The SRM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "srm/error.hpp"
#include "srm/random.hpp"
#include "srm/schedule.hpp"
#include "srm/types.hpp"

namespace srm {

/// One reverse transition from level t down to t_star, with stochasticity eta.
struct StepSpec {
  double t;
  double t_star;
  double eta;

  StepSpec(double t_, double t_star_, double eta_) : t(t_), t_star(t_star_), eta(eta_) {
    if (!(t_star >= 0.0 && t_star < t && t <= 1.0)) {
      throw DomainError("step requires 0 <= t_star < t <= 1, got t_star=" + std::to_string(t_star) +
                        " t=" + std::to_string(t));
    }
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("eta outside [0,1]: " + std::to_string(eta));
  }
};

struct GaussianStepParams {
  Vector mean;
  double std = 0.0;
};

enum class VarianceMode { lower, upper };

inline std::string_view to_string(VarianceMode m) { return m == VarianceMode::lower ? "lower" : "upper"; }

inline VarianceMode parse_variance_mode(std::string_view s) {
  if (s == "lower") return VarianceMode::lower;
  if (s == "upper") return VarianceMode::upper;
  throw ConfigError("unknown variance_mode '" + std::string(s) + "' (expected lower|upper)");
}

struct Corrupted {
  Vector x_t;
  Vector eps;
};

/// x_t = a_t x0 + b_t eps with eps ~ N(0, I). The noise is returned for supervision.
inline Corrupted forward_corrupt(Rng& rng, const NoiseSchedule& schedule, const Vector& x0, double t) {
  const auto [a, b] = schedule(t);
  Vector eps = standard_normal(rng, x0.size());
  Vector x_t = a * x0 + b * eps;
  return {std::move(x_t), std::move(eps)};
}

struct CorruptedSet {
  VariableSet x_t;
  VariableSet eps;
};

/// Row-wise corruption with an individual noise level per variable.
inline CorruptedSet forward_corrupt(Rng& rng, const NoiseSchedule& schedule, const VariableSet& x0,
                                    const NoiseLevels& t) {
  detail::require(t.size() == x0.rows(), "forward_corrupt: one noise level per variable required");
  VariableSet eps = standard_normal(rng, x0.rows(), x0.cols());
  VariableSet x_t(x0.rows(), x0.cols());
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    const auto [a, b] = schedule(t[i]);
    x_t.row(i) = a * x0.row(i) + b * eps.row(i);
  }
  return {std::move(x_t), std::move(eps)};
}

/// sigma_eta(t*, t) = eta * b_{t*} * sqrt(1 - (a_t b_{t*} / (a_{t*} b_t))^2).
/// eta = 1 is the unique choice that makes the implied forward process Markovian.
inline double sigma_eta(const NoiseSchedule& schedule, double t_star, double t, double eta) {
  const StepSpec spec(t, t_star, eta);
  const auto [a_star, b_star] = schedule(spec.t_star);
  const auto [a_t, b_t] = schedule(spec.t);
  if (!(a_star > 0.0)) throw DomainError("sigma_eta: a(t_star) = 0, target level must be < 1");
  if (b_star == 0.0 || eta == 0.0) return 0.0;
  const double ratio = (a_t * b_star) / (a_star * b_t);
  return eta * b_star * std::sqrt(std::max(0.0, 1.0 - ratio * ratio));
}

/// Gaussian q(x_{t*} | x_t, x0_hat) in the x0-conditioned form; finite at t = 1.
inline GaussianStepParams reverse_posterior(const NoiseSchedule& schedule, const Vector& x_t, const Vector& x0_hat,
                                            const StepSpec& spec) {
  detail::require(x_t.size() == x0_hat.size(), "reverse_posterior: x_t and x0_hat differ in size");
  const auto [a_t, b_t] = schedule(spec.t);
  const auto [a_star, b_star] = schedule(spec.t_star);
  if (!(b_t > 0.0)) throw DomainError("reverse_posterior: b(t) = 0, nothing to denoise");
  const double sigma = sigma_eta(schedule, spec.t_star, spec.t, spec.eta);
  const double eps_coeff = std::sqrt(std::max(0.0, b_star * b_star - sigma * sigma));
  GaussianStepParams out;
  out.mean = a_star * x0_hat + ((x_t - a_t * x0_hat) / b_t) * eps_coeff;
  out.std = sigma;
  return out;
}

inline constexpr double kSingularSignal = 1e-8;

/// x0 = (x_t - b_t eps) / a_t.
///
/// Where a_t < 1e-8 the inversion is undefined. With `guard` the data-centred
/// fallback (zero vector) is returned instead of throwing.
inline Vector eps_to_x0(const NoiseSchedule& schedule, const Vector& x_t, const Vector& eps_hat, double t,
                        bool guard = false) {
  detail::require(x_t.size() == eps_hat.size(), "eps_to_x0: x_t and eps_hat differ in size");
  const auto [a, b] = schedule(t);
  if (a < kSingularSignal) {
    if (!guard) throw SingularityError("eps_to_x0: a(t) vanishes at t=" + std::to_string(t));
    return Vector::Zero(x_t.size());
  }
  return (x_t - b * eps_hat) / a;
}

/// Per-step variance under the fixed bounds: sigma^2 (lower) or (b_t / b_{t*}) sigma^2 (upper).
inline double step_variance(const NoiseSchedule& schedule, const StepSpec& spec, double sigma, VarianceMode mode) {
  const double var = sigma * sigma;
  if (mode == VarianceMode::lower || var == 0.0) return var;
  return schedule.b(spec.t) / schedule.b(spec.t_star) * var;
}

/// Draw x_{t*} given the current x_t and an x0 estimate.
inline Vector denoising_step(Rng& rng, const NoiseSchedule& schedule, const Vector& x_t, const Vector& x0_hat,
                             const StepSpec& spec, VarianceMode mode = VarianceMode::lower) {
  GaussianStepParams p = reverse_posterior(schedule, x_t, x0_hat, spec);
  const double var = step_variance(schedule, spec, p.std, mode);
  if (var == 0.0) return std::move(p.mean);
  return p.mean + std::sqrt(var) * standard_normal(rng, p.mean.size());
}

}  // namespace srm
