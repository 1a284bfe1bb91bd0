// Copyright 2026 The SRM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "srm/error.hpp"
#include "srm/random.hpp"
#include "srm/types.hpp"

namespace srm {

enum class TSamplerKind { uniform_t, uniform_tbar };

inline std::string_view to_string(TSamplerKind k) { return k == TSamplerKind::uniform_t ? "uniform_t" : "uniform_tbar"; }

inline TSamplerKind parse_tsampler_kind(std::string_view s) {
  if (s == "uniform_t") return TSamplerKind::uniform_t;
  if (s == "uniform_tbar") return TSamplerKind::uniform_tbar;
  throw ConfigError("unknown tsampler '" + std::string(s) + "' (expected uniform_t|uniform_tbar)");
}

struct TSamplerSpec {
  TSamplerKind kind = TSamplerKind::uniform_tbar;
  double sharpness = 1.0;
  double exponent = 1.05;  ///< growth of the split concentration with the sub-vector size
};

inline constexpr double kMinSplitConcentration = 1e-3;

/// Concentration of the symmetric Beta split law for a sub-vector of size d.
inline double split_concentration(std::size_t d, double sharpness, double exponent = 1.05) {
  const double base = static_cast<double>(d - 1 - (d % 2));
  return std::max(kMinSplitConcentration, std::pow(base, exponent) * sharpness);
}

namespace detail {

inline void allocate_sum_into(Rng& rng, double s, std::size_t d, double sharpness, double exponent,
                              double* out) {
  if (d == 1) {
    out[0] = std::clamp(s, 0.0, 1.0);
    return;
  }
  const std::size_t d1 = d / 2;
  const std::size_t d2 = d - d1;
  const double s1_max = std::min(s, static_cast<double>(d1));
  const double s2_max = std::min(s, static_cast<double>(d2));
  const double s1_min = std::max(0.0, s - s2_max);
  const double r = sample_symmetric_beta(rng, split_concentration(d, sharpness, exponent));
  const double s1 = s1_min + (s1_max - s1_min) * r;
  const double s2 = s - s1;
  allocate_sum_into(rng, s1, d1, sharpness, exponent, out);
  allocate_sum_into(rng, s2, d2, sharpness, exponent, out + d1);
}

}  // namespace detail

/// Recursive allocation of a total `s` over `d` cells, each in [0,1].
///
/// The vector is halved recursively; the share of the first half is drawn
/// from a symmetric Beta law rescaled to the feasible interval, so the sum is
/// conserved at every split.
inline std::vector<double> allocate_sum(Rng& rng, double s, std::size_t d, double sharpness,
                                        double exponent = 1.05) {
  if (d == 0) throw DomainError("allocate_sum: dimension must be positive");
  if (!(s >= 0.0 && s <= static_cast<double>(d))) {
    throw DomainError("allocate_sum: sum " + std::to_string(s) + " outside [0, " + std::to_string(d) + "]");
  }
  if (!(sharpness > 0.0)) throw DomainError("allocate_sum: sharpness must be positive");
  std::vector<double> out(d);
  detail::allocate_sum_into(rng, s, d, sharpness, exponent, out.data());
  return out;
}

/// i.i.d. U(0,1) levels (the Diffusion Forcing baseline).
inline NoiseLevels sample_uniform_t(Rng& rng, std::size_t n) {
  detail::require(n >= 1, "sample_uniform_t: n must be >= 1");
  NoiseLevels t(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = uniform01(rng);
  return t;
}

struct MeanConstrainedLevels {
  NoiseLevels levels;
  double t_bar = 0.0;
};

/// Levels whose mean is exactly `t_bar`, allocated recursively and randomly permuted.
inline NoiseLevels sample_levels_with_mean(Rng& rng, std::size_t n, double t_bar, double sharpness,
                                           double exponent = 1.05) {
  detail::require(n >= 1, "sample_levels_with_mean: n must be >= 1");
  if (!(t_bar >= 0.0 && t_bar <= 1.0)) throw DomainError("sample_levels_with_mean: mean outside [0,1]");
  std::vector<double> levels = allocate_sum(rng, static_cast<double>(n) * t_bar, n, sharpness, exponent);
  // The halving recursion ties shares to positions; shuffle so level and index decouple.
  std::shuffle(levels.begin(), levels.end(), rng);
  return Eigen::Map<const NoiseLevels>(levels.data(), static_cast<Eigen::Index>(n));
}

/// t_bar ~ U(0,1), then levels with mean t_bar. Returns the drawn mean alongside.
inline MeanConstrainedLevels draw_uniform_tbar(Rng& rng, std::size_t n, double sharpness, double exponent = 1.05) {
  detail::require(n >= 1, "sample_uniform_tbar: n must be >= 1");
  const double t_bar = uniform01(rng);
  return {sample_levels_with_mean(rng, n, t_bar, sharpness, exponent), t_bar};
}

inline NoiseLevels sample_uniform_tbar(Rng& rng, std::size_t n, double sharpness, double exponent = 1.05) {
  return draw_uniform_tbar(rng, n, sharpness, exponent).levels;
}

inline NoiseLevels sample_levels(Rng& rng, const TSamplerSpec& spec, std::size_t n) {
  if (spec.kind == TSamplerKind::uniform_t) return sample_uniform_t(rng, n);
  return sample_uniform_tbar(rng, n, spec.sharpness, spec.exponent);
}

/// Piecewise-constant per-level loss weights w(t) = 1 / p(t) on equal-width bins.
class LossWeightTable {
 public:
  LossWeightTable() : weights_(1, 1.0) {}
  explicit LossWeightTable(std::vector<double> weights) : weights_(std::move(weights)) {
    detail::require(!weights_.empty(), "LossWeightTable: at least one bin required");
    for (double w : weights_) detail::require(std::isfinite(w) && w > 0.0, "LossWeightTable: weights must be positive");
  }

  /// All-ones table; reproduces the unweighted loss.
  static LossWeightTable identity(std::size_t bins = 1) { return LossWeightTable(std::vector<double>(bins, 1.0)); }

  std::size_t bins() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }

  std::size_t bin_of(double t) const {
    const auto b = static_cast<std::size_t>(std::clamp(t, 0.0, 1.0) * static_cast<double>(weights_.size()));
    return std::min(b, weights_.size() - 1);
  }

  double operator()(double t) const { return weights_[bin_of(t)]; }

 private:
  std::vector<double> weights_;
};

/// Histogram all levels of `num_samples` sampled vectors and invert the
/// empirical bin mass; weights are normalized so that E_p[w] = 1.
inline LossWeightTable estimate_loss_weights(Rng& rng, const TSamplerSpec& spec, std::size_t n, std::size_t bins,
                                             std::size_t num_samples) {
  detail::require(bins >= 2, "estimate_loss_weights: bins must be >= 2");
  detail::require(num_samples >= 10 * bins, "estimate_loss_weights: num_samples must be >= 10 * bins");
  std::vector<double> counts(bins, 0.0);
  for (std::size_t k = 0; k < num_samples; ++k) {
    const NoiseLevels t = sample_levels(rng, spec, n);
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const auto b = std::min(static_cast<std::size_t>(t[i] * static_cast<double>(bins)), bins - 1);
      counts[b] += 1.0;
    }
  }
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  const double p_floor = 1.0 / (10.0 * static_cast<double>(bins));
  std::vector<double> p(bins), w(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    p[b] = counts[b] / total;
    w[b] = 1.0 / std::max(p[b], p_floor);
  }
  double mean_w = 0.0;
  for (std::size_t b = 0; b < bins; ++b) mean_w += p[b] * w[b];
  for (double& x : w) x /= mean_w;
  return LossWeightTable(std::move(w));
}

}  // namespace srm
