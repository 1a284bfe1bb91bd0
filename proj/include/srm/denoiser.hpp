// Copyright 2026 The SRM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <vector>

#include "srm/error.hpp"
#include "srm/process.hpp"
#include "srm/schedule.hpp"
#include "srm/types.hpp"

namespace srm {

/// Result of one denoiser evaluation on the full variable set.
struct DenoiserOutput {
  VariableSet eps_hat;  ///< predicted noise, n x dim
  Vector log_var;       ///< log sigma^2 of the noise prediction, one per variable
  VariableSet x0_hat;   ///< clean estimate consistent with eps_hat where a(t) > 0
};

template <class D>
concept Denoiser = requires(const D& d, const VariableSet& x, const NoiseLevels& t) {
  { d.evaluate(x, t) } -> std::convertible_to<DenoiserOutput>;
  { d.schedule() } -> std::convertible_to<NoiseSchedule>;
};

inline constexpr double kLogVarFloor = 1e-12;

/// Finite set of clean samples standing in for the data distribution.
class Corpus {
 public:
  explicit Corpus(std::vector<VariableSet> samples) : samples_(std::move(samples)) {
    detail::require(!samples_.empty(), "Corpus: at least one sample required");
    for (const auto& s : samples_) {
      detail::require(s.rows() == samples_.front().rows() && s.cols() == samples_.front().cols(),
                      "Corpus: samples must share (n, dim)");
    }
  }

  std::size_t size() const { return samples_.size(); }
  Eigen::Index num_variables() const { return samples_.front().rows(); }
  Eigen::Index dim() const { return samples_.front().cols(); }
  const VariableSet& operator[](std::size_t k) const { return samples_[k]; }
  const std::vector<VariableSet>& samples() const { return samples_; }

 private:
  std::vector<VariableSet> samples_;
};

/// Bayes-optimal denoiser for a finite corpus under the Gaussian corruption.
///
/// Variables whose noise weight is at most `b_floor` act as hard evidence:
/// a corpus sample survives only if it reproduces them (up to 1e-6 plus the
/// residual noise b). With `soft_clean` they are instead scored as Gaussian
/// with standard deviation b_floor, which tolerates generated variables that
/// settled on a blend of corpus values.
class ExactDenoiser {
 public:
  ExactDenoiser(Corpus corpus, NoiseSchedule schedule, double b_floor = 1e-4, bool soft_clean = false)
      : corpus_(std::move(corpus)), schedule_(schedule), b_floor_(b_floor), soft_clean_(soft_clean) {}

  const Corpus& corpus() const { return corpus_; }
  NoiseSchedule schedule() const { return schedule_; }

  /// Normalized posterior weights over corpus samples.
  Vector posterior_weights(const VariableSet& x_t, const NoiseLevels& t) const {
    check_shapes(x_t, t);
    const Eigen::Index n = x_t.rows();
    const std::size_t K = corpus_.size();
    std::vector<ScheduleCoeffs> coeffs(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) coeffs[static_cast<std::size_t>(i)] = schedule_(t[i]);

    Vector logw(static_cast<Eigen::Index>(K));
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      const VariableSet& x0 = corpus_[k];
      double lw = 0.0;
      for (Eigen::Index i = 0; i < n && lw != neg_inf; ++i) {
        const auto [a, b] = coeffs[static_cast<std::size_t>(i)];
        if (b > b_floor_) {
          lw -= (x_t.row(i) - a * x0.row(i)).squaredNorm() / (2.0 * b * b);
        } else if (soft_clean_) {
          lw -= (x_t.row(i) - a * x0.row(i)).squaredNorm() / (2.0 * b_floor_ * b_floor_);
        } else if ((x_t.row(i) - a * x0.row(i)).cwiseAbs().maxCoeff() >= 1e-6 + 8.0 * b) {
          lw = neg_inf;
        }
      }
      logw[static_cast<Eigen::Index>(k)] = lw;
    }
    const double max_lw = logw.maxCoeff();
    if (max_lw == neg_inf) {
      throw InconsistentConditioningError("exact denoiser: observed variables match no corpus sample");
    }
    Vector w = (logw.array() - max_lw).exp();
    return w / w.sum();
  }

  DenoiserOutput evaluate(const VariableSet& x_t, const NoiseLevels& t) const {
    const Vector w = posterior_weights(x_t, t);
    const Eigen::Index n = x_t.rows();
    const Eigen::Index dim = x_t.cols();

    DenoiserOutput out;
    out.x0_hat = VariableSet::Zero(n, dim);
    for (std::size_t k = 0; k < corpus_.size(); ++k) out.x0_hat += w[static_cast<Eigen::Index>(k)] * corpus_[k];

    VariableSet second = VariableSet::Zero(n, dim);
    for (std::size_t k = 0; k < corpus_.size(); ++k) {
      const auto wk = w[static_cast<Eigen::Index>(k)];
      if (wk > 0.0) second += wk * (corpus_[k] - out.x0_hat).cwiseAbs2();
    }

    out.eps_hat = VariableSet::Zero(n, dim);
    out.log_var = Vector::Constant(n, std::log(kLogVarFloor));
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto [a, b] = schedule_(t[i]);
      if (b <= b_floor_) continue;
      out.eps_hat.row(i) = (x_t.row(i) - a * out.x0_hat.row(i)) / b;
      const double snr = a / b;
      out.log_var[i] = std::log(std::max(kLogVarFloor, snr * snr * second.row(i).mean()));
    }
    return out;
  }

 private:
  void check_shapes(const VariableSet& x_t, const NoiseLevels& t) const {
    detail::require(x_t.rows() == corpus_.num_variables() && x_t.cols() == corpus_.dim(),
                    "exact denoiser: x_t shape does not match corpus");
    detail::require(t.size() == x_t.rows(), "exact denoiser: one noise level per variable required");
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      if (!(t[i] >= 0.0 && t[i] <= 1.0)) throw DomainError("exact denoiser: noise level outside [0,1]");
    }
  }

  Corpus corpus_;
  NoiseSchedule schedule_;
  double b_floor_;
  bool soft_clean_;
};

}  // namespace srm
