// Copyright 2026 The SRM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "srm/denoiser.hpp"
#include "srm/error.hpp"
#include "srm/process.hpp"
#include "srm/random.hpp"

namespace srm {

/// Per-variable denoising windows sharing a global budget of N network evaluations.
///
/// Every active variable is denoised from t=1 to t=0 in `window` equal
/// decrements. Consecutive windows start `(1 - overlap) * window` steps apart
/// (rounded), so overlap=1 is one synchronized trajectory and overlap=0 is
/// strictly one variable after another. The window is sized to keep the last
/// window ending exactly at step N.
struct SequentializationPlan {
  int n_active = 0;
  int steps_total = 0;
  double overlap = 1.0;
  int window = 0;
  std::vector<int> starts;  ///< global step at which the k-th selected variable starts

  bool parallel() const {
    return std::all_of(starts.begin(), starts.end(), [](int s) { return s == 0; });
  }

  /// Level of a variable after `j` of its window steps.
  double level_after(int j) const {
    if (j <= 0) return 1.0;
    if (j >= window) return 0.0;
    return 1.0 - static_cast<double>(j) / window;
  }
};

inline SequentializationPlan plan_schedule(int n_active, int steps_total, double overlap) {
  if (n_active < 1) throw DomainError("plan_schedule: need at least one active variable");
  if (steps_total < 1) throw DomainError("plan_schedule: steps_total must be positive");
  if (!(overlap >= 0.0 && overlap <= 1.0)) throw DomainError("plan_schedule: overlap outside [0,1]");
  if (overlap < 1.0 && steps_total < n_active) {
    throw InfeasiblePlanError("plan_schedule: " + std::to_string(steps_total) + " steps cannot sequentialize " +
                              std::to_string(n_active) + " variables");
  }
  SequentializationPlan plan;
  plan.n_active = n_active;
  plan.steps_total = steps_total;
  plan.overlap = overlap;
  const double span = 1.0 + (n_active - 1) * (1.0 - overlap);
  // At least ceil(N / n) so that consecutive windows never leave an idle step.
  const int min_window = (steps_total + n_active - 1) / n_active;
  plan.window = std::clamp(static_cast<int>(std::lround(steps_total / span)), std::max(1, min_window), steps_total);
  plan.starts.resize(static_cast<std::size_t>(n_active), 0);
  if (n_active > 1) {
    const double stride = static_cast<double>(steps_total - plan.window) / (n_active - 1);
    for (int k = 0; k < n_active; ++k) plan.starts[static_cast<std::size_t>(k)] = static_cast<int>(std::lround(k * stride));
  }
  return plan;
}

enum class OrderKind { random, graph, uncertainty, fixed };

inline std::string_view to_string(OrderKind k) {
  switch (k) {
    case OrderKind::random: return "random";
    case OrderKind::graph: return "graph";
    case OrderKind::uncertainty: return "uncertainty";
    default: return "fixed";
  }
}

inline OrderKind parse_order_kind(std::string_view s) {
  if (s == "random") return OrderKind::random;
  if (s == "graph") return OrderKind::graph;
  if (s == "uncertainty") return OrderKind::uncertainty;
  if (s == "fixed") return OrderKind::fixed;
  throw ConfigError("unknown order '" + std::string(s) + "' (expected random|graph|uncertainty|fixed)");
}

/// Rule choosing which unstarted variable begins denoising next.
struct OrderPolicy {
  OrderKind kind = OrderKind::random;
  std::optional<Eigen::MatrixXd> adjacency;  ///< graph kind
  std::vector<int> permutation;              ///< fixed kind; drawn per run for random

  static OrderPolicy random() { return {}; }
  static OrderPolicy uncertainty() { return {OrderKind::uncertainty, std::nullopt, {}}; }
  static OrderPolicy fixed(std::vector<int> order) { return {OrderKind::fixed, std::nullopt, std::move(order)}; }
  static OrderPolicy graph(Eigen::MatrixXd adj) {
    detail::require(adj.rows() == adj.cols(), "graph order: adjacency must be square");
    detail::require(adj.isApprox(adj.transpose(), 0.0), "graph order: adjacency must be symmetric");
    detail::require(adj.diagonal().isZero(0.0), "graph order: adjacency must have zero diagonal");
    return {OrderKind::graph, std::move(adj), {}};
  }
};

struct InferenceState {
  VariableSet x;
  NoiseLevels t;
  Mask started;
  Mask observed;
  int step = 0;

  bool candidate(int i) const {
    const auto k = static_cast<std::size_t>(i);
    return !started[k] && !observed[k];
  }
};

/// Pick the next variable to start. Ties go to the lowest index.
/// `log_var` is the predicted uncertainty, required by the uncertainty kind.
inline int next_variable(const OrderPolicy& policy, const InferenceState& state,
                         const std::optional<Vector>& log_var = std::nullopt) {
  const auto n = static_cast<int>(state.t.size());
  int best = -1;
  switch (policy.kind) {
    case OrderKind::random:
    case OrderKind::fixed:
      for (int v : policy.permutation) {
        if (v >= 0 && v < n && state.candidate(v)) return v;
      }
      if (policy.kind == OrderKind::fixed) throw ConfigError("fixed order: permutation exhausted");
      // An empty permutation degrades to index order.
      for (int v = 0; v < n; ++v)
        if (state.candidate(v)) return v;
      break;
    case OrderKind::graph: {
      if (!policy.adjacency) throw ConfigError("graph order requires an adjacency matrix");
      const Eigen::MatrixXd& adj = *policy.adjacency;
      detail::require(adj.rows() == n, "graph order: adjacency size does not match variables");
      const Vector certainty = Vector::Ones(n) - state.t;
      double best_score = -1.0;
      for (int v = 0; v < n; ++v) {
        if (!state.candidate(v)) continue;
        const double score = adj.row(v).dot(certainty);
        if (score > best_score) {
          best_score = score;
          best = v;
        }
      }
      break;
    }
    case OrderKind::uncertainty: {
      if (!log_var) throw ConfigError("uncertainty order requires predicted uncertainties");
      detail::require(log_var->size() == n, "uncertainty order: one value per variable required");
      double best_score = 0.0;
      for (int v = 0; v < n; ++v) {
        if (!state.candidate(v)) continue;
        if (best < 0 || (*log_var)[v] < best_score) {
          best_score = (*log_var)[v];
          best = v;
        }
      }
      break;
    }
  }
  if (best < 0) throw ContractError("next_variable: no unstarted, unobserved variable left");
  return best;
}

struct TraceFrame {
  int step = 0;
  NoiseLevels t;
  VariableSet x;
  Vector sigma_hat;
};

struct InferenceOptions {
  double eta = 0.0;
  VarianceMode variance_mode = VarianceMode::lower;
  /// Level at which unstarted variables are presented to the denoiser when
  /// querying uncertainty for the order. At t=1 a linear schedule carries no
  /// signal (a=0), which makes the noise uncertainty identically zero.
  double uncertainty_probe_t = 0.9;
  int frame_every = 0;  ///< 0 disables tracing
};

struct InferenceResult {
  VariableSet x;
  std::vector<TraceFrame> trace;
  std::vector<int> order;  ///< variables in the order they started
  int eval_count = 0;      ///< denoising evaluations (== N unless nothing to do)
  int order_eval_count = 0;  ///< extra evaluations spent on order selection
};

/// Sequentialized denoising of all unobserved variables within N evaluations.
///
/// Observed variables keep their values at t=0 throughout. At each global step
/// the denoiser sees the whole set once; every variable inside its window then
/// moves one decrement down its own trajectory.
template <Denoiser D>
InferenceResult run_inference(Rng& rng, const SequentializationPlan& plan, OrderPolicy policy, const D& denoiser,
                              const Mask& observed, const VariableSet& observed_values,
                              const InferenceOptions& options = {}) {
  const auto n = static_cast<int>(observed.size());
  detail::require(observed_values.rows() == n, "run_inference: observed values must cover every variable");
  const NoiseSchedule schedule = denoiser.schedule();

  std::vector<int> active;
  for (int i = 0; i < n; ++i)
    if (!observed[static_cast<std::size_t>(i)]) active.push_back(i);

  InferenceState state;
  state.observed = observed;
  state.started.assign(static_cast<std::size_t>(n), false);
  state.t = NoiseLevels::Zero(n);
  state.x = observed_values;
  InferenceResult result;
  if (active.empty()) {
    result.x = state.x;
    return result;
  }
  detail::require(plan.n_active == static_cast<int>(active.size()),
                  "run_inference: plan was built for a different number of unobserved variables");

  const VariableSet noise = standard_normal(rng, n, observed_values.cols());
  for (int v : active) {
    state.x.row(v) = noise.row(v);
    state.t[v] = 1.0;
  }
  if (policy.kind == OrderKind::random) {
    policy.permutation = active;
    std::shuffle(policy.permutation.begin(), policy.permutation.end(), rng);
  }

  std::vector<int> begin(static_cast<std::size_t>(n), -1);
  std::size_t next_start = 0;
  for (int s = 0; s < plan.steps_total; ++s) {
    state.step = s;
    std::optional<Vector> probe;
    while (next_start < plan.starts.size() && plan.starts[next_start] <= s) {
      if (policy.kind == OrderKind::uncertainty && !probe) {
        NoiseLevels probe_t = state.t;
        for (int v : active)
          if (!state.started[static_cast<std::size_t>(v)]) probe_t[v] = options.uncertainty_probe_t;
        probe = denoiser.evaluate(state.x, probe_t).log_var;
        ++result.order_eval_count;
      }
      const int v = next_variable(policy, state, probe);
      state.started[static_cast<std::size_t>(v)] = true;
      begin[static_cast<std::size_t>(v)] = s;
      result.order.push_back(v);
      ++next_start;
    }

    NoiseLevels t_next = state.t;
    bool any = false;
    for (int v : active) {
      const int b = begin[static_cast<std::size_t>(v)];
      if (b < 0 || state.t[v] == 0.0) continue;
      const int j = s - b;
      t_next[v] = plan.level_after(j + 1);
      any = true;
    }
    if (!any) continue;

    const DenoiserOutput out = denoiser.evaluate(state.x, state.t);
    ++result.eval_count;
    for (int v : active) {
      if (t_next[v] == state.t[v]) continue;
      if (t_next[v] > state.t[v]) throw InvariantViolation("run_inference: noise level increased");
      const StepSpec spec(state.t[v], t_next[v], options.eta);
      const Vector x_next = denoising_step(rng, schedule, state.x.row(v).transpose(),
                                           out.x0_hat.row(v).transpose(), spec, options.variance_mode);
      state.x.row(v) = x_next.transpose();
    }
    state.t = t_next;
    for (int i = 0; i < n; ++i) {
      if (observed[static_cast<std::size_t>(i)]) {
        state.x.row(i) = observed_values.row(i);
        state.t[i] = 0.0;
      }
    }
    if (options.frame_every > 0 && (s % options.frame_every == 0 || s + 1 == plan.steps_total)) {
      result.trace.push_back({s, state.t, state.x, (0.5 * out.log_var.array()).exp().matrix()});
    }
  }
  for (int v : active) {
    if (state.t[v] != 0.0) throw InvariantViolation("run_inference: variable " + std::to_string(v) + " not fully denoised");
  }
  result.x = std::move(state.x);
  return result;
}

}  // namespace srm
