// Copyright 2026 The SRM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace srm {

/// Argument outside the mathematical domain of an operation (t outside [0,1], s > d, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// eps -> x0 inversion requested where a(t) vanishes.
class SingularityError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Caller violated a shape or state contract.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Inconsistent or missing configuration (unknown key, policy without its inputs).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Observed variables match no sample of the corpus.
class InconsistentConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The requested step budget cannot host the requested plan.
class InfeasiblePlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal invariant failed; indicates a bug rather than bad input.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Non-finite loss or parameters during training.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractError(what);
}

}  // namespace detail
}  // namespace srm
