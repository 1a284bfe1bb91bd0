// Copyright 2026 The SRM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

namespace srm {

using Vector = Eigen::VectorXd;

/// n spatial variables, one row of `dim` continuous values each.
using VariableSet = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-variable noise levels in [0,1]; 0 = clean, 1 = pure noise.
using NoiseLevels = Eigen::VectorXd;

using Mask = std::vector<bool>;

}  // namespace srm
