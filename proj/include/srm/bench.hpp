// Copyright 2026 The SRM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "srm/error.hpp"
#include "srm/random.hpp"
#include "srm/types.hpp"

namespace srm::bench {

/// s x s Sudoku (s = box^2), row-major; 0 marks a masked cell.
class SudokuGrid {
 public:
  SudokuGrid() = default;
  explicit SudokuGrid(int box) : box_(box), cells_(static_cast<std::size_t>(box * box * box * box), 0) {
    if (box < 2 || box > 3) throw DomainError("sudoku box must be 2 or 3");
  }
  SudokuGrid(int box, std::vector<int> cells) : SudokuGrid(box) {
    srm::detail::require(cells.size() == cells_.size(), "SudokuGrid: wrong number of cells");
    for (int v : cells) detail::require(v >= 0 && v <= side(), "SudokuGrid: digit out of range");
    cells_ = std::move(cells);
  }

  int box() const { return box_; }
  int side() const { return box_ * box_; }
  int num_cells() const { return static_cast<int>(cells_.size()); }

  int& operator[](int i) { return cells_[static_cast<std::size_t>(i)]; }
  int operator[](int i) const { return cells_[static_cast<std::size_t>(i)]; }
  int at(int r, int c) const { return (*this)[r * side() + c]; }

  const std::vector<int>& cells() const { return cells_; }

  bool complete() const { return std::find(cells_.begin(), cells_.end(), 0) == cells_.end(); }
  int masked_count() const { return static_cast<int>(std::count(cells_.begin(), cells_.end(), 0)); }

  friend bool operator==(const SudokuGrid&, const SudokuGrid&) = default;

 private:
  int box_ = 3;
  std::vector<int> cells_;
};

inline int block_of(int box, int cell) {
  const int s = box * box;
  return (cell / s) / box * box + (cell % s) / box;
}

/// Cells sharing a row, column or block with `cell` (excluding itself), ascending.
inline std::vector<int> peers(int box, int cell) {
  const int s = box * box;
  const int r = cell / s, c = cell % s, k = block_of(box, cell);
  std::vector<int> out;
  for (int j = 0; j < s * s; ++j) {
    if (j == cell) continue;
    if (j / s == r || j % s == c || block_of(box, j) == k) out.push_back(j);
  }
  return out;
}

/// Cell indices of every row, column and block (3 s units of s cells).
inline std::vector<std::vector<int>> units(int box) {
  const int s = box * box;
  std::vector<std::vector<int>> out;
  for (int r = 0; r < s; ++r) {
    std::vector<int> u;
    for (int c = 0; c < s; ++c) u.push_back(r * s + c);
    out.push_back(std::move(u));
  }
  for (int c = 0; c < s; ++c) {
    std::vector<int> u;
    for (int r = 0; r < s; ++r) u.push_back(r * s + c);
    out.push_back(std::move(u));
  }
  for (int k = 0; k < s; ++k) {
    std::vector<int> u;
    for (int j = 0; j < s * s; ++j)
      if (block_of(box, j) == k) u.push_back(j);
    out.push_back(std::move(u));
  }
  return out;
}

/// Symmetric 0/1 peer matrix with zero diagonal.
inline Eigen::MatrixXd build_sudoku_adjacency(int box) {
  if (box < 2 || box > 3) throw DomainError("sudoku box must be 2 or 3");
  const int n = box * box * box * box;
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j : peers(box, i)) adj(i, j) = 1.0;
  return adj;
}

namespace detail {

inline bool fill_backtrack(Rng& rng, SudokuGrid& g, const std::vector<std::vector<int>>& peer_sets, int cell) {
  if (cell == g.num_cells()) return true;
  std::vector<int> digits(static_cast<std::size_t>(g.side()));
  std::iota(digits.begin(), digits.end(), 1);
  std::shuffle(digits.begin(), digits.end(), rng);
  for (int d : digits) {
    bool clash = false;
    for (int p : peer_sets[static_cast<std::size_t>(cell)]) {
      if (g[p] == d) {
        clash = true;
        break;
      }
    }
    if (clash) continue;
    g[cell] = d;
    if (fill_backtrack(rng, g, peer_sets, cell + 1)) return true;
  }
  g[cell] = 0;
  return false;
}

}  // namespace detail

/// A random complete valid grid (randomized backtracking; not uniform over solutions).
inline SudokuGrid generate_solution(Rng& rng, int box) {
  SudokuGrid g(box);
  std::vector<std::vector<int>> peer_sets;
  for (int i = 0; i < g.num_cells(); ++i) peer_sets.push_back(peers(box, i));
  if (!detail::fill_backtrack(rng, g, peer_sets, 0)) throw InvariantViolation("sudoku backtracking exhausted");
  return g;
}

enum class Difficulty { easy, medium, hard };

inline std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::medium: return "medium";
    default: return "hard";
  }
}

inline Difficulty parse_difficulty(std::string_view s) {
  if (s == "easy") return Difficulty::easy;
  if (s == "medium") return Difficulty::medium;
  if (s == "hard") return Difficulty::hard;
  throw ConfigError("unknown difficulty '" + std::string(s) + "'");
}

/// Inclusive range of masked-cell counts per difficulty: 9x9 uses thirds of 81,
/// 4x4 scales those thirds to 16 cells.
inline std::pair<int, int> mask_interval(int box, Difficulty d) {
  if (box == 3) {
    switch (d) {
      case Difficulty::easy: return {1, 27};
      case Difficulty::medium: return {28, 54};
      default: return {55, 81};
    }
  }
  switch (d) {
    case Difficulty::easy: return {1, 5};
    case Difficulty::medium: return {6, 10};
    default: return {11, 16};
  }
}

/// How masked positions are drawn once the mask count k is fixed.
/// `distinct`: k positions without replacement (exactly k masked cells).
/// `with_replacement`: k independent uniform positions, so duplicates leave
/// at most k cells masked. The published oracle accuracies follow this law.
enum class MaskSampling { distinct, with_replacement };

inline std::string_view to_string(MaskSampling m) { return m == MaskSampling::distinct ? "distinct" : "with_replacement"; }

inline MaskSampling parse_mask_sampling(std::string_view s) {
  if (s == "distinct") return MaskSampling::distinct;
  if (s == "with_replacement") return MaskSampling::with_replacement;
  throw ConfigError("unknown mask_sampling '" + std::string(s) + "' (expected distinct|with_replacement)");
}

inline SudokuGrid mask_grid(Rng& rng, const SudokuGrid& grid, Difficulty difficulty,
                            MaskSampling sampling = MaskSampling::distinct) {
  srm::detail::require(grid.complete(), "mask_grid: grid must be complete");
  const auto [lo, hi] = mask_interval(grid.box(), difficulty);
  const int count = std::uniform_int_distribution<int>(lo, hi)(rng);
  SudokuGrid out = grid;
  if (sampling == MaskSampling::with_replacement) {
    std::uniform_int_distribution<int> cell(0, grid.num_cells() - 1);
    for (int k = 0; k < count; ++k) out[cell(rng)] = 0;
    return out;
  }
  std::vector<int> cells(static_cast<std::size_t>(grid.num_cells()));
  std::iota(cells.begin(), cells.end(), 0);
  std::shuffle(cells.begin(), cells.end(), rng);
  for (int k = 0; k < count; ++k) out[cells[static_cast<std::size_t>(k)]] = 0;
  return out;
}

/// Per-unit digit histograms; histogram[u][d-1] counts digit d in unit u.
inline std::vector<std::vector<int>> unit_histograms(const SudokuGrid& grid) {
  std::vector<std::vector<int>> hist;
  for (const auto& u : units(grid.box())) {
    std::vector<int> h(static_cast<std::size_t>(grid.side()), 0);
    for (int cell : u) ++h[static_cast<std::size_t>(grid[cell] - 1)];
    hist.push_back(std::move(h));
  }
  return hist;
}

inline bool check_valid(const SudokuGrid& grid) {
  if (!grid.complete()) throw ContractError("check_valid: grid has masked cells");
  for (const auto& h : unit_histograms(grid))
    for (int count : h)
      if (count != 1) return false;
  return true;
}

/// Sum over rows, columns and blocks of || histogram - 1 ||_1; zero iff valid.
inline double l1_histogram_metric(const SudokuGrid& grid) {
  if (!grid.complete()) throw ContractError("l1_histogram_metric: grid has masked cells");
  double total = 0.0;
  for (const auto& h : unit_histograms(grid))
    for (int count : h) total += std::abs(count - 1);
  return total;
}

/// Observed (non-zero) cells of `conditioning` equal those of `grid`.
inline bool consistent_with(const SudokuGrid& grid, const SudokuGrid& conditioning) {
  for (int i = 0; i < grid.num_cells(); ++i)
    if (conditioning[i] != 0 && conditioning[i] != grid[i]) return false;
  return true;
}

enum class OracleOrder { random, greedy };

inline std::string_view to_string(OracleOrder o) { return o == OracleOrder::random ? "random" : "greedy"; }

inline OracleOrder parse_oracle_order(std::string_view s) {
  if (s == "random") return OracleOrder::random;
  if (s == "greedy") return OracleOrder::greedy;
  throw ConfigError("unknown oracle order '" + std::string(s) + "'");
}

struct OracleResult {
  SudokuGrid grid;
  bool success = false;
};

/// Fill masked cells one at a time without backtracking. Each digit is drawn
/// uniformly among those absent from all filled peers, or among all digits when
/// every digit collides. `greedy` picks next the cell whose filled peers show
/// the most distinct digits, i.e. the fewest remaining candidates (ties
/// uniformly at random); `random` uses a random cell order.
inline OracleResult oracle_solve(Rng& rng, const SudokuGrid& masked, OracleOrder order) {
  SudokuGrid g = masked;
  const int n = g.num_cells();
  const int s = g.side();
  std::vector<std::vector<int>> peer_sets;
  for (int i = 0; i < n; ++i) peer_sets.push_back(peers(g.box(), i));

  std::vector<int> open;
  for (int i = 0; i < n; ++i)
    if (g[i] == 0) open.push_back(i);
  std::shuffle(open.begin(), open.end(), rng);

  std::vector<int> candidates;
  std::vector<int> best;
  while (!open.empty()) {
    std::size_t pick = open.size() - 1;
    if (order == OracleOrder::greedy) {
      int best_count = -1;
      best.clear();
      for (std::size_t k = 0; k < open.size(); ++k) {
        std::vector<bool> seen(static_cast<std::size_t>(s + 1), false);
        int filled = 0;
        for (int p : peer_sets[static_cast<std::size_t>(open[k])]) {
          const auto d = static_cast<std::size_t>(g[p]);
          if (d != 0 && !seen[d]) {
            seen[d] = true;
            ++filled;
          }
        }
        if (filled > best_count) {
          best_count = filled;
          best.assign(1, static_cast<int>(k));
        } else if (filled == best_count) {
          best.push_back(static_cast<int>(k));
        }
      }
      pick = static_cast<std::size_t>(
          best[std::uniform_int_distribution<std::size_t>(0, best.size() - 1)(rng)]);
    }
    const int cell = open[pick];
    open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));

    std::vector<bool> used(static_cast<std::size_t>(s + 1), false);
    for (int p : peer_sets[static_cast<std::size_t>(cell)]) used[static_cast<std::size_t>(g[p])] = true;
    candidates.clear();
    for (int d = 1; d <= s; ++d)
      if (!used[static_cast<std::size_t>(d)]) candidates.push_back(d);
    if (candidates.empty()) {
      for (int d = 1; d <= s; ++d) candidates.push_back(d);
    }
    g[cell] = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
  }
  const bool ok = check_valid(g);
  return {std::move(g), ok};
}

/// One-hot cell encoding with hot = +1, cold = -1. Masked cells encode as zeros.
inline VariableSet encode(const SudokuGrid& grid) {
  VariableSet x = VariableSet::Constant(grid.num_cells(), grid.side(), -1.0);
  for (int i = 0; i < grid.num_cells(); ++i) {
    if (grid[i] == 0)
      x.row(i).setZero();
    else
      x(i, grid[i] - 1) = 1.0;
  }
  return x;
}

/// Per-cell argmax; lowest digit wins ties.
inline SudokuGrid decode(const VariableSet& x, int box) {
  SudokuGrid g(box);
  srm::detail::require(x.rows() == g.num_cells() && x.cols() == g.side(), "decode: shape does not match box");
  for (int i = 0; i < g.num_cells(); ++i) {
    Eigen::Index best = 0;
    x.row(i).maxCoeff(&best);
    g[i] = static_cast<int>(best) + 1;
  }
  return g;
}

inline Mask observed_mask(const SudokuGrid& grid) {
  Mask m(static_cast<std::size_t>(grid.num_cells()));
  for (int i = 0; i < grid.num_cells(); ++i) m[static_cast<std::size_t>(i)] = grid[i] != 0;
  return m;
}

// Even Pixels ---------------------------------------------------------------

struct EvenPixelsImage {
  int width = 0;
  int height = 0;
  std::vector<int> pixels;  ///< each -1 or +1

  VariableSet encode() const {
    VariableSet x(static_cast<Eigen::Index>(pixels.size()), 1);
    for (std::size_t i = 0; i < pixels.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = pixels[i];
    return x;
  }
};

/// Uniformly random image with exactly half the pixels +1.
inline EvenPixelsImage evenpixels_sample(Rng& rng, int width, int height) {
  const int n = width * height;
  if (width <= 0 || height <= 0 || n % 2 != 0) throw DomainError("even pixels: pixel count must be positive and even");
  EvenPixelsImage img{width, height, std::vector<int>(static_cast<std::size_t>(n), -1)};
  std::fill(img.pixels.begin(), img.pixels.begin() + n / 2, 1);
  std::shuffle(img.pixels.begin(), img.pixels.end(), rng);
  return img;
}

struct EvenPixelsScore {
  int error = 0;
  bool exact = false;
};

/// Threshold at zero (two opposite colors) and compare the +1 count to half the pixels.
template <class Range>
EvenPixelsScore evenpixels_error(const Range& values) {
  int positives = 0;
  int total = 0;
  for (double v : values) {
    positives += v > 0.0;
    ++total;
  }
  const int twice_err = std::abs(2 * positives - total);
  // Odd totals cannot balance; round the half-count error up.
  const int err = (twice_err + 1) / 2;
  return {err, err == 0 && total % 2 == 0};
}

inline EvenPixelsScore evenpixels_error(const VariableSet& x) {
  return evenpixels_error(std::vector<double>(x.data(), x.data() + x.size()));
}

/// 4-neighbour pixel adjacency, row-major.
inline Eigen::MatrixXd build_grid_adjacency(int width, int height) {
  if (width <= 0 || height <= 0) throw DomainError("grid adjacency: width and height must be positive");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(width * height, width * height);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const int i = r * width + c;
      if (c + 1 < width) a(i, i + 1) = a(i + 1, i) = 1.0;
      if (r + 1 < height) a(i, i + width) = a(i + width, i) = 1.0;
    }
  }
  return a;
}

}  // namespace srm::bench
