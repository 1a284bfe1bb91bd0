// Copyright 2026 The SRM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <set>

#include "srm/bench.hpp"
#include "sudoku_oracle.hpp"

namespace srm::bench {
namespace {

TEST(SudokuTest, BruteForceFindsAll288) { EXPECT_EQ(testing::all_4x4_solutions().size(), 288u); }

TEST(SudokuTest, GeneratedGridsAreValid) {
  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    for (int box : {2, 3}) {
      const SudokuGrid g = generate_solution(rng, box);
      EXPECT_TRUE(g.complete());
      EXPECT_TRUE(check_valid(g));
    }
  }
}

TEST(SudokuTest, SmallGridsCoverTheSolutionSpace) {
  const auto all = testing::all_4x4_solutions();
  const std::set<std::vector<int>> valid(all.begin(), all.end());
  std::set<std::vector<int>> hit;
  Rng rng(2);
  for (int k = 0; k < 10000; ++k) {
    const SudokuGrid g = generate_solution(rng, 2);
    ASSERT_TRUE(valid.count(g.cells()));
    hit.insert(g.cells());
  }
  EXPECT_GE(hit.size(), 250u);
}

TEST(SudokuTest, RejectsUnsupportedBox) {
  EXPECT_THROW(SudokuGrid(4), DomainError);
  EXPECT_THROW(build_sudoku_adjacency(1), DomainError);
}

TEST(MaskTest, CountsFollowDifficultyIntervals) {
  Rng rng(3);
  for (int k = 0; k < 500; ++k) {
    const SudokuGrid g9 = generate_solution(rng, 3);
    const int easy = mask_grid(rng, g9, Difficulty::easy).masked_count();
    EXPECT_GE(easy, 1);
    EXPECT_LE(easy, 27);
    const int hard9 = mask_grid(rng, g9, Difficulty::hard).masked_count();
    EXPECT_GE(hard9, 55);
    EXPECT_LE(hard9, 81);
    const SudokuGrid g4 = generate_solution(rng, 2);
    const int hard4 = mask_grid(rng, g4, Difficulty::hard).masked_count();
    EXPECT_GE(hard4, 11);
    EXPECT_LE(hard4, 16);
    const int medium4 = mask_grid(rng, g4, Difficulty::medium).masked_count();
    EXPECT_GE(medium4, 6);
    EXPECT_LE(medium4, 10);
  }
}

TEST(MaskTest, ReplacementSamplingMasksAtMostTheDrawnCount) {
  Rng rng(4);
  for (int k = 0; k < 500; ++k) {
    const SudokuGrid g = generate_solution(rng, 3);
    const int m = mask_grid(rng, g, Difficulty::easy, MaskSampling::with_replacement).masked_count();
    EXPECT_GE(m, 1);
    EXPECT_LE(m, 27);
  }
}

TEST(MaskTest, UnmaskingRestoresTheGrid) {
  Rng rng(5);
  const SudokuGrid g = generate_solution(rng, 3);
  SudokuGrid m = mask_grid(rng, g, Difficulty::medium);
  EXPECT_TRUE(consistent_with(g, m));
  for (int i = 0; i < m.num_cells(); ++i)
    if (m[i] == 0) m[i] = g[i];
  EXPECT_EQ(m, g);
}

TEST(ValidityTest, DuplicateInRowIsInvalid) {
  Rng rng(6);
  SudokuGrid g = generate_solution(rng, 3);
  std::swap(g[0], g[1]);
  EXPECT_FALSE(check_valid(g));
}

TEST(ValidityTest, MaskedGridIsAContractViolation) {
  Rng rng(7);
  const SudokuGrid g = mask_grid(rng, generate_solution(rng, 2), Difficulty::easy);
  EXPECT_THROW(check_valid(g), ContractError);
  EXPECT_THROW(l1_histogram_metric(g), ContractError);
}

TEST(ValidityTest, AgreesWithBruteForceOnPerturbedGrids) {
  Rng rng(8);
  for (int k = 0; k < 1000; ++k) {
    const int box = k % 2 == 0 ? 2 : 3;
    SudokuGrid g = generate_solution(rng, box);
    const int changes = std::uniform_int_distribution<int>(0, 3)(rng);
    for (int c = 0; c < changes; ++c) {
      g[std::uniform_int_distribution<int>(0, g.num_cells() - 1)(rng)] =
          std::uniform_int_distribution<int>(1, g.side())(rng);
    }
    const bool expected = testing::brute_force_valid(g.cells(), box);
    EXPECT_EQ(check_valid(g), expected);
    EXPECT_EQ(l1_histogram_metric(g) == 0.0, expected);
  }
}

TEST(ValidityTest, ExhaustiveSmallGridEquivalence) {
  for (const auto& cells : testing::all_4x4_solutions()) {
    const SudokuGrid g(2, cells);
    EXPECT_TRUE(check_valid(g));
    EXPECT_EQ(l1_histogram_metric(g), 0.0);
  }
}

TEST(L1MetricTest, SingleChangedCellCostsSix) {
  Rng rng(9);
  for (int k = 0; k < 100; ++k) {
    SudokuGrid g = generate_solution(rng, 3);
    const int cell = std::uniform_int_distribution<int>(0, 80)(rng);
    const int old = g[cell];
    g[cell] = old % 9 + 1;
    EXPECT_EQ(l1_histogram_metric(g), 6.0);
  }
}

TEST(L1MetricTest, InvariantUnderRelabeling) {
  Rng rng(10);
  for (int k = 0; k < 100; ++k) {
    SudokuGrid g = generate_solution(rng, 3);
    for (int c = 0; c < 5; ++c) g[std::uniform_int_distribution<int>(0, 80)(rng)] = std::uniform_int_distribution<int>(1, 9)(rng);
    std::vector<int> perm{1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::shuffle(perm.begin(), perm.end(), rng);
    SudokuGrid relabeled = g;
    for (int i = 0; i < 81; ++i) relabeled[i] = perm[static_cast<std::size_t>(g[i] - 1)];
    EXPECT_EQ(l1_histogram_metric(relabeled), l1_histogram_metric(g));
  }
}

TEST(OracleTest, NothingMaskedAlwaysSucceeds) {
  Rng rng(11);
  const SudokuGrid g = generate_solution(rng, 3);
  for (auto order : {OracleOrder::random, OracleOrder::greedy}) {
    const auto r = oracle_solve(rng, g, order);
    EXPECT_TRUE(r.success);
    EXPECT_EQ(r.grid, g);
  }
}

TEST(OracleTest, SingleHoleIsForced) {
  Rng rng(12);
  for (int k = 0; k < 200; ++k) {
    const SudokuGrid g = generate_solution(rng, 3);
    SudokuGrid m = g;
    m[std::uniform_int_distribution<int>(0, 80)(rng)] = 0;
    const auto r = oracle_solve(rng, m, OracleOrder::greedy);
    EXPECT_TRUE(r.success);
    EXPECT_EQ(r.grid, g);
  }
}

TEST(OracleTest, KeepsObservedCellsAndGreedyDominatesRandom) {
  Rng rng(13);
  int random_ok = 0, greedy_ok = 0;
  for (int k = 0; k < 300; ++k) {
    const SudokuGrid m = mask_grid(rng, generate_solution(rng, 3), Difficulty::easy);
    const auto r = oracle_solve(rng, m, OracleOrder::random);
    const auto g = oracle_solve(rng, m, OracleOrder::greedy);
    EXPECT_TRUE(consistent_with(r.grid, m));
    EXPECT_TRUE(consistent_with(g.grid, m));
    random_ok += r.success;
    greedy_ok += g.success;
  }
  EXPECT_GT(greedy_ok, random_ok);
}

TEST(AdjacencyTest, PeerCounts) {
  for (auto [box, peers] : {std::pair{2, 7}, std::pair{3, 20}}) {
    const Eigen::MatrixXd a = build_sudoku_adjacency(box);
    EXPECT_EQ(a, a.transpose());
    EXPECT_TRUE(a.diagonal().isZero(0.0));
    for (Eigen::Index i = 0; i < a.rows(); ++i) EXPECT_EQ(a.row(i).sum(), peers);
    EXPECT_TRUE(((a.array() == 0.0) || (a.array() == 1.0)).all());
  }
}

TEST(EncodingTest, RoundTrip) {
  Rng rng(14);
  for (int k = 0; k < 1000; ++k) {
    const SudokuGrid g = generate_solution(rng, k % 2 == 0 ? 2 : 3);
    const VariableSet x = encode(g);
    EXPECT_EQ(x.cols(), g.side());
    EXPECT_EQ(decode(x, g.box()), g);
  }
}

TEST(EncodingTest, HotIsPlusOneColdIsMinusOne) {
  const SudokuGrid g(2, {1, 2, 3, 4, 3, 4, 1, 2, 2, 1, 4, 3, 4, 3, 2, 0});
  const VariableSet x = encode(g);
  EXPECT_EQ(x.row(0), (Eigen::RowVector4d() << 1, -1, -1, -1).finished());
  EXPECT_EQ(x.row(15), Eigen::RowVector4d::Zero());
  const Mask m = observed_mask(g);
  EXPECT_TRUE(m[0]);
  EXPECT_FALSE(m[15]);
}

TEST(EvenPixelsTest, SamplesAreBalanced) {
  Rng rng(15);
  for (int k = 0; k < 100; ++k) {
    const EvenPixelsImage img = evenpixels_sample(rng, 4, 4);
    EXPECT_EQ(std::count(img.pixels.begin(), img.pixels.end(), 1), 8);
    const auto score = evenpixels_error(img.encode());
    EXPECT_EQ(score.error, 0);
    EXPECT_TRUE(score.exact);
  }
}

TEST(EvenPixelsTest, PositionsAreUnbiased) {
  Rng rng(16);
  constexpr int kDraws = 100000;
  std::vector<double> sums(16, 0.0);
  for (int k = 0; k < kDraws; ++k) {
    const EvenPixelsImage img = evenpixels_sample(rng, 4, 4);
    for (int i = 0; i < 16; ++i) sums[static_cast<std::size_t>(i)] += img.pixels[static_cast<std::size_t>(i)];
  }
  // Each pixel is +-1 with probability 1/2: standard error 1/sqrt(draws).
  for (double s : sums) EXPECT_LE(std::abs(s / kDraws), 3.0 / std::sqrt(static_cast<double>(kDraws)));
}

TEST(EvenPixelsTest, ErrorCounts) {
  EXPECT_EQ(evenpixels_error(std::vector<double>(16, 1.0)).error, 8);
  EXPECT_FALSE(evenpixels_error(std::vector<double>(16, 1.0)).exact);
  std::vector<double> nine(16, -0.3);
  std::fill(nine.begin(), nine.begin() + 9, 0.7);
  EXPECT_EQ(evenpixels_error(nine).error, 1);
  std::vector<double> balanced(16, -1.0);
  std::fill(balanced.begin(), balanced.begin() + 8, 1.0);
  EXPECT_TRUE(evenpixels_error(balanced).exact);
}

TEST(EvenPixelsTest, OddPixelCountIsRejected) {
  Rng rng(17);
  EXPECT_THROW(evenpixels_sample(rng, 3, 3), DomainError);
}

}  // namespace
}  // namespace srm::bench
