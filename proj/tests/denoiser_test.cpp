// Copyright 2026 The SRM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "srm/bench.hpp"
#include "srm/denoiser.hpp"
#include "sudoku_oracle.hpp"

namespace srm {
namespace {

Corpus small_sudoku_corpus() {
  std::vector<VariableSet> samples;
  for (const auto& cells : testing::all_4x4_solutions()) samples.push_back(bench::encode(bench::SudokuGrid(2, cells)));
  return Corpus(std::move(samples));
}

// Direct Gaussian posterior without any max-shift, fine for small residuals.
Vector naive_weights(const Corpus& c, const NoiseSchedule& s, const VariableSet& x, const NoiseLevels& t) {
  Vector w(static_cast<Eigen::Index>(c.size()));
  for (std::size_t k = 0; k < c.size(); ++k) {
    double p = 1.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double a = s.a(t[i]), b = s.b(t[i]);
      p *= std::exp(-(x.row(i) - a * c[k].row(i)).squaredNorm() / (2 * b * b));
    }
    w[static_cast<Eigen::Index>(k)] = p;
  }
  return w / w.sum();
}

TEST(CorpusTest, RejectsMixedShapes) {
  EXPECT_THROW(Corpus({}), ContractError);
  EXPECT_THROW(Corpus({VariableSet::Zero(2, 1), VariableSet::Zero(3, 1)}), ContractError);
}

TEST(ExactDenoiserTest, MatchesNaivePosterior) {
  Rng rng(1);
  std::vector<VariableSet> samples;
  for (int k = 0; k < 5; ++k) samples.push_back(standard_normal(rng, 3, 2) * 0.3);
  const Corpus corpus(samples);
  const NoiseSchedule schedule(ScheduleKind::cosine);
  const ExactDenoiser den(corpus, schedule);
  for (int trial = 0; trial < 50; ++trial) {
    NoiseLevels t(3);
    for (Eigen::Index i = 0; i < 3; ++i) t[i] = 0.5 + 0.5 * uniform01(rng);
    const VariableSet x = standard_normal(rng, 3, 2) * 0.5;
    const Vector w = den.posterior_weights(x, t);
    EXPECT_NEAR(w.sum(), 1.0, 1e-12);
    EXPECT_TRUE(w.isApprox(naive_weights(corpus, schedule, x, t), 1e-10));
    VariableSet mean = VariableSet::Zero(3, 2);
    for (std::size_t k = 0; k < samples.size(); ++k) mean += w[static_cast<Eigen::Index>(k)] * samples[k];
    const DenoiserOutput out = den.evaluate(x, t);
    EXPECT_TRUE(out.x0_hat.isApprox(mean, 1e-12));
    for (Eigen::Index i = 0; i < 3; ++i) {
      const double a = schedule.a(t[i]), b = schedule.b(t[i]);
      EXPECT_TRUE(out.eps_hat.row(i).isApprox((x.row(i) - a * mean.row(i)) / b, 1e-10));
    }
  }
}

TEST(ExactDenoiserTest, StableForTinyNoise) {
  const Corpus corpus({VariableSet::Constant(2, 1, 1.0), VariableSet::Constant(2, 1, -1.0)});
  const ExactDenoiser den(corpus, NoiseSchedule(ScheduleKind::linear));
  const NoiseLevels t = NoiseLevels::Constant(2, 0.01);
  const VariableSet x = VariableSet::Constant(2, 1, 0.5);
  const Vector w = den.posterior_weights(x, t);
  EXPECT_TRUE(w.allFinite());
  EXPECT_NEAR(w[0], 1.0, 1e-12);
}

TEST(ExactDenoiserTest, MaskedSudokuPosteriorIsUniformOverCompletions) {
  const auto solutions = testing::all_4x4_solutions();
  const ExactDenoiser den(small_sudoku_corpus(), NoiseSchedule(ScheduleKind::linear));
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const bench::SudokuGrid masked = bench::mask_grid(rng, bench::generate_solution(rng, 2), bench::Difficulty::hard);
    const VariableSet x = bench::encode(masked);  // hidden rows are zero, a valid draw at t=1
    NoiseLevels t = NoiseLevels::Zero(16);
    for (int i = 0; i < 16; ++i)
      if (masked[i] == 0) t[i] = 1.0;

    std::vector<std::size_t> matches;
    for (std::size_t k = 0; k < solutions.size(); ++k) {
      bool ok = true;
      for (int i = 0; i < 16 && ok; ++i) ok = masked[i] == 0 || masked[i] == solutions[k][static_cast<std::size_t>(i)];
      if (ok) matches.push_back(k);
    }
    const Vector w = den.posterior_weights(x, t);
    for (std::size_t k = 0; k < solutions.size(); ++k) {
      const bool in = std::find(matches.begin(), matches.end(), k) != matches.end();
      EXPECT_NEAR(w[static_cast<Eigen::Index>(k)], in ? 1.0 / matches.size() : 0.0, 1e-12);
    }
  }
}

TEST(ExactDenoiserTest, InconsistentObservationsThrow) {
  const ExactDenoiser den(small_sudoku_corpus(), NoiseSchedule(ScheduleKind::linear));
  // Two equal digits in the first row.
  bench::SudokuGrid g(2);
  g[0] = 1;
  g[1] = 1;
  NoiseLevels t = NoiseLevels::Ones(16);
  t[0] = t[1] = 0.0;
  EXPECT_THROW(den.posterior_weights(bench::encode(g), t), InconsistentConditioningError);
}

TEST(ExactDenoiserTest, PermutationEquivariant) {
  Rng rng(3);
  std::vector<VariableSet> samples;
  for (int k = 0; k < 6; ++k) samples.push_back(standard_normal(rng, 4, 2));
  std::vector<int> perm{2, 0, 3, 1};
  Eigen::PermutationMatrix<Eigen::Dynamic> P(4);
  for (int i = 0; i < 4; ++i) P.indices()[i] = perm[static_cast<std::size_t>(i)];
  std::vector<VariableSet> permuted;
  for (const auto& s : samples) permuted.push_back(P * s);
  const NoiseSchedule schedule(ScheduleKind::cosine);
  const ExactDenoiser a(Corpus(samples), schedule), b(Corpus(permuted), schedule);
  const VariableSet x = standard_normal(rng, 4, 2);
  const NoiseLevels t = (NoiseLevels(4) << 0.3, 0.6, 0.9, 0.75).finished();
  const DenoiserOutput oa = a.evaluate(x, t);
  const DenoiserOutput ob = b.evaluate(P * x, P * t);
  EXPECT_TRUE((P * oa.x0_hat).isApprox(ob.x0_hat, 1e-12));
  EXPECT_TRUE((P * oa.eps_hat).isApprox(ob.eps_hat, 1e-12));
  EXPECT_TRUE((P * oa.log_var).isApprox(ob.log_var, 1e-12));
}

TEST(ExactDenoiserTest, ForcedCellsHaveLowestUncertainty) {
  const ExactDenoiser den(small_sudoku_corpus(), NoiseSchedule(ScheduleKind::linear));
  // First row and first column observed except (0,3), which is then forced to 4.
  bench::SudokuGrid g(2);
  g[0] = 1;
  g[1] = 2;
  g[2] = 3;
  g[4] = 3;
  g[8] = 2;
  g[12] = 4;
  g[3] = 0;
  NoiseLevels t = NoiseLevels::Zero(16);
  for (int i = 0; i < 16; ++i)
    if (g[i] == 0) t[i] = 0.5;
  const DenoiserOutput out = den.evaluate(bench::encode(g), t);
  // Forced: (0,3)=4 and (1,1)=4 (block of 1,2,3 and column 1 excludes the rest).
  EXPECT_NEAR(out.log_var[3], std::log(kLogVarFloor), 1e-9);
  for (int i = 0; i < 16; ++i) {
    if (t[i] == 0.0) continue;
    EXPECT_GE(out.log_var[i], out.log_var[3]);
  }
  double free_max = -1e300;
  for (int i = 0; i < 16; ++i)
    if (t[i] > 0.0) free_max = std::max(free_max, out.log_var[i]);
  EXPECT_GT(free_max, std::log(kLogVarFloor) + 1.0);
}

TEST(ExactDenoiserTest, ValidatesInputs) {
  const ExactDenoiser den(Corpus({VariableSet::Zero(2, 1)}), NoiseSchedule(ScheduleKind::linear));
  EXPECT_THROW(den.evaluate(VariableSet::Zero(3, 1), NoiseLevels::Ones(3)), ContractError);
  EXPECT_THROW(den.evaluate(VariableSet::Zero(2, 1), NoiseLevels::Ones(1)), ContractError);
  EXPECT_THROW(den.evaluate(VariableSet::Zero(2, 1), NoiseLevels::Constant(2, 1.5)), DomainError);
}

static_assert(Denoiser<ExactDenoiser>);

}  // namespace
}  // namespace srm
