// Copyright 2026 The SRM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "srm/config.hpp"
#include "srm/experiment.hpp"
#include "sudoku_oracle.hpp"

namespace srm {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("srm_config_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(ConfigTest, FileRoundTrip) {
  TempDir dir;
  ExperimentConfig c;
  c.seed = 42;
  c.overlap = 0.95;
  c.hidden = {64, 32};
  c.order = OrderKind::graph;
  c.overlaps = {0.0, 0.25};
  const auto path = (dir.path() / "cfg.txt").string();
  write_config_file(c, path);
  ExperimentConfig d;
  apply_config_file(d, path);
  EXPECT_EQ(config_to_map(c), config_to_map(d));
}

TEST(ConfigTest, CommentsAndWhitespace) {
  TempDir dir;
  const auto path = dir.path() / "cfg.txt";
  {
    std::ofstream out(path);
    out << "# comment\n\n  eta =0.5  # trailing\nschedule= cosine\n";
  }
  ExperimentConfig c;
  apply_config_file(c, path.string());
  EXPECT_EQ(c.eta, 0.5);
  EXPECT_EQ(c.schedule, ScheduleKind::cosine);
}

TEST(ConfigTest, RejectsBadInput) {
  ExperimentConfig c;
  EXPECT_THROW(set_config_value(c, "no_such_key", "1"), ConfigError);
  EXPECT_THROW(set_config_value(c, "eta", "1.5"), ConfigError);
  EXPECT_THROW(set_config_value(c, "eta", "abc"), ConfigError);
  EXPECT_THROW(set_config_value(c, "steps_total", "0"), ConfigError);
  EXPECT_THROW(set_config_value(c, "box", "4"), ConfigError);
  EXPECT_THROW(set_config_value(c, "order", "diagonal"), ConfigError);
  EXPECT_THROW(set_config_value(c, "mode", "both"), ConfigError);
  EXPECT_THROW(set_config_value(c, "hidden", ""), ConfigError);
  EXPECT_THROW(set_config_value(c, "overlaps", "0.5,2"), ConfigError);
  EXPECT_THROW(read_config_file("/nonexistent/cfg.txt"), ConfigError);
}

TEST(ConfigTest, ParallelModePinsOverlap) {
  ExperimentConfig c;
  c.overlap = 0.3;
  EXPECT_EQ(c.effective_overlap(), 0.3);
  c.mode = "parallel";
  EXPECT_EQ(c.effective_overlap(), 1.0);
}

TEST(ConfigTest, ManifestEchoesEveryKey) {
  ExperimentConfig c;
  c.seed = 9;
  const auto m = make_manifest("run", c, {"a.csv"});
  EXPECT_EQ(m["command"], "run");
  EXPECT_EQ(m["outputs"][0], "a.csv");
  for (const auto& f : config_fields()) EXPECT_EQ(m["config"][f.key], f.get(c)) << f.key;
}

TEST(DatasetTest, SudokuFileRoundTrip) {
  TempDir dir;
  Rng rng(1);
  std::vector<bench::SudokuGrid> grids;
  for (int k = 0; k < 5; ++k) grids.push_back(bench::mask_grid(rng, bench::generate_solution(rng, 3), bench::Difficulty::medium));
  write_sudoku_file(dir.path() / "g.txt", 3, grids);
  const SudokuFile f = read_sudoku_file(dir.path() / "g.txt");
  EXPECT_EQ(f.box, 3);
  ASSERT_EQ(f.grids.size(), grids.size());
  for (std::size_t k = 0; k < grids.size(); ++k) EXPECT_EQ(f.grids[k], grids[k]);
  EXPECT_EQ(slurp(dir.path() / "g.txt").substr(0, 4), "b=3\n");
}

TEST(DatasetTest, EvenPixelsFileRoundTrip) {
  TempDir dir;
  Rng rng(2);
  std::vector<bench::EvenPixelsImage> images;
  for (int k = 0; k < 5; ++k) images.push_back(bench::evenpixels_sample(rng, 4, 2));
  write_evenpixels_file(dir.path() / "e.txt", images);
  const auto back = read_evenpixels_file(dir.path() / "e.txt", 4, 2);
  ASSERT_EQ(back.size(), images.size());
  for (std::size_t k = 0; k < images.size(); ++k) EXPECT_EQ(back[k].pixels, images[k].pixels);
  EXPECT_THROW(read_evenpixels_file(dir.path() / "e.txt", 4, 4), ConfigError);
}

TEST(DatasetTest, GeneratedSplitIsDisjointAndValid) {
  TempDir dir;
  ExperimentConfig c;
  c.data_dir = dir.path().string();
  c.num_instances = 50;
  generate_dataset(c);
  const auto all = testing::all_4x4_solutions();
  const std::set<std::vector<int>> universe(all.begin(), all.end());
  const SudokuFile train = read_sudoku_file(dir.path() / "train.txt");
  const SudokuFile test = read_sudoku_file(dir.path() / "test.txt");
  ASSERT_EQ(train.grids.size(), 200u);
  ASSERT_EQ(test.grids.size(), 88u);
  std::set<std::vector<int>> seen;
  for (const auto* f : {&train, &test}) {
    for (const auto& g : f->grids) {
      EXPECT_TRUE(universe.count(g.cells()));
      EXPECT_TRUE(seen.insert(g.cells()).second);
    }
  }
  for (auto d : {bench::Difficulty::easy, bench::Difficulty::medium, bench::Difficulty::hard}) {
    const SudokuFile masked = read_sudoku_file(dir.path() / instances_file_name(d));
    ASSERT_EQ(masked.grids.size(), 50u);
    const auto [lo, hi] = bench::mask_interval(2, d);
    for (std::size_t k = 0; k < masked.grids.size(); ++k) {
      EXPECT_TRUE(bench::consistent_with(test.grids[k % test.grids.size()], masked.grids[k]));
      EXPECT_GE(masked.grids[k].masked_count(), lo);
      EXPECT_LE(masked.grids[k].masked_count(), hi);
    }
  }
}

TEST(DatasetTest, GenerationIsDeterministic) {
  TempDir a, b;
  ExperimentConfig c;
  c.num_instances = 10;
  c.data_dir = a.path().string();
  generate_dataset(c);
  c.data_dir = b.path().string();
  generate_dataset(c);
  for (const char* name : {"train.txt", "test.txt", "test_easy.txt", "test_hard.txt"}) {
    EXPECT_EQ(slurp(a.path() / name), slurp(b.path() / name)) << name;
  }
}

TEST(DatasetTest, TooManySmallSolutions) {
  TempDir dir;
  ExperimentConfig c;
  c.data_dir = dir.path().string();
  c.n_train = 250;
  c.n_test = 50;
  EXPECT_THROW(generate_dataset(c), ConfigError);
}

TEST(TSampleStatsTest, ConservesCountsAndFlattensTheMean) {
  ExperimentConfig c;
  c.stats_draws = 100000;
  c.stats_n = 16;
  c.stats_bins = 20;
  const auto counts = tsample_histogram(c);
  long total = 0;
  std::vector<long> tbar(20, 0);
  for (std::size_t i = 0; i < counts.size(); ++i)
    for (std::size_t j = 0; j < counts[i].size(); ++j) {
      total += counts[i][j];
      tbar[j] += counts[i][j];
    }
  EXPECT_EQ(total, 100000L * 16);
  const double expected = 100000.0 * 16 / 20;
  for (long v : tbar) EXPECT_NEAR(v / expected, 1.0, 0.05);
}

TEST(TSampleStatsTest, UniformTConcentratesTheMean) {
  ExperimentConfig c;
  c.tsampler = TSamplerKind::uniform_t;
  c.stats_draws = 20000;
  const auto counts = tsample_histogram(c);
  long middle = 0, edges = 0;
  for (const auto& row : counts) {
    middle += row[9] + row[10];
    edges += row[0] + row[19];
  }
  EXPECT_GT(middle, 100 * std::max(1L, edges));
}

TEST(MetricsTest, CsvLayout) {
  TempDir dir;
  MetricRow r;
  r.instance_id = 3;
  r.difficulty = "hard";
  r.mode = "sequential";
  r.order = "uncertainty";
  r.overlap = 0.5;
  r.steps = 320;
  r.accuracy = true;
  r.l1 = 2;
  r.eval_count = 336;
  r.seed = 7;
  write_metrics_csv(dir.path() / "m.csv", {r});
  EXPECT_EQ(slurp(dir.path() / "m.csv"),
            "instance_id,difficulty,mode,order,overlap,steps,accuracy,l1,eval_count,seed\n"
            "3,hard,sequential,uncertainty,0.5,320,1,2,336,7\n");
}

TEST(OracleHarnessTest, RowsPerDifficultyAndOrder) {
  ExperimentConfig c;
  c.oracle_instances = 30;
  const auto rows = run_oracle(c);
  EXPECT_EQ(rows.size(), 3u * 30u * 2u);
  int greedy_easy = 0;
  for (const auto& r : rows) greedy_easy += r.difficulty == "easy" && r.order == "greedy" && r.accuracy;
  EXPECT_GE(greedy_easy, 28);
}

}  // namespace
}  // namespace srm
