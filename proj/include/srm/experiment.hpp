// Copyright 2026 The SRM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <numeric>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "srm/bench.hpp"
#include "srm/config.hpp"
#include "srm/denoiser.hpp"
#include "srm/network.hpp"
#include "srm/policy.hpp"
#include "srm/tsampler.hpp"

namespace srm {

// Stream ids for make_rng; instance streams use the instance id itself.
inline constexpr std::uint64_t kStreamGenData = 1ULL << 40;
inline constexpr std::uint64_t kStreamTrain = (1ULL << 40) + 1;
inline constexpr std::uint64_t kStreamWeights = (1ULL << 40) + 2;
inline constexpr std::uint64_t kStreamOracle = (1ULL << 40) + 3;
inline constexpr std::uint64_t kStreamStats = (1ULL << 40) + 4;

// Dataset files ---------------------------------------------------------------

inline char digit_char(int d) { return static_cast<char>(d < 10 ? '0' + d : 'a' + d - 10); }

inline int char_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'z') return c - 'a' + 10;
  return -1;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return in;
}

inline void write_sudoku_file(const std::filesystem::path& path, int box, const std::vector<bench::SudokuGrid>& grids) {
  auto out = open_output(path);
  out << "b=" << box << "\n";
  for (const auto& g : grids) {
    detail::require(g.box() == box, "write_sudoku_file: mixed box sizes");
    for (int v : g.cells()) out << digit_char(v);
    out << "\n";
  }
}

struct SudokuFile {
  int box = 0;
  std::vector<bench::SudokuGrid> grids;
};

inline SudokuFile read_sudoku_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  SudokuFile f;
  std::string line;
  if (!std::getline(in, line) || line.rfind("b=", 0) != 0) {
    throw ConfigError(path.string() + ": missing 'b=<box>' header");
  }
  f.box = std::stoi(line.substr(2));
  const int cells = f.box * f.box * f.box * f.box;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (static_cast<int>(line.size()) != cells) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(cells) + " digits");
    }
    std::vector<int> v(static_cast<std::size_t>(cells));
    for (int i = 0; i < cells; ++i) {
      v[static_cast<std::size_t>(i)] = char_digit(line[static_cast<std::size_t>(i)]);
      if (v[static_cast<std::size_t>(i)] < 0 || v[static_cast<std::size_t>(i)] > f.box * f.box) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad digit");
      }
    }
    f.grids.emplace_back(f.box, std::move(v));
  }
  return f;
}

inline void write_evenpixels_file(const std::filesystem::path& path, const std::vector<bench::EvenPixelsImage>& images) {
  auto out = open_output(path);
  for (const auto& img : images) {
    for (int p : img.pixels) out << (p > 0 ? '+' : '-');
    out << "\n";
  }
}

inline std::vector<bench::EvenPixelsImage> read_evenpixels_file(const std::filesystem::path& path, int width,
                                                                int height) {
  auto in = open_input(path);
  std::vector<bench::EvenPixelsImage> images;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (static_cast<int>(line.size()) != width * height) {
      throw ConfigError(path.string() + ": image line length does not match width*height");
    }
    bench::EvenPixelsImage img{width, height, {}};
    for (char c : line) {
      if (c != '+' && c != '-') throw ConfigError(path.string() + ": pixels must be '+' or '-'");
      img.pixels.push_back(c == '+' ? 1 : -1);
    }
    images.push_back(std::move(img));
  }
  return images;
}

inline std::filesystem::path data_path(const ExperimentConfig& c, const std::string& name) {
  return std::filesystem::path(c.data_dir) / name;
}

inline std::string instances_file_name(bench::Difficulty d) { return "test_" + std::string(to_string(d)) + ".txt"; }

inline std::filesystem::path checkpoint_path(const ExperimentConfig& c) {
  const std::filesystem::path p(c.checkpoint);
  return p.is_absolute() ? p : std::filesystem::path(c.data_dir) / p;
}

// gen-data --------------------------------------------------------------------

/// Writes the training corpus, held-out solutions and masked test instances.
/// Returns the written paths.
inline std::vector<std::string> generate_dataset(const ExperimentConfig& c) {
  Rng rng = make_rng(c.seed, kStreamGenData);
  std::vector<std::string> written;
  if (c.task == TaskKind::evenpixels) {
    std::vector<bench::EvenPixelsImage> images;
    for (int k = 0; k < c.n_train; ++k) images.push_back(bench::evenpixels_sample(rng, c.width, c.height));
    const auto path = data_path(c, "train.txt");
    write_evenpixels_file(path, images);
    written.push_back(path.string());
    return written;
  }

  const long want = static_cast<long>(c.n_train) + c.n_test;
  if (c.box == 2 && want > 288) {
    throw ConfigError("4x4 sudoku has only 288 solutions; n_train + n_test = " + std::to_string(want));
  }
  if (c.n_test < 1) throw ConfigError("gen-data needs n_test >= 1 to build masked test instances");
  std::set<std::vector<int>> seen;
  std::vector<bench::SudokuGrid> solutions;
  while (static_cast<long>(solutions.size()) < want) {
    bench::SudokuGrid g = bench::generate_solution(rng, c.box);
    if (seen.insert(g.cells()).second) solutions.push_back(std::move(g));
  }
  const std::vector<bench::SudokuGrid> train(solutions.begin(), solutions.begin() + c.n_train);
  const std::vector<bench::SudokuGrid> test(solutions.begin() + c.n_train, solutions.end());
  for (const auto& [name, grids] : {std::pair{"train.txt", &train}, std::pair{"test.txt", &test}}) {
    const auto path = data_path(c, name);
    write_sudoku_file(path, c.box, *grids);
    written.push_back(path.string());
  }
  for (auto d : {bench::Difficulty::easy, bench::Difficulty::medium, bench::Difficulty::hard}) {
    std::vector<bench::SudokuGrid> masked;
    for (int k = 0; k < c.num_instances; ++k) {
      masked.push_back(bench::mask_grid(rng, test[static_cast<std::size_t>(k) % test.size()], d, c.mask_sampling));
    }
    const auto path = data_path(c, instances_file_name(d));
    write_sudoku_file(path, c.box, masked);
    written.push_back(path.string());
  }
  return written;
}

/// Training corpus from data_dir/train.txt, encoded as variable sets.
inline std::vector<VariableSet> load_training_corpus(const ExperimentConfig& c) {
  std::vector<VariableSet> corpus;
  const auto path = data_path(c, "train.txt");
  if (c.task == TaskKind::evenpixels) {
    for (const auto& img : read_evenpixels_file(path, c.width, c.height)) corpus.push_back(img.encode());
  } else {
    const SudokuFile f = read_sudoku_file(path);
    if (f.box != c.box) throw ContractError("train.txt box does not match config box");
    for (const auto& g : f.grids) corpus.push_back(bench::encode(g));
  }
  if (corpus.empty()) throw ConfigError(path.string() + " holds no samples");
  return corpus;
}

// train -----------------------------------------------------------------------

inline LossWeightTable loss_weights_for(const ExperimentConfig& c) {
  Rng rng = make_rng(c.seed, kStreamWeights);
  return estimate_loss_weights(rng, c.tsampler_spec(), static_cast<std::size_t>(c.num_variables()),
                               static_cast<std::size_t>(c.weight_bins), static_cast<std::size_t>(c.weight_samples));
}

/// Train a fresh network on `corpus`. `on_log(step, mean losses)` fires every log_every steps.
inline NetParams train_network(const ExperimentConfig& c, const std::vector<VariableSet>& corpus,
                               const std::function<void(int, const LossBreakdown&)>& on_log = {}) {
  detail::require(!corpus.empty(), "train_network: empty corpus");
  for (const auto& s : corpus) {
    if (s.rows() != c.num_variables() || s.cols() != c.variable_dim()) {
      throw ContractError("train_network: corpus shape does not match the configured task");
    }
  }
  const LossWeightTable weights = loss_weights_for(c);
  Rng rng = make_rng(c.seed, kStreamTrain);
  NetParams params = net_init(rng, c.num_variables(), c.variable_dim(), c.hidden, c.emb_freqs,
                              c.precondition ? std::optional(c.schedule) : std::nullopt);
  AdamState adam;
  adam.lr = c.lr;
  const NoiseSchedule schedule(c.schedule);
  const TSamplerSpec spec = c.tsampler_spec();
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  std::vector<const VariableSet*> batch(static_cast<std::size_t>(c.batch));
  LossBreakdown acc;
  int acc_n = 0;
  for (int step = 0; step < c.train_steps; ++step) {
    if (c.lr_decay == LrDecay::cosine) {
      adam.lr = 0.5 * c.lr * (1.0 + std::cos(std::numbers::pi * step / c.train_steps));
    }
    for (auto& b : batch) b = &corpus[pick(rng)];
    const LossBreakdown l = train_step(params, adam, batch, rng, schedule, spec, weights, c.lambda_nll);
    acc.total += l.total;
    acc.eps_mse += l.eps_mse;
    acc.nll += l.nll;
    ++acc_n;
    if (c.log_every > 0 && (step + 1) % c.log_every == 0) {
      if (on_log) on_log(step + 1, {acc.total / acc_n, acc.eps_mse / acc_n, acc.nll / acc_n});
      acc = {};
      acc_n = 0;
    }
  }
  return params;
}

/// Load the configured checkpoint and check it fits the task.
inline NetParams load_checkpoint_for(const ExperimentConfig& c) {
  NetParams p = load_checkpoint(checkpoint_path(c).string());
  if (p.shape().n != c.num_variables() || p.shape().dim != c.variable_dim()) {
    throw ContractError("checkpoint " + checkpoint_path(c).string() + " was trained for n=" +
                        std::to_string(p.shape().n) + " dim=" + std::to_string(p.shape().dim) +
                        ", config needs n=" + std::to_string(c.num_variables()) +
                        " dim=" + std::to_string(c.variable_dim()));
  }
  return p;
}

// run -------------------------------------------------------------------------

struct MetricRow {
  int instance_id = 0;
  std::string difficulty;
  std::string mode;
  std::string order;
  double overlap = 0.0;
  int steps = 0;
  bool accuracy = false;
  double l1 = 0.0;  ///< sudoku L1 histogram metric, or the even pixels count error
  int eval_count = 0;
  std::uint64_t seed = 0;
};

inline const char* kMetricsHeader = "instance_id,difficulty,mode,order,overlap,steps,accuracy,l1,eval_count,seed";

inline void write_metric_row(std::ostream& out, const MetricRow& r) {
  out << r.instance_id << ',' << r.difficulty << ',' << r.mode << ',' << r.order << ','
      << detail::format_double(r.overlap) << ',' << r.steps << ',' << (r.accuracy ? 1 : 0) << ','
      << detail::format_double(r.l1) << ',' << r.eval_count << ',' << r.seed << "\n";
}

inline void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  auto out = open_output(path);
  out << kMetricsHeader << "\n";
  for (const auto& r : rows) write_metric_row(out, r);
}

inline double mean_accuracy(const std::vector<MetricRow>& rows) {
  if (rows.empty()) return 0.0;
  double ok = 0.0;
  for (const auto& r : rows) ok += r.accuracy;
  return ok / static_cast<double>(rows.size());
}

/// Conditioning problems for a run: masked grids (sudoku) or empty canvases (even pixels).
struct Instance {
  Mask observed;
  VariableSet values;
  bench::SudokuGrid conditioning;  ///< sudoku only
};

inline std::vector<Instance> load_instances(const ExperimentConfig& c) {
  std::vector<Instance> out;
  if (c.task == TaskKind::evenpixels) {
    for (int k = 0; k < c.num_instances; ++k) {
      out.push_back({Mask(static_cast<std::size_t>(c.num_variables()), false),
                     VariableSet::Zero(c.num_variables(), 1), {}});
    }
    return out;
  }
  const SudokuFile f = read_sudoku_file(data_path(c, instances_file_name(c.difficulty)));
  if (f.box != c.box) throw ContractError("instance file box does not match config box");
  if (static_cast<int>(f.grids.size()) < c.num_instances) {
    throw ConfigError("instance file holds " + std::to_string(f.grids.size()) + " grids, num_instances = " +
                      std::to_string(c.num_instances));
  }
  for (int k = 0; k < c.num_instances; ++k) {
    const auto& g = f.grids[static_cast<std::size_t>(k)];
    out.push_back({bench::observed_mask(g), bench::encode(g), g});
  }
  return out;
}

inline OrderPolicy make_order_policy(const ExperimentConfig& c) {
  switch (c.order) {
    case OrderKind::graph:
      return OrderPolicy::graph(c.task == TaskKind::sudoku ? bench::build_sudoku_adjacency(c.box)
                                                           : bench::build_grid_adjacency(c.width, c.height));
    case OrderKind::uncertainty: return OrderPolicy::uncertainty();
    case OrderKind::fixed: {
      std::vector<int> raster(static_cast<std::size_t>(c.num_variables()));
      std::iota(raster.begin(), raster.end(), 0);
      return OrderPolicy::fixed(std::move(raster));
    }
    default: return OrderPolicy::random();
  }
}

/// Text and graymap renderings of trace frames plus the per-variable CSV.
inline void write_trace(const ExperimentConfig& c, int instance_id, const InferenceResult& r) {
  const auto dir = c.run_dir() / "traces";
  const std::string stem = "instance_" + std::to_string(instance_id);
  auto csv = open_output(dir / (stem + ".csv"));
  csv << "step,variable,t,sigma_hat\n";
  auto txt = open_output(dir / (stem + "_frames.txt"));
  const bool sudoku = c.task == TaskKind::sudoku;
  const int cols = sudoku ? c.box * c.box : c.width;
  const int rows = sudoku ? c.box * c.box : c.height;
  constexpr int kScale = 8;
  for (const auto& f : r.trace) {
    for (Eigen::Index i = 0; i < f.t.size(); ++i) {
      csv << f.step << ',' << i << ',' << detail::format_double(f.t[i]) << ',' << detail::format_double(f.sigma_hat[i])
          << "\n";
    }
    // Cells still at t=1 carry no signal and render as masked.
    std::vector<int> level(static_cast<std::size_t>(rows * cols), 0);
    txt << "step " << f.step << "\n";
    for (int i = 0; i < rows * cols; ++i) {
      const bool blank = f.t[i] >= 1.0;
      char ch = '.';
      if (sudoku) {
        Eigen::Index arg = 0;
        f.x.row(i).maxCoeff(&arg);
        const int digit = static_cast<int>(arg) + 1;
        if (!blank) {
          ch = digit_char(digit);
          level[static_cast<std::size_t>(i)] = 255 * digit / (c.box * c.box);
        }
      } else if (!blank) {
        ch = f.x(i, 0) > 0.0 ? '+' : '-';
        level[static_cast<std::size_t>(i)] = f.x(i, 0) > 0.0 ? 255 : 64;
      }
      txt << ch << ((i + 1) % cols == 0 ? "\n" : "");
    }
    txt << "\n";
    std::ofstream pgm(dir / (stem + "_step" + std::to_string(f.step) + ".pgm"), std::ios::binary);
    if (!pgm) throw std::runtime_error("cannot write trace image in " + dir.string());
    pgm << "P5\n" << cols * kScale << ' ' << rows * kScale << "\n255\n";
    for (int y = 0; y < rows * kScale; ++y) {
      for (int x = 0; x < cols * kScale; ++x) {
        pgm.put(static_cast<char>(level[static_cast<std::size_t>((y / kScale) * cols + x / kScale)]));
      }
    }
  }
}

/// How many leading instances get trace dumps when frame_every > 0.
inline constexpr int kTracedInstances = 4;

/// Run inference on every instance with per-instance RNG streams, in parallel
/// across `threads` workers. Rows come back in instance order.
template <Denoiser D>
std::vector<MetricRow> evaluate_instances(const ExperimentConfig& c, const D& denoiser,
                                          const std::vector<Instance>& instances) {
  const double overlap = c.effective_overlap();
  const OrderPolicy policy = make_order_policy(c);
  InferenceOptions opt;
  opt.eta = c.eta;
  opt.variance_mode = c.variance_mode;
  opt.uncertainty_probe_t = c.probe_t;
  std::vector<MetricRow> rows(instances.size());

  auto run_one = [&](std::size_t k) {
    const Instance& inst = instances[k];
    const int id = static_cast<int>(k);
    Rng rng = make_rng(c.seed, static_cast<std::uint64_t>(id));
    const int n_active = static_cast<int>(std::count(inst.observed.begin(), inst.observed.end(), false));
    InferenceOptions o = opt;
    o.frame_every = id < kTracedInstances ? c.frame_every : 0;
    const InferenceResult r = n_active == 0
                                  ? InferenceResult{inst.values, {}, {}, 0, 0}
                                  : run_inference(rng, plan_schedule(n_active, c.steps_total, overlap), policy,
                                                  denoiser, inst.observed, inst.values, o);
    MetricRow row;
    row.instance_id = id;
    row.mode = overlap == 1.0 ? "parallel" : "sequential";
    row.order = std::string(to_string(c.order));
    row.overlap = overlap;
    row.steps = c.steps_total;
    row.eval_count = r.eval_count + r.order_eval_count;
    row.seed = c.seed;
    if (c.task == TaskKind::sudoku) {
      const bench::SudokuGrid g = bench::decode(r.x, c.box);
      row.difficulty = std::string(to_string(c.difficulty));
      row.accuracy = bench::check_valid(g) && bench::consistent_with(g, inst.conditioning);
      row.l1 = bench::l1_histogram_metric(g);
    } else {
      const auto score = bench::evenpixels_error(r.x);
      row.difficulty = "none";
      row.accuracy = score.exact;
      row.l1 = score.error;
    }
    if (o.frame_every > 0) write_trace(c, id, r);
    rows[k] = row;
  };

  const auto workers = static_cast<std::size_t>(std::max(1, c.threads));
  if (workers == 1) {
    for (std::size_t k = 0; k < instances.size(); ++k) run_one(k);
    return rows;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = w; k < instances.size(); k += workers) run_one(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

/// Evaluate with the configured denoiser (network checkpoint or exact corpus posterior).
inline std::vector<MetricRow> run_configured(const ExperimentConfig& c) {
  const std::vector<Instance> instances = load_instances(c);
  const NoiseSchedule schedule(c.schedule);
  if (c.denoiser == DenoiserKind::exact) {
    // The exact posterior stands for the full data distribution, so it sees
    // the held-out solutions as well; otherwise held-out puzzles whose only
    // completions are test solutions would have no support at all.
    std::vector<VariableSet> corpus = load_training_corpus(c);
    if (c.task == TaskKind::sudoku) {
      for (const auto& g : read_sudoku_file(data_path(c, "test.txt")).grids) corpus.push_back(bench::encode(g));
    }
    // Short windows can end a generated variable on a blend of digits, which
    // a hard clean-variable filter would reject outright.
    return evaluate_instances(c, ExactDenoiser(Corpus(std::move(corpus)), schedule, 1e-4, true), instances);
  }
  return evaluate_instances(c, NetDenoiser(load_checkpoint_for(c), schedule, c.clip), instances);
}

// oracle ----------------------------------------------------------------------

struct OracleRow {
  int instance_id = 0;
  std::string difficulty;
  std::string order;
  bool accuracy = false;
};

/// Fresh masked instances per difficulty, each solved by both oracle orders.
inline std::vector<OracleRow> run_oracle(const ExperimentConfig& c) {
  Rng rng = make_rng(c.seed, kStreamOracle);
  std::vector<OracleRow> rows;
  for (auto d : {bench::Difficulty::easy, bench::Difficulty::medium, bench::Difficulty::hard}) {
    for (int k = 0; k < c.oracle_instances; ++k) {
      const bench::SudokuGrid masked =
          bench::mask_grid(rng, bench::generate_solution(rng, c.oracle_box), d, c.oracle_mask_sampling);
      for (auto order : {bench::OracleOrder::random, bench::OracleOrder::greedy}) {
        rows.push_back({k, std::string(to_string(d)), std::string(to_string(order)),
                        bench::oracle_solve(rng, masked, order).success});
      }
    }
  }
  return rows;
}

// tsample-stats ---------------------------------------------------------------

/// Joint histogram of (t_i bin, mean bin); counts[t_bin][tbar_bin], draws*n entries in total.
inline std::vector<std::vector<long>> tsample_histogram(const ExperimentConfig& c) {
  Rng rng = make_rng(c.seed, kStreamStats);
  const int bins = c.stats_bins;
  std::vector<std::vector<long>> counts(static_cast<std::size_t>(bins), std::vector<long>(static_cast<std::size_t>(bins), 0));
  auto bin_of = [bins](double v) { return std::clamp(static_cast<int>(v * bins), 0, bins - 1); };
  for (int k = 0; k < c.stats_draws; ++k) {
    const NoiseLevels t = sample_levels(rng, c.tsampler_spec(), static_cast<std::size_t>(c.stats_n));
    const int tb = bin_of(t.mean());
    for (Eigen::Index i = 0; i < t.size(); ++i) ++counts[static_cast<std::size_t>(bin_of(t[i]))][static_cast<std::size_t>(tb)];
  }
  return counts;
}

}  // namespace srm
