// Copyright 2026 The SRM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "srm/bench.hpp"
#include "srm/error.hpp"
#include "srm/policy.hpp"
#include "srm/process.hpp"
#include "srm/schedule.hpp"
#include "srm/tsampler.hpp"

namespace srm {

enum class TaskKind { sudoku, evenpixels };

inline TaskKind parse_task_kind(std::string_view s) {
  if (s == "sudoku") return TaskKind::sudoku;
  if (s == "evenpixels") return TaskKind::evenpixels;
  throw ConfigError("unknown task '" + std::string(s) + "' (expected sudoku|evenpixels)");
}

inline std::string_view to_string(TaskKind k) { return k == TaskKind::sudoku ? "sudoku" : "evenpixels"; }

enum class DenoiserKind { net, exact };

inline DenoiserKind parse_denoiser_kind(std::string_view s) {
  if (s == "net") return DenoiserKind::net;
  if (s == "exact") return DenoiserKind::exact;
  throw ConfigError("unknown denoiser '" + std::string(s) + "' (expected net|exact)");
}

inline std::string_view to_string(DenoiserKind k) { return k == DenoiserKind::net ? "net" : "exact"; }

enum class LrDecay { constant, cosine };

inline LrDecay parse_lr_decay(std::string_view s) {
  if (s == "constant") return LrDecay::constant;
  if (s == "cosine") return LrDecay::cosine;
  throw ConfigError("unknown lr_decay '" + std::string(s) + "' (expected constant|cosine)");
}

inline std::string_view to_string(LrDecay d) { return d == LrDecay::constant ? "constant" : "cosine"; }

/// Everything a CLI run depends on. Defaults are desk-scale 4x4 settings.
struct ExperimentConfig {
  // run
  std::uint64_t seed = 0;
  std::string run_name = "run";
  std::string out_dir = "runs";
  int threads = 1;

  // task and data
  TaskKind task = TaskKind::sudoku;
  int box = 2;
  int width = 4;
  int height = 4;
  int n_train = 200;
  int n_test = 88;
  int num_instances = 500;
  bench::Difficulty difficulty = bench::Difficulty::hard;
  bench::MaskSampling mask_sampling = bench::MaskSampling::distinct;
  std::string data_dir = "data";

  // process
  ScheduleKind schedule = ScheduleKind::linear;
  double eta = 1.0;
  VarianceMode variance_mode = VarianceMode::lower;

  // noise-level sampler
  TSamplerKind tsampler = TSamplerKind::uniform_tbar;
  double sharpness = 1.0;
  double exponent = 1.05;
  int weight_bins = 64;
  int weight_samples = 1'000'000;

  // network and training
  std::vector<int> hidden{256, 256};
  int emb_freqs = 8;
  bool precondition = true;
  double lr = 1e-3;
  LrDecay lr_decay = LrDecay::cosine;
  int batch = 128;
  int train_steps = 20000;
  double lambda_nll = 0.01;
  std::string checkpoint = "model.ck";
  double clip = 1.0;
  int log_every = 1000;

  // inference
  DenoiserKind denoiser = DenoiserKind::net;
  std::string mode = "sequential";
  double overlap = 0.0;
  OrderKind order = OrderKind::uncertainty;
  int steps_total = 320;
  double probe_t = 0.9;
  int frame_every = 0;
  std::vector<double> overlaps{0.0, 0.5, 0.9, 0.95, 1.0};

  // oracle and sampler statistics
  int oracle_box = 3;
  int oracle_instances = 2000;
  bench::MaskSampling oracle_mask_sampling = bench::MaskSampling::with_replacement;
  int stats_draws = 100000;
  int stats_n = 16;
  int stats_bins = 20;

  /// Overlap actually used: parallel mode pins it to 1.
  double effective_overlap() const { return mode == "parallel" ? 1.0 : overlap; }
  TSamplerSpec tsampler_spec() const { return {tsampler, sharpness, exponent}; }
  std::filesystem::path run_dir() const { return std::filesystem::path(out_dir) / run_name; }
  int num_variables() const { return task == TaskKind::sudoku ? box * box * box * box : width * height; }
  int variable_dim() const { return task == TaskKind::sudoku ? box * box : 1; }
};

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
  return out;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  std::istringstream is(value);
  std::string item;
  while (std::getline(is, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(parse_number<T>(key, item.substr(b, e - b + 1)));
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

template <class T>
std::string format_list(const std::vector<T>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

struct ConfigField {
  std::string key;
  std::string help;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

/// Every config key, in manifest order.
inline const std::vector<ConfigField>& config_fields() {
  using C = ExperimentConfig;
  using detail::format_double;
  using detail::parse_number;
  auto int_field = [](std::string key, std::string help, int C::*m, int lo) {
    return ConfigField{key, std::move(help), [m](const C& c) { return std::to_string(c.*m); },
                       [m, key, lo](C& c, const std::string& v) {
                         const int x = parse_number<int>(key, v);
                         if (x < lo) throw ConfigError("config key '" + key + "' must be >= " + std::to_string(lo));
                         c.*m = x;
                       }};
  };
  auto real_field = [](std::string key, std::string help, double C::*m, double lo, double hi) {
    return ConfigField{key, std::move(help), [m](const C& c) { return format_double(c.*m); },
                       [m, key, lo, hi](C& c, const std::string& v) {
                         const double x = parse_number<double>(key, v);
                         if (!(x >= lo && x <= hi)) {
                           throw ConfigError("config key '" + key + "' must lie in [" + format_double(lo) + ", " +
                                             format_double(hi) + "]");
                         }
                         c.*m = x;
                       }};
  };
  auto string_field = [](std::string key, std::string help, std::string C::*m) {
    return ConfigField{key, std::move(help), [m](const C& c) { return c.*m; },
                       [m](C& c, const std::string& v) { c.*m = v; }};
  };
  auto enum_field = [](std::string key, std::string help, auto m, auto parse) {
    return ConfigField{key, std::move(help), [m](const C& c) { return std::string(to_string(c.*m)); },
                       [m, parse](C& c, const std::string& v) { c.*m = parse(v); }};
  };
  constexpr double inf = std::numeric_limits<double>::infinity();

  static const std::vector<ConfigField> fields = {
      {"seed", "master seed; every stream derives from it",
       [](const C& c) { return std::to_string(c.seed); },
       [](C& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); }},
      string_field("run_name", "subdirectory of out_dir for this run's artifacts", &C::run_name),
      string_field("out_dir", "root directory for run artifacts", &C::out_dir),
      int_field("threads", "worker threads for per-instance inference", &C::threads, 1),
      enum_field("task", "sudoku|evenpixels", &C::task, parse_task_kind),
      {"box", "sudoku box size (2 gives 4x4, 3 gives 9x9)", [](const C& c) { return std::to_string(c.box); },
       [](C& c, const std::string& v) {
         const int b = parse_number<int>("box", v);
         if (b != 2 && b != 3) throw ConfigError("config key 'box' must be 2 or 3");
         c.box = b;
       }},
      int_field("width", "even pixels image width", &C::width, 1),
      int_field("height", "even pixels image height", &C::height, 1),
      int_field("n_train", "training samples written by gen-data", &C::n_train, 1),
      int_field("n_test", "held-out solutions written by gen-data", &C::n_test, 0),
      int_field("num_instances", "evaluation instances (per difficulty for gen-data)", &C::num_instances, 1),
      enum_field("difficulty", "easy|medium|hard", &C::difficulty, bench::parse_difficulty),
      enum_field("mask_sampling", "distinct|with_replacement", &C::mask_sampling, bench::parse_mask_sampling),
      string_field("data_dir", "directory holding the dataset files", &C::data_dir),
      enum_field("schedule", "linear|cosine", &C::schedule, parse_schedule_kind),
      real_field("eta", "reverse-step stochasticity, 0 deterministic .. 1 Markov", &C::eta, 0.0, 1.0),
      enum_field("variance_mode", "lower|upper", &C::variance_mode, parse_variance_mode),
      enum_field("tsampler", "uniform_t|uniform_tbar", &C::tsampler, parse_tsampler_kind),
      real_field("sharpness", "uniform_tbar split concentration multiplier", &C::sharpness, 1e-9, inf),
      real_field("exponent", "uniform_tbar split concentration exponent", &C::exponent, 0.0, inf),
      int_field("weight_bins", "loss-weight histogram bins", &C::weight_bins, 2),
      int_field("weight_samples", "draws used to estimate loss weights", &C::weight_samples, 20),
      {"hidden", "comma-separated hidden layer widths", [](const C& c) { return detail::format_list(c.hidden); },
       [](C& c, const std::string& v) {
         auto h = detail::parse_list<int>("hidden", v);
         for (int w : h)
           if (w < 1) throw ConfigError("config key 'hidden': widths must be positive");
         c.hidden = std::move(h);
       }},
      int_field("emb_freqs", "sinusoidal noise-level embedding frequencies", &C::emb_freqs, 1),
      {"precondition", "1: noise head predicts a correction to the linear estimate for the schedule; 0: raw",
       [](const C& c) { return std::string(c.precondition ? "1" : "0"); },
       [](C& c, const std::string& v) {
         if (v != "0" && v != "1") throw ConfigError("config key 'precondition' must be 0 or 1");
         c.precondition = v == "1";
       }},
      real_field("lr", "optimizer step size", &C::lr, 0.0, inf),
      enum_field("lr_decay", "constant|cosine (cosine anneals lr to 0 over train_steps)", &C::lr_decay, parse_lr_decay),
      int_field("batch", "training batch size", &C::batch, 1),
      int_field("train_steps", "optimizer steps", &C::train_steps, 0),
      real_field("lambda_nll", "weight of the uncertainty NLL term", &C::lambda_nll, 0.0, inf),
      string_field("checkpoint", "network checkpoint path (relative paths live in data_dir)", &C::checkpoint),
      real_field("clip", "clean-estimate clip magnitude", &C::clip, 0.0, inf),
      int_field("log_every", "training log interval in steps (0 disables)", &C::log_every, 0),
      enum_field("denoiser", "net|exact", &C::denoiser, parse_denoiser_kind),
      {"mode", "parallel|sequential", [](const C& c) { return c.mode; },
       [](C& c, const std::string& v) {
         if (v != "parallel" && v != "sequential") {
           throw ConfigError("unknown mode '" + v + "' (expected parallel|sequential)");
         }
         c.mode = v;
       }},
      real_field("overlap", "window overlap for sequential mode, 0 .. 1", &C::overlap, 0.0, 1.0),
      enum_field("order", "random|graph|uncertainty|fixed", &C::order, parse_order_kind),
      int_field("steps_total", "denoiser evaluations per instance", &C::steps_total, 1),
      real_field("probe_t", "level at which unstarted variables are probed for uncertainty", &C::probe_t, 0.0, 1.0),
      int_field("frame_every", "trace frame interval in steps (0 disables traces)", &C::frame_every, 0),
      {"overlaps", "comma-separated overlap grid for sweep",
       [](const C& c) { return detail::format_list(c.overlaps); },
       [](C& c, const std::string& v) {
         auto o = detail::parse_list<double>("overlaps", v);
         for (double x : o)
           if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("config key 'overlaps': values must lie in [0,1]");
         c.overlaps = std::move(o);
       }},
      {"oracle_box", "sudoku box size for the oracle baseline", [](const C& c) { return std::to_string(c.oracle_box); },
       [](C& c, const std::string& v) {
         const int b = parse_number<int>("oracle_box", v);
         if (b != 2 && b != 3) throw ConfigError("config key 'oracle_box' must be 2 or 3");
         c.oracle_box = b;
       }},
      int_field("oracle_instances", "fresh instances per difficulty for the oracle baseline", &C::oracle_instances, 1),
      enum_field("oracle_mask_sampling", "distinct|with_replacement mask positions for the oracle baseline",
                 &C::oracle_mask_sampling, bench::parse_mask_sampling),
      int_field("stats_draws", "vectors drawn by tsample-stats", &C::stats_draws, 1),
      int_field("stats_n", "vector length for tsample-stats", &C::stats_n, 1),
      int_field("stats_bins", "histogram bins per axis for tsample-stats", &C::stats_bins, 1),
  };
  return fields;
}

inline const ConfigField& config_field(const std::string& key) {
  for (const auto& f : config_fields())
    if (f.key == key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  config_field(key).set(c, value);
}

inline std::map<std::string, std::string> config_to_map(const ExperimentConfig& c) {
  std::map<std::string, std::string> out;
  for (const auto& f : config_fields()) out[f.key] = f.get(c);
  return out;
}

/// Read `key = value` lines. Blank lines and `#` comments are ignored.
inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

inline void apply_config_file(ExperimentConfig& c, const std::string& path) {
  for (const auto& [k, v] : read_config_file(path)) set_config_value(c, k, v);
}

inline void write_config_file(const ExperimentConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& f : config_fields()) out << f.key << " = " << f.get(c) << "\n";
}

/// Run record: command, fully resolved config and produced files.
inline nlohmann::json make_manifest(const std::string& command, const ExperimentConfig& c,
                                    const std::vector<std::string>& outputs) {
  nlohmann::json m;
  m["command"] = command;
  m["config"] = nlohmann::json::object();
  for (const auto& f : config_fields()) m["config"][f.key] = f.get(c);
  m["outputs"] = outputs;
  return m;
}

inline std::string write_manifest(const std::string& command, const ExperimentConfig& c,
                                  const std::vector<std::string>& outputs) {
  std::filesystem::create_directories(c.run_dir());
  const auto path = (c.run_dir() / "manifest.json").string();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << make_manifest(command, c, outputs).dump(2) << "\n";
  return path;
}

}  // namespace srm
