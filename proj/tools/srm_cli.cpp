// Copyright 2026 The SRM Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment harness: dataset generation, training, sampling runs and sweeps,
// oracle baselines and noise-level sampler statistics. Every subcommand takes
// the same `--<key> value` flags as the config file and writes a manifest.

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>
#include <map>
#include <optional>

#include "srm/config.hpp"
#include "srm/experiment.hpp"

namespace {

using srm::ExperimentConfig;

struct Flags {
  std::string config_file;
  std::map<std::string, std::string> values;
};

void add_config_flags(CLI::App* sub, Flags& flags) {
  sub->add_option("--config", flags.config_file, "key = value file supplying defaults");
  for (const auto& f : srm::config_fields()) {
    sub->add_option("--" + f.key, flags.values[f.key], f.help);
  }
}

ExperimentConfig resolve(const CLI::App* sub, const Flags& flags) {
  ExperimentConfig c;
  if (!flags.config_file.empty()) srm::apply_config_file(c, flags.config_file);
  for (const auto& f : srm::config_fields()) {
    if (sub->count("--" + f.key) > 0) f.set(c, flags.values.at(f.key));
  }
  return c;
}

void print_accuracy(const std::string& label, const std::vector<srm::MetricRow>& rows) {
  double l1 = 0.0;
  for (const auto& r : rows) l1 += r.l1;
  std::cout << label << " accuracy=" << std::fixed << std::setprecision(4) << srm::mean_accuracy(rows)
            << " mean_l1=" << (rows.empty() ? 0.0 : l1 / static_cast<double>(rows.size())) << " instances=" << rows.size()
            << "\n";
  std::cout.unsetf(std::ios::floatfield);
}

std::string run_label(const ExperimentConfig& c) {
  std::ostringstream os;
  os << (c.effective_overlap() == 1.0 ? "parallel" : "sequential") << " order=" << srm::to_string(c.order)
     << " overlap=" << c.effective_overlap();
  return os.str();
}

int cmd_gen_data(const ExperimentConfig& c) {
  const auto files = srm::generate_dataset(c);
  for (const auto& f : files) std::cout << "wrote " << f << "\n";
  std::cout << "manifest " << srm::write_manifest("gen-data", c, files) << "\n";
  return 0;
}

int cmd_train(const ExperimentConfig& c) {
  const auto corpus = srm::load_training_corpus(c);
  const auto log_path = c.run_dir() / "train_log.csv";
  auto log = srm::open_output(log_path);
  log << "step,total,eps_mse,nll\n";
  const srm::NetParams params = srm::train_network(c, corpus, [&](int step, const srm::LossBreakdown& l) {
    log << step << ',' << l.total << ',' << l.eps_mse << ',' << l.nll << "\n" << std::flush;
    std::cout << "step " << step << " loss " << l.total << " eps_mse " << l.eps_mse << " nll " << l.nll << "\n"
              << std::flush;
  });
  const auto ck = srm::checkpoint_path(c);
  if (ck.has_parent_path()) std::filesystem::create_directories(ck.parent_path());
  srm::save_checkpoint(params, ck.string());
  std::cout << "wrote " << ck.string() << "\n";
  std::cout << "manifest " << srm::write_manifest("train", c, {ck.string(), log_path.string()}) << "\n";
  return 0;
}

int cmd_run(const ExperimentConfig& c) {
  const auto rows = srm::run_configured(c);
  const auto path = c.run_dir() / "metrics.csv";
  srm::write_metrics_csv(path, rows);
  print_accuracy(run_label(c), rows);
  std::cout << "manifest " << srm::write_manifest("run", c, {path.string()}) << "\n";
  return 0;
}

int cmd_sweep(const ExperimentConfig& base) {
  std::vector<srm::MetricRow> all;
  for (double o : base.overlaps) {
    ExperimentConfig c = base;
    c.overlap = o;
    c.mode = o == 1.0 ? "parallel" : "sequential";
    const auto rows = srm::run_configured(c);
    print_accuracy(run_label(c), rows);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  const auto path = base.run_dir() / "metrics.csv";
  srm::write_metrics_csv(path, all);
  std::cout << "manifest " << srm::write_manifest("sweep", base, {path.string()}) << "\n";
  return 0;
}

int cmd_oracle(const ExperimentConfig& c) {
  const auto rows = srm::run_oracle(c);
  const auto path = c.run_dir() / "oracle.csv";
  auto out = srm::open_output(path);
  out << "instance_id,difficulty,order,accuracy\n";
  std::map<std::pair<std::string, std::string>, std::pair<int, int>> summary;
  for (const auto& r : rows) {
    out << r.instance_id << ',' << r.difficulty << ',' << r.order << ',' << (r.accuracy ? 1 : 0) << "\n";
    auto& [ok, n] = summary[{r.order, r.difficulty}];
    ok += r.accuracy;
    ++n;
  }
  for (const char* order : {"random", "greedy"}) {
    std::cout << order;
    for (const char* d : {"easy", "medium", "hard"}) {
      const auto [ok, n] = summary[{order, d}];
      std::cout << ' ' << d << '=' << std::fixed << std::setprecision(3) << static_cast<double>(ok) / n;
    }
    std::cout << "\n";
  }
  std::cout.unsetf(std::ios::floatfield);
  std::cout << "manifest " << srm::write_manifest("oracle", c, {path.string()}) << "\n";
  return 0;
}

int cmd_tsample_stats(const ExperimentConfig& c) {
  const auto counts = srm::tsample_histogram(c);
  const auto path = c.run_dir() / "tsample_stats.csv";
  auto out = srm::open_output(path);
  out << "t_bin,tbar_bin,count\n";
  for (std::size_t i = 0; i < counts.size(); ++i)
    for (std::size_t j = 0; j < counts[i].size(); ++j) out << i << ',' << j << ',' << counts[i][j] << "\n";
  std::cout << "wrote " << path.string() << "\n";
  std::cout << "manifest " << srm::write_manifest("tsample-stats", c, {path.string()}) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial reasoning models: data, training, sampling and evaluation"};
  app.require_subcommand(1);

  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const ExperimentConfig&);
  };
  const Command commands[] = {
      {"gen-data", "write training corpus, held-out split and masked test instances", cmd_gen_data},
      {"train", "train the network denoiser and write a checkpoint", cmd_train},
      {"run", "sample every test instance and write metrics.csv", cmd_run},
      {"oracle", "evaluate the random and greedy oracle baselines on fresh instances", cmd_oracle},
      {"tsample-stats", "dump the joint (t_i, mean t) histogram of the noise-level sampler", cmd_tsample_stats},
      {"sweep", "run once per overlap in 'overlaps' and write grouped metrics", cmd_sweep},
  };
  std::vector<Flags> flags(std::size(commands));
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    subs.push_back(app.add_subcommand(commands[i].name, commands[i].help));
    add_config_flags(subs.back(), flags[i]);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (subs[i]->parsed()) return commands[i].fn(resolve(subs[i], flags[i]));
    }
  } catch (const srm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const srm::ContractError& e) {
    std::cerr << "contract error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
