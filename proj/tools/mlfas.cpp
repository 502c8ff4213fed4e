// mlfas: generate Poisson datasets, train SGD / FAS networks, evaluate
// checkpoints and inspect coarsening hierarchies.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "mlfas/checkpoint.hpp"
#include "mlfas/config.hpp"
#include "mlfas/dataset.hpp"
#include "mlfas/error.hpp"
#include "mlfas/experiment.hpp"
#include "mlfas/inspect.hpp"
#include "mlfas/poisson.hpp"

namespace {

void run_generate(const mlfas::GenerateOptions& opts, const std::filesystem::path& out) {
  const mlfas::RegressionDataset data = mlfas::generate_dataset(opts);
  mlfas::write_dataset(out, data);
  std::cout << "wrote " << data.count() << " samples (" << data.train_count << " train, "
            << data.count() - data.train_count << " validation), " << data.channels << "x" << data.grid << "x"
            << data.grid << " inputs, to " << out.string() << "\n";
}

void run_train(const std::filesystem::path& config_path, const std::vector<std::string>& overrides,
               const std::filesystem::path& out) {
  mlfas::ExperimentConfig cfg = mlfas::load_config(config_path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw mlfas::ConfigError("--set expects key=value, got '" + kv + "'");
    mlfas::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  mlfas::validate(cfg);
  if (cfg.dataset.empty()) throw mlfas::ConfigError("dataset: no dataset path configured");
  const mlfas::RegressionDataset data = mlfas::read_dataset(cfg.dataset);

  mlfas::RunOptions opts;
  opts.checkpoint_dir = out / "checkpoints";
  const mlfas::ExperimentResult result = mlfas::run_experiment(cfg, data, opts);
  mlfas::write_experiment_outputs(cfg, result, out);

  for (const auto& run : result.runs) {
    std::cout << "seed " << run.seed << ": " << run.cycles << " cycles, " << run.work_units << " work units";
    if (run.failed) std::cout << ", FAILED (" << run.failure << ")";
    std::cout << "\n";
  }
  mlfas::write_summary_table(std::cout, mlfas::summarize(result.runs));
}

void run_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset) {
  const mlfas::Network net = mlfas::load_checkpoint(checkpoint);
  const mlfas::RegressionDataset data = mlfas::read_dataset(dataset);
  if (net.input_size() != data.input_size() || net.output_size() != data.output_size()) {
    throw mlfas::ShapeError("network maps " + std::to_string(net.input_size()) + " -> " +
                            std::to_string(net.output_size()) + " but the dataset has " +
                            std::to_string(data.input_size()) + " -> " + std::to_string(data.output_size()));
  }
  std::cout << "split,samples,l2,linf\n";
  auto report = [&](const char* name, const mlfas::SampleSet& set) {
    if (set.size() == 0) return;
    const mlfas::LossValue v = mlfas::loss(net, set.all());
    std::printf("%s,%zu,%.10g,%.10g\n", name, set.size(), v.l2, v.linf);
  };
  report("train", data.train());
  report("validation", data.validation());
}

void run_inspect(const std::vector<std::filesystem::path>& checkpoints, const mlfas::InspectOptions& opts,
                 bool matchings) {
  std::vector<mlfas::Network> levels;
  for (const auto& p : checkpoints) levels.push_back(mlfas::load_checkpoint(p));
  std::cout << mlfas::format_report(mlfas::inspect_hierarchy(levels, opts), matchings);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilevel-in-width network training (FAS V-cycles vs SGD)"};
  app.require_subcommand(1);

  mlfas::GenerateOptions gen;
  std::filesystem::path gen_out;
  auto* generate = app.add_subcommand("generate", "Generate a Poisson regression dataset");
  generate->add_option("--count", gen.count, "Number of samples")->capture_default_str();
  generate->add_option("--grid", gen.grid, "Grid size n (n x n cells)")->capture_default_str();
  generate->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  generate->add_option("--val-fraction", gen.val_fraction, "Fraction of samples held out for validation")
      ->capture_default_str();
  generate->add_flag("--with-forcing", gen.include_forcing, "Add the forcing as an input channel");
  generate->add_option("--out", gen_out, "Output MLFASDAT file")->required();

  std::filesystem::path config_path, train_out;
  std::vector<std::string> overrides;
  auto* train = app.add_subcommand("train", "Run an experiment from a config file");
  train->add_option("--config", config_path, "key=value config file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_option("--set", overrides, "Override a config key (key=value), repeatable");

  std::filesystem::path eval_ckpt, eval_data;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("--checkpoint", eval_ckpt, "MLFASNET checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--dataset", eval_data, "MLFASDAT dataset")->required()->check(CLI::ExistingFile);

  std::vector<std::filesystem::path> inspect_ckpts;
  mlfas::InspectOptions inspect_opts;
  bool plain = false;
  bool matchings = false;
  auto* inspect = app.add_subcommand("inspect-hierarchy", "Report level widths, aggregates and coarsening ratios");
  inspect->add_option("--checkpoint", inspect_ckpts, "Checkpoint per level, finest first")
      ->required()
      ->check(CLI::ExistingFile);
  inspect->add_option("--coarsen", inspect_opts.coarsen, "Levels to build by matching below the last checkpoint")
      ->capture_default_str();
  inspect->add_option("--theta", inspect_opts.coarsening.theta, "Matching threshold")->capture_default_str();
  inspect->add_flag("--plain", plain, "Plain averaging instead of row-norm weighted transfers");
  inspect->add_flag("--matchings", matchings, "Print the aggregate of every unit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*generate) run_generate(gen, gen_out);
    if (*train) run_train(config_path, overrides, train_out);
    if (*eval) run_eval(eval_ckpt, eval_data);
    if (*inspect) {
      inspect_opts.coarsening.weighted = !plain;
      run_inspect(inspect_ckpts, inspect_opts, matchings);
    }
  } catch (const mlfas::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
