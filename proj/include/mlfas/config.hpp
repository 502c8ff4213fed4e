#pragma once

// Experiment configuration as flat "key = value" text. Blank lines and text
// after '#' are ignored; unknown keys are errors.
//
//   dataset            path to an MLFASDAT file
//   hidden             hidden layers, e.g. "dense:128,dense:128" or "conv:8/3/1/1,dense:64"
//   activation         relu | leaky_relu | identity
//   leaky_slope        slope for leaky_relu (0.01)
//   activate_output    apply the activation to the output layer (false)
//   depth              hierarchy levels; 1 is plain SGD (2)
//   learning_rate      (0.01)    momentum      (0.9)
//   weight_decay       (1e-6)    smoothing_steps (4)
//   coarse_smoothing_steps  steps at levels >= 1 (defaults to smoothing_steps)
//   eta (1.41421356)  eta_depth (3)  alpha_p (1)  alpha_m (0.2)  gamma (0.125)
//   batch_size (200)  tau_batches (2)  rematch_period (50)
//   theta (0.1)  weighted_transfer (true)  randomize_matching_order (false)
//   max_work_units (5000)  eval_every (0 = max_work_units / 200)
//   seeds              comma-separated list (0)
//   smoothing_window   odd window for the smoothed metric series (33)
//   checkpoint_every   cycles between per-level checkpoints, 0 disables (0)
//   eval_all_auxiliary evaluate every auxiliary level, not just the first (false)

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mlfas/network.hpp"
#include "mlfas/trainer.hpp"

namespace mlfas {

struct ExperimentConfig {
  std::filesystem::path dataset;
  std::vector<LayerSpec> hidden = {LayerSpec::dense(128), LayerSpec::dense(128)};
  Activation activation;
  bool activate_output = false;

  std::size_t depth = 2;
  SmootherConfig smoother{0.01, 0.9, 1e-6, 4};
  std::size_t coarse_smoothing_steps = 4;
  StabilityConfig stability{1.41421356237309515, 3, 1.0, 0.2, 0.125};
  std::size_t batch_size = 200;
  std::size_t tau_batches = 2;
  std::size_t rematch_period = 50;
  CoarseningOptions coarsening;

  double max_work_units = 5000.0;
  double eval_every = 0.0;
  std::vector<std::uint64_t> seeds = {0};
  std::size_t smoothing_window = 33;
  std::size_t checkpoint_every = 0;
  bool eval_all_auxiliary = false;

  /// eval_every, or max_work_units / 200 when unset.
  double eval_interval() const;
  CycleConfig cycle_config() const;
};

/// Throws ConfigError naming the offending key.
void validate(const ExperimentConfig& cfg);

/// Parses the text, starting from defaults. Relative dataset paths resolve
/// against `base_dir`.
ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies one "key=value" assignment.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value,
                      const std::filesystem::path& base_dir = {});

/// Canonical text form; parse_config(format_config(c)) reproduces c.
std::string format_config(const ExperimentConfig& cfg);

}  // namespace mlfas
