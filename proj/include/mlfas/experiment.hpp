#pragma once

// Seeded experiment runs: plain SGD (depth 1) or multilevel FAS, evaluated on
// a work-unit cadence, with per-run metric streams and summary tables.
//
// One work unit is one fine-level minibatch gradient. A gradient on a coarser
// level costs its parameter count divided by the fine parameter count; a tau
// correction over m batches costs m times the sum of both levels' ratios.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mlfas/config.hpp"
#include "mlfas/dataset.hpp"

namespace mlfas {

struct MetricRecord {
  double work_units = 0.0;
  std::size_t cycle = 0;
  std::size_t level = 0;  // 0 fine, k the k-th auxiliary network
  double train_l2 = 0.0;
  double train_linf = 0.0;
  double val_l2 = 0.0;
  double val_linf = 0.0;
  double wall_s = 0.0;

  bool operator==(const MetricRecord&) const = default;
};

struct BestLosses {
  double train_l2 = 0.0;
  double train_linf = 0.0;
  double val_l2 = 0.0;
  double val_linf = 0.0;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::size_t depth = 1;
  std::vector<MetricRecord> records;
  std::map<std::size_t, BestLosses> best;  // keyed by level tag
  bool failed = false;
  std::string failure;
  double work_units = 0.0;
  std::size_t cycles = 0;
};

struct ExperimentResult {
  std::vector<RunResult> runs;  // one per seed
};

struct RunOptions {
  /// Per-level checkpoints are written under this directory when set and
  /// checkpoint_every is nonzero.
  std::optional<std::filesystem::path> checkpoint_dir;
};

/// Runs every seed of `cfg` on `data`. A divergence marks that run failed;
/// other seeds continue.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RegressionDataset& data, const RunOptions& opts = {});
RunResult run_seed(const ExperimentConfig& cfg, const RegressionDataset& data, std::uint64_t seed,
                   const RunOptions& opts = {});

/// Network architecture implied by the config and the dataset shape.
NetworkSpec network_spec(const ExperimentConfig& cfg, const RegressionDataset& data);

/// Minimum of each metric over the records, per level tag.
std::map<std::size_t, BestLosses> best_losses(const std::vector<MetricRecord>& records);

/// Centered moving mean; windows are truncated at the ends. Throws ConfigError
/// if `window` is even or exceeds the length.
std::vector<double> smooth_series(const std::vector<double>& values, std::size_t window);

/// Applies smooth_series to each loss column, separately per level tag. The
/// window is clamped to the largest odd value not exceeding each series length.
std::vector<MetricRecord> smooth_records(const std::vector<MetricRecord>& records, std::size_t window);

inline constexpr const char* metrics_csv_header = "work_units,cycle,level,train_l2,train_linf,val_l2,val_linf,wall_s";

void write_metrics_csv(std::ostream& out, const std::vector<MetricRecord>& records);
/// Throws ConfigError on empty records (no file is created).
void emit_csv(const std::vector<MetricRecord>& records, const std::filesystem::path& path);
std::vector<MetricRecord> read_metrics_csv(std::istream& in);

struct SummaryRow {
  std::string label;  // "2" for the fine network of 2-level runs, "2aux" for its first auxiliary
  std::size_t depth = 1;
  std::size_t level = 0;
  std::size_t runs = 0;    // successful runs contributing
  std::size_t failed = 0;  // runs stopped by the divergence guard
  BestLosses median_best;
};

/// Medians over seeds of the per-run best losses, one row per (depth, level tag).
std::vector<SummaryRow> summarize(const std::vector<RunResult>& runs);
std::string summary_label(std::size_t depth, std::size_t level);

void write_summary_table(std::ostream& out, const std::vector<SummaryRow>& rows);
void emit_summary_table(const std::vector<RunResult>& runs, const std::filesystem::path& path);

/// Writes metadata.txt, summary.csv and per-seed metrics (raw and smoothed)
/// under `out_dir`.
void write_experiment_outputs(const ExperimentConfig& cfg, const ExperimentResult& result,
                              const std::filesystem::path& out_dir);

}  // namespace mlfas
