#include "mlfas/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <limits>
#include <sstream>

#include "mlfas/checkpoint.hpp"
#include "mlfas/error.hpp"

namespace mlfas {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_level_checkpoints(const Hierarchy& h, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t l = 0; l < h.depth(); ++l) {
    if (h.levels[l].net.layers.empty()) continue;
    save_checkpoint(dir / ("level_" + std::to_string(l) + ".mlfasnet"), h.levels[l].net);
  }
}

}  // namespace

NetworkSpec network_spec(const ExperimentConfig& cfg, const RegressionDataset& data) {
  NetworkSpec spec;
  spec.input = {static_cast<int>(data.channels), static_cast<int>(data.grid), static_cast<int>(data.grid)};
  spec.hidden = cfg.hidden;
  spec.output_size = data.output_size();
  spec.activation = cfg.activation;
  spec.activate_output = cfg.activate_output;
  return spec;
}

RunResult run_seed(const ExperimentConfig& cfg, const RegressionDataset& data, std::uint64_t seed,
                   const RunOptions& opts) {
  validate(cfg);
  validate(data);
  RunResult run;
  run.seed = seed;
  run.depth = cfg.depth;

  const SampleSet train = data.train();
  const Minibatch train_all = train.all();
  const Minibatch val_all = data.validation().all();
  if (val_all.size() == 0) throw ConfigError("dataset has no validation samples");

  const auto start = std::chrono::steady_clock::now();
  Hierarchy h = make_hierarchy(make_network(network_spec(cfg, data), seed), cfg.depth, cfg.rematch_period,
                               cfg.tau_batches, cfg.coarsening, seed ^ 0x9e3779b97f4a7c15ULL);
  MinibatchScheduler scheduler(train, cfg.batch_size, seed + 1);
  WorkCounter work;
  const CycleConfig cycle_cfg = cfg.cycle_config();
  const double interval = cfg.eval_interval();

  auto evaluate = [&]() {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    auto record = [&](const Network& net, std::size_t level) {
      const LossValue tr = loss(net, train_all);
      const LossValue va = loss(net, val_all);
      run.records.push_back({work.value(), h.cycle, level, tr.l2, tr.linf, va.l2, va.linf, wall});
    };
    record(h.levels[0].net, 0);
    const std::size_t aux_levels = cfg.eval_all_auxiliary ? h.depth() - 1 : std::min<std::size_t>(1, h.depth() - 1);
    for (std::size_t l = 1; l <= aux_levels; ++l) {
      if (auto aux = auxiliary_network(h, l)) record(*aux, l);
    }
  };

  double next_eval = 0.0;
  try {
    while (work.value() < cfg.max_work_units) {
      if (work.value() >= next_eval) {
        evaluate();
        while (next_eval <= work.value()) next_eval += interval;
      }
      v_cycle(h, cycle_cfg, scheduler, work);
      if (cfg.checkpoint_every > 0 && opts.checkpoint_dir && h.cycle % cfg.checkpoint_every == 0) {
        write_level_checkpoints(h, *opts.checkpoint_dir / ("seed_" + std::to_string(seed)) /
                                       ("cycle_" + std::to_string(h.cycle)));
      }
    }
    evaluate();
  } catch (const DivergenceError& e) {
    run.failed = true;
    run.failure = e.what();
  }
  run.work_units = work.value();
  run.cycles = h.cycle;
  run.best = best_losses(run.records);
  return run;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RegressionDataset& data, const RunOptions& opts) {
  validate(cfg);
  ExperimentResult result;
  for (std::uint64_t seed : cfg.seeds) result.runs.push_back(run_seed(cfg, data, seed, opts));
  return result;
}

std::map<std::size_t, BestLosses> best_losses(const std::vector<MetricRecord>& records) {
  std::map<std::size_t, BestLosses> best;
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    auto [it, inserted] = best.try_emplace(r.level, BestLosses{inf, inf, inf, inf});
    BestLosses& b = it->second;
    b.train_l2 = std::min(b.train_l2, r.train_l2);
    b.train_linf = std::min(b.train_linf, r.train_linf);
    b.val_l2 = std::min(b.val_l2, r.val_l2);
    b.val_linf = std::min(b.val_linf, r.val_linf);
  }
  return best;
}

std::vector<double> smooth_series(const std::vector<double>& values, std::size_t window) {
  if (window % 2 == 0) throw ConfigError("smoothing window must be odd");
  if (window > values.size()) throw ConfigError("smoothing window exceeds the series length");
  const std::size_t half = window / 2;
  const std::size_t n = values.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += values[j];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

std::vector<MetricRecord> smooth_records(const std::vector<MetricRecord>& records, std::size_t window) {
  std::map<std::size_t, std::vector<std::size_t>> by_level;
  for (std::size_t i = 0; i < records.size(); ++i) by_level[records[i].level].push_back(i);
  std::vector<MetricRecord> out = records;
  for (const auto& [level, idx] : by_level) {
    std::size_t w = std::min(window, idx.size());
    if (w % 2 == 0) --w;
    auto column = [&](double MetricRecord::*field) {
      std::vector<double> v;
      for (std::size_t i : idx) v.push_back(records[i].*field);
      const auto s = smooth_series(v, w);
      for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]].*field = s[k];
    };
    column(&MetricRecord::train_l2);
    column(&MetricRecord::train_linf);
    column(&MetricRecord::val_l2);
    column(&MetricRecord::val_linf);
  }
  return out;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricRecord>& records) {
  out << metrics_csv_header << "\n";
  for (const auto& r : records) {
    out << fmt(r.work_units) << "," << r.cycle << "," << r.level << "," << fmt(r.train_l2) << "," << fmt(r.train_linf)
        << "," << fmt(r.val_l2) << "," << fmt(r.val_linf) << "," << fmt(r.wall_s) << "\n";
  }
}

void emit_csv(const std::vector<MetricRecord>& records, const std::filesystem::path& path) {
  if (records.empty()) throw ConfigError("no metric records to write");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_metrics_csv(out, records);
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<MetricRecord> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != metrics_csv_header) throw FormatError("metrics CSV header mismatch");
  std::vector<MetricRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[8];
    for (auto& cell : f) {
      if (!std::getline(ss, cell, ',')) throw FormatError("metrics CSV row has too few fields: " + line);
    }
    try {
      records.push_back({std::stod(f[0]), std::stoul(f[1]), std::stoul(f[2]), std::stod(f[3]), std::stod(f[4]),
                         std::stod(f[5]), std::stod(f[6]), std::stod(f[7])});
    } catch (const std::exception&) {
      throw FormatError("unparseable metrics CSV row: " + line);
    }
  }
  return records;
}

std::string summary_label(std::size_t depth, std::size_t level) {
  std::string label = std::to_string(depth);
  if (level == 1) label += "aux";
  if (level > 1) label += "aux" + std::to_string(level);
  return label;
}

std::vector<SummaryRow> summarize(const std::vector<RunResult>& runs) {
  std::map<std::pair<std::size_t, std::size_t>, std::vector<const BestLosses*>> groups;
  std::map<std::size_t, std::size_t> failures;
  for (const auto& run : runs) {
    if (run.failed) {
      ++failures[run.depth];
      continue;
    }
    for (const auto& [level, best] : run.best) groups[{run.depth, level}].push_back(&best);
  }
  std::vector<SummaryRow> rows;
  for (const auto& [key, bests] : groups) {
    SummaryRow row;
    row.depth = key.first;
    row.level = key.second;
    row.label = summary_label(row.depth, row.level);
    row.runs = bests.size();
    row.failed = failures[row.depth];
    auto med = [&](double BestLosses::*field) {
      std::vector<double> v;
      for (const auto* b : bests) v.push_back(b->*field);
      return median(v);
    };
    row.median_best = {med(&BestLosses::train_l2), med(&BestLosses::train_linf), med(&BestLosses::val_l2),
                       med(&BestLosses::val_linf)};
    rows.push_back(row);
  }
  for (const auto& [depth, count] : failures) {
    if (!groups.contains({depth, 0})) {
      SummaryRow row;
      row.depth = depth;
      row.label = summary_label(depth, 0);
      row.failed = count;
      constexpr double nan = std::numeric_limits<double>::quiet_NaN();
      row.median_best = {nan, nan, nan, nan};
      rows.push_back(row);
    }
  }
  return rows;
}

void write_summary_table(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "levels,depth,level,runs,failed,best_train_l2,best_train_linf,best_val_l2,best_val_linf\n";
  for (const auto& r : rows) {
    out << r.label << "," << r.depth << "," << r.level << "," << r.runs << "," << r.failed << ","
        << fmt(r.median_best.train_l2) << "," << fmt(r.median_best.train_linf) << "," << fmt(r.median_best.val_l2)
        << "," << fmt(r.median_best.val_linf) << "\n";
  }
}

void emit_summary_table(const std::vector<RunResult>& runs, const std::filesystem::path& path) {
  if (runs.empty()) throw ConfigError("no runs to summarize");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_summary_table(out, summarize(runs));
  if (!out) throw IoError("failed writing " + path.string());
}

void write_experiment_outputs(const ExperimentConfig& cfg, const ExperimentResult& result,
                              const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream meta(out_dir / "metadata.txt", std::ios::trunc);
    if (!meta) throw IoError("cannot write metadata in " + out_dir.string());
    meta << "# work_units: one unit is one fine-level minibatch gradient evaluation. A gradient on a\n"
         << "# coarser level costs (its parameter count) / (fine parameter count); a tau correction over\n"
         << "# m batches between levels l and l+1 costs m * (ratio_l + ratio_{l+1}).\n"
         << "# level: 0 is the trained network, k the k-th auxiliary (coarse) network.\n"
         << "# summary losses are medians over seeds of each run's best value.\n";
    meta << format_config(cfg);
    for (const auto& run : result.runs) {
      meta << "# seed " << run.seed << ": cycles=" << run.cycles << " work_units=" << fmt(run.work_units)
           << (run.failed ? " FAILED: " + run.failure : std::string()) << "\n";
    }
  }
  emit_summary_table(result.runs, out_dir / "summary.csv");
  for (const auto& run : result.runs) {
    if (run.records.empty()) continue;
    const auto dir = out_dir / ("seed_" + std::to_string(run.seed));
    std::filesystem::create_directories(dir);
    emit_csv(run.records, dir / "metrics.csv");
    emit_csv(smooth_records(run.records, cfg.smoothing_window), dir / "metrics_smoothed.csv");
  }
}

}  // namespace mlfas
