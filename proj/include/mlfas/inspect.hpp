#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mlfas/network.hpp"
#include "mlfas/transfer.hpp"

namespace mlfas {

struct InspectOptions {
  /// Extra levels to build by heavy-edge matching below the last given network.
  std::size_t coarsen = 0;
  CoarseningOptions coarsening;
};

struct InterfaceReport {
  std::size_t interface = 0;  // hidden interface index (1-based)
  std::size_t fine_units = 0;
  std::size_t coarse_units = 0;
  std::vector<std::size_t> aggregate_histogram;  // [size] -> count; empty if unknown
  std::vector<std::size_t> aggregate;            // fine unit -> aggregate; empty if unknown
  double ratio() const { return static_cast<double>(coarse_units) / static_cast<double>(fine_units); }
};

struct LevelReport {
  std::size_t level = 0;
  std::vector<std::string> layers;  // e.g. "dense 768->128"
  std::size_t parameters = 0;
  std::vector<InterfaceReport> to_coarser;  // empty at the last level
};

/// Levels are the given networks in order, followed by `coarsen` levels
/// built from the last one. Aggregate histograms are reported for computed
/// levels; between given networks only widths and ratios are known.
std::vector<LevelReport> inspect_hierarchy(const std::vector<Network>& levels, const InspectOptions& options);
std::string format_report(const std::vector<LevelReport>& report, bool show_matchings = false);

}  // namespace mlfas
