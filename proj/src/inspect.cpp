#include "mlfas/inspect.hpp"

#include <iomanip>
#include <sstream>

#include "mlfas/error.hpp"

namespace mlfas {

namespace {

std::string describe(const Layer& layer) {
  std::ostringstream os;
  if (const auto* d = std::get_if<DenseLayer>(&layer)) {
    os << "dense " << d->weights.cols() << "->" << d->weights.rows();
  } else {
    const auto& c = std::get<ConvLayer>(layer);
    os << "conv " << c.in_channels << "->" << c.out_channels << " k" << c.kernel_h << "x" << c.kernel_w << " s"
       << c.stride_h << " p" << c.pad_h << " (" << c.in_h << "x" << c.in_w << " -> " << c.out_h() << "x" << c.out_w()
       << ")";
  }
  return os.str();
}

LevelReport describe_level(std::size_t level, const Network& net) {
  LevelReport r;
  r.level = level;
  for (const auto& layer : net.layers) r.layers.push_back(describe(layer));
  r.parameters = net.parameter_count();
  return r;
}

}  // namespace

std::vector<LevelReport> inspect_hierarchy(const std::vector<Network>& levels, const InspectOptions& options) {
  if (levels.empty()) throw ConfigError("inspect_hierarchy: no networks given");
  std::vector<LevelReport> report;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    validate(levels[l]);
    report.push_back(describe_level(l, levels[l]));
    if (l == 0) continue;
    const Network& fine = levels[l - 1];
    const Network& coarse = levels[l];
    if (fine.layers.size() != coarse.layers.size()) {
      throw FormatError("level " + std::to_string(l) + " has a different layer count than level " +
                        std::to_string(l - 1));
    }
    for (std::size_t k = 0; k + 1 < fine.layers.size(); ++k) {
      report[l - 1].to_coarser.push_back({k + 1, layer_units(fine.layers[k]), layer_units(coarse.layers[k]), {}, {}});
    }
  }
  Network current = levels.back();
  for (std::size_t c = 0; c < options.coarsen; ++c) {
    const TransferLevel t = build_transfer_level(current, options.coarsening);
    LevelReport& fine_report = report.back();
    for (std::size_t j = 1; j + 1 < t.interfaces.size(); ++j) {
      const LayerTransfer& lt = t.interfaces[j];
      InterfaceReport ir{j, lt.fine_size(), lt.coarse_size, {}, lt.aggregate};
      for (std::size_t size : aggregate_sizes(lt)) {
        if (ir.aggregate_histogram.size() <= size) ir.aggregate_histogram.resize(size + 1, 0);
        ++ir.aggregate_histogram[size];
      }
      fine_report.to_coarser.push_back(ir);
    }
    current = restrict_network(current, t);
    report.push_back(describe_level(report.size(), current));
  }
  return report;
}

std::string format_report(const std::vector<LevelReport>& report, bool show_matchings) {
  std::ostringstream os;
  const std::size_t fine_params = report.empty() ? 0 : report.front().parameters;
  for (const auto& level : report) {
    os << "level " << level.level << ": " << level.parameters << " parameters";
    if (level.level > 0 && fine_params > 0) {
      os << " (" << std::fixed << std::setprecision(4)
         << static_cast<double>(level.parameters) / static_cast<double>(fine_params) << " of level 0)";
      os.unsetf(std::ios::fixed);
    }
    os << "\n";
    for (std::size_t k = 0; k < level.layers.size(); ++k) os << "  layer " << k << ": " << level.layers[k] << "\n";
    for (const auto& ir : level.to_coarser) {
      os << "  interface " << ir.interface << ": " << ir.fine_units << " -> " << ir.coarse_units << " units, ratio "
         << std::fixed << std::setprecision(4) << ir.ratio();
      os.unsetf(std::ios::fixed);
      if (!ir.aggregate_histogram.empty()) {
        os << ", aggregate sizes";
        for (std::size_t s = 1; s < ir.aggregate_histogram.size(); ++s) {
          if (ir.aggregate_histogram[s] > 0) os << " " << s << ":" << ir.aggregate_histogram[s];
        }
      }
      os << "\n";
      if (show_matchings && !ir.aggregate.empty()) {
        os << "    aggregate of unit:";
        for (std::size_t a : ir.aggregate) os << " " << a;
        os << "\n";
      }
    }
  }
  return os.str();
}

}  // namespace mlfas
