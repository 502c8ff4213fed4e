#include "mlfas/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mlfas/error.hpp"

namespace mlfas {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

double ExperimentConfig::eval_interval() const { return eval_every > 0.0 ? eval_every : max_work_units / 200.0; }

CycleConfig ExperimentConfig::cycle_config() const {
  SmootherConfig coarse = smoother;
  coarse.steps = coarse_smoothing_steps;
  return {{smoother, coarse}, stability};
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.depth == 0) throw ConfigError("depth: must be at least 1");
  if (cfg.hidden.empty()) throw ConfigError("hidden: at least one hidden layer is required");
  if (cfg.batch_size == 0) throw ConfigError("batch_size: must be positive");
  if (cfg.tau_batches == 0) throw ConfigError("tau_batches: must be positive");
  if (cfg.rematch_period == 0) throw ConfigError("rematch_period: must be positive");
  if (!(cfg.coarsening.theta >= -1.0 && cfg.coarsening.theta <= 1.0)) throw ConfigError("theta: must lie in [-1, 1]");
  if (!(cfg.max_work_units > 0.0)) throw ConfigError("max_work_units: must be positive");
  if (cfg.eval_every < 0.0) throw ConfigError("eval_every: must be nonnegative");
  if (cfg.seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (cfg.smoothing_window == 0 || cfg.smoothing_window % 2 == 0) throw ConfigError("smoothing_window: must be odd");
  try {
    validate(cfg.smoother);
    validate(cfg.stability);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("smoother/stability: ") + e.what());
  }
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value,
                      const std::filesystem::path& base_dir) {
  if (key == "dataset") {
    std::filesystem::path p(value);
    cfg.dataset = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  } else if (key == "hidden") {
    try {
      cfg.hidden = parse_hidden_spec(value);
    } catch (const Error& e) {
      throw ConfigError(std::string("hidden: ") + e.what());
    }
  } else if (key == "activation") {
    try {
      cfg.activation.kind = activation_from_string(value);
    } catch (const Error& e) {
      throw ConfigError(std::string("activation: ") + e.what());
    }
  } else if (key == "leaky_slope") {
    cfg.activation.slope = parse_double(key, value);
  } else if (key == "activate_output") {
    cfg.activate_output = parse_bool(key, value);
  } else if (key == "depth") {
    cfg.depth = parse_u64(key, value);
  } else if (key == "learning_rate") {
    cfg.smoother.learning_rate = parse_double(key, value);
  } else if (key == "momentum") {
    cfg.smoother.momentum = parse_double(key, value);
  } else if (key == "weight_decay") {
    cfg.smoother.weight_decay = parse_double(key, value);
  } else if (key == "smoothing_steps") {
    cfg.smoother.steps = parse_u64(key, value);
    cfg.coarse_smoothing_steps = cfg.smoother.steps;
  } else if (key == "coarse_smoothing_steps") {
    cfg.coarse_smoothing_steps = parse_u64(key, value);
  } else if (key == "eta") {
    cfg.stability.eta = parse_double(key, value);
  } else if (key == "eta_depth") {
    cfg.stability.eta_depth = parse_u64(key, value);
  } else if (key == "alpha_p") {
    cfg.stability.alpha_p = parse_double(key, value);
  } else if (key == "alpha_m") {
    cfg.stability.alpha_m = parse_double(key, value);
  } else if (key == "gamma") {
    cfg.stability.gamma = parse_double(key, value);
  } else if (key == "batch_size") {
    cfg.batch_size = parse_u64(key, value);
  } else if (key == "tau_batches") {
    cfg.tau_batches = parse_u64(key, value);
  } else if (key == "rematch_period") {
    cfg.rematch_period = parse_u64(key, value);
  } else if (key == "theta") {
    cfg.coarsening.theta = parse_double(key, value);
  } else if (key == "weighted_transfer") {
    cfg.coarsening.weighted = parse_bool(key, value);
  } else if (key == "randomize_matching_order") {
    cfg.coarsening.randomize_order = parse_bool(key, value);
  } else if (key == "max_work_units") {
    cfg.max_work_units = parse_double(key, value);
  } else if (key == "eval_every") {
    cfg.eval_every = parse_double(key, value);
  } else if (key == "seeds") {
    cfg.seeds.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) cfg.seeds.push_back(parse_u64(key, trim(item)));
  } else if (key == "smoothing_window") {
    cfg.smoothing_window = parse_u64(key, value);
  } else if (key == "checkpoint_every") {
    cfg.checkpoint_every = parse_u64(key, value);
  } else if (key == "eval_all_auxiliary") {
    cfg.eval_all_auxiliary = parse_bool(key, value);
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), base_dir);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in, path.parent_path());
}

std::string format_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "dataset = " << cfg.dataset.string() << "\n"
     << "hidden = " << format_hidden_spec(cfg.hidden) << "\n"
     << "activation = " << to_string(cfg.activation.kind) << "\n"
     << "leaky_slope = " << fmt(cfg.activation.slope) << "\n"
     << "activate_output = " << b(cfg.activate_output) << "\n"
     << "depth = " << cfg.depth << "\n"
     << "learning_rate = " << fmt(cfg.smoother.learning_rate) << "\n"
     << "momentum = " << fmt(cfg.smoother.momentum) << "\n"
     << "weight_decay = " << fmt(cfg.smoother.weight_decay) << "\n"
     << "smoothing_steps = " << cfg.smoother.steps << "\n"
     << "coarse_smoothing_steps = " << cfg.coarse_smoothing_steps << "\n"
     << "eta = " << fmt(cfg.stability.eta) << "\n"
     << "eta_depth = " << cfg.stability.eta_depth << "\n"
     << "alpha_p = " << fmt(cfg.stability.alpha_p) << "\n"
     << "alpha_m = " << fmt(cfg.stability.alpha_m) << "\n"
     << "gamma = " << fmt(cfg.stability.gamma) << "\n"
     << "batch_size = " << cfg.batch_size << "\n"
     << "tau_batches = " << cfg.tau_batches << "\n"
     << "rematch_period = " << cfg.rematch_period << "\n"
     << "theta = " << fmt(cfg.coarsening.theta) << "\n"
     << "weighted_transfer = " << b(cfg.coarsening.weighted) << "\n"
     << "randomize_matching_order = " << b(cfg.coarsening.randomize_order) << "\n"
     << "max_work_units = " << fmt(cfg.max_work_units) << "\n"
     << "eval_every = " << fmt(cfg.eval_every) << "\n"
     << "seeds = ";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) os << (i ? "," : "") << cfg.seeds[i];
  os << "\n"
     << "smoothing_window = " << cfg.smoothing_window << "\n"
     << "checkpoint_every = " << cfg.checkpoint_every << "\n"
     << "eval_all_auxiliary = " << b(cfg.eval_all_auxiliary) << "\n";
  return os.str();
}

}  // namespace mlfas
