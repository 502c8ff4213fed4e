#include "mlfas/trainer.hpp"

#include <cmath>
#include <string>

#include "mlfas/error.hpp"

namespace mlfas {

void validate(const SmootherConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(cfg.weight_decay >= 0.0)) throw ConfigError("weight decay must be nonnegative");
}

void validate(const StabilityConfig& cfg) {
  if (!(cfg.eta >= 1.0)) throw ConfigError("eta must be at least 1");
  if (cfg.eta_depth == 0) throw ConfigError("eta_depth must be positive");
  if (!(cfg.alpha_p > 0.0 && cfg.alpha_p <= 1.0)) throw ConfigError("alpha_p must lie in (0, 1]");
  if (!(cfg.alpha_m > 0.0 && cfg.alpha_m <= 1.0)) throw ConfigError("alpha_m must lie in (0, 1]");
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
}

double level_learning_rate(const SmootherConfig& base, const StabilityConfig& stab, std::size_t level) {
  const std::size_t capped = std::min(level, stab.eta_depth - 1);
  return base.learning_rate / std::pow(stab.eta, static_cast<double>(capped));
}

void WorkCounter::add(double units) {
  if (!(units >= 0.0)) throw ConfigError("work increments must be nonnegative");
  total_ += units;
}

SmoothResult sgd_smooth(Network& net, ParamVector& momentum, const SmootherConfig& cfg, const BatchSource& batches,
                        const TauCorrection* tau, double gamma, WorkCounter* work, double work_per_step) {
  SmoothResult result;
  if (cfg.steps == 0) return result;
  ParamVector x = flatten(net);
  if (!x.same_layout(momentum)) throw ShapeError("sgd_smooth: momentum layout differs from the network");
  if (tau != nullptr && !x.same_layout(tau->vec)) throw ShapeError("sgd_smooth: tau layout differs from the network");
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    GradientResult g = gradient_and_loss(net, batches());
    if (!std::isfinite(g.loss.l2)) {
      throw DivergenceError("non-finite training loss at smoothing step " + std::to_string(step));
    }
    Vector& grad = g.gradient.values();
    if (cfg.weight_decay != 0.0) grad += cfg.weight_decay * x.values();
    if (tau != nullptr && gamma != 0.0) grad -= gamma * tau->vec.values();
    momentum.values() = cfg.momentum * momentum.values() + grad;
    x.values() -= cfg.learning_rate * momentum.values();
    if (!all_finite(x)) throw DivergenceError("non-finite parameters after smoothing step " + std::to_string(step));
    unflatten(net, x);
    result.last_loss = g.loss;
    if (work != nullptr) work->add(work_per_step);
  }
  return result;
}

TauCorrection compute_tau(const Network& fine, const Network& coarse, const TransferLevel& t,
                          const std::vector<Minibatch>& tau_batches, std::size_t n_total_minibatches) {
  if (tau_batches.empty()) throw ConfigError("compute_tau: no tau batches");
  if (!(*param_layout(coarse) == *t.coarse_layout)) throw ShapeError("compute_tau: coarse network shape mismatch");
  ParamVector fine_sum(t.fine_layout);
  ParamVector coarse_sum(t.coarse_layout);
  for (const Minibatch& b : tau_batches) {
    fine_sum.values() += backward(fine, b).values();
    coarse_sum.values() += backward(coarse, b).values();
  }
  TauCorrection tau{std::move(coarse_sum)};
  tau.vec.values() -= restrict_gradient(t, fine_sum).values();
  tau.vec.values() *= static_cast<double>(n_total_minibatches) / static_cast<double>(tau_batches.size());
  return tau;
}

Hierarchy make_hierarchy(Network fine, std::size_t depth, std::size_t rematch_period, std::size_t tau_batches,
                         const CoarseningOptions& coarsening, std::uint64_t seed) {
  if (depth == 0) throw ConfigError("hierarchy depth must be at least 1");
  if (rematch_period == 0) throw ConfigError("rematch period must be positive");
  if (tau_batches == 0) throw ConfigError("tau batch count must be positive");
  validate(fine);
  Hierarchy h;
  h.rematch_period = rematch_period;
  h.tau_batches = tau_batches;
  h.coarsening = coarsening;
  h.order_rng.seed(seed);
  h.levels.resize(depth);
  h.levels[0].momentum = ParamVector(param_layout(fine));
  h.levels[0].net = std::move(fine);
  return h;
}

std::optional<Network> auxiliary_network(const Hierarchy& h, std::size_t level) {
  if (level == 0 || level >= h.depth()) return std::nullopt;
  Network net = h.levels[0].net;
  for (std::size_t l = 0; l < level; ++l) {
    const auto& t = h.levels[l].to_coarser;
    if (!t || !(*param_layout(net) == *t->fine_layout)) return std::nullopt;
    net = restrict_network(net, *t);
  }
  return net;
}

const SmootherConfig& CycleConfig::smoother(std::size_t level) const {
  if (smoothers.empty()) throw ConfigError("cycle configuration has no smoother settings");
  return smoothers[std::min(level, smoothers.size() - 1)];
}

double gradient_work(std::size_t level_params, std::size_t fine_params) {
  return static_cast<double>(level_params) / static_cast<double>(fine_params);
}

double tau_work(std::size_t m, std::size_t level_params, std::size_t coarse_params, std::size_t fine_params) {
  return static_cast<double>(m) * (gradient_work(level_params, fine_params) + gradient_work(coarse_params, fine_params));
}

namespace {

struct CycleContext {
  Hierarchy& h;
  const CycleConfig& cfg;
  MinibatchScheduler& scheduler;
  WorkCounter& work;
  std::size_t fine_params;
};

/// Runs the cycle at `level` in place on h.levels[level]. `group` is the tau
/// group the level's smoothing cycles through (null at level 0, which draws
/// fresh batches); `tau` tilts the level's objective (null at level 0).
void cycle_level(CycleContext& ctx, std::size_t level, const std::vector<Minibatch>* group, const TauCorrection* tau) {
  Hierarchy& h = ctx.h;
  HierarchyLevel& lv = h.levels[level];
  const StabilityConfig& stab = ctx.cfg.stability;
  SmootherConfig smoother = ctx.cfg.smoother(level);
  smoother.learning_rate = level_learning_rate(smoother, stab, level);

  Minibatch current;
  std::size_t group_cursor = 0;
  const BatchSource source = [&]() -> const Minibatch& {
    if (group == nullptr) {
      current = ctx.scheduler.next_batch();
      return current;
    }
    const Minibatch& b = (*group)[group_cursor % group->size()];
    ++group_cursor;
    return b;
  };
  const double step_work = gradient_work(lv.net.parameter_count(), ctx.fine_params);
  const double gamma = stab.gamma;

  auto smooth = [&](const char* phase) {
    try {
      sgd_smooth(lv.net, lv.momentum, smoother, source, tau, gamma, &ctx.work, step_work);
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string(e.what()) + " (" + phase + ", level " + std::to_string(level) + ", cycle " +
                            std::to_string(h.cycle) + ")");
    }
  };

  if (level + 1 == h.depth()) {
    smooth("coarsest smoothing");
    return;
  }

  smooth("pre-smoothing");

  const bool rematch = !lv.to_coarser || h.cycle % h.rematch_period == 0;
  if (rematch) {
    lv.to_coarser = build_transfer_level(lv.net, h.coarsening, &h.order_rng);
    for (std::size_t l = level + 1; l < h.depth(); ++l) h.levels[l].to_coarser.reset();
  }
  const TransferLevel& t = *lv.to_coarser;

  HierarchyLevel& coarse = h.levels[level + 1];
  coarse.net = restrict_network(lv.net, t);
  coarse.momentum = restrict_params(t, lv.momentum);

  std::vector<Minibatch> tau_group = ctx.scheduler.next_tau_group(h.tau_batches);
  TauCorrection coarse_tau = compute_tau(lv.net, coarse.net, t, tau_group, ctx.scheduler.batches_per_epoch());
  if (tau != nullptr) coarse_tau.vec.values() += restrict_gradient(t, tau->vec).values();
  ctx.work.add(tau_work(tau_group.size(), lv.net.parameter_count(), coarse.net.parameter_count(), ctx.fine_params));

  cycle_level(ctx, level + 1, &tau_group, &coarse_tau);

  ParamVector x = coarse_grid_correction(flatten(lv.net), flatten(coarse.net), t, stab.alpha_p);
  lv.momentum = coarse_grid_correction(lv.momentum, coarse.momentum, t, stab.alpha_m);
  if (!all_finite(x) || !all_finite(lv.momentum)) {
    throw DivergenceError("non-finite coarse-grid correction (level " + std::to_string(level) + ", cycle " +
                          std::to_string(h.cycle) + ")");
  }
  unflatten(lv.net, x);

  smooth("post-smoothing");
}

}  // namespace

void v_cycle(Hierarchy& h, const CycleConfig& cfg, MinibatchScheduler& scheduler, WorkCounter& work) {
  if (h.levels.empty()) throw ConfigError("empty hierarchy");
  validate(cfg.stability);
  for (const auto& s : cfg.smoothers) validate(s);
  CycleContext ctx{h, cfg, scheduler, work, h.levels[0].net.parameter_count()};
  cycle_level(ctx, 0, nullptr, nullptr);
  ++h.cycle;
}

}  // namespace mlfas
