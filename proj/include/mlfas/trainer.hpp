#pragma once

// SGD-with-momentum smoothing and multilevel FAS V-cycles.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "mlfas/network.hpp"
#include "mlfas/scheduler.hpp"
#include "mlfas/transfer.hpp"

namespace mlfas {

struct SmootherConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-6;
  std::size_t steps = 2;
};

struct StabilityConfig {
  double eta = 1.0;            // learning-rate divisor per coarser level
  std::size_t eta_depth = 3;   // levels over which eta compounds
  double alpha_p = 1.0;        // parameter correction scale
  double alpha_m = 0.2;        // momentum correction scale
  double gamma = 0.125;        // tau scale in the coarse objective
};

void validate(const SmootherConfig& cfg);
void validate(const StabilityConfig& cfg);

/// Learning rate at `level`: lr / eta^min(level, eta_depth - 1).
double level_learning_rate(const SmootherConfig& base, const StabilityConfig& stab, std::size_t level);

/// Coarse-shaped tilt of the coarse objective g_c(x_c) - gamma x_c^T tau.
struct TauCorrection {
  ParamVector vec;
};

/// Monotone counter of gradient evaluations, in fine-minibatch units.
class WorkCounter {
 public:
  void add(double units);
  double value() const { return total_; }

 private:
  double total_ = 0.0;
};

/// Supplies the next minibatch for a smoothing step.
using BatchSource = std::function<const Minibatch&()>;

struct SmoothResult {
  LossValue last_loss;  // loss of the last batch, evaluated before its update
};

/// `cfg.steps` iterations of
///   g <- grad g_batch(x) + weight_decay x - gamma tau
///   m <- momentum m + g
///   x <- x - lr m
/// Each step adds `work_per_step` to `work` when it is non-null. Throws
/// DivergenceError on a non-finite loss or parameter.
SmoothResult sgd_smooth(Network& net, ParamVector& momentum, const SmootherConfig& cfg, const BatchSource& batches,
                        const TauCorrection* tau, double gamma, WorkCounter* work = nullptr,
                        double work_per_step = 1.0);

/// tau = (N/m) (sum_b grad g^c_b(Pi x) - R sum_b grad g_b(x)) over the m batches.
/// `coarse` must carry the parameters Pi flatten(fine).
TauCorrection compute_tau(const Network& fine, const Network& coarse, const TransferLevel& t,
                          const std::vector<Minibatch>& tau_batches, std::size_t n_total_minibatches);

struct HierarchyLevel {
  Network net;
  ParamVector momentum;
  std::optional<TransferLevel> to_coarser;  // empty at the coarsest level or until first built
};

struct Hierarchy {
  std::vector<HierarchyLevel> levels;  // levels[0] is the trained network
  std::size_t rematch_period = 10;     // in V-cycles
  std::size_t tau_batches = 2;
  CoarseningOptions coarsening;
  std::mt19937_64 order_rng;
  std::size_t cycle = 0;  // completed V-cycles

  std::size_t depth() const { return levels.size(); }
};

/// Hierarchy of `depth` levels around `fine`, with zero momentum. Transfers are
/// built lazily by the first V-cycle.
Hierarchy make_hierarchy(Network fine, std::size_t depth, std::size_t rematch_period, std::size_t tau_batches,
                         const CoarseningOptions& coarsening, std::uint64_t seed);

/// First auxiliary network: the fine network restricted through the current
/// level-0 transfer. Empty when depth is 1 or no transfer exists yet.
std::optional<Network> auxiliary_network(const Hierarchy& h, std::size_t level = 1);

/// Per-level smoother settings; levels past the end reuse the last entry.
struct CycleConfig {
  std::vector<SmootherConfig> smoothers;
  StabilityConfig stability;

  const SmootherConfig& smoother(std::size_t level) const;
};

/// One V-cycle from level 0. Depth 1 degenerates to `steps` plain SGD steps.
void v_cycle(Hierarchy& h, const CycleConfig& cfg, MinibatchScheduler& scheduler, WorkCounter& work);

/// Cost of one minibatch gradient at a level with `level_params` parameters.
double gradient_work(std::size_t level_params, std::size_t fine_params);
/// Cost of a tau computation over m batches between two levels.
double tau_work(std::size_t m, std::size_t level_params, std::size_t coarse_params, std::size_t fine_params);

}  // namespace mlfas
