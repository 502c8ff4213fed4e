// Acceptance suite: one PASS/FAIL line per criterion, with timings. Exit
// status is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

#include "mlfas/error.hpp"
#include "mlfas/experiment.hpp"
#include "mlfas/poisson.hpp"
#include "mlfas/trainer.hpp"
#include "support.hpp"

using namespace mlfas;
using namespace mlfas::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "failed: " << what << "; ";
    pass = pass && ok;
  }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Dataset shared by criteria 6, 7 and 8.
RegressionDataset poisson_2000;

void operator_identities(Outcome& out) {
  std::mt19937_64 rng(101);
  double worst_proj = 0.0, worst_adj = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Network net = random_network(rng, {1, 3, 4, 64, trial % 2 == 1});
    const bool weighted = trial % 4 < 2;
    const TransferLevel t = trial % 3 == 0
                                ? build_transfer_level(net, {uniform(rng, -1.0, 0.5), weighted, false})
                                : random_transfer_level(rng, net, weighted);
    const ParamVector xc = random_params(rng, t.coarse_layout);
    const ParamVector y = random_params(rng, t.fine_layout);
    const ParamVector pxc = prolong_params(t, xc);
    const double proj = (restrict_params(t, pxc).values() - xc.values()).lpNorm<Eigen::Infinity>();
    const double adj = std::abs(pxc.values().dot(y.values()) - xc.values().dot(restrict_gradient(t, y).values())) /
                       (1.0 + xc.values().norm() * y.values().norm());
    worst_proj = std::max(worst_proj, proj);
    worst_adj = std::max(worst_adj, adj);
  }
  out.require(worst_proj < 1e-12, "projection identity");
  out.require(worst_adj < 1e-12, "adjoint identity");
  out.detail << "max |Pi P xc - xc| = " << worst_proj << ", max scaled adjoint gap = " << worst_adj;
}

void gradient_correctness(Outcome& out) {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  std::size_t coords = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Network net = random_network(rng, {1, 3, 4, 24, trial % 2 == 1});
    Minibatch b = random_batch(rng, net, 4);
    while (min_kink_distance(net, b) < 1e-4) b = random_batch(rng, net, 4);
    const ParamVector g = backward(net, b);
    const std::size_t n = g.size();
    for (int k = 0; k < 24; ++k) {
      const auto i = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(n) - 1));
      worst = std::max(worst, relative_error(g.values()[static_cast<Eigen::Index>(i)], finite_difference(net, b, i)));
      ++coords;
    }
  }
  out.require(worst < 1e-5, "relative error bound");
  out.detail << coords << " coordinates over 50 nets, max relative error = " << worst;
}

void toeplitz_equivalence(Outcome& out) {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int kh = uniform_int(rng, 1, 3), kw = uniform_int(rng, 1, 3);
    ConvLayer c = make_conv_layer(uniform_int(rng, 1, 4), uniform_int(rng, 1, 4), kh, kw, uniform_int(rng, kh, 9),
                                  uniform_int(rng, kw, 9), uniform_int(rng, 1, 2), uniform_int(rng, 1, 2),
                                  uniform_int(rng, 0, 1), uniform_int(rng, 0, 1));
    for (double& k : c.kernels) k = uniform(rng);
    for (auto& v : c.bias) v = uniform(rng);
    ChannelTensor in(c.in_channels, c.in_h, c.in_w);
    for (double& v : in.data) v = uniform(rng);
    Vector expect = to_matrix(c) * Eigen::Map<const Vector>(in.data.data(), static_cast<Eigen::Index>(in.data.size()));
    for (int o = 0; o < c.out_channels; ++o) {
      expect.segment(static_cast<Eigen::Index>(o * c.out_spatial()), static_cast<Eigen::Index>(c.out_spatial()))
          .array() += c.bias[o];
    }
    const ChannelTensor got = conv_forward(c, in);
    const Vector g = Eigen::Map<const Vector>(got.data.data(), static_cast<Eigen::Index>(got.data.size()));
    worst = std::max(worst, (g - expect).lpNorm<Eigen::Infinity>());
  }
  out.require(worst < 1e-12, "Toeplitz deviation");
  out.detail << "max deviation = " << worst;
}

StrengthMatrix strength(std::size_t n, std::initializer_list<std::tuple<int, int, double>> entries) {
  StrengthMatrix s{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
  for (const auto& [i, j, v] : entries) {
    s.values(i, j) = v;
    s.values(j, i) = v;
  }
  return s;
}

void hem_traces(Outcome& out) {
  const Matching a = greedy_hem(strength(3, {{0, 1, 0.9}, {0, 2, 0.3}, {1, 2, 0.2}}), 0.1);
  out.require(a.partner == std::vector<std::size_t>{1, 0, 2} && a.aggregate == std::vector<std::size_t>{0, 0, 1} &&
                  a.num_aggregates == 2,
              "pair {0,1} with singleton {2}");
  const Matching b = greedy_hem(strength(4, {{0, 1, 0.1}, {1, 2, -0.3}, {2, 3, 0.05}, {0, 3, 0.1}}), 0.1);
  bool singletons = b.num_aggregates == 4;
  for (std::size_t i = 0; i < 4; ++i) singletons = singletons && b.partner[i] == i;
  out.require(singletons, "all edges at or below theta");
  const Matching c = greedy_hem(strength(4, {{0, 1, 0.8}, {2, 3, 0.8}}), 0.5);
  out.require(c.num_aggregates == 2 && c.partner == std::vector<std::size_t>{1, 0, 3, 2}, "two strong pairs");
  out.detail << "3 traces checked";
}

SampleSet random_samples(std::mt19937_64& rng, const Network& net, int count) {
  const Minibatch b = random_batch(rng, net, count);
  return {b.inputs, b.targets};
}

void degenerate_cycles(Outcome& out) {
  std::mt19937_64 rng(505);
  double gap_a = 0.0, gap_c = 0.0;
  bool exact_b = true;
  for (int trial = 0; trial < 10; ++trial) {
    const Network net = random_network(rng, {1, 3, 4, 24, trial % 2 == 1});
    const SampleSet data = random_samples(rng, net, 48);
    const std::size_t k = 2, m = 2;

    // (a) identity transfers, gamma = 0, alpha = 1 against 3k consecutive SGD steps
    {
      Hierarchy h = make_hierarchy(net, 2, 10, m, {1.0, false, false}, 1);
      MinibatchScheduler sched(data, 6, 3), mirror(data, 6, 3);
      WorkCounter work;
      const CycleConfig cfg{{{0.02, 0.9, 1e-4, k}}, {1.0, 3, 1.0, 1.0, 0.0}};
      v_cycle(h, cfg, sched, work);
      Network plain = net;
      ParamVector mom(param_layout(net));
      std::vector<Minibatch> seq;
      for (std::size_t i = 0; i < k; ++i) seq.push_back(mirror.next_batch());
      const auto group = mirror.next_tau_group(m);
      for (std::size_t i = 0; i < k; ++i) seq.push_back(group[i % m]);
      for (std::size_t i = 0; i < k; ++i) seq.push_back(mirror.next_batch());
      std::size_t cursor = 0;
      SmootherConfig all = cfg.smoothers[0];
      all.steps = 3 * k;
      sgd_smooth(plain, mom, all, [&]() -> const Minibatch& { return seq[cursor++]; }, nullptr, 0.0);
      gap_a = std::max(gap_a, (flatten(plain).values() - flatten(h.levels[0].net).values()).lpNorm<Eigen::Infinity>());
      gap_a = std::max(gap_a, (mom.values() - h.levels[0].momentum.values()).lpNorm<Eigen::Infinity>());
    }

    // (b) a coarse iterate that never moves gives exactly zero correction
    {
      const TransferLevel t = build_transfer_level(net, {-1.0, true, false});
      const ParamVector x = flatten(net);
      const ParamVector corrected = coarse_grid_correction(x, restrict_params(t, x), t, 1.0);
      exact_b = exact_b && corrected.values() == x.values();

      Hierarchy h = make_hierarchy(net, 2, 10, m, {-1.0, true, false}, 1);
      MinibatchScheduler sched(data, 6, 4), mirror(data, 6, 4);
      WorkCounter work;
      SmootherConfig fine{0.02, 0.9, 1e-4, k};
      SmootherConfig frozen = fine;
      frozen.steps = 0;
      v_cycle(h, {{fine, frozen}, {1.41, 3, 1.0, 0.2, 0.125}}, sched, work);
      Network plain = net;
      ParamVector mom(param_layout(net));
      Minibatch current;
      const BatchSource src = [&]() -> const Minibatch& { return current = mirror.next_batch(); };
      sgd_smooth(plain, mom, fine, src, nullptr, 0.0);
      mirror.next_tau_group(m);
      sgd_smooth(plain, mom, fine, src, nullptr, 0.0);
      exact_b = exact_b && flatten(plain).values() == flatten(h.levels[0].net).values() &&
                mom.values() == h.levels[0].momentum.values();
    }

    // (c) tau vanishes for identity transfers
    {
      const TransferLevel t = identity_transfer_level(net);
      MinibatchScheduler sched(data, 6, 5);
      const TauCorrection tau = compute_tau(net, restrict_network(net, t), t, sched.next_tau_group(m),
                                            sched.batches_per_epoch());
      gap_c = std::max(gap_c, max_abs(tau.vec));
    }
  }
  out.require(gap_a < 1e-12, "(a) identity cycle equals SGD");
  out.require(exact_b, "(b) zero coarse movement gives zero correction");
  out.require(gap_c < 1e-12, "(c) identity tau is zero");
  out.detail << "(a) max gap " << gap_a << ", (b) exact " << (exact_b ? "yes" : "no") << ", (c) max |tau| " << gap_c;
}

double manufactured_error(std::size_t n) {
  constexpr double pi = std::numbers::pi;
  const GridField x = x_coordinates(n), y = y_coordinates(n);
  const GridField exact = ((pi * x.array()).sin() * (pi * y.array()).sin()).matrix();
  const GridField kappa = GridField::Ones(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  return (solve_poisson(kappa, 2.0 * pi * pi * exact) - exact).cwiseAbs().maxCoeff();
}

std::string serialize(const RegressionDataset& d) {
  std::ostringstream os(std::ios::binary);
  write_dataset(os, d);
  return os.str();
}

void poisson_generator(Outcome& out) {
  const double ratio = manufactured_error(16) / manufactured_error(32);
  out.require(ratio >= 3.5 && ratio <= 4.5, "convergence ratio");

  std::mt19937_64 rng(606);
  double lo = 1e300, hi = -1e300;
  for (int i = 0; i < 10000; ++i) {
    const GridField k = sample_kappa(draw_kappa_params(rng), 16);
    lo = std::min(lo, k.minCoeff());
    hi = std::max(hi, k.maxCoeff());
  }
  out.require(lo >= 0.1 - 1e-12 && hi <= 2.1 + 1e-12, "kappa range");

  const bool deterministic = serialize(generate_dataset({50, 16, 11, 0.2, false})) ==
                             serialize(generate_dataset({50, 16, 11, 0.2, false}));
  out.require(deterministic, "bitwise determinism");

  const auto start = std::chrono::steady_clock::now();
  poisson_2000 = generate_dataset({2000, 16, 0, 0.2, false});
  const double gen = seconds_since(start);
  out.require(gen < 120.0, "2000-sample generation under 2 minutes");
  out.detail << "ratio " << ratio << ", kappa in [" << lo << ", " << hi << "], deterministic "
             << (deterministic ? "yes" : "no") << ", 2000 samples in " << gen << " s";
}

// Shared settings of the desk-scale training comparison.
ExperimentConfig comparison_config(std::size_t depth) {
  ExperimentConfig cfg;
  cfg.hidden = {LayerSpec::dense(128), LayerSpec::dense(128)};
  cfg.depth = depth;
  cfg.seeds = {0, 1, 2, 3, 4};
  cfg.max_work_units = 5000;
  // The loss sums squared errors over all 256 outputs, so the default step of
  // 0.01 saturates every ReLU within a few cycles; both methods share 1e-3.
  cfg.smoother.learning_rate = 1e-3;
  cfg.stability.eta = 2.0 * std::numbers::sqrt2;
  return cfg;
}

void training_benefit(Outcome& out) {
  const ExperimentResult sgd = run_experiment(comparison_config(1), poisson_2000);
  const ExperimentResult fas = run_experiment(comparison_config(2), poisson_2000);
  std::vector<double> sgd_l2, sgd_linf, fas_l2, fas_linf;
  for (const auto& r : sgd.runs) {
    out.require(!r.failed, "SGD run completed");
    if (r.failed) continue;
    sgd_l2.push_back(r.best.at(0).val_l2);
    sgd_linf.push_back(r.best.at(0).val_linf);
  }
  for (const auto& r : fas.runs) {
    out.require(!r.failed, "FAS run completed");
    if (r.failed) continue;
    out.require(r.work_units >= 5000, "equal work budget");
    fas_l2.push_back(r.best.at(0).val_l2);
    fas_linf.push_back(r.best.at(0).val_linf);
  }
  if (sgd_l2.empty() || fas_l2.empty()) return;
  const double s2 = median(sgd_l2), si = median(sgd_linf), f2 = median(fas_l2), fi = median(fas_linf);
  out.require(f2 <= 1.05 * s2, "median best val L2 within 1.05x SGD");
  out.require(fi <= 1.0 * si, "median best val Linf at most SGD");
  out.detail << "median best val L2 SGD " << s2 << " FAS " << f2 << " (ratio " << f2 / s2 << "); Linf SGD " << si
             << " FAS " << fi << " (ratio " << fi / si << ")";
}

void auxiliary_and_eta(Outcome& out) {
  ExperimentConfig deep = comparison_config(4);
  deep.seeds = {0};
  deep.max_work_units = 500;
  const auto rows = summarize(run_experiment(deep, poisson_2000).runs);
  bool has4 = false, has4aux = false;
  for (const auto& r : rows) {
    has4 = has4 || r.label == "4";
    has4aux = has4aux || r.label == "4aux";
  }
  std::ostringstream table;
  write_summary_table(table, rows);
  out.require(has4 && has4aux && table.str().find("\n4aux,") != std::string::npos, "summary rows 4 and 4aux");

  constexpr double r2 = std::numbers::sqrt2;
  std::size_t trips = 0;
  for (double eta : {1.0, r2, 2.0, 2.0 * r2, 4.0}) {
    ExperimentConfig cfg = deep;
    cfg.stability.eta = eta;
    for (const auto& run : run_experiment(cfg, poisson_2000).runs) {
      if (run.failed) {
        ++trips;
        out.detail << "eta " << eta << " tripped: " << run.failure << "; ";
      }
    }
  }
  out.require(trips == 0, "eta sweep without divergence");
  out.detail << "rows:";
  for (const auto& r : rows) out.detail << " " << r.label;
  out.detail << "; eta sweep trips " << trips;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double limit_s;  // 0 for no runtime bound
    std::function<void(Outcome&)> run;
  };
  const std::vector<Criterion> criteria{
      {"operator identities (projection, adjoint) on 100 random nets", 10.0, operator_identities},
      {"backward vs central finite differences on 50 random nets", 30.0, gradient_correctness},
      {"conv layers equal their block-Toeplitz matrices", 10.0, toeplitz_equivalence},
      {"heavy-edge matching hand traces", 0.0, hem_traces},
      {"degenerate V-cycles (identity SGD, zero correction, zero tau)", 0.0, degenerate_cycles},
      {"Poisson generator (convergence, kappa range, determinism, speed)", 0.0, poisson_generator},
      {"2-level FAS vs SGD at equal work on the n=16 Poisson set", 1800.0, training_benefit},
      {"auxiliary-network rows and eta sweep without divergence", 0.0, auxiliary_and_eta},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(out);
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    const double elapsed = seconds_since(start);
    if (c.limit_s > 0.0) out.require(elapsed < c.limit_s, "runtime limit");
    all = all && out.pass;
    std::printf("%s  %zu  %s  [%.2f s]  %s\n", out.pass ? "PASS" : "FAIL", i + 1, c.name, elapsed,
                out.detail.str().c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
