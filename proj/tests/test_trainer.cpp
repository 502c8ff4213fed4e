#include <doctest.h>

#include <set>

#include "mlfas/error.hpp"
#include "mlfas/reference.hpp"
#include "mlfas/trainer.hpp"
#include "support.hpp"

using namespace mlfas;
using namespace mlfas::testing;

namespace {

SampleSet random_samples(std::mt19937_64& rng, const Network& net, int count) {
  const Minibatch b = random_batch(rng, net, count);
  return {b.inputs, b.targets};
}

Network install(const Network& shape, const ParamVector& x) {
  Network net = shape;
  unflatten(net, x);
  return net;
}

// Plain SGD with momentum, written out with the reference gradient.
void oracle_sgd(const Network& shape, Vector& x, Vector& m, const Minibatch& b, double lr, double mu, double wd,
                const Vector* tau = nullptr, double gamma = 0.0) {
  const auto layout = param_layout(shape);
  Vector g = reference::gradient(install(shape, ParamVector(layout, x)), b).values() + wd * x;
  if (tau != nullptr) g -= gamma * *tau;
  m = mu * m + g;
  x -= lr * m;
}

Network duplicated_toy(std::uint64_t seed) {
  NetworkSpec spec;
  spec.input = {1, 1, 3};
  spec.hidden = {LayerSpec::dense(4)};
  spec.output_size = 2;
  Network net = make_network(spec, seed);
  auto& d = std::get<DenseLayer>(net.layers[0]);
  d.weights.row(1) = d.weights.row(0);
  d.bias[1] = d.bias[0];
  d.weights.row(3) = d.weights.row(2);
  d.bias[3] = d.bias[2];
  // Equal outgoing columns keep each pair identical under training.
  auto& out = std::get<DenseLayer>(net.layers[1]);
  out.weights.col(1) = out.weights.col(0);
  out.weights.col(3) = out.weights.col(2);
  return net;
}

}  // namespace

TEST_SUITE("fas-train") {
  TEST_CASE("smoothing with zero gradient and zero momentum leaves parameters unchanged") {
    std::mt19937_64 rng(1);
    Network net = random_network(rng);
    Minibatch b = random_batch(rng, net, 5);
    b.targets = forward_batch(net, b.inputs);
    ParamVector m(param_layout(net));
    const ParamVector before = flatten(net);
    SmootherConfig cfg{0.1, 0.9, 0.0, 3};
    sgd_smooth(net, m, cfg, [&]() -> const Minibatch& { return b; }, nullptr, 0.0);
    CHECK(flatten(net).values() == before.values());
  }

  TEST_CASE("tau with gamma = 0 follows the tau-free trajectory") {
    std::mt19937_64 rng(2);
    Network a = random_network(rng);
    Network b = a;
    const Minibatch batch = random_batch(rng, a, 8);
    ParamVector ma(param_layout(a)), mb(param_layout(b));
    const TauCorrection tau{random_params(rng, param_layout(a))};
    const SmootherConfig cfg{0.05, 0.9, 1e-3, 4};
    const BatchSource src = [&]() -> const Minibatch& { return batch; };
    sgd_smooth(a, ma, cfg, src, nullptr, 0.0);
    sgd_smooth(b, mb, cfg, src, &tau, 0.0);
    CHECK(flatten(a).values() == flatten(b).values());
    CHECK(ma.values() == mb.values());
  }

  TEST_CASE("one step on a scalar quadratic matches the hand computation") {
    Network net;
    RowMatrix w(1, 1);
    w << 0.5;
    Vector bias(1);
    bias << 0.25;
    net.layers.emplace_back(DenseLayer{w, bias});
    const Minibatch b{BatchMatrix::Constant(1, 1, 2.0), BatchMatrix::Constant(1, 1, 1.0)};
    ParamVector m(param_layout(net));
    m.values() << 0.1, -0.2;  // [w, b]
    TauCorrection tau{ParamVector(param_layout(net))};
    tau.vec.values() << 0.3, 0.4;
    const SmootherConfig cfg{0.1, 0.9, 0.01, 1};
    sgd_smooth(net, m, cfg, [&]() -> const Minibatch& { return b; }, &tau, 0.5);
    // residual r = 0.5*2 + 0.25 - 1 = 0.25; dL/dw = 2 r * 2 = 1.0, dL/db = 2 r = 0.5
    const double gw = 1.0 + 0.01 * 0.5 - 0.5 * 0.3;
    const double gb = 0.5 + 0.01 * 0.25 - 0.5 * 0.4;
    const double mw = 0.9 * 0.1 + gw;
    const double mb = 0.9 * -0.2 + gb;
    CHECK(m.values()[0] == doctest::Approx(mw).epsilon(1e-15));
    CHECK(m.values()[1] == doctest::Approx(mb).epsilon(1e-15));
    CHECK(std::get<DenseLayer>(net.layers[0]).weights(0, 0) == doctest::Approx(0.5 - 0.1 * mw).epsilon(1e-15));
    CHECK(std::get<DenseLayer>(net.layers[0]).bias[0] == doctest::Approx(0.25 - 0.1 * mb).epsilon(1e-15));
  }

  TEST_CASE("tau vanishes for identity transfers") {
    std::mt19937_64 rng(3);
    const Network net = random_network(rng, {1, 3, 4, 16, true});
    const TransferLevel t = identity_transfer_level(net);
    const std::vector<Minibatch> group{random_batch(rng, net, 10), random_batch(rng, net, 10)};
    const TauCorrection tau = compute_tau(net, restrict_network(net, t), t, group, 7);
    CHECK(max_abs(tau.vec) < 1e-12);
  }

  TEST_CASE("tau scales the gradient difference by N/m") {
    std::mt19937_64 rng(4);
    const Network fine = random_network(rng);
    const TransferLevel t = identity_transfer_level(fine);
    const Network other = install(fine, random_params(rng, param_layout(fine)));
    const std::vector<Minibatch> group{random_batch(rng, fine, 6), random_batch(rng, fine, 6)};
    Vector d = Vector::Zero(static_cast<Eigen::Index>(fine.parameter_count()));
    for (const auto& b : group) d += backward(other, b).values() - backward(fine, b).values();
    const TauCorrection tau = compute_tau(fine, other, t, group, 10);
    CHECK((tau.vec.values() - 5.0 * d).lpNorm<Eigen::Infinity>() < 1e-12);
  }

  TEST_CASE("tau matches an explicit restriction-matrix implementation") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
      const Network fine = random_network(rng, {1, 3, 4, 16, trial % 2 == 0});
      const TransferLevel t = random_transfer_level(rng, fine, true);
      const Network coarse = restrict_network(fine, t);
      const ExplicitOperators ops = explicit_operators(t);
      const std::vector<Minibatch> group{random_batch(rng, fine, 5), random_batch(rng, fine, 5),
                                         random_batch(rng, fine, 5)};
      Vector gc = Vector::Zero(static_cast<Eigen::Index>(coarse.parameter_count()));
      Vector gf = Vector::Zero(static_cast<Eigen::Index>(fine.parameter_count()));
      for (const auto& b : group) {
        gc += reference::gradient(coarse, b).values();
        gf += reference::gradient(fine, b).values();
      }
      const Vector expected = (12.0 / 3.0) * (gc - ops.restrict_grad * gf);
      const TauCorrection tau = compute_tau(fine, coarse, t, group, 12);
      CHECK((tau.vec.values() - expected).lpNorm<Eigen::Infinity>() < 1e-11);
    }
  }

  TEST_CASE("scheduler groups: full epoch coverage, disjointness and determinism") {
    std::mt19937_64 rng(6);
    const Network net = random_network(rng);
    const SampleSet data = random_samples(rng, net, 40);
    MinibatchScheduler s(data, 10, 99);
    CHECK(s.batches_per_epoch() == 4);
    std::multiset<std::size_t> seen;
    for (int i = 0; i < 4; ++i)
      for (std::size_t idx : s.next_indices()) seen.insert(idx);
    CHECK(seen.size() == 40);
    CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 40);

    MinibatchScheduler a(data, 5, 7), b(data, 5, 7);
    std::set<std::size_t> first, second;
    for (int i = 0; i < 2; ++i)
      for (std::size_t idx : a.next_indices()) first.insert(idx);
    for (int i = 0; i < 2; ++i)
      for (std::size_t idx : a.next_indices()) second.insert(idx);
    for (std::size_t idx : first) CHECK(second.count(idx) == 0);
    for (int i = 0; i < 4; ++i) b.next_indices();
    for (int i = 0; i < 20; ++i) CHECK(a.next_indices() == b.next_indices());

    MinibatchScheduler c(data, 10, 99), d(data, 10, 99);
    const auto gc = c.next_tau_group(4);
    const auto gd = d.next_tau_group(4);
    for (int i = 0; i < 4; ++i) CHECK(gc[static_cast<std::size_t>(i)].inputs == gd[static_cast<std::size_t>(i)].inputs);

    CHECK_THROWS_AS(MinibatchScheduler(data, 41, 1), ConfigError);
  }

  TEST_CASE("short final batch and reshuffle") {
    std::mt19937_64 rng(7);
    const Network net = random_network(rng);
    const SampleSet data = random_samples(rng, net, 23);
    MinibatchScheduler s(data, 10, 3);
    CHECK(s.batches_per_epoch() == 3);
    CHECK(s.next_batch().size() == 10);
    CHECK(s.next_batch().size() == 10);
    CHECK(s.next_batch().size() == 3);
    CHECK(s.epoch() == 0);
    CHECK(s.next_batch().size() == 10);
    CHECK(s.epoch() == 1);
  }

  TEST_CASE("work unit arithmetic") {
    CHECK(gradient_work(100, 100) == 1.0);
    CHECK(gradient_work(50, 100) == 0.5);
    const double total = 2 * gradient_work(100, 100) + 2 * gradient_work(50, 100) + 2 * gradient_work(100, 100) +
                         tau_work(2, 100, 50, 100);
    CHECK(total == 8.0);
    WorkCounter w;
    w.add(1.0);
    w.add(0.5);
    CHECK(w.value() == 1.5);
    CHECK_THROWS(w.add(-1.0));
  }

  TEST_CASE("a two-level cycle charges smoothing and tau by parameter ratio") {
    std::mt19937_64 rng(8);
    const Network net = duplicated_toy(8);
    const SampleSet data = random_samples(rng, net, 40);
    Hierarchy h = make_hierarchy(net, 2, 10, 2, {0.999, true, false}, 1);
    MinibatchScheduler sched(data, 5, 2);
    WorkCounter work;
    const CycleConfig cfg{{{0.01, 0.9, 0.0, 2}}, {1.0, 3, 1.0, 0.2, 0.125}};
    v_cycle(h, cfg, sched, work);
    const double r = static_cast<double>(h.levels[1].net.parameter_count()) / net.parameter_count();
    CHECK(r < 1.0);
    CHECK(work.value() == doctest::Approx(2 + 2 * r + 2 + 2 * (1 + r)).epsilon(1e-15));
    const double before = work.value();
    v_cycle(h, cfg, sched, work);
    CHECK(work.value() == doctest::Approx(2 * before).epsilon(1e-15));
  }

  TEST_CASE("depth 1 cycle is plain SGD") {
    std::mt19937_64 rng(9);
    const Network net = random_network(rng);
    const SampleSet data = random_samples(rng, net, 30);
    Hierarchy h = make_hierarchy(net, 1, 10, 2, {}, 1);
    MinibatchScheduler s1(data, 6, 4), s2(data, 6, 4);
    WorkCounter work;
    const CycleConfig cfg{{{0.02, 0.9, 1e-4, 3}}, {}};
    v_cycle(h, cfg, s1, work);
    v_cycle(h, cfg, s1, work);
    Network plain = net;
    ParamVector m(param_layout(net));
    Minibatch current;
    const BatchSource src = [&]() -> const Minibatch& { return current = s2.next_batch(); };
    sgd_smooth(plain, m, cfg.smoothers[0], src, nullptr, 0.0);
    sgd_smooth(plain, m, cfg.smoothers[0], src, nullptr, 0.0);
    CHECK(flatten(plain).values() == flatten(h.levels[0].net).values());
    CHECK(m.values() == h.levels[0].momentum.values());
    CHECK(work.value() == 6.0);
  }

  TEST_CASE("identity transfers with gamma 0 reproduce consecutive SGD") {
    std::mt19937_64 rng(10);
    const Network net = random_network(rng, {2, 2, 4, 12});
    const SampleSet data = random_samples(rng, net, 60);
    const std::size_t k = 3, m = 2;
    Hierarchy h = make_hierarchy(net, 2, 10, m, {1.0, false, false}, 1);
    MinibatchScheduler sched(data, 6, 5), mirror(data, 6, 5);
    WorkCounter work;
    const CycleConfig cfg{{{0.02, 0.9, 1e-4, k}}, {1.0, 3, 1.0, 1.0, 0.0}};
    v_cycle(h, cfg, sched, work);
    CHECK(h.levels[0].to_coarser->interfaces[1].is_identity());

    Network plain = net;
    ParamVector mom(param_layout(net));
    std::vector<Minibatch> sequence;
    for (std::size_t i = 0; i < k; ++i) sequence.push_back(mirror.next_batch());
    const auto group = mirror.next_tau_group(m);
    for (std::size_t i = 0; i < k; ++i) sequence.push_back(group[i % m]);
    for (std::size_t i = 0; i < k; ++i) sequence.push_back(mirror.next_batch());
    std::size_t cursor = 0;
    const BatchSource src = [&]() -> const Minibatch& { return sequence[cursor++]; };
    SmootherConfig all = cfg.smoothers[0];
    all.steps = 3 * k;
    sgd_smooth(plain, mom, all, src, nullptr, 0.0);
    CHECK((flatten(plain).values() - flatten(h.levels[0].net).values()).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((mom.values() - h.levels[0].momentum.values()).lpNorm<Eigen::Infinity>() < 1e-12);
  }

  TEST_CASE("zero coarse steps leave only pre- and post-smoothing") {
    std::mt19937_64 rng(11);
    const Network net = random_network(rng, {2, 2, 6, 12});
    const SampleSet data = random_samples(rng, net, 50);
    Hierarchy h = make_hierarchy(net, 2, 10, 2, {-1.0, true, false}, 1);
    MinibatchScheduler sched(data, 5, 6), mirror(data, 5, 6);
    WorkCounter work;
    SmootherConfig fine{0.02, 0.9, 1e-4, 2};
    SmootherConfig coarse = fine;
    coarse.steps = 0;
    const CycleConfig cfg{{fine, coarse}, {1.41, 3, 1.0, 0.37, 0.125}};
    v_cycle(h, cfg, sched, work);
    CHECK(h.levels[0].to_coarser->interfaces[1].coarse_size < h.levels[0].to_coarser->interfaces[1].fine_size());

    Network plain = net;
    ParamVector mom(param_layout(net));
    Minibatch current;
    const BatchSource src = [&]() -> const Minibatch& { return current = mirror.next_batch(); };
    sgd_smooth(plain, mom, fine, src, nullptr, 0.0);
    mirror.next_tau_group(2);
    sgd_smooth(plain, mom, fine, src, nullptr, 0.0);
    CHECK(flatten(plain).values() == flatten(h.levels[0].net).values());
    CHECK(mom.values() == h.levels[0].momentum.values());
  }

  TEST_CASE("two-level cycle on a duplicated toy net matches a step-by-step trace") {
    std::mt19937_64 rng(12);
    const Network net = duplicated_toy(3);
    const SampleSet data = random_samples(rng, net, 24);
    const CoarseningOptions copts{0.999, true, false};
    Hierarchy h = make_hierarchy(net, 2, 10, 2, copts, 1);
    MinibatchScheduler sched(data, 4, 8), mirror(data, 4, 8);
    WorkCounter work;
    SmootherConfig fine{0.05, 0.9, 1e-3, 2};
    SmootherConfig coarse_cfg{0.05, 0.9, 1e-3, 3};
    const StabilityConfig stab{2.0, 3, 1.0, 0.2, 0.125};
    v_cycle(h, {{fine, coarse_cfg}, stab}, sched, work);

    Vector x = flatten(net).values();
    Vector m = Vector::Zero(x.size());
    for (int s = 0; s < 2; ++s) oracle_sgd(net, x, m, mirror.next_batch(), 0.05, 0.9, 1e-3);
    const Network smoothed = install(net, ParamVector(param_layout(net), x));
    const TransferLevel t = build_transfer_level(smoothed, copts);
    CHECK(t.interfaces[1].coarse_size == 2);
    const ExplicitOperators ops = explicit_operators(t);
    const Network coarse_shape = restrict_network(smoothed, t);
    Vector xc = ops.restrict_params * x;
    Vector mc = ops.restrict_params * m;
    const Vector xc0 = xc, mc0 = mc;
    const auto group = mirror.next_tau_group(2);
    Vector gc = Vector::Zero(xc.size()), gf = Vector::Zero(x.size());
    for (const auto& b : group) {
      gc += reference::gradient(coarse_shape, b).values();
      gf += reference::gradient(smoothed, b).values();
    }
    const double n_batches = static_cast<double>(mirror.batches_per_epoch());
    const Vector tau = (n_batches / 2.0) * (gc - ops.restrict_grad * gf);
    for (int s = 0; s < 3; ++s) {
      oracle_sgd(coarse_shape, xc, mc, group[static_cast<std::size_t>(s % 2)], 0.05 / 2.0, 0.9, 1e-3, &tau, 0.125);
    }
    x += 1.0 * (ops.prolong * (xc - xc0));
    m += 0.2 * (ops.prolong * (mc - mc0));
    for (int s = 0; s < 2; ++s) oracle_sgd(net, x, m, mirror.next_batch(), 0.05, 0.9, 1e-3);

    CHECK((flatten(h.levels[0].net).values() - x).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((h.levels[0].momentum.values() - m).lpNorm<Eigen::Infinity>() < 1e-12);
  }

  TEST_CASE("three-level cycles run and charge each level") {
    std::mt19937_64 rng(13);
    const Network net = random_network(rng, {2, 2, 16, 16});
    const SampleSet data = random_samples(rng, net, 64);
    Hierarchy h = make_hierarchy(net, 3, 2, 2, {-1.0, true, false}, 1);
    MinibatchScheduler sched(data, 8, 1);
    WorkCounter work;
    const CycleConfig cfg{{{0.01, 0.9, 0.0, 2}}, {1.41, 3, 1.0, 0.2, 0.125}};
    double last = 0.0;
    for (int c = 0; c < 5; ++c) {
      v_cycle(h, cfg, sched, work);
      CHECK(work.value() > last);
      last = work.value();
    }
    CHECK(h.cycle == 5);
    CHECK(h.levels[2].net.parameter_count() < h.levels[1].net.parameter_count());
    CHECK(h.levels[1].net.parameter_count() < h.levels[0].net.parameter_count());
  }

  TEST_CASE("matchings are kept between rematches") {
    std::mt19937_64 rng(14);
    const Network net = random_network(rng, {2, 2, 16, 16});
    const SampleSet data = random_samples(rng, net, 64);
    const CycleConfig cfg{{{0.01, 0.9, 0.0, 2}}, {1.41, 3, 1.0, 0.2, 0.125}};
    Hierarchy keep = make_hierarchy(net, 2, 1000, 2, {-1.0, true, false}, 1);
    Hierarchy redo = make_hierarchy(net, 2, 1, 2, {-1.0, true, false}, 1);
    MinibatchScheduler s1(data, 8, 1), s2(data, 8, 1);
    WorkCounter w1, w2;
    v_cycle(keep, cfg, s1, w1);
    const auto first = keep.levels[0].to_coarser->interfaces[1].p_weight;
    for (int c = 0; c < 3; ++c) v_cycle(keep, cfg, s1, w1);
    CHECK(keep.levels[0].to_coarser->interfaces[1].p_weight == first);
    for (int c = 0; c < 4; ++c) v_cycle(redo, cfg, s2, w2);
    CHECK(redo.levels[0].to_coarser->interfaces[1].p_weight != first);
  }

  TEST_CASE("per-level learning rates stop dividing after eta_depth levels") {
    const SmootherConfig base{0.01, 0.9, 0.0, 1};
    const StabilityConfig stab{2.0, 3, 1.0, 0.2, 0.125};
    CHECK(level_learning_rate(base, stab, 0) == 0.01);
    CHECK(level_learning_rate(base, stab, 1) == 0.005);
    CHECK(level_learning_rate(base, stab, 2) == 0.0025);
    CHECK(level_learning_rate(base, stab, 5) == 0.0025);
  }

  TEST_CASE("divergence guard stops training with a diagnostic") {
    std::mt19937_64 rng(15);
    const Network net = random_network(rng, {2, 2, 8, 8});
    const SampleSet data = random_samples(rng, net, 20);
    Hierarchy h = make_hierarchy(net, 2, 10, 2, {-1.0, true, false}, 1);
    MinibatchScheduler sched(data, 5, 1);
    WorkCounter work;
    const CycleConfig cfg{{{1e6, 0.9, 0.0, 4}}, {1.0, 3, 1.0, 0.2, 0.125}};
    bool tripped = false;
    try {
      for (int c = 0; c < 20; ++c) v_cycle(h, cfg, sched, work);
    } catch (const DivergenceError& e) {
      tripped = true;
      CHECK(std::string(e.what()).find("level") != std::string::npos);
    }
    CHECK(tripped);
  }

  TEST_CASE("configuration validation") {
    CHECK_THROWS_AS(validate(SmootherConfig{0.0, 0.9, 0.0, 1}), ConfigError);
    CHECK_THROWS_AS(validate(SmootherConfig{0.1, 1.0, 0.0, 1}), ConfigError);
    CHECK_THROWS_AS(validate(StabilityConfig{0.5, 3, 1.0, 0.2, 0.1}), ConfigError);
    CHECK_THROWS_AS(validate(StabilityConfig{1.0, 3, 0.0, 0.2, 0.1}), ConfigError);
    CHECK_THROWS_AS(validate(StabilityConfig{1.0, 3, 1.0, 0.2, 1.5}), ConfigError);
  }
}
