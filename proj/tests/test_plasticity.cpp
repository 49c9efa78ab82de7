#include <doctest.h>

#include <cmath>

#include "livewire/error.hpp"
#include "livewire/plasticity.hpp"
#include "livewire/rng.hpp"
#include "oracles.hpp"

using namespace livewire;

namespace {

Network chain() {
  Network net({2, 2, 2});
  net.insert_edges(std::vector<Edge>{{{0, 0}, {1, 0}, 0.5, 0.0, 0},
                                     {{0, 1}, {1, 1}, -0.25, 0.0, 3},
                                     {{1, 0}, {2, 0}, 1.0, 0.0, 10},
                                     {{1, 1}, {2, 1}, 2.0, 0.0, 0}});
  return net;
}

GradientMap gradients_for(const Network& net, std::vector<double> values) {
  GradientMap g;
  g.topology_hash = net.topology_hash();
  for (const Edge& e : net.edges()) g.keys.push_back(e.key());
  g.values = std::move(values);
  return g;
}

}  // namespace

TEST_CASE("credibility rate decays from eta_new towards eta_floor") {
  CredibilitySchedule s;
  s.eta_new = 0.2;
  s.eta_floor = 0.02;
  s.halflife = 10.0;
  CHECK(credibility_rate(0, s) == doctest::Approx(0.2));
  CHECK(credibility_rate(10, s) == doctest::Approx(0.02 + 0.18 * 0.5));
  CHECK(credibility_rate(1000000, s) == doctest::Approx(0.02).epsilon(1e-3));
  s.decay = CredibilityDecay::exponential;
  CHECK(credibility_rate(10, s) == doctest::Approx(0.02 + 0.18 * 0.5));
  CHECK(credibility_rate(30, s) == doctest::Approx(0.02 + 0.18 * 0.125));
  for (std::uint64_t a = 0; a < 200; ++a) CHECK(credibility_rate(a + 1, s) <= credibility_rate(a, s));

  s.global_scale = {1.0, 3.0, 1.0, 2, 2};
  CHECK(effective_rate(10, 2, s) == doctest::Approx(3.0 * credibility_rate(10, s)));
}

TEST_CASE("step applies momentum, per-age rates and ages every edge") {
  Network net = chain();
  OptimizerConfig cfg;
  cfg.momentum_coeff = 0.5;
  cfg.schedule.eta_new = 0.1;
  cfg.schedule.eta_floor = 0.01;
  cfg.schedule.halflife = 5.0;
  const std::vector<double> g = {1.0, -2.0, 0.5, 0.0};
  const Network before = net;
  auto report = step(net, gradients_for(net, g), cfg, 0);
  CHECK(report.applied == 4);
  CHECK(report.stale.empty());
  CHECK(net.step_count() == 1);
  for (std::size_t i = 0; i < 4; ++i) {
    const Edge& was = before.edge(i);
    const double rate = credibility_rate(was.age, cfg.schedule);
    CHECK(net.edge(i).momentum == g[i]);
    CHECK(net.edge(i).weight == doctest::Approx(was.weight - rate * g[i]));
    CHECK(net.edge(i).age == was.age + 1);
  }

  const Network mid = net;
  step(net, gradients_for(net, g), cfg, 1);
  for (std::size_t i = 0; i < 4; ++i) {
    const double m = 0.5 * g[i] + g[i];
    CHECK(net.edge(i).momentum == doctest::Approx(m));
    CHECK(net.edge(i).weight == doctest::Approx(mid.edge(i).weight - credibility_rate(mid.edge(i).age, cfg.schedule) * m));
  }
}

TEST_CASE("stale gradient entries never touch the network") {
  Network net = chain();
  GradientMap g = gradients_for(net, {1.0, 1.0, 1.0, 1.0});
  net.remove_edges(std::vector<EdgeKey>{{{0, 1}, {1, 1}}});
  const EdgeKey ghost{{0, 1}, {1, 1}};
  const auto report = step(net, g, OptimizerConfig{}, 0);
  CHECK(report.stale == std::vector<EdgeKey>{ghost});
  CHECK(report.missing == 0);
  CHECK(report.applied == 3);
  CHECK_FALSE(net.has_edge(ghost));

  grow_edges(net, std::vector<EdgeKey>{{{0, 0}, {2, 1}}}, ZeroInit{});
  const auto r2 = step(net, g, OptimizerConfig{}, 1);
  CHECK(r2.missing == 1);
  CHECK(net.edge(*net.find({{0, 0}, {2, 1}})).weight == 0.0);
}

TEST_CASE("global-norm clipping rescales the gradient") {
  Network net = chain();
  OptimizerConfig cfg;
  cfg.momentum_coeff = 0.0;
  cfg.gradient_clip = 1.0;
  const auto report = step(net, gradients_for(net, {3.0, 4.0, 0.0, 0.0}), cfg, 0);
  CHECK(report.clipped);
  CHECK(report.gradient_norm == doctest::Approx(5.0));
  CHECK(net.edge(0).momentum == doctest::Approx(0.6));
  CHECK(net.edge(1).momentum == doctest::Approx(0.8));
}

TEST_CASE("boost raises rates of high-gradient edges up to the new-edge rate") {
  Network net = chain();
  OptimizerConfig cfg;
  cfg.momentum_coeff = 0.0;
  cfg.schedule.eta_new = 0.1;
  cfg.schedule.eta_floor = 0.01;
  cfg.schedule.halflife = 1.0;
  cfg.boost = {true, 100.0, 1.0, 0.0};
  BoostState state;
  const Network before = net;
  const auto report = step(net, gradients_for(net, {0.1, 0.2, 5.0, 0.3}), cfg, 0, &state);
  CHECK(report.boosted == 1);
  CHECK(state.size() == 4);
  // Edge 2 (age 10) is boosted but capped at eta_new.
  CHECK(net.edge(2).weight == doctest::Approx(before.edge(2).weight - 0.1 * 5.0));
  CHECK(net.edge(1).weight == doctest::Approx(before.edge(1).weight - credibility_rate(3, cfg.schedule) * 0.2));
  CHECK_THROWS_AS((OptimizerConfig{0.9, {}, std::nullopt, 0.0, {true, 0.5, 0.9, 0.9}}.check()), ConfigError);
}

TEST_CASE("norm parameters move by plain SGD") {
  Network net = chain();
  OptimizerConfig cfg;
  cfg.norm_rate = 0.5;
  NormGradients g{{{}, {1.0, -2.0}, {}}, {{}, {0.5, 0.0}, {}}};
  step_norm(net, g, cfg, 0);
  CHECK(net.norm(1).scale[0] == doctest::Approx(0.5));
  CHECK(net.norm(1).scale[1] == doctest::Approx(2.0));
  CHECK(net.norm(1).shift[0] == doctest::Approx(-0.25));
  NormGradients wrong{{{}, {1.0}, {}}, {{}, {1.0}, {}}};
  CHECK_THROWS_AS(step_norm(net, wrong, cfg, 0), ShapeError);
  cfg.norm_rate = 0.0;
  CHECK_NOTHROW(step_norm(net, wrong, cfg, 0));
}

TEST_CASE("non-finite gradients and bad configs are rejected") {
  Network net = chain();
  CHECK_THROWS_AS(step(net, gradients_for(net, {1.0, NAN, 0.0, 0.0}), OptimizerConfig{}, 0), NumericError);
  OptimizerConfig cfg;
  cfg.momentum_coeff = 1.0;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg = {};
  cfg.schedule.eta_floor = 1.0;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg = {};
  cfg.gradient_clip = 0.0;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  CHECK(parse_credibility_decay("exponential") == CredibilityDecay::exponential);
  CHECK_THROWS_AS(parse_credibility_decay("linear"), ConfigError);
}

TEST_CASE("one optimizer step matches plain SGD with momentum") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    Network net = oracle::random_net(rng);
    oracle::PlainSgd ref{oracle::DenseNet::from(net), {}, 0.05, 0.9, 0.0};
    OptimizerConfig cfg;
    cfg.momentum_coeff = 0.9;
    cfg.schedule.eta_new = cfg.schedule.eta_floor = 0.05;
    cfg.norm_rate = 0.0;
    for (int s = 0; s < 5; ++s) {
      const Batch b = oracle::random_batch(rng, net, 6, LossKind::softmax_cross_entropy);
      ActivationTrace t = forward(net, b, ForwardMode::train(0.0, 0));
      const Gradients g = backward(net, t, LossKind::softmax_cross_entropy);
      update_running_statistics(net, t);
      step(net, g.edges, cfg, s);
      ref.step(b, LossKind::softmax_cross_entropy);
    }
    for (const Edge& e : net.edges()) CHECK(e.weight == ref.net.w(e.key()));
  }
}
