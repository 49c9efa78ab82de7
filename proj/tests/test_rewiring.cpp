#include <doctest.h>

#include <cmath>
#include <set>

#include "livewire/error.hpp"
#include "livewire/rewiring.hpp"
#include "livewire/rng.hpp"
#include "oracles.hpp"

using namespace livewire;

namespace {

ActivationTrace traced(const Network& net, const Batch& b, LossKind kind, const ForwardMode& mode) {
  ActivationTrace t = forward(net, b, mode);
  backward(net, t, kind);
  return t;
}

std::vector<NodeRef> nodes_of(const ActivationQueue& q) {
  std::vector<NodeRef> out;
  for (const auto& e : q.entries) out.push_back(e.node);
  return out;
}

}  // namespace

TEST_CASE("cyclic schedule ramps up, decays and holds") {
  const CyclicSchedule s{2.0, 10.0, 1.0, 4, 6};
  CHECK(cyclic_rate(0, s) == 2.0);
  CHECK(cyclic_rate(2, s) == doctest::Approx(6.0));
  CHECK(cyclic_rate(4, s) == 10.0);
  CHECK(cyclic_rate(7, s) == doctest::Approx(10.0 - 9.0 * 3.0 / 6.0));
  CHECK(cyclic_rate(10, s) == doctest::Approx(1.0));
  CHECK(cyclic_rate(1000, s) == 1.0);
  CHECK(cyclic_rate(5, CyclicSchedule::constant(3.0)) == 3.0);
  CHECK_THROWS_AS(cyclic_rate(0, CyclicSchedule{0, 1, 0, 0, 5}), ConfigError);
}

TEST_CASE("queue, candidates, top-K and prune agree with brute force") {
  Rng rng(11);
  for (int trial = 0; trial < 150; ++trial) {
    const Network net = oracle::random_net(rng);
    const Batch b = oracle::random_batch(rng, net, 3 + rng.below(5), LossKind::softmax_cross_entropy);
    const ActivationTrace t = traced(net, b, LossKind::softmax_cross_entropy, ForwardMode::train(0.0, 0));
    RewireConfig cfg;
    cfg.queue_capacity = 1 + rng.below(12);
    cfg.min_layer_gap = 1 + static_cast<std::uint32_t>(rng.below(2));
    cfg.growth = CyclicSchedule::constant(static_cast<double>(rng.below(6)));
    cfg.prune_ratio = CyclicSchedule::constant(rng.uniform(0.0, 2.0));

    const ActivationQueue q = collect_queue(t, cfg.queue_capacity);
    REQUIRE(nodes_of(q) == oracle::queue_nodes(t, cfg.queue_capacity));
    const auto pairs = enumerate_candidates(q, net, cfg);
    REQUIRE(pairs == oracle::candidates(net, nodes_of(q), cfg.min_layer_gap));

    const RewirePlan plan = plan_rewire(net, t, cfg, 0);
    const auto k = static_cast<std::size_t>(cyclic_rate(0, cfg.growth));
    const auto expected_grow = oracle::top_k(score_candidates(pairs, t, cfg), k);
    REQUIRE(plan.to_grow == expected_grow);
    const std::size_t prune_count = std::min<std::size_t>(
        net.edge_count(), static_cast<std::size_t>(std::lround(cyclic_rate(0, cfg.prune_ratio) * expected_grow.size())));
    std::vector<EdgeKey> planned;
    for (const Edge& e : plan.to_prune) planned.push_back(e.key());
    std::sort(planned.begin(), planned.end());
    REQUIRE(planned == oracle::smallest(net, prune_count, {}));
  }
}

TEST_CASE("candidate score equals the gradient of a grown zero-weight edge") {
  Rng rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    Network net = oracle::random_net(rng, {3, 4, 2, 5, 0.3, 40});
    const LossKind kind = trial % 2 ? LossKind::mean_squared_error : LossKind::softmax_cross_entropy;
    const Batch b = oracle::random_batch(rng, net, 4 + rng.below(4), kind);
    const ForwardMode mode = trial % 3 ? ForwardMode::train(0.25, trial) : ForwardMode::eval();
    const ActivationTrace t = traced(net, b, kind, mode);
    RewireConfig cfg;
    cfg.queue_capacity = 1000;
    const auto pairs = enumerate_candidates(collect_queue(t, cfg.queue_capacity), net, cfg);
    const auto scored = score_candidates(pairs, t, cfg);
    if (scored.empty()) continue;
    const ScoredPair& sp = scored[rng.below(scored.size())];

    Network grown = net;
    grow_edges(grown, std::vector<EdgeKey>{sp.pair}, ZeroInit{});
    ActivationTrace t2 = forward(grown, b, mode);
    const Gradients g = backward(grown, t2, kind);
    const double actual = *g.edges.find(sp.pair);
    CHECK(std::abs(sp.gradient - actual) <= 1e-10);
    CHECK(sp.score == doctest::Approx(std::abs(actual)).epsilon(1e-12));
  }
}

TEST_CASE("distance preference scales scores by layer difference") {
  Rng rng(13);
  const Network net = oracle::random_net(rng, {4, 4, 3, 3, 0.2, 20});
  const Batch b = oracle::random_batch(rng, net, 5, LossKind::softmax_cross_entropy);
  const ActivationTrace t = traced(net, b, LossKind::softmax_cross_entropy, ForwardMode::train(0.0, 0));
  RewireConfig plain, far;
  plain.queue_capacity = far.queue_capacity = 100;
  far.distance_preference = 0.5;
  const auto pairs = enumerate_candidates(collect_queue(t, 100), net, plain);
  const auto a = score_candidates(pairs, t, plain);
  const auto c = score_candidates(pairs, t, far);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(c[i].score == doctest::Approx(a[i].score * std::exp(0.5 * (pairs[i].dst.layer - pairs[i].src.layer))));
}

TEST_CASE("growth beyond the candidate count is clipped with a note") {
  Network net({2, 2});
  Batch b{Matrix(3, 2), Matrix(3, 2)};
  for (std::size_t s = 0; s < 3; ++s) {
    b.inputs(s, 0) = static_cast<double>(s);
    b.inputs(s, 1) = -static_cast<double>(s) * 0.5;
    b.targets(s, s % 2) = 1.0;
  }
  const ActivationTrace t = traced(net, b, LossKind::softmax_cross_entropy, ForwardMode::train(0.0, 0));
  RewireConfig cfg;
  cfg.queue_capacity = 4;
  cfg.output_signal = OutputQueueSignal::target;
  cfg.growth = CyclicSchedule::constant(100.0);
  const RewirePlan plan = plan_rewire(net, t, cfg, 0);
  CHECK(plan.to_grow.size() == 4);
  REQUIRE(plan.notes.size() == 2);
  CHECK(plan.notes[0].find("growth K=100 clipped to 4") != std::string::npos);
  CHECK(plan.notes[1].find("prune count 4 clipped to 0") != std::string::npos);
}

TEST_CASE("inadmissible candidates are dropped") {
  Network net({2, 2, 2});
  net.insert_edges(std::vector<Edge>{{{0, 0}, {1, 0}, 0.5, 0.0, 0}});
  RewireConfig cfg;
  cfg.growth = CyclicSchedule::constant(5.0);
  std::vector<ScoredPair> c = {{{{0, 0}, {1, 0}}, 9.0, 0.0},
                               {{{1, 1}, {1, 0}}, 8.0, 0.0},
                               {{{0, 1}, {2, 1}}, 1.0, 0.0},
                               {{{0, 1}, {2, 1}}, 1.0, 0.0},
                               {{{0, 5}, {2, 1}}, 7.0, 0.0}};
  const RewirePlan plan = plan_from_candidates(net, c, cfg, 0);
  CHECK(plan.to_grow == std::vector<EdgeKey>{{{0, 1}, {2, 1}}});
  CHECK(plan.notes.size() == 5);
}

TEST_CASE("rewiring keeps every invariant across fuzzed rounds") {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    Network net = oracle::random_net(rng);
    RewireConfig cfg;
    cfg.queue_capacity = 2 + rng.below(10);
    cfg.min_layer_gap = 1 + static_cast<std::uint32_t>(rng.below(2));
    cfg.growth = {1.0, 6.0, 2.0, 5, 10};
    cfg.prune_ratio = {0.5, 1.5, 1.0, 3, 10};
    cfg.new_edge_init = trial % 2 ? NewEdgeInit::scaled_random : NewEdgeInit::zero;
    cfg.output_signal = trial % 3 == 0 ? OutputQueueSignal::target : OutputQueueSignal::none;
    cfg.scoring = trial % 4 == 1 ? Scoring::gradient_free : Scoring::gradient;
    cfg.seed = trial;
    for (std::uint64_t step = 0; step < 30; ++step) {
      const Batch b = oracle::random_batch(rng, net, 4, LossKind::softmax_cross_entropy);
      const ActivationTrace t = traced(net, b, LossKind::softmax_cross_entropy, ForwardMode::train(0.1, step));
      const std::size_t before = net.edge_count();
      const RewirePlan plan = plan_rewire(net, t, cfg, step);
      const MutationReport r = apply_plan(net, plan, cfg);
      REQUIRE(validate(net).empty());
      CHECK(r.edge_count == before + r.grown.size() - r.pruned.size());
      for (const EdgeKey& k : r.grown) CHECK(net.has_edge(k));
      if (cfg.new_edge_init == NewEdgeInit::zero)
        for (const EdgeKey& k : r.grown) CHECK(net.edge(*net.find(k)).weight == 0.0);
    }
  }
}

TEST_CASE("plan_rewire rejects stale traces and gradient scoring without deltas") {
  Rng rng(15);
  Network net = oracle::random_net(rng);
  const Batch b = oracle::random_batch(rng, net, 4, LossKind::softmax_cross_entropy);
  const ActivationTrace fwd_only = forward(net, b, ForwardMode::train(0.0, 0));
  RewireConfig cfg;
  CHECK_THROWS_AS(plan_rewire(net, fwd_only, cfg, 0), ConfigError);
  cfg.scoring = Scoring::gradient_free;
  CHECK_NOTHROW(plan_rewire(net, fwd_only, cfg, 0));
  net.extend_layer(1, 1);
  CHECK_THROWS_AS(plan_rewire(net, fwd_only, cfg, 0), ShapeError);
  CHECK_THROWS_AS(collect_queue(fwd_only, 0), ConfigError);
}

TEST_CASE("gradient-free scoring multiplies endpoint strengths") {
  Rng rng(16);
  const Network net = oracle::random_net(rng, {3, 3, 3, 4, 0.3, 30});
  const Batch b = oracle::random_batch(rng, net, 6, LossKind::softmax_cross_entropy);
  const ActivationTrace t = forward(net, b, ForwardMode::train(0.0, 0));
  RewireConfig cfg;
  cfg.scoring = Scoring::gradient_free;
  const auto all = oracle::all_strengths(t);
  auto strength = [&](NodeRef n) {
    for (const auto& e : all)
      if (e.node == n) return e.strength;
    return 0.0;
  };
  const auto pairs = enumerate_candidates(collect_queue(t, 100), net, cfg);
  for (const auto& sp : score_candidates(pairs, t, cfg))
    CHECK(sp.score == doctest::Approx(strength(sp.pair.src) * strength(sp.pair.dst)));
}

TEST_CASE("target signal and batch statistics feed the queue") {
  Rng rng(17);
  const Network net = oracle::random_net(rng, {3, 3, 3, 4, 0.5, 40});
  Batch b = oracle::random_batch(rng, net, 8, LossKind::softmax_cross_entropy);
  for (std::size_t v = 0; v < b.targets.cols(); ++v) b.targets(0, v) = v == 0 ? 1.0 : 0.0;
  for (std::size_t s = 1; s < 8; ++s) {
    for (std::size_t v = 0; v < b.targets.cols(); ++v) b.targets(s, v) = 0.0;
    b.targets(s, 1) = 1.0;
  }
  const ActivationTrace t = forward(net, b, ForwardMode::eval());
  const auto with = node_strengths(t, StrengthAggregate::mean, OutputQueueSignal::target);
  const auto without = node_strengths(t, StrengthAggregate::mean, OutputQueueSignal::none);
  const std::size_t outputs = net.width(net.output_layer());
  REQUIRE(with.size() == without.size() + outputs);
  // A column that is 1 on one sample of 8 standardizes to mean |z| = 2*sqrt(7)/8.
  const double expected = 2.0 * std::sqrt(7.0) / 8.0;
  CHECK(with[without.size()].strength == doctest::Approx(expected).epsilon(1e-4));
  CHECK(with[without.size() + 1].strength == doctest::Approx(expected).epsilon(1e-4));
  if (outputs > 2) CHECK(with[without.size() + 2].strength == 0.0);

  // Re-standardized hidden strengths match a batch-statistics pass.
  const auto batch_view = node_strengths(t, StrengthAggregate::mean, OutputQueueSignal::none, QueueStatistics::batch);
  const ActivationTrace tb = forward(net, b, ForwardMode::train(0.0, 0));
  const auto reference = oracle::all_strengths(tb);
  for (std::size_t i = 0; i < reference.size(); ++i)
    CHECK(batch_view[i].strength == doctest::Approx(reference[i].strength).epsilon(1e-12));

  const auto maxed = node_strengths(t, StrengthAggregate::max, OutputQueueSignal::none);
  for (std::size_t i = 0; i < maxed.size(); ++i) CHECK(maxed[i].strength >= without[i].strength);
}
