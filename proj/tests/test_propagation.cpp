#include <doctest.h>

#include <cmath>

#include "livewire/error.hpp"
#include "livewire/propagation.hpp"
#include "livewire/rng.hpp"
#include "oracles.hpp"

using namespace livewire;

namespace {

void check_matches_oracle(const Network& net, const Batch& b, const ForwardMode& mode) {
  const ActivationTrace t = forward(net, b, mode);
  const oracle::DenseNet d = oracle::DenseNet::from(net);
  const oracle::DenseTrace o =
      oracle::forward(d, b.inputs, mode.statistics == NormStatistics::batch, mode.dropout_rate, mode.dropout_seed);
  for (std::size_t l = 0; l < net.layer_count(); ++l)
    for (std::size_t v = 0; v < net.width(l); ++v)
      for (std::size_t s = 0; s < b.size(); ++s) {
        REQUIRE(t.layers[l].pre_norm(v, s) == o.pre[l](s, v));
        REQUIRE(t.layers[l].post_activation(v, s) == o.act[l](s, v));
      }
}

}  // namespace

TEST_CASE("forward matches the dense reference exactly") {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const Network net = oracle::random_net(rng);
    const Batch b = oracle::random_batch(rng, net, 2 + rng.below(7), LossKind::softmax_cross_entropy);
    check_matches_oracle(net, b, ForwardMode::train(0.0, 0));
    check_matches_oracle(net, b, ForwardMode::eval());
    check_matches_oracle(net, b, ForwardMode::train(0.3, 99 + trial));
  }
}

TEST_CASE("edge gradients match finite differences in both statistics modes") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Network net = oracle::random_net(rng);
    const LossKind kind = trial % 2 ? LossKind::mean_squared_error : LossKind::softmax_cross_entropy;
    const Batch b = oracle::random_batch(rng, net, 4 + rng.below(4), kind);
    for (bool batch_stats : {false, true}) {
      const ForwardMode mode = batch_stats ? ForwardMode::train(0.0, 0) : ForwardMode::eval();
      ActivationTrace t = forward(net, b, mode);
      const Gradients g = backward(net, t, kind);
      const oracle::DenseNet d = oracle::DenseNet::from(net);
      for (std::size_t i = 0; i < net.edge_count(); ++i) {
        const EdgeKey k = net.edge(i).key();
        const double fd = oracle::central_difference(
            d, [&](oracle::DenseNet& n) -> double& { return n.w(k); }, b, batch_stats, kind);
        if (std::isnan(fd)) continue;
        CHECK_MESSAGE(oracle::relative_error(g.edges.values[i], fd) < 1e-4, to_string(k));
      }
      for (std::size_t l = 1; l + 1 < net.layer_count(); ++l)
        for (std::size_t v = 0; v < net.width(l); ++v) {
          const double fs = oracle::central_difference(
              d, [&](oracle::DenseNet& n) -> double& { return n.scale[l][v]; }, b, batch_stats, kind);
          const double fh = oracle::central_difference(
              d, [&](oracle::DenseNet& n) -> double& { return n.shift[l][v]; }, b, batch_stats, kind);
          if (!std::isnan(fs)) CHECK(oracle::relative_error(g.norm.scale[l][v], fs) < 1e-4);
          if (!std::isnan(fh)) CHECK(oracle::relative_error(g.norm.shift[l][v], fh) < 1e-4);
        }
    }
  }
}

TEST_CASE("gradients with dropout match finite differences under a fixed mask") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Network net = oracle::random_net(rng);
    const Batch b = oracle::random_batch(rng, net, 6, LossKind::softmax_cross_entropy);
    const ForwardMode mode = ForwardMode::train(0.4, 1000 + trial);
    ActivationTrace t = forward(net, b, mode);
    const Gradients g = backward(net, t, LossKind::softmax_cross_entropy);
    const oracle::DenseNet d = oracle::DenseNet::from(net);
    for (std::size_t i = 0; i < net.edge_count(); ++i) {
      const EdgeKey k = net.edge(i).key();
      const double fd = oracle::central_difference(
          d, [&](oracle::DenseNet& n) -> double& { return n.w(k); }, b, true, LossKind::softmax_cross_entropy,
          mode.dropout_rate, mode.dropout_seed);
      if (!std::isnan(fd)) CHECK(oracle::relative_error(g.edges.values[i], fd) < 1e-4);
    }
  }
}

TEST_CASE("backward agrees with the dense reference exactly") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Network net = oracle::random_net(rng);
    const Batch b = oracle::random_batch(rng, net, 5, LossKind::softmax_cross_entropy);
    ActivationTrace t = forward(net, b, ForwardMode::train(0.2, trial));
    const Gradients g = backward(net, t, LossKind::softmax_cross_entropy);
    const oracle::DenseNet d = oracle::DenseNet::from(net);
    const auto o = oracle::backward(d, oracle::forward(d, b.inputs, true, 0.2, trial), b.targets,
                                    LossKind::softmax_cross_entropy, true);
    CHECK(g.loss == o.loss);
    for (std::size_t i = 0; i < net.edge_count(); ++i) CHECK(g.edges.values[i] == o.edge.at(net.edge(i).key()));
  }
}

TEST_CASE("dropout keeps the expected fraction and preserves the mean") {
  const double rate = 0.3;
  std::size_t kept = 0, total = 0;
  for (std::uint32_t node = 0; node < 50; ++node)
    for (std::size_t s = 0; s < 400; ++s) {
      kept += dropout_keep(77, {1, node}, s, rate);
      ++total;
    }
  const double n = static_cast<double>(total);
  CHECK(std::abs(static_cast<double>(kept) - n * (1.0 - rate)) < 4.0 * std::sqrt(n * rate * (1.0 - rate)));

  // Inverted scaling keeps E[activation] unchanged: mean over samples of the
  // mask multiplier approaches 1.
  Network net({1, 1, 1});
  net.insert_edges(std::vector<Edge>{{{0, 0}, {1, 0}, 1.0, 0.0, 0}, {{1, 0}, {2, 0}, 1.0, 0.0, 0}});
  Batch b{Matrix(4000, 1), Matrix(4000, 1)};
  for (std::size_t s = 0; s < 4000; ++s) b.inputs(s, 0) = s % 2 ? 1.0 : -1.0;
  const auto plain = forward(net, b, ForwardMode::train(0.0, 5));
  const auto dropped = forward(net, b, ForwardMode::train(rate, 5));
  double m0 = 0.0, m1 = 0.0;
  for (std::size_t s = 0; s < 4000; ++s) {
    m0 += plain.layers[1].post_activation(0, s);
    m1 += dropped.layers[1].post_activation(0, s);
  }
  CHECK(std::abs(m1 / m0 - 1.0) < 0.06);
}

TEST_CASE("dropout masks do not depend on topology") {
  Rng rng(9);
  Network a({3, 4, 2});
  Network b = a;
  a.insert_edges(std::vector<Edge>{{{0, 0}, {1, 1}, 0.5, 0.0, 0}});
  b.insert_edges(std::vector<Edge>{{{0, 2}, {1, 1}, -0.5, 0.0, 0}, {{1, 3}, {2, 0}, 0.1, 0.0, 0}});
  const Batch batch = oracle::random_batch(rng, a, 8, LossKind::softmax_cross_entropy);
  const auto ta = forward(a, batch, ForwardMode::train(0.5, 123));
  const auto tb = forward(b, batch, ForwardMode::train(0.5, 123));
  CHECK(ta.layers[1].keep == tb.layers[1].keep);
}

TEST_CASE("eval mode uses running statistics and no dropout") {
  Network net({1, 1, 1});
  net.insert_edges(std::vector<Edge>{{{0, 0}, {1, 0}, 2.0, 0.0, 0}, {{1, 0}, {2, 0}, 1.0, 0.0, 0}});
  net.norm(1).running_mean[0] = 1.0;
  net.norm(1).running_var[0] = 4.0;
  net.norm(1).scale[0] = 3.0;
  net.norm(1).shift[0] = 0.5;
  Batch b{Matrix(2, 1), Matrix(2, 1)};
  b.inputs(0, 0) = 1.5;
  b.inputs(1, 0) = -1.0;
  const auto t = forward(net, b, ForwardMode::eval());
  const double inv = 1.0 / std::sqrt(4.0 + kNormEpsilon);
  CHECK(t.outputs()(0, 0) == doctest::Approx(std::max(0.0, 3.0 * (3.0 - 1.0) * inv + 0.5)));
  CHECK(t.outputs()(1, 0) == doctest::Approx(std::max(0.0, 3.0 * (-2.0 - 1.0) * inv + 0.5)));
  CHECK(t.layers[1].keep.empty());
}

TEST_CASE("running statistics fold with momentum and unbiased variance") {
  Network net({1, 1, 1});
  net.insert_edges(std::vector<Edge>{{{0, 0}, {1, 0}, 1.0, 0.0, 0}});
  Batch b{Matrix(4, 1), Matrix(4, 1)};
  const double xs[] = {1.0, 2.0, 3.0, 6.0};
  for (int s = 0; s < 4; ++s) b.inputs(s, 0) = xs[s];
  const auto t = forward(net, b, ForwardMode::train(0.0, 0));
  update_running_statistics(net, t);
  const double mean = 3.0;
  const double unbiased = ((4.0 + 1.0 + 0.0 + 9.0) / 3.0);
  CHECK(net.norm(1).running_mean[0] == doctest::Approx(0.9 * 0.0 + 0.1 * mean));
  CHECK(net.norm(1).running_var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * unbiased));

  const Network frozen = net;
  update_running_statistics(net, forward(net, b, ForwardMode::eval()));
  CHECK(net == frozen);
}

TEST_CASE("losses and their output gradients") {
  Matrix out(2, 3), y(2, 3);
  out(0, 0) = 1000.0;
  out(0, 1) = -1000.0;
  out(1, 2) = 0.5;
  y(0, 0) = 1.0;
  y(1, 1) = 1.0;
  const LossResult ce = loss_and_output_grad(out, y, LossKind::softmax_cross_entropy);
  CHECK(std::isfinite(ce.loss));
  const double row1 = std::log(2.0 + std::exp(0.5)) - 0.0;
  CHECK(ce.loss == doctest::Approx((0.0 + row1) / 2.0));
  for (std::size_t s = 0; s < 2; ++s) {
    double sum = 0.0;
    for (std::size_t v = 0; v < 3; ++v) sum += ce.output_grad(s, v);
    CHECK(std::abs(sum) < 1e-15);
  }

  Matrix t(2, 3);
  const LossResult mse = loss_and_output_grad(out, t, LossKind::mean_squared_error);
  CHECK(mse.loss == doctest::Approx((1e6 + 1e6 + 0.25) / 6.0));
  CHECK(mse.output_grad(1, 2) == doctest::Approx(2.0 * 0.5 / 6.0));

  Matrix soft(2, 3);
  soft(0, 0) = 0.5;
  soft(0, 1) = 0.5;
  soft(1, 0) = 1.0;
  CHECK_THROWS_AS(loss_and_output_grad(out, soft, LossKind::softmax_cross_entropy), ShapeError);
}

TEST_CASE("shape and numeric errors") {
  Network net({2, 2, 2});
  net.insert_edges(std::vector<Edge>{{{0, 0}, {1, 0}, 1.0, 0.0, 0}, {{1, 0}, {2, 0}, 1.0, 0.0, 0}});
  CHECK_THROWS_AS(forward(net, Batch{Matrix(3, 3), Matrix(3, 2)}, ForwardMode::eval()), ShapeError);
  CHECK_THROWS_AS(forward(net, Batch{Matrix(3, 2), Matrix(3, 1)}, ForwardMode::eval()), ShapeError);
  CHECK_THROWS_AS(forward(net, Batch{Matrix(1, 2), Matrix(1, 2)}, ForwardMode::train(0.0, 0)), ShapeError);
  CHECK_NOTHROW(forward(net, Batch{Matrix(1, 2), Matrix(1, 2)}, ForwardMode::eval()));

  Batch bad{Matrix(2, 2), Matrix(2, 2)};
  bad.inputs(1, 0) = 1e308;
  net.edge(0).weight = 1e308;
  try {
    forward(net, bad, ForwardMode::eval());
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("1:0") != std::string::npos);
  }

  Network other({2, 2, 2});
  Batch b{Matrix(2, 2), Matrix(2, 2)};
  b.targets(0, 0) = 1.0;
  b.targets(1, 1) = 1.0;
  net.edge(0).weight = 1.0;
  ActivationTrace t = forward(net, b, ForwardMode::train(0.0, 0));
  CHECK_THROWS_AS(backward(other, t, LossKind::softmax_cross_entropy), ShapeError);
}

TEST_CASE("isolated hidden nodes stay finite") {
  Network net({2, 3, 2});
  net.insert_edges(std::vector<Edge>{{{0, 0}, {2, 0}, 1.0, 0.0, 0}});
  Rng rng(1);
  const Batch b = oracle::random_batch(rng, net, 4, LossKind::softmax_cross_entropy);
  ActivationTrace t = forward(net, b, ForwardMode::train(0.0, 0));
  for (std::size_t s = 0; s < 4; ++s) CHECK(t.layers[1].post_activation(0, s) == 0.0);
  const Gradients g = backward(net, t, LossKind::softmax_cross_entropy);
  CHECK(std::isfinite(g.edges.values[0]));
}

TEST_CASE("accuracy with restricted classes") {
  Matrix out(3, 3), y(3, 3);
  out(0, 0) = 2.0;
  out(1, 2) = 5.0;
  out(1, 1) = 1.0;
  out(2, 2) = 9.0;
  out(2, 0) = 1.0;
  y(0, 0) = 1.0;
  y(1, 1) = 1.0;
  y(2, 0) = 1.0;
  CHECK(accuracy(out, y) == doctest::Approx(1.0 / 3.0));
  CHECK(accuracy(out, y, 2) == doctest::Approx(1.0));
}
