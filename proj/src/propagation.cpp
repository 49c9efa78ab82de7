#include "livewire/propagation.hpp"

#include <algorithm>
#include <cmath>

#include "livewire/error.hpp"
#include "livewire/rng.hpp"

namespace livewire {

Matrix ActivationTrace::outputs() const {
  const LayerTrace& out = layers.back();
  Matrix m(batch_size, out.pre_norm.rows());
  for (std::size_t v = 0; v < out.pre_norm.rows(); ++v)
    for (std::size_t s = 0; s < batch_size; ++s) m(s, v) = out.post_activation(v, s);
  return m;
}

bool dropout_keep(std::uint64_t seed, NodeRef node, std::size_t sample, double rate) {
  const std::uint64_t id = (std::uint64_t{node.layer} << 32) | node.index;
  return to_unit(mix_seed(seed, id, sample)) >= rate;
}

namespace {

void check_finite(const Matrix& m, std::size_t layer, const char* what) {
  for (std::size_t v = 0; v < m.rows(); ++v)
    for (std::size_t s = 0; s < m.cols(); ++s)
      if (!std::isfinite(m(v, s)))
        throw NumericError(std::string("non-finite ") + what + " at node " +
                           to_string(NodeRef{static_cast<std::uint32_t>(layer), static_cast<std::uint32_t>(v)}) +
                           " sample " + std::to_string(s));
}

void batch_moments(std::span<const double> x, double& mean, double& var) {
  double sum = 0.0;
  for (double v : x) sum += v;
  mean = sum / static_cast<double>(x.size());
  double sq = 0.0;
  for (double v : x) sq += (v - mean) * (v - mean);
  var = sq / static_cast<double>(x.size());
}

}  // namespace

ActivationTrace forward(const Network& net, const Batch& batch, const ForwardMode& mode) {
  const std::size_t B = batch.size();
  if (B == 0) throw ShapeError("empty batch");
  if (batch.inputs.cols() != net.width(0))
    throw ShapeError("batch has " + std::to_string(batch.inputs.cols()) + " input columns, network expects " +
                     std::to_string(net.width(0)));
  if (batch.targets.rows() != B || batch.targets.cols() != net.width(net.output_layer()))
    throw ShapeError("target shape does not match batch size and output width");
  if (mode.statistics == NormStatistics::batch && B < 2)
    throw ShapeError("batch statistics need at least 2 samples");
  if (!(mode.dropout_rate >= 0.0 && mode.dropout_rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");

  ActivationTrace trace;
  trace.topology_hash = net.topology_hash();
  trace.batch_size = B;
  trace.mode = mode;
  trace.targets = batch.targets;
  trace.layers.resize(net.layer_count());

  {
    LayerTrace& in = trace.layers[0];
    const std::size_t W = net.width(0);
    in.pre_norm = Matrix(W, B);
    for (std::size_t s = 0; s < B; ++s)
      for (std::size_t v = 0; v < W; ++v) in.pre_norm(v, s) = batch.inputs(s, v);
    check_finite(in.pre_norm, 0, "input");
    in.post_activation = in.pre_norm;
    in.normalized = Matrix(W, B);
    in.mean.resize(W);
    in.var.resize(W);
    in.inv_std.resize(W);
    for (std::size_t v = 0; v < W; ++v) {
      batch_moments(in.pre_norm.row(v), in.mean[v], in.var[v]);
      in.inv_std[v] = 1.0 / std::sqrt(in.var[v] + kNormEpsilon);
      for (std::size_t s = 0; s < B; ++s) in.normalized(v, s) = (in.pre_norm(v, s) - in.mean[v]) * in.inv_std[v];
    }
  }

  const double keep_scale = 1.0 / (1.0 - mode.dropout_rate);
  for (std::size_t l = 1; l < net.layer_count(); ++l) {
    LayerTrace& lt = trace.layers[l];
    const std::size_t W = net.width(l);
    lt.pre_norm = Matrix(W, B);
    for (std::uint32_t v = 0; v < W; ++v) {
      auto acc = lt.pre_norm.row(v);
      for (std::size_t ei : net.incoming({static_cast<std::uint32_t>(l), v})) {
        const Edge& e = net.edge(ei);
        const auto src = trace.layers[e.src.layer].post_activation.row(e.src.index);
        for (std::size_t s = 0; s < B; ++s) acc[s] += e.weight * src[s];
      }
    }
    check_finite(lt.pre_norm, l, "pre-activation");

    if (!net.is_hidden(l)) {
      lt.normalized = lt.pre_norm;
      lt.post_activation = lt.pre_norm;
      continue;
    }

    const LayerNorm& ln = net.norm(l);
    lt.normalized = Matrix(W, B);
    lt.post_activation = Matrix(W, B);
    lt.mean.resize(W);
    lt.var.resize(W);
    lt.inv_std.resize(W);
    const bool dropout = mode.dropout_rate > 0.0;
    if (dropout) lt.keep = Matrix(W, B);
    for (std::uint32_t v = 0; v < W; ++v) {
      if (mode.statistics == NormStatistics::batch) {
        batch_moments(lt.pre_norm.row(v), lt.mean[v], lt.var[v]);
      } else {
        lt.mean[v] = ln.running_mean[v];
        lt.var[v] = ln.running_var[v];
      }
      lt.inv_std[v] = 1.0 / std::sqrt(lt.var[v] + kNormEpsilon);
      for (std::size_t s = 0; s < B; ++s) {
        const double xhat = (lt.pre_norm(v, s) - lt.mean[v]) * lt.inv_std[v];
        lt.normalized(v, s) = xhat;
        double a = std::max(0.0, ln.scale[v] * xhat + ln.shift[v]);
        if (dropout) {
          const bool kept = dropout_keep(mode.dropout_seed, {static_cast<std::uint32_t>(l), v}, s, mode.dropout_rate);
          lt.keep(v, s) = kept ? keep_scale : 0.0;
          a *= lt.keep(v, s);
        }
        lt.post_activation(v, s) = a;
      }
    }
    check_finite(lt.post_activation, l, "activation");
  }
  return trace;
}

void update_running_statistics(Network& net, const ActivationTrace& trace) {
  if (trace.mode.statistics != NormStatistics::batch) return;
  if (trace.topology_hash != net.topology_hash()) throw ShapeError("trace does not match network topology");
  const double B = static_cast<double>(trace.batch_size);
  for (std::size_t l = 1; l + 1 < net.layer_count(); ++l) {
    LayerNorm& ln = net.norm(l);
    const LayerTrace& lt = trace.layers[l];
    for (std::size_t v = 0; v < ln.size(); ++v) {
      const double unbiased = lt.var[v] * B / (B - 1.0);
      ln.running_mean[v] = kRunningMomentum * ln.running_mean[v] + (1.0 - kRunningMomentum) * lt.mean[v];
      ln.running_var[v] = kRunningMomentum * ln.running_var[v] + (1.0 - kRunningMomentum) * unbiased;
    }
  }
}

std::optional<double> GradientMap::find(const EdgeKey& key) const {
  auto it = std::lower_bound(keys.begin(), keys.end(), key);
  if (it == keys.end() || *it != key) return std::nullopt;
  return values[static_cast<std::size_t>(it - keys.begin())];
}

LossResult loss_and_output_grad(const Matrix& outputs, const Matrix& targets, LossKind loss) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols())
    throw ShapeError("outputs and targets differ in shape");
  const std::size_t B = outputs.rows();
  const std::size_t W = outputs.cols();
  if (B == 0 || W == 0) throw ShapeError("empty outputs");
  LossResult r;
  r.output_grad = Matrix(B, W);
  const double inv_b = 1.0 / static_cast<double>(B);

  if (loss == LossKind::mean_squared_error) {
    const double n = static_cast<double>(B * W);
    double sum = 0.0;
    for (std::size_t s = 0; s < B; ++s)
      for (std::size_t v = 0; v < W; ++v) {
        const double d = outputs(s, v) - targets(s, v);
        sum += d * d;
        r.output_grad(s, v) = 2.0 * d / n;
      }
    r.loss = sum / n;
    return r;
  }

  double sum = 0.0;
  for (std::size_t s = 0; s < B; ++s) {
    const auto y = targets.row(s);
    int ones = 0;
    for (double t : y) {
      if (t == 1.0)
        ++ones;
      else if (t != 0.0)
        ones = -1000;
    }
    if (ones != 1) throw ShapeError("cross-entropy needs one-hot targets (row " + std::to_string(s) + ")");
    const auto z = outputs.row(s);
    const double m = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (double zi : z) denom += std::exp(zi - m);
    const double lse = m + std::log(denom);
    for (std::size_t v = 0; v < W; ++v) {
      if (y[v] == 1.0) sum += lse - z[v];
      r.output_grad(s, v) = (std::exp(z[v] - lse) - y[v]) * inv_b;
    }
  }
  r.loss = sum * inv_b;
  return r;
}

Gradients backward(const Network& net, ActivationTrace& trace, LossKind loss) {
  if (trace.topology_hash != net.topology_hash())
    throw ShapeError("trace was recorded on a different topology");
  if (trace.layers.size() != net.layer_count()) throw ShapeError("trace layer count mismatch");
  const std::size_t B = trace.batch_size;
  const double inv_b = 1.0 / static_cast<double>(B);

  const LossResult lr = loss_and_output_grad(trace.outputs(), trace.targets, loss);
  Gradients g;
  g.loss = lr.loss;
  g.norm.scale.resize(net.layer_count());
  g.norm.shift.resize(net.layer_count());

  const std::size_t out = net.output_layer();
  {
    LayerTrace& lt = trace.layers[out];
    lt.delta = Matrix(net.width(out), B);
    for (std::size_t v = 0; v < net.width(out); ++v)
      for (std::size_t s = 0; s < B; ++s) lt.delta(v, s) = lr.output_grad(s, v);
  }

  std::vector<double> da(B), dxhat(B);
  for (std::size_t l = out; l-- > 0;) {
    LayerTrace& lt = trace.layers[l];
    const std::size_t W = net.width(l);
    lt.delta = Matrix(W, B);
    const bool hidden = net.is_hidden(l);
    if (hidden) {
      g.norm.scale[l].assign(W, 0.0);
      g.norm.shift[l].assign(W, 0.0);
    }
    for (std::uint32_t v = 0; v < W; ++v) {
      std::fill(da.begin(), da.end(), 0.0);
      for (std::size_t ei : net.outgoing({static_cast<std::uint32_t>(l), v})) {
        const Edge& e = net.edge(ei);
        const auto dd = trace.layers[e.dst.layer].delta.row(e.dst.index);
        for (std::size_t s = 0; s < B; ++s) da[s] += e.weight * dd[s];
      }
      auto delta = lt.delta.row(v);
      if (!hidden) {
        std::copy(da.begin(), da.end(), delta.begin());
        continue;
      }

      const LayerNorm& ln = net.norm(l);
      const auto xhat = lt.normalized.row(v);
      double dscale = 0.0, dshift = 0.0;
      for (std::size_t s = 0; s < B; ++s) {
        double d = da[s];
        if (!lt.keep.empty()) d *= lt.keep(v, s);
        const double y = ln.scale[v] * xhat[s] + ln.shift[v];
        const double dy = y > 0.0 ? d : 0.0;
        dscale += dy * xhat[s];
        dshift += dy;
        dxhat[s] = ln.scale[v] * dy;
      }
      g.norm.scale[l][v] = dscale;
      g.norm.shift[l][v] = dshift;

      if (trace.mode.statistics == NormStatistics::running) {
        for (std::size_t s = 0; s < B; ++s) delta[s] = dxhat[s] * lt.inv_std[v];
      } else {
        double sum_d = 0.0, sum_dx = 0.0;
        for (std::size_t s = 0; s < B; ++s) {
          sum_d += dxhat[s];
          sum_dx += dxhat[s] * xhat[s];
        }
        for (std::size_t s = 0; s < B; ++s)
          delta[s] = lt.inv_std[v] * (dxhat[s] - inv_b * sum_d - inv_b * xhat[s] * sum_dx);
      }
    }
  }
  trace.has_deltas = true;

  g.edges.topology_hash = trace.topology_hash;
  g.edges.keys.reserve(net.edge_count());
  g.edges.values.reserve(net.edge_count());
  for (const Edge& e : net.edges()) {
    const auto dd = trace.layers[e.dst.layer].delta.row(e.dst.index);
    const auto src = trace.layers[e.src.layer].post_activation.row(e.src.index);
    double sum = 0.0;
    for (std::size_t s = 0; s < B; ++s) sum += dd[s] * src[s];
    g.edges.keys.push_back(e.key());
    g.edges.values.push_back(sum);
  }
  return g;
}

double accuracy(const Matrix& outputs, const Matrix& targets, std::size_t classes) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols())
    throw ShapeError("outputs and targets differ in shape");
  if (outputs.rows() == 0) return 0.0;
  const std::size_t W = classes == 0 ? outputs.cols() : std::min(classes, outputs.cols());
  std::size_t hits = 0;
  for (std::size_t s = 0; s < outputs.rows(); ++s) {
    const auto o = outputs.row(s);
    const auto t = targets.row(s);
    const auto pred = std::max_element(o.begin(), o.begin() + static_cast<std::ptrdiff_t>(W)) - o.begin();
    const auto truth = std::max_element(t.begin(), t.end()) - t.begin();
    if (pred == truth) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(outputs.rows());
}

std::string to_string(LossKind k) {
  return k == LossKind::softmax_cross_entropy ? "softmax-cross-entropy" : "mean-squared-error";
}

LossKind parse_loss_kind(const std::string& text) {
  if (text == "softmax-cross-entropy") return LossKind::softmax_cross_entropy;
  if (text == "mean-squared-error") return LossKind::mean_squared_error;
  throw ConfigError("unknown loss kind '" + text + "'");
}

}  // namespace livewire
