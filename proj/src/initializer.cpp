#include "livewire/initializer.hpp"

#include <algorithm>
#include <cmath>

#include "livewire/error.hpp"
#include "livewire/rng.hpp"

namespace livewire {

void InitConfig::check() const {
  if (!(sparsity_hyperparameter > 0.0 && sparsity_hyperparameter <= 1.0))
    throw ConfigError("sparsity_hyperparameter must lie in (0, 1]");
  if (!(branching_factor < 0.0))
    throw ConfigError("branching_factor must be negative so density shrinks with layer distance");
  if (const auto* fixed = std::get_if<FixedScale>(&weight_scale_rule); fixed && !(fixed->sigma > 0.0))
    throw ConfigError("fixed weight scale must be positive");
}

double connection_density(const InitConfig& cfg, std::size_t layer_difference) {
  const double p =
      cfg.sparsity_hyperparameter * std::exp(cfg.branching_factor * static_cast<double>(layer_difference));
  return std::clamp(p, 0.0, 1.0);
}

Network init_network(const std::vector<std::size_t>& layer_widths, const InitConfig& cfg,
                     std::vector<std::string>* warnings) {
  cfg.check();
  if (layer_widths.size() < 2) throw ConfigError("a network needs at least 2 layers");
  for (auto w : layer_widths)
    if (w == 0) throw ConfigError("layer widths must be positive");

  Network net(layer_widths);
  Rng structure(mix_seed(cfg.seed, 1));
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < layer_widths.size(); ++i) {
    for (std::size_t j = i + 1; j < layer_widths.size(); ++j) {
      const double p = connection_density(cfg, j - i);
      for (std::size_t a = 0; a < layer_widths[i]; ++a) {
        for (std::size_t b = 0; b < layer_widths[j]; ++b) {
          if (!structure.bernoulli(p)) continue;
          Edge e;
          e.src = {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(a)};
          e.dst = {static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(b)};
          edges.push_back(e);
        }
      }
    }
  }
  net.insert_edges(edges);

  // Weights are drawn after the structure so fan-in is the realized in-degree.
  Rng weights(mix_seed(cfg.seed, 2));
  for (std::size_t i = 0; i < net.edge_count(); ++i) {
    Edge& e = net.edge(i);
    double bound = 0.0;
    if (const auto* fixed = std::get_if<FixedScale>(&cfg.weight_scale_rule)) {
      bound = fixed->sigma;
    } else {
      const auto fan_in = std::max<std::size_t>(1, net.incoming(e.dst).size());
      bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    }
    e.weight = weights.uniform(-bound, bound);
  }

  if (warnings) {
    const auto lost = unreachable_outputs(net);
    if (!lost.empty())
      warnings->push_back(std::to_string(lost.size()) +
                          " output node(s) unreachable from the input layer; livewiring must grow them");
  }
  return net;
}

std::vector<NodeRef> unreachable_outputs(const Network& net) {
  std::vector<std::vector<char>> reached(net.layer_count());
  for (std::size_t l = 0; l < net.layer_count(); ++l) reached[l].assign(net.width(l), l == 0);
  for (std::size_t l = 0; l + 1 < net.layer_count(); ++l) {
    for (std::uint32_t i = 0; i < net.width(l); ++i) {
      if (!reached[l][i]) continue;
      for (auto ei : net.outgoing({static_cast<std::uint32_t>(l), i})) {
        const NodeRef d = net.edge(ei).dst;
        reached[d.layer][d.index] = 1;
      }
    }
  }
  std::vector<NodeRef> lost;
  const auto out = static_cast<std::uint32_t>(net.output_layer());
  for (std::uint32_t i = 0; i < net.width(out); ++i)
    if (!reached[out][i]) lost.push_back({out, i});
  return lost;
}

}  // namespace livewire
