#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "livewire/topology.hpp"

namespace livewire {

struct FanInScaled {};
struct FixedScale {
  double sigma = 0.1;  // half-width of the uniform draw
};
using WeightScaleRule = std::variant<FanInScaled, FixedScale>;

/// Initial sparse topology: density between layers i < j is
/// clamp(sparsity_hyperparameter * exp(branching_factor * (j - i)), 0, 1).
struct InitConfig {
  double sparsity_hyperparameter = 0.5;
  double branching_factor = -0.7;
  WeightScaleRule weight_scale_rule = FanInScaled{};
  std::uint64_t seed = 0;

  /// Throws ConfigError unless s0 in (0, 1] and branching_factor < 0.
  void check() const;
};

/// Edge probability for a layer difference.
double connection_density(const InitConfig& cfg, std::size_t layer_difference);

/// Builds a network whose edges exist independently with connection_density.
/// When `warnings` is given, it receives a note if some output node is
/// unreachable from the input layer.
Network init_network(const std::vector<std::size_t>& layer_widths, const InitConfig& cfg,
                     std::vector<std::string>* warnings = nullptr);

/// Output nodes with no directed path from any input node.
std::vector<NodeRef> unreachable_outputs(const Network& net);

}  // namespace livewire
