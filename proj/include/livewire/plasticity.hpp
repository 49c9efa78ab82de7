#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "livewire/propagation.hpp"
#include "livewire/rewiring.hpp"
#include "livewire/topology.hpp"

namespace livewire {

enum class CredibilityDecay {
  hyperbolic,   // eta_floor + (eta_new - eta_floor) * halflife / (halflife + age)
  exponential,  // eta_floor + (eta_new - eta_floor) * 2^(-age / halflife)
};

/// Per-edge learning rate as a function of edge age: high when the edge is
/// new, decaying towards eta_floor as the weight has seen more data.
struct CredibilitySchedule {
  double eta_new = 0.1;
  double eta_floor = 0.001;
  double halflife = 100.0;
  CredibilityDecay decay = CredibilityDecay::hyperbolic;
  CyclicSchedule global_scale = CyclicSchedule::constant(1.0);  // network-wide multiplier over steps

  void check() const;
};

/// Optional rate boost for edges whose smoothed |gradient| sits at or above a
/// percentile of all edges. The boosted rate never exceeds the age-0 rate.
struct GradientBoost {
  bool enabled = false;
  double factor = 2.0;
  double percentile = 0.9;
  double smoothing = 0.9;  // EMA coefficient on |gradient|
};

struct OptimizerConfig {
  double momentum_coeff = 0.9;
  CredibilitySchedule schedule;
  std::optional<double> gradient_clip;  // global-norm clip
  double norm_rate = 0.01;              // SGD rate of the norm scale/shift, times global_scale
  GradientBoost boost;

  void check() const;
};

/// Credibility-decayed rate before the global multiplier.
double credibility_rate(std::uint64_t age, const CredibilitySchedule& schedule);

/// global_scale(step) * credibility_rate(age).
double effective_rate(std::uint64_t age, std::uint64_t step, const CredibilitySchedule& schedule);

/// Smoothed |gradient| per edge, kept by the caller across steps when the
/// boost is enabled.
using BoostState = std::map<EdgeKey, double>;

struct UpdateReport {
  std::size_t applied = 0;
  std::vector<EdgeKey> stale;  // gradient entries with no matching edge
  std::size_t missing = 0;     // edges with no gradient entry (treated as zero)
  double mean_abs_update = 0.0;
  double gradient_norm = 0.0;  // before clipping
  bool clipped = false;
  std::size_t boosted = 0;
};

/// One optimizer step over every existing edge:
///   momentum <- momentum_coeff * momentum + g
///   weight   <- weight - effective_rate(age, step_index) * momentum
///   age      <- age + 1
/// Increments the network step counter. Edges absent from the network are
/// never touched, even when a stale gradient map mentions them.
UpdateReport step(Network& net, const GradientMap& grads, const OptimizerConfig& cfg, std::uint64_t step_index,
                  BoostState* boost_state = nullptr);

/// Plain SGD on the normalization scale and shift at norm_rate * global_scale.
void step_norm(Network& net, const NormGradients& grads, const OptimizerConfig& cfg, std::uint64_t step_index);

std::string to_string(CredibilityDecay d);
CredibilityDecay parse_credibility_decay(const std::string& text);

}  // namespace livewire
