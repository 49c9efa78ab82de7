#include "livewire/plasticity.hpp"

#include <algorithm>
#include <cmath>

#include "livewire/error.hpp"

namespace livewire {

void CredibilitySchedule::check() const {
  if (!(eta_new > 0.0)) throw ConfigError("eta_new must be positive");
  if (!(eta_floor >= 0.0 && eta_floor <= eta_new)) throw ConfigError("eta_floor must lie in [0, eta_new]");
  if (!(halflife > 0.0)) throw ConfigError("halflife must be positive");
  global_scale.check();
}

void OptimizerConfig::check() const {
  if (!(momentum_coeff >= 0.0 && momentum_coeff < 1.0)) throw ConfigError("momentum_coeff must lie in [0, 1)");
  if (gradient_clip && !(*gradient_clip > 0.0)) throw ConfigError("gradient_clip must be positive");
  if (!(norm_rate >= 0.0)) throw ConfigError("norm_rate must be non-negative");
  if (boost.enabled) {
    if (!(boost.factor >= 1.0)) throw ConfigError("boost_factor must be at least 1");
    if (!(boost.percentile >= 0.0 && boost.percentile <= 1.0)) throw ConfigError("boost_percentile must lie in [0, 1]");
    if (!(boost.smoothing >= 0.0 && boost.smoothing < 1.0)) throw ConfigError("boost_smoothing must lie in [0, 1)");
  }
  schedule.check();
}

double credibility_rate(std::uint64_t age, const CredibilitySchedule& s) {
  const double a = static_cast<double>(age);
  const double span = s.eta_new - s.eta_floor;
  if (s.decay == CredibilityDecay::exponential) return s.eta_floor + span * std::exp2(-a / s.halflife);
  return s.eta_floor + span * (s.halflife / (s.halflife + a));
}

double effective_rate(std::uint64_t age, std::uint64_t step, const CredibilitySchedule& s) {
  return cyclic_rate(step, s.global_scale) * credibility_rate(age, s);
}

UpdateReport step(Network& net, const GradientMap& grads, const OptimizerConfig& cfg, std::uint64_t step_index,
                  BoostState* boost_state) {
  UpdateReport report;
  const std::size_t E = net.edge_count();

  // Resolve gradients per edge. A fresh map is aligned with the edge vector.
  std::vector<double> g(E, 0.0);
  const bool aligned = grads.topology_hash == net.topology_hash() && grads.size() == E;
  if (aligned) {
    for (std::size_t i = 0; i < E; ++i) g[i] = grads.values[i];
  } else {
    std::vector<char> matched(E, 0);
    for (std::size_t k = 0; k < grads.size(); ++k) {
      const auto idx = net.find(grads.keys[k]);
      if (!idx) {
        report.stale.push_back(grads.keys[k]);
        continue;
      }
      g[*idx] = grads.values[k];
      matched[*idx] = 1;
    }
    report.missing = static_cast<std::size_t>(std::count(matched.begin(), matched.end(), 0));
  }

  double sq = 0.0;
  for (std::size_t i = 0; i < E; ++i) {
    if (!std::isfinite(g[i])) throw NumericError("non-finite gradient on edge " + to_string(net.edge(i).key()));
    sq += g[i] * g[i];
  }
  report.gradient_norm = std::sqrt(sq);
  if (cfg.gradient_clip && report.gradient_norm > *cfg.gradient_clip) {
    const double scale = *cfg.gradient_clip / report.gradient_norm;
    for (double& v : g) v *= scale;
    report.clipped = true;
  }

  std::vector<double> boost_mult(E, 1.0);
  if (cfg.boost.enabled && boost_state && E > 0) {
    BoostState next;
    std::vector<double> smoothed(E);
    for (std::size_t i = 0; i < E; ++i) {
      const EdgeKey key = net.edge(i).key();
      auto it = boost_state->find(key);
      const double prev = it == boost_state->end() ? std::abs(g[i]) : it->second;
      smoothed[i] = cfg.boost.smoothing * prev + (1.0 - cfg.boost.smoothing) * std::abs(g[i]);
      next.emplace(key, smoothed[i]);
    }
    *boost_state = std::move(next);
    std::vector<double> sorted = smoothed;
    std::sort(sorted.begin(), sorted.end());
    const auto rank = static_cast<std::size_t>(std::floor(cfg.boost.percentile * static_cast<double>(E - 1)));
    const double gate = sorted[rank];
    for (std::size_t i = 0; i < E; ++i)
      if (smoothed[i] > 0.0 && smoothed[i] >= gate) {
        boost_mult[i] = cfg.boost.factor;
        ++report.boosted;
      }
  }

  const double global = cyclic_rate(step_index, cfg.schedule.global_scale);
  const double ceiling = global * cfg.schedule.eta_new;
  double total_update = 0.0;
  for (std::size_t i = 0; i < E; ++i) {
    Edge& e = net.edge(i);
    double rate = global * credibility_rate(e.age, cfg.schedule);
    if (boost_mult[i] != 1.0) rate = std::min(rate * boost_mult[i], ceiling);
    e.momentum = cfg.momentum_coeff * e.momentum + g[i];
    const double update = rate * e.momentum;
    e.weight -= update;
    e.age += 1;
    total_update += std::abs(update);
    ++report.applied;
  }
  report.mean_abs_update = E ? total_update / static_cast<double>(E) : 0.0;
  net.set_step_count(net.step_count() + 1);
  return report;
}

void step_norm(Network& net, const NormGradients& grads, const OptimizerConfig& cfg, std::uint64_t step_index) {
  if (cfg.norm_rate == 0.0) return;
  const double rate = cfg.norm_rate * cyclic_rate(step_index, cfg.schedule.global_scale);
  for (std::size_t l = 1; l + 1 < net.layer_count(); ++l) {
    LayerNorm& ln = net.norm(l);
    if (l >= grads.scale.size() || grads.scale[l].size() != ln.size() || grads.shift[l].size() != ln.size())
      throw ShapeError("norm gradients do not match layer " + std::to_string(l));
    for (std::size_t v = 0; v < ln.size(); ++v) {
      if (!std::isfinite(grads.scale[l][v]) || !std::isfinite(grads.shift[l][v]))
        throw NumericError("non-finite norm gradient at node " + std::to_string(l) + ":" + std::to_string(v));
      ln.scale[v] -= rate * grads.scale[l][v];
      ln.shift[v] -= rate * grads.shift[l][v];
    }
  }
}

std::string to_string(CredibilityDecay d) { return d == CredibilityDecay::hyperbolic ? "hyperbolic" : "exponential"; }

CredibilityDecay parse_credibility_decay(const std::string& t) {
  if (t == "hyperbolic") return CredibilityDecay::hyperbolic;
  if (t == "exponential") return CredibilityDecay::exponential;
  throw ConfigError("unknown credibility_decay '" + t + "'");
}

}  // namespace livewire
