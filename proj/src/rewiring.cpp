#include "livewire/rewiring.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "livewire/error.hpp"
#include "livewire/rng.hpp"

namespace livewire {

void CyclicSchedule::check() const {
  if (warmup_steps <= 0 || decay_steps <= 0) throw ConfigError("schedule warmup_steps and decay_steps must be positive");
  if (!std::isfinite(base) || !std::isfinite(peak) || !std::isfinite(floor))
    throw ConfigError("schedule values must be finite");
}

double cyclic_rate(std::uint64_t step, const CyclicSchedule& s) {
  s.check();
  const auto warm = static_cast<std::uint64_t>(s.warmup_steps);
  const auto decay = static_cast<std::uint64_t>(s.decay_steps);
  if (step <= warm) return s.base + (s.peak - s.base) * (static_cast<double>(step) / static_cast<double>(warm));
  if (step - warm <= decay)
    return s.peak + (s.floor - s.peak) * (static_cast<double>(step - warm) / static_cast<double>(decay));
  return s.floor;
}

void RewireConfig::check() const {
  if (queue_capacity == 0) throw ConfigError("queue_capacity must be positive");
  if (min_layer_gap < 1) throw ConfigError("min_layer_gap must be at least 1");
  if (!(distance_preference >= 0.0)) throw ConfigError("distance_preference must be non-negative");
  growth.check();
  prune_ratio.check();
}

bool ActivationQueue::contains(NodeRef n) const {
  return std::any_of(entries.begin(), entries.end(), [&](const QueueEntry& e) { return e.node == n; });
}

namespace {

double aggregate(std::span<const double> values, StrengthAggregate how) {
  double acc = 0.0;
  for (double v : values) acc = how == StrengthAggregate::mean ? acc + std::abs(v) : std::max(acc, std::abs(v));
  return how == StrengthAggregate::mean ? acc / static_cast<double>(values.size()) : acc;
}

}  // namespace

namespace {

void standardize(std::span<const double> x, std::vector<double>& z) {
  const std::size_t B = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(B);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(B);
  const double inv = 1.0 / std::sqrt(var + kNormEpsilon);
  z.resize(B);
  for (std::size_t s = 0; s < B; ++s) z[s] = (x[s] - mean) * inv;
}

}  // namespace

std::vector<QueueEntry> node_strengths(const ActivationTrace& trace, StrengthAggregate how,
                                       OutputQueueSignal output_signal, QueueStatistics statistics) {
  std::vector<QueueEntry> all;
  const std::size_t L = trace.layers.size();
  const bool restandardize =
      statistics == QueueStatistics::batch && trace.mode.statistics == NormStatistics::running;
  std::vector<double> z;
  for (std::size_t l = 0; l + 1 < L; ++l) {
    const LayerTrace& lt = trace.layers[l];
    for (std::size_t v = 0; v < lt.normalized.rows(); ++v) {
      const NodeRef n{static_cast<std::uint32_t>(l), static_cast<std::uint32_t>(v)};
      if (restandardize && l > 0) {
        standardize(lt.pre_norm.row(v), z);
        all.push_back({n, aggregate(z, how)});
      } else {
        all.push_back({n, aggregate(lt.normalized.row(v), how)});
      }
    }
  }
  if (output_signal == OutputQueueSignal::target) {
    const Matrix& t = trace.targets;
    std::vector<double> column(t.rows());
    for (std::size_t v = 0; v < t.cols(); ++v) {
      for (std::size_t s = 0; s < t.rows(); ++s) column[s] = t(s, v);
      standardize(column, z);
      all.push_back({{static_cast<std::uint32_t>(L - 1), static_cast<std::uint32_t>(v)}, aggregate(z, how)});
    }
  }
  return all;
}

ActivationQueue collect_queue(const ActivationTrace& trace, std::size_t capacity, StrengthAggregate how,
                              OutputQueueSignal output_signal, QueueStatistics statistics) {
  if (capacity == 0) throw ConfigError("queue capacity must be positive");
  ActivationQueue q;
  q.capacity = capacity;
  q.entries = node_strengths(trace, how, output_signal, statistics);
  auto stronger = [](const QueueEntry& a, const QueueEntry& b) {
    return a.strength > b.strength || (a.strength == b.strength && a.node < b.node);
  };
  const std::size_t keep = std::min(capacity, q.entries.size());
  std::partial_sort(q.entries.begin(), q.entries.begin() + static_cast<std::ptrdiff_t>(keep), q.entries.end(),
                    stronger);
  q.entries.resize(keep);
  return q;
}

std::vector<EdgeKey> enumerate_candidates(const ActivationQueue& queue, const Network& net,
                                          const RewireConfig& cfg) {
  std::vector<NodeRef> nodes;
  for (const auto& e : queue.entries)
    if (net.contains(e.node)) nodes.push_back(e.node);
  std::sort(nodes.begin(), nodes.end());
  std::vector<EdgeKey> pairs;
  for (NodeRef u : nodes)
    for (NodeRef v : nodes)
      if (v.layer >= u.layer + cfg.min_layer_gap && !net.has_edge({u, v})) pairs.push_back({u, v});
  return pairs;
}

std::vector<ScoredPair> score_candidates(std::span<const EdgeKey> pairs, const ActivationTrace& trace,
                                         const RewireConfig& cfg) {
  if (cfg.scoring == Scoring::gradient && !trace.has_deltas)
    throw ConfigError("gradient scoring needs a completed backward pass");
  std::vector<ScoredPair> scored;
  scored.reserve(pairs.size());

  std::vector<QueueEntry> strengths;
  if (cfg.scoring == Scoring::gradient_free) strengths = node_strengths(trace, cfg.strength, cfg.output_signal, cfg.queue_statistics);
  auto strength_of = [&](NodeRef n) {
    auto it = std::lower_bound(strengths.begin(), strengths.end(), n,
                               [](const QueueEntry& e, NodeRef r) { return e.node < r; });
    return it != strengths.end() && it->node == n ? it->strength : 0.0;
  };

  for (const EdgeKey& p : pairs) {
    if (p.src.layer >= trace.layers.size() || p.dst.layer >= trace.layers.size())
      throw ShapeError("candidate " + to_string(p) + " outside the traced network");
    const double factor = std::exp(cfg.distance_preference * static_cast<double>(p.dst.layer - p.src.layer));
    ScoredPair sp{p, 0.0, 0.0};
    if (cfg.scoring == Scoring::gradient) {
      const auto dd = trace.layers[p.dst.layer].delta.row(p.dst.index);
      const auto src = trace.layers[p.src.layer].post_activation.row(p.src.index);
      double sum = 0.0;
      for (std::size_t s = 0; s < trace.batch_size; ++s) sum += dd[s] * src[s];
      sp.gradient = sum;
      sp.score = std::abs(sum) * factor;
    } else {
      sp.score = strength_of(p.src) * strength_of(p.dst) * factor;
    }
    scored.push_back(sp);
  }
  return scored;
}

RewirePlan plan_from_candidates(const Network& net, std::vector<ScoredPair> candidates, const RewireConfig& cfg,
                                std::uint64_t step) {
  RewirePlan plan;
  plan.step = step;
  const double k_raw = std::max(0.0, cyclic_rate(step, cfg.growth));
  std::size_t k = static_cast<std::size_t>(std::lround(k_raw));

  std::sort(candidates.begin(), candidates.end(), [](const ScoredPair& a, const ScoredPair& b) {
    return a.score > b.score || (a.score == b.score && a.pair < b.pair);
  });
  // Callers may pass pairs that did not come from enumerate_candidates.
  std::set<EdgeKey> seen;
  std::vector<ScoredPair> legal;
  for (const auto& c : candidates) {
    if (c.pair.src.layer >= c.pair.dst.layer || !net.contains(c.pair.src) || !net.contains(c.pair.dst) ||
        net.has_edge(c.pair) || !seen.insert(c.pair).second) {
      plan.notes.push_back("dropped inadmissible candidate " + to_string(c.pair));
      continue;
    }
    legal.push_back(c);
  }
  plan.candidates = std::move(legal);

  if (k > plan.candidates.size()) {
    plan.notes.push_back("growth K=" + std::to_string(k) + " clipped to " + std::to_string(plan.candidates.size()) +
                         " candidates");
    k = plan.candidates.size();
  }
  for (std::size_t i = 0; i < k; ++i) plan.to_grow.push_back(plan.candidates[i].pair);

  const double ratio = std::max(0.0, cyclic_rate(step, cfg.prune_ratio));
  std::size_t prune = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(plan.to_grow.size())));
  if (prune > net.edge_count()) {
    plan.notes.push_back("prune count " + std::to_string(prune) + " clipped to " + std::to_string(net.edge_count()) +
                         " edges");
    prune = net.edge_count();
  }
  const std::set<EdgeKey> protect(plan.to_grow.begin(), plan.to_grow.end());
  for (const EdgeKey& key : select_prunable(net, prune, protect)) plan.to_prune.push_back(net.edge(*net.find(key)));
  return plan;
}

RewirePlan plan_rewire(const Network& net, const ActivationTrace& trace, const RewireConfig& cfg, std::uint64_t step) {
  cfg.check();
  if (trace.topology_hash != net.topology_hash()) throw ShapeError("trace was recorded on a different topology");
  ActivationQueue queue = collect_queue(trace, cfg.queue_capacity, cfg.strength, cfg.output_signal, cfg.queue_statistics);
  const auto pairs = enumerate_candidates(queue, net, cfg);
  RewirePlan plan = plan_from_candidates(net, score_candidates(pairs, trace, cfg), cfg, step);
  plan.queue = std::move(queue);
  return plan;
}

MutationReport apply_plan(Network& net, const RewirePlan& plan, const RewireConfig& cfg) {
  MutationReport report;
  EdgeInit init = ZeroInit{};
  if (cfg.new_edge_init == NewEdgeInit::scaled_random) init = ScaledRandomInit{mix_seed(cfg.seed, plan.step)};
  const GrowResult grown = grow_edges(net, plan.to_grow, init);
  std::set<EdgeKey> skipped(grown.skipped.begin(), grown.skipped.end());
  for (const auto& k : plan.to_grow)
    if (!skipped.count(k)) report.grown.push_back(k);

  std::vector<EdgeKey> doomed;
  for (const Edge& e : plan.to_prune) doomed.push_back(e.key());
  report.pruned = net.remove_edges(doomed);
  report.edge_count = net.edge_count();
  const auto possible = forward_pair_count(net.layer_widths());
  report.density = possible ? static_cast<double>(net.edge_count()) / static_cast<double>(possible) : 0.0;
  return report;
}

std::string to_string(Scoring s) { return s == Scoring::gradient ? "gradient" : "gradient-free"; }
Scoring parse_scoring(const std::string& t) {
  if (t == "gradient") return Scoring::gradient;
  if (t == "gradient-free") return Scoring::gradient_free;
  throw ConfigError("unknown scoring '" + t + "'");
}
std::string to_string(NewEdgeInit i) { return i == NewEdgeInit::zero ? "zero" : "scaled-random"; }
NewEdgeInit parse_new_edge_init(const std::string& t) {
  if (t == "zero") return NewEdgeInit::zero;
  if (t == "scaled-random") return NewEdgeInit::scaled_random;
  throw ConfigError("unknown new_edge_init '" + t + "'");
}
std::string to_string(StrengthAggregate a) { return a == StrengthAggregate::mean ? "mean" : "max"; }
StrengthAggregate parse_strength_aggregate(const std::string& t) {
  if (t == "mean") return StrengthAggregate::mean;
  if (t == "max") return StrengthAggregate::max;
  throw ConfigError("unknown strength_aggregate '" + t + "'");
}
std::string to_string(OutputQueueSignal s) { return s == OutputQueueSignal::none ? "none" : "target"; }
OutputQueueSignal parse_output_signal(const std::string& t) {
  if (t == "none") return OutputQueueSignal::none;
  if (t == "target") return OutputQueueSignal::target;
  throw ConfigError("unknown output_queue_signal '" + t + "'");
}
std::string to_string(QueueStatistics s) { return s == QueueStatistics::trace ? "trace" : "batch"; }
QueueStatistics parse_queue_statistics(const std::string& t) {
  if (t == "trace") return QueueStatistics::trace;
  if (t == "batch") return QueueStatistics::batch;
  throw ConfigError("unknown queue_statistics '" + t + "'");
}

}  // namespace livewire
