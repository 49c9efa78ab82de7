#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "livewire/propagation.hpp"
#include "livewire/topology.hpp"

namespace livewire {

/// Triangular schedule: linear from `base` to `peak` over `warmup_steps`, then
/// linear to `floor` over `decay_steps`, then constant at `floor`.
struct CyclicSchedule {
  double base = 0.0;
  double peak = 0.0;
  double floor = 0.0;
  std::int64_t warmup_steps = 1;
  std::int64_t decay_steps = 1;

  static CyclicSchedule constant(double value) { return {value, value, value, 1, 1}; }
  void check() const;
};

double cyclic_rate(std::uint64_t step, const CyclicSchedule& schedule);

struct QueueEntry {
  NodeRef node;
  double strength = 0.0;
};

/// Bounded max-queue of the most strongly activated nodes of one pass.
struct ActivationQueue {
  std::size_t capacity = 0;
  std::vector<QueueEntry> entries;  // strength descending, NodeRef ascending on ties

  bool contains(NodeRef n) const;
};

enum class StrengthAggregate { mean, max };  // over the batch, of |normalized activation|
/// How output nodes enter the queue: not at all, or by the batch-standardized
/// target signal (what the environment reports as active).
enum class OutputQueueSignal { none, target };
/// Which standardization queue strengths use for hidden nodes: the one the
/// forward pass applied, or the batch's own moments even when the pass ran on
/// running statistics.
enum class QueueStatistics { trace, batch };
enum class Scoring { gradient, gradient_free };
enum class NewEdgeInit { zero, scaled_random };

struct RewireConfig {
  std::size_t queue_capacity = 16;
  CyclicSchedule growth = {2.0, 8.0, 1.0, 50, 200};
  CyclicSchedule prune_ratio = CyclicSchedule::constant(1.0);
  std::uint32_t min_layer_gap = 1;
  double distance_preference = 0.0;
  Scoring scoring = Scoring::gradient;
  NewEdgeInit new_edge_init = NewEdgeInit::zero;
  StrengthAggregate strength = StrengthAggregate::mean;
  OutputQueueSignal output_signal = OutputQueueSignal::none;
  QueueStatistics queue_statistics = QueueStatistics::trace;
  std::uint64_t seed = 0;  // scaled-random growth draws

  void check() const;
};

/// Strength of every queue-eligible node (input, hidden, and output nodes
/// when `output_signal` is target), in NodeRef order.
std::vector<QueueEntry> node_strengths(const ActivationTrace& trace, StrengthAggregate aggregate,
                                       OutputQueueSignal output_signal,
                                       QueueStatistics statistics = QueueStatistics::trace);

ActivationQueue collect_queue(const ActivationTrace& trace, std::size_t capacity,
                              StrengthAggregate aggregate = StrengthAggregate::mean,
                              OutputQueueSignal output_signal = OutputQueueSignal::none,
                              QueueStatistics statistics = QueueStatistics::trace);

/// Ordered pairs of queue nodes at least `min_layer_gap` layers apart that are
/// not yet connected, in EdgeKey order.
std::vector<EdgeKey> enumerate_candidates(const ActivationQueue& queue, const Network& net,
                                          const RewireConfig& cfg);

struct ScoredPair {
  EdgeKey pair;
  double score = 0.0;
  double gradient = 0.0;  // signed loss gradient of the pair at weight 0 (gradient mode)
};

/// Gradient mode: |dLoss/dw| of each pair as a zero-weight edge, times
/// exp(distance_preference * layer difference). Gradient-free mode: product of
/// endpoint strengths times the same factor.
std::vector<ScoredPair> score_candidates(std::span<const EdgeKey> pairs, const ActivationTrace& trace,
                                         const RewireConfig& cfg);

struct RewirePlan {
  std::uint64_t step = 0;
  ActivationQueue queue;
  std::vector<ScoredPair> candidates;
  std::vector<EdgeKey> to_grow;
  std::vector<Edge> to_prune;
  std::vector<std::string> notes;

  bool empty() const { return to_grow.empty() && to_prune.empty(); }
};

/// Top-K(step) candidates by score (EdgeKey order on ties) plus the
/// round(r(step) * grown) smallest-|weight| existing edges.
RewirePlan plan_from_candidates(const Network& net, std::vector<ScoredPair> candidates,
                                const RewireConfig& cfg, std::uint64_t step);

/// Full round on one trace: queue, candidates, scores, plan. Read-only.
RewirePlan plan_rewire(const Network& net, const ActivationTrace& trace, const RewireConfig& cfg,
                       std::uint64_t step);

struct MutationReport {
  std::vector<EdgeKey> grown;
  std::vector<Edge> pruned;
  std::size_t edge_count = 0;
  double density = 0.0;
};

/// Grows then prunes according to the plan.
MutationReport apply_plan(Network& net, const RewirePlan& plan, const RewireConfig& cfg);

std::string to_string(Scoring s);
Scoring parse_scoring(const std::string& text);
NewEdgeInit parse_new_edge_init(const std::string& text);
std::string to_string(NewEdgeInit i);
StrengthAggregate parse_strength_aggregate(const std::string& text);
std::string to_string(StrengthAggregate a);
OutputQueueSignal parse_output_signal(const std::string& text);
std::string to_string(OutputQueueSignal s);
QueueStatistics parse_queue_statistics(const std::string& text);
std::string to_string(QueueStatistics s);

}  // namespace livewire
