#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "livewire/config.hpp"
#include "livewire/infometrics.hpp"
#include "livewire/plasticity.hpp"
#include "livewire/rewiring.hpp"
#include "livewire/tasks.hpp"
#include "livewire/topology.hpp"

namespace livewire {

struct StrengthStats {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
  std::size_t size = 0;
};

struct MiSnapshot {
  NodeRef a;
  NodeRef b;
  MiEstimate mi;
  double ratio = 0.0;
};

/// One line of the metrics stream (kind "step").
struct MetricsRecord {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  double loss = 0.0;
  std::optional<double> accuracy;
  std::size_t edge_count = 0;
  std::vector<double> density_by_distance;
  std::size_t edges_grown = 0;   // since the previous record
  std::size_t edges_pruned = 0;  // since the previous record
  double mean_edge_age = 0.0;
  std::optional<StrengthStats> queue_strength;  // most recent rewire round
  std::vector<MiSnapshot> mi;

  std::string to_json_line() const;
};

/// Everything besides the network that a resumed run needs to continue
/// bit-identically.
struct TrainerState {
  std::uint64_t origin_step = 0;  // network step count when this run began
  std::optional<double> loss_ema;
  BoostState boost;
  std::size_t pending_grown = 0;
  std::size_t pending_pruned = 0;
  std::optional<StrengthStats> last_queue;
  std::optional<EventLog> events;

  std::string to_string() const;
  static TrainerState from_string(const std::string& text, const std::string& origin = "<string>");
};

struct StepOutcome {
  double loss = 0.0;
  bool rewired = false;
  std::optional<MutationReport> mutation;
  UpdateReport update;
};

/// Owns a network and runs the training loop over it. Per batch: forward,
/// backward, an optional rewiring round on the same trace (after which the
/// batch is propagated again so new edges take their first step on it), the
/// running-statistics commit, then the optimizer step.
class Trainer {
 public:
  Trainer(RunConfig cfg, Network net);
  Trainer(RunConfig cfg, Network net, TrainerState state);

  /// Loads `checkpoint` and its "<stem>.state.json" sidecar when present.
  static Trainer resume(RunConfig cfg, const std::filesystem::path& checkpoint);

  const Network& network() const { return net_; }
  const RunConfig& config() const { return cfg_; }
  const TrainerState& state() const { return state_; }
  /// Steps since this run began; the index used for every schedule.
  std::uint64_t local_step() const { return net_.step_count() - state_.origin_step; }

  StepOutcome train_step(const Batch& batch, std::uint64_t epoch = 0);

  /// Trains until cfg.epochs epochs have been completed since origin_step.
  /// Writes checkpoints and metrics under cfg.output_dir when it is set.
  void fit(const Dataset& data);

  /// Every metrics line emitted by this object, in order.
  const std::vector<std::string>& metrics_lines() const { return lines_; }
  std::size_t rewire_rounds() const { return rewire_rounds_; }
  std::size_t total_grown() const { return total_grown_; }
  std::size_t total_pruned() const { return total_pruned_; }

  /// Writes the network and the sidecar state.
  void save(const std::filesystem::path& checkpoint) const;

 private:
  void emit(const std::string& line);
  std::size_t batches_per_epoch(const Dataset& data) const;

  RunConfig cfg_;
  Network net_;
  TrainerState state_;
  std::vector<std::string> lines_;
  std::optional<std::ofstream> metrics_file_;
  std::size_t rewire_rounds_ = 0;
  std::size_t total_grown_ = 0;
  std::size_t total_pruned_ = 0;
};

struct TrainResult {
  Network network;
  std::vector<std::string> metrics;
};

/// Initializes from cfg and trains on `data`.
TrainResult train(const RunConfig& cfg, const Dataset& data);

std::filesystem::path state_path_for(const std::filesystem::path& checkpoint);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t samples = 0;
};

/// Eval-mode pass (running statistics, no dropout). Each sample's output is
/// independent of how the data is batched. `classes` restricts the accuracy
/// argmax to the first outputs when nonzero.
EvalResult evaluate(const Network& net, const Dataset& data, LossKind loss, std::size_t batch_size = 256,
                    std::size_t classes = 0);

// ---------------------------------------------------------------------------

struct FewShotArm {
  double base_acc_after = 0.0;
  double novel_acc = 0.0;
  std::size_t phase2_steps = 0;
  std::size_t edges_grown = 0;
  std::size_t edges_pruned = 0;
  std::size_t novel_in_edges = 0;  // edges into the novel output nodes after phase 2
};

struct FewShotRun {
  std::uint64_t seed_offset = 0;
  double base_acc_before = 0.0;
  FewShotArm livewired;
  FewShotArm control;

  double livewired_drop() const { return base_acc_before - livewired.base_acc_after; }
  double control_drop() const { return base_acc_before - control.base_acc_after; }
};

struct FewShotVerdict {
  std::size_t runs = 0;
  std::size_t forgetting_wins = 0;  // runs with livewired drop <= control drop
  double novel_ratio = 0.0;         // mean livewired novel acc / mean control novel acc
  bool passed = false;              // wins >= ceil(0.8 * runs) and ratio >= 0.7
};

FewShotVerdict fewshot_verdict(const std::vector<FewShotRun>& runs);

struct FewShotReport {
  RunConfig config;
  FewShotProtocol protocol;
  std::vector<FewShotRun> runs;
  FewShotVerdict verdict;

  std::string to_json() const;
};

/// One paired run: phase 1 on base classes, then the livewired and control
/// arms adapt copies of the same network to the novel support shots.
FewShotRun run_fewshot_once(const RunConfig& cfg, const FewShotProtocol& protocol, std::uint64_t seed_offset);

/// protocol.repeats paired runs; writes fewshot_report.json into `out_dir`
/// when it is nonempty.
FewShotReport run_fewshot(const RunConfig& cfg, const FewShotProtocol& protocol,
                          const std::filesystem::path& out_dir = {});

/// Network shapes for the few-shot task: cfg widths with the first and last
/// entries replaced by the protocol's input and base-class widths.
std::vector<std::size_t> fewshot_widths(const RunConfig& cfg, const FewShotProtocol& protocol);

// ---------------------------------------------------------------------------

/// Topology statistics, incident edges of `queries`, and MI between every
/// pair of tracked nodes when an event log is given. Returned as JSON text.
std::string inspect(const Network& net, const std::vector<NodeRef>& queries, const EventLog* events = nullptr);

/// Age histogram with bin 0 holding age 0 and bin b >= 1 holding ages in
/// [2^(b-1), 2^b).
std::vector<std::size_t> age_histogram(const Network& net);

}  // namespace livewire
