#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "livewire/initializer.hpp"
#include "livewire/plasticity.hpp"
#include "livewire/propagation.hpp"
#include "livewire/rewiring.hpp"
#include "livewire/tasks.hpp"

namespace livewire {

/// Flat "key = value" document. '#' starts a comment; blank lines are ignored.
/// Every key must be consumed by the reader, so typos surface as errors.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string text(const std::string& key, const std::string& fallback);
  double real(const std::string& key, double fallback);
  std::int64_t integer(const std::string& key, std::int64_t fallback);
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback);
  bool boolean(const std::string& key, bool fallback);

  /// Throws ConfigError naming the first key nobody asked for.
  void require_all_consumed() const;
  const std::string& origin() const { return origin_; }

 private:
  std::string where(const std::string& key) const;

  std::string origin_;
  std::map<std::string, std::string> values_;
  std::map<std::string, std::size_t> lines_;
  std::set<std::string> consumed_;
};

struct AdaptiveRewire {
  bool enabled = false;
  double threshold = 0.5;  // rewire only while the smoothed loss exceeds this
  double smoothing = 0.9;
};

struct RunConfig {
  std::vector<std::size_t> layer_widths = {16, 16, 16, 2};
  InitConfig init;
  RewireConfig rewire;
  OptimizerConfig optimizer;
  LossKind loss = LossKind::softmax_cross_entropy;
  double dropout_rate = 0.0;
  std::size_t batch_size = 32;
  NormStatistics norm_statistics = NormStatistics::batch;
  std::size_t rewire_interval = 10;
  AdaptiveRewire adaptive;
  std::size_t epochs = 10;
  std::uint64_t data_seed = 1;
  std::uint64_t dropout_seed = 2;
  bool shuffle = true;
  std::vector<NodeRef> track_nodes;
  double event_threshold = 1.0;
  std::size_t mi_interval = 0;  // 0 disables MI snapshots
  std::size_t log_interval = 1;
  std::filesystem::path output_dir;

  void check() const;
};

RunConfig parse_run_config(const std::string& text, const std::string& origin = "<string>");
RunConfig load_run_config(const std::filesystem::path& path);
/// Serializes every key, in the documented order. parse_run_config inverts it.
std::string to_config_string(const RunConfig& cfg);

FewShotProtocol parse_protocol(const std::string& text, const std::string& origin = "<string>");
FewShotProtocol load_protocol(const std::filesystem::path& path);

/// `task = coincidence` spec plus the sample count.
struct TaskSpec {
  CoincidenceTask task;
  std::size_t samples = 1000;
};
TaskSpec parse_task_spec(const std::string& text, const std::string& origin = "<string>");
TaskSpec load_task_spec(const std::filesystem::path& path);

std::vector<NodeRef> parse_node_list(const std::string& text);

}  // namespace livewire
