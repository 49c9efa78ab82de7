#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "livewire/propagation.hpp"
#include "livewire/topology.hpp"

namespace livewire {

/// Shannon surprise -log2(p) in bits. Throws ConfigError unless p in (0, 1].
double surprise(double p);

/// Binary "strong activation" events (normalized activation > threshold) for
/// a set of tracked nodes, one entry per observation.
class EventLog {
 public:
  EventLog() = default;
  EventLog(std::vector<NodeRef> tracked, double threshold = 1.0);

  const std::vector<NodeRef>& tracked() const { return tracked_; }
  double threshold() const { return threshold_; }
  std::size_t observations() const { return observations_; }
  bool tracks(NodeRef n) const;

  /// Appends one observation per sample of the trace.
  void append(const ActivationTrace& trace);
  /// Appends raw event sequences; `events[i]` belongs to `tracked()[i]`.
  void append(const std::vector<std::vector<bool>>& events);

  const std::vector<bool>& events(NodeRef n) const;

  std::string to_string() const;
  static EventLog from_string(const std::string& text, const std::string& origin = "<string>");
  void save(const std::filesystem::path& path) const;
  static EventLog load(const std::filesystem::path& path);

 private:
  std::size_t slot(NodeRef n) const;

  std::vector<NodeRef> tracked_;
  double threshold_ = 1.0;
  std::size_t observations_ = 0;
  std::vector<std::vector<bool>> events_;
};

/// 2x2 joint count table: cells[x][y] counts observations with a = x, b = y.
using JointCounts = std::array<std::array<std::uint64_t, 2>, 2>;

JointCounts joint_counts(const std::vector<bool>& a, const std::vector<bool>& b);

struct CoincidenceStats {
  double p_a = 0.0;
  double p_b = 0.0;
  double p_joint = 0.0;
  double ratio = 0.0;  // p_joint / (p_a * p_b); > 1 means coincidence above independence
};

/// Frequencies from the add-one smoothed joint table.
CoincidenceStats coincidence_stats(const EventLog& log, NodeRef a, NodeRef b);
CoincidenceStats coincidence_stats(const JointCounts& counts);

struct MiEstimate {
  double value_bits = 0.0;
  std::uint64_t n_obs = 0;
  JointCounts cells{};
  double entropy_a = 0.0;  // of the smoothed marginals, bits
  double entropy_b = 0.0;
};

inline constexpr std::size_t kMinMiObservations = 100;

/// Plug-in mutual information over the add-one smoothed 2x2 table, base-2,
/// clamped at 0. Needs at least kMinMiObservations observations.
MiEstimate mutual_information(const EventLog& log, NodeRef a, NodeRef b);
MiEstimate mutual_information(const JointCounts& counts);

}  // namespace livewire
