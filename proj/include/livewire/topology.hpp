#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace livewire {

/// A node addressed by (layer, index). Layer 0 is the input layer, the last
/// layer is the output layer.
struct NodeRef {
  std::uint32_t layer = 0;
  std::uint32_t index = 0;

  friend auto operator<=>(const NodeRef&, const NodeRef&) = default;
};

/// Directed (src, dst) pair. Ordering is lexicographic over
/// (src.layer, src.index, dst.layer, dst.index), the tie-break used everywhere.
struct EdgeKey {
  NodeRef src;
  NodeRef dst;

  friend auto operator<=>(const EdgeKey&, const EdgeKey&) = default;
};

struct Edge {
  NodeRef src;
  NodeRef dst;
  double weight = 0.0;
  double momentum = 0.0;
  std::uint64_t age = 0;  // optimizer steps survived since creation

  EdgeKey key() const { return {src, dst}; }
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Per-node batch-normalization parameters of one layer. Empty for the input
/// and output layers, which are exempt from normalization.
struct LayerNorm {
  std::vector<double> scale;
  std::vector<double> shift;
  std::vector<double> running_mean;
  std::vector<double> running_var;

  std::size_t size() const { return scale.size(); }
  void resize(std::size_t n);
  friend bool operator==(const LayerNorm&, const LayerNorm&) = default;
};

/// Layered DAG with a sparse, mutable set of strictly forward edges.
///
/// Edges are kept sorted by EdgeKey; incoming and outgoing adjacency lists hold
/// edge indices in ascending key order and are rebuilt after each structural
/// mutation. Edge indices are therefore only stable between mutations.
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<std::size_t> layer_widths);

  /// Assembles a network without checking any invariant. Used by the
  /// checkpoint loader and by tests that need deliberately broken nets; run
  /// validate() before using the result.
  static Network from_parts(std::vector<std::size_t> layer_widths, std::vector<Edge> edges,
                            std::vector<LayerNorm> norm, std::uint64_t step_count);

  std::size_t layer_count() const { return widths_.size(); }
  std::size_t width(std::size_t layer) const { return widths_.at(layer); }
  const std::vector<std::size_t>& layer_widths() const { return widths_; }
  std::size_t node_count() const;
  std::size_t output_layer() const { return widths_.size() - 1; }
  bool is_hidden(std::size_t layer) const { return layer > 0 && layer + 1 < widths_.size(); }
  bool contains(NodeRef n) const { return n.layer < widths_.size() && n.index < widths_[n.layer]; }

  std::span<const Edge> edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }
  Edge& edge(std::size_t i) { return edges_.at(i); }
  const Edge& edge(std::size_t i) const { return edges_.at(i); }

  std::optional<std::size_t> find(const EdgeKey& key) const;
  bool has_edge(const EdgeKey& key) const { return find(key).has_value(); }

  /// Edge indices into `n`, ordered by src.
  std::span<const std::size_t> incoming(NodeRef n) const;
  /// Edge indices out of `n`, ordered by dst.
  std::span<const std::size_t> outgoing(NodeRef n) const;

  const std::vector<LayerNorm>& norm() const { return norm_; }
  LayerNorm& norm(std::size_t layer) { return norm_.at(layer); }
  const LayerNorm& norm(std::size_t layer) const { return norm_.at(layer); }

  std::uint64_t step_count() const { return step_count_; }
  void set_step_count(std::uint64_t s) { step_count_ = s; }

  /// Hash over layer widths and the edge key set; weights do not contribute.
  std::uint64_t topology_hash() const;

  /// Inserts legal, absent edges in one pass. Returns a flag per input edge:
  /// true if inserted.
  std::vector<bool> insert_edges(std::span<const Edge> new_edges);
  /// Removes the listed edges; returns the removed records in key order.
  std::vector<Edge> remove_edges(std::span<const EdgeKey> keys);

  /// Appends `extra` nodes to `layer`. Hidden layers gain default norm state.
  /// New nodes have no edges.
  void extend_layer(std::size_t layer, std::size_t extra);

  friend bool operator==(const Network& a, const Network& b) {
    return a.widths_ == b.widths_ && a.edges_ == b.edges_ && a.norm_ == b.norm_ &&
           a.step_count_ == b.step_count_;
  }

 private:
  void reindex();
  std::size_t flat(NodeRef n) const { return offsets_[n.layer] + n.index; }

  std::vector<std::size_t> widths_;
  std::vector<Edge> edges_;
  std::vector<LayerNorm> norm_;
  std::uint64_t step_count_ = 0;

  std::vector<std::size_t> offsets_;
  std::vector<std::vector<std::size_t>> in_;
  std::vector<std::vector<std::size_t>> out_;
};

/// Default norm state for a layer of the given width: scale 1, shift 0,
/// running mean 0, running variance 1.
LayerNorm default_layer_norm(std::size_t width);

/// Every violated structural invariant, one description per offense.
std::vector<std::string> validate(const Network& net);

struct ZeroInit {};
struct ScaledRandomInit {
  std::uint64_t seed = 0;
};
/// Weight initialization for grown edges. Scaled-random draws uniformly in
/// +-1/sqrt(fan_in) with fan_in the dst in-degree after growth (minimum 1).
using EdgeInit = std::variant<ZeroInit, ScaledRandomInit>;

struct GrowResult {
  std::size_t grown = 0;
  std::vector<EdgeKey> skipped;
};

/// Grows edges for every legal pair. Illegal or duplicate pairs are skipped.
GrowResult grow_edges(Network& net, std::span<const EdgeKey> pairs, const EdgeInit& init);

/// The `count` unprotected edges with the smallest |weight|, ties broken by
/// EdgeKey order. Throws ConfigError when fewer than `count` are prunable.
std::vector<EdgeKey> select_prunable(const Network& net, std::size_t count,
                                     const std::set<EdgeKey>& protected_keys);

/// Removes the edges chosen by select_prunable.
std::vector<Edge> prune_edges(Network& net, std::size_t count,
                              const std::set<EdgeKey>& protected_keys = {});

/// Number of forward node pairs whose layer difference is at least `min_gap`.
std::size_t forward_pair_count(const std::vector<std::size_t>& layer_widths, std::size_t min_gap = 1);

/// Realized edge density per layer difference; entry d covers layer pairs
/// (i, i + d). Entry 0 is unused and always 0.
std::vector<double> density_by_distance(const Network& net);

void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

/// Text form of the checkpoint document.
std::string checkpoint_to_string(const Network& net);
Network checkpoint_from_string(const std::string& text, const std::string& origin = "<string>");

std::string to_string(NodeRef n);
std::string to_string(const EdgeKey& k);
/// Parses "L:I".
NodeRef parse_node_ref(const std::string& text);

}  // namespace livewire
