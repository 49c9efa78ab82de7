#include "livewire/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "livewire/error.hpp"
#include "livewire/rng.hpp"

namespace livewire {

namespace {

bool edge_less(const Edge& a, const Edge& b) { return a.key() < b.key(); }

}  // namespace

void LayerNorm::resize(std::size_t n) {
  scale.resize(n, 1.0);
  shift.resize(n, 0.0);
  running_mean.resize(n, 0.0);
  running_var.resize(n, 1.0);
}

LayerNorm default_layer_norm(std::size_t width) {
  LayerNorm ln;
  ln.resize(width);
  return ln;
}

Network::Network(std::vector<std::size_t> layer_widths) : widths_(std::move(layer_widths)) {
  norm_.resize(widths_.size());
  for (std::size_t l = 0; l < widths_.size(); ++l)
    if (is_hidden(l)) norm_[l] = default_layer_norm(widths_[l]);
  reindex();
}

Network Network::from_parts(std::vector<std::size_t> layer_widths, std::vector<Edge> edges,
                            std::vector<LayerNorm> norm, std::uint64_t step_count) {
  Network net;
  net.widths_ = std::move(layer_widths);
  net.edges_ = std::move(edges);
  std::stable_sort(net.edges_.begin(), net.edges_.end(), edge_less);
  net.norm_ = std::move(norm);
  net.step_count_ = step_count;
  net.reindex();
  return net;
}

std::size_t Network::node_count() const {
  std::size_t n = 0;
  for (auto w : widths_) n += w;
  return n;
}

void Network::reindex() {
  offsets_.assign(widths_.size() + 1, 0);
  for (std::size_t l = 0; l < widths_.size(); ++l) offsets_[l + 1] = offsets_[l] + widths_[l];
  const std::size_t n = offsets_.back();
  in_.assign(n, {});
  out_.assign(n, {});
  // Edges are sorted by (src, dst): out lists come out dst-ordered directly.
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    if (!contains(e.src) || !contains(e.dst)) continue;
    out_[flat(e.src)].push_back(i);
    in_[flat(e.dst)].push_back(i);
  }
  // In lists are filled in src order for the same reason.
}

std::span<const std::size_t> Network::incoming(NodeRef n) const {
  if (!contains(n)) return {};
  return in_[flat(n)];
}

std::span<const std::size_t> Network::outgoing(NodeRef n) const {
  if (!contains(n)) return {};
  return out_[flat(n)];
}

std::optional<std::size_t> Network::find(const EdgeKey& key) const {
  auto it = std::lower_bound(edges_.begin(), edges_.end(), key,
                             [](const Edge& e, const EdgeKey& k) { return e.key() < k; });
  if (it == edges_.end() || it->key() != key) return std::nullopt;
  return static_cast<std::size_t>(it - edges_.begin());
}

std::uint64_t Network::topology_hash() const {
  std::uint64_t h = mix64(widths_.size());
  for (auto w : widths_) h = mix_seed(h, w);
  for (const Edge& e : edges_) {
    h = mix_seed(h, (std::uint64_t{e.src.layer} << 32) | e.src.index);
    h = mix_seed(h, (std::uint64_t{e.dst.layer} << 32) | e.dst.index);
  }
  return h;
}

std::vector<bool> Network::insert_edges(std::span<const Edge> new_edges) {
  std::vector<bool> accepted(new_edges.size(), false);
  std::set<EdgeKey> pending;
  std::vector<Edge> merged;
  for (std::size_t i = 0; i < new_edges.size(); ++i) {
    const Edge& e = new_edges[i];
    if (!contains(e.src) || !contains(e.dst) || e.src.layer >= e.dst.layer) continue;
    if (has_edge(e.key()) || !pending.insert(e.key()).second) continue;
    accepted[i] = true;
    merged.push_back(e);
  }
  if (merged.empty()) return accepted;
  std::sort(merged.begin(), merged.end(), edge_less);
  std::vector<Edge> all;
  all.reserve(edges_.size() + merged.size());
  std::merge(edges_.begin(), edges_.end(), merged.begin(), merged.end(), std::back_inserter(all),
             edge_less);
  edges_ = std::move(all);
  reindex();
  return accepted;
}

std::vector<Edge> Network::remove_edges(std::span<const EdgeKey> keys) {
  std::set<EdgeKey> doomed(keys.begin(), keys.end());
  std::vector<Edge> removed;
  std::vector<Edge> kept;
  kept.reserve(edges_.size());
  for (Edge& e : edges_) {
    if (doomed.count(e.key()))
      removed.push_back(e);
    else
      kept.push_back(e);
  }
  if (!removed.empty()) {
    edges_ = std::move(kept);
    reindex();
  }
  return removed;
}

void Network::extend_layer(std::size_t layer, std::size_t extra) {
  if (layer >= widths_.size()) throw ConfigError("extend_layer: layer out of range");
  widths_[layer] += extra;
  if (is_hidden(layer)) norm_[layer].resize(widths_[layer]);
  reindex();
}

std::vector<std::string> validate(const Network& net) {
  std::vector<std::string> issues;
  const auto& widths = net.layer_widths();
  if (widths.size() < 2) issues.push_back("network needs at least 2 layers");
  for (std::size_t l = 0; l < widths.size(); ++l)
    if (widths[l] == 0) issues.push_back("layer " + std::to_string(l) + " has zero width");

  const auto edges = net.edges();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    const std::string where = "edges[" + std::to_string(i) + "] " + to_string(e.key());
    if (!net.contains(e.src) || !net.contains(e.dst)) {
      issues.push_back(where + ": node out of range");
      continue;
    }
    if (e.src.layer == e.dst.layer)
      issues.push_back(where + ": intra-layer edge");
    else if (e.src.layer > e.dst.layer)
      issues.push_back(where + ": backward edge");
    if (i > 0 && edges[i - 1].key() == e.key()) issues.push_back(where + ": duplicate edge");
    if (!std::isfinite(e.weight) || !std::isfinite(e.momentum))
      issues.push_back(where + ": non-finite weight or momentum");
  }

  if (net.norm().size() != widths.size()) {
    issues.push_back("norm_state has " + std::to_string(net.norm().size()) + " layers, expected " +
                     std::to_string(widths.size()));
    return issues;
  }
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const LayerNorm& ln = net.norm(l);
    const std::size_t expected = net.is_hidden(l) ? widths[l] : 0;
    const std::string where = "norm_state[" + std::to_string(l) + "]";
    if (ln.scale.size() != expected || ln.shift.size() != expected ||
        ln.running_mean.size() != expected || ln.running_var.size() != expected) {
      issues.push_back(where + ": expected " + std::to_string(expected) + " entries per array");
      continue;
    }
    for (std::size_t i = 0; i < expected; ++i) {
      if (!std::isfinite(ln.scale[i]) || !std::isfinite(ln.shift[i]))
        issues.push_back(where + " node " + std::to_string(i) + ": non-finite scale or shift");
      if (!(ln.running_var[i] >= 0.0) || !std::isfinite(ln.running_mean[i]))
        issues.push_back(where + " node " + std::to_string(i) + ": invalid running statistics");
    }
  }
  return issues;
}

GrowResult grow_edges(Network& net, std::span<const EdgeKey> pairs, const EdgeInit& init) {
  std::vector<Edge> fresh;
  fresh.reserve(pairs.size());
  for (const EdgeKey& k : pairs) fresh.push_back(Edge{k.src, k.dst, 0.0, 0.0, 0});
  const std::vector<bool> accepted = net.insert_edges(fresh);

  GrowResult result;
  std::vector<EdgeKey> grown;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (accepted[i]) {
      ++result.grown;
      grown.push_back(pairs[i]);
    } else {
      result.skipped.push_back(pairs[i]);
    }
  }

  if (const auto* random = std::get_if<ScaledRandomInit>(&init)) {
    std::sort(grown.begin(), grown.end());
    Rng rng(random->seed);
    for (const EdgeKey& k : grown) {
      const double fan_in = static_cast<double>(std::max<std::size_t>(1, net.incoming(k.dst).size()));
      const double bound = 1.0 / std::sqrt(fan_in);
      net.edge(*net.find(k)).weight = rng.uniform(-bound, bound);
    }
  }
  return result;
}

std::vector<EdgeKey> select_prunable(const Network& net, std::size_t count,
                                     const std::set<EdgeKey>& protected_keys) {
  std::vector<std::size_t> order;
  order.reserve(net.edge_count());
  for (std::size_t i = 0; i < net.edge_count(); ++i)
    if (!protected_keys.count(net.edge(i).key())) order.push_back(i);
  if (count > order.size())
    throw ConfigError("prune count " + std::to_string(count) + " exceeds " +
                      std::to_string(order.size()) + " prunable edges");
  // Edge indices follow key order, so comparing indices applies the tie-break.
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double wa = std::abs(net.edge(a).weight);
                      const double wb = std::abs(net.edge(b).weight);
                      return wa < wb || (wa == wb && a < b);
                    });
  std::vector<EdgeKey> keys;
  keys.reserve(count);
  for (std::size_t i = 0; i < count; ++i) keys.push_back(net.edge(order[i]).key());
  return keys;
}

std::vector<Edge> prune_edges(Network& net, std::size_t count,
                              const std::set<EdgeKey>& protected_keys) {
  const auto keys = select_prunable(net, count, protected_keys);
  return net.remove_edges(keys);
}

std::size_t forward_pair_count(const std::vector<std::size_t>& layer_widths, std::size_t min_gap) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < layer_widths.size(); ++i)
    for (std::size_t j = i + std::max<std::size_t>(1, min_gap); j < layer_widths.size(); ++j)
      n += layer_widths[i] * layer_widths[j];
  return n;
}

std::vector<double> density_by_distance(const Network& net) {
  const std::size_t L = net.layer_count();
  std::vector<double> present(L, 0.0), possible(L, 0.0);
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = i + 1; j < L; ++j)
      possible[j - i] += static_cast<double>(net.width(i) * net.width(j));
  for (const Edge& e : net.edges()) present[e.dst.layer - e.src.layer] += 1.0;
  std::vector<double> density(L, 0.0);
  for (std::size_t d = 1; d < L; ++d) density[d] = possible[d] > 0 ? present[d] / possible[d] : 0.0;
  return density;
}

// ---------------------------------------------------------------------------
// Checkpoint document

namespace {

constexpr int kFormatVersion = 1;

nlohmann::json to_json(const Network& net) {
  using nlohmann::json;
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["layer_widths"] = net.layer_widths();
  doc["step_count"] = net.step_count();
  json norm = json::array();
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const LayerNorm& ln = net.norm(l);
    norm.push_back({{"layer", l},
                    {"scale", ln.scale},
                    {"shift", ln.shift},
                    {"running_mean", ln.running_mean},
                    {"running_var", ln.running_var}});
  }
  doc["norm_state"] = std::move(norm);
  json edges = json::array();
  for (const Edge& e : net.edges()) {
    edges.push_back({{"src_layer", e.src.layer},
                     {"src_index", e.src.index},
                     {"dst_layer", e.dst.layer},
                     {"dst_index", e.dst.index},
                     {"weight", e.weight},
                     {"momentum", e.momentum},
                     {"age", e.age}});
  }
  doc["edges"] = std::move(edges);
  return doc;
}

template <typename T>
T field(const nlohmann::json& obj, const char* name, const std::string& where) {
  if (!obj.is_object() || !obj.contains(name))
    throw FormatError(where + ": missing field '" + name + "'");
  try {
    return obj.at(name).get<T>();
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(where + "." + name + ": " + ex.what());
  }
}

}  // namespace

std::string checkpoint_to_string(const Network& net) { return to_json(net).dump(1) + "\n"; }

Network checkpoint_from_string(const std::string& text, const std::string& origin) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw FormatError(origin + ": parse error at byte " + std::to_string(ex.byte) + ": " + ex.what());
  }
  const int version = field<int>(doc, "format_version", origin);
  if (version != kFormatVersion)
    throw FormatError(origin + ": unsupported format_version " + std::to_string(version));

  auto widths = field<std::vector<std::size_t>>(doc, "layer_widths", origin);
  const auto step_count = field<std::uint64_t>(doc, "step_count", origin);

  if (!doc.contains("norm_state") || !doc["norm_state"].is_array())
    throw FormatError(origin + ": missing norm_state array");
  const auto& norm_doc = doc["norm_state"];
  std::vector<LayerNorm> norm(norm_doc.size());
  for (std::size_t l = 0; l < norm_doc.size(); ++l) {
    const std::string where = origin + ": norm_state[" + std::to_string(l) + "]";
    norm[l].scale = field<std::vector<double>>(norm_doc[l], "scale", where);
    norm[l].shift = field<std::vector<double>>(norm_doc[l], "shift", where);
    norm[l].running_mean = field<std::vector<double>>(norm_doc[l], "running_mean", where);
    norm[l].running_var = field<std::vector<double>>(norm_doc[l], "running_var", where);
  }

  if (!doc.contains("edges") || !doc["edges"].is_array())
    throw FormatError(origin + ": missing edges array");
  std::vector<Edge> edges;
  edges.reserve(doc["edges"].size());
  for (std::size_t i = 0; i < doc["edges"].size(); ++i) {
    const auto& rec = doc["edges"][i];
    const std::string where = origin + ": edges[" + std::to_string(i) + "]";
    Edge e;
    e.src = {field<std::uint32_t>(rec, "src_layer", where), field<std::uint32_t>(rec, "src_index", where)};
    e.dst = {field<std::uint32_t>(rec, "dst_layer", where), field<std::uint32_t>(rec, "dst_index", where)};
    e.weight = field<double>(rec, "weight", where);
    e.momentum = field<double>(rec, "momentum", where);
    e.age = field<std::uint64_t>(rec, "age", where);
    edges.push_back(e);
  }

  Network net = Network::from_parts(std::move(widths), std::move(edges), std::move(norm), step_count);
  const auto issues = validate(net);
  if (!issues.empty()) {
    std::string msg = origin + ": invalid network:";
    for (const auto& s : issues) msg += "\n  " + s;
    throw FormatError(msg);
  }
  return net;
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  const auto issues = validate(net);
  if (!issues.empty()) throw FormatError("refusing to save invalid network: " + issues.front());
  // Write-then-rename so an aborted save never clobbers the previous checkpoint.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    out << checkpoint_to_string(net);
    if (!out) throw FormatError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_string(buf.str(), path.string());
}

std::string to_string(NodeRef n) { return std::to_string(n.layer) + ":" + std::to_string(n.index); }

std::string to_string(const EdgeKey& k) { return to_string(k.src) + "->" + to_string(k.dst); }

NodeRef parse_node_ref(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("node reference '" + text + "' is not L:I");
  try {
    std::size_t used = 0;
    const unsigned long layer = std::stoul(text.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("layer");
    const std::string rest = text.substr(colon + 1);
    const unsigned long index = std::stoul(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("index");
    return {static_cast<std::uint32_t>(layer), static_cast<std::uint32_t>(index)};
  } catch (const std::logic_error&) {
    throw ConfigError("node reference '" + text + "' is not L:I");
  }
}

}  // namespace livewire
