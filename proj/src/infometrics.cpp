#include "livewire/infometrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "livewire/error.hpp"

namespace livewire {

double surprise(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("surprise needs a probability in (0, 1]");
  if (p == 1.0) return 0.0;
  return -std::log2(p);
}

EventLog::EventLog(std::vector<NodeRef> tracked, double threshold)
    : tracked_(std::move(tracked)), threshold_(threshold), events_(tracked_.size()) {
  std::vector<NodeRef> sorted = tracked_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError("event log tracks a node twice");
}

bool EventLog::tracks(NodeRef n) const { return std::find(tracked_.begin(), tracked_.end(), n) != tracked_.end(); }

std::size_t EventLog::slot(NodeRef n) const {
  auto it = std::find(tracked_.begin(), tracked_.end(), n);
  if (it == tracked_.end()) throw ConfigError("node " + livewire::to_string(n) + " is not tracked");
  return static_cast<std::size_t>(it - tracked_.begin());
}

const std::vector<bool>& EventLog::events(NodeRef n) const { return events_[slot(n)]; }

void EventLog::append(const ActivationTrace& trace) {
  for (std::size_t i = 0; i < tracked_.size(); ++i) {
    const NodeRef n = tracked_[i];
    if (n.layer >= trace.layers.size() || n.index >= trace.layers[n.layer].normalized.rows())
      throw ShapeError("tracked node " + livewire::to_string(n) + " is outside the traced network");
    const auto z = trace.layers[n.layer].normalized.row(n.index);
    for (double v : z) events_[i].push_back(v > threshold_);
  }
  observations_ += trace.batch_size;
}

void EventLog::append(const std::vector<std::vector<bool>>& events) {
  if (events.size() != tracked_.size()) throw ShapeError("event append needs one sequence per tracked node");
  const std::size_t n = events.empty() ? 0 : events.front().size();
  for (const auto& e : events)
    if (e.size() != n) throw ShapeError("event sequences must have equal length");
  for (std::size_t i = 0; i < events.size(); ++i) events_[i].insert(events_[i].end(), events[i].begin(), events[i].end());
  observations_ += n;
}

std::string EventLog::to_string() const {
  nlohmann::json doc;
  doc["threshold"] = threshold_;
  doc["observations"] = observations_;
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < tracked_.size(); ++i) {
    std::string bits(events_[i].size(), '0');
    for (std::size_t k = 0; k < bits.size(); ++k)
      if (events_[i][k]) bits[k] = '1';
    nodes.push_back({{"layer", tracked_[i].layer}, {"index", tracked_[i].index}, {"events", bits}});
  }
  doc["nodes"] = std::move(nodes);
  return doc.dump(1) + "\n";
}

EventLog EventLog::from_string(const std::string& text, const std::string& origin) {
  try {
    const auto doc = nlohmann::json::parse(text);
    std::vector<NodeRef> tracked;
    std::vector<std::vector<bool>> events;
    for (const auto& n : doc.at("nodes")) {
      tracked.push_back({n.at("layer").get<std::uint32_t>(), n.at("index").get<std::uint32_t>()});
      const auto bits = n.at("events").get<std::string>();
      std::vector<bool> seq(bits.size());
      for (std::size_t k = 0; k < bits.size(); ++k) {
        if (bits[k] != '0' && bits[k] != '1') throw FormatError(origin + ": event strings must be 0/1");
        seq[k] = bits[k] == '1';
      }
      events.push_back(std::move(seq));
    }
    EventLog log(std::move(tracked), doc.at("threshold").get<double>());
    log.append(events);
    return log;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(origin + ": " + ex.what());
  } catch (const ShapeError& ex) {
    throw FormatError(origin + ": " + ex.what());
  }
}

void EventLog::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << to_string();
}

EventLog EventLog::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open event log " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str(), path.string());
}

JointCounts joint_counts(const std::vector<bool>& a, const std::vector<bool>& b) {
  if (a.size() != b.size()) throw ShapeError("event sequences differ in length");
  JointCounts c{};
  for (std::size_t i = 0; i < a.size(); ++i) ++c[a[i] ? 1 : 0][b[i] ? 1 : 0];
  return c;
}

namespace {

struct Smoothed {
  double p[2][2];
  double pa[2];
  double pb[2];
};

Smoothed smooth(const JointCounts& c) {
  const double total = static_cast<double>(c[0][0] + c[0][1] + c[1][0] + c[1][1]) + 4.0;
  Smoothed s{};
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) s.p[x][y] = (static_cast<double>(c[x][y]) + 1.0) / total;
  for (int x = 0; x < 2; ++x) s.pa[x] = s.p[x][0] + s.p[x][1];
  for (int y = 0; y < 2; ++y) s.pb[y] = s.p[0][y] + s.p[1][y];
  return s;
}

double entropy2(const double (&p)[2]) {
  double h = 0.0;
  for (double q : p)
    if (q > 0.0) h -= q * std::log2(q);
  return h;
}

std::uint64_t total(const JointCounts& c) { return c[0][0] + c[0][1] + c[1][0] + c[1][1]; }

}  // namespace

CoincidenceStats coincidence_stats(const JointCounts& counts) {
  const Smoothed s = smooth(counts);
  CoincidenceStats r;
  r.p_a = s.pa[1];
  r.p_b = s.pb[1];
  r.p_joint = s.p[1][1];
  r.ratio = r.p_joint / (r.p_a * r.p_b);
  return r;
}

CoincidenceStats coincidence_stats(const EventLog& log, NodeRef a, NodeRef b) {
  return coincidence_stats(joint_counts(log.events(a), log.events(b)));
}

MiEstimate mutual_information(const JointCounts& counts) {
  MiEstimate m;
  m.cells = counts;
  m.n_obs = total(counts);
  if (m.n_obs < kMinMiObservations)
    throw ConfigError("mutual information needs at least " + std::to_string(kMinMiObservations) +
                      " observations, got " + std::to_string(m.n_obs));
  const Smoothed s = smooth(counts);
  auto term = [&](int x, int y) { return s.p[x][y] * std::log2(s.p[x][y] / (s.pa[x] * s.pb[y])); };
  // Grouped so that swapping the arguments yields a bit-identical sum.
  const double mi = (term(0, 0) + term(1, 1)) + (term(0, 1) + term(1, 0));
  m.value_bits = std::max(0.0, mi);
  m.entropy_a = entropy2(s.pa);
  m.entropy_b = entropy2(s.pb);
  return m;
}

MiEstimate mutual_information(const EventLog& log, NodeRef a, NodeRef b) {
  return mutual_information(joint_counts(log.events(a), log.events(b)));
}

}  // namespace livewire
