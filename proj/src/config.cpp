#include "livewire/config.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "livewire/error.hpp"

namespace livewire {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::string real_text(double v) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return out.str();
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text, const std::string& origin) {
  KeyValues kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(n) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(n) + ": empty key");
    if (kv.values_.count(key)) throw ConfigError(origin + ":" + std::to_string(n) + ": duplicate key '" + key + "'");
    kv.values_[key] = trim(line.substr(eq + 1));
    kv.lines_[key] = n;
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

std::string KeyValues::where(const std::string& key) const {
  auto it = lines_.find(key);
  return origin_ + ":" + (it == lines_.end() ? std::string("?") : std::to_string(it->second)) + ": " + key;
}

std::string KeyValues::text(const std::string& key, const std::string& fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValues::real(const std::string& key, double fallback) {
  if (!has(key)) return text(key, ""), fallback;
  const std::string v = text(key, "");
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(where(key) + ": '" + v + "' is not a number");
  return out;
}

std::int64_t KeyValues::integer(const std::string& key, std::int64_t fallback) {
  if (!has(key)) return text(key, ""), fallback;
  const std::string v = text(key, "");
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(where(key) + ": '" + v + "' is not an integer");
  return out;
}

std::uint64_t KeyValues::unsigned_integer(const std::string& key, std::uint64_t fallback) {
  if (!has(key)) return text(key, ""), fallback;
  const std::string v = text(key, "");
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(where(key) + ": '" + v + "' is not a non-negative integer");
  return out;
}

bool KeyValues::boolean(const std::string& key, bool fallback) {
  if (!has(key)) return text(key, ""), fallback;
  const std::string v = text(key, "");
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(where(key) + ": '" + v + "' is not a boolean");
}

void KeyValues::require_all_consumed() const {
  for (const auto& [k, v] : values_)
    if (!consumed_.count(k)) throw ConfigError(where(k) + ": unknown key");
}

std::vector<NodeRef> parse_node_list(const std::string& text) {
  std::vector<NodeRef> nodes;
  for (const auto& item : split(text, ',')) nodes.push_back(parse_node_ref(item));
  return nodes;
}

void RunConfig::check() const {
  if (layer_widths.size() < 2) throw ConfigError("layer_widths needs at least 2 layers");
  for (auto w : layer_widths)
    if (w == 0) throw ConfigError("layer widths must be positive");
  init.check();
  rewire.check();
  optimizer.check();
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (norm_statistics == NormStatistics::batch && batch_size < 2)
    throw ConfigError("batch statistics need batch_size >= 2");
  if (rewire_interval == 0) throw ConfigError("rewire_interval must be positive");
  if (log_interval == 0) throw ConfigError("log_interval must be positive");
  if (adaptive.enabled && !(adaptive.smoothing >= 0.0 && adaptive.smoothing < 1.0))
    throw ConfigError("adaptive_smoothing must lie in [0, 1)");
  for (NodeRef n : track_nodes)
    if (n.layer >= layer_widths.size() || n.index >= layer_widths[n.layer])
      throw ConfigError("track_nodes entry " + to_string(n) + " is outside the network");
}

namespace {

CyclicSchedule read_schedule(KeyValues& kv, const std::string& prefix, const CyclicSchedule& d) {
  CyclicSchedule s;
  s.base = kv.real(prefix + "_base", d.base);
  s.peak = kv.real(prefix + "_peak", d.peak);
  s.floor = kv.real(prefix + "_floor", d.floor);
  s.warmup_steps = kv.integer(prefix + "_warmup_steps", d.warmup_steps);
  s.decay_steps = kv.integer(prefix + "_decay_steps", d.decay_steps);
  return s;
}

void write_schedule(std::ostream& out, const std::string& prefix, const CyclicSchedule& s) {
  out << prefix << "_base = " << real_text(s.base) << "\n"
      << prefix << "_peak = " << real_text(s.peak) << "\n"
      << prefix << "_floor = " << real_text(s.floor) << "\n"
      << prefix << "_warmup_steps = " << s.warmup_steps << "\n"
      << prefix << "_decay_steps = " << s.decay_steps << "\n";
}

std::string widths_text(const std::vector<std::size_t>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
  return s;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  KeyValues kv = KeyValues::parse(text, origin);
  RunConfig c;
  const RunConfig d;

  if (kv.has("layer_widths")) {
    c.layer_widths.clear();
    for (const auto& part : split(kv.text("layer_widths", ""), ',')) {
      std::size_t used = 0;
      try {
        c.layer_widths.push_back(std::stoul(part, &used));
      } catch (const std::logic_error&) {
        used = 0;
      }
      if (used != part.size() || part.empty()) throw ConfigError(origin + ": layer_widths entry '" + part + "' is invalid");
    }
  }

  c.init.sparsity_hyperparameter = kv.real("sparsity_hyperparameter", d.init.sparsity_hyperparameter);
  c.init.branching_factor = kv.real("branching_factor", d.init.branching_factor);
  const std::string rule = kv.text("weight_scale_rule", "fan-in-scaled");
  if (rule == "fan-in-scaled") {
    c.init.weight_scale_rule = FanInScaled{};
  } else if (rule.rfind("fixed:", 0) == 0) {
    try {
      c.init.weight_scale_rule = FixedScale{std::stod(rule.substr(6))};
    } catch (const std::logic_error&) {
      throw ConfigError(origin + ": weight_scale_rule '" + rule + "' is invalid");
    }
  } else {
    throw ConfigError(origin + ": weight_scale_rule must be fan-in-scaled or fixed:<sigma>");
  }
  c.init.seed = kv.unsigned_integer("init_seed", d.init.seed);

  c.rewire.queue_capacity = kv.unsigned_integer("queue_capacity", d.rewire.queue_capacity);
  c.rewire.growth = read_schedule(kv, "growth", d.rewire.growth);
  c.rewire.prune_ratio = read_schedule(kv, "prune_ratio", d.rewire.prune_ratio);
  c.rewire.min_layer_gap = static_cast<std::uint32_t>(kv.unsigned_integer("min_layer_gap", d.rewire.min_layer_gap));
  c.rewire.distance_preference = kv.real("distance_preference", d.rewire.distance_preference);
  c.rewire.scoring = parse_scoring(kv.text("scoring", to_string(d.rewire.scoring)));
  c.rewire.new_edge_init = parse_new_edge_init(kv.text("new_edge_init", to_string(d.rewire.new_edge_init)));
  c.rewire.strength = parse_strength_aggregate(kv.text("strength_aggregate", to_string(d.rewire.strength)));
  c.rewire.output_signal = parse_output_signal(kv.text("output_queue_signal", to_string(d.rewire.output_signal)));
  c.rewire.queue_statistics =
      parse_queue_statistics(kv.text("queue_statistics", to_string(d.rewire.queue_statistics)));
  c.rewire.seed = kv.unsigned_integer("growth_seed", d.rewire.seed);

  c.optimizer.momentum_coeff = kv.real("momentum_coeff", d.optimizer.momentum_coeff);
  c.optimizer.schedule.eta_new = kv.real("eta_new", d.optimizer.schedule.eta_new);
  c.optimizer.schedule.eta_floor = kv.real("eta_floor", d.optimizer.schedule.eta_floor);
  c.optimizer.schedule.halflife = kv.real("halflife", d.optimizer.schedule.halflife);
  c.optimizer.schedule.decay =
      parse_credibility_decay(kv.text("credibility_decay", to_string(d.optimizer.schedule.decay)));
  c.optimizer.schedule.global_scale = read_schedule(kv, "lr_scale", d.optimizer.schedule.global_scale);
  const std::string clip = kv.text("gradient_clip", "none");
  if (clip != "none") {
    try {
      c.optimizer.gradient_clip = std::stod(clip);
    } catch (const std::logic_error&) {
      throw ConfigError(origin + ": gradient_clip must be 'none' or a number");
    }
  }
  c.optimizer.norm_rate = kv.real("norm_rate", d.optimizer.norm_rate);
  c.optimizer.boost.enabled = kv.boolean("boost_enabled", d.optimizer.boost.enabled);
  c.optimizer.boost.factor = kv.real("boost_factor", d.optimizer.boost.factor);
  c.optimizer.boost.percentile = kv.real("boost_percentile", d.optimizer.boost.percentile);
  c.optimizer.boost.smoothing = kv.real("boost_smoothing", d.optimizer.boost.smoothing);

  c.loss = parse_loss_kind(kv.text("loss", to_string(d.loss)));
  c.dropout_rate = kv.real("dropout_rate", d.dropout_rate);
  c.batch_size = kv.unsigned_integer("batch_size", d.batch_size);
  const std::string stats = kv.text("norm_statistics", "batch");
  if (stats == "batch")
    c.norm_statistics = NormStatistics::batch;
  else if (stats == "running")
    c.norm_statistics = NormStatistics::running;
  else
    throw ConfigError(origin + ": norm_statistics must be batch or running");

  c.rewire_interval = kv.unsigned_integer("rewire_interval", d.rewire_interval);
  c.adaptive.enabled = kv.boolean("adaptive_rewire", d.adaptive.enabled);
  c.adaptive.threshold = kv.real("adaptive_threshold", d.adaptive.threshold);
  c.adaptive.smoothing = kv.real("adaptive_smoothing", d.adaptive.smoothing);
  c.epochs = kv.unsigned_integer("epochs", d.epochs);
  c.data_seed = kv.unsigned_integer("data_seed", d.data_seed);
  c.dropout_seed = kv.unsigned_integer("dropout_seed", d.dropout_seed);
  c.shuffle = kv.boolean("shuffle", d.shuffle);
  c.track_nodes = parse_node_list(kv.text("track_nodes", ""));
  c.event_threshold = kv.real("event_threshold", d.event_threshold);
  c.mi_interval = kv.unsigned_integer("mi_interval", d.mi_interval);
  c.log_interval = kv.unsigned_integer("log_interval", d.log_interval);
  c.output_dir = kv.text("output_dir", "");

  kv.require_all_consumed();
  c.check();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path.string());
}

std::string to_config_string(const RunConfig& c) {
  std::ostringstream out;
  out << "# network and initialization\n";
  out << "layer_widths = " << widths_text(c.layer_widths) << "\n";
  out << "sparsity_hyperparameter = " << real_text(c.init.sparsity_hyperparameter) << "\n";
  out << "branching_factor = " << real_text(c.init.branching_factor) << "\n";
  if (const auto* f = std::get_if<FixedScale>(&c.init.weight_scale_rule))
    out << "weight_scale_rule = fixed:" << real_text(f->sigma) << "\n";
  else
    out << "weight_scale_rule = fan-in-scaled\n";
  out << "init_seed = " << c.init.seed << "\n";
  out << "\n# rewiring\n";
  out << "queue_capacity = " << c.rewire.queue_capacity << "\n";
  write_schedule(out, "growth", c.rewire.growth);
  write_schedule(out, "prune_ratio", c.rewire.prune_ratio);
  out << "min_layer_gap = " << c.rewire.min_layer_gap << "\n";
  out << "distance_preference = " << real_text(c.rewire.distance_preference) << "\n";
  out << "scoring = " << to_string(c.rewire.scoring) << "\n";
  out << "new_edge_init = " << to_string(c.rewire.new_edge_init) << "\n";
  out << "strength_aggregate = " << to_string(c.rewire.strength) << "\n";
  out << "output_queue_signal = " << to_string(c.rewire.output_signal) << "\n";
  out << "queue_statistics = " << to_string(c.rewire.queue_statistics) << "\n";
  out << "growth_seed = " << c.rewire.seed << "\n";
  out << "\n# optimizer\n";
  out << "momentum_coeff = " << real_text(c.optimizer.momentum_coeff) << "\n";
  out << "eta_new = " << real_text(c.optimizer.schedule.eta_new) << "\n";
  out << "eta_floor = " << real_text(c.optimizer.schedule.eta_floor) << "\n";
  out << "halflife = " << real_text(c.optimizer.schedule.halflife) << "\n";
  out << "credibility_decay = " << to_string(c.optimizer.schedule.decay) << "\n";
  write_schedule(out, "lr_scale", c.optimizer.schedule.global_scale);
  out << "gradient_clip = " << (c.optimizer.gradient_clip ? real_text(*c.optimizer.gradient_clip) : "none") << "\n";
  out << "norm_rate = " << real_text(c.optimizer.norm_rate) << "\n";
  out << "boost_enabled = " << (c.optimizer.boost.enabled ? "true" : "false") << "\n";
  out << "boost_factor = " << real_text(c.optimizer.boost.factor) << "\n";
  out << "boost_percentile = " << real_text(c.optimizer.boost.percentile) << "\n";
  out << "boost_smoothing = " << real_text(c.optimizer.boost.smoothing) << "\n";
  out << "\n# propagation\n";
  out << "loss = " << to_string(c.loss) << "\n";
  out << "dropout_rate = " << real_text(c.dropout_rate) << "\n";
  out << "batch_size = " << c.batch_size << "\n";
  out << "norm_statistics = " << (c.norm_statistics == NormStatistics::batch ? "batch" : "running") << "\n";
  out << "\n# loop\n";
  out << "rewire_interval = " << c.rewire_interval << "\n";
  out << "adaptive_rewire = " << (c.adaptive.enabled ? "true" : "false") << "\n";
  out << "adaptive_threshold = " << real_text(c.adaptive.threshold) << "\n";
  out << "adaptive_smoothing = " << real_text(c.adaptive.smoothing) << "\n";
  out << "epochs = " << c.epochs << "\n";
  out << "data_seed = " << c.data_seed << "\n";
  out << "dropout_seed = " << c.dropout_seed << "\n";
  out << "shuffle = " << (c.shuffle ? "true" : "false") << "\n";
  std::string nodes;
  for (std::size_t i = 0; i < c.track_nodes.size(); ++i) nodes += (i ? "," : "") + to_string(c.track_nodes[i]);
  out << "track_nodes = " << nodes << "\n";
  out << "event_threshold = " << real_text(c.event_threshold) << "\n";
  out << "mi_interval = " << c.mi_interval << "\n";
  out << "log_interval = " << c.log_interval << "\n";
  out << "output_dir = " << c.output_dir.string() << "\n";
  return out.str();
}

FewShotProtocol parse_protocol(const std::string& text, const std::string& origin) {
  KeyValues kv = KeyValues::parse(text, origin);
  FewShotProtocol p;
  const FewShotProtocol d;
  p.base_classes = kv.unsigned_integer("base_classes", d.base_classes);
  p.novel_classes = kv.unsigned_integer("novel_classes", d.novel_classes);
  p.shots = kv.unsigned_integer("shots", d.shots);
  p.base_train = kv.unsigned_integer("base_train", d.base_train);
  p.base_test = kv.unsigned_integer("base_test", d.base_test);
  p.novel_query = kv.unsigned_integer("novel_query", d.novel_query);
  p.input_dim = kv.unsigned_integer("input_dim", d.input_dim);
  p.cluster_stddev = kv.real("cluster_stddev", d.cluster_stddev);
  p.center_separation = kv.real("center_separation", d.center_separation);
  p.seed = kv.unsigned_integer("seed", d.seed);
  p.phase2_epochs = kv.unsigned_integer("phase2_epochs", d.phase2_epochs);
  p.phase2_batch_size = kv.unsigned_integer("phase2_batch_size", d.phase2_batch_size);
  p.repeats = kv.unsigned_integer("repeats", d.repeats);
  kv.require_all_consumed();
  p.check();
  return p;
}

FewShotProtocol load_protocol(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open protocol " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_protocol(buf.str(), path.string());
}

TaskSpec parse_task_spec(const std::string& text, const std::string& origin) {
  KeyValues kv = KeyValues::parse(text, origin);
  const std::string kind = kv.text("task", "");
  if (kind != "coincidence") throw ConfigError(origin + ": task must be 'coincidence'");
  TaskSpec s;
  const CoincidenceTask d;
  s.task.n_groups = kv.unsigned_integer("n_groups", d.n_groups);
  s.task.group_width = kv.unsigned_integer("group_width", d.group_width);
  if (kv.has("correlated_pairs")) {
    s.task.correlated_pairs.clear();
    for (const auto& item : split(kv.text("correlated_pairs", ""), ',')) {
      const auto dash = item.find('-');
      try {
        if (dash == std::string::npos) throw std::invalid_argument(item);
        s.task.correlated_pairs.emplace_back(std::stoul(item.substr(0, dash)), std::stoul(item.substr(dash + 1)));
      } catch (const std::logic_error&) {
        throw ConfigError(origin + ": correlated_pairs entry '" + item + "' is not i-j");
      }
    }
  }
  s.task.noise = kv.real("noise", d.noise);
  s.task.seed = kv.unsigned_integer("seed", d.seed);
  s.task.strong_mean = kv.real("strong_mean", d.strong_mean);
  s.task.strong_stddev = kv.real("strong_stddev", d.strong_stddev);
  s.samples = kv.unsigned_integer("samples", s.samples);
  kv.require_all_consumed();
  s.task.check();
  return s;
}

TaskSpec load_task_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open task spec " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_task_spec(buf.str(), path.string());
}

}  // namespace livewire
