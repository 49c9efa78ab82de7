#include "livewire/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "livewire/error.hpp"
#include "livewire/initializer.hpp"
#include "livewire/rng.hpp"

namespace livewire {

using ojson = nlohmann::ordered_json;

namespace {

ojson stats_json(const std::optional<StrengthStats>& s) {
  if (!s) return nullptr;
  return ojson{{"min", s->min}, {"mean", s->mean}, {"max", s->max}, {"size", s->size}};
}

StrengthStats queue_stats(const ActivationQueue& q) {
  StrengthStats st;
  st.size = q.entries.size();
  if (q.entries.empty()) return st;
  st.min = q.entries.front().strength;
  st.max = q.entries.front().strength;
  double sum = 0.0;
  for (const auto& e : q.entries) {
    st.min = std::min(st.min, e.strength);
    st.max = std::max(st.max, e.strength);
    sum += e.strength;
  }
  st.mean = sum / static_cast<double>(q.entries.size());
  return st;
}

double mean_age(const Network& net) {
  if (net.edge_count() == 0) return 0.0;
  double sum = 0.0;
  for (const Edge& e : net.edges()) sum += static_cast<double>(e.age);
  return sum / static_cast<double>(net.edge_count());
}

EdgeKey parse_edge_key(const std::string& text) {
  const auto arrow = text.find("->");
  if (arrow == std::string::npos) throw FormatError("edge key '" + text + "' is not L:I->L:I");
  return {parse_node_ref(text.substr(0, arrow)), parse_node_ref(text.substr(arrow + 2))};
}

std::vector<MiSnapshot> mi_snapshots(const EventLog& log) {
  std::vector<MiSnapshot> out;
  if (log.observations() < kMinMiObservations) return out;
  const auto& nodes = log.tracked();
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = i + 1; j < nodes.size(); ++j)
      out.push_back({nodes[i], nodes[j], mutual_information(log, nodes[i], nodes[j]),
                     coincidence_stats(log, nodes[i], nodes[j]).ratio});
  return out;
}

ojson mi_json(const std::vector<MiSnapshot>& snaps) {
  ojson arr = ojson::array();
  for (const auto& m : snaps)
    arr.push_back({{"a", to_string(m.a)},
                   {"b", to_string(m.b)},
                   {"mi_bits", m.mi.value_bits},
                   {"ratio", m.ratio},
                   {"n_obs", m.mi.n_obs}});
  return arr;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::string MetricsRecord::to_json_line() const {
  ojson j;
  j["kind"] = "step";
  j["step"] = step;
  j["epoch"] = epoch;
  j["loss"] = loss;
  j["accuracy"] = accuracy ? ojson(*accuracy) : ojson(nullptr);
  j["edge_count"] = edge_count;
  j["density_by_distance"] = density_by_distance;
  j["edges_grown"] = edges_grown;
  j["edges_pruned"] = edges_pruned;
  j["mean_edge_age"] = mean_edge_age;
  j["queue_strength"] = stats_json(queue_strength);
  if (!mi.empty()) j["mi"] = mi_json(mi);
  return j.dump();
}

std::string TrainerState::to_string() const {
  ojson j;
  j["origin_step"] = origin_step;
  j["loss_ema"] = loss_ema ? ojson(*loss_ema) : ojson(nullptr);
  ojson boost_arr = ojson::array();
  for (const auto& [k, v] : boost) boost_arr.push_back({{"edge", livewire::to_string(k)}, {"value", v}});
  j["boost"] = boost_arr;
  j["pending_grown"] = pending_grown;
  j["pending_pruned"] = pending_pruned;
  j["last_queue"] = stats_json(last_queue);
  j["events"] = events ? ojson::parse(events->to_string()) : ojson(nullptr);
  return j.dump(1);
}

TrainerState TrainerState::from_string(const std::string& text, const std::string& origin) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(origin + ": trainer state is not valid JSON (byte " + std::to_string(e.byte) + ")");
  }
  TrainerState s;
  try {
    s.origin_step = j.at("origin_step").get<std::uint64_t>();
    if (!j.at("loss_ema").is_null()) s.loss_ema = j.at("loss_ema").get<double>();
    for (const auto& b : j.at("boost")) s.boost[parse_edge_key(b.at("edge").get<std::string>())] = b.at("value").get<double>();
    s.pending_grown = j.at("pending_grown").get<std::size_t>();
    s.pending_pruned = j.at("pending_pruned").get<std::size_t>();
    if (const auto& q = j.at("last_queue"); !q.is_null())
      s.last_queue = StrengthStats{q.at("min").get<double>(), q.at("mean").get<double>(), q.at("max").get<double>(),
                                   q.at("size").get<std::size_t>()};
    if (const auto& ev = j.at("events"); !ev.is_null()) s.events = EventLog::from_string(ev.dump(), origin + ": events");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(origin + ": malformed trainer state: " + e.what());
  }
  return s;
}

std::filesystem::path state_path_for(const std::filesystem::path& checkpoint) {
  return checkpoint.parent_path() / (checkpoint.stem().string() + ".state.json");
}

Trainer::Trainer(RunConfig cfg, Network net) : Trainer(std::move(cfg), std::move(net), TrainerState{}) {
  state_.origin_step = net_.step_count();
}

Trainer::Trainer(RunConfig cfg, Network net, TrainerState state)
    : cfg_(std::move(cfg)), net_(std::move(net)), state_(std::move(state)) {
  cfg_.check();
  if (const auto problems = validate(net_); !problems.empty())
    throw ShapeError("network fails validation: " + problems.front());
  if (state_.origin_step > net_.step_count()) throw FormatError("trainer state begins after the network's step count");
  for (NodeRef n : cfg_.track_nodes)
    if (!net_.contains(n)) throw ConfigError("tracked node " + to_string(n) + " is not in the network");
  if (!cfg_.track_nodes.empty() && !state_.events) state_.events = EventLog(cfg_.track_nodes, cfg_.event_threshold);
}

Trainer Trainer::resume(RunConfig cfg, const std::filesystem::path& checkpoint) {
  Network net = load_checkpoint(checkpoint);
  const auto sidecar = state_path_for(checkpoint);
  if (!std::filesystem::exists(sidecar)) return Trainer(std::move(cfg), std::move(net));
  TrainerState state = TrainerState::from_string(read_text(sidecar), sidecar.string());
  return Trainer(std::move(cfg), std::move(net), std::move(state));
}

void Trainer::emit(const std::string& line) {
  lines_.push_back(line);
  if (metrics_file_) {
    *metrics_file_ << line << '\n';
    metrics_file_->flush();
  }
}

StepOutcome Trainer::train_step(const Batch& batch, std::uint64_t epoch) {
  const std::uint64_t s = net_.step_count();
  const std::uint64_t local = s - state_.origin_step;
  const ForwardMode mode{cfg_.norm_statistics, cfg_.dropout_rate, mix_seed(cfg_.dropout_seed, s)};
  StepOutcome out;

  ActivationTrace trace = forward(net_, batch, mode);
  Gradients grads = backward(net_, trace, cfg_.loss);
  if (!std::isfinite(grads.loss)) throw NumericError("non-finite loss at step " + std::to_string(s));

  const double a = cfg_.adaptive.smoothing;
  state_.loss_ema = state_.loss_ema ? a * *state_.loss_ema + (1.0 - a) * grads.loss : grads.loss;

  bool due = local % cfg_.rewire_interval == 0;
  if (due && cfg_.adaptive.enabled) due = *state_.loss_ema > cfg_.adaptive.threshold;
  if (due) {
    const RewirePlan plan = plan_rewire(net_, trace, cfg_.rewire, local);
    MutationReport report = apply_plan(net_, plan, cfg_.rewire);
    ++rewire_rounds_;
    out.rewired = true;
    state_.last_queue = queue_stats(plan.queue);
    state_.pending_grown += report.grown.size();
    state_.pending_pruned += report.pruned.size();
    total_grown_ += report.grown.size();
    total_pruned_ += report.pruned.size();

    ojson j;
    j["kind"] = "rewire";
    j["step"] = s;
    j["queue"] = stats_json(state_.last_queue);
    j["candidates"] = plan.candidates.size();
    ojson grown = ojson::array(), pruned = ojson::array();
    for (const auto& k : report.grown) grown.push_back(to_string(k));
    for (const auto& e : report.pruned) pruned.push_back(to_string(e.key()));
    j["grown"] = grown;
    j["pruned"] = pruned;
    j["edge_count"] = report.edge_count;
    j["density"] = report.density;
    j["notes"] = plan.notes;
    emit(j.dump());

    if (!report.grown.empty() || !report.pruned.empty()) {
      trace = forward(net_, batch, mode);
      grads = backward(net_, trace, cfg_.loss);
      if (!std::isfinite(grads.loss)) throw NumericError("non-finite loss at step " + std::to_string(s));
    }
    out.mutation = std::move(report);
  }

  if (state_.events) state_.events->append(trace);
  update_running_statistics(net_, trace);
  out.update = step(net_, grads.edges, cfg_.optimizer, local, cfg_.optimizer.boost.enabled ? &state_.boost : nullptr);
  step_norm(net_, grads.norm, cfg_.optimizer, local);
  out.loss = grads.loss;

  if (local % cfg_.log_interval == 0) {
    MetricsRecord r;
    r.step = s;
    r.epoch = epoch;
    r.loss = grads.loss;
    if (cfg_.loss == LossKind::softmax_cross_entropy) r.accuracy = accuracy(trace.outputs(), batch.targets);
    r.edge_count = net_.edge_count();
    r.density_by_distance = density_by_distance(net_);
    r.edges_grown = state_.pending_grown;
    r.edges_pruned = state_.pending_pruned;
    r.mean_edge_age = mean_age(net_);
    r.queue_strength = state_.last_queue;
    if (state_.events && cfg_.mi_interval > 0 && local % cfg_.mi_interval == 0) r.mi = mi_snapshots(*state_.events);
    state_.pending_grown = 0;
    state_.pending_pruned = 0;
    emit(r.to_json_line());
  }
  return out;
}

std::size_t Trainer::batches_per_epoch(const Dataset& data) const {
  const std::size_t min_batch = cfg_.norm_statistics == NormStatistics::batch ? 2 : 1;
  const std::size_t full = data.size() / cfg_.batch_size;
  const std::size_t rest = data.size() % cfg_.batch_size;
  return full + (rest > 0 && rest >= min_batch ? 1 : 0);
}

void Trainer::fit(const Dataset& data) {
  if (data.size() == 0) throw ConfigError("training data is empty");
  const std::size_t nb = batches_per_epoch(data);
  if (nb == 0) throw ConfigError("training data yields no usable batch");
  const std::size_t min_batch = cfg_.norm_statistics == NormStatistics::batch ? 2 : 1;
  const std::uint64_t total = static_cast<std::uint64_t>(cfg_.epochs) * nb;

  const bool to_disk = !cfg_.output_dir.empty();
  if (to_disk) {
    std::filesystem::create_directories(cfg_.output_dir);
    const auto mode = local_step() == 0 ? std::ios::trunc : std::ios::app;
    metrics_file_.emplace(cfg_.output_dir / "metrics.jsonl", std::ios::binary | std::ios::out | mode);
    if (!*metrics_file_) throw Error("cannot open " + (cfg_.output_dir / "metrics.jsonl").string());
  }

  while (local_step() < total) {
    const std::uint64_t epoch = local_step() / nb;
    const auto batches = make_batches(data, cfg_.batch_size, cfg_.shuffle, cfg_.data_seed, epoch, min_batch);
    for (std::size_t i = local_step() % nb; i < nb; ++i) train_step(batches[i], epoch);
    if (to_disk) save(cfg_.output_dir / ("checkpoint_epoch_" + std::to_string(epoch + 1) + ".json"));
  }
  if (to_disk) save(cfg_.output_dir / "checkpoint_final.json");
  metrics_file_.reset();
}

void Trainer::save(const std::filesystem::path& checkpoint) const {
  save_checkpoint(net_, checkpoint);
  write_text(state_path_for(checkpoint), state_.to_string());
}

TrainResult train(const RunConfig& cfg, const Dataset& data) {
  cfg.check();
  std::vector<std::string> warnings;
  Trainer t(cfg, init_network(cfg.layer_widths, cfg.init, &warnings));
  t.fit(data);
  return {t.network(), t.metrics_lines()};
}

EvalResult evaluate(const Network& net, const Dataset& data, LossKind loss, std::size_t batch_size,
                    std::size_t classes) {
  if (data.size() == 0) throw ShapeError("evaluation data is empty");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (data.inputs.cols() != net.width(0))
    throw ShapeError("data has " + std::to_string(data.inputs.cols()) + " features, network expects " +
                     std::to_string(net.width(0)));
  const std::size_t out_w = net.width(net.output_layer());
  if (data.targets.cols() != out_w)
    throw ShapeError("data has " + std::to_string(data.targets.cols()) + " target columns, network has " +
                     std::to_string(out_w) + " outputs");

  Matrix outputs(data.size(), out_w);
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    rows.clear();
    for (std::size_t r = start; r < std::min(data.size(), start + batch_size); ++r) rows.push_back(r);
    const ActivationTrace trace = forward(net, data.gather(rows), ForwardMode::eval());
    const Matrix o = trace.outputs();
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t v = 0; v < out_w; ++v) outputs(rows[i], v) = o(i, v);
  }
  EvalResult r;
  r.samples = data.size();
  r.loss = loss_and_output_grad(outputs, data.targets, loss).loss;
  r.accuracy = accuracy(outputs, data.targets, classes);
  return r;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> fewshot_widths(const RunConfig& cfg, const FewShotProtocol& p) {
  std::vector<std::size_t> w = cfg.layer_widths;
  w.front() = p.input_dim;
  w.back() = p.base_classes;
  return w;
}

namespace {

std::size_t novel_in_edges(const Network& net, std::size_t base_classes) {
  const auto out = static_cast<std::uint32_t>(net.output_layer());
  std::size_t n = 0;
  for (std::size_t v = base_classes; v < net.width(out); ++v) n += net.incoming({out, static_cast<std::uint32_t>(v)}).size();
  return n;
}

FewShotArm adapt(const RunConfig& cfg, Network net, const FewShotData& data, const FewShotProtocol& p) {
  const Dataset base_test = widen_targets(data.base_test, p.total_classes());
  Trainer t(cfg, std::move(net));
  t.fit(data.novel_support);
  FewShotArm arm;
  arm.phase2_steps = static_cast<std::size_t>(t.local_step());
  arm.edges_grown = t.total_grown();
  arm.edges_pruned = t.total_pruned();
  arm.novel_in_edges = novel_in_edges(t.network(), p.base_classes);
  arm.base_acc_after = evaluate(t.network(), base_test, LossKind::softmax_cross_entropy, 256, p.base_classes).accuracy;
  arm.novel_acc = evaluate(t.network(), data.novel_query, LossKind::softmax_cross_entropy).accuracy;
  return arm;
}

}  // namespace

FewShotRun run_fewshot_once(const RunConfig& cfg, const FewShotProtocol& protocol, std::uint64_t offset) {
  FewShotProtocol p = protocol;
  p.seed += offset;
  p.check();
  const FewShotData data = gen_fewshot(p);

  RunConfig base_cfg = cfg;
  base_cfg.layer_widths = fewshot_widths(cfg, p);
  base_cfg.loss = LossKind::softmax_cross_entropy;
  base_cfg.init.seed += offset;
  base_cfg.data_seed += offset;
  base_cfg.dropout_seed += offset;
  base_cfg.rewire.seed += offset;
  base_cfg.output_dir.clear();
  base_cfg.track_nodes.clear();
  base_cfg.check();

  FewShotRun run;
  run.seed_offset = offset;
  Trainer phase1(base_cfg, init_network(base_cfg.layer_widths, base_cfg.init));
  phase1.fit(data.base_train);
  const Network base = phase1.network();
  run.base_acc_before = evaluate(base, data.base_test, LossKind::softmax_cross_entropy).accuracy;

  RunConfig adapt_cfg = base_cfg;
  adapt_cfg.layer_widths.back() = p.total_classes();
  adapt_cfg.epochs = p.phase2_epochs;
  adapt_cfg.batch_size = p.phase2_batch_size ? p.phase2_batch_size : data.novel_support.size();
  adapt_cfg.norm_statistics = NormStatistics::running;
  adapt_cfg.optimizer.norm_rate = 0.0;
  adapt_cfg.rewire.output_signal = OutputQueueSignal::target;
  adapt_cfg.rewire.queue_statistics = QueueStatistics::batch;

  Network grown = base;
  grown.extend_layer(grown.output_layer(), p.novel_classes);
  run.livewired = adapt(adapt_cfg, std::move(grown), data, p);

  RunConfig control_cfg = adapt_cfg;
  control_cfg.rewire.growth = CyclicSchedule::constant(0.0);
  control_cfg.rewire.prune_ratio = CyclicSchedule::constant(0.0);
  control_cfg.optimizer.schedule.eta_floor = control_cfg.optimizer.schedule.eta_new;
  control_cfg.optimizer.boost.enabled = false;
  control_cfg.adaptive.enabled = false;

  Network dense = base;
  const std::size_t out = dense.output_layer();
  dense.extend_layer(out, p.novel_classes);
  std::vector<EdgeKey> links;
  const auto feeder = static_cast<std::uint32_t>(out - 1);
  for (std::uint32_t u = 0; u < dense.width(feeder); ++u)
    for (std::size_t v = p.base_classes; v < dense.width(out); ++v)
      links.push_back({{feeder, u}, {static_cast<std::uint32_t>(out), static_cast<std::uint32_t>(v)}});
  grow_edges(dense, links, ZeroInit{});
  run.control = adapt(control_cfg, std::move(dense), data, p);
  return run;
}

FewShotVerdict fewshot_verdict(const std::vector<FewShotRun>& runs) {
  FewShotVerdict v;
  v.runs = runs.size();
  double lw = 0.0, ctl = 0.0;
  for (const auto& r : runs) {
    if (r.livewired_drop() <= r.control_drop()) ++v.forgetting_wins;
    lw += r.livewired.novel_acc;
    ctl += r.control.novel_acc;
  }
  v.novel_ratio = ctl > 0.0 ? lw / ctl : (lw > 0.0 ? INFINITY : 1.0);
  const auto required = static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(v.runs)));
  v.passed = v.runs > 0 && v.forgetting_wins >= required && v.novel_ratio >= 0.7;
  return v;
}

std::string FewShotReport::to_json() const {
  ojson j;
  ojson proto;
  proto["base_classes"] = protocol.base_classes;
  proto["novel_classes"] = protocol.novel_classes;
  proto["shots"] = protocol.shots;
  proto["base_train"] = protocol.base_train;
  proto["base_test"] = protocol.base_test;
  proto["novel_query"] = protocol.novel_query;
  proto["input_dim"] = protocol.input_dim;
  proto["cluster_stddev"] = protocol.cluster_stddev;
  proto["center_separation"] = protocol.center_separation;
  proto["seed"] = protocol.seed;
  proto["phase2_epochs"] = protocol.phase2_epochs;
  proto["phase2_batch_size"] = protocol.phase2_batch_size;
  proto["repeats"] = protocol.repeats;
  j["protocol"] = proto;
  j["config"] = to_config_string(config);

  auto arm_json = [](const FewShotArm& a) {
    return ojson{{"base_acc_after", a.base_acc_after}, {"novel_acc", a.novel_acc},
                 {"phase2_steps", a.phase2_steps},     {"edges_grown", a.edges_grown},
                 {"edges_pruned", a.edges_pruned},     {"novel_in_edges", a.novel_in_edges}};
  };
  ojson arr = ojson::array();
  for (const auto& r : runs)
    arr.push_back({{"seed_offset", r.seed_offset},
                   {"base_acc_before", r.base_acc_before},
                   {"livewired", arm_json(r.livewired)},
                   {"control", arm_json(r.control)},
                   {"livewired_drop", r.livewired_drop()},
                   {"control_drop", r.control_drop()}});
  j["runs"] = arr;

  const auto required = static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(verdict.runs)));
  j["forgetting_comparison"] = {
      {"claim", "livewired base-accuracy drop <= control drop in >= 80% of runs, with novel accuracy >= 0.7x control"},
      {"runs", verdict.runs},
      {"forgetting_wins", verdict.forgetting_wins},
      {"required_wins", required},
      {"novel_ratio", std::isfinite(verdict.novel_ratio) ? ojson(verdict.novel_ratio) : ojson("inf")},
      {"passed", verdict.passed},
      {"outcome", verdict.passed ? "supported" : "negative result"}};
  return j.dump(2);
}

FewShotReport run_fewshot(const RunConfig& cfg, const FewShotProtocol& protocol, const std::filesystem::path& out_dir) {
  protocol.check();
  FewShotReport report;
  report.config = cfg;
  report.protocol = protocol;
  for (std::uint64_t r = 0; r < protocol.repeats; ++r) report.runs.push_back(run_fewshot_once(cfg, protocol, r));
  report.verdict = fewshot_verdict(report.runs);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text(out_dir / "fewshot_report.json", report.to_json() + "\n");
  }
  return report;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> age_histogram(const Network& net) {
  std::vector<std::size_t> bins;
  for (const Edge& e : net.edges()) {
    std::size_t b = 0;
    for (std::uint64_t a = e.age; a > 0; a >>= 1) ++b;
    if (b >= bins.size()) bins.resize(b + 1, 0);
    ++bins[b];
  }
  return bins;
}

std::string inspect(const Network& net, const std::vector<NodeRef>& queries, const EventLog* events) {
  ojson j;
  j["layer_widths"] = net.layer_widths();
  j["step_count"] = net.step_count();
  j["edge_count"] = net.edge_count();
  j["density_by_distance"] = density_by_distance(net);

  auto degree_json = [&](bool incoming) {
    ojson layers = ojson::array();
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      std::map<std::size_t, std::size_t> hist;
      for (std::uint32_t v = 0; v < net.width(l); ++v) {
        const NodeRef n{static_cast<std::uint32_t>(l), v};
        ++hist[incoming ? net.incoming(n).size() : net.outgoing(n).size()];
      }
      ojson h = ojson::array();
      for (auto [deg, count] : hist) h.push_back({{"degree", deg}, {"count", count}});
      layers.push_back({{"layer", l}, {"histogram", h}});
    }
    return layers;
  };
  j["in_degree"] = degree_json(true);
  j["out_degree"] = degree_json(false);

  ojson ages = ojson::array();
  const auto bins = age_histogram(net);
  for (std::size_t b = 0; b < bins.size(); ++b) {
    if (bins[b] == 0) continue;
    const std::uint64_t lo = b == 0 ? 0 : std::uint64_t{1} << (b - 1);
    const std::uint64_t hi = b == 0 ? 0 : (std::uint64_t{1} << b) - 1;
    ages.push_back({{"min_age", lo}, {"max_age", hi}, {"count", bins[b]}});
  }
  j["age_histogram"] = ages;

  auto edge_json = [](const Edge& e) {
    return ojson{{"edge", to_string(e.key())}, {"weight", e.weight}, {"momentum", e.momentum}, {"age", e.age}};
  };
  ojson nodes = ojson::array();
  for (NodeRef n : queries) {
    if (!net.contains(n)) throw ConfigError("queried node " + to_string(n) + " is not in the network");
    ojson in = ojson::array(), out = ojson::array();
    for (std::size_t i : net.incoming(n)) in.push_back(edge_json(net.edge(i)));
    for (std::size_t i : net.outgoing(n)) out.push_back(edge_json(net.edge(i)));
    nodes.push_back({{"node", to_string(n)}, {"incoming", in}, {"outgoing", out}});
  }
  j["queries"] = nodes;

  if (events) {
    j["event_observations"] = events->observations();
    if (events->observations() < kMinMiObservations)
      j["mi"] = "needs at least " + std::to_string(kMinMiObservations) + " observations";
    else
      j["mi"] = mi_json(mi_snapshots(*events));
  }
  return j.dump(2);
}

}  // namespace livewire
