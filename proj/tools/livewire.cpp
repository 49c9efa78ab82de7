#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "livewire/config.hpp"
#include "livewire/error.hpp"
#include "livewire/harness.hpp"
#include "livewire/infometrics.hpp"
#include "livewire/initializer.hpp"
#include "livewire/tasks.hpp"
#include "livewire/topology.hpp"

namespace fs = std::filesystem;
using namespace livewire;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

bool is_csv(const fs::path& p) { return p.extension() == ".csv"; }

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

CsvSchema read_schema(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return CsvSchema::from_string(buf.str(), path.string());
}

int cmd_train(const fs::path& config, const fs::path& data_path, const fs::path& out) {
  RunConfig cfg = load_run_config(config);
  cfg.output_dir = out;
  Dataset data;
  if (is_csv(data_path)) {
    CsvData csv = load_csv(data_path);
    fs::create_directories(out);
    write_file(out / "data_schema.json", csv.schema.to_string());
    data = std::move(csv.data);
  } else {
    const TaskSpec spec = load_task_spec(data_path);
    data = gen_coincidence(spec.task, spec.samples).data;
  }
  if (data.inputs.cols() != cfg.layer_widths.front() || data.targets.cols() != cfg.layer_widths.back())
    throw ConfigError("layer_widths " + std::to_string(cfg.layer_widths.front()) + "..." +
                      std::to_string(cfg.layer_widths.back()) + " do not match the data (" +
                      std::to_string(data.inputs.cols()) + " features, " + std::to_string(data.targets.cols()) +
                      " classes)");

  fs::create_directories(out);
  write_file(out / "config.txt", to_config_string(cfg));
  std::vector<std::string> warnings;
  Network net = init_network(cfg.layer_widths, cfg.init, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  Trainer trainer(cfg, std::move(net));
  trainer.fit(data);
  const EvalResult r = evaluate(trainer.network(), data, cfg.loss);
  std::cout << nlohmann::json{{"train_loss", r.loss},
                              {"train_accuracy", r.accuracy},
                              {"edge_count", trainer.network().edge_count()},
                              {"steps", trainer.network().step_count()},
                              {"checkpoint", (out / "checkpoint_final.json").string()}}
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_resume(const fs::path& config, const fs::path& data_path, const fs::path& checkpoint, const fs::path& out) {
  RunConfig cfg = load_run_config(config);
  cfg.output_dir = out;
  Dataset data;
  if (is_csv(data_path)) {
    data = load_csv(data_path).data;
  } else {
    const TaskSpec spec = load_task_spec(data_path);
    data = gen_coincidence(spec.task, spec.samples).data;
  }
  Trainer trainer = Trainer::resume(cfg, checkpoint);
  trainer.fit(data);
  std::cout << "resumed to step " << trainer.network().step_count() << "\n";
  return 0;
}

int cmd_eval(const fs::path& checkpoint, const fs::path& data_path, const std::string& loss_name,
             const std::string& schema_arg) {
  const Network net = load_checkpoint(checkpoint);
  fs::path schema_path = schema_arg.empty() ? checkpoint.parent_path() / "data_schema.json" : fs::path(schema_arg);
  CsvSchema schema;
  if (fs::exists(schema_path)) schema = read_schema(schema_path);
  const CsvData csv = load_csv(data_path, schema);
  const EvalResult r = evaluate(net, csv.data, parse_loss_kind(loss_name));
  std::cout << nlohmann::json{{"loss", r.loss}, {"accuracy", r.accuracy}, {"samples", r.samples}}.dump(2) << "\n";
  return 0;
}

int cmd_fewshot(const fs::path& config, const fs::path& protocol, const fs::path& out) {
  const RunConfig cfg = load_run_config(config);
  const FewShotProtocol p = load_protocol(protocol);
  const FewShotReport report = run_fewshot(cfg, p, out);
  std::cout << "few-shot: " << report.verdict.forgetting_wins << "/" << report.verdict.runs
            << " runs with forgetting <= control, novel ratio " << report.verdict.novel_ratio << ", "
            << (report.verdict.passed ? "supported" : "negative result") << "\n"
            << "report: " << (out / "fewshot_report.json").string() << "\n";
  return 0;
}

int cmd_inspect(const fs::path& checkpoint, const std::string& nodes, const std::string& events) {
  const Network net = load_checkpoint(checkpoint);
  std::optional<EventLog> log;
  if (!events.empty()) log = EventLog::load(events);
  std::cout << inspect(net, parse_node_list(nodes), log ? &*log : nullptr) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse layered networks that rewire themselves while training"};
  app.require_subcommand(1);

  std::string config, data, out, checkpoint, protocol, nodes, events, schema, resume_from;
  std::string loss = "softmax-cross-entropy";

  auto* train = app.add_subcommand("train", "Train a network from a config file");
  train->add_option("--config", config, "Run config (key = value)")->required();
  train->add_option("--data", data, "CSV file or coincidence task spec")->required();
  train->add_option("--out", out, "Output directory")->required();
  train->add_option("--resume", resume_from, "Continue from a checkpoint written by an earlier run");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a CSV file");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", data, "CSV file")->required();
  eval->add_option("--loss", loss, "softmax-cross-entropy or mean-squared-error");
  eval->add_option("--schema", schema, "Data schema (default: data_schema.json beside the checkpoint)");

  auto* fewshot = app.add_subcommand("fewshot", "Run the paired few-shot forgetting protocol");
  fewshot->add_option("--config", config, "Run config")->required();
  fewshot->add_option("--protocol", protocol, "Few-shot protocol file")->required();
  fewshot->add_option("--out", out, "Output directory")->required();

  auto* insp = app.add_subcommand("inspect", "Report topology statistics of a checkpoint");
  insp->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  insp->add_option("--nodes", nodes, "Comma-separated L:I nodes");
  insp->add_option("--events", events, "Event log for MI snapshots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*train) {
      if (!resume_from.empty()) return cmd_resume(config, data, resume_from, out);
      return cmd_train(config, data, out);
    }
    if (*eval) return cmd_eval(checkpoint, data, loss, schema);
    if (*fewshot) return cmd_fewshot(config, protocol, out);
    if (*insp) return cmd_inspect(checkpoint, nodes, events);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
