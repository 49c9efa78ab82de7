#include <doctest.h>

#include "livewire/config.hpp"
#include "livewire/error.hpp"

using namespace livewire;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_run_config(text, "run.cfg");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "no error";
}

}  // namespace

TEST_CASE("run config round-trips through its text form") {
  RunConfig cfg;
  cfg.layer_widths = {5, 7, 3};
  cfg.init.sparsity_hyperparameter = 0.3;
  cfg.init.branching_factor = -0.25;
  cfg.init.weight_scale_rule = FixedScale{0.125};
  cfg.rewire.growth = {1, 2, 3, 4, 5};
  cfg.rewire.scoring = Scoring::gradient_free;
  cfg.rewire.output_signal = OutputQueueSignal::target;
  cfg.rewire.queue_statistics = QueueStatistics::batch;
  cfg.optimizer.gradient_clip = 2.5;
  cfg.optimizer.schedule.decay = CredibilityDecay::exponential;
  cfg.optimizer.boost.enabled = true;
  cfg.loss = LossKind::mean_squared_error;
  cfg.norm_statistics = NormStatistics::running;
  cfg.batch_size = 1;
  cfg.adaptive.enabled = true;
  cfg.track_nodes = {{1, 0}, {1, 6}};
  cfg.output_dir = "runs/a";
  cfg.dropout_rate = 0.1 + 0.2;  // not exactly representable in short decimal

  const std::string text = to_config_string(cfg);
  const RunConfig back = parse_run_config(text);
  CHECK(to_config_string(back) == text);
  CHECK(back.layer_widths == cfg.layer_widths);
  CHECK(back.dropout_rate == cfg.dropout_rate);
  CHECK(std::get<FixedScale>(back.init.weight_scale_rule).sigma == 0.125);
  CHECK(back.track_nodes == cfg.track_nodes);
  CHECK(*back.optimizer.gradient_clip == 2.5);
  CHECK(back.rewire.queue_statistics == QueueStatistics::batch);
  CHECK(to_config_string(parse_run_config("")) == to_config_string(RunConfig{}));
}

TEST_CASE("config errors are specific") {
  CHECK(error_of("layer_widths = 4,4\nbatch_sise = 8\n").find("unknown key") != std::string::npos);
  CHECK(error_of("epochs = 3\nepochs = 4\n").find("run.cfg:2") != std::string::npos);
  CHECK(error_of("epochs = many\n").find("epochs") != std::string::npos);
  CHECK(error_of("epochs = -1\n").find("epochs") != std::string::npos);
  CHECK(error_of("no equals sign\n").find("run.cfg:1") != std::string::npos);
  CHECK(error_of("branching_factor = 0.5\n").find("branching_factor") != std::string::npos);
  CHECK(error_of("loss = hinge\n").find("hinge") != std::string::npos);
  CHECK(error_of("shuffle = maybe\n").find("shuffle") != std::string::npos);
  CHECK(error_of("batch_size = 1\n").find("batch_size") != std::string::npos);
  CHECK(error_of("track_nodes = 9:0\n").find("9:0") != std::string::npos);
  CHECK(error_of("weight_scale_rule = fixed:-1\n") != "no error");
  CHECK(error_of("# comment only\n\n  epochs = 2  # trailing\n") == "no error");
  CHECK_THROWS_AS(load_run_config("/nonexistent/run.cfg"), ConfigError);
}

TEST_CASE("protocol and task specs parse") {
  const FewShotProtocol p = parse_protocol("shots = 3\nbase_classes = 5\nrepeats = 4\nphase2_batch_size = 6\n");
  CHECK(p.shots == 3);
  CHECK(p.base_classes == 5);
  CHECK(p.repeats == 4);
  CHECK(p.phase2_batch_size == 6);
  CHECK_THROWS_AS(parse_protocol("shots = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_protocol("way = 5\n"), ConfigError);

  const TaskSpec t = parse_task_spec("task = coincidence\nn_groups = 6\ncorrelated_pairs = 0-3,1-4\nsamples = 40\n");
  CHECK(t.task.n_groups == 6);
  CHECK(t.task.correlated_pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 3}, {1, 4}});
  CHECK(t.samples == 40);
  CHECK_THROWS_AS(parse_task_spec("task = parity\n"), ConfigError);
  CHECK_THROWS_AS(parse_task_spec("task = coincidence\ncorrelated_pairs = 0/1\n"), ConfigError);

  CHECK(parse_node_list("1:2, 3:0") == std::vector<NodeRef>{{1, 2}, {3, 0}});
  CHECK(parse_node_list("").empty());
  CHECK_THROWS(parse_node_list("1-2"));
}
