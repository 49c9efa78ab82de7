#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "livewire/matrix.hpp"
#include "livewire/topology.hpp"

namespace livewire {

/// One minibatch: inputs [batch x input_width], targets [batch x output_width].
struct Batch {
  Matrix inputs;
  Matrix targets;

  std::size_t size() const { return inputs.rows(); }
};

enum class LossKind { softmax_cross_entropy, mean_squared_error };

enum class NormStatistics {
  batch,    // normalize with the batch's own statistics (training)
  running,  // normalize with the stored running statistics (evaluation)
};

struct ForwardMode {
  NormStatistics statistics = NormStatistics::running;
  double dropout_rate = 0.0;
  std::uint64_t dropout_seed = 0;

  static ForwardMode train(double dropout_rate, std::uint64_t seed) {
    return {NormStatistics::batch, dropout_rate, seed};
  }
  static ForwardMode eval() { return {}; }
};

inline constexpr double kNormEpsilon = 1e-5;
inline constexpr double kRunningMomentum = 0.9;

/// Per-layer record; matrices are node-major [width x batch].
struct LayerTrace {
  Matrix pre_norm;
  Matrix normalized;       // hidden: before scale/shift; input: batch-standardized; output: = pre_norm
  Matrix post_activation;  // after rectifier and dropout (input: raw inputs, output: = pre_norm)
  Matrix keep;             // dropout multiplier per node and sample (hidden layers with dropout only)
  Matrix delta;            // dLoss/d pre_norm for the batch-mean loss, filled by backward()
  std::vector<double> mean;     // statistics used for normalization
  std::vector<double> var;
  std::vector<double> inv_std;
};

struct ActivationTrace {
  std::uint64_t topology_hash = 0;
  std::size_t batch_size = 0;
  ForwardMode mode;
  std::vector<LayerTrace> layers;
  Matrix targets;  // copy of the batch targets [batch x output_width]
  bool has_deltas = false;

  /// Output matrix [batch x output_width].
  Matrix outputs() const;
};

/// Dropout decision for one node and sample. A pure function of its arguments
/// so masks do not depend on evaluation order or network structure.
bool dropout_keep(std::uint64_t seed, NodeRef node, std::size_t sample, double rate);

/// Runs the network layer by layer. The network is read-only; running
/// statistics are committed separately with update_running_statistics().
ActivationTrace forward(const Network& net, const Batch& batch, const ForwardMode& mode);

/// Folds the batch statistics of a batch-statistics trace into the running
/// statistics with momentum kRunningMomentum (variance stored unbiased).
void update_running_statistics(Network& net, const ActivationTrace& trace);

/// Gradient per edge key, aligned with the network's edge order at creation.
struct GradientMap {
  std::uint64_t topology_hash = 0;
  std::vector<EdgeKey> keys;  // sorted
  std::vector<double> values;

  std::optional<double> find(const EdgeKey& key) const;
  std::size_t size() const { return keys.size(); }
};

/// Gradients of the batch-normalization affine parameters, per layer
/// (empty vectors for the exempt input and output layers).
struct NormGradients {
  std::vector<std::vector<double>> scale;
  std::vector<std::vector<double>> shift;
};

struct Gradients {
  double loss = 0.0;
  GradientMap edges;
  NormGradients norm;
};

struct LossResult {
  double loss = 0.0;
  Matrix output_grad;  // dLoss/d output, [batch x output_width]
};

/// Batch-mean loss and its gradient with respect to the outputs.
LossResult loss_and_output_grad(const Matrix& outputs, const Matrix& targets, LossKind loss);

/// Backpropagates through the trace, filling every layer's delta. The edge
/// gradient for (u, v) is the sum over samples of delta(v) * post_activation(u),
/// i.e. the batch mean of per-sample contributions.
Gradients backward(const Network& net, ActivationTrace& trace, LossKind loss);

/// Fraction of samples whose output argmax equals the target argmax.
/// `classes` restricts the argmax to the first `classes` outputs when nonzero.
double accuracy(const Matrix& outputs, const Matrix& targets, std::size_t classes = 0);

std::string to_string(LossKind k);
LossKind parse_loss_kind(const std::string& text);

}  // namespace livewire
