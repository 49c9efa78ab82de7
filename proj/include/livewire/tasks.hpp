#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "livewire/matrix.hpp"
#include "livewire/propagation.hpp"

namespace livewire {

/// A labelled sample set. targets are one-hot rows; labels hold class indices.
struct Dataset {
  Matrix inputs;
  Matrix targets;
  std::vector<std::size_t> labels;

  std::size_t size() const { return inputs.rows(); }
  Batch gather(std::span<const std::size_t> rows) const;
  Batch all() const;
};

Dataset make_dataset(Matrix inputs, const std::vector<std::size_t>& labels, std::size_t classes);

/// Same samples with the one-hot targets widened to `classes` columns.
Dataset widen_targets(const Dataset& data, std::size_t classes);

/// Concatenates datasets with equal input and target widths.
Dataset concat(const std::vector<const Dataset*>& parts);

/// Splits the data into consecutive batches. With `shuffle`, the order is a
/// permutation drawn from mix_seed(seed, epoch). A trailing batch smaller than
/// `min_batch` is dropped.
std::vector<Batch> make_batches(const Dataset& data, std::size_t batch_size, bool shuffle, std::uint64_t seed,
                                std::uint64_t epoch, std::size_t min_batch = 1);

// ---------------------------------------------------------------------------

/// Inputs are n_groups blocks of group_width features. Each sample draws one
/// correlated pair and drives both of its groups strongly; the label is the
/// pair index.
struct CoincidenceTask {
  std::size_t n_groups = 4;
  std::size_t group_width = 4;
  std::vector<std::pair<std::size_t, std::size_t>> correlated_pairs = {{0, 1}, {2, 3}};
  double noise = 0.5;  // background stddev, in [0, 1)
  std::uint64_t seed = 0;
  double strong_mean = 3.0;
  double strong_stddev = 0.3;

  void check() const;
  std::size_t input_width() const { return n_groups * group_width; }
  std::size_t group_of_input(std::size_t feature) const { return feature / group_width; }
};

inline constexpr double kEventThreshold = 1.0;

struct CoincidenceData {
  Dataset data;
  std::vector<std::size_t> active_pair;  // generation record per sample
};

/// Strong values are N(strong_mean, strong_stddev) kept above kEventThreshold;
/// background values are noise * N(0, 1) kept below it in magnitude.
CoincidenceData gen_coincidence(const CoincidenceTask& task, std::size_t n);

// ---------------------------------------------------------------------------

/// Gaussian-cluster classification with held-out novel classes.
struct FewShotProtocol {
  std::size_t base_classes = 4;
  std::size_t novel_classes = 2;
  std::size_t shots = 10;  // support samples per novel class
  std::size_t base_train = 100;  // per class
  std::size_t base_test = 50;    // per class
  std::size_t novel_query = 50;  // per class
  std::size_t input_dim = 8;
  double cluster_stddev = 1.0;
  double center_separation = 6.0;  // minimum center distance, in cluster stddevs
  std::uint64_t seed = 0;
  std::size_t phase2_epochs = 30;
  std::size_t phase2_batch_size = 0;  // 0 = whole support set
  std::size_t repeats = 10;           // paired runs, seed offsets 0..repeats-1

  void check() const;
  std::size_t total_classes() const { return base_classes + novel_classes; }
};

struct FewShotData {
  Dataset base_train;     // targets over base classes
  Dataset base_test;      // targets over base classes
  Dataset novel_support;  // targets over all classes
  Dataset novel_query;    // targets over all classes
  Matrix centers;         // [classes x input_dim]
};

FewShotData gen_fewshot(const FewShotProtocol& protocol);

// ---------------------------------------------------------------------------

struct Standardization {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Expected layout of a CSV file. Empty fields are inferred from the file,
/// which is then treated as the training split.
struct CsvSchema {
  std::vector<std::string> feature_names;
  std::vector<std::string> labels;
  std::optional<Standardization> standardization;

  std::string to_string() const;
  static CsvSchema from_string(const std::string& text, const std::string& origin = "<string>");
};

struct CsvData {
  Dataset data;
  CsvSchema schema;  // fully resolved: names, label order, standardization
};

/// Reads "f1,...,fn,label" rows. Features are standardized with the schema's
/// statistics, or with this file's column statistics when none are given.
CsvData load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
CsvData parse_csv(const std::string& text, const CsvSchema& schema = {}, const std::string& origin = "<string>");

}  // namespace livewire
