#include "livewire/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "livewire/error.hpp"
#include "livewire/rng.hpp"

namespace livewire {

Batch Dataset::gather(std::span<const std::size_t> rows) const {
  Batch b{Matrix(rows.size(), inputs.cols()), Matrix(rows.size(), targets.cols())};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(inputs.row(rows[i]).begin(), inputs.cols(), b.inputs.row(i).begin());
    std::copy_n(targets.row(rows[i]).begin(), targets.cols(), b.targets.row(i).begin());
  }
  return b;
}

Batch Dataset::all() const { return {inputs, targets}; }

Dataset make_dataset(Matrix inputs, const std::vector<std::size_t>& labels, std::size_t classes) {
  if (labels.size() != inputs.rows()) throw ShapeError("label count differs from sample count");
  Dataset d;
  d.targets = Matrix(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) throw ShapeError("label exceeds class count");
    d.targets(i, labels[i]) = 1.0;
  }
  d.inputs = std::move(inputs);
  d.labels = labels;
  return d;
}

Dataset widen_targets(const Dataset& data, std::size_t classes) {
  if (classes < data.targets.cols()) throw ShapeError("cannot narrow targets");
  return make_dataset(data.inputs, data.labels, classes);
}

Dataset concat(const std::vector<const Dataset*>& parts) {
  if (parts.empty()) return {};
  const std::size_t in = parts.front()->inputs.cols();
  const std::size_t classes = parts.front()->targets.cols();
  std::size_t n = 0;
  for (const auto* p : parts) {
    if (p->inputs.cols() != in || p->targets.cols() != classes) throw ShapeError("concat: width mismatch");
    n += p->size();
  }
  Matrix inputs(n, in);
  std::vector<std::size_t> labels;
  std::size_t r = 0;
  for (const auto* p : parts) {
    for (std::size_t i = 0; i < p->size(); ++i, ++r) std::copy_n(p->inputs.row(i).begin(), in, inputs.row(r).begin());
    labels.insert(labels.end(), p->labels.begin(), p->labels.end());
  }
  return make_dataset(std::move(inputs), labels, classes);
}

std::vector<Batch> make_batches(const Dataset& data, std::size_t batch_size, bool shuffle, std::uint64_t seed,
                                std::uint64_t epoch, std::size_t min_batch) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    Rng rng(mix_seed(seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, order.size() - start);
    if (len < min_batch) break;
    batches.push_back(data.gather(std::span(order).subspan(start, len)));
  }
  return batches;
}

// ---------------------------------------------------------------------------

void CoincidenceTask::check() const {
  if (n_groups < 2 || group_width < 1) throw ConfigError("coincidence task needs >= 2 groups of width >= 1");
  if (correlated_pairs.empty()) throw ConfigError("coincidence task needs at least one correlated pair");
  if (!(noise >= 0.0 && noise < 1.0)) throw ConfigError("noise must lie in [0, 1)");
  std::set<std::size_t> used;
  for (auto [a, b] : correlated_pairs) {
    if (a >= n_groups || b >= n_groups || a == b) throw ConfigError("correlated pair names an invalid group");
    if (!used.insert(a).second || !used.insert(b).second) throw ConfigError("correlated pairs must be disjoint");
  }
  if (!(strong_mean - 4.0 * strong_stddev > kEventThreshold))
    throw ConfigError("strong activations must sit well above the event threshold");
}

CoincidenceData gen_coincidence(const CoincidenceTask& task, std::size_t n) {
  task.check();
  Rng rng(task.seed);
  const std::size_t width = task.input_width();
  Matrix inputs(n, width);
  CoincidenceData out;
  out.active_pair.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t pair = rng.below(task.correlated_pairs.size());
    out.active_pair[s] = pair;
    const auto [ga, gb] = task.correlated_pairs[pair];
    for (std::size_t f = 0; f < width; ++f) {
      const std::size_t g = task.group_of_input(f);
      double v = 0.0;
      if (g == ga || g == gb) {
        do v = rng.normal(task.strong_mean, task.strong_stddev);
        while (!(v > kEventThreshold));
      } else if (task.noise > 0.0) {
        do v = task.noise * rng.normal();
        while (!(std::abs(v) < kEventThreshold));
      }
      inputs(s, f) = v;
    }
  }
  out.data = make_dataset(std::move(inputs), out.active_pair, task.correlated_pairs.size());
  return out;
}

// ---------------------------------------------------------------------------

void FewShotProtocol::check() const {
  if (shots == 0) throw ConfigError("few-shot protocol needs shots >= 1 (empty support set)");
  if (shots > 20) throw ConfigError("few-shot protocol allows at most 20 shots");
  if (base_classes == 0 || novel_classes == 0) throw ConfigError("few-shot protocol needs base and novel classes");
  if (base_train == 0 || base_test == 0 || novel_query == 0) throw ConfigError("few-shot split sizes must be positive");
  if (input_dim == 0 || !(cluster_stddev > 0.0) || !(center_separation > 0.0))
    throw ConfigError("few-shot cluster geometry must be positive");
  if (repeats == 0) throw ConfigError("few-shot protocol needs repeats >= 1");
}

namespace {

Dataset draw_clusters(const Matrix& centers, std::size_t first_class, std::size_t count, std::size_t per_class,
                      double stddev, std::size_t classes, Rng& rng) {
  const std::size_t d = centers.cols();
  Matrix inputs(count * per_class, d);
  std::vector<std::size_t> labels;
  std::size_t r = 0;
  for (std::size_t c = first_class; c < first_class + count; ++c)
    for (std::size_t k = 0; k < per_class; ++k, ++r) {
      for (std::size_t j = 0; j < d; ++j) inputs(r, j) = centers(c, j) + stddev * rng.normal();
      labels.push_back(c);
    }
  return make_dataset(std::move(inputs), labels, classes);
}

}  // namespace

FewShotData gen_fewshot(const FewShotProtocol& p) {
  p.check();
  const std::size_t classes = p.total_classes();
  const double min_dist = p.center_separation * p.cluster_stddev;
  // Box side grows with the class count so rejection sampling stays cheap.
  const double half = min_dist * std::max(1.0, std::pow(static_cast<double>(classes), 1.0 / static_cast<double>(p.input_dim)));
  Rng rng(mix_seed(p.seed, 0));
  FewShotData out;
  out.centers = Matrix(classes, p.input_dim);
  for (std::size_t c = 0; c < classes; ++c) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 100000) throw ConfigError("could not place separated cluster centers");
      for (std::size_t j = 0; j < p.input_dim; ++j) out.centers(c, j) = rng.uniform(-half, half);
      bool ok = true;
      for (std::size_t o = 0; o < c && ok; ++o) {
        double sq = 0.0;
        for (std::size_t j = 0; j < p.input_dim; ++j) sq += std::pow(out.centers(c, j) - out.centers(o, j), 2);
        ok = std::sqrt(sq) >= min_dist;
      }
      if (ok) break;
    }
  }
  Rng train_rng(mix_seed(p.seed, 1)), test_rng(mix_seed(p.seed, 2)), support_rng(mix_seed(p.seed, 3)),
      query_rng(mix_seed(p.seed, 4));
  out.base_train = draw_clusters(out.centers, 0, p.base_classes, p.base_train, p.cluster_stddev, p.base_classes, train_rng);
  out.base_test = draw_clusters(out.centers, 0, p.base_classes, p.base_test, p.cluster_stddev, p.base_classes, test_rng);
  out.novel_support =
      draw_clusters(out.centers, p.base_classes, p.novel_classes, p.shots, p.cluster_stddev, classes, support_rng);
  out.novel_query =
      draw_clusters(out.centers, p.base_classes, p.novel_classes, p.novel_query, p.cluster_stddev, classes, query_rng);
  return out;
}

// ---------------------------------------------------------------------------

std::string CsvSchema::to_string() const {
  nlohmann::json doc;
  doc["feature_names"] = feature_names;
  doc["labels"] = labels;
  if (standardization) {
    doc["mean"] = standardization->mean;
    doc["stddev"] = standardization->stddev;
  }
  return doc.dump(1) + "\n";
}

CsvSchema CsvSchema::from_string(const std::string& text, const std::string& origin) {
  try {
    const auto doc = nlohmann::json::parse(text);
    CsvSchema s;
    s.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    s.labels = doc.at("labels").get<std::vector<std::string>>();
    if (doc.contains("mean"))
      s.standardization = Standardization{doc.at("mean").get<std::vector<double>>(), doc.at("stddev").get<std::vector<double>>()};
    return s;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(origin + ": " + ex.what());
  }
}

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::optional<double> parse_number(const std::string& cell) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || begin == end || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

CsvData parse_csv(const std::string& text, const CsvSchema& schema, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw FormatError(origin + ": empty file");
  ++line_no;
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // UTF-8 BOM
  const auto header = split_row(line);
  if (header.size() < 2 || header.back() != "label")
    throw FormatError(origin + ":1: header must list feature columns followed by 'label'");
  std::vector<std::string> names(header.begin(), header.end() - 1);
  if (!schema.feature_names.empty() && schema.feature_names != names)
    throw FormatError(origin + ":1: feature columns do not match the training schema");
  const std::size_t width = names.size();

  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != width + 1)
      throw FormatError(origin + ":" + std::to_string(line_no) + ": expected " + std::to_string(width + 1) +
                        " cells, found " + std::to_string(cells.size()));
    std::vector<double> row(width);
    for (std::size_t c = 0; c < width; ++c) {
      const auto v = parse_number(cells[c]);
      if (!v)
        throw FormatError(origin + ":" + std::to_string(line_no) + ": column " + std::to_string(c + 1) + " ('" +
                          names[c] + "') is not numeric: '" + cells[c] + "'");
      row[c] = *v;
    }
    rows.push_back(std::move(row));
    raw_labels.push_back(cells.back());
  }
  if (rows.empty()) throw FormatError(origin + ": no data rows");

  CsvData out;
  out.schema.feature_names = names;
  if (schema.labels.empty()) {
    std::vector<std::string> uniq(raw_labels.begin(), raw_labels.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    const bool numeric = std::all_of(uniq.begin(), uniq.end(), [](const std::string& s) { return parse_number(s).has_value(); });
    if (numeric)
      std::stable_sort(uniq.begin(), uniq.end(),
                       [](const std::string& a, const std::string& b) { return *parse_number(a) < *parse_number(b); });
    out.schema.labels = std::move(uniq);
  } else {
    out.schema.labels = schema.labels;
  }

  std::vector<std::size_t> labels(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto it = std::find(out.schema.labels.begin(), out.schema.labels.end(), raw_labels[r]);
    if (it == out.schema.labels.end())
      throw FormatError(origin + ": row " + std::to_string(r + 1) + " has unknown label '" + raw_labels[r] + "'");
    labels[r] = static_cast<std::size_t>(it - out.schema.labels.begin());
  }

  Standardization st;
  if (schema.standardization) {
    st = *schema.standardization;
    if (st.mean.size() != width || st.stddev.size() != width)
      throw FormatError(origin + ": standardization width does not match the feature columns");
  } else {
    st.mean.assign(width, 0.0);
    st.stddev.assign(width, 1.0);
    const double n = static_cast<double>(rows.size());
    for (std::size_t c = 0; c < width; ++c) {
      double sum = 0.0;
      for (const auto& row : rows) sum += row[c];
      st.mean[c] = sum / n;
      double sq = 0.0;
      for (const auto& row : rows) sq += (row[c] - st.mean[c]) * (row[c] - st.mean[c]);
      const double sd = std::sqrt(sq / n);
      st.stddev[c] = sd > 0.0 ? sd : 1.0;
    }
  }
  out.schema.standardization = st;

  Matrix inputs(rows.size(), width);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c) inputs(r, c) = (rows[r][c] - st.mean[c]) / st.stddev[c];
  out.data = make_dataset(std::move(inputs), labels, out.schema.labels.size());
  return out;
}

CsvData load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), schema, path.string());
}

}  // namespace livewire
