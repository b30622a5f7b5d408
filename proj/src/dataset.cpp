#include "sapt/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "sapt/error.hpp"

namespace sapt {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_real(const std::string& text, std::size_t line_no) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    throw ParseError("malformed feature value '" + text + "'", line_no);
  }
  return value;
}

int parse_label(const std::string& text, std::size_t line_no) {
  int value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError("malformed label '" + text + "'", line_no);
  }
  return value;
}

Dataset subset(const Dataset& source, const std::vector<std::size_t>& rows, Split which) {
  Dataset out;
  out.name = source.name;
  out.split = which;
  out.class_count = source.class_count;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), source.features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) =
        source.features.row(static_cast<Eigen::Index>(rows[r]));
    out.labels.push_back(source.labels[rows[r]]);
  }
  out.one_hot = one_hot(out.labels, out.class_count);
  return out;
}

}  // namespace

const char* to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::test:
      return "test";
    case Split::full:
      return "full";
  }
  return "unknown";
}

void Dataset::validate() const {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (n == 0) throw ValidationError("dataset '" + name + "' is empty");
  if (class_count < 1) throw ValidationError("class_count must be positive");
  if (features.rows() != n) throw ValidationError("feature/label row count mismatch");
  if (one_hot.rows() != n || one_hot.cols() != class_count) {
    throw ValidationError("one-hot matrix has the wrong shape");
  }
  if (!features.allFinite()) throw ValidationError("non-finite feature value");
  for (Eigen::Index t = 0; t < n; ++t) {
    const int y = labels[static_cast<std::size_t>(t)];
    if (y < 0 || y >= class_count) throw ValidationError("label out of range");
    for (int k = 0; k < class_count; ++k) {
      if (one_hot(t, k) != (k == y ? 1.0 : 0.0)) {
        throw ValidationError("one-hot row disagrees with label");
      }
    }
  }
}

Eigen::MatrixXd one_hot(const std::vector<int>& labels, int class_count) {
  if (class_count < 1) throw ValidationError("class_count must be positive");
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), class_count);
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const int y = labels[t];
    if (y < 0 || y >= class_count) {
      throw ValidationError("label " + std::to_string(y) + " at row " + std::to_string(t) +
                            " outside 0.." + std::to_string(class_count - 1));
    }
    z(static_cast<Eigen::Index>(t), y) = 1.0;
  }
  return z;
}

ColumnNormalizer ColumnNormalizer::fit(const Eigen::MatrixXd& features) {
  if (features.rows() == 0) throw ContractViolation("cannot fit normalizer on empty data");
  ColumnNormalizer n;
  n.mins_ = features.colwise().minCoeff().transpose();
  n.maxs_ = features.colwise().maxCoeff().transpose();
  return n;
}

Eigen::MatrixXd ColumnNormalizer::apply(const Eigen::MatrixXd& features) const {
  if (features.cols() != mins_.size()) {
    throw ContractViolation("normalizer column count mismatch");
  }
  Eigen::MatrixXd out(features.rows(), features.cols());
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    const double range = maxs_(c) - mins_(c);
    if (range > 0.0) {
      out.col(c) = (features.col(c).array() - mins_(c)) / range;
    } else {
      out.col(c).setZero();
    }
  }
  return out;
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  if (schema.feature_count == 0) throw ConfigError("schema needs at least one feature column");
  if (schema.class_count < 1) throw ConfigError("schema needs at least one class");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file " + path.string());

  std::vector<double> values;
  Dataset ds;
  ds.name = path.stem().string();
  ds.class_count = schema.class_count;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && schema.skip_header) continue;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line, ',');
    if (fields.size() != schema.feature_count + 1) {
      throw ParseError("expected " + std::to_string(schema.feature_count + 1) + " columns, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    for (std::size_t c = 0; c < schema.feature_count; ++c) {
      values.push_back(parse_real(fields[c], line_no));
    }
    const int label = parse_label(fields.back(), line_no);
    if (label < 0 || label >= schema.class_count) {
      throw ValidationError("label " + std::to_string(label) + " on line " +
                            std::to_string(line_no) + " outside 0.." +
                            std::to_string(schema.class_count - 1));
    }
    ds.labels.push_back(label);
  }
  if (ds.labels.empty()) throw ValidationError("dataset file " + path.string() + " has no rows");

  const auto rows = static_cast<Eigen::Index>(ds.labels.size());
  const auto cols = static_cast<Eigen::Index>(schema.feature_count);
  ds.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, cols);
  if (schema.normalize) ds.features = ColumnNormalizer::fit(ds.features).apply(ds.features);
  ds.one_hot = one_hot(ds.labels, ds.class_count);
  return ds;
}

void write_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index t = 0; t < dataset.features.rows(); ++t) {
    for (Eigen::Index c = 0; c < dataset.features.cols(); ++c) {
      out << dataset.features(t, c) << ',';
    }
    out << dataset.labels[static_cast<std::size_t>(t)] << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction,
                                  std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0,1)");
  }
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(dataset.class_count));
  for (std::size_t t = 0; t < dataset.labels.size(); ++t) {
    by_class[static_cast<std::size_t>(dataset.labels[t])].push_back(t);
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    auto& rows = by_class[k];
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto n_train =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(rows.size())));
    if (n_train == 0) {
      throw ValidationError("class " + std::to_string(k) + " would be absent from the train split");
    }
    train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + static_cast<long>(n_train));
    test_rows.insert(test_rows.end(), rows.begin() + static_cast<long>(n_train), rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());

  Dataset train = subset(dataset, train_rows, Split::train);
  Dataset test = subset(dataset, test_rows, Split::test);
  const auto normalizer = ColumnNormalizer::fit(train.features);
  train.features = normalizer.apply(train.features);
  if (!test_rows.empty()) test.features = normalizer.apply(test.features);
  return {std::move(train), std::move(test)};
}

DatasetRegistry DatasetRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open registry " + path.string());

  DatasetRegistry reg;
  reg.base_dir_ = path.parent_path();
  std::map<std::string, std::string> fields;
  std::string section;
  std::size_t section_line = 0;

  auto to_size = [&](const std::string& key) -> std::size_t {
    auto it = fields.find(key);
    if (it == fields.end()) throw ParseError("registry entry '" + section + "' missing " + key, section_line);
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (ec != std::errc{} || p != it->second.data() + it->second.size()) {
      throw ParseError("registry key " + key + " is not an integer", section_line);
    }
    return v;
  };
  auto flush = [&]() {
    if (section.empty()) return;
    DatasetRegistryEntry e;
    e.name = section;
    e.attribute_count = to_size("attributes");
    e.class_count = static_cast<int>(to_size("classes"));
    e.hidden_units = to_size("hidden_units");
    e.surrogate_h1 = to_size("surrogate_h1");
    e.surrogate_h2 = to_size("surrogate_h2");
    e.instance_count = fields.count("instances") ? to_size("instances") : 0;
    e.train_file = fields.count("train_file") ? fields["train_file"] : "";
    e.test_file = fields.count("test_file") ? fields["test_file"] : "";
    if (e.train_file.empty()) throw ParseError("registry entry '" + section + "' has no train_file", section_line);
    reg.entries_.push_back(std::move(e));
    fields.clear();
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ParseError("unterminated section header", line_no);
      flush();
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      section_line = line_no;
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos || section.empty()) throw ParseError("expected key = value", line_no);
    fields[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
  }
  flush();
  return reg;
}

DatasetRegistry DatasetRegistry::bundled() {
  return load(std::filesystem::path(SAPT_DATA_DIR) / "registry.txt");
}

std::optional<DatasetRegistryEntry> DatasetRegistry::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  return std::nullopt;
}

LoadedProblem load_problem(const DatasetRegistry& registry, const std::string& name,
                           double train_fraction, std::uint64_t split_seed) {
  const auto entry = registry.find(name);
  if (!entry) throw ConfigError("unknown dataset '" + name + "'");
  CsvSchema schema{entry->attribute_count, entry->class_count, false, false};
  const auto train_path = registry.base_dir() / entry->train_file;
  if (!std::filesystem::exists(train_path)) {
    throw IoError("dataset file " + train_path.string() +
                  " is missing (see scripts/fetch_datasets.py)");
  }
  LoadedProblem problem;
  problem.entry = *entry;
  Dataset raw_train = load_csv(train_path, schema);
  raw_train.name = name;
  if (entry->test_file.empty()) {
    auto [train, test] = split(raw_train, train_fraction, split_seed);
    problem.train = std::move(train);
    problem.test = std::move(test);
  } else {
    Dataset raw_test = load_csv(registry.base_dir() / entry->test_file, schema);
    raw_test.name = name;
    const auto normalizer = ColumnNormalizer::fit(raw_train.features);
    raw_train.features = normalizer.apply(raw_train.features);
    raw_test.features = normalizer.apply(raw_test.features);
    raw_train.split = Split::train;
    raw_test.split = Split::test;
    problem.train = std::move(raw_train);
    problem.test = std::move(raw_test);
  }
  return problem;
}

}  // namespace sapt
