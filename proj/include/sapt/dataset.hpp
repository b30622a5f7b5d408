#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace sapt {

enum class Split { train, test, full };

const char* to_string(Split split);

// Labelled classification data. Features are stored row-major by sample
// (N x I); `one_hot` is the N x K class-indicator matrix.
struct Dataset {
  std::string name;
  Split split = Split::full;
  Eigen::MatrixXd features;
  std::vector<int> labels;
  Eigen::MatrixXd one_hot;
  int class_count = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t feature_count() const { return static_cast<std::size_t>(features.cols()); }

  // Throws ValidationError if any invariant (shapes, label range, one-hot
  // consistency, finiteness) is broken.
  void validate() const;
};

// Builds the N x K indicator matrix. Throws ValidationError on a label
// outside 0..K-1.
Eigen::MatrixXd one_hot(const std::vector<int>& labels, int class_count);

// Per-column min-max scaling to [0,1]. Columns with zero range map to 0.
class ColumnNormalizer {
 public:
  ColumnNormalizer() = default;

  static ColumnNormalizer fit(const Eigen::MatrixXd& features);

  Eigen::MatrixXd apply(const Eigen::MatrixXd& features) const;

  const Eigen::VectorXd& mins() const { return mins_; }
  const Eigen::VectorXd& maxs() const { return maxs_; }

 private:
  Eigen::VectorXd mins_;
  Eigen::VectorXd maxs_;
};

struct CsvSchema {
  std::size_t feature_count = 0;
  int class_count = 0;
  bool skip_header = false;
  // When false the raw feature values are kept as read.
  bool normalize = true;
};

// Reads `feature_count` real columns followed by one integer label column per
// row. Blank lines are skipped. Features are min-max normalized with the
// file's own column statistics unless schema.normalize is false.
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

// Writes features then label, comma-separated, using round-trippable
// formatting (max_digits10).
void write_csv(const Dataset& dataset, const std::filesystem::path& path);

// Stratified shuffle split. Each class contributes round(fraction * n_k) rows
// to train. Normalization statistics are fitted on the train part and applied
// to both halves.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction,
                                  std::uint64_t seed);

struct DatasetRegistryEntry {
  std::string name;
  std::size_t attribute_count = 0;
  int class_count = 0;
  std::size_t hidden_units = 0;
  std::size_t surrogate_h1 = 0;
  std::size_t surrogate_h2 = 0;
  // Relative to the registry file. An empty test file means "split train".
  std::string train_file;
  std::string test_file;
  std::size_t instance_count = 0;
};

class DatasetRegistry {
 public:
  // Parses the sectioned key-value format:
  //   [name]
  //   attributes = 4
  //   ...
  static DatasetRegistry load(const std::filesystem::path& path);

  // Registry shipped in the repository's data/ directory.
  static DatasetRegistry bundled();

  const std::vector<DatasetRegistryEntry>& entries() const { return entries_; }
  std::optional<DatasetRegistryEntry> find(const std::string& name) const;
  const std::filesystem::path& base_dir() const { return base_dir_; }

 private:
  std::vector<DatasetRegistryEntry> entries_;
  std::filesystem::path base_dir_;
};

// Train/test pair ready for sampling, plus the registry metadata it came from.
struct LoadedProblem {
  DatasetRegistryEntry entry;
  Dataset train;
  Dataset test;
};

LoadedProblem load_problem(const DatasetRegistry& registry, const std::string& name,
                           double train_fraction, std::uint64_t split_seed);

}  // namespace sapt
