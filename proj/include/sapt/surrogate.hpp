#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "sapt/bnn.hpp"
#include "sapt/tempering.hpp"

namespace sapt {

enum class LikelihoodSource { true_model, surrogate };

const char* to_string(LikelihoodSource source);

// Training rows (theta, true log-likelihood) collected over one surrogate
// interval. Only true evaluations are admitted.
class SurrogateBatch {
 public:
  // Throws ContractViolation for surrogate-sourced rows or non-finite targets.
  void append(const ParamVector& theta, double log_lik, std::size_t replica, LikelihoodSource source);
  void append(const SurrogateBatch& other);
  void clear();

  std::size_t rows() const { return targets_.size(); }
  bool empty() const { return targets_.empty(); }

  const std::vector<ParamVector>& inputs() const { return inputs_; }
  const std::vector<double>& targets() const { return targets_; }
  const std::vector<std::size_t>& replica_origin() const { return origin_; }

  Eigen::MatrixXd input_matrix() const;

 private:
  std::vector<ParamVector> inputs_;
  std::vector<double> targets_;
  std::vector<std::size_t> origin_;
};

// Append-only min-max scaler for log-likelihood targets: the range only grows.
class TargetScaler {
 public:
  void observe(double value);

  bool initialized() const { return initialized_; }
  // True until two distinct values have been observed.
  bool degenerate() const { return !initialized_ || !(max_ > min_); }
  double min() const { return min_; }
  double max() const { return max_; }

  // Maps [min,max] onto [0,1]; a degenerate scaler maps everything to 0.5.
  double scale(double value) const;
  double inverse(double scaled) const;

  static TargetScaler from_range(double min, double max);

 private:
  bool initialized_ = false;
  double min_ = 0.0;
  double max_ = 0.0;
};

struct SurrogateTopology {
  std::size_t inputs = 0;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 16;

  std::size_t parameter_count() const {
    return hidden1 * inputs + hidden1 + hidden2 * hidden1 + hidden2 + hidden2 + 1;
  }
  friend bool operator==(const SurrogateTopology&, const SurrogateTopology&) = default;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainOptions {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  AdamConfig adam;
};

struct TrainResult {
  std::size_t rows = 0;
  double loss_before = 0.0;
  double loss_after = 0.0;
  // RMSE between scaled targets and sigmoid outputs after training.
  double rmse_scaled = 0.0;
  bool skipped = false;
};

// [L, h1, h2, 1] multilayer perceptron: ReLU hidden layers, sigmoid output,
// binary cross-entropy on min-max scaled targets, Adam updates. Training is
// incremental: weights, Adam moments and the scaler persist across calls.
class SurrogateModel {
 public:
  SurrogateModel() = default;
  // Glorot-uniform weights and zero biases.
  SurrogateModel(SurrogateTopology topology, Rng& init_rng);

  const SurrogateTopology& topology() const { return topology_; }
  bool trained() const { return trained_; }
  std::size_t adam_steps() const { return adam_step_; }
  const TargetScaler& scaler() const { return scaler_; }
  void set_scaler(const TargetScaler& scaler) { scaler_ = scaler; }

  const Eigen::VectorXd& parameters() const { return params_; }
  void set_parameters(const Eigen::VectorXd& params);
  const Eigen::VectorXd& adam_first_moment() const { return adam_m_; }
  const Eigen::VectorXd& adam_second_moment() const { return adam_v_; }

  TrainResult train(const SurrogateBatch& batch, const TrainOptions& options, Rng& rng);

  // Sigmoid outputs in [0,1] for each row of `inputs`.
  Eigen::VectorXd predict_scaled(const Eigen::MatrixXd& inputs) const;

  // Pseudo-log-likelihood; requires trained().
  double predict(const ParamVector& theta) const;

  // Mean binary cross-entropy of the batch under the current scaler.
  double loss(const SurrogateBatch& batch) const;

  // Plain-text checkpoint headed "SAPT-SURR-1"; reals are hex-floats.
  void save(const std::filesystem::path& path) const;
  static SurrogateModel load(const std::filesystem::path& path);

  // Marks the model usable without training (tests, restored checkpoints).
  void mark_trained() { trained_ = true; }

 private:
  double backprop(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Eigen::VectorXd& grad) const;
  void adam_update(const Eigen::VectorXd& grad, const AdamConfig& adam);

  SurrogateTopology topology_;
  Eigen::VectorXd params_;
  Eigen::VectorXd adam_m_;
  Eigen::VectorXd adam_v_;
  std::size_t adam_step_ = 0;
  TargetScaler scaler_;
  bool trained_ = false;
};

// Rolling window of the last three chain log-likelihoods of one replica.
class PseudoLikelihoodBlend {
 public:
  static constexpr std::size_t kWindow = 3;

  void push(double log_lik);
  std::size_t size() const { return count_ < kWindow ? count_ : kWindow; }
  bool empty() const { return count_ == 0; }
  // Mean of the most recent min(size, 3) values.
  double mean() const;

 private:
  std::array<double, kWindow> values_{};
  std::size_t count_ = 0;
};

// 0.5 * surrogate + 0.5 * moving average.
double blend(double surrogate_log_lik, const PseudoLikelihoodBlend& history);

double surrogate_rmse(std::span<const double> true_vals, std::span<const double> pseudo_vals);

}  // namespace sapt
