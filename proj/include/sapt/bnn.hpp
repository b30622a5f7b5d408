#pragma once

#include <cstddef>
#include <memory>

#include <Eigen/Core>

#include "sapt/dataset.hpp"

namespace sapt {

// Flattened weights and biases of the classifier. Layout:
//   [ w (I*H, row-major by input) | hidden bias (H) | v (H*O, row-major by hidden) | output bias (O) ]
using ParamVector = Eigen::VectorXd;

// One-hidden-layer feedforward classifier shape.
struct NetworkTopology {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::size_t outputs = 0;

  std::size_t parameter_count() const { return inputs * hidden + hidden * outputs + hidden + outputs; }

  std::size_t hidden_bias_offset() const { return inputs * hidden; }
  std::size_t output_weight_offset() const { return inputs * hidden + hidden; }
  std::size_t output_bias_offset() const { return inputs * hidden + hidden + hidden * outputs; }

  // Throws ConfigError when any layer is empty.
  void validate() const;

  friend bool operator==(const NetworkTopology&, const NetworkTopology&) = default;
};

// Isotropic zero-mean Gaussian prior over every weight and bias.
struct PriorConfig {
  double sigma_sq = 25.0;
};

double sigmoid(double a);

// Pre-softmax network output for a single input row.
Eigen::VectorXd forward(const ParamVector& theta, const Eigen::Ref<const Eigen::VectorXd>& x,
                        const NetworkTopology& topology);

// Pre-softmax outputs for every row of `features` (N x O).
Eigen::MatrixXd forward_batch(const ParamVector& theta, const Eigen::MatrixXd& features,
                              const NetworkTopology& topology);

// Max-shifted softmax; total on finite input.
Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& f);

// Row-wise class probabilities (N x O).
Eigen::MatrixXd predict_proba(const ParamVector& theta, const Dataset& dataset,
                              const NetworkTopology& topology);

// Multinomial log-likelihood sum_t sum_k z_tk log pi_tk, with pi floored at
// 1e-308 before the log.
double log_likelihood(const ParamVector& theta, const Dataset& dataset,
                      const NetworkTopology& topology);

// -(L/2) log(sigma^2) - sum(theta^2) / (2 sigma^2).
double log_prior(const ParamVector& theta, const PriorConfig& prior);

// Gradient of E = sum_t ||z_t - pi_t||^2 with respect to theta, in
// ParamVector layout. Only used to build Langevin proposals.
ParamVector sse_gradient(const ParamVector& theta, const Dataset& dataset,
                         const NetworkTopology& topology);

// Summed squared error E itself (for tests and diagnostics).
double sse(const ParamVector& theta, const Dataset& dataset, const NetworkTopology& topology);

// Percentage of rows whose argmax class (lowest index on ties) equals the label.
double predict_accuracy(const ParamVector& theta, const Dataset& dataset,
                        const NetworkTopology& topology);

// Target distribution seen by a sampler: likelihood, prior and the energy
// gradient that drives Langevin proposals.
class PosteriorModel {
 public:
  virtual ~PosteriorModel() = default;

  virtual std::size_t dimension() const = 0;
  virtual double log_likelihood(const ParamVector& theta) const = 0;
  virtual double log_prior(const ParamVector& theta) const = 0;
  // Gradient of the energy whose descent step forms the Langevin mean.
  virtual ParamVector energy_gradient(const ParamVector& theta) const = 0;
};

// Bayesian neural network classifier on a fixed training set.
class BnnPosterior final : public PosteriorModel {
 public:
  BnnPosterior(NetworkTopology topology, std::shared_ptr<const Dataset> data, PriorConfig prior);

  std::size_t dimension() const override { return topology_.parameter_count(); }
  double log_likelihood(const ParamVector& theta) const override;
  double log_prior(const ParamVector& theta) const override;
  ParamVector energy_gradient(const ParamVector& theta) const override;

  const NetworkTopology& topology() const { return topology_; }
  const Dataset& data() const { return *data_; }
  const PriorConfig& prior() const { return prior_; }

 private:
  NetworkTopology topology_;
  std::shared_ptr<const Dataset> data_;
  PriorConfig prior_;
};

}  // namespace sapt
