#include "sapt/bnn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sapt/error.hpp"

namespace sapt {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMajorMatrix>;
using MatrixMap = Eigen::Map<RowMajorMatrix>;

constexpr double kProbabilityFloor = 1e-308;

void check_theta(const ParamVector& theta, const NetworkTopology& topology) {
  if (static_cast<std::size_t>(theta.size()) != topology.parameter_count()) {
    throw ContractViolation("parameter vector has length " + std::to_string(theta.size()) +
                            ", topology needs " + std::to_string(topology.parameter_count()));
  }
}

void check_data(const Dataset& dataset, const NetworkTopology& topology) {
  if (dataset.size() == 0) throw ContractViolation("dataset is empty");
  if (dataset.feature_count() != topology.inputs) {
    throw ContractViolation("dataset has " + std::to_string(dataset.feature_count()) +
                            " features, topology expects " + std::to_string(topology.inputs));
  }
  if (static_cast<std::size_t>(dataset.class_count) != topology.outputs) {
    throw ContractViolation("dataset class count does not match output layer");
  }
}

// Views into the flat parameter vector.
struct Layers {
  ConstMatrixMap w;
  Eigen::Map<const Eigen::VectorXd> hidden_bias;
  ConstMatrixMap v;
  Eigen::Map<const Eigen::VectorXd> output_bias;

  Layers(const ParamVector& theta, const NetworkTopology& t)
      : w(theta.data(), static_cast<Eigen::Index>(t.inputs), static_cast<Eigen::Index>(t.hidden)),
        hidden_bias(theta.data() + t.hidden_bias_offset(), static_cast<Eigen::Index>(t.hidden)),
        v(theta.data() + t.output_weight_offset(), static_cast<Eigen::Index>(t.hidden),
          static_cast<Eigen::Index>(t.outputs)),
        output_bias(theta.data() + t.output_bias_offset(), static_cast<Eigen::Index>(t.outputs)) {}
};

Eigen::MatrixXd hidden_activations(const Layers& layers, const Eigen::MatrixXd& features) {
  Eigen::MatrixXd a = features * layers.w;
  a.rowwise() += layers.hidden_bias.transpose();
  return a.unaryExpr([](double z) { return sigmoid(z); });
}

Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& f) {
  Eigen::MatrixXd p(f.rows(), f.cols());
  for (Eigen::Index t = 0; t < f.rows(); ++t) p.row(t) = softmax(f.row(t).transpose()).transpose();
  return p;
}

}  // namespace

void NetworkTopology::validate() const {
  if (inputs < 1 || hidden < 1 || outputs < 1) {
    throw ConfigError("network topology needs at least one unit per layer");
  }
}

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

Eigen::VectorXd forward(const ParamVector& theta, const Eigen::Ref<const Eigen::VectorXd>& x,
                        const NetworkTopology& topology) {
  check_theta(theta, topology);
  if (static_cast<std::size_t>(x.size()) != topology.inputs) {
    throw ContractViolation("input row has length " + std::to_string(x.size()) +
                            ", topology expects " + std::to_string(topology.inputs));
  }
  const Layers layers(theta, topology);
  const Eigen::VectorXd h =
      (layers.w.transpose() * x + layers.hidden_bias).unaryExpr([](double z) { return sigmoid(z); });
  return layers.v.transpose() * h + layers.output_bias;
}

Eigen::MatrixXd forward_batch(const ParamVector& theta, const Eigen::MatrixXd& features,
                              const NetworkTopology& topology) {
  check_theta(theta, topology);
  if (static_cast<std::size_t>(features.cols()) != topology.inputs) {
    throw ContractViolation("feature matrix column count does not match topology");
  }
  const Layers layers(theta, topology);
  Eigen::MatrixXd f = hidden_activations(layers, features) * layers.v;
  f.rowwise() += layers.output_bias.transpose();
  return f;
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& f) {
  const double shift = f.maxCoeff();
  Eigen::VectorXd e = (f.array() - shift).exp();
  return e / e.sum();
}

Eigen::MatrixXd predict_proba(const ParamVector& theta, const Dataset& dataset,
                              const NetworkTopology& topology) {
  check_data(dataset, topology);
  return row_softmax(forward_batch(theta, dataset.features, topology));
}

double log_likelihood(const ParamVector& theta, const Dataset& dataset,
                      const NetworkTopology& topology) {
  const Eigen::MatrixXd p = predict_proba(theta, dataset, topology);
  double total = 0.0;
  for (Eigen::Index t = 0; t < p.rows(); ++t) {
    const int y = dataset.labels[static_cast<std::size_t>(t)];
    total += std::log(std::max(p(t, y), kProbabilityFloor));
  }
  return total;
}

double log_prior(const ParamVector& theta, const PriorConfig& prior) {
  const auto count = static_cast<double>(theta.size());
  return -0.5 * count * std::log(prior.sigma_sq) - theta.squaredNorm() / (2.0 * prior.sigma_sq);
}

double sse(const ParamVector& theta, const Dataset& dataset, const NetworkTopology& topology) {
  return (dataset.one_hot - predict_proba(theta, dataset, topology)).squaredNorm();
}

ParamVector sse_gradient(const ParamVector& theta, const Dataset& dataset,
                         const NetworkTopology& topology) {
  check_theta(theta, topology);
  check_data(dataset, topology);
  const Layers layers(theta, topology);

  const Eigen::MatrixXd h = hidden_activations(layers, dataset.features);
  Eigen::MatrixXd f = h * layers.v;
  f.rowwise() += layers.output_bias.transpose();
  const Eigen::MatrixXd p = row_softmax(f);

  // dE/df_j = a_j - p_j * sum_k a_k, with a = 2 (p - z) * p.
  const Eigen::MatrixXd a = (2.0 * (p - dataset.one_hot).array() * p.array()).matrix();
  Eigen::MatrixXd delta_out = a - (p.array().colwise() * a.rowwise().sum().array()).matrix();
  Eigen::MatrixXd delta_hidden =
      ((delta_out * layers.v.transpose()).array() * h.array() * (1.0 - h.array())).matrix();

  ParamVector grad(theta.size());
  const auto I = static_cast<Eigen::Index>(topology.inputs);
  const auto H = static_cast<Eigen::Index>(topology.hidden);
  const auto O = static_cast<Eigen::Index>(topology.outputs);
  MatrixMap(grad.data(), I, H) = dataset.features.transpose() * delta_hidden;
  grad.segment(static_cast<Eigen::Index>(topology.hidden_bias_offset()), H) =
      delta_hidden.colwise().sum().transpose();
  MatrixMap(grad.data() + topology.output_weight_offset(), H, O) = h.transpose() * delta_out;
  grad.segment(static_cast<Eigen::Index>(topology.output_bias_offset()), O) =
      delta_out.colwise().sum().transpose();
  return grad;
}

double predict_accuracy(const ParamVector& theta, const Dataset& dataset,
                        const NetworkTopology& topology) {
  check_data(dataset, topology);
  const Eigen::MatrixXd f = forward_batch(theta, dataset.features, topology);
  std::size_t correct = 0;
  for (Eigen::Index t = 0; t < f.rows(); ++t) {
    Eigen::Index best = 0;
    // maxCoeff already returns the first maximal index; spelled out for the tie rule.
    for (Eigen::Index k = 1; k < f.cols(); ++k) {
      if (f(t, k) > f(t, best)) best = k;
    }
    if (best == dataset.labels[static_cast<std::size_t>(t)]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(dataset.size());
}

BnnPosterior::BnnPosterior(NetworkTopology topology, std::shared_ptr<const Dataset> data,
                           PriorConfig prior)
    : topology_(topology), data_(std::move(data)), prior_(prior) {
  topology_.validate();
  if (!data_) throw ContractViolation("posterior needs a dataset");
  check_data(*data_, topology_);
  if (!(prior_.sigma_sq > 0.0)) throw ConfigError("prior variance must be positive");
}

double BnnPosterior::log_likelihood(const ParamVector& theta) const {
  return sapt::log_likelihood(theta, *data_, topology_);
}

double BnnPosterior::log_prior(const ParamVector& theta) const {
  return sapt::log_prior(theta, prior_);
}

ParamVector BnnPosterior::energy_gradient(const ParamVector& theta) const {
  return sse_gradient(theta, *data_, topology_);
}

}  // namespace sapt
