#include "sapt/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "sapt/error.hpp"
#include "sapt/log.hpp"

namespace sapt {

namespace {

constexpr const char* kCheckpointMagic = "SAPT-SURR-1";

using ConstMap = Eigen::Map<const Eigen::MatrixXd>;
using MutableMap = Eigen::Map<Eigen::MatrixXd>;

// Offsets of each tensor inside the flat parameter vector. Matrices are
// column-major (out x in).
struct Offsets {
  Eigen::Index w1, b1, w2, b2, w3, b3;

  explicit Offsets(const SurrogateTopology& t) {
    const auto L = static_cast<Eigen::Index>(t.inputs);
    const auto h1 = static_cast<Eigen::Index>(t.hidden1);
    const auto h2 = static_cast<Eigen::Index>(t.hidden2);
    w1 = 0;
    b1 = w1 + h1 * L;
    w2 = b1 + h1;
    b2 = w2 + h2 * h1;
    w3 = b2 + h2;
    b3 = w3 + h2;
  }
};

struct Activations {
  Eigen::MatrixXd pre1, a1, pre2, a2;
  Eigen::VectorXd logits;
};

Activations run_forward(const Eigen::VectorXd& p, const SurrogateTopology& t, const Eigen::MatrixXd& x) {
  const Offsets o(t);
  const auto L = static_cast<Eigen::Index>(t.inputs);
  const auto h1 = static_cast<Eigen::Index>(t.hidden1);
  const auto h2 = static_cast<Eigen::Index>(t.hidden2);
  ConstMap w1(p.data() + o.w1, h1, L);
  Eigen::Map<const Eigen::VectorXd> b1(p.data() + o.b1, h1);
  ConstMap w2(p.data() + o.w2, h2, h1);
  Eigen::Map<const Eigen::VectorXd> b2(p.data() + o.b2, h2);
  Eigen::Map<const Eigen::VectorXd> w3(p.data() + o.w3, h2);
  const double b3 = p(o.b3);

  Activations act;
  act.pre1 = x * w1.transpose();
  act.pre1.rowwise() += b1.transpose();
  act.a1 = act.pre1.cwiseMax(0.0);
  act.pre2 = act.a1 * w2.transpose();
  act.pre2.rowwise() += b2.transpose();
  act.a2 = act.pre2.cwiseMax(0.0);
  act.logits = (act.a2 * w3).array() + b3;
  return act;
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Binary cross-entropy written on the logit to avoid log(0).
double bce_from_logit(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ParseError("bad real '" + s + "' in surrogate checkpoint", 0);
  return v;
}

}  // namespace

const char* to_string(LikelihoodSource source) {
  return source == LikelihoodSource::true_model ? "true" : "surrogate";
}

void SurrogateBatch::append(const ParamVector& theta, double log_lik, std::size_t replica,
                            LikelihoodSource source) {
  if (source != LikelihoodSource::true_model) {
    throw ContractViolation("surrogate training data may only contain true likelihoods");
  }
  if (!std::isfinite(log_lik)) throw ContractViolation("surrogate training target is not finite");
  if (!inputs_.empty() && inputs_.front().size() != theta.size()) {
    throw ContractViolation("surrogate batch rows must share one dimension");
  }
  inputs_.push_back(theta);
  targets_.push_back(log_lik);
  origin_.push_back(replica);
}

void SurrogateBatch::append(const SurrogateBatch& other) {
  if (!inputs_.empty() && !other.inputs_.empty() &&
      inputs_.front().size() != other.inputs_.front().size()) {
    throw ContractViolation("surrogate batch rows must share one dimension");
  }
  inputs_.insert(inputs_.end(), other.inputs_.begin(), other.inputs_.end());
  targets_.insert(targets_.end(), other.targets_.begin(), other.targets_.end());
  origin_.insert(origin_.end(), other.origin_.begin(), other.origin_.end());
}

void SurrogateBatch::clear() {
  inputs_.clear();
  targets_.clear();
  origin_.clear();
}

Eigen::MatrixXd SurrogateBatch::input_matrix() const {
  if (inputs_.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(inputs_.size()), inputs_.front().size());
  for (std::size_t r = 0; r < inputs_.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = inputs_[r].transpose();
  return m;
}

void TargetScaler::observe(double value) {
  if (!initialized_) {
    min_ = max_ = value;
    initialized_ = true;
    return;
  }
  min_ = std::min(min_, value);
  max_ = std::max(max_, value);
}

double TargetScaler::scale(double value) const {
  if (degenerate()) return 0.5;
  return (value - min_) / (max_ - min_);
}

double TargetScaler::inverse(double scaled) const {
  if (degenerate()) return min_;
  return min_ + scaled * (max_ - min_);
}

TargetScaler TargetScaler::from_range(double min, double max) {
  if (!(max >= min)) throw ContractViolation("scaler range must satisfy min <= max");
  TargetScaler s;
  s.initialized_ = true;
  s.min_ = min;
  s.max_ = max;
  return s;
}

SurrogateModel::SurrogateModel(SurrogateTopology topology, Rng& init_rng) : topology_(topology) {
  if (topology_.inputs == 0 || topology_.hidden1 == 0 || topology_.hidden2 == 0) {
    throw ConfigError("surrogate layers must be nonempty");
  }
  const auto n = static_cast<Eigen::Index>(topology_.parameter_count());
  params_ = Eigen::VectorXd::Zero(n);
  adam_m_ = Eigen::VectorXd::Zero(n);
  adam_v_ = Eigen::VectorXd::Zero(n);

  const Offsets o(topology_);
  auto glorot = [&](Eigen::Index offset, std::size_t fan_out, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < fan_in * fan_out; ++i) params_(offset + static_cast<Eigen::Index>(i)) = dist(init_rng);
  };
  glorot(o.w1, topology_.hidden1, topology_.inputs);
  glorot(o.w2, topology_.hidden2, topology_.hidden1);
  glorot(o.w3, 1, topology_.hidden2);
}

void SurrogateModel::set_parameters(const Eigen::VectorXd& params) {
  if (static_cast<std::size_t>(params.size()) != topology_.parameter_count()) {
    throw ContractViolation("surrogate parameter vector has the wrong length");
  }
  params_ = params;
}

Eigen::VectorXd SurrogateModel::predict_scaled(const Eigen::MatrixXd& inputs) const {
  if (static_cast<std::size_t>(inputs.cols()) != topology_.inputs) {
    throw ContractViolation("surrogate input width does not match topology");
  }
  const Activations act = run_forward(params_, topology_, inputs);
  return act.logits.unaryExpr([](double z) { return stable_sigmoid(z); });
}

double SurrogateModel::predict(const ParamVector& theta) const {
  if (!trained_) throw ContractViolation("surrogate queried before its first training round");
  const Eigen::MatrixXd row = theta.transpose();
  return scaler_.inverse(predict_scaled(row)(0));
}

double SurrogateModel::loss(const SurrogateBatch& batch) const {
  if (batch.empty()) throw ContractViolation("loss of an empty batch");
  const Activations act = run_forward(params_, topology_, batch.input_matrix());
  double total = 0.0;
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    total += bce_from_logit(act.logits(static_cast<Eigen::Index>(r)), scaler_.scale(batch.targets()[r]));
  }
  return total / static_cast<double>(batch.rows());
}

double SurrogateModel::backprop(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                Eigen::VectorXd& grad) const {
  const Offsets o(topology_);
  const auto L = static_cast<Eigen::Index>(topology_.inputs);
  const auto h1 = static_cast<Eigen::Index>(topology_.hidden1);
  const auto h2 = static_cast<Eigen::Index>(topology_.hidden2);
  const Activations act = run_forward(params_, topology_, x);
  const auto n = static_cast<double>(x.rows());

  double loss = 0.0;
  Eigen::VectorXd d_logit(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    loss += bce_from_logit(act.logits(r), y(r));
    d_logit(r) = (stable_sigmoid(act.logits(r)) - y(r)) / n;
  }

  ConstMap w2(params_.data() + o.w2, h2, h1);
  Eigen::Map<const Eigen::VectorXd> w3(params_.data() + o.w3, h2);

  grad.setZero(params_.size());
  grad.segment(o.w3, h2) = act.a2.transpose() * d_logit;
  grad(o.b3) = d_logit.sum();

  Eigen::MatrixXd d2 = d_logit * w3.transpose();
  d2 = (act.pre2.array() > 0.0).select(d2, 0.0);
  MutableMap(grad.data() + o.w2, h2, h1) = d2.transpose() * act.a1;
  grad.segment(o.b2, h2) = d2.colwise().sum().transpose();

  Eigen::MatrixXd d1 = d2 * w2;
  d1 = (act.pre1.array() > 0.0).select(d1, 0.0);
  MutableMap(grad.data() + o.w1, h1, L) = d1.transpose() * x;
  grad.segment(o.b1, h1) = d1.colwise().sum().transpose();
  return loss / n;
}

void SurrogateModel::adam_update(const Eigen::VectorXd& grad, const AdamConfig& adam) {
  ++adam_step_;
  adam_m_ = adam.beta1 * adam_m_ + (1.0 - adam.beta1) * grad;
  adam_v_ = adam.beta2 * adam_v_ + (1.0 - adam.beta2) * grad.cwiseAbs2();
  const double t = static_cast<double>(adam_step_);
  const double m_correction = 1.0 - std::pow(adam.beta1, t);
  const double v_correction = 1.0 - std::pow(adam.beta2, t);
  params_.array() -= adam.learning_rate * (adam_m_.array() / m_correction) /
                     ((adam_v_.array() / v_correction).sqrt() + adam.epsilon);
}

TrainResult SurrogateModel::train(const SurrogateBatch& batch, const TrainOptions& options, Rng& rng) {
  if (batch.empty()) throw ContractViolation("cannot train the surrogate on an empty batch");
  if (options.epochs == 0 || options.batch_size == 0) throw ConfigError("epochs and batch size must be positive");
  if (static_cast<std::size_t>(batch.inputs().front().size()) != topology_.inputs) {
    throw ContractViolation("surrogate batch width does not match topology");
  }

  for (double t : batch.targets()) scaler_.observe(t);
  if (scaler_.degenerate()) {
    warn("surrogate targets are all identical; training against a constant target");
  }

  const Eigen::MatrixXd x = batch.input_matrix();
  Eigen::VectorXd y(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) y(r) = scaler_.scale(batch.targets()[static_cast<std::size_t>(r)]);

  TrainResult result;
  result.rows = batch.rows();
  result.loss_before = loss(batch);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::VectorXd grad;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(order.size(), start + options.batch_size);
      const auto m = static_cast<Eigen::Index>(stop - start);
      Eigen::MatrixXd xb(m, x.cols());
      Eigen::VectorXd yb(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        xb.row(i) = x.row(order[start + static_cast<std::size_t>(i)]);
        yb(i) = y(order[start + static_cast<std::size_t>(i)]);
      }
      backprop(xb, yb, grad);
      adam_update(grad, options.adam);
    }
  }
  trained_ = true;

  result.loss_after = loss(batch);
  const Eigen::VectorXd fitted = predict_scaled(x);
  result.rmse_scaled = std::sqrt((fitted - y).squaredNorm() / static_cast<double>(x.rows()));
  return result;
}

void SurrogateModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write surrogate checkpoint " + path.string());
  out << kCheckpointMagic << '\n'
      << "inputs " << topology_.inputs << '\n'
      << "hidden1 " << topology_.hidden1 << '\n'
      << "hidden2 " << topology_.hidden2 << '\n'
      << "trained " << (trained_ ? 1 : 0) << '\n'
      << "scaler " << (scaler_.initialized() ? 1 : 0) << ' ' << hex(scaler_.min()) << ' '
      << hex(scaler_.max()) << '\n'
      << "parameters " << params_.size() << '\n';
  for (Eigen::Index i = 0; i < params_.size(); ++i) out << hex(params_(i)) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

SurrogateModel SurrogateModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open surrogate checkpoint " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic != kCheckpointMagic) throw ParseError("not a " + std::string(kCheckpointMagic) + " checkpoint", 1);

  auto expect = [&](const char* key) {
    std::string k;
    in >> k;
    if (k != key) throw ParseError(std::string("expected '") + key + "' in surrogate checkpoint", 0);
  };
  SurrogateModel m;
  int trained = 0;
  int scaler_seen = 0;
  std::string smin, smax;
  std::size_t count = 0;
  expect("inputs");
  in >> m.topology_.inputs;
  expect("hidden1");
  in >> m.topology_.hidden1;
  expect("hidden2");
  in >> m.topology_.hidden2;
  expect("trained");
  in >> trained;
  expect("scaler");
  in >> scaler_seen >> smin >> smax;
  expect("parameters");
  in >> count;
  if (!in || count != m.topology_.parameter_count()) {
    throw ParseError("surrogate checkpoint header is inconsistent", 0);
  }
  m.params_.resize(static_cast<Eigen::Index>(count));
  std::string token;
  for (std::size_t i = 0; i < count; ++i) {
    if (!(in >> token)) throw ParseError("surrogate checkpoint truncated", 0);
    m.params_(static_cast<Eigen::Index>(i)) = parse_hex(token);
  }
  m.adam_m_ = Eigen::VectorXd::Zero(m.params_.size());
  m.adam_v_ = Eigen::VectorXd::Zero(m.params_.size());
  if (scaler_seen) m.scaler_ = TargetScaler::from_range(parse_hex(smin), parse_hex(smax));
  m.trained_ = trained != 0;
  return m;
}

void PseudoLikelihoodBlend::push(double log_lik) {
  values_[count_ % kWindow] = log_lik;
  ++count_;
}

double PseudoLikelihoodBlend::mean() const {
  if (empty()) throw ContractViolation("moving average of an empty history");
  const std::size_t n = size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += values_[(count_ - 1 - i) % kWindow];
  return total / static_cast<double>(n);
}

double blend(double surrogate_log_lik, const PseudoLikelihoodBlend& history) {
  return 0.5 * surrogate_log_lik + 0.5 * history.mean();
}

double surrogate_rmse(std::span<const double> true_vals, std::span<const double> pseudo_vals) {
  if (true_vals.size() != pseudo_vals.size()) throw ContractViolation("RMSE inputs differ in length");
  if (true_vals.empty()) throw ContractViolation("RMSE of empty vectors");
  double total = 0.0;
  for (std::size_t i = 0; i < true_vals.size(); ++i) {
    const double d = true_vals[i] - pseudo_vals[i];
    total += d * d;
  }
  return std::sqrt(total / static_cast<double>(true_vals.size()));
}

}  // namespace sapt
