#include "sapt/tempering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "sapt/error.hpp"
#include "sapt/log.hpp"

namespace sapt {

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

TemperatureLadder build_ladder(std::size_t replica_count, double max_temp) {
  if (replica_count < 2) throw ConfigError("temperature ladder needs at least 2 replicas");
  if (!(max_temp >= 1.0) || !std::isfinite(max_temp)) {
    throw ConfigError("maximum temperature must be a finite value >= 1");
  }
  TemperatureLadder ladder;
  ladder.max_temp = max_temp;
  ladder.temps.resize(replica_count);
  const double span = static_cast<double>(replica_count - 1);
  for (std::size_t i = 0; i < replica_count; ++i) {
    ladder.temps[i] = std::pow(max_temp, static_cast<double>(i) / span);
  }
  ladder.temps.front() = 1.0;
  ladder.temps.back() = max_temp;
  return ladder;
}

const char* to_string(Phase phase) { return phase == Phase::tempered ? "tempered" : "exploit"; }

ReplicaState make_replica(std::size_t ladder_index, ParamVector theta, double temperature,
                          const PosteriorModel& model, std::uint64_t rng_seed) {
  if (static_cast<std::size_t>(theta.size()) != model.dimension()) {
    throw ContractViolation("initial theta has the wrong dimension");
  }
  ReplicaState s;
  s.ladder_index = ladder_index;
  s.temperature = temperature;
  s.log_lik = model.log_likelihood(theta);
  s.log_prior = model.log_prior(theta);
  s.theta = std::move(theta);
  s.rng_seed = rng_seed;
  if (!std::isfinite(s.log_lik)) throw ContractViolation("initial log-likelihood is not finite");
  return s;
}

void ProposalConfig::validate() const {
  if (!(rw_step_sd > 0.0)) throw ConfigError("random-walk step sd must be positive");
  if (!(lg_learning_rate > 0.0)) throw ConfigError("Langevin learning rate must be positive");
  if (!(lg_prob >= 0.0 && lg_prob <= 1.0)) throw ConfigError("Langevin probability must lie in [0,1]");
}

ParamVector propose_rw(const ParamVector& theta, double step_sd, Rng& rng) {
  if (!(step_sd > 0.0)) throw ContractViolation("random-walk step sd must be positive");
  std::normal_distribution<double> noise(0.0, step_sd);
  ParamVector out(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) out(i) = theta(i) + noise(rng);
  return out;
}

ParamVector langevin_mean(const ParamVector& theta, const PosteriorModel& model, double learning_rate) {
  return theta - learning_rate * model.energy_gradient(theta);
}

double langevin_log_q_ratio(const ParamVector& from, const ParamVector& to,
                            const PosteriorModel& model, const ProposalConfig& config) {
  const double var = config.rw_step_sd * config.rw_step_sd;
  const ParamVector forward_mean = langevin_mean(from, model, config.lg_learning_rate);
  const ParamVector reverse_mean = langevin_mean(to, model, config.lg_learning_rate);
  return ((to - forward_mean).squaredNorm() - (from - reverse_mean).squaredNorm()) / (2.0 * var);
}

Proposal propose_langevin(const ParamVector& theta, const PosteriorModel& model,
                          const ProposalConfig& config, Rng& rng) {
  if (!(config.lg_learning_rate > 0.0)) throw ContractViolation("Langevin learning rate must be positive");
  const ParamVector forward_mean = langevin_mean(theta, model, config.lg_learning_rate);
  Proposal p;
  p.langevin = true;
  p.theta = propose_rw(forward_mean, config.rw_step_sd, rng);
  const ParamVector reverse_mean = langevin_mean(p.theta, model, config.lg_learning_rate);
  const double var = config.rw_step_sd * config.rw_step_sd;
  p.log_q_ratio =
      ((p.theta - forward_mean).squaredNorm() - (theta - reverse_mean).squaredNorm()) / (2.0 * var);
  return p;
}

Proposal propose(const ParamVector& theta, const PosteriorModel& model, const ProposalConfig& config,
                 Rng& rng) {
  if (config.kind == ProposalKind::langevin_mix && uniform01(rng) < config.lg_prob) {
    return propose_langevin(theta, model, config, rng);
  }
  return Proposal{propose_rw(theta, config.rw_step_sd, rng), 0.0, false};
}

double acceptance_log_ratio(double temperature, double current_log_lik, double proposed_log_lik,
                            double current_log_prior, double proposed_log_prior, double log_q_ratio) {
  return (proposed_log_lik - current_log_lik) / temperature + (proposed_log_prior - current_log_prior) +
         log_q_ratio;
}

StepResult metropolis_step(ReplicaState& state, const ParamVector& proposal, double proposal_log_lik,
                           double proposal_log_prior, double log_q_ratio, Rng& rng) {
  const double u = uniform01(rng);
  ++state.proposed_count;
  StepResult result;
  const double log_ratio = acceptance_log_ratio(state.temperature, state.log_lik, proposal_log_lik,
                                                state.log_prior, proposal_log_prior, log_q_ratio);
  if (std::isnan(log_ratio) || log_ratio == std::numeric_limits<double>::infinity()) {
    result.nonfinite = true;
    ++state.nonfinite_rejects;
    warn("non-finite acceptance exponent on replica " + std::to_string(state.ladder_index) +
         "; proposal rejected");
    return result;
  }
  // exp(-inf) == 0 is a legitimate certain rejection.
  result.acceptance_probability = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
  if (u <= result.acceptance_probability) {
    result.accepted = true;
    ++state.accepted_count;
    state.theta = proposal;
    state.log_lik = proposal_log_lik;
    state.log_prior = proposal_log_prior;
  }
  return result;
}

StepResult metropolis_step(ReplicaState& state, const Proposal& proposal, const PosteriorModel& model,
                           Rng& rng) {
  return metropolis_step(state, proposal.theta, model.log_likelihood(proposal.theta),
                         model.log_prior(proposal.theta), proposal.log_q_ratio, rng);
}

double swap_probability(const ReplicaState& lower, const ReplicaState& upper) {
  if (upper.ladder_index <= lower.ladder_index || upper.temperature < lower.temperature) {
    throw ContractViolation("swap pair must be ordered by ladder position (" +
                            std::to_string(lower.ladder_index) + ", " +
                            std::to_string(upper.ladder_index) + ")");
  }
  const double exponent =
      (1.0 / upper.temperature - 1.0 / lower.temperature) * (upper.log_lik - lower.log_lik);
  if (std::isnan(exponent)) return 0.0;
  return exponent >= 0.0 ? 1.0 : std::exp(exponent);
}

void apply_swap(ReplicaState& a, ReplicaState& b) {
  std::swap(a.theta, b.theta);
  std::swap(a.log_lik, b.log_lik);
  std::swap(a.log_prior, b.log_prior);
}

}  // namespace sapt
