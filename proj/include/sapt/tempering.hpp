#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "sapt/bnn.hpp"

namespace sapt {

using Rng = std::mt19937_64;

// Uniform draw on [0,1).
double uniform01(Rng& rng);

// Geometric ladder temps[i] = max_temp^(i/(M-1)); temps[0] == 1 and
// temps[M-1] == max_temp exactly.
struct TemperatureLadder {
  std::vector<double> temps;
  double max_temp = 1.0;

  std::size_t replica_count() const { return temps.size(); }
};

TemperatureLadder build_ladder(std::size_t replica_count, double max_temp);

enum class Phase { tempered, exploit };

const char* to_string(Phase phase);

// One chain of the ensemble. `log_lik` is untempered; it may hold a
// pseudo-likelihood when the last accepted proposal was scored by the
// surrogate.
struct ReplicaState {
  std::size_t ladder_index = 0;
  ParamVector theta;
  double temperature = 1.0;
  double log_lik = 0.0;
  double log_prior = 0.0;
  std::size_t accepted_count = 0;
  std::size_t proposed_count = 0;
  std::size_t nonfinite_rejects = 0;
  std::uint64_t rng_seed = 0;
  Phase phase = Phase::tempered;

  double acceptance_rate() const {
    return proposed_count == 0 ? 0.0
                               : static_cast<double>(accepted_count) / static_cast<double>(proposed_count);
  }
};

// Scores `theta` with the true model and fills the cached values.
ReplicaState make_replica(std::size_t ladder_index, ParamVector theta, double temperature,
                          const PosteriorModel& model, std::uint64_t rng_seed);

enum class ProposalKind { random_walk, langevin_mix };

struct ProposalConfig {
  ProposalKind kind = ProposalKind::random_walk;
  double rw_step_sd = 0.025;
  double lg_learning_rate = 0.5;
  // Chance of a Langevin move per step under langevin_mix.
  double lg_prob = 0.5;

  void validate() const;
};

// theta + N(0, step_sd^2 I). Draws theta.size() normals.
ParamVector propose_rw(const ParamVector& theta, double step_sd, Rng& rng);

struct Proposal {
  ParamVector theta;
  // log q(current | proposed) - log q(proposed | current).
  double log_q_ratio = 0.0;
  bool langevin = false;
};

// Mean of the Langevin proposal: one gradient-descent step on the energy.
ParamVector langevin_mean(const ParamVector& theta, const PosteriorModel& model, double learning_rate);

// N(langevin_mean(theta), rw_step_sd^2 I) with the Hastings correction.
Proposal propose_langevin(const ParamVector& theta, const PosteriorModel& model,
                          const ProposalConfig& config, Rng& rng);

// log q(from | to) - log q(to | from) for the Langevin kernel.
double langevin_log_q_ratio(const ParamVector& from, const ParamVector& to,
                            const PosteriorModel& model, const ProposalConfig& config);

// Chooses the kernel per config (one uniform draw under langevin_mix) and proposes.
Proposal propose(const ParamVector& theta, const PosteriorModel& model, const ProposalConfig& config,
                 Rng& rng);

struct StepResult {
  bool accepted = false;
  double acceptance_probability = 0.0;
  bool nonfinite = false;
};

// Log of the tempered Metropolis-Hastings ratio. Only the likelihood is
// tempered.
double acceptance_log_ratio(double temperature, double current_log_lik, double proposed_log_lik,
                            double current_log_prior, double proposed_log_prior, double log_q_ratio);

// Accepts or rejects a scored proposal. Always consumes one uniform draw and
// increments proposed_count. A non-finite ratio is treated as a rejection.
StepResult metropolis_step(ReplicaState& state, const ParamVector& proposal, double proposal_log_lik,
                           double proposal_log_prior, double log_q_ratio, Rng& rng);

// Convenience overload scoring the proposal with the true model.
StepResult metropolis_step(ReplicaState& state, const Proposal& proposal, const PosteriorModel& model,
                           Rng& rng);

// Replica-exchange probability min(1, exp((1/T_hi - 1/T_lo)(L_hi - L_lo))).
// `lower` must sit below `upper` on the ladder with T_lower <= T_upper.
double swap_probability(const ReplicaState& lower, const ReplicaState& upper);

// Exchanges configuration (theta, cached likelihood and prior). Ladder
// position, temperature, phase, counters and seed stay put.
void apply_swap(ReplicaState& a, ReplicaState& b);

}  // namespace sapt
