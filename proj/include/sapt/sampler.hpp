#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sapt/bnn.hpp"
#include "sapt/surrogate.hpp"
#include "sapt/tempering.hpp"

namespace sapt {

// Run configuration. Replica i draws from an RNG seeded with base_seed + i;
// the swap sweeps use base_seed + M and surrogate training base_seed + M + 1.
struct SamplerConfig {
  std::size_t replica_count = 10;
  std::size_t total_samples = 50000;
  std::size_t swap_interval = 50;
  std::size_t surrogate_interval = 50;
  // 0 disables the surrogate (plain parallel tempering).
  double surrogate_prob = 0.0;
  double max_temp = 5.0;
  double burn_in_fraction = 0.5;
  ProposalConfig proposal;
  std::uint64_t base_seed = 1;
  bool sequential_mode = false;

  // Initial theta ~ N(0, init_sd^2) per component.
  double init_sd = 1.0;

  std::size_t surrogate_hidden1 = 64;
  std::size_t surrogate_hidden2 = 16;
  TrainOptions surrogate_training;
  // Also score surrogate-path proposals with the true model, for the
  // prediction RMSE only. These evaluations never reach the sampler and are
  // counted separately.
  bool audit_surrogate = true;

  std::chrono::milliseconds worker_timeout{600'000};

  // Test hooks. Per-replica sample counts replace total_samples / M when
  // nonempty; the step hook runs on the replica's worker before every step.
  std::vector<std::size_t> samples_per_replica_override;
  std::function<void(std::size_t replica, std::size_t step)> step_hook;

  std::size_t samples_per_replica() const { return total_samples / replica_count; }
  std::size_t samples_for(std::size_t replica) const;
  std::size_t burn_in_steps(std::size_t replica) const;

  // Throws ConfigError on any inconsistency.
  void validate() const;
};

struct ChainRecord {
  std::size_t step = 0;
  double log_lik = 0.0;
  LikelihoodSource source = LikelihoodSource::true_model;
  Phase phase = Phase::tempered;
  bool accepted = false;
};

// Per-step history of one ladder position. Rejections repeat the previous theta.
struct ReplicaChain {
  std::size_t ladder_index = 0;
  double ladder_temperature = 1.0;
  std::vector<ParamVector> thetas;
  std::vector<ChainRecord> records;

  std::size_t size() const { return records.size(); }
};

struct PosteriorChain {
  std::vector<ReplicaChain> replicas;

  // Exploit-phase samples from every replica, replica-major, optionally thinned
  // per replica (keeps every `stride`-th exploit sample starting at the first).
  std::vector<ParamVector> posterior_samples(std::size_t stride = 1) const;
  std::size_t total_steps() const;
};

// One surrogate-path step: the pseudo-likelihood used by the sampler and,
// when audited, the true value at the same proposal.
struct SurrogateTraceRow {
  std::size_t replica = 0;
  std::size_t step = 0;
  double surrogate_raw = 0.0;
  double pseudo_log_lik = 0.0;
  double true_log_lik = std::numeric_limits<double>::quiet_NaN();
};

struct SurrogateTrainingRecord {
  std::size_t step = 0;
  std::size_t rows = 0;
  double rmse_scaled = 0.0;
  double loss_before = 0.0;
  double loss_after = 0.0;
};

struct RunReport {
  double elapsed_seconds = 0.0;
  double swap_seconds = 0.0;
  double surrogate_train_seconds = 0.0;
  std::size_t true_evals = 0;
  std::size_t surrogate_evals = 0;
  std::size_t audit_evals = 0;
  std::size_t swap_attempts = 0;
  std::size_t swap_accepts = 0;
  std::size_t skipped_training_intervals = 0;
  std::size_t nonfinite_rejects = 0;
  std::vector<double> acceptance_rates;
  std::vector<SurrogateTrainingRecord> surrogate_training;
  // Audited error of the blended pseudo-likelihood and of the raw surrogate
  // output; NaN when no audited surrogate step exists.
  double surrogate_prediction_rmse = std::numeric_limits<double>::quiet_NaN();
  double surrogate_raw_rmse = std::numeric_limits<double>::quiet_NaN();
  bool surrogate_enabled = false;
  bool aborted = false;
  std::string error;

  double swap_acceptance_rate() const {
    return swap_attempts == 0 ? 0.0 : static_cast<double>(swap_accepts) / static_cast<double>(swap_attempts);
  }
};

struct RunResult {
  PosteriorChain chain;
  RunReport report;
  std::vector<SurrogateTraceRow> surrogate_trace;
};

struct SweepResult {
  std::size_t attempts = 0;
  // accepted[i] refers to the pair (states[i], states[i+1]).
  std::vector<bool> accepted;

  std::size_t accepts() const;
};

// Neighbour swap sweep over states sorted by ladder position. Pairs are
// visited in ascending order; a replica swaps at most once per sweep. One
// uniform draw per considered pair; swap iff draw <= swap probability.
SweepResult swap_sweep(std::span<ReplicaState> states, Rng& rng);

// Concatenates and clears per-replica staging buffers.
SurrogateBatch collect_surrogate_data(std::span<SurrogateBatch> staged);

// Manager-side count of live replicas. Each replica may signal completion once.
class AliveCounter {
 public:
  explicit AliveCounter(std::size_t replicas);

  // Throws ContractViolation on a repeated or unknown signal.
  void signal_done(std::size_t replica);
  bool is_alive(std::size_t replica) const { return alive_flags_.at(replica); }
  std::size_t alive() const { return alive_; }
  bool done() const { return alive_ == 0; }

 private:
  std::vector<bool> alive_flags_;
  std::size_t alive_;
};

// Runs the full surrogate-assisted parallel tempering protocol.
RunResult run(const SamplerConfig& config, const PosteriorModel& model);

}  // namespace sapt
