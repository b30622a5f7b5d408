#include "sapt/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <utility>

#include "sapt/channel.hpp"
#include "sapt/error.hpp"
#include "sapt/log.hpp"

namespace sapt {

std::size_t SamplerConfig::samples_for(std::size_t replica) const {
  if (!samples_per_replica_override.empty()) return samples_per_replica_override.at(replica);
  return samples_per_replica();
}

std::size_t SamplerConfig::burn_in_steps(std::size_t replica) const {
  return static_cast<std::size_t>(std::floor(burn_in_fraction * static_cast<double>(samples_for(replica))));
}

void SamplerConfig::validate() const {
  if (replica_count < 2) throw ConfigError("need at least 2 replicas");
  if (swap_interval == 0) throw ConfigError("swap interval must be positive");
  if (surrogate_interval == 0 || surrogate_interval % swap_interval != 0) {
    throw ConfigError("surrogate interval must be a positive multiple of the swap interval");
  }
  if (!(surrogate_prob >= 0.0 && surrogate_prob <= 1.0)) throw ConfigError("surrogate probability must lie in [0,1]");
  if (!(burn_in_fraction > 0.0 && burn_in_fraction < 1.0)) throw ConfigError("burn-in fraction must lie in (0,1)");
  if (!(max_temp >= 1.0)) throw ConfigError("maximum temperature must be >= 1");
  if (!(init_sd > 0.0)) throw ConfigError("initial spread must be positive");
  if (surrogate_hidden1 == 0 || surrogate_hidden2 == 0) throw ConfigError("surrogate hidden layers must be nonempty");
  if (worker_timeout.count() <= 0) throw ConfigError("worker timeout must be positive");
  proposal.validate();
  if (samples_per_replica_override.empty()) {
    if (samples_per_replica() == 0) throw ConfigError("total samples must be at least the replica count");
  } else {
    if (samples_per_replica_override.size() != replica_count) {
      throw ConfigError("per-replica sample override must list every replica");
    }
    for (auto n : samples_per_replica_override) {
      if (n == 0) throw ConfigError("every replica needs at least one sample");
    }
  }
}

std::vector<ParamVector> PosteriorChain::posterior_samples(std::size_t stride) const {
  if (stride == 0) throw ContractViolation("thinning stride must be positive");
  std::vector<ParamVector> out;
  for (const auto& chain : replicas) {
    std::size_t seen = 0;
    for (std::size_t s = 0; s < chain.records.size(); ++s) {
      if (chain.records[s].phase != Phase::exploit) continue;
      if (seen++ % stride == 0) out.push_back(chain.thetas[s]);
    }
  }
  return out;
}

std::size_t PosteriorChain::total_steps() const {
  std::size_t n = 0;
  for (const auto& c : replicas) n += c.size();
  return n;
}

std::size_t SweepResult::accepts() const {
  return static_cast<std::size_t>(std::count(accepted.begin(), accepted.end(), true));
}

SweepResult swap_sweep(std::span<ReplicaState> states, Rng& rng) {
  SweepResult result;
  if (states.size() < 2) return result;
  result.accepted.assign(states.size() - 1, false);
  for (std::size_t i = 0; i + 1 < states.size(); ++i) {
    if (i > 0 && result.accepted[i - 1]) continue;
    ++result.attempts;
    const double beta = swap_probability(states[i], states[i + 1]);
    if (uniform01(rng) <= beta) {
      apply_swap(states[i], states[i + 1]);
      result.accepted[i] = true;
    }
  }
  return result;
}

SurrogateBatch collect_surrogate_data(std::span<SurrogateBatch> staged) {
  SurrogateBatch combined;
  for (auto& b : staged) {
    combined.append(b);
    b.clear();
  }
  return combined;
}

AliveCounter::AliveCounter(std::size_t replicas) : alive_flags_(replicas, true), alive_(replicas) {}

void AliveCounter::signal_done(std::size_t replica) {
  if (replica >= alive_flags_.size()) throw ContractViolation("completion signal from unknown replica");
  if (!alive_flags_[replica]) throw ContractViolation("replica " + std::to_string(replica) + " signalled twice");
  alive_flags_[replica] = false;
  --alive_;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct BoundaryReport {
  std::size_t replica = 0;
  ReplicaState state;
  PseudoLikelihoodBlend history;
  SurrogateBatch staged;
  std::size_t steps_done = 0;
  bool finished = false;
};

// Manager -> replica. A resume carries the post-sweep configuration and,
// after a training round, a fresh surrogate snapshot.
struct Instruction {
  bool terminate = false;
  ParamVector theta;
  double log_lik = 0.0;
  double log_prior = 0.0;
  PseudoLikelihoodBlend history;
  std::shared_ptr<const SurrogateModel> surrogate;
};

// Replica -> manager.
struct WorkerMessage {
  std::size_t replica = 0;
  std::optional<BoundaryReport> report;
  std::string error;
};

class ReplicaWorker {
 public:
  ReplicaWorker(std::size_t index, double ladder_temp, const SamplerConfig& config,
                const PosteriorModel& model)
      : index_(index),
        config_(config),
        model_(model),
        rng_(config.base_seed + index),
        r_max_(config.samples_for(index)),
        burn_steps_(config.burn_in_steps(index)) {
    std::normal_distribution<double> init(0.0, config.init_sd);
    ParamVector theta(static_cast<Eigen::Index>(model.dimension()));
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = init(rng_);
    // Initial scoring is not a sampler step and is not counted as a true evaluation.
    state_ = make_replica(index, std::move(theta), ladder_temp, model, config.base_seed + index);
    history_.push(state_.log_lik);
    chain_.ladder_index = index;
    chain_.ladder_temperature = ladder_temp;
    chain_.thetas.reserve(r_max_);
    chain_.records.reserve(r_max_);
  }

  bool finished() const { return step_ >= r_max_; }

  void run_block(const std::atomic<bool>* stop) {
    const std::size_t n = std::min(config_.swap_interval, r_max_ - step_);
    for (std::size_t k = 0; k < n; ++k) {
      if (stop && stop->load(std::memory_order_relaxed)) return;
      step();
    }
  }

  BoundaryReport report() {
    BoundaryReport r;
    r.replica = index_;
    r.state = state_;
    r.history = history_;
    r.steps_done = step_;
    r.finished = finished();
    if (r.finished || step_ % config_.surrogate_interval == 0) {
      r.staged = std::move(staged_);
      staged_.clear();
    }
    return r;
  }

  void apply(const Instruction& in) {
    state_.theta = in.theta;
    state_.log_lik = in.log_lik;
    state_.log_prior = in.log_prior;
    history_ = in.history;
    if (in.surrogate) surrogate_ = in.surrogate;
  }

  std::size_t index() const { return index_; }
  const ReplicaState& state() const { return state_; }
  std::size_t true_evals() const { return true_evals_; }
  std::size_t surrogate_evals() const { return surrogate_evals_; }
  std::size_t audit_evals() const { return audit_evals_; }
  ReplicaChain take_chain() { return std::move(chain_); }
  std::vector<SurrogateTraceRow> take_trace() { return std::move(trace_); }

 private:
  void step() {
    if (step_ >= burn_steps_ && state_.phase == Phase::tempered) {
      state_.phase = Phase::exploit;
      state_.temperature = 1.0;
    }
    if (config_.step_hook) config_.step_hook(index_, step_);

    Proposal proposal = propose(state_.theta, model_, config_.proposal, rng_);

    bool use_surrogate = false;
    if (config_.surrogate_prob > 0.0) {
      const double kappa = uniform01(rng_);
      // The guard counts steps from 1: the first interval is always true-evaluated.
      use_surrogate = kappa < config_.surrogate_prob && step_ + 1 > config_.surrogate_interval && surrogate_;
    }

    double proposal_log_lik = 0.0;
    LikelihoodSource source = LikelihoodSource::true_model;
    if (use_surrogate) {
      source = LikelihoodSource::surrogate;
      const double raw = surrogate_->predict(proposal.theta);
      proposal_log_lik = blend(raw, history_);
      ++surrogate_evals_;
      SurrogateTraceRow row{index_, step_, raw, proposal_log_lik};
      if (config_.audit_surrogate) {
        row.true_log_lik = model_.log_likelihood(proposal.theta);
        ++audit_evals_;
      }
      trace_.push_back(row);
    } else {
      proposal_log_lik = model_.log_likelihood(proposal.theta);
      ++true_evals_;
      staged_.append(proposal.theta, proposal_log_lik, index_, source);
    }

    const StepResult res = metropolis_step(state_, proposal.theta, proposal_log_lik,
                                           model_.log_prior(proposal.theta), proposal.log_q_ratio, rng_);
    // L_past averages the scored proposals (true or blended), not the accepted state.
    history_.push(proposal_log_lik);
    chain_.thetas.push_back(state_.theta);
    chain_.records.push_back(ChainRecord{step_, state_.log_lik, source, state_.phase, res.accepted});
    ++step_;
  }

  std::size_t index_;
  const SamplerConfig& config_;
  const PosteriorModel& model_;
  Rng rng_;
  std::size_t r_max_;
  std::size_t burn_steps_;
  std::size_t step_ = 0;
  ReplicaState state_;
  PseudoLikelihoodBlend history_;
  SurrogateBatch staged_;
  std::shared_ptr<const SurrogateModel> surrogate_;
  ReplicaChain chain_;
  std::vector<SurrogateTraceRow> trace_;
  std::size_t true_evals_ = 0;
  std::size_t surrogate_evals_ = 0;
  std::size_t audit_evals_ = 0;
};

// Swap sweeps, surrogate training and the alive count.
class Manager {
 public:
  Manager(const SamplerConfig& config, const PosteriorModel& model, RunReport& report)
      : config_(config),
        report_(report),
        alive_(config.replica_count),
        swap_rng_(config.base_seed + config.replica_count),
        train_rng_(config.base_seed + config.replica_count + 1) {
    if (config.surrogate_prob > 0.0) {
      SurrogateTopology topo{model.dimension(), config.surrogate_hidden1, config.surrogate_hidden2};
      global_ = SurrogateModel(topo, train_rng_);
    }
  }

  const AliveCounter& alive() const { return alive_; }

  // Handles one synchronized boundary. `reports` holds one entry per live
  // replica; the result maps replica index -> instruction for those that go on.
  std::vector<std::pair<std::size_t, Instruction>> handle(std::vector<BoundaryReport> reports) {
    std::sort(reports.begin(), reports.end(),
              [](const BoundaryReport& a, const BoundaryReport& b) { return a.replica < b.replica; });

    std::vector<BoundaryReport*> going_on;
    std::size_t steps_done = 0;
    for (auto& r : reports) {
      pending_.append(r.staged);
      r.staged.clear();
      if (r.finished) {
        alive_.signal_done(r.replica);
      } else {
        going_on.push_back(&r);
        steps_done = r.steps_done;
      }
    }
    if (going_on.empty()) return {};

    const auto swap_start = Clock::now();
    std::vector<ReplicaState> states;
    std::vector<PseudoLikelihoodBlend> histories;
    states.reserve(going_on.size());
    for (auto* r : going_on) {
      states.push_back(std::move(r->state));
      histories.push_back(r->history);
    }
    const SweepResult sweep = swap_sweep(states, swap_rng_);
    // The moving average belongs to the trajectory, so it moves with theta.
    for (std::size_t i = 0; i < sweep.accepted.size(); ++i) {
      if (sweep.accepted[i]) std::swap(histories[i], histories[i + 1]);
    }
    report_.swap_attempts += sweep.attempts;
    report_.swap_accepts += sweep.accepts();
    report_.swap_seconds += seconds_since(swap_start);

    std::shared_ptr<const SurrogateModel> snapshot;
    if (config_.surrogate_prob > 0.0 && steps_done % config_.surrogate_interval == 0) {
      snapshot = train_round(steps_done);
    }

    std::vector<std::pair<std::size_t, Instruction>> out;
    for (std::size_t i = 0; i < states.size(); ++i) {
      Instruction in;
      in.theta = std::move(states[i].theta);
      in.log_lik = states[i].log_lik;
      in.log_prior = states[i].log_prior;
      in.history = histories[i];
      in.surrogate = snapshot;
      out.emplace_back(going_on[i]->replica, std::move(in));
    }
    return out;
  }

 private:
  std::shared_ptr<const SurrogateModel> train_round(std::size_t steps_done) {
    if (pending_.empty()) {
      ++report_.skipped_training_intervals;
      warn("no true-likelihood rows in surrogate interval ending at step " + std::to_string(steps_done) +
           "; training skipped");
      return nullptr;
    }
    const auto start = Clock::now();
    const TrainResult res = global_.train(pending_, config_.surrogate_training, train_rng_);
    report_.surrogate_training.push_back(
        SurrogateTrainingRecord{steps_done, res.rows, res.rmse_scaled, res.loss_before, res.loss_after});
    pending_.clear();
    report_.surrogate_train_seconds += seconds_since(start);
    return std::make_shared<const SurrogateModel>(global_);
  }

  const SamplerConfig& config_;
  RunReport& report_;
  AliveCounter alive_;
  Rng swap_rng_;
  Rng train_rng_;
  SurrogateModel global_;
  SurrogateBatch pending_;
};

void run_sequential(std::vector<ReplicaWorker>& workers, Manager& manager) {
  while (!manager.alive().done()) {
    std::vector<BoundaryReport> reports;
    for (auto& w : workers) {
      if (!manager.alive().is_alive(w.index())) continue;
      w.run_block(nullptr);
      reports.push_back(w.report());
    }
    for (auto& [replica, instruction] : manager.handle(std::move(reports))) {
      workers[replica].apply(instruction);
    }
  }
}

void run_parallel(std::vector<ReplicaWorker>& workers, Manager& manager, const SamplerConfig& config,
                  RunReport& report) {
  Channel<WorkerMessage> to_manager;
  std::vector<Channel<Instruction>> inboxes(workers.size());
  std::atomic<bool> stop{false};
  std::vector<bool> exited(workers.size(), false);

  std::vector<std::thread> threads;
  threads.reserve(workers.size());
  for (auto& w : workers) {
    threads.emplace_back([&w, &to_manager, &inbox = inboxes[w.index()], &stop] {
      try {
        for (;;) {
          w.run_block(&stop);
          const bool finished = w.finished();
          to_manager.send(WorkerMessage{w.index(), w.report(), {}});
          if (finished) return;
          Instruction in = inbox.receive();
          if (in.terminate) return;
          w.apply(in);
        }
      } catch (const std::exception& e) {
        to_manager.send(WorkerMessage{w.index(), std::nullopt, e.what()});
      }
    });
  }

  auto abort = [&](const std::string& why) {
    report.aborted = true;
    report.error = why;
    stop.store(true);
    Instruction halt;
    halt.terminate = true;
    for (auto& inbox : inboxes) inbox.send(halt);
  };

  while (!manager.alive().done() && !report.aborted) {
    std::vector<BoundaryReport> reports;
    const std::size_t expected = manager.alive().alive();
    while (reports.size() < expected) {
      auto msg = to_manager.receive_for(config.worker_timeout);
      if (!msg) {
        abort("timed out waiting for replica workers after " +
              std::to_string(config.worker_timeout.count()) + " ms");
        break;
      }
      if (!msg->error.empty()) {
        abort("replica " + std::to_string(msg->replica) + " failed: " + msg->error);
        break;
      }
      reports.push_back(std::move(*msg->report));
    }
    if (report.aborted) break;
    for (auto& [replica, instruction] : manager.handle(std::move(reports))) {
      inboxes[replica].send(std::move(instruction));
    }
  }
  for (auto& t : threads) t.join();
}

}  // namespace

RunResult run(const SamplerConfig& config, const PosteriorModel& model) {
  const auto start = Clock::now();
  config.validate();
  const TemperatureLadder ladder = build_ladder(config.replica_count, config.max_temp);

  RunResult result;
  RunReport& report = result.report;
  report.surrogate_enabled = config.surrogate_prob > 0.0;

  {
    std::vector<ReplicaWorker> workers;
    workers.reserve(config.replica_count);
    for (std::size_t i = 0; i < config.replica_count; ++i) {
      workers.emplace_back(i, ladder.temps[i], config, model);
    }
    Manager manager(config, model, report);

    try {
      if (config.sequential_mode) {
        run_sequential(workers, manager);
      } else {
        run_parallel(workers, manager, config, report);
      }
    } catch (const std::exception& e) {
      report.aborted = true;
      report.error = e.what();
    }

    for (auto& w : workers) {
      report.true_evals += w.true_evals();
      report.surrogate_evals += w.surrogate_evals();
      report.audit_evals += w.audit_evals();
      report.nonfinite_rejects += w.state().nonfinite_rejects;
      report.acceptance_rates.push_back(w.state().acceptance_rate());
      result.chain.replicas.push_back(w.take_chain());
      auto trace = w.take_trace();
      result.surrogate_trace.insert(result.surrogate_trace.end(), trace.begin(), trace.end());
    }
  }

  std::vector<double> truth, pseudo, raw;
  for (const auto& row : result.surrogate_trace) {
    if (std::isnan(row.true_log_lik)) continue;
    truth.push_back(row.true_log_lik);
    pseudo.push_back(row.pseudo_log_lik);
    raw.push_back(row.surrogate_raw);
  }
  if (!truth.empty()) {
    report.surrogate_prediction_rmse = surrogate_rmse(truth, pseudo);
    report.surrogate_raw_rmse = surrogate_rmse(truth, raw);
  }
  report.elapsed_seconds = seconds_since(start);
  return result;
}

}  // namespace sapt
