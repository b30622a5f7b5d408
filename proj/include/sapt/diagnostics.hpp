#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sapt/bnn.hpp"
#include "sapt/dataset.hpp"
#include "sapt/sampler.hpp"

namespace sapt {

struct SummaryStats {
  double mean = 0.0;
  // Population standard deviation.
  double std = 0.0;
  double best = 0.0;
  std::size_t count = 0;
};

SummaryStats summarize(std::span<const double> values);

// Classification accuracy over posterior samples, in percent.
struct AccuracySummary {
  double train_mean = 0.0;
  double train_std = 0.0;
  double train_best = 0.0;
  double test_mean = 0.0;
  double test_std = 0.0;
  double test_best = 0.0;
  double elapsed_minutes = 0.0;
  std::size_t samples = 0;

  // best >= mean, std >= 0, everything within [0,100].
  bool consistent() const;
};

// Per-sample accuracy statistics over exploit-phase samples, thinned per
// replica. Throws ContractViolation if no exploit-phase sample exists.
AccuracySummary posterior_accuracy(const PosteriorChain& chain, const Dataset& train, const Dataset& test,
                                   const NetworkTopology& topology, std::size_t thin = 10);

// Same, over an explicit sample list.
AccuracySummary posterior_accuracy(std::span<const ParamVector> samples, const Dataset& train,
                                   const Dataset& test, const NetworkTopology& topology);

// Accuracy of the posterior predictive mean (softmax averaged over samples).
struct PredictiveAccuracy {
  double train = 0.0;
  double test = 0.0;
};

PredictiveAccuracy posterior_predictive_accuracy(std::span<const ParamVector> samples, const Dataset& train,
                                                 const Dataset& test, const NetworkTopology& topology);

// Key-value text describing surrogate quality: prediction RMSE in raw
// log-likelihood units and training RMSE mean/std in scaled units. Emits
// "surrogate = not applicable" when the run had the surrogate disabled.
std::string surrogate_report(const RunReport& report, std::span<const SurrogateTraceRow> trace);

// Columns: replica,step,surrogate_raw,pseudo_log_lik,true_log_lik. One row per
// surrogate-path step.
void write_surrogate_trace(std::span<const SurrogateTraceRow> trace, const std::filesystem::path& path);

// Names in ParamVector order: w_<input>_<hidden>, bh_<hidden>, v_<hidden>_<output>, bo_<output>.
std::vector<std::string> parameter_names(const NetworkTopology& topology);

struct Histogram {
  double lower = 0.0;
  double upper = 0.0;
  std::vector<std::size_t> counts;
};

// Equal-width bins over [min, max] of `values`; the maximum falls in the last bin.
Histogram make_histogram(std::span<const double> values, std::size_t bins = 50);

// Writes posterior_<param>.csv per parameter, trace_replica<i>.csv per replica
// and histograms.csv. Output is a pure function of the chain.
void emit_posterior(const PosteriorChain& chain, const NetworkTopology& topology,
                    const std::filesystem::path& out_dir, std::size_t thin = 1);

struct ManifestInfo {
  std::string dataset;
  double train_fraction = 0.6;
  std::uint64_t split_seed = 0;
  std::size_t thin = 10;
  std::string command_line;
};

std::string code_version();

std::string format_manifest(const SamplerConfig& config, const ManifestInfo& info);

// report.txt body: run counters, timings and (when given) the accuracy summary.
std::string format_run_report(const RunReport& report, const AccuracySummary* accuracy,
                              const PredictiveAccuracy* predictive);

void write_text(const std::filesystem::path& path, const std::string& body);

}  // namespace sapt
