#include "sapt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "sapt/error.hpp"

#ifndef SAPT_VERSION
#define SAPT_VERSION "0.0.0"
#endif

namespace sapt {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

const char* proposal_name(ProposalKind kind) { return kind == ProposalKind::random_walk ? "rw" : "lg"; }

}  // namespace

SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) throw ContractViolation("cannot summarize an empty sample");
  SummaryStats s;
  s.count = values.size();
  double total = 0.0;
  s.best = values.front();
  for (double v : values) {
    total += v;
    s.best = std::max(s.best, v);
  }
  s.mean = total / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

bool AccuracySummary::consistent() const {
  auto in_range = [](double v) { return v >= 0.0 && v <= 100.0; };
  // Summation rounding can put the mean a hair above the best.
  constexpr double slack = 1e-9;
  return train_best + slack >= train_mean && test_best + slack >= test_mean && train_std >= 0.0 &&
         test_std >= 0.0 && in_range(train_mean) && in_range(train_best) && in_range(test_mean) &&
         in_range(test_best);
}

AccuracySummary posterior_accuracy(std::span<const ParamVector> samples, const Dataset& train,
                                   const Dataset& test, const NetworkTopology& topology) {
  if (samples.empty()) throw ContractViolation("posterior is empty");
  std::vector<double> tr, te;
  tr.reserve(samples.size());
  te.reserve(samples.size());
  for (const auto& theta : samples) {
    tr.push_back(predict_accuracy(theta, train, topology));
    te.push_back(predict_accuracy(theta, test, topology));
  }
  const SummaryStats a = summarize(tr);
  const SummaryStats b = summarize(te);
  AccuracySummary out;
  out.train_mean = a.mean;
  out.train_std = a.std;
  out.train_best = a.best;
  out.test_mean = b.mean;
  out.test_std = b.std;
  out.test_best = b.best;
  out.samples = samples.size();
  return out;
}

AccuracySummary posterior_accuracy(const PosteriorChain& chain, const Dataset& train, const Dataset& test,
                                   const NetworkTopology& topology, std::size_t thin) {
  const auto samples = chain.posterior_samples(thin);
  return posterior_accuracy(std::span<const ParamVector>(samples), train, test, topology);
}

PredictiveAccuracy posterior_predictive_accuracy(std::span<const ParamVector> samples, const Dataset& train,
                                                 const Dataset& test, const NetworkTopology& topology) {
  if (samples.empty()) throw ContractViolation("posterior is empty");
  auto accuracy = [&](const Dataset& ds) {
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ds.size()), ds.class_count);
    for (const auto& theta : samples) mean += predict_proba(theta, ds, topology);
    std::size_t correct = 0;
    for (Eigen::Index t = 0; t < mean.rows(); ++t) {
      Eigen::Index best = 0;
      for (Eigen::Index k = 1; k < mean.cols(); ++k) {
        if (mean(t, k) > mean(t, best)) best = k;
      }
      if (best == ds.labels[static_cast<std::size_t>(t)]) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(ds.size());
  };
  return {accuracy(train), accuracy(test)};
}

std::string surrogate_report(const RunReport& report, std::span<const SurrogateTraceRow> trace) {
  std::ostringstream os;
  if (!report.surrogate_enabled) {
    os << "surrogate = not applicable\n";
    return os.str();
  }
  os << "surrogate = enabled\n";
  os << "surrogate_steps = " << trace.size() << '\n';
  std::size_t audited = 0;
  for (const auto& row : trace) audited += std::isnan(row.true_log_lik) ? 0 : 1;
  os << "surrogate_audited_steps = " << audited << '\n';
  os << "surrogate_raw_rmse = " << fmt(report.surrogate_raw_rmse) << '\n';
  std::vector<double> rmse;
  for (const auto& r : report.surrogate_training) rmse.push_back(r.rmse_scaled);
  os << "surrogate_training_rounds = " << rmse.size() << '\n';
  if (!rmse.empty()) {
    const SummaryStats s = summarize(rmse);
    os << "surrogate_train_rmse_mean = " << fmt(s.mean) << '\n';
    os << "surrogate_train_rmse_std = " << fmt(s.std) << '\n';
  }
  os << "surrogate_skipped_rounds = " << report.skipped_training_intervals << '\n';
  return os.str();
}

void write_surrogate_trace(std::span<const SurrogateTraceRow> trace, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "replica,step,surrogate_raw,pseudo_log_lik,true_log_lik\n";
  for (const auto& row : trace) {
    out << row.replica << ',' << row.step << ',' << row.surrogate_raw << ',' << row.pseudo_log_lik << ',';
    if (std::isnan(row.true_log_lik)) {
      out << "nan";
    } else {
      out << row.true_log_lik;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string> parameter_names(const NetworkTopology& topology) {
  std::vector<std::string> names;
  names.reserve(topology.parameter_count());
  for (std::size_t d = 0; d < topology.inputs; ++d)
    for (std::size_t h = 0; h < topology.hidden; ++h) names.push_back("w_" + std::to_string(d) + "_" + std::to_string(h));
  for (std::size_t h = 0; h < topology.hidden; ++h) names.push_back("bh_" + std::to_string(h));
  for (std::size_t h = 0; h < topology.hidden; ++h)
    for (std::size_t o = 0; o < topology.outputs; ++o) names.push_back("v_" + std::to_string(h) + "_" + std::to_string(o));
  for (std::size_t o = 0; o < topology.outputs; ++o) names.push_back("bo_" + std::to_string(o));
  return names;
}

Histogram make_histogram(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw ContractViolation("histogram needs at least one bin");
  Histogram h;
  h.counts.assign(bins, 0);
  if (values.empty()) return h;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  h.lower = *lo;
  h.upper = *hi;
  const double width = (h.upper - h.lower) / static_cast<double>(bins);
  for (double v : values) {
    std::size_t b = 0;
    if (width > 0.0) {
      b = static_cast<std::size_t>((v - h.lower) / width);
      b = std::min(b, bins - 1);
    }
    ++h.counts[b];
  }
  return h;
}

void emit_posterior(const PosteriorChain& chain, const NetworkTopology& topology,
                    const std::filesystem::path& out_dir, std::size_t thin) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError("cannot create output directory " + out_dir.string());
  }
  const auto samples = chain.posterior_samples(thin);
  if (samples.empty()) throw ContractViolation("posterior is empty");
  const auto names = parameter_names(topology);
  if (static_cast<std::size_t>(samples.front().size()) != names.size()) {
    throw ContractViolation("posterior samples do not match the topology");
  }

  auto hist_out = open_out(out_dir / "histograms.csv");
  hist_out << "param,bin,lower,upper,count\n";
  std::vector<double> column(samples.size());
  for (std::size_t p = 0; p < names.size(); ++p) {
    auto out = open_out(out_dir / ("posterior_" + names[p] + ".csv"));
    out << "sample,value\n";
    for (std::size_t s = 0; s < samples.size(); ++s) {
      column[s] = samples[s](static_cast<Eigen::Index>(p));
      out << s << ',' << column[s] << '\n';
    }
    if (!out) throw IoError("write failed in " + out_dir.string());
    const Histogram h = make_histogram(column);
    const double width = (h.upper - h.lower) / static_cast<double>(h.counts.size());
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      hist_out << names[p] << ',' << b << ',' << h.lower + width * static_cast<double>(b) << ','
               << (b + 1 == h.counts.size() ? h.upper : h.lower + width * static_cast<double>(b + 1)) << ','
               << h.counts[b] << '\n';
    }
  }
  if (!hist_out) throw IoError("write failed in " + out_dir.string());

  for (const auto& rc : chain.replicas) {
    auto out = open_out(out_dir / ("trace_replica" + std::to_string(rc.ladder_index) + ".csv"));
    out << "step,log_lik,source,phase,accepted\n";
    for (const auto& r : rc.records) {
      out << r.step << ',' << r.log_lik << ',' << to_string(r.source) << ',' << to_string(r.phase) << ','
          << (r.accepted ? 1 : 0) << '\n';
    }
    if (!out) throw IoError("write failed in " + out_dir.string());
  }
}

std::string code_version() { return SAPT_VERSION; }

std::string format_manifest(const SamplerConfig& c, const ManifestInfo& info) {
  std::ostringstream os;
  os << "version = " << code_version() << '\n'
     << "command = " << info.command_line << '\n'
     << "dataset = " << info.dataset << '\n'
     << "train_fraction = " << fmt(info.train_fraction) << '\n'
     << "split_seed = " << info.split_seed << '\n'
     << "seed = " << c.base_seed << '\n'
     << "replicas = " << c.replica_count << '\n'
     << "samples = " << c.total_samples << '\n'
     << "samples_per_replica = " << c.samples_per_replica() << '\n'
     << "swap_interval = " << c.swap_interval << '\n'
     << "surrogate_interval = " << c.surrogate_interval << '\n'
     << "surrogate_prob = " << fmt(c.surrogate_prob) << '\n'
     << "max_temp = " << fmt(c.max_temp) << '\n'
     << "burn_in = " << fmt(c.burn_in_fraction) << '\n'
     << "proposal = " << proposal_name(c.proposal.kind) << '\n'
     << "rw_sd = " << fmt(c.proposal.rw_step_sd) << '\n'
     << "lg_rate = " << fmt(c.proposal.lg_learning_rate) << '\n'
     << "lg_prob = " << fmt(c.proposal.lg_prob) << '\n'
     << "init_sd = " << fmt(c.init_sd) << '\n'
     << "surrogate_hidden = " << c.surrogate_hidden1 << ',' << c.surrogate_hidden2 << '\n'
     << "surrogate_epochs = " << c.surrogate_training.epochs << '\n'
     << "surrogate_batch = " << c.surrogate_training.batch_size << '\n'
     << "surrogate_adam_rate = " << fmt(c.surrogate_training.adam.learning_rate) << '\n'
     << "sequential = " << (c.sequential_mode ? 1 : 0) << '\n'
     << "thin = " << info.thin << '\n';
  return os.str();
}

std::string format_run_report(const RunReport& r, const AccuracySummary* accuracy,
                              const PredictiveAccuracy* predictive) {
  std::ostringstream os;
  os << "status = " << (r.aborted ? "aborted" : "ok") << '\n';
  if (r.aborted) os << "error = " << r.error << '\n';
  os << "elapsed_seconds = " << fmt(r.elapsed_seconds) << '\n'
     << "swap_seconds = " << fmt(r.swap_seconds) << '\n'
     << "surrogate_train_seconds = " << fmt(r.surrogate_train_seconds) << '\n'
     << "true_evals = " << r.true_evals << '\n'
     << "surrogate_evals = " << r.surrogate_evals << '\n'
     << "audit_evals = " << r.audit_evals << '\n'
     << "swap_attempts = " << r.swap_attempts << '\n'
     << "swap_accepts = " << r.swap_accepts << '\n'
     << "swap_acceptance_rate = " << fmt(r.swap_acceptance_rate()) << '\n'
     << "nonfinite_rejects = " << r.nonfinite_rejects << '\n';
  for (std::size_t i = 0; i < r.acceptance_rates.size(); ++i) {
    os << "acceptance_rate_replica" << i << " = " << fmt(r.acceptance_rates[i]) << '\n';
  }
  for (std::size_t i = 0; i < r.surrogate_training.size(); ++i) {
    const auto& t = r.surrogate_training[i];
    os << "surrogate_train_round" << i << " = step:" << t.step << " rows:" << t.rows
       << " rmse_scaled:" << fmt(t.rmse_scaled) << '\n';
  }
  os << "surrogate_prediction_rmse = " << fmt(r.surrogate_prediction_rmse) << '\n';
  if (accuracy) {
    os << "posterior_samples = " << accuracy->samples << '\n'
       << "train_accuracy_mean = " << fmt(accuracy->train_mean) << '\n'
       << "train_accuracy_std = " << fmt(accuracy->train_std) << '\n'
       << "train_accuracy_best = " << fmt(accuracy->train_best) << '\n'
       << "test_accuracy_mean = " << fmt(accuracy->test_mean) << '\n'
       << "test_accuracy_std = " << fmt(accuracy->test_std) << '\n'
       << "test_accuracy_best = " << fmt(accuracy->test_best) << '\n'
       << "elapsed_minutes = " << fmt(accuracy->elapsed_minutes) << '\n';
  }
  if (predictive) {
    os << "predictive_train_accuracy = " << fmt(predictive->train) << '\n'
       << "predictive_test_accuracy = " << fmt(predictive->test) << '\n';
  }
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << body;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace sapt
