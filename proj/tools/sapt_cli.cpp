// Command-line front end: load a dataset, run the sampler, write outputs.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "sapt/bnn.hpp"
#include "sapt/dataset.hpp"
#include "sapt/diagnostics.hpp"
#include "sapt/error.hpp"
#include "sapt/sampler.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

// Column and class counts of a headerless "features..., label" CSV.
sapt::DatasetRegistryEntry describe_csv(const std::filesystem::path& path, std::size_t hidden) {
  std::ifstream in(path);
  if (!in) throw sapt::IoError("cannot open dataset file " + path.string());
  sapt::DatasetRegistryEntry e;
  e.name = path.stem().string();
  e.train_file = path.filename().string();
  e.hidden_units = hidden;
  e.surrogate_h1 = 64;
  e.surrogate_h2 = 16;
  std::string line;
  int max_label = -1;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto commas = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
    if (e.attribute_count == 0) e.attribute_count = commas;
    const auto label = line.substr(line.rfind(',') + 1);
    try {
      max_label = std::max(max_label, std::stoi(label));
    } catch (const std::exception&) {
      throw sapt::ParseError("malformed label '" + label + "'", 0);
    }
  }
  if (e.attribute_count == 0 || max_label < 0) throw sapt::ValidationError("dataset file has no usable rows");
  e.class_count = max_label + 1;
  return e;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surrogate-assisted parallel tempering for Bayesian neural network classifiers"};

  std::string dataset = "iris";
  std::string out_dir = "sapt_out";
  std::string proposal = "rw";
  std::size_t thin = 10;
  std::size_t hidden_override = 0;
  double train_fraction = 0.6;
  std::uint64_t split_seed = 0;
  bool split_seed_set = false;
  double prior_var = 25.0;
  sapt::SamplerConfig config;

  app.add_option("--dataset", dataset, "Registered dataset name or path to a CSV file");
  app.add_option("--replicas", config.replica_count, "Number of replicas M")->check(CLI::Range(2, 1024));
  app.add_option("--samples", config.total_samples, "Total samples across all replicas");
  app.add_option("--swap-interval", config.swap_interval, "Steps between replica-exchange sweeps");
  app.add_option("--surrogate-interval", config.surrogate_interval, "Steps between surrogate training rounds");
  app.add_option("--surrogate-prob", config.surrogate_prob, "Per-step probability of the surrogate path")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--max-temp", config.max_temp, "Top of the geometric temperature ladder");
  app.add_option("--proposal", proposal, "Proposal kernel: rw or lg")->check(CLI::IsMember({"rw", "lg"}));
  app.add_option("--lg-prob", config.proposal.lg_prob, "Langevin move probability under lg");
  app.add_option("--lg-rate", config.proposal.lg_learning_rate, "Langevin gradient step size");
  app.add_option("--rw-sd", config.proposal.rw_step_sd, "Proposal noise standard deviation");
  app.add_option("--burn-in", config.burn_in_fraction, "Fraction of each chain spent in the tempered phase");
  app.add_option("--seed", config.base_seed, "Base RNG seed");
  app.add_flag("--sequential", config.sequential_mode, "Run replicas round-robin on one thread");
  app.add_option("--out-dir", out_dir, "Output directory");
  app.add_option("--thin", thin, "Thinning stride for accuracy statistics")->check(CLI::PositiveNumber);
  app.add_option("--train-fraction", train_fraction, "Train share of the stratified split");
  auto* split_opt = app.add_option("--split-seed", split_seed, "Seed for the train/test split (default: --seed)");
  app.add_option("--hidden", hidden_override, "Hidden units (default: registry value, 12 for CSV paths)");
  app.add_option("--init-sd", config.init_sd, "Spread of the initial weights");
  app.add_option("--prior-var", prior_var, "Prior variance of weights and biases");
  app.add_option("--surrogate-epochs", config.surrogate_training.epochs, "Adam epochs per training round");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  split_seed_set = split_opt->count() > 0;
  if (!split_seed_set) split_seed = config.base_seed;
  config.proposal.kind = proposal == "lg" ? sapt::ProposalKind::langevin_mix : sapt::ProposalKind::random_walk;

  std::ostringstream cmd;
  for (int i = 0; i < argc; ++i) cmd << (i ? " " : "") << argv[i];

  sapt::LoadedProblem problem;
  try {
    config.validate();
    const auto registry = sapt::DatasetRegistry::bundled();
    if (registry.find(dataset)) {
      problem = sapt::load_problem(registry, dataset, train_fraction, split_seed);
    } else if (std::filesystem::is_regular_file(dataset)) {
      // Treat the file as a one-entry registry rooted at its directory.
      const std::filesystem::path path(dataset);
      auto entry = describe_csv(path, hidden_override ? hidden_override : 12);
      const auto tmp = std::filesystem::temp_directory_path() / ("sapt_registry_" + entry.name + ".txt");
      std::ofstream reg(tmp);
      reg << '[' << entry.name << "]\nattributes = " << entry.attribute_count << "\nclasses = " << entry.class_count
          << "\nhidden_units = " << entry.hidden_units << "\nsurrogate_h1 = 64\nsurrogate_h2 = 16\ntrain_file = "
          << std::filesystem::absolute(path).string() << '\n';
      reg.close();
      problem = sapt::load_problem(sapt::DatasetRegistry::load(tmp), entry.name, train_fraction, split_seed);
      std::filesystem::remove(tmp);
    } else {
      throw sapt::ConfigError("unknown dataset '" + dataset + "'");
    }
    if (hidden_override) problem.entry.hidden_units = hidden_override;
    config.surrogate_hidden1 = problem.entry.surrogate_h1;
    config.surrogate_hidden2 = problem.entry.surrogate_h2;
  } catch (const sapt::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }

  try {
    const sapt::NetworkTopology topology{problem.entry.attribute_count, problem.entry.hidden_units,
                                         static_cast<std::size_t>(problem.entry.class_count)};
    auto train = std::make_shared<const sapt::Dataset>(problem.train);
    const sapt::BnnPosterior model(topology, train, sapt::PriorConfig{prior_var});

    std::filesystem::create_directories(out_dir);
    sapt::ManifestInfo info{problem.entry.name, train_fraction, split_seed, thin, cmd.str()};
    sapt::write_text(std::filesystem::path(out_dir) / "manifest.txt", sapt::format_manifest(config, info));

    const auto start = std::chrono::steady_clock::now();
    sapt::RunResult result = sapt::run(config, model);

    std::string body;
    if (result.report.aborted) {
      body = sapt::format_run_report(result.report, nullptr, nullptr);
    } else {
      auto summary = sapt::posterior_accuracy(result.chain, problem.train, problem.test, topology, thin);
      const auto samples = result.chain.posterior_samples(thin);
      const auto predictive = sapt::posterior_predictive_accuracy(samples, problem.train, problem.test, topology);
      summary.elapsed_minutes =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
      body = sapt::format_run_report(result.report, &summary, &predictive);
      sapt::emit_posterior(result.chain, topology, out_dir, 1);

      std::cout << problem.entry.name << ": train " << summary.train_mean << " +- " << summary.train_std
                << " (best " << summary.train_best << "), test " << summary.test_mean << " +- "
                << summary.test_std << " (best " << summary.test_best << "), " << summary.elapsed_minutes
                << " min\n";
    }
    body += sapt::surrogate_report(result.report, result.surrogate_trace);
    sapt::write_text(std::filesystem::path(out_dir) / "report.txt", body);
    sapt::write_surrogate_trace(result.surrogate_trace, std::filesystem::path(out_dir) / "surrogate_trace.csv");

    if (result.report.aborted) {
      std::cerr << "run aborted: " << result.report.error << '\n';
      return kExitRuntime;
    }
  } catch (const sapt::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
