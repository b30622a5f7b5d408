#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "sapt/diagnostics.hpp"
#include "sapt/error.hpp"
#include "test_util.hpp"

using namespace sapt;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t line_count(const std::filesystem::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

// Two replicas, four steps each; the last two steps are exploit-phase.
PosteriorChain toy_chain(const NetworkTopology& t) {
  PosteriorChain chain;
  for (std::size_t r = 0; r < 2; ++r) {
    ReplicaChain rc;
    rc.ladder_index = r;
    for (std::size_t s = 0; s < 4; ++s) {
      rc.thetas.push_back(test::random_theta(t.parameter_count(), r * 10 + s));
      rc.records.push_back(ChainRecord{s, -1.0 - static_cast<double>(s), LikelihoodSource::true_model,
                                       s >= 2 ? Phase::exploit : Phase::tempered, s % 2 == 0});
    }
    chain.replicas.push_back(std::move(rc));
  }
  return chain;
}

}  // namespace

TEST_CASE("summary statistics") {
  const std::vector<double> v{2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
  const SummaryStats s = summarize(v);
  CHECK(s.mean == doctest::Approx(5.0));
  CHECK(s.std == doctest::Approx(2.0));
  CHECK(s.best == 9.0);
  CHECK(s.count == 8);

  std::vector<double> doubled;
  for (double x : v) {
    doubled.push_back(x);
    doubled.push_back(x);
  }
  const SummaryStats d = summarize(doubled);
  CHECK(d.mean == doctest::Approx(s.mean));
  CHECK(d.std == doctest::Approx(s.std));
  CHECK(d.best == s.best);
  CHECK_THROWS_AS(summarize(std::vector<double>{}), ContractViolation);
}

TEST_CASE("posterior accuracy") {
  const Dataset train = test::random_dataset(30, 3, 3, 1);
  const Dataset test_set = test::random_dataset(20, 3, 3, 2);
  const NetworkTopology t{3, 4, 3};

  SUBCASE("single sample: mean equals best, zero spread") {
    const std::vector<ParamVector> one{test::random_theta(t.parameter_count(), 5)};
    const AccuracySummary a = posterior_accuracy(one, train, test_set, t);
    CHECK(a.train_mean == a.train_best);
    CHECK(a.test_mean == a.test_best);
    CHECK(a.train_std == 0.0);
    CHECK(a.test_std == 0.0);
    CHECK(a.consistent());
    CHECK(a.test_mean == predict_accuracy(one[0], test_set, t));
  }
  SUBCASE("duplicating every sample changes nothing") {
    std::vector<ParamVector> s, dup;
    for (std::uint64_t i = 0; i < 12; ++i) {
      s.push_back(test::random_theta(t.parameter_count(), i, 2.0));
      dup.push_back(s.back());
      dup.push_back(s.back());
    }
    const AccuracySummary a = posterior_accuracy(s, train, test_set, t);
    const AccuracySummary b = posterior_accuracy(dup, train, test_set, t);
    CHECK(a.consistent());
    CHECK(b.test_mean == doctest::Approx(a.test_mean));
    CHECK(b.test_std == doctest::Approx(a.test_std));
    CHECK(b.train_best == a.train_best);
  }
  SUBCASE("chain overload uses thinned exploit samples") {
    const PosteriorChain chain = toy_chain(t);
    const AccuracySummary a = posterior_accuracy(chain, train, test_set, t, 1);
    CHECK(a.samples == 4);
    CHECK(posterior_accuracy(chain, train, test_set, t, 2).samples == 2);
    CHECK(a.consistent());
  }
  SUBCASE("empty posterior is an error") {
    CHECK_THROWS_AS(posterior_accuracy(std::vector<ParamVector>{}, train, test_set, t), ContractViolation);
    PosteriorChain empty;
    CHECK_THROWS_AS(posterior_accuracy(empty, train, test_set, t), ContractViolation);
  }
  SUBCASE("predictive accuracy of one sample equals its own accuracy") {
    const std::vector<ParamVector> one{test::random_theta(t.parameter_count(), 6)};
    const PredictiveAccuracy p = posterior_predictive_accuracy(one, train, test_set, t);
    CHECK(p.train == doctest::Approx(predict_accuracy(one[0], train, t)));
    CHECK(p.test == doctest::Approx(predict_accuracy(one[0], test_set, t)));
  }
}

TEST_CASE("accuracy summary consistency check") {
  AccuracySummary a;
  a.train_mean = 80;
  a.train_best = 90;
  a.test_mean = 70;
  a.test_best = 75;
  CHECK(a.consistent());
  a.test_best = 65;
  CHECK_FALSE(a.consistent());
  a.test_best = 101;
  CHECK_FALSE(a.consistent());
}

TEST_CASE("surrogate report") {
  RunReport r;
  CHECK(surrogate_report(r, {}) == "surrogate = not applicable\n");

  r.surrogate_enabled = true;
  r.surrogate_prediction_rmse = 0.0;
  r.surrogate_raw_rmse = 0.0;
  r.surrogate_training = {{50, 100, 0.01, 0.7, 0.6}, {100, 60, 0.03, 0.7, 0.6}};
  const std::vector<SurrogateTraceRow> trace{{0, 60, -5.0, -5.0, -5.0}, {1, 61, -4.0, -4.0, -4.0}};
  const std::string text = surrogate_report(r, trace);
  CHECK(text.find("surrogate_raw_rmse = 0\n") != std::string::npos);
  // The prediction RMSE belongs to the run report; the two are written to one file.
  CHECK(text.find("surrogate_prediction_rmse") == std::string::npos);
  CHECK(text.find("surrogate_steps = 2\n") != std::string::npos);
  CHECK(text.find("surrogate_train_rmse_mean = 0.02") != std::string::npos);
  CHECK(text.find("surrogate_train_rmse_std = 0.01") != std::string::npos);

  const auto path = test::tmp_dir("surrogate_trace") / "trace.csv";
  write_surrogate_trace(trace, path);
  CHECK(line_count(path) == trace.size() + 1);
}

TEST_CASE("parameter names follow the vector layout") {
  const auto names = parameter_names(NetworkTopology{2, 2, 2});
  const std::vector<std::string> expected{"w_0_0", "w_0_1", "w_1_0", "w_1_1", "bh_0", "bh_1",
                                          "v_0_0", "v_0_1", "v_1_0", "v_1_1", "bo_0",  "bo_1"};
  CHECK(names == expected);
  CHECK(parameter_names(NetworkTopology{4, 12, 3}).size() == 99);
}

TEST_CASE("histogram") {
  std::vector<double> v(1000);
  std::iota(v.begin(), v.end(), 0.0);
  const Histogram h = make_histogram(v, 50);
  CHECK(h.counts.size() == 50);
  CHECK(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}) == 1000);
  CHECK(h.lower == 0.0);
  CHECK(h.upper == 999.0);
  CHECK(h.counts.back() >= 1);

  const std::vector<double> flat(7, 3.0);
  const Histogram f = make_histogram(flat, 5);
  CHECK(f.counts[0] == 7);
  CHECK_THROWS_AS(make_histogram(flat, 0), ContractViolation);
}

TEST_CASE("emit_posterior writes deterministic files") {
  const NetworkTopology t{2, 2, 2};
  const PosteriorChain chain = toy_chain(t);
  const auto a = test::tmp_dir("emit_a");
  const auto b = test::tmp_dir("emit_b");
  emit_posterior(chain, t, a);
  emit_posterior(chain, t, b);
  for (const auto& name : parameter_names(t)) {
    const auto file = "posterior_" + name + ".csv";
    CHECK(line_count(a / file) == 4 + 1);
    CHECK(slurp(a / file) == slurp(b / file));
  }
  CHECK(line_count(a / "trace_replica0.csv") == 4 + 1);
  CHECK(line_count(a / "trace_replica1.csv") == 4 + 1);
  CHECK(slurp(a / "histograms.csv") == slurp(b / "histograms.csv"));
  CHECK(line_count(a / "histograms.csv") == 12 * 50 + 1);

  // Histogram counts per parameter sum to the retained samples.
  std::istringstream hist(slurp(a / "histograms.csv"));
  std::string line;
  std::getline(hist, line);
  std::size_t total = 0;
  while (std::getline(hist, line)) total += std::stoul(line.substr(line.rfind(',') + 1));
  CHECK(total == 12 * 4);

  CHECK_THROWS_AS(emit_posterior(chain, t, "/proc/sapt-not-writable"), IoError);
}

TEST_CASE("manifest and run report") {
  SamplerConfig c;
  c.base_seed = 17;
  ManifestInfo info;
  info.dataset = "iris";
  info.command_line = "sapt --dataset iris";
  const std::string m = format_manifest(c, info);
  CHECK(m.find("seed = 17\n") != std::string::npos);
  CHECK(m.find("version = " + code_version() + "\n") != std::string::npos);
  CHECK(m.find("dataset = iris\n") != std::string::npos);

  RunReport r;
  r.true_evals = 10;
  r.acceptance_rates = {0.5, 0.25};
  AccuracySummary acc;
  acc.test_mean = 91.5;
  const std::string text = format_run_report(r, &acc, nullptr);
  CHECK(text.find("status = ok\n") != std::string::npos);
  CHECK(text.find("true_evals = 10\n") != std::string::npos);
  CHECK(text.find("acceptance_rate_replica1 = 0.25\n") != std::string::npos);
  CHECK(text.find("test_accuracy_mean = 91.5\n") != std::string::npos);
  r.aborted = true;
  r.error = "boom";
  CHECK(format_run_report(r, nullptr, nullptr).find("error = boom\n") != std::string::npos);
}
