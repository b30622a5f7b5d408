#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "sapt/error.hpp"
#include "sapt/log.hpp"
#include "sapt/surrogate.hpp"
#include "test_util.hpp"

using namespace sapt;

namespace {

SurrogateBatch quadratic_batch(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  SurrogateBatch b;
  for (std::size_t r = 0; r < rows; ++r) {
    const ParamVector t = test::random_theta(dim, seed * 1000 + r);
    b.append(t, -t.squaredNorm(), r % 3, LikelihoodSource::true_model);
  }
  return b;
}

}  // namespace

TEST_CASE("batch admits only true-likelihood rows") {
  SurrogateBatch b;
  b.append(ParamVector::Zero(3), -1.0, 0, LikelihoodSource::true_model);
  CHECK_THROWS_AS(b.append(ParamVector::Zero(3), -1.0, 0, LikelihoodSource::surrogate), ContractViolation);
  CHECK_THROWS_AS(b.append(ParamVector::Zero(3), std::numeric_limits<double>::quiet_NaN(), 0,
                           LikelihoodSource::true_model),
                  ContractViolation);
  CHECK_THROWS_AS(b.append(ParamVector::Zero(4), -1.0, 0, LikelihoodSource::true_model), ContractViolation);
  CHECK(b.rows() == 1);

  SurrogateBatch other;
  other.append(ParamVector::Ones(3), -2.0, 2, LikelihoodSource::true_model);
  b.append(other);
  CHECK(b.rows() == 2);
  CHECK(b.replica_origin() == std::vector<std::size_t>{0, 2});
  CHECK(b.input_matrix().row(1) == Eigen::RowVectorXd::Ones(3));
  b.clear();
  CHECK(b.empty());
  CHECK(std::string(to_string(LikelihoodSource::surrogate)) == "surrogate");
}

TEST_CASE("target scaler") {
  TargetScaler s;
  CHECK(s.degenerate());
  CHECK(s.scale(-5.0) == 0.5);
  s.observe(-10.0);
  CHECK(s.degenerate());
  CHECK(s.inverse(0.3) == -10.0);
  s.observe(-30.0);
  CHECK_FALSE(s.degenerate());
  CHECK(s.scale(-30.0) == 0.0);
  CHECK(s.scale(-10.0) == 1.0);
  CHECK(s.scale(-20.0) == doctest::Approx(0.5));

  SUBCASE("append-only range") {
    s.observe(-15.0);
    CHECK(s.min() == -30.0);
    CHECK(s.max() == -10.0);
    s.observe(-5.0);
    CHECK(s.max() == -5.0);
  }
  SUBCASE("round trip within the observed range") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-30.0, -10.0);
    for (int i = 0; i < 1000; ++i) {
      const double x = u(rng);
      CHECK(std::abs(s.inverse(s.scale(x)) - x) < 1e-9);
    }
  }
  CHECK_THROWS_AS(TargetScaler::from_range(1.0, 0.0), ContractViolation);
}

TEST_CASE("zero weights predict the midpoint of the scaled range") {
  Rng rng(1);
  SurrogateModel m(SurrogateTopology{5, 8, 4}, rng);
  CHECK(m.topology().parameter_count() == 8 * 5 + 8 + 4 * 8 + 4 + 4 + 1);
  m.set_parameters(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.topology().parameter_count())));
  m.set_scaler(TargetScaler::from_range(-100.0, 0.0));
  CHECK_THROWS_AS(m.predict(ParamVector::Zero(5)), ContractViolation);
  m.mark_trained();
  CHECK(m.predict_scaled(Eigen::MatrixXd::Random(3, 5)).isApprox(Eigen::VectorXd::Constant(3, 0.5)));
  CHECK(m.predict(ParamVector::Ones(5)) == doctest::Approx(-50.0));
  CHECK_THROWS_AS(m.predict_scaled(Eigen::MatrixXd::Zero(1, 4)), ContractViolation);
  CHECK_THROWS_AS(m.set_parameters(Eigen::VectorXd::Zero(3)), ContractViolation);
}

TEST_CASE("training reduces the loss and reports a consistent RMSE") {
  Rng init(2), shuffle(3);
  SurrogateModel m(SurrogateTopology{6, 32, 8}, init);
  const SurrogateBatch b = quadratic_batch(256, 6, 1);
  TrainOptions opt;
  opt.epochs = 50;
  const TrainResult r = m.train(b, opt, shuffle);
  CHECK(m.trained());
  CHECK(r.rows == 256);
  CHECK(r.loss_after < r.loss_before);
  CHECK(r.loss_after == doctest::Approx(m.loss(b)));

  // Independent recount of the scaled RMSE.
  const Eigen::VectorXd fitted = m.predict_scaled(b.input_matrix());
  double sq = 0.0;
  for (std::size_t i = 0; i < b.rows(); ++i) {
    const double d = fitted(static_cast<Eigen::Index>(i)) - m.scaler().scale(b.targets()[i]);
    sq += d * d;
  }
  CHECK(r.rmse_scaled == doctest::Approx(std::sqrt(sq / 256.0)).epsilon(1e-12));
}

TEST_CASE("incremental training keeps Adam state") {
  Rng init(4), shuffle(5);
  SurrogateModel m(SurrogateTopology{4, 16, 4}, init);
  TrainOptions opt;
  opt.epochs = 3;
  opt.batch_size = 32;
  m.train(quadratic_batch(100, 4, 1), opt, shuffle);
  // ceil(100/32) = 4 minibatches per epoch.
  CHECK(m.adam_steps() == 12);
  const Eigen::VectorXd m1 = m.adam_first_moment();
  CHECK(m1.norm() > 0.0);
  m.train(quadratic_batch(64, 4, 2), opt, shuffle);
  CHECK(m.adam_steps() == 18);
  CHECK(m.adam_first_moment() != m1);
  CHECK(m.adam_second_moment().minCoeff() >= 0.0);
}

TEST_CASE("training is reproducible from seeds") {
  const SurrogateBatch b = quadratic_batch(80, 5, 7);
  auto fit = [&] {
    Rng init(9), shuffle(10);
    SurrogateModel m(SurrogateTopology{5, 16, 4}, init);
    m.train(b, TrainOptions{}, shuffle);
    return m.parameters();
  };
  CHECK(fit() == fit());
}

TEST_CASE("constant targets predict the constant") {
  set_warnings_enabled(false);
  Rng init(6), shuffle(7);
  SurrogateModel m(SurrogateTopology{3, 8, 4}, init);
  SurrogateBatch b;
  for (int i = 0; i < 40; ++i) b.append(test::random_theta(3, static_cast<std::uint64_t>(i)), -42.0, 0, LikelihoodSource::true_model);
  const TrainResult r = m.train(b, TrainOptions{}, shuffle);
  set_warnings_enabled(true);
  CHECK(m.scaler().degenerate());
  CHECK(std::isfinite(r.loss_after));
  CHECK(m.predict(ParamVector::Zero(3)) == -42.0);
}

TEST_CASE("empty batch cannot be trained on") {
  Rng init(1), shuffle(1);
  SurrogateModel m(SurrogateTopology{3, 4, 2}, init);
  CHECK_THROWS_AS(m.train(SurrogateBatch{}, TrainOptions{}, shuffle), ContractViolation);
  CHECK_THROWS_AS(SurrogateModel(SurrogateTopology{0, 4, 2}, init), ConfigError);
}

TEST_CASE("checkpoint round trip") {
  Rng init(11), shuffle(12);
  SurrogateModel m(SurrogateTopology{4, 8, 3}, init);
  m.train(quadratic_batch(50, 4, 3), TrainOptions{}, shuffle);
  const auto path = test::tmp_dir("checkpoint") / "surrogate.txt";
  m.save(path);
  {
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    CHECK(first == "SAPT-SURR-1");
  }
  const SurrogateModel back = SurrogateModel::load(path);
  CHECK(back.topology() == m.topology());
  CHECK(back.parameters() == m.parameters());
  CHECK(back.trained());
  CHECK(back.scaler().min() == m.scaler().min());
  CHECK(back.scaler().max() == m.scaler().max());
  const ParamVector probe = test::random_theta(4, 99);
  CHECK(back.predict(probe) == m.predict(probe));

  SUBCASE("bad header") {
    const auto bad = test::tmp_dir("checkpoint_bad") / "x.txt";
    std::ofstream(bad) << "SAPT-SURR-0\n";
    CHECK_THROWS_AS(SurrogateModel::load(bad), ParseError);
  }
  SUBCASE("truncated") {
    const auto bad = test::tmp_dir("checkpoint_trunc") / "x.txt";
    std::ofstream(bad) << "SAPT-SURR-1\ninputs 4\nhidden1 8\nhidden2 3\ntrained 1\nscaler 1 0x0p+0 0x1p+0\n"
                          "parameters 59\n0x1p+0\n";
    CHECK_THROWS_AS(SurrogateModel::load(bad), ParseError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(SurrogateModel::load("/nonexistent/ckpt"), IoError); }
}

TEST_CASE("pseudo-likelihood blend") {
  PseudoLikelihoodBlend h;
  CHECK_THROWS_AS(h.mean(), ContractViolation);
  h.push(-10.0);
  CHECK(h.size() == 1);
  CHECK(blend(-20.0, h) == doctest::Approx(-15.0));
  h.push(-20.0);
  CHECK(h.mean() == doctest::Approx(-15.0));
  h.push(-30.0);
  h.push(-40.0);
  CHECK(h.size() == 3);
  // Only the three most recent values count.
  CHECK(h.mean() == doctest::Approx(-30.0));
  CHECK(blend(-50.0, h) == doctest::Approx(-40.0));
  for (int i = 0; i < 10; ++i) h.push(-1.0);
  CHECK(h.mean() == -1.0);
}

TEST_CASE("surrogate RMSE") {
  const std::vector<double> zero{0.0, 0.0}, pair{3.0, 4.0};
  CHECK(surrogate_rmse(zero, pair) == doctest::Approx(3.53553390593274).epsilon(1e-13));
  CHECK(surrogate_rmse(pair, pair) == 0.0);
  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(surrogate_rmse(zero, one), ContractViolation);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> a(7), b(7);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng);
    CHECK(surrogate_rmse(a, b) > 0.0);
    CHECK(surrogate_rmse(a, b) == doctest::Approx(surrogate_rmse(b, a)));
  }
}
