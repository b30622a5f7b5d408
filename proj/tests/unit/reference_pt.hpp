#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "sapt/sampler.hpp"

namespace sapt::test {

// Plain parallel tempering written directly from the textbook recipe, sharing
// only the RNG engine and the model with the library.
inline std::vector<std::vector<ParamVector>> reference_pt(const SamplerConfig& c, const PosteriorModel& model) {
  const std::size_t M = c.replica_count;
  const std::size_t R = c.total_samples / M;
  const auto burn = static_cast<std::size_t>(std::floor(c.burn_in_fraction * static_cast<double>(R)));
  std::vector<Rng> rngs;
  std::vector<ParamVector> theta(M);
  std::vector<double> ll(M), lp(M), temp(M), ladder(M);
  for (std::size_t i = 0; i < M; ++i) {
    ladder[i] = std::pow(c.max_temp, static_cast<double>(i) / static_cast<double>(M - 1));
    rngs.emplace_back(c.base_seed + i);
    std::normal_distribution<double> init(0.0, c.init_sd);
    theta[i].resize(static_cast<Eigen::Index>(model.dimension()));
    for (Eigen::Index k = 0; k < theta[i].size(); ++k) theta[i](k) = init(rngs[i]);
    ll[i] = model.log_likelihood(theta[i]);
    lp[i] = model.log_prior(theta[i]);
  }
  ladder.front() = 1.0;
  ladder.back() = c.max_temp;
  temp = ladder;
  Rng swap_rng(c.base_seed + M);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<std::vector<ParamVector>> chains(M);
  std::size_t step = 0;
  while (step < R) {
    const std::size_t block = std::min(c.swap_interval, R - step);
    for (std::size_t i = 0; i < M; ++i) {
      for (std::size_t k = 0; k < block; ++k) {
        if (step + k >= burn) temp[i] = 1.0;
        std::normal_distribution<double> noise(0.0, c.proposal.rw_step_sd);
        ParamVector prop(theta[i].size());
        for (Eigen::Index d = 0; d < prop.size(); ++d) prop(d) = theta[i](d) + noise(rngs[i]);
        const double pll = model.log_likelihood(prop);
        const double plp = model.log_prior(prop);
        const double u = unif(rngs[i]);
        const double a = (pll - ll[i]) / temp[i] + (plp - lp[i]) + 0.0;
        const double alpha = a >= 0.0 ? 1.0 : std::exp(a);
        if (u <= alpha) {
          theta[i] = prop;
          ll[i] = pll;
          lp[i] = plp;
        }
        chains[i].push_back(theta[i]);
      }
    }
    step += block;
    if (step >= R) break;
    bool prev = false;
    for (std::size_t i = 0; i + 1 < M; ++i) {
      if (prev) {
        prev = false;
        continue;
      }
      const double e = (1.0 / temp[i + 1] - 1.0 / temp[i]) * (ll[i + 1] - ll[i]);
      const double beta = e >= 0.0 ? 1.0 : std::exp(e);
      prev = unif(swap_rng) <= beta;
      if (prev) {
        std::swap(theta[i], theta[i + 1]);
        std::swap(ll[i], ll[i + 1]);
        std::swap(lp[i], lp[i + 1]);
      }
    }
  }
  return chains;
}

}  // namespace sapt::test
