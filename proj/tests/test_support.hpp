#pragma once

#include "sncd/data_model.hpp"
#include "sncd/path_driver.hpp"
#include "sncd/preprocessing_cv.hpp"
#include "sncd/sncd_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace sncd::testing {

// Deterministic dense gaussian instance, standardized-ish columns.
inline Dataset random_instance(std::uint64_t seed, Eigen::Index n, Eigen::Index p,
                               double snr = 3.0) {
  SynthSpec spec;
  spec.n = n;
  spec.p = p;
  spec.seed = seed;
  spec.snr = snr;
  return synth_generate(spec).data;
}

inline SolverState random_state(std::uint64_t seed, const Dataset& data, double spread = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(-spread, spread);
  SolverState state = SolverState::null_state(data);
  state.beta0 = unif(gen);
  for (Eigen::Index j = 0; j < data.p(); ++j) {
    state.beta(j) = unif(gen);
    state.s(j) = unif(gen);
  }
  refresh_residuals(state, data);
  return state;
}

// Minimizer of the smoothed quantile objective at a fixed (gamma, lambda):
// a lambda walk at a comfortable gamma, then a gamma homotopy at the target
// lambda. Cold starts at small gamma sit outside the solver's stable regime.
inline SolverState solve_ha_fixed_gamma(const Dataset& data, double tau, double target_gamma,
                                        double target_lambda, double alpha) {
  const double start_gamma =
      std::max(gamma_heuristic(std::numeric_limits<double>::infinity(), data.y()),
               target_gamma);
  LossSpec loss = LossSpec::quantile(tau, start_gamma);
  SolverState state = SolverState::null_state(data);
  detail::fit_intercept_only(state, data, loss);
  const VectorXd c = gradient_correlations(state, data, loss);
  const double lmax = c.cwiseAbs().maxCoeff() / alpha;
  state.s = (-1.0 / (alpha * lmax)) * c;

  FitConfig config;
  const auto working = WorkingSet::full(data.p());
  if (target_lambda < lmax) {
    for (double lam : lambda_grid(lmax, 12, target_lambda / lmax))
      solve_fixed_lambda(state, working, data, loss, {lam, alpha}, config);
  } else {
    solve_fixed_lambda(state, working, data, loss, {target_lambda, alpha}, config);
  }
  while (loss.gamma > target_gamma) {
    loss.gamma = std::max(target_gamma, loss.gamma * 0.5);
    solve_fixed_lambda(state, working, data, loss, {target_lambda, alpha}, config);
  }
  return state;
}

}  // namespace sncd::testing
