#pragma once

#include "sncd/data_model.hpp"
#include "sncd/sncd_core.hpp"

#include <span>
#include <vector>

namespace sncd {

/// Screening bookkeeping carried along the path.
struct ScreeningState {
  VectorXd c;                 // c_j(lambda) at the current solution
  double multiplier = 1.0;    // adaptive strong-rule multiplier M(lambda)
  WorkingSet eligible;
  long violations_total = 0;
};

/// Per-lambda gamma values actually used (QuantileHA paths).
struct GammaSchedule {
  std::vector<double> values;
};

GammaSchedule gamma_schedule(const SolutionPath& path);

/// Smallest lambda whose null solution satisfies KKT: fits the intercept-only
/// model, then max_j |c_j| / alpha.
double lambda_max(const Dataset& data, const LossSpec& loss, double alpha);

/// Geometric sequence from lambda_max down to lambda_max * ratio.
std::vector<double> lambda_grid(double lambda_max, int nlambda, double lambda_min_ratio);

/// Adaptive strong rule: E = {j : |c_j(prev)| >= alpha (next + M (next - prev))}.
/// M = 1 recovers the plain strong rule threshold alpha (2 next - prev).
WorkingSet eligible_set(const ScreeningState& screen, double lambda_prev, double lambda_next,
                        double alpha);

/// M = max_j |c_j(prev) - c_j(next)| / (alpha (prev - next)).
double update_multiplier(const VectorXd& c_prev, const VectorXd& c_next, double lambda_prev,
                         double lambda_next, double alpha);

/// Indices among `excluded` with |c_j| > alpha lambda + kkt_tol at the
/// current solution.
std::vector<int> check_violations(const SolverState& state, const Dataset& data,
                                  const LossSpec& loss, const PenaltySpec& penalty,
                                  std::span<const int> excluded, double kkt_tol);

/// gamma = rank-ceil(0.1 n) order statistic of |residuals|, capped by
/// prev_gamma, floored at 0.001.
double gamma_heuristic(double prev_gamma, const VectorXd& residuals);

/// Warm-started pathwise fit with adaptive strong-rule screening (per
/// config.screening) and the QuantileHA gamma heuristic. Solutions are
/// returned on the original data scale.
SolutionPath fit_path(const Dataset& data, LossSpec loss, double alpha, const FitConfig& config);

namespace detail {

/// Safeguarded Newton (update_intercept steps with a bisection bracket) for
/// the intercept-only model; beta must be zero on entry.
void fit_intercept_only(SolverState& state, const Dataset& data, const LossSpec& loss);

}  // namespace detail

}  // namespace sncd
