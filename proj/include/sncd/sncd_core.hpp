#pragma once

#include "sncd/data_model.hpp"

#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace sncd {

/// Outcome of one fixed-lambda SNCD solve.
struct SncdReport {
  int sweeps = 0;
  bool converged = false;
  double final_kkt_residual = std::numeric_limits<double>::infinity();
  int degenerate_intercept_events = 0;  // intercept Newton weight sum hit zero
  int zero_denominator_events = 0;      // case-(a) denominator hit zero (skipped)
  long updates = 0;                     // coordinate updates performed
};

/// Ordered subset of predictor indices the inner solver cycles over.
struct WorkingSet {
  std::vector<int> indices;  // ascending, unique, in [0, p)

  static WorkingSet full(Eigen::Index p);
  bool empty() const { return indices.empty(); }
  std::size_t size() const { return indices.size(); }
};

/// Semismooth Newton update of the intercept; residuals are updated
/// incrementally. Returns the new beta0. A zero Newton-weight sum is clamped
/// to 1/(n*gamma) and counted in the report.
double update_intercept(SolverState& state, const Dataset& data, const LossSpec& loss,
                        SncdReport* report = nullptr);

/// Simultaneous semismooth Newton update of (beta_j, s_j):
/// case (a) |beta_j + s_j| > 1 takes a Newton step on beta_j and snaps s_j to
/// the sign; case (b) zeroes beta_j and refreshes s_j from the gradient.
/// Residuals are updated incrementally. Returns the new pair.
std::pair<double, double> update_pair(int j, SolverState& state, const Dataset& data,
                                      const LossSpec& loss, const PenaltySpec& penalty,
                                      SncdReport* report = nullptr);

/// Cycles update_intercept + update_pair over the working set until the
/// coordinate-change criterion holds and the KKT residual over the working
/// set passes config.kkt_tol, or max_sweeps is reached. Residuals are fully
/// recomputed before the final KKT check. `col_scales`, when given, must hold
/// max(1, ||x_j||/sqrt(n)) for all p columns.
SncdReport solve_fixed_lambda(SolverState& state, const WorkingSet& working, const Dataset& data,
                              const LossSpec& loss, const PenaltySpec& penalty,
                              const FitConfig& config, const VectorXd* col_scales = nullptr);

/// Max-norm KKT residual over the intercept equation, the coordinate
/// equations for `indices`, and the soft-threshold fixed-point equations.
double kkt_residual(const SolverState& state, const Dataset& data, const LossSpec& loss,
                    const PenaltySpec& penalty, std::span<const int> indices);

/// c_j = -(1/n) sum_i score(r_i) x_ij for every predictor (the screening
/// quantity; QuantileHA uses the 1/(2n) scaling and shifted score).
VectorXd gradient_correlations(const SolverState& state, const Dataset& data,
                               const LossSpec& loss);

/// Per-column convergence scales max(1, ||x_j||_2 / sqrt(n)).
VectorXd column_update_scales(const Dataset& data);

}  // namespace sncd
