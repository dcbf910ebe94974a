#pragma once

#include "sncd/data_model.hpp"

namespace sncd::oracle {

// Slow, independent verification solver. This module deliberately avoids the
// solver and kernel headers: every formula here is a second implementation.

struct OracleOptions {
  long iterations = 200000;

  enum class Schedule { SqrtDecay, Accelerated };
  Schedule schedule = Schedule::Accelerated;

  // Sqrt-decay step constant c in eta_t = c / sqrt(t); 0 picks 1/L from a
  // power-iteration Lipschitz estimate (also the Accelerated step size).
  double step_c = 0.0;

  // Objective used to select the returned best iterate. ExactQuantile and
  // ExactLad track f_Q / f_A while descending on the smoothed loss.
  enum class Track { Fitted, ExactQuantile, ExactLad };
  Track track = Track::Fitted;

  const SolverState* warm_start = nullptr;  // default: null start
};

/// Proximal (sub)gradient descent on the exact objective; returns the
/// best-objective iterate with subgradients completed from the gradient.
SolverState oracle_solve(const Dataset& data, const LossSpec& loss, const PenaltySpec& penalty,
                         const OracleOptions& options = {});

/// Independent re-implementation of the penalized objective.
double oracle_objective(const SolverState& state, const Dataset& data, const LossSpec& loss,
                        const PenaltySpec& penalty);

/// f_Q: exact quantile objective (1/n) sum rho_tau(r_i) + penalty.
double quantile_objective(const SolverState& state, const Dataset& data, double tau,
                          const PenaltySpec& penalty);

/// f_A: least-absolute-deviations objective (1/n) sum |r_i| + penalty.
double lad_objective(const SolverState& state, const Dataset& data, const PenaltySpec& penalty);

}  // namespace sncd::oracle
