#pragma once

#include "sncd/data_model.hpp"

#include <stdexcept>
#include <vector>

namespace sncd {

/// Active/inactive index split on |beta_j + s_j| vs 1 (ties inactive).
struct SnaPartition {
  std::vector<int> active;
  std::vector<int> inactive;
};

SnaPartition partition(const SolverState& state);

enum class SnaStatus { Converged, Diverged, SingularSystem, MaxIterations };

struct SnaReport {
  int iterations = 0;
  SnaStatus status = SnaStatus::MaxIterations;
  double final_kkt_residual = std::numeric_limits<double>::infinity();
  unsigned long long ops = 0;  // arithmetic-work counter (cost instrumentation)
};

struct SnaOptions {
  int max_iterations = 500;
  double kkt_tol = 1e-7;
  double residual_blowup = 1e6;   // Diverged when kkt > blowup * initial kkt
  double objective_blowup = 10.0; // Diverged when objective > blowup * initial
};

class sna_singular_error : public std::runtime_error {
 public:
  sna_singular_error() : std::runtime_error("SNA: singular Newton system") {}
};

class sna_nonfinite_error : public std::runtime_error {
 public:
  sna_nonfinite_error() : std::runtime_error("SNA: non-finite iterate") {}
};

/// One full-system semismooth Newton iteration for penalized Huber
/// regression: snaps s on the active set and zeroes beta on the inactive
/// set, solves the reduced (1+|A|) symmetric system for the intercept and
/// active coefficients, then updates the inactive subgradients in closed
/// form. Requires the Huber family, lambda > 0 and alpha in (0, 1).
void sna_step(SolverState& state, const Dataset& data, const LossSpec& loss,
              const PenaltySpec& penalty, unsigned long long* ops = nullptr);

/// Iterates sna_step until the full KKT residual passes kkt_tol, divergence
/// or singularity is detected, or the iteration cap is reached. Failures are
/// reported in the status, never thrown.
SnaReport sna_solve(SolverState& state, const Dataset& data, const LossSpec& loss,
                    const PenaltySpec& penalty, const SnaOptions& options = {});

}  // namespace sncd
