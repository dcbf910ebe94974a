#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sncd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base class for input-data validation failures (CLI maps these to exit 4).
class validation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class empty_data_error : public validation_error {
 public:
  empty_data_error() : validation_error("empty data: need at least one row and two columns") {}
};

class ragged_rows_error : public validation_error {
 public:
  explicit ragged_rows_error(std::size_t row)
      : validation_error("ragged rows: row " + std::to_string(row) +
                         " has a different number of fields"),
        row(row) {}
  std::size_t row;
};

class non_finite_entry_error : public validation_error {
 public:
  non_finite_entry_error(std::size_t row, std::size_t col)
      : validation_error("non-finite entry at row " + std::to_string(row) + ", column " +
                         std::to_string(col)),
        row(row),
        col(col) {}
  std::size_t row;
  std::size_t col;
};

class dimension_mismatch_error : public validation_error {
 public:
  using validation_error::validation_error;
};

class division_by_zero_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Loss / penalty configuration
// ---------------------------------------------------------------------------

enum class LossFamily { Huber, QuantileHA, SquaredLS };

/// Loss family plus its shape parameter. `gamma` is the Huber band half-width
/// (in response units). For QuantileHA the path driver manages gamma per
/// lambda; the value stored here is the one currently in effect.
struct LossSpec {
  LossFamily family = LossFamily::Huber;
  double gamma = 1.0;
  double tau = 0.5;

  static LossSpec huber(double gamma) { return LossSpec{LossFamily::Huber, gamma, 0.5}; }
  static LossSpec quantile(double tau, double gamma = 1.0) {
    return LossSpec{LossFamily::QuantileHA, gamma, tau};
  }
  static LossSpec least_squares() { return LossSpec{LossFamily::SquaredLS, 1.0, 0.5}; }

  void validate() const {
    if (family != LossFamily::SquaredLS && !(gamma > 0.0))
      throw std::invalid_argument("loss: gamma must be positive");
    if (family == LossFamily::QuantileHA && !(tau > 0.0 && tau < 1.0))
      throw std::invalid_argument("loss: tau must lie in (0, 1)");
  }
};

struct PenaltySpec {
  double lambda = 0.0;
  double alpha = 1.0;

  void validate() const {
    if (!(lambda >= 0.0)) throw std::invalid_argument("penalty: lambda must be nonnegative");
    // alpha == 0 (pure ridge) is rejected: the subgradient update divides by
    // lambda*alpha. Use a small alpha such as 1e-3 instead.
    if (!(alpha > 0.0 && alpha <= 1.0))
      throw std::invalid_argument("penalty: alpha must lie in (0, 1]");
  }
};

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

/// Immutable response vector + dense predictor matrix. Solvers only read it;
/// a const Dataset is safe to share across threads.
class Dataset {
 public:
  Dataset(VectorXd y, MatrixXd x, std::vector<std::string> column_names = {});

  Eigen::Index n() const { return y_.size(); }
  Eigen::Index p() const { return x_.cols(); }
  const VectorXd& y() const { return y_; }
  const MatrixXd& x() const { return x_; }
  const std::vector<std::string>& column_names() const { return column_names_; }

  /// Name of predictor j (falls back to "x<j+1>").
  std::string column_name(Eigen::Index j) const;

 private:
  VectorXd y_;
  MatrixXd x_;  // column-major, n x p
  std::vector<std::string> column_names_;
};

/// Builds a Dataset from a rectangular numeric table: first column is the
/// response, the rest are predictors. Throws empty_data_error,
/// ragged_rows_error or non_finite_entry_error.
Dataset validate_dataset(const std::vector<std::vector<double>>& rows,
                         std::vector<std::string> column_names = {});

// ---------------------------------------------------------------------------
// Solver state
// ---------------------------------------------------------------------------

/// Primal-dual iterate of SNCD/SNA: intercept, coefficients, subgradient
/// variables and residuals r_i = y_i - beta0 - x_i' beta. Owned exclusively
/// by one solver invocation.
struct SolverState {
  double beta0 = 0.0;
  VectorXd beta;
  VectorXd s;
  VectorXd residuals;

  static SolverState null_state(const Dataset& data);
};

/// Max absolute deviation between stored residuals and a full recomputation.
double residual_drift(const SolverState& state, const Dataset& data);

/// Tolerance for residual consistency: 1e-10 * (1 + max|y_i|).
double residual_tolerance(const Dataset& data);

/// Recomputes residuals from (beta0, beta) to clear incremental-update drift.
void refresh_residuals(SolverState& state, const Dataset& data);

// ---------------------------------------------------------------------------
// Fit configuration and path results
// ---------------------------------------------------------------------------

enum class Screening { Asr, Nvs, None };
enum class Preprocess { Standardize, Rescale, None };

struct FitConfig {
  int nlambda = 100;
  double lambda_min_ratio = 0.0;      // 0 = auto: 0.05 if p > n else 0.001
  std::vector<double> user_lambdas;   // nonempty: overrides the generated grid
  Screening screening = Screening::Asr;
  double tol = 1e-7;
  double kkt_tol = 1e-7;
  int max_sweeps = 10000;
  Preprocess preprocess = Preprocess::Standardize;
  std::uint64_t seed = 0;             // CV fold assignment
  int max_screen_rounds = 100;        // violation-loop cap before full-set fallback
  double fixed_multiplier = -1.0;     // >= 0 forces a fixed strong-rule multiplier
                                      // (test hook; not exposed on the CLI)

  void validate() const {
    if (user_lambdas.empty() && nlambda < 2)
      throw std::invalid_argument("config: nlambda must be at least 2");
    if (lambda_min_ratio < 0.0 || lambda_min_ratio >= 1.0)
      throw std::invalid_argument("config: lambda_min_ratio must lie in [0, 1)");
    if (!(tol > 0.0) || !(kkt_tol > 0.0))
      throw std::invalid_argument("config: tolerances must be positive");
    if (max_sweeps < 1) throw std::invalid_argument("config: max_sweeps must be positive");
    if (max_screen_rounds < 1)
      throw std::invalid_argument("config: max_screen_rounds must be positive");
  }
};

/// Per-lambda solver diagnostics recorded along a path.
struct PathDiagnostics {
  int sweeps = 0;             // SNCD sweeps, summed over screening rounds
  long updates = 0;           // coordinate updates, summed over screening rounds
  int screening_rounds = 0;   // eligible-set enlargements (0 = no violations)
  int violations = 0;         // KKT violations found among excluded predictors
  double gamma = 0.0;         // gamma in effect (QuantileHA; loss gamma otherwise)
  double kkt_residual = 0.0;  // final KKT residual over all predictors
  double objective = 0.0;     // objective of the fitted (preprocessed) problem
  bool converged = true;
};

/// Solutions along a decreasing lambda grid, on the original data scale.
struct SolutionPath {
  std::vector<double> lambdas;
  std::vector<SolverState> solutions;
  std::vector<PathDiagnostics> diagnostics;
  double lambda_max = 0.0;
  double alpha = 1.0;
  LossFamily family = LossFamily::Huber;
  double tau = 0.5;
  long violations_total = 0;
  bool all_converged = true;
};

}  // namespace sncd
