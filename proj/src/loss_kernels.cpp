#include "sncd/loss_kernels.hpp"

namespace sncd {

double penalty_value(const VectorXd& beta, const PenaltySpec& penalty) {
  const double l1 = beta.lpNorm<1>();
  const double l2sq = beta.squaredNorm();
  return penalty.lambda * (penalty.alpha * l1 + (1.0 - penalty.alpha) * 0.5 * l2sq);
}

ObjectiveValue objective(const SolverState& state, const Dataset& data, const LossSpec& loss,
                         const PenaltySpec& penalty) {
  if (state.beta.size() != data.p() || state.residuals.size() != data.n())
    throw dimension_mismatch_error("objective: state does not match dataset dimensions");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) sum += loss_value(state.residuals(i), loss);
  ObjectiveValue value;
  value.loss_part = sum / static_cast<double>(data.n());
  value.penalty_part = penalty_value(state.beta, penalty);
  value.total = value.loss_part + value.penalty_part;
  return value;
}

double relative_difference(double f_a, double f_b) {
  if (f_b == 0.0) throw division_by_zero_error("relative_difference: reference objective is zero");
  return (f_a - f_b) / f_b;
}

}  // namespace sncd
