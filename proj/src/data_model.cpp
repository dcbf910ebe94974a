#include "sncd/data_model.hpp"

#include <cmath>

namespace sncd {

Dataset::Dataset(VectorXd y, MatrixXd x, std::vector<std::string> column_names)
    : y_(std::move(y)), x_(std::move(x)), column_names_(std::move(column_names)) {
  if (y_.size() < 1 || x_.cols() < 1) throw empty_data_error();
  if (x_.rows() != y_.size())
    throw dimension_mismatch_error("Dataset: X row count must match y length");
  if (!column_names_.empty() && static_cast<Eigen::Index>(column_names_.size()) != x_.cols())
    throw dimension_mismatch_error("Dataset: column_names length must match p");
  for (Eigen::Index i = 0; i < y_.size(); ++i)
    if (!std::isfinite(y_(i))) throw non_finite_entry_error(static_cast<std::size_t>(i), 0);
  for (Eigen::Index j = 0; j < x_.cols(); ++j)
    for (Eigen::Index i = 0; i < x_.rows(); ++i)
      if (!std::isfinite(x_(i, j)))
        throw non_finite_entry_error(static_cast<std::size_t>(i), static_cast<std::size_t>(j + 1));
}

std::string Dataset::column_name(Eigen::Index j) const {
  if (j >= 0 && static_cast<std::size_t>(j) < column_names_.size()) return column_names_[j];
  return "x" + std::to_string(j + 1);
}

Dataset validate_dataset(const std::vector<std::vector<double>>& rows,
                         std::vector<std::string> column_names) {
  if (rows.empty() || rows.front().size() < 2) throw empty_data_error();
  const std::size_t ncol = rows.front().size();
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].size() != ncol) throw ragged_rows_error(i);

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(ncol - 1);
  VectorXd y(n);
  MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    for (std::size_t c = 0; c < ncol; ++c)
      if (!std::isfinite(row[c])) throw non_finite_entry_error(static_cast<std::size_t>(i), c);
    y(i) = row[0];
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = row[static_cast<std::size_t>(j) + 1];
  }
  return Dataset(std::move(y), std::move(x), std::move(column_names));
}

SolverState SolverState::null_state(const Dataset& data) {
  SolverState state;
  state.beta0 = 0.0;
  state.beta = VectorXd::Zero(data.p());
  state.s = VectorXd::Zero(data.p());
  state.residuals = data.y();
  return state;
}

double residual_drift(const SolverState& state, const Dataset& data) {
  VectorXd exact = data.y();
  exact.array() -= state.beta0;
  exact.noalias() -= data.x() * state.beta;
  return (exact - state.residuals).cwiseAbs().maxCoeff();
}

double residual_tolerance(const Dataset& data) {
  return 1e-10 * (1.0 + data.y().cwiseAbs().maxCoeff());
}

void refresh_residuals(SolverState& state, const Dataset& data) {
  state.residuals = data.y();
  state.residuals.array() -= state.beta0;
  state.residuals.noalias() -= data.x() * state.beta;
}

}  // namespace sncd
