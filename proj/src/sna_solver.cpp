#include "sncd/sna_solver.hpp"

#include "sncd/loss_kernels.hpp"
#include "sncd/sncd_core.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace sncd {

SnaPartition partition(const SolverState& state) {
  SnaPartition parts;
  for (Eigen::Index j = 0; j < state.beta.size(); ++j) {
    if (std::abs(state.beta(j) + state.s(j)) > 1.0)
      parts.active.push_back(static_cast<int>(j));
    else
      parts.inactive.push_back(static_cast<int>(j));
  }
  return parts;
}

namespace {

void require_sna_problem(const LossSpec& loss, const PenaltySpec& penalty) {
  if (loss.family != LossFamily::Huber)
    throw std::invalid_argument("SNA supports the Huber loss only");
  loss.validate();
  if (!(penalty.lambda > 0.0)) throw std::invalid_argument("SNA: lambda must be positive");
  if (!(penalty.alpha > 0.0 && penalty.alpha < 1.0))
    throw std::invalid_argument("SNA: alpha must lie strictly in (0, 1)");
}

bool finite_state(const SolverState& state) {
  return std::isfinite(state.beta0) && state.beta.allFinite() && state.s.allFinite() &&
         state.residuals.allFinite();
}

}  // namespace

void sna_step(SolverState& state, const Dataset& data, const LossSpec& loss,
              const PenaltySpec& penalty, unsigned long long* ops) {
  require_sna_problem(loss, penalty);
  if (!finite_state(state)) throw sna_nonfinite_error();
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  const double lambda = penalty.lambda;
  const double alpha = penalty.alpha;
  unsigned long long work = 0;

  // d and Psi are evaluated at the incoming iterate, before step (i).
  refresh_residuals(state, data);
  VectorXd d(n);
  VectorXd psi(n);  // diagonal of Psi = (1/n) diag(psi_gamma(r_i))
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i) = huber_deriv(state.residuals(i), loss.gamma);
    psi(i) = huber_newton_weight(state.residuals(i), loss.gamma) * inv_n;
  }
  work += static_cast<unsigned long long>(n) * static_cast<unsigned long long>(p + 2);

  const SnaPartition parts = partition(state);
  const auto m = static_cast<Eigen::Index>(parts.active.size());

  // Inactive-block contribution X_B beta_B at the incoming iterate.
  VectorXd xb_beta = VectorXd::Zero(n);
  for (int j : parts.inactive) {
    const double b = state.beta(j);
    if (b != 0.0) {
      xb_beta.noalias() += b * data.x().col(j);
      work += static_cast<unsigned long long>(n);
    }
  }

  // Step (i): snap active subgradients, zero inactive coefficients.
  VectorXd s_active(m);
  VectorXd beta_active_old(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const int j = parts.active[static_cast<std::size_t>(a)];
    const double z = state.beta(j) + state.s(j);
    s_active(a) = z > 0.0 ? 1.0 : -1.0;
    state.s(j) = s_active(a);
    beta_active_old(a) = state.beta(j);
  }
  for (int j : parts.inactive) state.beta(j) = 0.0;

  // Step (ii): reduced symmetric system for (D0, D_A).
  MatrixXd xa(n, m);
  for (Eigen::Index a = 0; a < m; ++a) xa.col(a) = data.x().col(parts.active[static_cast<std::size_t>(a)]);
  const VectorXd psi_xa_t = xa.transpose() * psi;  // X_A' Psi 1
  MatrixXd system(m + 1, m + 1);
  system(0, 0) = psi.sum();
  if (m > 0) {
    system.block(1, 0, m, 1) = psi_xa_t;
    system.block(0, 1, 1, m) = psi_xa_t.transpose();
    MatrixXd weighted = psi.asDiagonal() * xa;
    system.block(1, 1, m, m) = xa.transpose() * weighted;
    system.block(1, 1, m, m).diagonal().array() += lambda * (1.0 - alpha);
  }
  work += static_cast<unsigned long long>(n) * static_cast<unsigned long long>(m) *
          static_cast<unsigned long long>(m + 1);

  VectorXd rhs(m + 1);
  rhs(0) = inv_n * d.sum() + psi.dot(xb_beta);
  for (Eigen::Index a = 0; a < m; ++a) {
    const auto col = xa.col(a);
    rhs(1 + a) = inv_n * d.dot(col) - lambda * (1.0 - alpha) * beta_active_old(a) -
                 lambda * alpha * s_active(a) + col.dot(psi.cwiseProduct(xb_beta));
  }
  work += 2ull * static_cast<unsigned long long>(n) * static_cast<unsigned long long>(m + 1);

  Eigen::LDLT<MatrixXd> factor(system);
  const VectorXd direction = factor.solve(rhs);
  work += static_cast<unsigned long long>(m + 1) * static_cast<unsigned long long>(m + 1) *
          static_cast<unsigned long long>(m + 1);
  if (!direction.allFinite()) throw sna_singular_error();
  const double solve_residual = (system * direction - rhs).cwiseAbs().maxCoeff();
  if (!(solve_residual <= 1e-8 * (1.0 + rhs.cwiseAbs().maxCoeff()))) throw sna_singular_error();

  // Step (iii): apply directions and refresh the inactive subgradients.
  const double d0 = direction(0);
  state.beta0 += d0;
  for (Eigen::Index a = 0; a < m; ++a)
    state.beta(parts.active[static_cast<std::size_t>(a)]) += direction(1 + a);

  VectorXd v = inv_n * d;
  v.noalias() += psi.cwiseProduct(xb_beta);
  v.noalias() -= d0 * psi;
  if (m > 0) v.noalias() += psi.cwiseProduct(xa * direction.tail(m));
  const double inv_l1 = 1.0 / (lambda * alpha);
  for (int j : parts.inactive) {
    state.s(j) = inv_l1 * data.x().col(j).dot(v);
    work += static_cast<unsigned long long>(n);
  }

  refresh_residuals(state, data);
  work += static_cast<unsigned long long>(n) * static_cast<unsigned long long>(p);
  if (ops != nullptr) *ops += work;
  if (!finite_state(state)) throw sna_nonfinite_error();
}

SnaReport sna_solve(SolverState& state, const Dataset& data, const LossSpec& loss,
                    const PenaltySpec& penalty, const SnaOptions& options) {
  require_sna_problem(loss, penalty);
  SnaReport report;
  const auto full = WorkingSet::full(data.p());

  refresh_residuals(state, data);
  const double kkt0 = kkt_residual(state, data, loss, penalty, full.indices);
  const double f0 = objective(state, data, loss, penalty).total;
  report.final_kkt_residual = kkt0;
  if (kkt0 <= options.kkt_tol) {
    report.status = SnaStatus::Converged;
    return report;
  }

  for (int it = 1; it <= options.max_iterations; ++it) {
    try {
      sna_step(state, data, loss, penalty, &report.ops);
    } catch (const sna_singular_error&) {
      report.status = SnaStatus::SingularSystem;
      return report;
    } catch (const sna_nonfinite_error&) {
      report.status = SnaStatus::Diverged;
      return report;
    }
    report.iterations = it;
    const double kkt = kkt_residual(state, data, loss, penalty, full.indices);
    const double f = objective(state, data, loss, penalty).total;
    report.final_kkt_residual = kkt;
    if (kkt <= options.kkt_tol) {
      report.status = SnaStatus::Converged;
      return report;
    }
    if (!std::isfinite(kkt) || kkt > options.residual_blowup * std::max(kkt0, options.kkt_tol) ||
        f > options.objective_blowup * std::max(f0, 1e-12)) {
      report.status = SnaStatus::Diverged;
      return report;
    }
  }
  report.status = SnaStatus::MaxIterations;
  return report;
}

}  // namespace sncd
