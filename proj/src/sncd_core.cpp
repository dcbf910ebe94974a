#include "sncd/sncd_core.hpp"

#include "sncd/loss_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sncd {

namespace {

// Sums of score(r_i) x_ij and psi(r_i) x_ij^2 for one column; the family
// switch is hoisted out of the loop.
struct ColumnSums {
  double score_x = 0.0;
  double weight_xx = 0.0;
};

ColumnSums column_sums(const double* r, const double* x, Eigen::Index n, const LossSpec& loss) {
  ColumnSums out;
  switch (loss.family) {
    case LossFamily::Huber: {
      const double gamma = loss.gamma;
      const double inv = 1.0 / gamma;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double t = r[i];
        const double xi = x[i];
        if (std::abs(t) <= gamma) {
          out.score_x += t * inv * xi;
          out.weight_xx += inv * xi * xi;
        } else {
          out.score_x += (t > 0.0 ? xi : -xi);
        }
      }
      break;
    }
    case LossFamily::QuantileHA: {
      const double gamma = loss.gamma;
      const double inv = 1.0 / gamma;
      const double shift = 2.0 * loss.tau - 1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double t = r[i];
        const double xi = x[i];
        double score = shift;
        if (std::abs(t) <= gamma) {
          score += t * inv;
          out.weight_xx += inv * xi * xi;
        } else {
          score += (t > 0.0 ? 1.0 : -1.0);
        }
        out.score_x += score * xi;
      }
      break;
    }
    case LossFamily::SquaredLS: {
      for (Eigen::Index i = 0; i < n; ++i) {
        out.score_x += r[i] * x[i];
        out.weight_xx += x[i] * x[i];
      }
      break;
    }
  }
  return out;
}

// score(r_i) for all i, used by KKT checks and screening.
VectorXd score_vector(const VectorXd& residuals, const LossSpec& loss) {
  VectorXd scores(residuals.size());
  for (Eigen::Index i = 0; i < residuals.size(); ++i)
    scores(i) = loss_score(residuals(i), loss);
  return scores;
}

}  // namespace

WorkingSet WorkingSet::full(Eigen::Index p) {
  WorkingSet set;
  set.indices.resize(static_cast<std::size_t>(p));
  std::iota(set.indices.begin(), set.indices.end(), 0);
  return set;
}

double update_intercept(SolverState& state, const Dataset& data, const LossSpec& loss,
                        SncdReport* report) {
  const Eigen::Index n = data.n();
  double num = 0.0;
  double den = 0.0;
  const double* r = state.residuals.data();
  switch (loss.family) {
    case LossFamily::Huber:
    case LossFamily::QuantileHA: {
      const double gamma = loss.gamma;
      const double inv = 1.0 / gamma;
      const double shift = loss.family == LossFamily::QuantileHA ? 2.0 * loss.tau - 1.0 : 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double t = r[i];
        if (std::abs(t) <= gamma) {
          num += t * inv + shift;
          den += inv;
        } else {
          num += (t > 0.0 ? 1.0 : -1.0) + shift;
        }
      }
      if (den <= 0.0) {
        // All residuals outside the band: clamp to the weight of a single
        // in-band observation so the step stays finite.
        den = 1.0 / (static_cast<double>(n) * gamma);
        if (report != nullptr) ++report->degenerate_intercept_events;
      }
      break;
    }
    case LossFamily::SquaredLS: {
      for (Eigen::Index i = 0; i < n; ++i) num += r[i];
      den = static_cast<double>(n);
      break;
    }
  }
  const double step = num / den;
  state.beta0 += step;
  state.residuals.array() -= step;
  return state.beta0;
}

std::pair<double, double> update_pair(int j, SolverState& state, const Dataset& data,
                                      const LossSpec& loss, const PenaltySpec& penalty,
                                      SncdReport* report) {
  const Eigen::Index n = data.n();
  const double a = loss_scale(n, loss);
  const auto col = data.x().col(j);
  const ColumnSums sums = column_sums(state.residuals.data(), col.data(), n, loss);

  const double lam = penalty.lambda;
  const double alpha = penalty.alpha;
  const double grad_term = a * sums.score_x;
  const double weight_term = a * sums.weight_xx;

  const double beta_old = state.beta(j);
  const double z = beta_old + state.s(j);

  double beta_new;
  double s_new;
  if (std::abs(z) > 1.0) {
    const double sgn = z > 0.0 ? 1.0 : -1.0;
    const double den = weight_term + lam * (1.0 - alpha);
    if (den <= 0.0) {
      // Zero curvature: alpha == 1 with every residual outside the band on
      // this column's support. The coordinate objective is linear until a
      // residual reaches the band (scores are constant between crossings), so
      // a Newton step is undefined; walk to the first band crossing in the
      // descent direction instead. Skipping outright would pin beta_j at its
      // current value forever.
      if (report != nullptr) ++report->zero_denominator_events;
      const double slope = grad_term - lam * alpha * sgn;
      if (slope == 0.0) return {beta_old, state.s(j)};
      const double dir = slope > 0.0 ? 1.0 : -1.0;
      const double gamma = loss.gamma;
      double step = std::numeric_limits<double>::infinity();
      const double* r = state.residuals.data();
      const double* x = col.data();
      for (Eigen::Index i = 0; i < n; ++i) {
        const double xi = x[i] * dir;
        if (xi == 0.0) continue;
        for (const double root : {(r[i] - gamma) / xi, (r[i] + gamma) / xi})
          if (root > 0.0 && root < step) step = root;
      }
      if (beta_old != 0.0 && dir * beta_old < 0.0) step = std::min(step, std::abs(beta_old));
      if (!std::isfinite(step)) return {beta_old, state.s(j)};
      beta_new = beta_old + dir * step;
      s_new = sgn;
    } else {
      beta_new =
          beta_old + (grad_term - lam * alpha * sgn - lam * (1.0 - alpha) * beta_old) / den;
      s_new = sgn;
    }
  } else {
    beta_new = 0.0;
    s_new = (grad_term + beta_old * weight_term) / (lam * alpha);
  }

  const double delta = beta_new - beta_old;
  if (delta != 0.0) state.residuals.noalias() -= delta * col;
  state.beta(j) = beta_new;
  state.s(j) = s_new;
  return {beta_new, s_new};
}

double kkt_residual(const SolverState& state, const Dataset& data, const LossSpec& loss,
                    const PenaltySpec& penalty, std::span<const int> indices) {
  const double a = loss_scale(data.n(), loss);
  const VectorXd scores = score_vector(state.residuals, loss);
  double resid = std::abs(a * scores.sum());
  for (int j : indices) {
    const double t = a * scores.dot(data.x().col(j));
    const double coord = -t + penalty.lambda * penalty.alpha * state.s(j) +
                         penalty.lambda * (1.0 - penalty.alpha) * state.beta(j);
    resid = std::max(resid, std::abs(coord));
    resid = std::max(resid, std::abs(state.beta(j) - soft_threshold(state.beta(j) + state.s(j))));
  }
  return resid;
}

VectorXd gradient_correlations(const SolverState& state, const Dataset& data,
                               const LossSpec& loss) {
  const double a = loss_scale(data.n(), loss);
  const VectorXd scores = score_vector(state.residuals, loss);
  return (-a) * (data.x().transpose() * scores);
}

VectorXd column_update_scales(const Dataset& data) {
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(data.n()));
  VectorXd scales(data.p());
  for (Eigen::Index j = 0; j < data.p(); ++j)
    scales(j) = std::max(1.0, data.x().col(j).norm() * inv_sqrt_n);
  return scales;
}

SncdReport solve_fixed_lambda(SolverState& state, const WorkingSet& working, const Dataset& data,
                              const LossSpec& loss, const PenaltySpec& penalty,
                              const FitConfig& config, const VectorXd* col_scales) {
  loss.validate();
  penalty.validate();
  if (!(penalty.lambda > 0.0))
    throw std::invalid_argument("solve_fixed_lambda: lambda must be positive");

  VectorXd local_scales;
  if (col_scales == nullptr) {
    local_scales = column_update_scales(data);
    col_scales = &local_scales;
  }

  SncdReport report;

  // Semismooth Newton steps carry no line search; near-nonsmooth regimes
  // (tiny gamma) can settle into limit cycles. Probe periodically, keep the
  // best-objective iterate, and give up once neither the KKT residual nor the
  // objective improves. A failed solve then returns its best iterate, which is
  // never worse than the warm start it received.
  constexpr int probe_interval = 100;
  SolverState best_state = state;
  double best_objective = objective(state, data, loss, penalty).total;
  double best_kkt = std::numeric_limits<double>::infinity();
  double last_probe_objective = best_objective;
  int stalls = 0;
  double tol = config.tol;
  bool certified = false;

  auto probe = [&]() {
    refresh_residuals(state, data);
    report.final_kkt_residual = kkt_residual(state, data, loss, penalty, working.indices);
    const double f = objective(state, data, loss, penalty).total;
    if (f < best_objective) {
      best_objective = f;
      best_state = state;
    }
    if (report.final_kkt_residual <= config.kkt_tol) return true;
    const bool kkt_progress = report.final_kkt_residual <= 0.9 * best_kkt;
    const bool objective_progress =
        best_objective <= last_probe_objective - 1e-12 * (1.0 + std::abs(last_probe_objective));
    stalls = (kkt_progress || objective_progress) ? 0 : stalls + 1;
    best_kkt = std::min(best_kkt, report.final_kkt_residual);
    last_probe_objective = best_objective;
    return false;
  };

  while (report.sweeps < config.max_sweeps) {
    const double beta0_old = state.beta0;
    update_intercept(state, data, loss, &report);
    double max_delta = 0.0;
    for (int j : working.indices) {
      const double old = state.beta(j);
      update_pair(j, state, data, loss, penalty, &report);
      max_delta = std::max(max_delta, std::abs(state.beta(j) - old) * (*col_scales)(j));
    }
    ++report.sweeps;
    report.updates += static_cast<long>(working.size()) + 1;

    const bool settled = max_delta <= tol && std::abs(state.beta0 - beta0_old) <= tol;
    if (settled || report.sweeps % probe_interval == 0) {
      if (probe()) {
        certified = true;
        break;
      }
      if (stalls >= 2) break;
      if (settled) tol *= 0.25;  // settled coordinates without a certificate
    }
  }

  if (!certified) {
    refresh_residuals(state, data);
    report.final_kkt_residual = kkt_residual(state, data, loss, penalty, working.indices);
    const double exit_objective = objective(state, data, loss, penalty).total;
    if (report.final_kkt_residual > config.kkt_tol && exit_objective > best_objective) {
      state = best_state;
      report.final_kkt_residual = kkt_residual(state, data, loss, penalty, working.indices);
    }
  }
  report.converged = report.final_kkt_residual <= config.kkt_tol;
  return report;
}

}  // namespace sncd
