#include "sncd/reference_oracle.hpp"

#include <algorithm>
#include <cmath>

namespace sncd::oracle {

namespace {

double huber(double t, double gamma) {
  const double a = std::abs(t);
  if (a <= gamma) return 0.5 * t * t / gamma;
  return a - 0.5 * gamma;
}

double huber_slope(double t, double gamma) {
  if (t > gamma) return 1.0;
  if (t < -gamma) return -1.0;
  return t / gamma;
}

double check_loss(double t, double tau) { return t * (tau - (t < 0.0 ? 1.0 : 0.0)); }

double elastic_net(const VectorXd& beta, const PenaltySpec& penalty) {
  return penalty.lambda *
         (penalty.alpha * beta.lpNorm<1>() + 0.5 * (1.0 - penalty.alpha) * beta.squaredNorm());
}

double mean_loss(const VectorXd& r, const LossSpec& loss) {
  const double n = static_cast<double>(r.size());
  double sum = 0.0;
  switch (loss.family) {
    case LossFamily::Huber:
      for (Eigen::Index i = 0; i < r.size(); ++i) sum += huber(r(i), loss.gamma);
      return sum / n;
    case LossFamily::QuantileHA:
      for (Eigen::Index i = 0; i < r.size(); ++i)
        sum += huber(r(i), loss.gamma) + (2.0 * loss.tau - 1.0) * r(i);
      return sum / (2.0 * n);
    case LossFamily::SquaredLS:
      return 0.5 * r.squaredNorm() / n;
  }
  return 0.0;
}

// d/dr of the mean loss, including its normalization.
VectorXd loss_gradient(const VectorXd& r, const LossSpec& loss) {
  const double n = static_cast<double>(r.size());
  VectorXd g(r.size());
  switch (loss.family) {
    case LossFamily::Huber:
      for (Eigen::Index i = 0; i < r.size(); ++i) g(i) = huber_slope(r(i), loss.gamma) / n;
      break;
    case LossFamily::QuantileHA:
      for (Eigen::Index i = 0; i < r.size(); ++i)
        g(i) = (huber_slope(r(i), loss.gamma) + 2.0 * loss.tau - 1.0) / (2.0 * n);
      break;
    case LossFamily::SquaredLS:
      for (Eigen::Index i = 0; i < r.size(); ++i) g(i) = r(i) / n;
      break;
  }
  return g;
}

double tracked_objective(const VectorXd& r, const VectorXd& beta, const Dataset&,
                         const LossSpec& loss, const PenaltySpec& penalty,
                         OracleOptions::Track track) {
  const double n = static_cast<double>(r.size());
  switch (track) {
    case OracleOptions::Track::Fitted: return mean_loss(r, loss) + elastic_net(beta, penalty);
    case OracleOptions::Track::ExactQuantile: {
      double sum = 0.0;
      for (Eigen::Index i = 0; i < r.size(); ++i) sum += check_loss(r(i), loss.tau);
      return sum / n + elastic_net(beta, penalty);
    }
    case OracleOptions::Track::ExactLad:
      return r.cwiseAbs().sum() / n + elastic_net(beta, penalty);
  }
  return 0.0;
}

// Largest curvature of the smooth part: scale * ||[1 X]||_2^2 + ridge, with
// the spectral norm estimated by power iteration.
double lipschitz_estimate(const Dataset& data, const LossSpec& loss, const PenaltySpec& penalty) {
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  VectorXd v = VectorXd::Ones(p + 1).normalized();
  double sigma_sq = 1.0;
  VectorXd u(n);
  for (int it = 0; it < 60; ++it) {
    u = data.x() * v.tail(p);
    u.array() += v(0);
    VectorXd w(p + 1);
    w(0) = u.sum();
    w.tail(p) = data.x().transpose() * u;
    sigma_sq = w.norm();
    if (sigma_sq <= 0.0) break;
    v = w / sigma_sq;
  }
  double curve;
  switch (loss.family) {
    case LossFamily::Huber: curve = 1.0 / (loss.gamma * static_cast<double>(n)); break;
    case LossFamily::QuantileHA: curve = 0.5 / (loss.gamma * static_cast<double>(n)); break;
    case LossFamily::SquaredLS:
    default: curve = 1.0 / static_cast<double>(n); break;
  }
  return curve * sigma_sq + penalty.lambda * (1.0 - penalty.alpha) + 1e-12;
}

double shrink(double z, double threshold) {
  if (z > threshold) return z - threshold;
  if (z < -threshold) return z + threshold;
  return 0.0;
}

}  // namespace

double oracle_objective(const SolverState& state, const Dataset& data, const LossSpec& loss,
                        const PenaltySpec& penalty) {
  VectorXd r = data.y();
  r.array() -= state.beta0;
  r.noalias() -= data.x() * state.beta;
  return mean_loss(r, loss) + elastic_net(state.beta, penalty);
}

double quantile_objective(const SolverState& state, const Dataset& data, double tau,
                          const PenaltySpec& penalty) {
  VectorXd r = data.y();
  r.array() -= state.beta0;
  r.noalias() -= data.x() * state.beta;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) sum += check_loss(r(i), tau);
  return sum / static_cast<double>(r.size()) + elastic_net(state.beta, penalty);
}

double lad_objective(const SolverState& state, const Dataset& data, const PenaltySpec& penalty) {
  VectorXd r = data.y();
  r.array() -= state.beta0;
  r.noalias() -= data.x() * state.beta;
  return r.cwiseAbs().sum() / static_cast<double>(r.size()) + elastic_net(state.beta, penalty);
}

SolverState oracle_solve(const Dataset& data, const LossSpec& loss, const PenaltySpec& penalty,
                         const OracleOptions& options) {
  const Eigen::Index p = data.p();

  double beta0 = 0.0;
  VectorXd beta = VectorXd::Zero(p);
  if (options.warm_start != nullptr) {
    beta0 = options.warm_start->beta0;
    beta = options.warm_start->beta;
  }

  const double lipschitz = lipschitz_estimate(data, loss, penalty);
  const double base_step = options.step_c > 0.0 ? options.step_c : 1.0 / lipschitz;
  const double l1 = penalty.lambda * penalty.alpha;
  const double ridge = penalty.lambda * (1.0 - penalty.alpha);

  auto residuals_at = [&](double b0, const VectorXd& b) {
    VectorXd r = data.y();
    r.array() -= b0;
    r.noalias() -= data.x() * b;
    return r;
  };

  VectorXd r = residuals_at(beta0, beta);
  double best_obj = tracked_objective(r, beta, data, loss, penalty, options.track);
  double best_beta0 = beta0;
  VectorXd best_beta = beta;

  if (options.schedule == OracleOptions::Schedule::SqrtDecay) {
    for (long t = 1; t <= options.iterations; ++t) {
      const double eta = base_step / std::sqrt(static_cast<double>(t));
      const VectorXd g = loss_gradient(r, loss);
      const double grad0 = -g.sum();
      VectorXd grad = -(data.x().transpose() * g) + ridge * beta;
      beta0 -= eta * grad0;
      for (Eigen::Index j = 0; j < p; ++j) beta(j) = shrink(beta(j) - eta * grad(j), eta * l1);
      r = residuals_at(beta0, beta);
      const double obj = tracked_objective(r, beta, data, loss, penalty, options.track);
      if (obj < best_obj) {
        best_obj = obj;
        best_beta0 = beta0;
        best_beta = beta;
      }
    }
  } else {
    // FISTA with function-value restarts; the momentum point carries the
    // gradient step, the plain iterate carries the objective bookkeeping.
    double y0 = beta0;
    VectorXd ybeta = beta;
    double t_momentum = 1.0;
    double prev_obj = best_obj;
    long stagnant = 0;
    for (long t = 1; t <= options.iterations; ++t) {
      const VectorXd ry = residuals_at(y0, ybeta);
      const VectorXd g = loss_gradient(ry, loss);
      const double grad0 = -g.sum();
      VectorXd grad = -(data.x().transpose() * g) + ridge * ybeta;

      const double next0 = y0 - base_step * grad0;
      VectorXd next(p);
      for (Eigen::Index j = 0; j < p; ++j)
        next(j) = shrink(ybeta(j) - base_step * grad(j), base_step * l1);

      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
      const double mix = (t_momentum - 1.0) / t_next;
      y0 = next0 + mix * (next0 - beta0);
      ybeta = next + mix * (next - beta);
      t_momentum = t_next;
      beta0 = next0;
      beta = next;

      r = residuals_at(beta0, beta);
      const double fitted = tracked_objective(r, beta, data, loss, penalty,
                                              OracleOptions::Track::Fitted);
      if (fitted > prev_obj) {  // restart momentum on any increase
        t_momentum = 1.0;
        y0 = beta0;
        ybeta = beta;
      }
      prev_obj = fitted;

      const double obj = options.track == OracleOptions::Track::Fitted
                             ? fitted
                             : tracked_objective(r, beta, data, loss, penalty, options.track);
      if (obj < best_obj - std::max(1e-16, 1e-14 * std::abs(best_obj))) {
        best_obj = obj;
        best_beta0 = beta0;
        best_beta = beta;
        stagnant = 0;
      } else {
        if (++stagnant >= 5000) break;
      }
    }
  }

  SolverState out;
  out.beta0 = best_beta0;
  out.beta = best_beta;
  out.residuals = residuals_at(best_beta0, best_beta);
  // Complete the subgradients from the gradient so KKT checks can run
  // against the returned state.
  const VectorXd g = loss_gradient(out.residuals, loss);
  const VectorXd grad = data.x().transpose() * g;  // = -c_j
  out.s.resize(p);
  const double l1_weight = penalty.lambda * penalty.alpha;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (out.beta(j) != 0.0)
      out.s(j) = out.beta(j) > 0.0 ? 1.0 : -1.0;
    else
      out.s(j) = l1_weight > 0.0 ? std::clamp(grad(j) / l1_weight, -1.0, 1.0) : 0.0;
  }
  return out;
}

}  // namespace sncd::oracle
