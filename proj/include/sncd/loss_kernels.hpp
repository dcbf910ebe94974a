#pragma once

#include "sncd/data_model.hpp"

#include <cmath>

namespace sncd {

// Scalar loss kernels. All are pure and total over finite inputs.

/// Huber loss: t^2/(2*gamma) inside the band |t| <= gamma, |t| - gamma/2 outside.
inline double huber_value(double t, double gamma) {
  const double a = std::abs(t);
  return a <= gamma ? t * t / (2.0 * gamma) : a - gamma / 2.0;
}

/// Derivative of the Huber loss: t/gamma inside the band, sign(t) outside.
inline double huber_deriv(double t, double gamma) {
  if (std::abs(t) <= gamma) return t / gamma;
  return t > 0.0 ? 1.0 : -1.0;
}

/// Newton derivative of huber_deriv: 1/gamma on the (closed) band, 0 outside.
inline double huber_newton_weight(double t, double gamma) {
  return std::abs(t) <= gamma ? 1.0 / gamma : 0.0;
}

/// Quantile (check) loss: t * (tau - I(t < 0)).
inline double quantile_value(double t, double tau) { return t * (tau - (t < 0.0 ? 1.0 : 0.0)); }

/// Huber approximation of the quantile loss: (h_gamma(t) + (2*tau - 1)*t) / 2.
/// Converges to quantile_value uniformly within gamma/4 as gamma -> 0.
inline double ha_value(double t, double tau, double gamma) {
  return 0.5 * (huber_value(t, gamma) + (2.0 * tau - 1.0) * t);
}

/// Soft-thresholding with threshold 1: sign(z) * (|z| - 1)_+.
inline double soft_threshold(double z) {
  if (z > 1.0) return z - 1.0;
  if (z < -1.0) return z + 1.0;
  return 0.0;
}

// Per-family pieces of the KKT system shared by the solvers. `loss_score` is
// the effective derivative (including the 2*tau - 1 shift for QuantileHA),
// `loss_newton_weight` its Newton derivative, and `loss_scale` the sum
// normalization: 1/n, except 1/(2n) for QuantileHA.

inline double loss_score(double t, const LossSpec& loss) {
  switch (loss.family) {
    case LossFamily::Huber: return huber_deriv(t, loss.gamma);
    case LossFamily::QuantileHA: return huber_deriv(t, loss.gamma) + 2.0 * loss.tau - 1.0;
    case LossFamily::SquaredLS: return t;
  }
  return 0.0;
}

inline double loss_newton_weight(double t, const LossSpec& loss) {
  switch (loss.family) {
    case LossFamily::Huber:
    case LossFamily::QuantileHA: return huber_newton_weight(t, loss.gamma);
    case LossFamily::SquaredLS: return 1.0;
  }
  return 0.0;
}

inline double loss_scale(Eigen::Index n, const LossSpec& loss) {
  return loss.family == LossFamily::QuantileHA ? 0.5 / static_cast<double>(n)
                                               : 1.0 / static_cast<double>(n);
}

/// Pointwise loss value matching the objective's (1/n)-scaled sum.
inline double loss_value(double t, const LossSpec& loss) {
  switch (loss.family) {
    case LossFamily::Huber: return huber_value(t, loss.gamma);
    case LossFamily::QuantileHA: return ha_value(t, loss.tau, loss.gamma);
    case LossFamily::SquaredLS: return 0.5 * t * t;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

/// Loss and penalty parts of the objective, kept separate for diagnostics.
struct ObjectiveValue {
  double loss_part = 0.0;
  double penalty_part = 0.0;
  double total = 0.0;
};

/// Full penalized objective (1/n) sum loss(r_i) + lambda * P_alpha(beta),
/// evaluated at the state's stored residuals.
ObjectiveValue objective(const SolverState& state, const Dataset& data, const LossSpec& loss,
                         const PenaltySpec& penalty);

/// Elastic-net penalty lambda * (alpha*||b||_1 + (1-alpha)*||b||_2^2 / 2).
double penalty_value(const VectorXd& beta, const PenaltySpec& penalty);

/// Relative difference (f_a - f_b) / f_b. Throws division_by_zero_error on f_b == 0.
double relative_difference(double f_a, double f_b);

}  // namespace sncd
