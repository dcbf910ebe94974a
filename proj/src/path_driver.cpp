#include "sncd/path_driver.hpp"

#include "sncd/loss_kernels.hpp"
#include "sncd/preprocessing_cv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sncd {

namespace detail {

void fit_intercept_only(SolverState& state, const Dataset& data, const LossSpec& loss) {
  const VectorXd& y = data.y();
  const Eigen::Index n = data.n();
  if (loss.family == LossFamily::SquaredLS) {
    state.beta0 = y.mean();
    refresh_residuals(state, data);
    return;
  }

  const double gamma = loss.gamma;
  const double shift = loss.family == LossFamily::QuantileHA ? 2.0 * loss.tau - 1.0 : 0.0;
  // F(b) = sum score(y_i - b) is continuous and nonincreasing in b, with a
  // sign change inside [min y - gamma, max y + gamma]. Newton steps (the
  // update_intercept formula) with a bisection bracket fallback.
  double lo = y.minCoeff() - gamma - 1.0;
  double hi = y.maxCoeff() + gamma + 1.0;
  double b = std::clamp(state.beta0, lo, hi);
  for (int it = 0; it < 300; ++it) {
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = y(i) - b;
      if (std::abs(t) <= gamma) {
        num += t / gamma + shift;
        den += 1.0 / gamma;
      } else {
        num += (t > 0.0 ? 1.0 : -1.0) + shift;
      }
    }
    if (num > 0.0)
      lo = b;
    else if (num < 0.0)
      hi = b;
    else
      break;
    if (den <= 0.0) den = 1.0 / (static_cast<double>(n) * gamma);
    double candidate = b + num / den;
    if (!(candidate > lo && candidate < hi)) candidate = 0.5 * (lo + hi);
    if (std::abs(candidate - b) <= 1e-15 * (1.0 + std::abs(candidate))) {
      b = candidate;
      break;
    }
    b = candidate;
  }
  state.beta0 = b;
  refresh_residuals(state, data);
}

}  // namespace detail

GammaSchedule gamma_schedule(const SolutionPath& path) {
  GammaSchedule schedule;
  schedule.values.reserve(path.diagnostics.size());
  for (const auto& diag : path.diagnostics) schedule.values.push_back(diag.gamma);
  return schedule;
}

double lambda_max(const Dataset& data, const LossSpec& loss, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("lambda_max: alpha must be positive");
  loss.validate();
  SolverState state = SolverState::null_state(data);
  detail::fit_intercept_only(state, data, loss);
  return gradient_correlations(state, data, loss).cwiseAbs().maxCoeff() / alpha;
}

std::vector<double> lambda_grid(double lambda_max, int nlambda, double lambda_min_ratio) {
  if (nlambda < 2) throw std::invalid_argument("lambda_grid: nlambda must be at least 2");
  if (!(lambda_max > 0.0)) throw std::invalid_argument("lambda_grid: lambda_max must be positive");
  if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0))
    throw std::invalid_argument("lambda_grid: lambda_min_ratio must lie in (0, 1)");
  std::vector<double> grid(static_cast<std::size_t>(nlambda));
  const double log_step = std::log(lambda_min_ratio) / (nlambda - 1);
  for (int k = 0; k < nlambda; ++k) grid[static_cast<std::size_t>(k)] = lambda_max * std::exp(k * log_step);
  grid.front() = lambda_max;
  grid.back() = lambda_max * lambda_min_ratio;
  return grid;
}

WorkingSet eligible_set(const ScreeningState& screen, double lambda_prev, double lambda_next,
                        double alpha) {
  if (!(lambda_next < lambda_prev))
    throw std::invalid_argument("eligible_set: lambda_next must be below lambda_prev");
  const double threshold =
      alpha * (lambda_next + screen.multiplier * (lambda_next - lambda_prev));
  WorkingSet set;
  for (Eigen::Index j = 0; j < screen.c.size(); ++j)
    if (std::abs(screen.c(j)) >= threshold) set.indices.push_back(static_cast<int>(j));
  return set;
}

double update_multiplier(const VectorXd& c_prev, const VectorXd& c_next, double lambda_prev,
                         double lambda_next, double alpha) {
  if (!(lambda_prev > lambda_next))
    throw std::invalid_argument("update_multiplier: lambda_prev must exceed lambda_next");
  const double max_change = (c_prev - c_next).cwiseAbs().maxCoeff();
  return max_change / (alpha * (lambda_prev - lambda_next));
}

std::vector<int> check_violations(const SolverState& state, const Dataset& data,
                                  const LossSpec& loss, const PenaltySpec& penalty,
                                  std::span<const int> excluded, double kkt_tol) {
  const double a = loss_scale(data.n(), loss);
  VectorXd scores(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) scores(i) = loss_score(state.residuals(i), loss);
  std::vector<int> violating;
  const double threshold = penalty.alpha * penalty.lambda + kkt_tol;
  for (int j : excluded) {
    const double c_j = -a * scores.dot(data.x().col(j));
    if (std::abs(c_j) > threshold) violating.push_back(j);
  }
  return violating;
}

double gamma_heuristic(double prev_gamma, const VectorXd& residuals) {
  const Eigen::Index n = residuals.size();
  if (n < 1) throw std::invalid_argument("gamma_heuristic: residuals must be nonempty");
  std::vector<double> abs_r(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) abs_r[static_cast<std::size_t>(i)] = std::abs(residuals(i));
  // lower order statistic at rank ceil(0.1 n), computed in integer arithmetic
  const std::size_t rank = (static_cast<std::size_t>(n) + 9) / 10;
  std::nth_element(abs_r.begin(), abs_r.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   abs_r.end());
  double gamma = abs_r[rank - 1];
  gamma = std::min(gamma, prev_gamma);
  gamma = std::max(gamma, 0.001);
  return gamma;
}

namespace {

std::vector<double> resolve_grid(const FitConfig& config, double lambda_max_value,
                                 Eigen::Index n, Eigen::Index p) {
  if (!config.user_lambdas.empty()) {
    std::vector<double> grid = config.user_lambdas;
    for (double lam : grid)
      if (!(lam > 0.0)) throw std::invalid_argument("fit_path: user lambdas must be positive");
    std::sort(grid.begin(), grid.end(), std::greater<double>());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
  }
  const double ratio =
      config.lambda_min_ratio > 0.0 ? config.lambda_min_ratio : (p > n ? 0.05 : 0.001);
  return lambda_grid(lambda_max_value, config.nlambda, ratio);
}

void insert_sorted(std::vector<int>& indices, int j) {
  indices.insert(std::upper_bound(indices.begin(), indices.end(), j), j);
}

}  // namespace

SolutionPath fit_path(const Dataset& raw, LossSpec loss, double alpha, const FitConfig& config) {
  config.validate();
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("fit_path: alpha must lie in (0, 1]");
  if (loss.family == LossFamily::QuantileHA)
    loss.gamma = gamma_heuristic(std::numeric_limits<double>::infinity(), raw.y());
  loss.validate();

  auto [data, info] = preprocess(raw, config.preprocess);
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  const VectorXd scales = column_update_scales(data);

  SolverState state = SolverState::null_state(data);
  detail::fit_intercept_only(state, data, loss);
  VectorXd c = gradient_correlations(state, data, loss);
  const double lmax = c.cwiseAbs().maxCoeff() / alpha;
  if (!(lmax > 0.0))
    throw validation_error(
        "fit_path: the intercept-only model already satisfies every KKT condition; "
        "there is no penalized path to compute");

  const std::vector<double> grid = resolve_grid(config, lmax, n, p);
  state.s = (-1.0 / (alpha * lmax)) * c;

  SolutionPath path;
  path.lambda_max = lmax;
  path.alpha = alpha;
  path.family = loss.family;
  path.tau = loss.tau;
  path.lambdas.reserve(grid.size());
  path.solutions.reserve(grid.size());
  path.diagnostics.reserve(grid.size());

  const bool use_asr = config.screening == Screening::Asr;
  double lam_prev = lmax;
  double gamma_prev = loss.gamma;  // gamma in effect at the previous recorded point
  VectorXd c_prev = c;
  double multiplier = 1.0;
  bool gamma_stale_c = false;  // gamma changed since c was computed at the null state

  std::vector<char> in_set(static_cast<std::size_t>(p), 0);

  // Failed solves are retried through a short internal homotopy: subdivide
  // the (lambda, gamma) jump from the last recorded point and warm-start
  // through the subdivisions on the full predictor set.
  auto rescue_solve = [&](double lam_from, double gamma_from, double lam_target,
                          const LossSpec& target_loss, PathDiagnostics& diag) {
    constexpr int steps = 6;
    const double lam_ratio = std::pow(lam_target / lam_from, 1.0 / (steps + 1));
    const bool shrink_gamma = target_loss.family == LossFamily::QuantileHA &&
                              gamma_from > target_loss.gamma;
    const double gamma_ratio =
        shrink_gamma ? std::pow(target_loss.gamma / gamma_from, 1.0 / (steps + 1)) : 1.0;
    const auto working = WorkingSet::full(p);
    LossSpec sub_loss = target_loss;
    double lam_sub = lam_from;
    double gamma_sub = gamma_from;
    for (int i = 0; i < steps; ++i) {
      lam_sub *= lam_ratio;
      gamma_sub *= gamma_ratio;
      if (shrink_gamma) sub_loss.gamma = gamma_sub;
      const SncdReport sub =
          solve_fixed_lambda(state, working, data, sub_loss, {lam_sub, alpha}, config, &scales);
      diag.sweeps += sub.sweeps;
      diag.updates += sub.updates;
    }
    const SncdReport report = solve_fixed_lambda(state, working, data, target_loss,
                                                 {lam_target, alpha}, config, &scales);
    diag.sweeps += report.sweeps;
    diag.updates += report.updates;
    return report;
  };

  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double lam = grid[k];
    const PenaltySpec penalty{lam, alpha};
    PathDiagnostics diag;

    if (k > 0 && loss.family == LossFamily::QuantileHA) {
      const double g = gamma_heuristic(loss.gamma, state.residuals);
      if (g != loss.gamma) {
        loss.gamma = g;
        gamma_stale_c = true;
      }
    }
    diag.gamma = loss.gamma;

    bool recorded_null = false;
    if (lam >= lmax * (1.0 - 1e-12) && state.beta.isZero(0.0)) {
      if (gamma_stale_c) {
        // The heuristic moved gamma while still in the null region; refit the
        // intercept and refresh c so the null certificate stays exact.
        detail::fit_intercept_only(state, data, loss);
        c = gradient_correlations(state, data, loss);
        gamma_stale_c = false;
      }
      if (c.cwiseAbs().maxCoeff() <= alpha * lam * (1.0 + 1e-12)) {
        state.s = (-1.0 / (alpha * lam)) * c;
        auto full = WorkingSet::full(p);
        diag.kkt_residual = kkt_residual(state, data, loss, penalty, full.indices);
        diag.converged = true;
        recorded_null = true;
        c_prev = c;
        lam_prev = lam;
      }
    }

    if (!recorded_null) {
      if (use_asr) {
        const double mult =
            config.fixed_multiplier >= 0.0 ? config.fixed_multiplier : multiplier;
        const double threshold = alpha * (lam + mult * (lam - lam_prev));
        std::fill(in_set.begin(), in_set.end(), 0);
        WorkingSet working;
        for (Eigen::Index j = 0; j < p; ++j)
          if (std::abs(c_prev(j)) >= threshold) {
            in_set[static_cast<std::size_t>(j)] = 1;
            working.indices.push_back(static_cast<int>(j));
          }
        // The warm-start support is always eligible when the multiplier is
        // nonnegative; keep it in the set regardless.
        for (Eigen::Index j = 0; j < p; ++j)
          if (state.beta(j) != 0.0 && !in_set[static_cast<std::size_t>(j)]) {
            in_set[static_cast<std::size_t>(j)] = 1;
            insert_sorted(working.indices, static_cast<int>(j));
          }

        SncdReport report;
        int rounds = 0;
        long violations = 0;
        for (;;) {
          report = solve_fixed_lambda(state, working, data, loss, penalty, config, &scales);
          diag.sweeps += report.sweeps;
          diag.updates += report.updates;
          c = gradient_correlations(state, data, loss);
          std::vector<int> violating;
          const double check = alpha * lam + config.kkt_tol;
          for (Eigen::Index j = 0; j < p; ++j)
            if (!in_set[static_cast<std::size_t>(j)] && std::abs(c(j)) > check)
              violating.push_back(static_cast<int>(j));
          if (violating.empty()) break;
          violations += static_cast<long>(violating.size());
          ++rounds;
          if (rounds >= config.max_screen_rounds) {
            working = WorkingSet::full(p);
            std::fill(in_set.begin(), in_set.end(), 1);
            continue;
          }
          for (int j : violating) {
            in_set[static_cast<std::size_t>(j)] = 1;
            insert_sorted(working.indices, j);
          }
        }
        diag.screening_rounds = rounds;
        diag.violations = static_cast<int>(violations);

        if (!report.converged) {
          report = rescue_solve(lam_prev, gamma_prev, lam, loss, diag);
          c = gradient_correlations(state, data, loss);
          std::fill(in_set.begin(), in_set.end(), 1);
        }

        // Excluded predictors keep beta_j = 0; complete their subgradients
        // from c so the stored state satisfies the full KKT system.
        double kkt_excluded = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
          if (in_set[static_cast<std::size_t>(j)]) continue;
          const double s_j = -c(j) / (alpha * lam);
          state.s(j) = std::clamp(s_j, -1.0, 1.0);
          kkt_excluded = std::max(kkt_excluded, std::abs(c(j)) - alpha * lam);
        }
        diag.kkt_residual = std::max(report.final_kkt_residual, std::max(kkt_excluded, 0.0));
        diag.converged = report.converged;

        multiplier = update_multiplier(c_prev, c, lam_prev, lam, alpha);
        c_prev = c;
      } else {
        const auto working = WorkingSet::full(p);
        SncdReport report =
            solve_fixed_lambda(state, working, data, loss, penalty, config, &scales);
        diag.sweeps = report.sweeps;
        diag.updates = report.updates;
        if (!report.converged) report = rescue_solve(lam_prev, gamma_prev, lam, loss, diag);
        diag.kkt_residual = report.final_kkt_residual;
        diag.converged = report.converged;
      }
      lam_prev = lam;
      gamma_stale_c = false;
    }

    diag.objective = objective(state, data, loss, penalty).total;
    path.lambdas.push_back(lam);
    path.solutions.push_back(unstandardize(state, info));
    path.diagnostics.push_back(diag);
    path.violations_total += diag.violations;
    path.all_converged = path.all_converged && diag.converged;
    gamma_prev = diag.gamma;
  }
  return path;
}

}  // namespace sncd
