#include "sncd/path_driver.hpp"

#include "sncd/loss_kernels.hpp"
#include "sncd/preprocessing_cv.hpp"
#include "sncd/reference_oracle.hpp"
#include "sncd/sncd_core.hpp"

#include <doctest.h>

#include "test_support.hpp"

#include <cmath>
#include <limits>

using namespace sncd;

TEST_CASE("lambda_max: column orthogonal to the scores contributes nothing") {
  // y symmetric around 0, first column aligned with the scores, second orthogonal
  const Dataset data = validate_dataset(
      {{1.0, 1.0, 1.0}, {-1.0, -1.0, 1.0}, {2.0, 2.0, -1.0}, {-2.0, -2.0, -1.0}});
  const LossSpec loss = LossSpec::huber(10.0);  // all in band: scores = r / gamma
  SolverState state = SolverState::null_state(data);
  detail::fit_intercept_only(state, data, loss);
  const VectorXd c = gradient_correlations(state, data, loss);
  CHECK(std::abs(c(1)) <= 1e-14);
  CHECK(std::abs(c(0)) > 0.0);
}

TEST_CASE("lambda_max closed form for least squares on centered data") {
  Dataset raw = testing::random_instance(60, 40, 6);
  // center y and columns
  VectorXd y = raw.y();
  y.array() -= y.mean();
  MatrixXd x = raw.x();
  for (Eigen::Index j = 0; j < x.cols(); ++j) x.col(j).array() -= x.col(j).mean();
  const Dataset data(y, x);
  const double alpha = 0.8;
  const double expect =
      (x.transpose() * y).cwiseAbs().maxCoeff() / (static_cast<double>(data.n()) * alpha);
  CHECK(lambda_max(data, LossSpec::least_squares(), alpha) == doctest::Approx(expect));
}

TEST_CASE("solving just above lambda_max returns the exact null solution") {
  const Dataset data = testing::random_instance(61, 50, 8);
  // the path driver pins gamma for QuantileHA via the heuristic; match it
  const double gamma1 =
      gamma_heuristic(std::numeric_limits<double>::infinity(), data.y());
  for (const LossSpec& loss :
       {LossSpec::huber(1.0), LossSpec::least_squares(), LossSpec::quantile(0.3, gamma1)}) {
    FitConfig config;
    config.user_lambdas = {1.01 * lambda_max(data, loss, 0.9)};
    config.preprocess = Preprocess::None;
    const SolutionPath path = fit_path(data, loss, 0.9, config);
    CHECK(path.solutions[0].beta.isZero());
    CHECK(path.diagnostics[0].kkt_residual <= 1e-12);
  }
}

TEST_CASE("lambda_grid is geometric with exact endpoints") {
  const auto grid = lambda_grid(1.0, 3, 0.01);
  REQUIRE(grid.size() == 3);
  CHECK(grid[0] == 1.0);
  CHECK(grid[1] == doctest::Approx(0.1));
  CHECK(grid[2] == doctest::Approx(0.01));

  const auto short_grid = lambda_grid(2.0, 2, 0.5);
  CHECK(short_grid[0] == 2.0);
  CHECK(short_grid[1] == doctest::Approx(1.0));

  CHECK_THROWS_AS(lambda_grid(1.0, 1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(lambda_grid(1.0, 5, 1.5), std::invalid_argument);
}

TEST_CASE("auto grid ratio defaults to 0.05 when p > n, 0.001 otherwise") {
  {
    const Dataset data = testing::random_instance(62, 30, 50);
    FitConfig config;
    config.nlambda = 10;
    const SolutionPath path = fit_path(data, LossSpec::least_squares(), 1.0, config);
    CHECK(path.lambdas.back() == doctest::Approx(path.lambda_max * 0.05));
  }
  {
    const Dataset data = testing::random_instance(63, 50, 5);
    FitConfig config;
    config.nlambda = 10;
    const SolutionPath path = fit_path(data, LossSpec::least_squares(), 1.0, config);
    CHECK(path.lambdas.back() == doctest::Approx(path.lambda_max * 0.001));
  }
}

TEST_CASE("eligible_set thresholds") {
  ScreeningState screen;
  screen.c = VectorXd::Zero(2);
  screen.c << 0.5, 0.2;
  screen.multiplier = 1.0;
  auto set = eligible_set(screen, 0.5, 0.4, 1.0);  // threshold 0.3
  CHECK(set.indices == std::vector<int>{0});

  screen.multiplier = 3.0;  // threshold alpha*(0.4 - 0.3) = 0.1
  set = eligible_set(screen, 0.5, 0.4, 1.0);
  CHECK(set.indices == std::vector<int>{0, 1});
}

TEST_CASE("update_multiplier arithmetic") {
  VectorXd a(2), b(2);
  a << 0.5, 0.2;
  b << 0.44, 0.2;
  CHECK(update_multiplier(a, b, 0.5, 0.4, 1.0) == doctest::Approx(0.6));
  CHECK(update_multiplier(a, a, 0.5, 0.4, 1.0) == 0.0);
  b << 0.45, 0.2;
  CHECK(update_multiplier(a, b, 0.5, 0.4, 0.5) == doctest::Approx(1.0));
}

TEST_CASE("check_violations finds a deliberately excluded support feature") {
  const Dataset data = testing::random_instance(64, 60, 10);
  const LossSpec loss = LossSpec::huber(1.0);
  const double alpha = 0.9;

  SolverState state = SolverState::null_state(data);
  detail::fit_intercept_only(state, data, loss);
  const VectorXd c = gradient_correlations(state, data, loss);
  const double lmax = c.cwiseAbs().maxCoeff() / alpha;
  state.s = (-1.0 / (alpha * lmax)) * c;
  const PenaltySpec penalty{0.05 * lmax, alpha};

  // no excluded predictors -> no violations
  CHECK(check_violations(state, data, loss, penalty, {}, 1e-7).empty());

  // solve while excluding the strongest feature; it must come back violated
  int strongest = 0;
  c.cwiseAbs().maxCoeff(&strongest);
  WorkingSet working;
  for (int j = 0; j < data.p(); ++j)
    if (j != strongest) working.indices.push_back(j);
  FitConfig config;
  solve_fixed_lambda(state, working, data, loss, penalty, config);
  const std::vector<int> excluded{strongest};
  const auto violations = check_violations(state, data, loss, penalty, excluded, config.kkt_tol);
  CHECK(violations == excluded);

  // solve on the full set: predictors left out of the model never violate
  solve_fixed_lambda(state, WorkingSet::full(data.p()), data, loss, penalty, config);
  std::vector<int> zero_coef;
  for (int j = 0; j < data.p(); ++j)
    if (state.beta(j) == 0.0) zero_coef.push_back(j);
  CHECK(check_violations(state, data, loss, penalty, zero_coef, config.kkt_tol).empty());
}

TEST_CASE("gamma_heuristic rank, cap and floor") {
  VectorXd r(100);
  for (int i = 0; i < 100; ++i) r(i) = static_cast<double>(i + 1) * ((i % 2 == 0) ? 1.0 : -1.0);
  CHECK(gamma_heuristic(std::numeric_limits<double>::infinity(), r) == doctest::Approx(10.0));
  CHECK(gamma_heuristic(5.0, r) == doctest::Approx(5.0));  // min with previous

  VectorXd tiny = VectorXd::Constant(10, 0.0005);
  CHECK(gamma_heuristic(std::numeric_limits<double>::infinity(), tiny) == 0.001);  // floor
}

TEST_CASE("fit_path: first point is exactly null and ASR == NVS everywhere") {
  for (std::uint64_t seed : {70ull, 71ull}) {
    const Dataset data = testing::random_instance(seed, 60, 20);
    for (const LossSpec& loss : {LossSpec::huber(1.0), LossSpec::quantile(0.75)}) {
      FitConfig config;
      config.nlambda = 30;
      config.tol = 1e-13;
      config.kkt_tol = 1e-11;

      FitConfig asr = config;
      asr.screening = Screening::Asr;
      FitConfig nvs = config;
      nvs.screening = Screening::Nvs;

      const SolutionPath a = fit_path(data, loss, 0.9, asr);
      const SolutionPath b = fit_path(data, loss, 0.9, nvs);

      CHECK(a.solutions[0].beta.isZero());
      CHECK(b.solutions[0].beta.isZero());
      REQUIRE(a.lambdas.size() == b.lambdas.size());
      // screening is an optimization: certified points coincide exactly;
      // flagged (limit-cycle) quantile points only to solver accuracy
      double max_gap = 0.0;
      for (std::size_t k = 0; k < a.lambdas.size(); ++k) {
        if (!(a.diagnostics[k].converged && b.diagnostics[k].converged)) continue;
        max_gap = std::max(max_gap,
                           (a.solutions[k].beta - b.solutions[k].beta).cwiseAbs().maxCoeff());
        max_gap = std::max(max_gap, std::abs(a.solutions[k].beta0 - b.solutions[k].beta0));
      }
      CHECK(max_gap <= 1e-8);
      CHECK(a.violations_total >= 0);
    }
  }
}

TEST_CASE("fit_path: plain strong rule (fixed M = 1) also matches NVS") {
  const Dataset data = testing::random_instance(72, 50, 15);
  const LossSpec loss = LossSpec::huber(0.5);
  FitConfig config;
  config.nlambda = 25;
  config.tol = 1e-13;
  config.kkt_tol = 1e-11;

  FitConfig plain = config;
  plain.screening = Screening::Asr;
  plain.fixed_multiplier = 1.0;
  FitConfig nvs = config;
  nvs.screening = Screening::Nvs;

  const SolutionPath a = fit_path(data, loss, 0.9, plain);
  const SolutionPath b = fit_path(data, loss, 0.9, nvs);
  for (std::size_t k = 0; k < a.lambdas.size(); ++k)
    CHECK((a.solutions[k].beta - b.solutions[k].beta).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("fit_path: gamma schedule is nonincreasing with floor 0.001") {
  const Dataset data = testing::random_instance(73, 80, 10);
  FitConfig config;
  config.nlambda = 50;
  const SolutionPath path = fit_path(data, LossSpec::quantile(0.25), 0.9, config);
  const GammaSchedule schedule = gamma_schedule(path);
  REQUIRE(schedule.values.size() == path.lambdas.size());
  for (std::size_t k = 1; k < schedule.values.size(); ++k) {
    CHECK(schedule.values[k] <= schedule.values[k - 1] + 1e-15);
    CHECK(schedule.values[k] >= 0.001);
  }
}

TEST_CASE("fit_path: warm starts keep the sweep counts low") {
  const Dataset data = testing::random_instance(74, 100, 30);
  FitConfig config;
  config.nlambda = 40;
  const SolutionPath path = fit_path(data, LossSpec::huber(1.0), 0.9, config);
  for (const auto& diag : path.diagnostics) CHECK(diag.sweeps < config.max_sweeps);
  for (std::size_t k = 1; k < path.lambdas.size(); ++k) {
    const double step =
        (path.solutions[k].beta - path.solutions[k - 1].beta).norm();
    CHECK(std::isfinite(step));
  }
}

TEST_CASE("fit_path: user grid above lambda_max yields nulls without solving") {
  const Dataset data = testing::random_instance(75, 30, 5);
  const LossSpec loss = LossSpec::huber(1.0);
  const double lmax = lambda_max(preprocess(data, Preprocess::Standardize).first, loss, 0.9);
  FitConfig config;
  config.user_lambdas = {3.0 * lmax, 2.0 * lmax, 0.5 * lmax};
  const SolutionPath path = fit_path(data, loss, 0.9, config);
  REQUIRE(path.lambdas.size() == 3);
  CHECK(path.solutions[0].beta.isZero());
  CHECK(path.solutions[1].beta.isZero());
  CHECK(path.diagnostics[0].sweeps == 0);
  CHECK(path.diagnostics[1].sweeps == 0);
  CHECK(!path.solutions[2].beta.isZero());
}

TEST_CASE("fit_path: user grid under ASR matches NVS for quantile") {
  const Dataset data = testing::random_instance(77, 40, 12);
  const LossSpec loss = LossSpec::quantile(0.5);
  const double gamma1 =
      gamma_heuristic(std::numeric_limits<double>::infinity(), data.y());
  const double lmax =
      lambda_max(preprocess(data, Preprocess::Standardize).first,
                 LossSpec::quantile(0.5, gamma1), 0.9);
  FitConfig asr;
  asr.user_lambdas = {0.8 * lmax, 0.4 * lmax, 0.15 * lmax, 0.05 * lmax};
  asr.screening = Screening::Asr;
  FitConfig nvs = asr;
  nvs.screening = Screening::Nvs;
  const SolutionPath a = fit_path(data, loss, 0.9, asr);
  const SolutionPath b = fit_path(data, loss, 0.9, nvs);
  REQUIRE(a.lambdas.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(a.lambdas[k] == b.lambdas[k]);
    if (a.diagnostics[k].converged && b.diagnostics[k].converged)
      CHECK((a.solutions[k].beta - b.solutions[k].beta).cwiseAbs().maxCoeff() <= 1e-7);
  }
}

TEST_CASE("quantile smoothing: f_Q of the HA solution approaches the oracle minimum") {
  const Dataset data = testing::random_instance(76, 50, 8);
  const double alpha = 0.9;
  const double tau = 0.5;

  // fixed lambda taken from a quantile path
  FitConfig probe;
  probe.nlambda = 20;
  probe.preprocess = Preprocess::None;
  const SolutionPath qpath = fit_path(data, LossSpec::quantile(tau), alpha, probe);
  const double lam = qpath.lambdas[10];
  const PenaltySpec penalty{lam, alpha};

  LossSpec tiny = LossSpec::quantile(tau, 1e-4);
  oracle::OracleOptions options;
  options.iterations = 400000;
  options.track = oracle::OracleOptions::Track::ExactQuantile;
  const double f_oracle =
      oracle::quantile_objective(oracle::oracle_solve(data, tiny, penalty, options), data, tau,
                                 penalty);

  double previous = std::numeric_limits<double>::infinity();
  for (double gamma : {0.5, 0.1, 0.02, 0.004}) {
    const SolverState state = testing::solve_ha_fixed_gamma(data, tau, gamma, lam, alpha);
    const double f_q = oracle::quantile_objective(state, data, tau, penalty);
    CHECK(f_q - f_oracle <= gamma / 4.0 + 1e-6);
    CHECK(f_q <= previous + 1e-10);
    previous = f_q;
  }
}
