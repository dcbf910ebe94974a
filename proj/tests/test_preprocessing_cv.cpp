#include "sncd/preprocessing_cv.hpp"

#include "sncd/loss_kernels.hpp"
#include "sncd/path_driver.hpp"

#include <doctest.h>

#include "test_support.hpp"

#include <cmath>
#include <set>

using namespace sncd;

TEST_CASE("standardize centers to mean 0 and unit population sd") {
  const Dataset raw = validate_dataset({{0.0, 1.0}, {0.0, 2.0}, {0.0, 3.0}});
  const auto [data, info] = preprocess(raw, Preprocess::Standardize);
  CHECK(data.x().col(0).mean() == doctest::Approx(0.0));
  const double sd = std::sqrt(data.x().col(0).squaredNorm() / 3.0);
  CHECK(sd == doctest::Approx(1.0));
  CHECK(info.centers(0) == doctest::Approx(2.0));
  CHECK(info.scales(0) == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(info.flagged.empty());
}

TEST_CASE("rescale scales to unit second moment without centering") {
  const Dataset raw = validate_dataset({{0.0, 2.0}, {0.0, 2.0}, {0.0, 2.0}});
  const auto [data, info] = preprocess(raw, Preprocess::Rescale);
  CHECK(info.centers(0) == 0.0);
  CHECK(data.x()(0, 0) == doctest::Approx(1.0));  // 2 / sqrt(mean(4)) = 1
  CHECK(info.flagged.empty());
}

TEST_CASE("constant column under standardize is flagged with scale 1") {
  const Dataset raw = validate_dataset({{0.0, 5.0, 1.0}, {0.0, 5.0, 2.0}, {0.0, 5.0, 4.0}});
  const auto [data, info] = preprocess(raw, Preprocess::Standardize);
  CHECK(info.flagged == std::vector<int>{0});
  CHECK(info.scales(0) == 1.0);
  CHECK(data.x().col(0).isZero());
}

TEST_CASE("unstandardize algebra") {
  PreprocessInfo info;
  info.mode = Preprocess::Standardize;
  info.centers = VectorXd::Constant(1, 10.0);
  info.scales = VectorXd::Constant(1, 2.0);
  SolverState state;
  state.beta0 = 0.0;
  state.beta = VectorXd::Constant(1, 1.0);
  state.s = VectorXd::Zero(1);
  state.residuals = VectorXd::Zero(1);
  const SolverState out = unstandardize(state, info);
  CHECK(out.beta(0) == doctest::Approx(0.5));
  CHECK(out.beta0 == doctest::Approx(-5.0));

  PreprocessInfo none;
  none.mode = Preprocess::None;
  const SolverState same = unstandardize(state, none);
  CHECK(same.beta(0) == 1.0);
  CHECK(same.beta0 == 0.0);
}

TEST_CASE("predictions are invariant under preprocessing") {
  const Dataset data = testing::random_instance(80, 50, 6);
  for (const Preprocess mode : {Preprocess::Standardize, Preprocess::Rescale}) {
    const auto [transformed, info] = preprocess(data, mode);
    const SolverState state = testing::random_state(81, transformed);
    const SolverState orig = unstandardize(state, info);
    const VectorXd a = predict(state, transformed.x());
    const VectorXd b = predict(orig, data.x());
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("full pipeline predictions match a raw-scale fit") {
  const Dataset data = testing::random_instance(82, 60, 8);
  FitConfig standardized;
  standardized.nlambda = 12;
  standardized.preprocess = Preprocess::Standardize;
  standardized.tol = 1e-11;
  standardized.kkt_tol = 1e-10;
  const SolutionPath path = fit_path(data, LossSpec::huber(1.0), 0.9, standardized);
  // back-transformed solutions predict identically on the raw matrix
  for (std::size_t k = 0; k < path.lambdas.size(); ++k) {
    const VectorXd yhat = predict(path.solutions[k], data.x());
    const VectorXd resid = data.y() - yhat;
    CHECK((resid - path.solutions[k].residuals).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("predict basics") {
  const Dataset data = testing::random_instance(83, 10, 3);
  SolverState state = SolverState::null_state(data);
  state.beta0 = 2.5;
  CHECK((predict(state, data.x()).array() == 2.5).all());
  state.beta(0) = 1.0;
  const VectorXd yhat = predict(state, data.x());
  CHECK(yhat(3) == doctest::Approx(2.5 + data.x()(3, 0)));
  MatrixXd wrong(2, 2);
  wrong.setZero();
  CHECK_THROWS_AS(predict(state, wrong), dimension_mismatch_error);
}

TEST_CASE("mape and qpe examples") {
  VectorXd y(2), yhat(2);
  y << 1.0, 2.0;
  yhat << 1.0, 1.0;
  CHECK(mape(y, yhat) == doctest::Approx(0.5));
  CHECK(mape(y, y) == 0.0);
  CHECK(qpe(y, yhat, 0.5) == doctest::Approx(0.25));

  VectorXd a(2), b(2);
  a << 0.0, 1.0;
  b << 0.0, 0.0;
  CHECK(qpe(a, b, 0.75) == doctest::Approx(0.375));
  a << 0.0, -1.0;
  CHECK(qpe(a, b, 0.75) == doctest::Approx(0.125));

  VectorXd single(1), pred(1);
  single << 0.0;
  pred << 3.0;
  CHECK(mape(single, pred) == doctest::Approx(3.0));
}

TEST_CASE("qpe at tau = 0.5 is exactly half of mape") {
  const Dataset data = testing::random_instance(84, 30, 2);
  const VectorXd yhat = VectorXd::Constant(30, 0.37);
  CHECK(qpe(data.y(), yhat, 0.5) == doctest::Approx(0.5 * mape(data.y(), yhat)).epsilon(1e-15));
}

TEST_CASE("cross_validate: determinism, fold partition, selection sanity") {
  const Dataset data = testing::random_instance(85, 60, 10);
  FitConfig config;
  config.nlambda = 15;
  config.seed = 7;

  const CvResult a = cross_validate(data, LossSpec::huber(1.0), 0.9, config, 5);
  const CvResult b = cross_validate(data, LossSpec::huber(1.0), 0.9, config, 5);
  CHECK(a.fold_of == b.fold_of);
  CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.selected_lambda == b.selected_lambda);
  CHECK(a.selected_lambda == a.lambdas[static_cast<std::size_t>(a.selected_index)]);

  // folds form a partition with balanced sizes
  std::vector<int> counts(5, 0);
  for (int f : a.fold_of) {
    REQUIRE(f >= 0);
    REQUIRE(f < 5);
    ++counts[static_cast<std::size_t>(f)];
  }
  for (int count : counts) CHECK(count == 12);

  // different seed moves the folds
  config.seed = 8;
  const CvResult c = cross_validate(data, LossSpec::huber(1.0), 0.9, config, 5);
  CHECK(c.fold_of != a.fold_of);
}

TEST_CASE("cross_validate: leave-one-out boundary and fold-count validation") {
  const Dataset data = testing::random_instance(86, 12, 3);
  FitConfig config;
  config.nlambda = 5;
  const CvResult loo = cross_validate(data, LossSpec::least_squares(), 1.0, config, 12);
  std::set<int> folds(loo.fold_of.begin(), loo.fold_of.end());
  CHECK(folds.size() == 12);  // singleton folds

  CHECK_THROWS_AS(cross_validate(data, LossSpec::least_squares(), 1.0, config, 1),
                  too_few_observations_error);
  CHECK_THROWS_AS(cross_validate(data, LossSpec::least_squares(), 1.0, config, 13),
                  too_few_observations_error);
}

TEST_CASE("cross_validate: pure-noise response prefers heavy penalties") {
  // noise-only response: the selected lambda should sit in the top third
  SynthSpec spec;
  spec.n = 80;
  spec.p = 20;
  spec.seed = 99;
  spec.noise_scale = 1.0;
  SynthData synth = synth_generate(spec);
  VectorXd y = synth.data.y();
  {
    // strip the signal, keep the noise: y - X beta_true
    y -= synth.data.x() * synth.true_beta;
  }
  const Dataset noise(y, synth.data.x());
  FitConfig config;
  config.nlambda = 30;
  config.seed = 3;
  const CvResult cv = cross_validate(noise, LossSpec::least_squares(), 1.0, config, 5);
  CHECK(cv.selected_index <= 10);
}

TEST_CASE("fold assignment is a valid partition for every seed") {
  const Dataset data = testing::random_instance(88, 23, 2);
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    FitConfig config;
    config.nlambda = 3;
    config.seed = seed;
    const CvResult cv = cross_validate(data, LossSpec::least_squares(), 1.0, config, 4);
    REQUIRE(cv.fold_of.size() == 23);
    std::vector<int> counts(4, 0);
    for (int f : cv.fold_of) {
      REQUIRE(f >= 0);
      REQUIRE(f < 4);
      ++counts[static_cast<std::size_t>(f)];
    }
    for (int count : counts) CHECK(count >= 5);  // 23 = 4*5 + 3
  }
}

TEST_CASE("cross_validate runs folds concurrently with identical results") {
  const Dataset data = testing::random_instance(87, 50, 8);
  FitConfig config;
  config.nlambda = 10;
  config.seed = 11;
  const CvResult serial = cross_validate(data, LossSpec::huber(1.0), 0.9, config, 5, 1);
  const CvResult parallel = cross_validate(data, LossSpec::huber(1.0), 0.9, config, 5, 4);
  CHECK((serial.mean - parallel.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK(serial.fold_of == parallel.fold_of);
}

TEST_CASE("synth_generate: determinism and the documented correlation") {
  SynthSpec spec;
  spec.n = 10000;
  spec.p = 6;
  spec.seed = 1234;
  const SynthData a = synth_generate(spec);
  const SynthData b = synth_generate(spec);
  CHECK((a.data.x() - b.data.x()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.data.y() - b.data.y()).cwiseAbs().maxCoeff() == 0.0);

  // the x = z + 0.5 u recipe has population correlation 0.25/1.25 = 0.2;
  // averaging the pairwise estimates keeps the Monte Carlo noise below 0.02
  const MatrixXd& x = a.data.x();
  double mean_corr = 0.0;
  int pairs = 0;
  for (Eigen::Index j = 0; j < spec.p; ++j) {
    for (Eigen::Index k = j + 1; k < spec.p; ++k) {
      const VectorXd cj = x.col(j).array() - x.col(j).mean();
      const VectorXd ck = x.col(k).array() - x.col(k).mean();
      const double corr = cj.dot(ck) / std::sqrt(cj.squaredNorm() * ck.squaredNorm());
      CHECK(corr == doctest::Approx(0.2).epsilon(0.25));
      mean_corr += corr;
      ++pairs;
    }
  }
  CHECK(std::abs(mean_corr / pairs - 0.2) <= 0.02);
}

TEST_CASE("synth_generate: decaying alternating coefficients and SNR scaling") {
  SynthSpec spec;
  spec.n = 5;
  spec.p = 4;
  spec.seed = 5;
  const SynthData synth = synth_generate(spec);
  CHECK(synth.true_beta(0) == doctest::Approx(-1.0));
  CHECK(synth.true_beta(1) == doctest::Approx(std::exp(-0.1)));
  CHECK(synth.true_beta(2) == doctest::Approx(-std::exp(-0.2)));
  CHECK(synth.true_beta(3) == doctest::Approx(std::exp(-0.3)));

  const double signal = synth.true_beta.squaredNorm() +
                        spec.rho * std::pow(synth.true_beta.sum(), 2);
  CHECK(synth.noise_scale == doctest::Approx(std::sqrt(signal / (3.0 * 2.0))));
}
