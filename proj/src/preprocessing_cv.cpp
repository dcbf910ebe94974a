#include "sncd/preprocessing_cv.hpp"

#include "sncd/loss_kernels.hpp"
#include "sncd/path_driver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

namespace sncd {

std::pair<Dataset, PreprocessInfo> preprocess(const Dataset& data, Preprocess mode) {
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  PreprocessInfo info;
  info.mode = mode;
  info.centers = VectorXd::Zero(p);
  info.scales = VectorXd::Ones(p);
  if (mode == Preprocess::None) return {data, info};

  MatrixXd x = data.x();
  for (Eigen::Index j = 0; j < p; ++j) {
    auto col = x.col(j);
    const double center = mode == Preprocess::Standardize ? col.mean() : 0.0;
    const double mean_square = (col.array() - center).square().sum() / static_cast<double>(n);
    double scale = std::sqrt(mean_square);
    const double col_magnitude = std::max(1.0, col.cwiseAbs().maxCoeff());
    if (scale <= 1e-12 * col_magnitude) {
      info.flagged.push_back(static_cast<int>(j));
      scale = 1.0;
    }
    col = (col.array() - center) / scale;
    info.centers(j) = center;
    info.scales(j) = scale;
  }
  return {Dataset(data.y(), std::move(x), data.column_names()), info};
}

SolverState unstandardize(const SolverState& state, const PreprocessInfo& info) {
  if (info.mode == Preprocess::None) return state;
  SolverState out = state;
  out.beta = state.beta.cwiseQuotient(info.scales);
  out.beta0 = state.beta0 - out.beta.dot(info.centers);
  return out;
}

VectorXd predict(const SolverState& state, const MatrixXd& x_new) {
  if (x_new.cols() != state.beta.size())
    throw dimension_mismatch_error("predict: column count does not match coefficients");
  VectorXd yhat = x_new * state.beta;
  yhat.array() += state.beta0;
  return yhat;
}

double mape(const VectorXd& y, const VectorXd& yhat) {
  if (y.size() != yhat.size()) throw dimension_mismatch_error("mape: length mismatch");
  return (y - yhat).cwiseAbs().mean();
}

double qpe(const VectorXd& y, const VectorXd& yhat, double tau) {
  if (y.size() != yhat.size()) throw dimension_mismatch_error("qpe: length mismatch");
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("qpe: tau must lie in (0, 1)");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) sum += quantile_value(y(i) - yhat(i), tau);
  return sum / static_cast<double>(y.size());
}

namespace {

// Fisher-Yates with explicit rejection sampling so fold assignments do not
// depend on the standard library's distribution internals.
std::vector<int> shuffled_indices(Eigen::Index n, std::uint64_t seed) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = static_cast<int>(i);
  std::mt19937_64 gen(seed);
  for (std::size_t i = idx.size() - 1; i > 0; --i) {
    const std::uint64_t bound = i + 1;
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
      r = gen();
    } while (r >= limit);
    std::swap(idx[i], idx[static_cast<std::size_t>(r % bound)]);
  }
  return idx;
}

Dataset take_rows(const Dataset& data, const std::vector<int>& rows) {
  VectorXd y(static_cast<Eigen::Index>(rows.size()));
  MatrixXd x(static_cast<Eigen::Index>(rows.size()), data.p());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    y(static_cast<Eigen::Index>(i)) = data.y()(rows[i]);
    x.row(static_cast<Eigen::Index>(i)) = data.x().row(rows[i]);
  }
  return Dataset(std::move(y), std::move(x), data.column_names());
}

}  // namespace

CvResult cross_validate(const Dataset& data, const LossSpec& loss, double alpha,
                        const FitConfig& config, int folds, int workers) {
  const Eigen::Index n = data.n();
  if (folds < 2 || folds > n)
    throw too_few_observations_error("cross_validate: folds must lie in [2, n]");
  config.validate();

  // Shared grid from the full data, matching what fit_path would build.
  LossSpec grid_loss = loss;
  if (grid_loss.family == LossFamily::QuantileHA)
    grid_loss.gamma = gamma_heuristic(std::numeric_limits<double>::infinity(), data.y());
  const auto [full_transformed, full_info] = preprocess(data, config.preprocess);
  const double lmax = lambda_max(full_transformed, grid_loss, alpha);
  FitConfig fold_config = config;
  if (config.user_lambdas.empty()) {
    const double ratio = config.lambda_min_ratio > 0.0
                             ? config.lambda_min_ratio
                             : (data.p() > n ? 0.05 : 0.001);
    fold_config.user_lambdas = lambda_grid(lmax, config.nlambda, ratio);
  } else {
    fold_config.user_lambdas = config.user_lambdas;
    std::sort(fold_config.user_lambdas.begin(), fold_config.user_lambdas.end(),
              std::greater<double>());
    fold_config.user_lambdas.erase(
        std::unique(fold_config.user_lambdas.begin(), fold_config.user_lambdas.end()),
        fold_config.user_lambdas.end());
  }
  const std::size_t nlam = fold_config.user_lambdas.size();

  CvResult result;
  result.lambdas = fold_config.user_lambdas;
  result.fold_of.resize(static_cast<std::size_t>(n));
  const std::vector<int> order = shuffled_indices(n, config.seed);
  for (std::size_t i = 0; i < order.size(); ++i)
    result.fold_of[static_cast<std::size_t>(order[i])] = static_cast<int>(i % folds);

  MatrixXd criterion(folds, static_cast<Eigen::Index>(nlam));
  std::atomic<int> next_fold{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mutex;

  auto run_fold = [&](int fold) {
    std::vector<int> train_rows;
    std::vector<int> test_rows;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (result.fold_of[static_cast<std::size_t>(i)] == fold)
        test_rows.push_back(static_cast<int>(i));
      else
        train_rows.push_back(static_cast<int>(i));
    }
    const Dataset train = take_rows(data, train_rows);
    const Dataset test = take_rows(data, test_rows);
    const SolutionPath path = fit_path(train, loss, alpha, fold_config);
    for (std::size_t k = 0; k < nlam; ++k) {
      const VectorXd yhat = predict(path.solutions[k], test.x());
      criterion(fold, static_cast<Eigen::Index>(k)) =
          loss.family == LossFamily::QuantileHA ? qpe(test.y(), yhat, loss.tau)
                                                : mape(test.y(), yhat);
    }
  };

  int pool = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
  pool = std::max(1, std::min(pool, folds));
  if (pool == 1) {
    for (int f = 0; f < folds; ++f) run_fold(f);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(pool));
    for (int w = 0; w < pool; ++w) {
      threads.emplace_back([&] {
        for (;;) {
          const int fold = next_fold.fetch_add(1);
          if (fold >= folds || failed.load()) break;
          try {
            run_fold(fold);
          } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            failed.store(true);
            failure = e.what();
          }
        }
      });
    }
    for (auto& t : threads) t.join();
    if (failed.load()) throw std::runtime_error("cross_validate: fold failed: " + failure);
  }

  result.mean = criterion.colwise().mean();
  result.se.resize(static_cast<Eigen::Index>(nlam));
  for (std::size_t k = 0; k < nlam; ++k) {
    const auto col = criterion.col(static_cast<Eigen::Index>(k));
    const double m = result.mean(static_cast<Eigen::Index>(k));
    const double var = (col.array() - m).square().sum() / static_cast<double>(folds - 1);
    result.se(static_cast<Eigen::Index>(k)) = std::sqrt(var / static_cast<double>(folds));
  }
  result.selected_index = 0;
  for (std::size_t k = 1; k < nlam; ++k)
    if (result.mean(static_cast<Eigen::Index>(k)) <
        result.mean(static_cast<Eigen::Index>(result.selected_index)))
      result.selected_index = static_cast<int>(k);
  result.selected_lambda = result.lambdas[static_cast<std::size_t>(result.selected_index)];
  return result;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

namespace {

// Box-Muller on top of mt19937_64 so streams are identical across standard
// library implementations.
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : gen_(seed) {}

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double student_t4() {
    const double z = normal();
    double chi = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double w = normal();
      chi += w * w;
    }
    return z / std::sqrt(chi / 4.0);
  }

 private:
  double uniform_open() {
    // 53-bit mantissa draw in (0, 1]
    return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
  }

  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace

SynthData synth_generate(const SynthSpec& spec) {
  if (spec.n < 1 || spec.p < 1) throw std::invalid_argument("synth_generate: n, p must be >= 1");
  if (spec.rho < 0.0) throw std::invalid_argument("synth_generate: rho must be nonnegative");
  if (spec.noise_scale <= 0.0 && !(spec.snr > 0.0))
    throw std::invalid_argument("synth_generate: snr must be positive");

  NormalSource rng(spec.seed);
  const double w = std::sqrt(spec.rho);

  VectorXd shared(spec.n);
  for (Eigen::Index i = 0; i < spec.n; ++i) shared(i) = rng.normal();

  MatrixXd x(spec.n, spec.p);
  for (Eigen::Index i = 0; i < spec.n; ++i)
    for (Eigen::Index j = 0; j < spec.p; ++j) x(i, j) = rng.normal() + w * shared(i);

  VectorXd beta(spec.p);
  for (Eigen::Index j = 0; j < spec.p; ++j) {
    const double sign = (j % 2 == 0) ? -1.0 : 1.0;  // (-1)^j for 1-based j
    beta(j) = sign * std::exp(-static_cast<double>(j) / 10.0);
  }

  const double unit_noise_var = spec.student_errors ? 2.0 : 1.0;
  double k = spec.noise_scale;
  if (k <= 0.0) {
    const double signal_var = beta.squaredNorm() + spec.rho * std::pow(beta.sum(), 2);
    k = std::sqrt(signal_var / (spec.snr * unit_noise_var));
  }

  VectorXd y = x * beta;
  y.array() += spec.intercept;
  for (Eigen::Index i = 0; i < spec.n; ++i)
    y(i) += k * (spec.student_errors ? rng.student_t4() : rng.normal());

  SynthData out{Dataset(std::move(y), std::move(x)), std::move(beta), k};
  return out;
}

}  // namespace sncd
