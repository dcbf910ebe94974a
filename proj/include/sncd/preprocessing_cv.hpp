#pragma once

#include "sncd/data_model.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace sncd {

class too_few_observations_error : public validation_error {
 public:
  using validation_error::validation_error;
};

/// Column transform actually applied: x' = (x - center) / scale.
struct PreprocessInfo {
  Preprocess mode = Preprocess::None;
  VectorXd centers;
  VectorXd scales;
  std::vector<int> flagged;  // zero-variance columns (scale forced to 1)
};

/// standardize: center to mean 0, scale to unit population (1/n) standard
/// deviation. rescale: scale to unit (1/n) second moment without centering.
/// none: identity. Zero-variance columns keep scale 1 and are flagged.
std::pair<Dataset, PreprocessInfo> preprocess(const Dataset& data, Preprocess mode);

/// Maps a state fitted on transformed data back to the original scale:
/// beta_orig = beta / scale, beta0_orig = beta0 - sum beta_orig * center.
/// Predictions (and residuals) are invariant.
SolverState unstandardize(const SolverState& state, const PreprocessInfo& info);

/// yhat = beta0 + X beta.
VectorXd predict(const SolverState& state, const MatrixXd& x_new);

/// Mean absolute prediction error.
double mape(const VectorXd& y, const VectorXd& yhat);

/// Quantile-loss prediction error (1/n) sum rho_tau(y_i - yhat_i).
double qpe(const VectorXd& y, const VectorXd& yhat, double tau);

struct CvResult {
  std::vector<double> lambdas;
  VectorXd mean;           // per-lambda mean of the CV criterion
  VectorXd se;             // per-lambda standard error across folds
  int selected_index = 0;  // argmin of mean (ties -> largest lambda)
  double selected_lambda = 0.0;
  std::vector<int> fold_of;  // fold id per observation
};

/// Seeded k-fold CV over a shared lambda grid computed from the full data.
/// The held-out criterion is MAPE for Huber/LS and QPE(tau) for QuantileHA.
/// Folds run on a bounded worker pool (workers = 0 picks the hardware count).
CvResult cross_validate(const Dataset& data, const LossSpec& loss, double alpha,
                        const FitConfig& config, int folds, int workers = 0);

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

struct SynthSpec {
  Eigen::Index n = 100;
  Eigen::Index p = 100;
  double rho = 0.25;   // shared-factor weight^2: x_ij = z_ij + sqrt(rho) u_i.
                       // Population pairwise correlation is rho / (1 + rho).
  double snr = 3.0;    // ignored when noise_scale > 0
  double noise_scale = 0.0;
  bool student_errors = true;  // t(4) errors; false = standard gaussian
  double intercept = 0.0;
  std::uint64_t seed = 0;
};

struct SynthData {
  Dataset data;
  VectorXd true_beta;
  double noise_scale = 0.0;
};

/// Equicorrelated design via the shared-factor recipe with decaying signs
/// beta_j = (-1)^j exp(-(j-1)/10) and noise scaled to the target
/// signal-to-noise ratio (population variances).
SynthData synth_generate(const SynthSpec& spec);

}  // namespace sncd
