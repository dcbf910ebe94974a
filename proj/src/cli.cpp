#include "sncd/cli.hpp"

#include "sncd/data_model.hpp"
#include "sncd/loss_kernels.hpp"
#include "sncd/path_driver.hpp"
#include "sncd/preprocessing_cv.hpp"
#include "sncd/reference_oracle.hpp"
#include "sncd/sna_solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace sncd::cli {

namespace {

using ordered_json = nlohmann::ordered_json;

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, result.ptr);
}

// ---------------------------------------------------------------------------
// CSV input
// ---------------------------------------------------------------------------

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream stream(line);
  while (std::getline(stream, field, ',')) {
    const auto begin = field.find_first_not_of(" \t\r");
    const auto end = field.find_last_not_of(" \t\r");
    fields.push_back(begin == std::string::npos ? std::string()
                                                : field.substr(begin, end - begin + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto result = std::from_chars(begin, end, out);
  return result.ec == std::errc() && result.ptr == end;
}

Dataset read_csv_dataset(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw io_error("cannot open input file: " + path);
  std::vector<std::vector<double>> rows;
  std::vector<std::string> names;
  std::string line;
  bool first = true;
  std::size_t data_row = 0;
  while (std::getline(file, line)) {
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_fields(line);
    std::vector<double> row(fields.size());
    bool numeric = true;
    std::size_t bad_col = 0;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!parse_double(fields[c], row[c])) {
        numeric = false;
        bad_col = c;
        break;
      }
    }
    if (first && !numeric) {
      names.assign(fields.begin() + 1, fields.end());
      first = false;
      continue;
    }
    if (!numeric) throw non_finite_entry_error(data_row, bad_col);
    rows.push_back(std::move(row));
    ++data_row;
    first = false;
  }
  return validate_dataset(rows, std::move(names));
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

void write_text(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  std::ofstream file(out_path, std::ios::binary);
  if (!file) throw io_error("cannot open output file: " + out_path);
  file << text;
  if (!file) throw io_error("write failed: " + out_path);
}

const char* family_name(LossFamily family) {
  switch (family) {
    case LossFamily::Huber: return "huber";
    case LossFamily::QuantileHA: return "quantile";
    case LossFamily::SquaredLS: return "ls";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Shared flag bundle
// ---------------------------------------------------------------------------

struct FitFlags {
  std::string input;
  std::string loss = "huber";
  double gamma = 1.0;
  double tau = 0.5;
  double alpha = 1.0;
  std::string lambdas_text;
  int nlambda = 100;
  double lambda_min_ratio = 0.0;
  std::string screen = "asr";
  std::string preprocess = "standardize";
  double tol = 1e-7;
  double kkt_tol = 1e-7;
  int max_sweeps = 10000;
  std::uint64_t seed = 0;
  std::string format = "csv";
  std::string out = "-";
};

void add_fit_flags(CLI::App* cmd, FitFlags& flags) {
  cmd->add_option("data", flags.input, "input CSV (first column response)")->required();
  cmd->add_option("--loss", flags.loss, "loss family")
      ->check(CLI::IsMember({"huber", "quantile", "ls"}));
  cmd->add_option("--gamma", flags.gamma, "Huber band half-width");
  cmd->add_option("--tau", flags.tau, "quantile level in (0,1)");
  cmd->add_option("--alpha", flags.alpha, "elastic-net mixing in (0,1]");
  cmd->add_option("--lambda", flags.lambdas_text, "explicit comma-separated lambda list");
  cmd->add_option("--nlambda", flags.nlambda, "grid size when --lambda is absent");
  cmd->add_option("--lambda-min-ratio", flags.lambda_min_ratio,
                  "grid ratio (default 0.05 if p > n else 0.001)");
  cmd->add_option("--screen", flags.screen, "screening rule (nvs and none both disable it)")
      ->check(CLI::IsMember({"asr", "nvs", "none"}));
  cmd->add_option("--preprocess", flags.preprocess, "column preprocessing")
      ->check(CLI::IsMember({"standardize", "rescale", "none"}));
  cmd->add_option("--tol", flags.tol, "coordinate-change tolerance");
  cmd->add_option("--kkt-tol", flags.kkt_tol, "KKT certificate tolerance");
  cmd->add_option("--max-sweeps", flags.max_sweeps, "sweep cap per lambda");
  cmd->add_option("--seed", flags.seed, "RNG seed (CV folds)");
  cmd->add_option("--format", flags.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--out", flags.out, "output path ('-' = stdout)");
}

std::vector<double> parse_lambda_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) {
    double v = 0.0;
    if (!parse_double(token, v) || !(v > 0.0))
      throw CLI::ValidationError("--lambda", "entries must be positive numbers");
    values.push_back(v);
  }
  if (values.empty()) throw CLI::ValidationError("--lambda", "empty list");
  return values;
}

LossSpec make_loss(const FitFlags& flags) {
  if (flags.loss == "huber") {
    if (!(flags.gamma > 0.0)) throw CLI::ValidationError("--gamma", "must be positive");
    return LossSpec::huber(flags.gamma);
  }
  if (flags.loss == "quantile") {
    if (!(flags.tau > 0.0 && flags.tau < 1.0))
      throw CLI::ValidationError("--tau", "must lie in (0,1)");
    return LossSpec::quantile(flags.tau);
  }
  return LossSpec::least_squares();
}

FitConfig make_config(const FitFlags& flags) {
  FitConfig config;
  config.nlambda = flags.nlambda;
  config.lambda_min_ratio = flags.lambda_min_ratio;
  if (!flags.lambdas_text.empty()) config.user_lambdas = parse_lambda_list(flags.lambdas_text);
  config.screening = flags.screen == "asr" ? Screening::Asr
                     : flags.screen == "nvs" ? Screening::Nvs
                                             : Screening::None;
  config.preprocess = flags.preprocess == "standardize" ? Preprocess::Standardize
                      : flags.preprocess == "rescale"   ? Preprocess::Rescale
                                                        : Preprocess::None;
  config.tol = flags.tol;
  config.kkt_tol = flags.kkt_tol;
  config.max_sweeps = flags.max_sweeps;
  config.seed = flags.seed;
  if (!(flags.alpha > 0.0 && flags.alpha <= 1.0))
    throw CLI::ValidationError("--alpha", "must lie in (0,1]");
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw CLI::ValidationError("flags", e.what());
  }
  return config;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

std::string path_to_csv(const SolutionPath& path, const Dataset& data) {
  std::string out = "lambda,term,coefficient\n";
  for (std::size_t k = 0; k < path.lambdas.size(); ++k) {
    const std::string lam = fmt(path.lambdas[k]);
    out += lam + ",(Intercept)," + fmt(path.solutions[k].beta0) + "\n";
    for (Eigen::Index j = 0; j < data.p(); ++j)
      out += lam + "," + data.column_name(j) + "," + fmt(path.solutions[k].beta(j)) + "\n";
  }
  return out;
}

ordered_json path_to_json(const SolutionPath& path, const Dataset& data, const FitFlags& flags) {
  ordered_json doc;
  doc["schema"] = "sncdreg.path.v1";
  doc["loss"] = {{"family", family_name(path.family)}};
  if (path.family == LossFamily::Huber) doc["loss"]["gamma"] = flags.gamma;
  if (path.family == LossFamily::QuantileHA) doc["loss"]["tau"] = path.tau;
  doc["alpha"] = path.alpha;
  doc["preprocess"] = flags.preprocess;
  doc["screening"] = flags.screen;
  doc["lambda_max"] = path.lambda_max;
  ordered_json columns = ordered_json::array();
  for (Eigen::Index j = 0; j < data.p(); ++j) columns.push_back(data.column_name(j));
  doc["columns"] = columns;
  ordered_json entries = ordered_json::array();
  for (std::size_t k = 0; k < path.lambdas.size(); ++k) {
    const auto& diag = path.diagnostics[k];
    ordered_json entry;
    entry["lambda"] = path.lambdas[k];
    entry["intercept"] = path.solutions[k].beta0;
    ordered_json coefs = ordered_json::array();
    for (Eigen::Index j = 0; j < data.p(); ++j) coefs.push_back(path.solutions[k].beta(j));
    entry["coefficients"] = coefs;
    entry["sweeps"] = diag.sweeps;
    entry["updates"] = diag.updates;
    entry["screening_rounds"] = diag.screening_rounds;
    entry["violations"] = diag.violations;
    if (path.family == LossFamily::QuantileHA) entry["gamma"] = diag.gamma;
    entry["kkt_residual"] = diag.kkt_residual;
    entry["objective"] = diag.objective;
    entry["converged"] = diag.converged;
    entries.push_back(std::move(entry));
  }
  doc["path"] = std::move(entries);
  if (path.family == LossFamily::QuantileHA) {
    ordered_json gammas = ordered_json::array();
    for (const auto& diag : path.diagnostics) gammas.push_back(diag.gamma);
    doc["gamma_schedule"] = std::move(gammas);
  }
  doc["violations_total"] = path.violations_total;
  doc["all_converged"] = path.all_converged;
  return doc;
}

int cmd_fit(const FitFlags& flags) {
  const LossSpec loss = make_loss(flags);
  const FitConfig config = make_config(flags);
  const Dataset data = read_csv_dataset(flags.input);

  const auto start = std::chrono::steady_clock::now();
  const SolutionPath path = fit_path(data, loss, flags.alpha, config);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  std::fprintf(stderr, "fit: %zu lambdas in %.3f s (%.3f ms per lambda)\n", path.lambdas.size(),
               elapsed.count(), 1e3 * elapsed.count() / static_cast<double>(path.lambdas.size()));
  if (!path.all_converged)
    std::fprintf(stderr, "warning: some lambdas did not converge (see diagnostics)\n");

  if (flags.format == "json")
    write_text(flags.out, path_to_json(path, data, flags).dump(2) + "\n");
  else
    write_text(flags.out, path_to_csv(path, data));
  return 0;
}

// ---------------------------------------------------------------------------
// cv
// ---------------------------------------------------------------------------

int cmd_cv(const FitFlags& flags, int folds, int workers) {
  if (folds < 2) throw CLI::ValidationError("--folds", "must be at least 2");
  const LossSpec loss = make_loss(flags);
  const FitConfig config = make_config(flags);
  const Dataset data = read_csv_dataset(flags.input);

  const auto start = std::chrono::steady_clock::now();
  const CvResult cv = cross_validate(data, loss, flags.alpha, config, folds, workers);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  std::fprintf(stderr, "cv: %d folds x %zu lambdas in %.3f s\n", folds, cv.lambdas.size(),
               elapsed.count());

  if (flags.format == "json") {
    ordered_json doc;
    doc["schema"] = "sncdreg.cv.v1";
    doc["loss"] = family_name(loss.family);
    doc["alpha"] = flags.alpha;
    doc["folds"] = folds;
    doc["seed"] = flags.seed;
    doc["lambdas"] = cv.lambdas;
    ordered_json mean = ordered_json::array();
    ordered_json se = ordered_json::array();
    for (Eigen::Index k = 0; k < cv.mean.size(); ++k) {
      mean.push_back(cv.mean(k));
      se.push_back(cv.se(k));
    }
    doc["mean"] = std::move(mean);
    doc["se"] = std::move(se);
    doc["selected_index"] = cv.selected_index;
    doc["selected_lambda"] = cv.selected_lambda;
    doc["fold_assignment"] = cv.fold_of;
    write_text(flags.out, doc.dump(2) + "\n");
  } else {
    std::string out = "lambda,mean,se,selected\n";
    for (std::size_t k = 0; k < cv.lambdas.size(); ++k) {
      out += fmt(cv.lambdas[k]) + "," + fmt(cv.mean(static_cast<Eigen::Index>(k))) + "," +
             fmt(cv.se(static_cast<Eigen::Index>(k))) + "," +
             (static_cast<int>(k) == cv.selected_index ? "1" : "0") + "\n";
    }
    write_text(flags.out, out);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

double exact_or_fitted_objective(const SolverState& state, const Dataset& data,
                                 const LossSpec& loss, const PenaltySpec& penalty) {
  if (loss.family == LossFamily::QuantileHA) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i)
      sum += quantile_value(state.residuals(i), loss.tau);
    return sum / static_cast<double>(data.n()) + penalty_value(state.beta, penalty);
  }
  return objective(state, data, loss, penalty).total;
}

int cmd_compare(const FitFlags& flags, const std::string& baseline_flag, long oracle_iterations) {
  const LossSpec loss = make_loss(flags);
  FitConfig config = make_config(flags);
  const Dataset raw = read_csv_dataset(flags.input);

  std::string baseline = baseline_flag;
  if (baseline == "auto") baseline = loss.family == LossFamily::Huber ? "sna" : "oracle";
  if (baseline == "sna" && loss.family != LossFamily::Huber)
    throw CLI::ValidationError("--baseline", "sna supports the huber loss only");
  if (baseline == "sna" && !(flags.alpha < 1.0))
    throw CLI::ValidationError("--alpha", "sna requires alpha < 1");

  // Both solvers must see the identical problem: preprocess once, then fit raw.
  const Dataset data = preprocess(raw, config.preprocess).first;
  config.preprocess = Preprocess::None;

  const auto t0 = std::chrono::steady_clock::now();
  const SolutionPath path = fit_path(data, loss, flags.alpha, config);
  const std::chrono::duration<double> sncd_time = std::chrono::steady_clock::now() - t0;
  std::fprintf(stderr, "compare: sncd path %.3f s\n", sncd_time.count());

  std::string csv = "lambda,objective_sncd,objective_baseline,d,baseline_status\n";
  ordered_json rows = ordered_json::array();

  SolverState sna_state = SolverState::null_state(data);
  bool sna_alive = baseline == "sna";
  if (sna_alive) {
    // Same warm-start chain as the path driver: intercept-only fit plus the
    // exact null subgradients.
    LossSpec l = loss;
    detail::fit_intercept_only(sna_state, data, l);
    const VectorXd c = gradient_correlations(sna_state, data, l);
    sna_state.s = (-1.0 / (flags.alpha * path.lambda_max)) * c;
  }

  std::optional<SolutionPath> self_path;
  if (baseline == "self") self_path = fit_path(data, loss, flags.alpha, config);

  for (std::size_t k = 0; k < path.lambdas.size(); ++k) {
    const PenaltySpec penalty{path.lambdas[k], flags.alpha};
    LossSpec lam_loss = loss;
    lam_loss.gamma = path.diagnostics[k].gamma;  // gamma actually used (QuantileHA)
    const double f_sncd = exact_or_fitted_objective(path.solutions[k], data, lam_loss, penalty);

    double f_base = std::numeric_limits<double>::quiet_NaN();
    std::string status = "ok";
    const auto tb = std::chrono::steady_clock::now();
    if (baseline == "self") {
      f_base = exact_or_fitted_objective(self_path->solutions[k], data, lam_loss, penalty);
    } else if (baseline == "sna") {
      if (sna_alive) {
        SnaOptions options;
        options.kkt_tol = flags.kkt_tol;
        const SnaReport report = sna_solve(sna_state, data, lam_loss, penalty, options);
        switch (report.status) {
          case SnaStatus::Converged:
            f_base = objective(sna_state, data, lam_loss, penalty).total;
            break;
          case SnaStatus::Diverged: status = "diverged"; break;
          case SnaStatus::SingularSystem: status = "singular"; break;
          case SnaStatus::MaxIterations: status = "max_iterations"; break;
        }
        if (report.status != SnaStatus::Converged) sna_alive = false;  // early exit
      } else {
        status = "skipped";
      }
    } else {  // oracle
      oracle::OracleOptions options;
      options.iterations = oracle_iterations;
      LossSpec oracle_loss = lam_loss;
      if (loss.family == LossFamily::QuantileHA) {
        oracle_loss.gamma = 1e-4;
        options.track = oracle::OracleOptions::Track::ExactQuantile;
      }
      const SolverState sol = oracle_solve(data, oracle_loss, penalty, options);
      f_base = loss.family == LossFamily::QuantileHA
                   ? oracle::quantile_objective(sol, data, loss.tau, penalty)
                   : oracle::oracle_objective(sol, data, oracle_loss, penalty);
    }
    const std::chrono::duration<double> base_time = std::chrono::steady_clock::now() - tb;
    std::fprintf(stderr, "compare: lambda %s baseline %.3f s\n", fmt(path.lambdas[k]).c_str(),
                 base_time.count());

    double d = std::numeric_limits<double>::quiet_NaN();
    if (status == "ok" && f_base != 0.0) d = (f_sncd - f_base) / f_base;
    csv += fmt(path.lambdas[k]) + "," + fmt(f_sncd) + "," +
           (status == "ok" ? fmt(f_base) : std::string("nan")) + "," +
           (status == "ok" ? fmt(d) : std::string("nan")) + "," + status + "\n";
    ordered_json row;
    row["lambda"] = path.lambdas[k];
    row["objective_sncd"] = f_sncd;
    if (status == "ok") {
      row["objective_baseline"] = f_base;
      row["d"] = d;
    }
    row["baseline_status"] = status;
    rows.push_back(std::move(row));
  }

  if (flags.format == "json") {
    ordered_json doc;
    doc["schema"] = "sncdreg.compare.v1";
    doc["baseline"] = baseline;
    doc["loss"] = family_name(loss.family);
    doc["alpha"] = flags.alpha;
    doc["rows"] = std::move(rows);
    write_text(flags.out, doc.dump(2) + "\n");
  } else {
    write_text(flags.out, csv);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(const SynthSpec& spec, const std::string& out, const std::string& truth_out) {
  const SynthData synth = synth_generate(spec);

  std::string csv = "y";
  for (Eigen::Index j = 0; j < synth.data.p(); ++j) csv += ",x" + std::to_string(j + 1);
  csv += "\n";
  for (Eigen::Index i = 0; i < synth.data.n(); ++i) {
    csv += fmt(synth.data.y()(i));
    for (Eigen::Index j = 0; j < synth.data.p(); ++j) csv += "," + fmt(synth.data.x()(i, j));
    csv += "\n";
  }
  write_text(out, csv);

  if (!truth_out.empty()) {
    ordered_json doc;
    doc["schema"] = "sncdreg.synth.v1";
    doc["n"] = synth.data.n();
    doc["p"] = synth.data.p();
    doc["rho"] = spec.rho;
    doc["snr"] = spec.snr;
    doc["noise_scale"] = synth.noise_scale;
    doc["errors"] = spec.student_errors ? "t4" : "gaussian";
    doc["intercept"] = spec.intercept;
    doc["seed"] = spec.seed;
    ordered_json beta = ordered_json::array();
    for (Eigen::Index j = 0; j < synth.true_beta.size(); ++j) beta.push_back(synth.true_beta(j));
    doc["beta"] = std::move(beta);
    write_text(truth_out, doc.dump(2) + "\n");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// oracle (hidden; used by acceptance runs)
// ---------------------------------------------------------------------------

int cmd_oracle(const FitFlags& flags, double lambda, long iterations, const std::string& track,
               double smoothing_gamma) {
  LossSpec loss = make_loss(flags);
  const Dataset data = read_csv_dataset(flags.input);
  if (!(lambda > 0.0)) throw CLI::ValidationError("--at-lambda", "must be positive");
  const PenaltySpec penalty{lambda, flags.alpha};

  oracle::OracleOptions options;
  options.iterations = iterations;
  if (track == "quantile") {
    options.track = oracle::OracleOptions::Track::ExactQuantile;
    loss.gamma = smoothing_gamma;
  } else if (track == "lad") {
    options.track = oracle::OracleOptions::Track::ExactLad;
    loss.gamma = smoothing_gamma;
  }
  const SolverState sol = oracle_solve(data, loss, penalty, options);

  ordered_json doc;
  doc["schema"] = "sncdreg.oracle.v1";
  doc["lambda"] = lambda;
  doc["objective"] = oracle::oracle_objective(sol, data, loss, penalty);
  if (track == "quantile")
    doc["objective_quantile"] = oracle::quantile_objective(sol, data, loss.tau, penalty);
  if (track == "lad") doc["objective_lad"] = oracle::lad_objective(sol, data, penalty);
  doc["intercept"] = sol.beta0;
  ordered_json beta = ordered_json::array();
  for (Eigen::Index j = 0; j < sol.beta.size(); ++j) beta.push_back(sol.beta(j));
  doc["coefficients"] = std::move(beta);
  write_text(flags.out, doc.dump(2) + "\n");
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"elastic-net regularization paths for Huber, quantile and least-squares "
               "regression (semismooth Newton coordinate descent)"};
  app.require_subcommand(1);

  FitFlags fit_flags;
  auto* fit = app.add_subcommand("fit", "fit a regularization path");
  add_fit_flags(fit, fit_flags);

  FitFlags cv_flags;
  int folds = 5;
  int workers = 0;
  auto* cv = app.add_subcommand("cv", "k-fold cross-validation over a shared lambda grid");
  add_fit_flags(cv, cv_flags);
  cv->add_option("--folds", folds, "number of folds (>= 2)");
  cv->add_option("--workers", workers, "fold worker pool size (0 = hardware)");

  FitFlags compare_flags;
  std::string baseline = "auto";
  long oracle_iterations = 200000;
  auto* compare =
      app.add_subcommand("compare", "relative objective difference against a second solver");
  add_fit_flags(compare, compare_flags);
  compare->add_option("--baseline", baseline, "comparison solver")
      ->check(CLI::IsMember({"auto", "sna", "oracle", "self"}));
  compare->add_option("--oracle-iterations", oracle_iterations, "oracle iteration budget");

  SynthSpec synth_spec;
  std::string synth_out = "-";
  std::string synth_truth;
  std::string synth_errors = "t4";
  auto* synth = app.add_subcommand("synth", "generate a synthetic regression dataset");
  synth->add_option("--n", synth_spec.n, "observations")->required();
  synth->add_option("--p", synth_spec.p, "predictors")->required();
  synth->add_option("--rho", synth_spec.rho, "shared-factor weight^2 (pairwise covariance)");
  synth->add_option("--snr", synth_spec.snr, "target signal-to-noise ratio");
  synth->add_option("--noise-scale", synth_spec.noise_scale, "explicit noise scale k (overrides --snr)");
  synth->add_option("--errors", synth_errors, "error distribution")
      ->check(CLI::IsMember({"t4", "gaussian"}));
  synth->add_option("--intercept", synth_spec.intercept, "true intercept");
  synth->add_option("--seed", synth_spec.seed, "RNG seed");
  synth->add_option("--out", synth_out, "data CSV path ('-' = stdout)");
  synth->add_option("--truth", synth_truth, "sidecar JSON with the true coefficients");

  FitFlags oracle_flags;
  double oracle_lambda = 0.0;
  long oracle_iters = 200000;
  std::string oracle_track = "fitted";
  double oracle_smoothing = 1e-4;
  auto* oracle_cmd = app.add_subcommand("oracle", "reference-oracle solve at one lambda");
  oracle_cmd->group("");  // hidden
  add_fit_flags(oracle_cmd, oracle_flags);
  oracle_cmd->add_option("--at-lambda", oracle_lambda, "penalty level")->required();
  oracle_cmd->add_option("--iterations", oracle_iters, "iteration budget");
  oracle_cmd->add_option("--track", oracle_track, "objective tracked for the best iterate")
      ->check(CLI::IsMember({"fitted", "quantile", "lad"}));
  oracle_cmd->add_option("--smoothing-gamma", oracle_smoothing,
                         "gamma for quantile/lad smoothing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (fit->parsed()) return cmd_fit(fit_flags);
    if (cv->parsed()) return cmd_cv(cv_flags, folds, workers);
    if (compare->parsed()) return cmd_compare(compare_flags, baseline, oracle_iterations);
    if (synth->parsed()) {
      synth_spec.student_errors = synth_errors == "t4";
      return cmd_synth(synth_spec, synth_out, synth_truth);
    }
    if (oracle_cmd->parsed())
      return cmd_oracle(oracle_flags, oracle_lambda, oracle_iters, oracle_track,
                        oracle_smoothing);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace sncd::cli
