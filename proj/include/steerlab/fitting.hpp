#pragma once

// Least-squares estimation with coefficient inference, information
// criteria, repetition-fold cross-validation and AIC ranking.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "steerlab/models.hpp"

namespace steerlab::fitting {

// Log10-scale diagnostics kept for the LIU form.
struct LogScaleFit {
  std::vector<double> coefficients;
  double rss = 0.0;
  double r2_adjusted = 0.0;
};

struct FitResult {
  std::optional<models::ModelForm> form;
  std::vector<std::string> names;
  std::vector<double> coefficients;
  std::vector<double> standard_errors;
  std::vector<double> ci95_low;
  std::vector<double> ci95_high;
  std::vector<double> p_values;
  double r2 = 0.0;
  double r2_adjusted = 0.0;
  double aic = 0.0;
  double rss = 0.0;
  double tss = 0.0;
  std::size_t n_points = 0;
  int iterations = 0;
  std::optional<LogScaleFit> log_scale;
  std::vector<std::string> warnings;

  models::Coefficients coef() const { return {coefficients}; }
  std::string label() const;
};

// Ordinary least squares through a column-pivoted QR decomposition.
// Coefficient covariance is sigma^2 (X'X)^-1 with sigma^2 = RSS/(n-p);
// p-values are two-sided from Student's t with n-p degrees of freedom.
// Throws InsufficientDataError (n <= p) or SingularDesignError.
FitResult fit_linear(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets,
                     bool has_intercept = true);

struct NlsOptions {
  int max_iterations = 500;
  double rel_rss_tolerance = 1e-12;
  double gradient_tolerance = 1e-9;
};

// Residuals r = y - f(theta) and the model Jacobian df/dtheta. The callback
// throws EvaluationError when theta is outside the model's domain; such
// steps are rejected and the damping is increased.
using NlsEvaluate =
    std::function<void(std::span<const double> theta, Eigen::VectorXd& residuals,
                       Eigen::MatrixXd& jacobian)>;

struct NlsSolution {
  std::vector<double> theta;
  double rss = 0.0;
  int iterations = 0;
  std::vector<double> trace;  // RSS after every accepted step
  Eigen::MatrixXd jacobian;
};

// Damped Gauss-Newton with Marquardt scaling.
NlsSolution gauss_newton(const NlsEvaluate& evaluate, std::span<const double> init,
                         std::size_t n_points, const NlsOptions& opts = {});

// MT = a + b L^2 / (L + c K). `init` defaults to the SL_BASE fit with c = 0.
FitResult fit_nonlinear_ym(std::span<const models::TrialFeatures> features,
                           std::span<const double> targets,
                           std::optional<models::Coefficients> init = std::nullopt,
                           const NlsOptions& opts = {});

// MT = 10^(a + b log10 L + c K/L), warm-started from the linear fit on
// log10 MT and refined by least squares on the MT scale.
FitResult fit_liu(std::span<const models::TrialFeatures> features,
                  std::span<const double> targets_mt, bool intercept = true,
                  const NlsOptions& opts = {});

// Fits `form` to features[i].mt_mean.
FitResult fit_model(const models::ModelForm& form,
                    std::span<const models::TrialFeatures> features);

// n ln(RSS/n) + n ln(2 pi) + n + 2k. Returns -infinity for RSS == 0.
double aic(double rss, std::size_t n, std::size_t k);

// 1 - (1 - R^2)(n - 1)/(n - p - 1) with p predictors besides the intercept;
// without an intercept p counts every coefficient and the divisor is n - p.
double adjusted_r2(double rss, double tss, std::size_t n, std::size_t p, bool intercept = true);

const char* significance_stars(double p_value);

// Cross-validation over repetition folds.
struct RepetitionCell {
  std::string trial_id;
  models::TrialFeatures features;  // mt_mean ignored
  std::vector<double> mt_reps;
};

enum class FoldScheme { kContiguous, kSeededRandom };

// `folds` disjoint groups of reps/folds repetition indices (0-based).
std::vector<std::vector<int>> make_folds(int reps = 15, int folds = 5,
                                         FoldScheme scheme = FoldScheme::kContiguous,
                                         std::uint64_t seed = 0);

struct CvReport {
  models::ModelForm form;
  std::vector<double> fold_rmse;
  double mean_rmse = 0.0;
  std::vector<std::vector<int>> folds;
};

// For every fold, fits on the per-cell means of the training repetitions
// and scores RMSE against the per-cell means of the held-out ones.
CvReport cross_validate(std::span<const RepetitionCell> cells, const models::ModelForm& form,
                        const std::vector<std::vector<int>>& folds);

struct RankEntry {
  std::size_t fit_index = 0;
  std::string label;
  double aic = 0.0;
  double delta_aic = 0.0;
  int rank = 0;
  bool comparable = false;  // within 2 AIC units of the best
  bool valid = false;       // within 10 AIC units of the best
};

// Ascending AIC; ties go to fewer coefficients, then to the label.
std::vector<RankEntry> rank_models(std::span<const FitResult> fits);

// The eight forms with an intercept, followed by the NL and LIU refits
// without one when `include_refits` is set.
std::vector<models::ModelForm> standard_forms(bool include_refits = true);

struct FitBatch {
  std::vector<FitResult> fits;
  std::vector<RankEntry> ranking;
  std::vector<std::string> failures;  // "LABEL: reason" for forms that failed
};

// Fits every form the features support and ranks the successes.
FitBatch fit_all(std::span<const models::TrialFeatures> features,
                 std::span<const models::ModelForm> forms);

}  // namespace steerlab::fitting
