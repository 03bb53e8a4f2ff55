#pragma once

// Repeated-measures ANOVA with Greenhouse-Geisser correction and the power
// law of practice.

#include <cstddef>
#include <string>
#include <vector>

namespace steerlab::inference {

// Balanced two-factor within-subjects design. `values` is indexed
// [participant][level_a][level_b] in row-major order.
struct RmDataset {
  std::size_t participants = 0;
  std::size_t levels_a = 3;
  std::size_t levels_b = 3;
  std::string name_a = "L";
  std::string name_b = "K";
  std::vector<double> values;

  double at(std::size_t p, std::size_t a, std::size_t b) const {
    return values[(p * levels_a + a) * levels_b + b];
  }
  double& at(std::size_t p, std::size_t a, std::size_t b) {
    return values[(p * levels_a + a) * levels_b + b];
  }
  void validate() const;
};

struct AnovaEffect {
  std::string effect;
  double ss_effect = 0.0;
  double ss_error = 0.0;
  double df_effect = 0.0;  // uncorrected
  double df_error = 0.0;   // uncorrected
  double F = 0.0;
  double gg_epsilon = 1.0;
  double p = 1.0;  // with epsilon-scaled degrees of freedom
  double p_uncorrected = 1.0;
  double partial_eta_sq = 0.0;
  bool degenerate = false;
};

struct AnovaReport {
  std::vector<AnovaEffect> effects;
  double ss_subjects = 0.0;
  double ss_within = 0.0;  // total within-subject sum of squares
  std::vector<std::string> warnings;

  const AnovaEffect& effect(const std::string& name) const;
};

// Effects A, B and AxB (named from the dataset, e.g. "L", "K", "LxK").
// Throws ShapeError for unbalanced input and InsufficientDataError for
// fewer than 2 participants. A zero error term with a nonzero effect gives
// F = +infinity and a warning.
AnovaReport rm_anova(const RmDataset& data);

// One-factor within-subjects ANOVA; `values` is [participant][level].
AnovaReport rm_anova_oneway(const std::vector<std::vector<double>>& values,
                            const std::string& name = "condition");

// Greenhouse-Geisser epsilon of the covariance `s` (q x q, row-major) of
// orthonormal contrast scores.
double gg_epsilon(const std::vector<double>& s, std::size_t q);

// MT(n) = a (n + 1)^-b, fitted as ln MT = ln a - b ln(n + 1) with n the
// 0-based completed-trial index.
struct PowerLawFit {
  double a = 0.0;
  double b = 0.0;
  double se_ln_a = 0.0;
  double se_b = 0.0;
  double rss_log = 0.0;
  std::size_t n_points = 0;
};

// Throws DomainError for non-positive MT and InsufficientDataError for
// fewer than 3 points.
PowerLawFit fit_power_law_of_practice(const std::vector<double>& mt);

}  // namespace steerlab::inference
