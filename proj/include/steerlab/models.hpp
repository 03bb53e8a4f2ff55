#pragma once

// Movement-time model catalog: the base Steering Law, the total-curvature
// extensions and the adapted curvature models from prior work.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace steerlab::models {

enum class FormId {
  kSlBase,    // a + b L
  kAddK,      // a + b L + c K
  kAddLogK,   // a + b L + c log2(K + 1)
  kNl,        // a + b L * integral(|kappa|^(1/3) ds)
  kYm,        // a + b L^2 / (L + c K)
  kLiu,       // 10^(a + b log10 L + c K / L)
  kCompK,     // a + b L + c K + d L K
  kCompLogK,  // a + b L + c log2(K + 1) + d L K
};

std::string_view to_string(FormId id);
// Throws ParseError for unknown names.
FormId form_from_string(std::string_view name);
std::span<const FormId> all_forms();

struct ModelForm {
  FormId id = FormId::kSlBase;
  bool intercept = true;

  friend bool operator==(const ModelForm&, const ModelForm&) = default;
};

// Display label, e.g. "LIU" or "LIU/no-intercept".
std::string label(const ModelForm& form);

struct TrialFeatures {
  double L = 0.0;
  double K = 0.0;
  std::optional<double> nl;
  std::optional<double> mt_mean;

  void validate() const;
};

struct Coefficients {
  std::vector<double> values;
};

// a, b, c, d in order; the no-intercept variants start at b.
std::vector<std::string> coefficient_names(const ModelForm& form);
std::size_t coefficient_count(const ModelForm& form);
bool requires_nl(const ModelForm& form);
// Throws ValidationError for unsupported combinations (YM without intercept).
void validate_form(const ModelForm& form);

// Throws MissingFeatureError, EvaluationError (YM denominator <= 0) or
// ValidationError (wrong coefficient arity).
double predict(const ModelForm& form, const Coefficients& coef, const TrialFeatures& f);

enum class Target { kMt, kLog10Mt };

struct LinearRow {
  std::vector<double> predictors;
  Target target = Target::kMt;
};

// Residual MT - model(theta) of a model that is nonlinear in its
// coefficients.
struct NonlinearRow {
  std::function<double(std::span<const double>)> residual;
};

using DesignRow = std::variant<LinearRow, NonlinearRow>;

DesignRow design_row(const ModelForm& form, const TrialFeatures& f);

struct CatalogEntry {
  FormId id;
  std::string formula;
  std::vector<std::string> required_features;
};

std::vector<CatalogEntry> catalog();

}  // namespace steerlab::models
