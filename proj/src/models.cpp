#include "steerlab/models.hpp"

#include <array>
#include <cmath>
#include <string>

#include "steerlab/errors.hpp"

namespace steerlab::models {

namespace {

constexpr std::array kForms = {FormId::kSlBase, FormId::kAddK,  FormId::kAddLogK,
                               FormId::kNl,     FormId::kYm,    FormId::kLiu,
                               FormId::kCompK,  FormId::kCompLogK};

double log2k(double k) { return std::log2(k + 1.0); }

double nl_feature(const TrialFeatures& f) {
  if (!f.nl) throw MissingFeatureError("NL model needs the curvature^(1/3) integral");
  return *f.nl;
}

// Predictors of the forms that are linear in their coefficients, without
// the leading intercept column.
std::vector<double> linear_predictors(FormId id, const TrialFeatures& f) {
  switch (id) {
    case FormId::kSlBase:
      return {f.L};
    case FormId::kAddK:
      return {f.L, f.K};
    case FormId::kAddLogK:
      return {f.L, log2k(f.K)};
    case FormId::kCompK:
      return {f.L, f.K, f.L * f.K};
    case FormId::kCompLogK:
      return {f.L, log2k(f.K), f.L * f.K};
    case FormId::kNl:
      return {f.L * nl_feature(f)};
    case FormId::kLiu:
      return {std::log10(f.L), f.K / f.L};
    case FormId::kYm:
      break;
  }
  throw ValidationError("form has no linear design row");
}

double ym_value(double a, double b, double c, const TrialFeatures& f) {
  const double denom = f.L + c * f.K;
  if (!(denom > 0.0)) {
    throw EvaluationError("YM denominator L + c K is not positive");
  }
  return a + b * f.L * f.L / denom;
}

}  // namespace

std::string_view to_string(FormId id) {
  switch (id) {
    case FormId::kSlBase: return "SL_BASE";
    case FormId::kAddK: return "ADD_K";
    case FormId::kAddLogK: return "ADD_LOGK";
    case FormId::kNl: return "NL";
    case FormId::kYm: return "YM";
    case FormId::kLiu: return "LIU";
    case FormId::kCompK: return "COMP_K";
    case FormId::kCompLogK: return "COMP_LOGK";
  }
  return "?";
}

FormId form_from_string(std::string_view name) {
  for (FormId id : kForms) {
    if (to_string(id) == name) return id;
  }
  throw ParseError("unknown model form '" + std::string(name) + "'");
}

std::span<const FormId> all_forms() { return kForms; }

std::string label(const ModelForm& form) {
  std::string s(to_string(form.id));
  if (!form.intercept) s += "/no-intercept";
  return s;
}

void TrialFeatures::validate() const {
  if (!(L > 0.0) || !std::isfinite(L)) throw ValidationError("L must be positive");
  if (!(K >= 0.0) || !std::isfinite(K)) throw ValidationError("K must be non-negative");
  if (nl && !std::isfinite(*nl)) throw ValidationError("nl must be finite");
  if (mt_mean && !(*mt_mean > 0.0)) throw ValidationError("MT must be positive");
}

std::size_t coefficient_count(const ModelForm& form) {
  std::size_t n = 0;
  switch (form.id) {
    case FormId::kSlBase: n = 2; break;
    case FormId::kAddK:
    case FormId::kAddLogK:
    case FormId::kYm:
    case FormId::kLiu: n = 3; break;
    case FormId::kNl: n = 2; break;
    case FormId::kCompK:
    case FormId::kCompLogK: n = 4; break;
  }
  return form.intercept ? n : n - 1;
}

std::vector<std::string> coefficient_names(const ModelForm& form) {
  static const std::array<std::string, 4> names = {"a", "b", "c", "d"};
  const std::size_t n = coefficient_count(form);
  const std::size_t first = form.intercept ? 0 : 1;
  return {names.begin() + first, names.begin() + first + n};
}

bool requires_nl(const ModelForm& form) { return form.id == FormId::kNl; }

void validate_form(const ModelForm& form) {
  if (form.id == FormId::kYm && !form.intercept) {
    throw ValidationError("YM is only defined with an intercept");
  }
}

double predict(const ModelForm& form, const Coefficients& coef, const TrialFeatures& f) {
  validate_form(form);
  f.validate();
  if (coef.values.size() != coefficient_count(form)) {
    throw ValidationError("coefficient count does not match " + label(form));
  }
  const auto& v = coef.values;
  if (form.id == FormId::kYm) return ym_value(v[0], v[1], v[2], f);

  const std::vector<double> x = linear_predictors(form.id, f);
  double eta = 0.0;
  std::size_t j = 0;
  if (form.intercept) eta += v[j++];
  for (double xi : x) eta += v[j++] * xi;
  return form.id == FormId::kLiu ? std::pow(10.0, eta) : eta;
}

DesignRow design_row(const ModelForm& form, const TrialFeatures& f) {
  validate_form(form);
  f.validate();
  if (form.id == FormId::kYm) {
    if (!f.mt_mean) throw MissingFeatureError("YM residual needs an observed MT");
    const double mt = *f.mt_mean;
    return NonlinearRow{[f, mt](std::span<const double> theta) {
      return mt - ym_value(theta[0], theta[1], theta[2], f);
    }};
  }
  LinearRow row;
  if (form.intercept) row.predictors.push_back(1.0);
  for (double x : linear_predictors(form.id, f)) row.predictors.push_back(x);
  row.target = form.id == FormId::kLiu ? Target::kLog10Mt : Target::kMt;
  return row;
}

std::vector<CatalogEntry> catalog() {
  return {
      {FormId::kSlBase, "MT = a + b*L", {"L"}},
      {FormId::kAddK, "MT = a + b*L + c*K", {"L", "K"}},
      {FormId::kAddLogK, "MT = a + b*L + c*log2(K+1)", {"L", "K"}},
      {FormId::kNl, "MT = a + b*L*integral(|kappa|^(1/3) ds)", {"L", "nl"}},
      {FormId::kYm, "MT = a + b*L^2/(L + c*K)", {"L", "K"}},
      {FormId::kLiu, "MT = 10^(a + b*log10(L) + c*K/L)", {"L", "K"}},
      {FormId::kCompK, "MT = a + b*L + c*K + d*L*K", {"L", "K"}},
      {FormId::kCompLogK, "MT = a + b*L + c*log2(K+1) + d*L*K", {"L", "K"}},
  };
}

}  // namespace steerlab::models
