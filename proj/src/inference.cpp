#include "steerlab/inference.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/fisher_f.hpp>
#include <cmath>
#include <limits>

#include "steerlab/errors.hpp"
#include "steerlab/fitting.hpp"

namespace steerlab::inference {

namespace {

constexpr double kDegenerateRelative = 1e-14;

// Orthonormal Helmert contrasts, k x (k-1).
Eigen::MatrixXd helmert(std::size_t k) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1));
  for (std::size_t j = 1; j < k; ++j) {
    const double norm = std::sqrt(static_cast<double>(j * (j + 1)));
    for (std::size_t i = 0; i < j; ++i) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1)) = 1.0 / norm;
    c(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j - 1)) = -static_cast<double>(j) / norm;
  }
  return c;
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// y: participants x cells; m: cells x q orthonormal contrast.
AnovaEffect contrast_effect(const std::string& name, const Eigen::MatrixXd& y,
                            const Eigen::MatrixXd& m, double ss_within,
                            std::vector<std::string>& warnings) {
  const Eigen::MatrixXd z = y * m;
  const auto n = static_cast<double>(z.rows());
  const auto q = static_cast<std::size_t>(z.cols());
  const Eigen::RowVectorXd mean = z.colwise().mean();
  const Eigen::MatrixXd centered = z.rowwise() - mean;
  const Eigen::MatrixXd cross = centered.transpose() * centered;

  AnovaEffect e;
  e.effect = name;
  e.ss_effect = n * mean.squaredNorm();
  e.ss_error = cross.trace();
  e.df_effect = static_cast<double>(q);
  e.df_error = static_cast<double>(q) * (n - 1.0);

  const Eigen::MatrixXd s = cross / (n - 1.0);
  e.gg_epsilon = gg_epsilon({s.data(), s.data() + s.size()}, q);

  // Contrasts of constant data leave rounding residue of order eps^2 |y|^2.
  const double floor = std::max(kDegenerateRelative * ss_within, 1e-24 * y.squaredNorm());
  const bool no_error = e.ss_error <= floor;
  const bool no_effect = e.ss_effect <= floor;
  if (no_error && no_effect) {
    e.degenerate = true;
    e.F = 0.0;
    e.p = e.p_uncorrected = 1.0;
    e.partial_eta_sq = 0.0;
    return e;
  }
  if (no_error) {
    e.degenerate = true;
    e.F = std::numeric_limits<double>::infinity();
    e.p = e.p_uncorrected = 0.0;
    e.partial_eta_sq = 1.0;
    warnings.push_back(name + ": zero error variance, F reported as +infinity");
    return e;
  }
  e.F = (e.ss_effect / e.df_effect) / (e.ss_error / e.df_error);
  e.partial_eta_sq = e.ss_effect / (e.ss_effect + e.ss_error);
  const boost::math::fisher_f raw(e.df_effect, e.df_error);
  e.p_uncorrected = boost::math::cdf(boost::math::complement(raw, e.F));
  const boost::math::fisher_f corrected(e.df_effect * e.gg_epsilon, e.df_error * e.gg_epsilon);
  e.p = boost::math::cdf(boost::math::complement(corrected, e.F));
  return e;
}

double within_ss(const Eigen::MatrixXd& y) {
  const Eigen::VectorXd subject_mean = y.rowwise().mean();
  return (y.colwise() - subject_mean).squaredNorm();
}

double subjects_ss(const Eigen::MatrixXd& y) {
  const Eigen::VectorXd subject_mean = y.rowwise().mean();
  const double grand = y.mean();
  return static_cast<double>(y.cols()) * (subject_mean.array() - grand).square().sum();
}

}  // namespace

void RmDataset::validate() const {
  if (levels_a < 2 || levels_b < 2) throw ShapeError("each factor needs at least 2 levels");
  if (values.size() != participants * levels_a * levels_b) {
    throw ShapeError("dataset holds " + std::to_string(values.size()) + " values, expected " +
                     std::to_string(participants * levels_a * levels_b));
  }
  if (participants < 2) throw InsufficientDataError("repeated-measures ANOVA needs >= 2 participants");
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("dataset contains a non-finite value");
  }
}

const AnovaEffect& AnovaReport::effect(const std::string& name) const {
  for (const auto& e : effects) {
    if (e.effect == name) return e;
  }
  throw ReferenceError("no effect named " + name);
}

double gg_epsilon(const std::vector<double>& s, std::size_t q) {
  if (s.size() != q * q || q == 0) throw ShapeError("covariance must be q x q");
  if (q == 1) return 1.0;
  const Eigen::Map<const Eigen::MatrixXd> m(s.data(), static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
  const double tr = m.trace();
  const double tr2 = (m * m).trace();
  if (!(tr2 > 0.0)) return 1.0;
  const double eps = tr * tr / (static_cast<double>(q) * tr2);
  return std::clamp(eps, 1.0 / static_cast<double>(q), 1.0);
}

AnovaReport rm_anova(const RmDataset& data) {
  data.validate();
  const auto n = static_cast<Eigen::Index>(data.participants);
  const auto cells = static_cast<Eigen::Index>(data.levels_a * data.levels_b);
  Eigen::MatrixXd y(n, cells);
  for (Eigen::Index p = 0; p < n; ++p) {
    for (Eigen::Index c = 0; c < cells; ++c) y(p, c) = data.values[static_cast<std::size_t>(p * cells + c)];
  }

  // Cell index is a * levels_b + b, so A contrasts act on the left factor.
  const Eigen::MatrixXd ca = helmert(data.levels_a);
  const Eigen::MatrixXd cb = helmert(data.levels_b);
  const Eigen::MatrixXd ua = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(data.levels_a),
                                                       1.0 / std::sqrt(static_cast<double>(data.levels_a)));
  const Eigen::MatrixXd ub = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(data.levels_b),
                                                       1.0 / std::sqrt(static_cast<double>(data.levels_b)));

  AnovaReport report;
  report.ss_within = within_ss(y);
  report.ss_subjects = subjects_ss(y);
  report.effects.push_back(contrast_effect(data.name_a, y, kron(ca, ub), report.ss_within, report.warnings));
  report.effects.push_back(contrast_effect(data.name_b, y, kron(ua, cb), report.ss_within, report.warnings));
  report.effects.push_back(contrast_effect(data.name_a + "x" + data.name_b, y, kron(ca, cb),
                                           report.ss_within, report.warnings));
  return report;
}

AnovaReport rm_anova_oneway(const std::vector<std::vector<double>>& values, const std::string& name) {
  if (values.size() < 2) throw InsufficientDataError("repeated-measures ANOVA needs >= 2 participants");
  const std::size_t k = values.front().size();
  if (k < 2) throw ShapeError("factor needs at least 2 levels");
  Eigen::MatrixXd y(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(k));
  for (std::size_t p = 0; p < values.size(); ++p) {
    if (values[p].size() != k) throw ShapeError("participant " + std::to_string(p) + " has missing levels");
    for (std::size_t j = 0; j < k; ++j) {
      if (!std::isfinite(values[p][j])) throw ValidationError("non-finite value");
      y(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = values[p][j];
    }
  }
  AnovaReport report;
  report.ss_within = within_ss(y);
  report.ss_subjects = subjects_ss(y);
  report.effects.push_back(contrast_effect(name, y, helmert(k), report.ss_within, report.warnings));
  return report;
}

PowerLawFit fit_power_law_of_practice(const std::vector<double>& mt) {
  if (mt.size() < 3) throw InsufficientDataError("power law fit needs >= 3 points");
  const auto n = static_cast<Eigen::Index>(mt.size());
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = mt[static_cast<std::size_t>(i)];
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("MT values must be positive");
    x(i, 0) = 1.0;
    x(i, 1) = std::log(static_cast<double>(i) + 1.0);
    y[i] = std::log(v);
  }
  const fitting::FitResult fit = fitting::fit_linear(x, y);
  PowerLawFit out;
  out.a = std::exp(fit.coefficients[0]);
  out.b = -fit.coefficients[1];
  out.se_ln_a = fit.standard_errors[0];
  out.se_b = fit.standard_errors[1];
  out.rss_log = fit.rss;
  out.n_points = mt.size();
  return out;
}

}  // namespace steerlab::inference
