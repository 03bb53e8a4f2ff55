#include "steerlab/fitting.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "steerlab/errors.hpp"
#include "steerlab/random.hpp"

namespace steerlab::fitting {

namespace {

using models::FormId;
using models::ModelForm;
using models::TrialFeatures;

// (A'A)^-1 for a full-column-rank A, computed from a QR of the
// column-normalized matrix. Throws SingularDesignError on rank loss.
Eigen::MatrixXd inverse_normal_matrix(const Eigen::MatrixXd& a) {
  const Eigen::Index p = a.cols();
  Eigen::VectorXd scale = a.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(scale[j] > 0.0)) throw SingularDesignError("design column " + std::to_string(j) + " is zero");
  }
  const Eigen::MatrixXd scaled = a * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) throw SingularDesignError("design matrix is rank deficient");
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd rinv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd cov_perm = rinv * rinv.transpose();
  const Eigen::MatrixXd cov = qr.colsPermutation() * cov_perm * qr.colsPermutation().transpose();
  return scale.cwiseInverse().asDiagonal() * cov * scale.cwiseInverse().asDiagonal();
}

double centered_tss(const Eigen::VectorXd& y) {
  const double mean = y.mean();
  return (y.array() - mean).square().sum();
}

// Fills inference and quality fields from the estimate, the Jacobian (or
// design) at the estimate and the residuals on the fitted scale.
void finish(FitResult& fit, const std::vector<double>& theta, const Eigen::MatrixXd& jacobian,
            const Eigen::VectorXd& residuals, const Eigen::VectorXd& y, bool intercept) {
  const std::size_t n = static_cast<std::size_t>(y.size());
  const std::size_t p = theta.size();
  fit.n_points = n;
  fit.coefficients = theta;
  fit.rss = residuals.squaredNorm();
  fit.tss = centered_tss(y);
  if (fit.tss > 0.0) {
    fit.r2 = 1.0 - fit.rss / fit.tss;
    fit.r2_adjusted = adjusted_r2(fit.rss, fit.tss, n, intercept ? p - 1 : p, intercept);
  } else {
    fit.r2 = fit.r2_adjusted = std::numeric_limits<double>::quiet_NaN();
    fit.warnings.push_back("targets are constant: r^2 undefined");
  }
  fit.aic = aic(fit.rss, n, p);
  if (std::isinf(fit.aic)) fit.warnings.push_back("perfect fit: RSS is zero, AIC is -infinity");

  const double dof = static_cast<double>(n - p);
  const double sigma2 = fit.rss / dof;
  const Eigen::MatrixXd cov = inverse_normal_matrix(jacobian) * sigma2;
  const boost::math::students_t dist(dof);
  const double tcrit = boost::math::quantile(dist, 0.975);

  fit.standard_errors.resize(p);
  fit.ci95_low.resize(p);
  fit.ci95_high.resize(p);
  fit.p_values.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    const double se = std::sqrt(std::max(0.0, cov(j, j)));
    fit.standard_errors[j] = se;
    fit.ci95_low[j] = theta[j] - tcrit * se;
    fit.ci95_high[j] = theta[j] + tcrit * se;
    if (se > 0.0) {
      const double t = std::abs(theta[j] / se);
      fit.p_values[j] = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
    } else {
      fit.p_values[j] = theta[j] == 0.0 ? 1.0 : 0.0;
    }
  }
}

struct Dataset {
  std::vector<TrialFeatures> features;
  Eigen::VectorXd mt;
};

Dataset collect(std::span<const TrialFeatures> features) {
  Dataset d;
  d.features.assign(features.begin(), features.end());
  d.mt.resize(static_cast<Eigen::Index>(features.size()));
  for (std::size_t i = 0; i < features.size(); ++i) {
    features[i].validate();
    if (!features[i].mt_mean) throw ValidationError("feature row " + std::to_string(i) + " has no MT");
    d.mt[static_cast<Eigen::Index>(i)] = *features[i].mt_mean;
  }
  return d;
}

void check_sizes(std::size_t n, std::size_t p) {
  if (n <= p) {
    throw InsufficientDataError("need more than " + std::to_string(p) + " points, got " +
                                std::to_string(n));
  }
}

std::string trace_tail(const std::vector<double>& trace) {
  std::ostringstream os;
  os << "RSS trace:";
  const std::size_t from = trace.size() > 8 ? trace.size() - 8 : 0;
  for (std::size_t i = from; i < trace.size(); ++i) os << ' ' << trace[i];
  return os.str();
}

}  // namespace

std::string FitResult::label() const { return form ? models::label(*form) : "linear"; }

double aic(double rss, std::size_t n, std::size_t k) {
  if (n == 0) throw ValidationError("AIC needs at least one point");
  if (!(rss >= 0.0) || !std::isfinite(rss)) throw ValidationError("RSS must be finite and >= 0");
  if (rss == 0.0) return -std::numeric_limits<double>::infinity();
  const double nn = static_cast<double>(n);
  return nn * std::log(rss / nn) + nn * std::log(2.0 * std::numbers::pi) + nn +
         2.0 * static_cast<double>(k);
}

double adjusted_r2(double rss, double tss, std::size_t n, std::size_t p, bool intercept) {
  if (!(tss > 0.0)) throw ValidationError("total sum of squares must be positive");
  const std::size_t used = intercept ? p + 1 : p;
  if (n <= used) throw InsufficientDataError("adjusted r^2 undefined: n - p - 1 <= 0");
  const double r2 = 1.0 - rss / tss;
  return 1.0 - (1.0 - r2) * static_cast<double>(n - 1) / static_cast<double>(n - used);
}

const char* significance_stars(double p_value) {
  if (p_value < 0.0001) return "***";
  if (p_value < 0.001) return "**";
  if (p_value < 0.05) return "*";
  return "";
}

FitResult fit_linear(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets,
                     bool has_intercept) {
  const auto n = static_cast<std::size_t>(design.rows());
  const auto p = static_cast<std::size_t>(design.cols());
  if (targets.size() != design.rows()) throw ShapeError("design rows and targets differ");
  if (p == 0) throw ValidationError("design has no columns");
  check_sizes(n, p);

  // Column scaling keeps the pivoting meaningful when L*K and the
  // intercept differ by orders of magnitude.
  Eigen::VectorXd scale = design.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < design.cols(); ++j) {
    if (!(scale[j] > 0.0)) throw SingularDesignError("design column is zero");
  }
  const Eigen::MatrixXd scaled = design * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  if (static_cast<std::size_t>(qr.rank()) < p) throw SingularDesignError("design matrix is rank deficient");
  const Eigen::VectorXd beta = scale.cwiseInverse().asDiagonal() * qr.solve(targets);

  FitResult fit;
  const Eigen::VectorXd residuals = targets - design * beta;
  finish(fit, {beta.data(), beta.data() + beta.size()}, design, residuals, targets, has_intercept);
  fit.names.clear();
  for (std::size_t j = 0; j < p; ++j) fit.names.push_back("x" + std::to_string(j));
  return fit;
}

NlsSolution gauss_newton(const NlsEvaluate& evaluate, std::span<const double> init,
                         std::size_t n_points, const NlsOptions& opts) {
  const auto p = static_cast<Eigen::Index>(init.size());
  const auto n = static_cast<Eigen::Index>(n_points);
  Eigen::VectorXd theta = Eigen::Map<const Eigen::VectorXd>(init.data(), p);
  Eigen::VectorXd r(n), r_try(n);
  Eigen::MatrixXd J(n, p), J_try(n, p);
  evaluate({theta.data(), static_cast<std::size_t>(p)}, r, J);
  double rss = r.squaredNorm();

  NlsSolution sol;
  double lambda = 1e-3;
  bool converged = rss == 0.0;
  int it = 0;
  for (; it < opts.max_iterations && !converged; ++it) {
    const Eigen::VectorXd grad = J.transpose() * r;
    if (grad.norm() < opts.gradient_tolerance) {
      converged = true;
      break;
    }
    Eigen::VectorXd d = J.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < p; ++j) d[j] = std::max(d[j], 1e-12);

    bool accepted = false;
    while (!accepted) {
      // min |r - J delta|^2 + lambda |D delta|^2 via the stacked system.
      Eigen::MatrixXd a(n + p, p);
      a.topRows(n) = J;
      a.bottomRows(p) = (std::sqrt(lambda) * d).asDiagonal();
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + p);
      rhs.head(n) = r;
      const Eigen::VectorXd delta = a.colPivHouseholderQr().solve(rhs);
      const Eigen::VectorXd candidate = theta + delta;

      bool ok = candidate.allFinite();
      if (ok) {
        try {
          evaluate({candidate.data(), static_cast<std::size_t>(p)}, r_try, J_try);
        } catch (const EvaluationError&) {
          ok = false;
        }
      }
      const double rss_try = ok ? r_try.squaredNorm() : INFINITY;
      if (ok && std::isfinite(rss_try) && rss_try <= rss) {
        const double rel = (rss - rss_try) / std::max(rss, std::numeric_limits<double>::min());
        theta = candidate;
        r = r_try;
        J = J_try;
        rss = rss_try;
        sol.trace.push_back(rss);
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        if (rel < opts.rel_rss_tolerance || rss == 0.0) converged = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e20) {
          // No descent direction left: stationary to machine precision.
          converged = true;
          break;
        }
      }
    }
  }
  if (!converged) {
    throw NonConvergenceError("Gauss-Newton did not converge in " +
                              std::to_string(opts.max_iterations) + " iterations; " +
                              trace_tail(sol.trace));
  }
  sol.theta.assign(theta.data(), theta.data() + p);
  sol.rss = rss;
  sol.iterations = it;
  sol.jacobian = J;
  return sol;
}

FitResult fit_nonlinear_ym(std::span<const TrialFeatures> features,
                           std::span<const double> targets,
                           std::optional<models::Coefficients> init, const NlsOptions& opts) {
  const std::size_t n = features.size();
  if (targets.size() != n) throw ShapeError("features and targets differ in length");
  if (n <= 3) throw InsufficientDataError("YM needs more than 3 points");
  for (const auto& f : features) f.validate();

  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) y[static_cast<Eigen::Index>(i)] = targets[i];

  std::vector<double> start;
  if (init) {
    if (init->values.size() != 3) throw ValidationError("YM init needs (a, b, c)");
    start = init->values;
  } else {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
      x(static_cast<Eigen::Index>(i), 0) = 1.0;
      x(static_cast<Eigen::Index>(i), 1) = features[i].L;
    }
    const FitResult base = fit_linear(x, y);
    start = {base.coefficients[0], base.coefficients[1], 0.0};
  }

  auto evaluate = [&](std::span<const double> th, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& f = features[i];
      const double denom = f.L + th[2] * f.K;
      if (!(denom > 0.0)) throw EvaluationError("YM denominator crossed zero");
      const double ratio = f.L * f.L / denom;
      const auto ii = static_cast<Eigen::Index>(i);
      r[ii] = y[ii] - (th[0] + th[1] * ratio);
      J(ii, 0) = 1.0;
      J(ii, 1) = ratio;
      J(ii, 2) = -th[1] * ratio * f.K / denom;
    }
  };
  const NlsSolution sol = gauss_newton(evaluate, start, n, opts);

  FitResult fit;
  fit.form = ModelForm{FormId::kYm, true};
  Eigen::VectorXd r(static_cast<Eigen::Index>(n));
  Eigen::MatrixXd J(static_cast<Eigen::Index>(n), 3);
  evaluate(sol.theta, r, J);
  finish(fit, sol.theta, J, r, y, true);
  fit.names = models::coefficient_names(*fit.form);
  fit.iterations = sol.iterations;
  return fit;
}

FitResult fit_liu(std::span<const TrialFeatures> features, std::span<const double> targets_mt,
                  bool intercept, const NlsOptions& opts) {
  const std::size_t n = features.size();
  if (targets_mt.size() != n) throw ShapeError("features and targets differ in length");
  const ModelForm form{FormId::kLiu, intercept};
  const std::size_t p = models::coefficient_count(form);
  check_sizes(n, p);

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n)), logy(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    features[i].validate();
    if (!(targets_mt[i] > 0.0)) throw DomainError("LIU needs positive MT values");
    const auto ii = static_cast<Eigen::Index>(i);
    const auto row = std::get<models::LinearRow>(models::design_row(form, features[i]));
    for (std::size_t j = 0; j < p; ++j) x(ii, static_cast<Eigen::Index>(j)) = row.predictors[j];
    y[ii] = targets_mt[i];
    logy[ii] = std::log10(targets_mt[i]);
  }

  const FitResult log_fit = fit_linear(x, logy, intercept);

  auto evaluate = [&](std::span<const double> th, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double eta = 0.0;
      for (Eigen::Index j = 0; j < x.cols(); ++j) eta += th[static_cast<std::size_t>(j)] * x(i, j);
      const double f = std::pow(10.0, eta);
      if (!std::isfinite(f)) throw EvaluationError("LIU prediction overflowed");
      r[i] = y[i] - f;
      for (Eigen::Index j = 0; j < x.cols(); ++j) J(i, j) = f * std::numbers::ln10 * x(i, j);
    }
  };
  const NlsSolution sol = gauss_newton(evaluate, log_fit.coefficients, n, opts);

  FitResult fit;
  fit.form = form;
  Eigen::VectorXd r(static_cast<Eigen::Index>(n));
  Eigen::MatrixXd J(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  evaluate(sol.theta, r, J);
  finish(fit, sol.theta, J, r, y, intercept);
  fit.names = models::coefficient_names(form);
  fit.iterations = sol.iterations;
  fit.log_scale = LogScaleFit{log_fit.coefficients, log_fit.rss, log_fit.r2_adjusted};
  return fit;
}

FitResult fit_model(const ModelForm& form, std::span<const TrialFeatures> features) {
  models::validate_form(form);
  const Dataset d = collect(features);
  const std::span<const double> mt(d.mt.data(), static_cast<std::size_t>(d.mt.size()));
  if (form.id == FormId::kYm) return fit_nonlinear_ym(d.features, mt);
  if (form.id == FormId::kLiu) return fit_liu(d.features, mt, form.intercept);

  const std::size_t n = d.features.size();
  const std::size_t p = models::coefficient_count(form);
  check_sizes(n, p);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = std::get<models::LinearRow>(models::design_row(form, d.features[i]));
    for (std::size_t j = 0; j < p; ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row.predictors[j];
    }
  }
  FitResult fit = fit_linear(x, d.mt, form.intercept);
  fit.form = form;
  fit.names = models::coefficient_names(form);
  return fit;
}

std::vector<std::vector<int>> make_folds(int reps, int folds, FoldScheme scheme, std::uint64_t seed) {
  if (folds < 2 || reps < folds || reps % folds != 0) {
    throw ValidationError("repetitions must split evenly into >= 2 folds");
  }
  std::vector<int> order(static_cast<std::size_t>(reps));
  std::iota(order.begin(), order.end(), 0);
  if (scheme == FoldScheme::kSeededRandom) Rng(seed).shuffle(order.begin(), order.end());
  const int per = reps / folds;
  std::vector<std::vector<int>> out(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    out[static_cast<std::size_t>(f)].assign(order.begin() + f * per, order.begin() + (f + 1) * per);
    std::sort(out[static_cast<std::size_t>(f)].begin(), out[static_cast<std::size_t>(f)].end());
  }
  return out;
}

CvReport cross_validate(std::span<const RepetitionCell> cells, const ModelForm& form,
                        const std::vector<std::vector<int>>& folds) {
  if (cells.empty()) throw ShapeError("no cells to cross-validate");
  std::size_t reps = 0;
  for (const auto& f : folds) reps += f.size();
  std::vector<int> seen(reps, 0);
  for (const auto& f : folds) {
    if (f.empty()) throw ShapeError("empty fold");
    for (int r : f) {
      if (r < 0 || static_cast<std::size_t>(r) >= reps || seen[static_cast<std::size_t>(r)]++) {
        throw ShapeError("folds do not partition the repetitions");
      }
    }
  }
  for (const auto& c : cells) {
    if (c.mt_reps.size() != reps) {
      throw ShapeError(c.trial_id + ": expected " + std::to_string(reps) + " repetitions, got " +
                       std::to_string(c.mt_reps.size()));
    }
  }

  CvReport report;
  report.form = form;
  report.folds = folds;
  for (const auto& fold : folds) {
    std::vector<char> held(reps, 0);
    for (int r : fold) held[static_cast<std::size_t>(r)] = 1;
    std::vector<TrialFeatures> train;
    std::vector<double> test;
    for (const auto& c : cells) {
      double tr = 0.0, te = 0.0;
      for (std::size_t r = 0; r < reps; ++r) (held[r] ? te : tr) += c.mt_reps[r];
      TrialFeatures f = c.features;
      f.mt_mean = tr / static_cast<double>(reps - fold.size());
      train.push_back(f);
      test.push_back(te / static_cast<double>(fold.size()));
    }
    const FitResult fit = fit_model(form, train);
    double sse = 0.0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const double e = models::predict(form, fit.coef(), train[i]) - test[i];
      sse += e * e;
    }
    report.fold_rmse.push_back(std::sqrt(sse / static_cast<double>(cells.size())));
  }
  report.mean_rmse = std::accumulate(report.fold_rmse.begin(), report.fold_rmse.end(), 0.0) /
                     static_cast<double>(report.fold_rmse.size());
  return report;
}

std::vector<RankEntry> rank_models(std::span<const FitResult> fits) {
  if (fits.empty()) throw ValidationError("nothing to rank");
  for (const auto& f : fits) {
    if (f.n_points != fits.front().n_points) {
      throw IncomparableError("fits use different numbers of points");
    }
  }
  std::vector<std::size_t> order(fits.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& fa = fits[a];
    const auto& fb = fits[b];
    if (fa.aic != fb.aic) return fa.aic < fb.aic;
    if (fa.coefficients.size() != fb.coefficients.size()) {
      return fa.coefficients.size() < fb.coefficients.size();
    }
    return fa.label() < fb.label();
  });
  const double best = fits[order.front()].aic;
  std::vector<RankEntry> out;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& f = fits[order[r]];
    RankEntry e;
    e.fit_index = order[r];
    e.label = f.label();
    e.aic = f.aic;
    e.delta_aic = std::isinf(best) ? (f.aic == best ? 0.0 : INFINITY) : f.aic - best;
    e.rank = static_cast<int>(r) + 1;
    e.comparable = e.delta_aic <= 2.0;
    e.valid = e.delta_aic <= 10.0;
    out.push_back(e);
  }
  return out;
}

std::vector<ModelForm> standard_forms(bool include_refits) {
  std::vector<ModelForm> forms;
  for (FormId id : models::all_forms()) forms.push_back({id, true});
  if (include_refits) {
    forms.push_back({FormId::kNl, false});
    forms.push_back({FormId::kLiu, false});
  }
  return forms;
}

FitBatch fit_all(std::span<const TrialFeatures> features, std::span<const ModelForm> forms) {
  FitBatch batch;
  for (const ModelForm& form : forms) {
    try {
      batch.fits.push_back(fit_model(form, features));
    } catch (const Error& e) {
      batch.failures.push_back(models::label(form) + ": " + e.what());
    }
  }
  if (!batch.fits.empty()) batch.ranking = rank_models(batch.fits);
  return batch;
}

}  // namespace steerlab::fitting
