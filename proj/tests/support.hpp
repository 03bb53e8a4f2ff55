#pragma once

// Fixtures and independent oracles shared by the unit tests and the
// acceptance runner. Oracles here deliberately avoid the library's own
// code paths (no Helmert contrasts, no segment index, no trapezoid rule).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "steerlab/curvegen.hpp"
#include "steerlab/geometry.hpp"
#include "steerlab/inference.hpp"
#include "steerlab/metrics.hpp"
#include "steerlab/models.hpp"
#include "steerlab/random.hpp"

namespace steerlab::testing {

// Reference per-trial mean movement times with the matching L and K.
inline std::vector<models::TrialFeatures> reference_means() {
  struct Row {
    double L, K, mt;
  };
  static constexpr Row rows[] = {
      {1502, 10, 11932.85}, {1498, 16, 13084.73}, {1500, 22, 14809.09},
      {1885, 10, 15867.06}, {1880, 16, 17152.55}, {1882, 22, 18038.69},
      {2303, 10, 20092.95}, {2322, 16, 21704.08}, {2335, 22, 21432.13},
  };
  std::vector<models::TrialFeatures> out;
  for (const Row& r : rows) {
    models::TrialFeatures f;
    f.L = r.L;
    f.K = r.K;
    f.mt_mean = r.mt;
    out.push_back(f);
  }
  return out;
}

// Composite Simpson integration of f over [a, b] with n (even) panels.
template <typename F>
double simpson(F f, double a, double b, long n) {
  const double h = (b - a) / static_cast<double>(n);
  double sum = f(a) + f(b);
  for (long i = 1; i < n; ++i) sum += f(a + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

struct SinusoidIntegrals {
  double length = 0.0;
  double total_curvature = 0.0;
  double nl = 0.0;
};

// For a graph y(x): ds = sqrt(1 + y'^2) dx, kappa ds = |y''| / (1 + y'^2) dx
// and kappa^(1/3) ds = |y''|^(1/3) dx.
inline SinusoidIntegrals sinusoid_oracle(const curvegen::SinusoidSpec& spec, long panels = 1'000'000) {
  const double amp = spec.amplitude / static_cast<double>(spec.components());
  const double phi = spec.periods * 2.0 * std::numbers::pi / spec.x_max;
  auto d1 = [&](double x) {
    double v = 0.0;
    for (int m : spec.angle_multipliers) v += amp * m * phi * std::cos(m * phi * x);
    return v;
  };
  auto d2 = [&](double x) {
    double v = 0.0;
    for (int m : spec.angle_multipliers) v -= amp * m * m * phi * phi * std::sin(m * phi * x);
    return v;
  };
  SinusoidIntegrals r;
  r.length = simpson([&](double x) { return std::sqrt(1.0 + d1(x) * d1(x)); }, 0.0, spec.x_max, panels);
  r.total_curvature =
      simpson([&](double x) { return std::abs(d2(x)) / (1.0 + d1(x) * d1(x)); }, 0.0, spec.x_max, panels);
  r.nl = simpson([&](double x) { return std::cbrt(std::abs(d2(x))); }, 0.0, spec.x_max, panels);
  return r;
}

// Distance from p to the closed segment ab.
inline double segment_distance(geometry::Point p, geometry::Point a, geometry::Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

inline bool brute_inside(const geometry::Tunnel& tunnel, geometry::Point p) {
  const double w = tunnel.width();
  if (std::hypot(p.x - tunnel.start().x, p.y - tunnel.start().y) <= w) return true;
  if (std::hypot(p.x - tunnel.end().x, p.y - tunnel.end().y) <= w) return true;
  const auto pts = tunnel.centerline().points();
  double best = INFINITY;
  for (std::size_t i = 1; i < pts.size(); ++i) best = std::min(best, segment_distance(p, pts[i - 1], pts[i]));
  return best <= w / 2.0;
}

struct BruteMeasures {
  double opm = 0.0;
  int exits = 0;
  double speed = 0.0;
};

inline BruteMeasures brute_measures(const metrics::Trajectory& traj, const geometry::Tunnel& tunnel) {
  const double t0 = *traj.event_time(metrics::EventKind::kStartClick);
  const double t1 = *traj.event_time(metrics::EventKind::kEndClick);
  BruteMeasures m;
  std::size_t in_window = 0, outside = 0;
  double path = 0.0;
  const metrics::Sample* prev = nullptr;
  bool prev_inside = false;
  for (const metrics::Sample& s : traj.samples) {
    if (s.t < t0 || s.t > t1) continue;
    const bool inside = brute_inside(tunnel, {s.x, s.y});
    ++in_window;
    outside += !inside;
    if (prev) {
      path += std::hypot(s.x - prev->x, s.y - prev->y);
      m.exits += prev_inside && !inside;
    }
    prev = &s;
    prev_inside = inside;
  }
  m.opm = static_cast<double>(outside) / static_cast<double>(in_window);
  m.speed = path / (t1 - t0);
  return m;
}

// Random trajectory wandering around the centerline, with start/flag/end
// events on sample times. Offsets are large enough to cross the walls.
inline metrics::Trajectory random_trajectory(const geometry::Tunnel& tunnel, Rng& rng) {
  const auto pts = tunnel.centerline().points();
  metrics::Trajectory traj;
  traj.trial_id = "rand";
  const std::size_t n = 40 + rng.index(160);
  double t = rng.uniform(0.0, 50.0);
  double lateral = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = (i * (pts.size() - 1)) / (n - 1);
    lateral = 0.8 * lateral + rng.normal(0.0, tunnel.width() * 0.4);
    traj.samples.push_back({t, pts[k].x + rng.normal(0.0, 3.0), pts[k].y + lateral});
    t += rng.uniform(1.0, 20.0);
  }
  const std::size_t a = rng.index(n / 4);
  const std::size_t b = n / 2 + rng.index(n / 4);
  const std::size_t c = n - 1 - rng.index(n / 4);
  traj.events = {{traj.samples[a].t, metrics::EventKind::kStartClick},
                 {traj.samples[b].t, metrics::EventKind::kFlagClick},
                 {traj.samples[c].t, metrics::EventKind::kEndClick}};
  return traj;
}

// Two-way within-subjects ANOVA from classic sums of squares. Sphericity
// epsilon comes from the projector onto each effect subspace applied to
// the full cell covariance, so no contrast basis is involved.
struct OracleEffect {
  double F = 0.0;
  double epsilon = 1.0;
  double eta = 0.0;
  double ss = 0.0;
  double ss_error = 0.0;
};

struct OracleAnova {
  OracleEffect a, b, ab;
};

inline OracleAnova anova_oracle(const inference::RmDataset& d) {
  const std::size_t n = d.participants, A = d.levels_a, B = d.levels_b;
  const double N = static_cast<double>(n);
  double grand = 0.0;
  for (double v : d.values) grand += v;
  grand /= static_cast<double>(d.values.size());

  std::vector<double> ma(A, 0.0), mb(B, 0.0), ms(n, 0.0), mab(A * B, 0.0), mas(n * A, 0.0), mbs(n * B, 0.0);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t i = 0; i < A; ++i)
      for (std::size_t j = 0; j < B; ++j) {
        const double v = d.at(p, i, j);
        ma[i] += v / (N * B);
        mb[j] += v / (N * A);
        ms[p] += v / static_cast<double>(A * B);
        mab[i * B + j] += v / N;
        mas[p * A + i] += v / static_cast<double>(B);
        mbs[p * B + j] += v / static_cast<double>(A);
      }

  double ss_a = 0, ss_b = 0, ss_ab = 0, ss_as = 0, ss_bs = 0, ss_abs = 0;
  for (std::size_t i = 0; i < A; ++i) ss_a += N * B * (ma[i] - grand) * (ma[i] - grand);
  for (std::size_t j = 0; j < B; ++j) ss_b += N * A * (mb[j] - grand) * (mb[j] - grand);
  for (std::size_t i = 0; i < A; ++i)
    for (std::size_t j = 0; j < B; ++j) {
      const double e = mab[i * B + j] - ma[i] - mb[j] + grand;
      ss_ab += N * e * e;
    }
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t i = 0; i < A; ++i) {
      const double e = mas[p * A + i] - ma[i] - ms[p] + grand;
      ss_as += B * e * e;
    }
    for (std::size_t j = 0; j < B; ++j) {
      const double e = mbs[p * B + j] - mb[j] - ms[p] + grand;
      ss_bs += A * e * e;
    }
    for (std::size_t i = 0; i < A; ++i)
      for (std::size_t j = 0; j < B; ++j) {
        const double e = d.at(p, i, j) - mab[i * B + j] - mas[p * A + i] - mbs[p * B + j] + ma[i] + mb[j] +
                         ms[p] - grand;
        ss_abs += e * e;
      }
  }

  const std::size_t cells = A * B;
  Eigen::MatrixXd X(n, cells);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t c = 0; c < cells; ++c) X(p, c) = d.values[p * cells + c];
  const Eigen::MatrixXd centered = X.rowwise() - X.colwise().mean();
  const Eigen::MatrixXd S = centered.transpose() * centered / (N - 1.0);

  auto centering = [](std::size_t k) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Identity(k, k) - Eigen::MatrixXd::Constant(k, k, 1.0 / k));
  };
  auto averaging = [](std::size_t k) { return Eigen::MatrixXd(Eigen::MatrixXd::Constant(k, k, 1.0 / k)); };
  auto kron = [](const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q) {
    Eigen::MatrixXd K(P.rows() * Q.rows(), P.cols() * Q.cols());
    for (Eigen::Index i = 0; i < P.rows(); ++i)
      for (Eigen::Index j = 0; j < P.cols(); ++j) K.block(i * Q.rows(), j * Q.cols(), Q.rows(), Q.cols()) = P(i, j) * Q;
    return K;
  };
  auto epsilon = [&](const Eigen::MatrixXd& P, double q) {
    const Eigen::MatrixXd M = P * S * P;
    const double tr = M.trace();
    const double tr2 = (M * M).trace();
    if (tr2 <= 0.0) return 1.0;
    return std::clamp(tr * tr / (q * tr2), 1.0 / q, 1.0);
  };

  auto effect = [&](double ss, double ss_err, double df, double df_err, double eps) {
    OracleEffect e;
    e.ss = ss;
    e.ss_error = ss_err;
    e.F = (ss / df) / (ss_err / df_err);
    e.eta = ss / (ss + ss_err);
    e.epsilon = eps;
    return e;
  };
  const double dfa = A - 1.0, dfb = B - 1.0;
  OracleAnova o;
  o.a = effect(ss_a, ss_as, dfa, dfa * (N - 1), epsilon(kron(centering(A), averaging(B)), dfa));
  o.b = effect(ss_b, ss_bs, dfb, dfb * (N - 1), epsilon(kron(averaging(A), centering(B)), dfb));
  o.ab = effect(ss_ab, ss_abs, dfa * dfb, dfa * dfb * (N - 1), epsilon(kron(centering(A), centering(B)), dfa * dfb));
  return o;
}

// Fixed 8-participant 3x3 dataset with main effects, an interaction and
// non-spherical noise; values are [participant][L][K].
inline inference::RmDataset anova_fixture() {
  inference::RmDataset d;
  d.participants = 8;
  d.values = {
      10.2, 12.9, 15.1, 13.0, 15.8, 18.9, 15.9, 19.2, 23.4,  //
      9.1,  11.7, 14.8, 12.2, 14.1, 17.7, 14.8, 18.0, 21.1,  //
      11.4, 13.0, 16.9, 14.1, 17.2, 19.8, 17.0, 21.3, 24.8,  //
      8.7,  10.9, 13.1, 11.6, 13.2, 16.4, 13.9, 16.1, 19.7,  //
      10.8, 13.8, 15.0, 13.9, 16.7, 18.1, 16.6, 20.7, 22.9,  //
      9.9,  12.1, 14.4, 12.5, 15.1, 18.8, 15.0, 18.4, 22.6,  //
      12.0, 14.2, 17.5, 15.3, 18.0, 21.2, 18.4, 22.0, 26.3,  //
      9.4,  11.3, 13.9, 11.9, 14.6, 17.0, 14.2, 17.3, 20.5,  //
  };
  return d;
}

// Additive dataset: subject + row + column effects only, so the
// interaction sum of squares vanishes.
inline inference::RmDataset additive_fixture(std::size_t participants, Rng& rng) {
  inference::RmDataset d;
  d.participants = participants;
  d.values.resize(participants * 9);
  const double row[3] = {0.0, 2.5, 6.0};
  const double col[3] = {0.0, 1.25, 4.0};
  for (std::size_t p = 0; p < participants; ++p) {
    const double subject = rng.normal(10.0, 2.0);
    const double slope_a = rng.normal(1.0, 0.3);
    const double slope_b = rng.normal(1.0, 0.3);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) d.at(p, i, j) = subject + slope_a * row[i] + slope_b * col[j];
  }
  return d;
}

}  // namespace steerlab::testing
