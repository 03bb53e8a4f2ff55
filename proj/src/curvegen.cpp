#include "steerlab/curvegen.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>

#include "steerlab/errors.hpp"

namespace steerlab::curvegen {

namespace {

// Unit-amplitude derivative profiles of one grid point. x(s) = s, so
// y'(s) = a * g1(s) and y''(s) = a * g2(s); every K(a) evaluation reuses
// the trigonometry.
class SinusoidProfile {
 public:
  SinusoidProfile(const SinusoidSpec& spec, int n) : s_(n), g1_(n), g2_(n) {
    const double phi = spec.phi();
    const double c = spec.components();
    const double h = spec.x_max / static_cast<double>(n - 1);
    for (int i = 0; i < n; ++i) {
      const double s = (i + 1 == n) ? spec.x_max : h * i;
      double d1 = 0.0, d2 = 0.0;
      for (int m : spec.angle_multipliers) {
        const double w = m * phi;
        d1 += w * std::cos(w * s);
        d2 -= w * w * std::sin(w * s);
      }
      s_[i] = s;
      g1_[i] = d1 / c;
      g2_[i] = d2 / c;
    }
  }

  struct Measures {
    double length = 0.0;
    double total_curvature = 0.0;
    double max_kappa = 0.0;
  };

  Measures measure(double a) const {
    Measures m;
    double prev_speed = 0.0, prev_k = 0.0;
    for (std::size_t i = 0; i < s_.size(); ++i) {
      const double speed = std::hypot(1.0, a * g1_[i]);
      const double kappa = std::abs(a * g2_[i]) / (speed * speed * speed);
      if (i > 0) {
        const double dt = s_[i] - s_[i - 1];
        m.length += 0.5 * (prev_speed + speed) * dt;
        m.total_curvature += 0.5 * (prev_k * prev_speed + kappa * speed) * dt;
      }
      m.max_kappa = std::max(m.max_kappa, kappa);
      prev_speed = speed;
      prev_k = kappa;
    }
    return m;
  }

 private:
  std::vector<double> s_;
  std::vector<double> g1_;
  std::vector<double> g2_;
};

double solve_with_profile(const SinusoidProfile& profile, double target_k,
                          const SolveOptions& opts) {
  if (!(target_k > 0.0) || !std::isfinite(target_k)) {
    throw ValidationError("target K must be positive");
  }
  auto K = [&](double a) { return profile.measure(a).total_curvature; };
  const double mono_eps = 1e-9 * std::max(1.0, target_k);

  double lo = 0.0, k_lo = 0.0;
  double hi = 1.0, k_hi = K(hi);
  while (k_hi < target_k) {
    if (k_hi < k_lo - mono_eps) {
      throw SolverError("K(a) decreased while bracketing", lo, hi);
    }
    if (hi >= opts.max_amplitude) {
      std::ostringstream os;
      os << "target K=" << target_k << " unreachable with amplitude <= " << opts.max_amplitude
         << " (K=" << k_hi << ")";
      throw UnreachableError(os.str());
    }
    lo = hi;
    k_lo = k_hi;
    hi = std::min(2.0 * hi, opts.max_amplitude);
    k_hi = K(hi);
  }

  const double stop = 0.1 * opts.k_tolerance;
  double mid = hi;
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double k_mid = K(mid);
    if (k_mid < k_lo - mono_eps || k_mid > k_hi + mono_eps) {
      std::ostringstream os;
      os << "K(a) not monotonic on [" << lo << ", " << hi << "]";
      throw SolverError(os.str(), lo, hi);
    }
    if (std::abs(k_mid - target_k) <= stop) return mid;
    if (k_mid < target_k) {
      lo = mid;
      k_lo = k_mid;
    } else {
      hi = mid;
      k_hi = k_mid;
    }
    if (hi - lo <= 1e-14 * std::max(1.0, hi)) break;
  }
  if (std::abs(K(mid) - target_k) > opts.k_tolerance) {
    throw SolverError("bisection stalled before reaching the K tolerance", lo, hi);
  }
  return mid;
}

}  // namespace

double SinusoidSpec::phi() const { return periods * 2.0 * std::numbers::pi / x_max; }

void SinusoidSpec::validate() const {
  if (angle_multipliers.empty()) throw ValidationError("sinusoid needs >= 1 component");
  for (int m : angle_multipliers) {
    if (m <= 0) throw ValidationError("angle multipliers must be positive integers");
  }
  if (!(periods > 0.0) || !std::isfinite(periods)) throw ValidationError("periods must be positive");
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
    throw ValidationError("amplitude must be non-negative");
  }
  if (!(x_max > 0.0) || !std::isfinite(x_max)) throw ValidationError("x_max must be positive");
}

geometry::PlaneCurve to_plane_curve(const SinusoidSpec& spec) {
  spec.validate();
  const double sign = spec.flipped ? -1.0 : 1.0;
  const double scale = sign * spec.amplitude / spec.components();
  const double phi = spec.phi();
  const std::vector<int> am = spec.angle_multipliers;

  geometry::PlaneCurve curve;
  curve.x = [](double s) { return s; };
  curve.y = [=](double s) {
    double acc = 0.0;
    for (int m : am) acc += std::sin(m * phi * s);
    return scale * acc;
  };
  geometry::CurveDerivatives d;
  d.dx = [](double) { return 1.0; };
  d.ddx = [](double) { return 0.0; };
  d.dy = [=](double s) {
    double acc = 0.0;
    for (int m : am) acc += m * phi * std::cos(m * phi * s);
    return scale * acc;
  };
  d.ddy = [=](double s) {
    double acc = 0.0;
    for (int m : am) acc -= (m * phi) * (m * phi) * std::sin(m * phi * s);
    return scale * acc;
  };
  curve.derivatives = std::move(d);
  return curve;
}

geometry::CurveSamples realize(const SinusoidSpec& spec, int n_samples) {
  return geometry::sample_curve(to_plane_curve(spec), {0.0, spec.x_max}, n_samples);
}

double solve_amplitude(const SinusoidSpec& base, double target_k, const SolveOptions& opts) {
  SinusoidSpec spec = base;
  spec.amplitude = 0.0;
  spec.validate();
  if (opts.n_samples < geometry::kMinCurveSamples) throw ValidationError("too few samples");
  return solve_with_profile(SinusoidProfile(spec, opts.n_samples), target_k, opts);
}

std::vector<LengthBand> default_length_bands() {
  return {{1500.10, 3 * 2.25}, {1882.33, 3 * 2.23}, {2319.75, 3 * 16.18}};
}

std::vector<double> default_k_targets() { return {10.0, 16.0, 22.0}; }

ParamGrid ParamGrid::combinations(int max_components, int max_multiplier,
                                  std::vector<double> periods) {
  ParamGrid grid;
  grid.periods = std::move(periods);
  std::vector<int> current;
  auto rec = [&](auto&& self, int next) -> void {
    if (!current.empty()) grid.multiplier_sets.push_back(current);
    if (static_cast<int>(current.size()) == max_components) return;
    for (int m = next; m <= max_multiplier; ++m) {
      current.push_back(m);
      self(self, m + 1);
      current.pop_back();
    }
  };
  rec(rec, 1);
  std::stable_sort(grid.multiplier_sets.begin(), grid.multiplier_sets.end(),
                   [](const auto& a, const auto& b) { return a.size() < b.size(); });
  return grid;
}

ParamGrid ParamGrid::default_grid() {
  std::vector<double> periods;
  for (int i = 0; i <= 140; ++i) periods.push_back(0.5 + 0.025 * i);
  return combinations(3, 5, std::move(periods));
}

std::string trial_id(int level_L, int level_K) {
  return "L" + std::to_string(level_L) + "-K" + std::to_string(level_K);
}

std::pair<int, int> parse_trial_id(const std::string& id) {
  int l = -1, k = -1;
  char tail = 0;
  if (std::sscanf(id.c_str(), "L%d-K%d%c", &l, &k, &tail) != 2 || l < 0 || k < 0) {
    throw ParseError("malformed trial id '" + id + "'");
  }
  if (id != trial_id(l, k)) throw ParseError("malformed trial id '" + id + "'");
  return {l, k};
}

void validate_trial(const TrialSpec& trial, double target_k, const LengthBand& band,
                    double k_tolerance) {
  trial.sinusoid.validate();
  if (std::abs(trial.total_curvature - target_k) > k_tolerance) {
    throw ValidationError(trial.trial_id + ": total curvature off target");
  }
  if (!band.contains(trial.length)) {
    throw ValidationError(trial.trial_id + ": length outside its band");
  }
  if (!(trial.width > 0.0)) throw ValidationError(trial.trial_id + ": width must be positive");
}

geometry::Tunnel make_tunnel(const TrialSpec& trial, bool flipped) {
  geometry::CurveSamples centerline =
      trial.polyline.empty() ? realize(trial.sinusoid)
                             : geometry::CurveSamples::from_polyline(trial.polyline);
  if (flipped != trial.sinusoid.flipped) centerline = centerline.flipped();
  return geometry::Tunnel(std::move(centerline), trial.width);
}

void attach_polyline(TrialSpec& trial, int points) {
  const auto samples = realize(trial.sinusoid, points);
  trial.polyline.assign(samples.points().begin(), samples.points().end());
}

GridSearchResult grid_search(const GridSearchConfig& cfg) {
  GridSearchResult result;
  const std::size_t n_sets = cfg.grid.multiplier_sets.size();
  const std::size_t n_points = cfg.grid.size();

  struct Slot {
    std::vector<TrialSpec> candidates;
    std::vector<GridDiagnostic> diagnostics;
  };
  std::vector<Slot> slots(n_points);

  auto evaluate = [&](std::size_t idx) {
    Slot& slot = slots[idx];
    SinusoidSpec spec;
    spec.angle_multipliers = cfg.grid.multiplier_sets[idx % n_sets];
    spec.periods = cfg.grid.periods[idx / n_sets];
    spec.x_max = cfg.x_max;
    SinusoidProfile profile(spec, cfg.solve.n_samples);
    for (std::size_t ki = 0; ki < cfg.k_targets.size(); ++ki) {
      const double target = cfg.k_targets[ki];
      double a = 0.0;
      try {
        a = solve_with_profile(profile, target, cfg.solve);
      } catch (const Error& e) {
        slot.diagnostics.push_back({spec.angle_multipliers, spec.periods, target, e.what()});
        continue;
      }
      const auto m = profile.measure(a);
      const double radius = m.max_kappa > 0.0 ? 1.0 / m.max_kappa : INFINITY;
      for (std::size_t li = 0; li < cfg.bands.size(); ++li) {
        if (!cfg.bands[li].contains(m.length)) continue;
        if (radius < cfg.min_radius) {
          slot.diagnostics.push_back({spec.angle_multipliers, spec.periods, target,
                                      "rejected: min radius " + std::to_string(radius) + " px"});
          continue;
        }
        TrialSpec t;
        t.level_L = static_cast<int>(li);
        t.level_K = static_cast<int>(ki);
        t.trial_id = trial_id(t.level_L, t.level_K);
        t.sinusoid = spec;
        t.sinusoid.amplitude = a;
        t.width = cfg.width;
        t.length = m.length;
        t.total_curvature = m.total_curvature;
        t.min_radius = radius;
        validate_trial(t, target, cfg.bands[li], cfg.k_tolerance);
        slot.candidates.push_back(std::move(t));
      }
    }
  };

  // Grid points are independent; results are gathered in grid order.
  const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), 16u));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n_points; i = next++) evaluate(i);
  };
  if (workers == 1 || n_points < 2) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  for (Slot& slot : slots) {
    for (auto& c : slot.candidates) {
      ++result.cell_counts[{c.level_L, c.level_K}];
      result.candidates.push_back(std::move(c));
    }
    for (auto& d : slot.diagnostics) result.diagnostics.push_back(std::move(d));
  }
  for (std::size_t li = 0; li < cfg.bands.size(); ++li) {
    for (std::size_t ki = 0; ki < cfg.k_targets.size(); ++ki) {
      if (!result.cell_counts.contains({static_cast<int>(li), static_cast<int>(ki)})) {
        result.empty_cells.push_back(trial_id(static_cast<int>(li), static_cast<int>(ki)));
      }
    }
  }
  return result;
}

std::vector<TrialSpec> assemble_trialset(const std::vector<TrialSpec>& candidates,
                                         SelectionPolicy policy, int levels_L, int levels_K) {
  (void)policy;  // only kMinLengthSpread exists
  std::map<std::pair<int, int>, std::vector<const TrialSpec*>> cells;
  for (const auto& c : candidates) cells[{c.level_L, c.level_K}].push_back(&c);

  std::vector<TrialSpec> chosen;
  for (int l = 0; l < levels_L; ++l) {
    std::vector<const std::vector<const TrialSpec*>*> groups;
    for (int k = 0; k < levels_K; ++k) {
      auto it = cells.find({l, k});
      if (it == cells.end() || it->second.empty()) {
        throw AssemblyError("no candidate for cell " + trial_id(l, k));
      }
      groups.push_back(&it->second);
    }

    std::vector<std::size_t> pick(groups.size(), 0), best(groups.size(), 0);
    double best_var = INFINITY;
    auto rec = [&](auto&& self, std::size_t g, double sum, double sumsq) -> void {
      if (g == groups.size()) {
        const double n = static_cast<double>(groups.size());
        const double var = n > 1 ? (sumsq - sum * sum / n) / (n - 1) : 0.0;
        if (var < best_var) {
          best_var = var;
          best = pick;
        }
        return;
      }
      for (std::size_t i = 0; i < groups[g]->size(); ++i) {
        pick[g] = i;
        const double len = (*groups[g])[i]->length;
        self(self, g + 1, sum + len, sumsq + len * len);
      }
    };
    rec(rec, 0, 0.0, 0.0);
    for (std::size_t g = 0; g < groups.size(); ++g) chosen.push_back(*(*groups[g])[best[g]]);
  }
  return chosen;
}

}  // namespace steerlab::curvegen
