#pragma once

// Sinusoidal tunnel family, amplitude solving for a target total curvature,
// and the grid search that fills the 3x3 length/curvature design.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "steerlab/geometry.hpp"

namespace steerlab::curvegen {

inline constexpr double kDefaultXMax = 1300.0;
inline constexpr double kDefaultWidth = 50.0;
inline constexpr int kDefaultSamples = 8192;
inline constexpr int kPolylinePoints = 2049;

// y(s) = (a / c) * sum_i sin(AM[i] * phi * s), x(s) = s, s in [0, x_max],
// phi = periods * 2 pi / x_max.
struct SinusoidSpec {
  std::vector<int> angle_multipliers;
  double periods = 1.0;
  double amplitude = 0.0;
  double x_max = kDefaultXMax;
  bool flipped = false;

  int components() const { return static_cast<int>(angle_multipliers.size()); }
  double phi() const;
  void validate() const;
};

geometry::PlaneCurve to_plane_curve(const SinusoidSpec& spec);

geometry::CurveSamples realize(const SinusoidSpec& spec, int n_samples = kDefaultSamples);

struct SolveOptions {
  int n_samples = kDefaultSamples;
  double k_tolerance = 1e-3;
  double max_amplitude = 1e4;
};

// Bisection on a in [0, a_hi] with a_hi doubled until K(a_hi) >= target.
// Throws SolverError when K(a) decreases inside the bracket and
// UnreachableError when the target needs a > max_amplitude.
double solve_amplitude(const SinusoidSpec& base, double target_k, const SolveOptions& opts = {});

struct LengthBand {
  double center = 0.0;
  double half_width = 0.0;

  double lo() const { return center - half_width; }
  double hi() const { return center + half_width; }
  bool contains(double length) const { return length >= lo() && length <= hi(); }
};

// Mean +/- 3 std of the per-level lengths used in the original design.
std::vector<LengthBand> default_length_bands();
std::vector<double> default_k_targets();

struct ParamGrid {
  std::vector<std::vector<int>> multiplier_sets;
  std::vector<double> periods;

  // Every strictly increasing multiplier list drawn from 1..max_multiplier
  // with 1..max_components entries, crossed with `periods`.
  static ParamGrid combinations(int max_components, int max_multiplier,
                                std::vector<double> periods);
  static ParamGrid default_grid();

  std::size_t size() const { return multiplier_sets.size() * periods.size(); }
};

struct TrialSpec {
  std::string trial_id;
  SinusoidSpec sinusoid;
  double width = kDefaultWidth;
  double length = 0.0;
  double total_curvature = 0.0;
  int level_L = 0;
  int level_K = 0;
  double min_radius = 0.0;
  std::vector<geometry::Point> polyline;
};

std::string trial_id(int level_L, int level_K);
// Parses "L{l}-K{k}"; throws ParseError otherwise.
std::pair<int, int> parse_trial_id(const std::string& id);

// Throws ValidationError if the stored K is not within k_tolerance of
// `target_k` or the length falls outside `band`.
void validate_trial(const TrialSpec& trial, double target_k, const LengthBand& band,
                    double k_tolerance = 0.01);

// Tunnel from the stored polyline (or the realized sinusoid when the
// polyline is empty), mirrored when `flipped` differs from the spec.
geometry::Tunnel make_tunnel(const TrialSpec& trial, bool flipped);

struct GridSearchConfig {
  std::vector<double> k_targets = default_k_targets();
  std::vector<LengthBand> bands = default_length_bands();
  ParamGrid grid = ParamGrid::default_grid();
  double width = kDefaultWidth;
  double x_max = kDefaultXMax;
  double min_radius = 15.0;
  double k_tolerance = 0.01;
  SolveOptions solve;
};

struct GridDiagnostic {
  std::vector<int> angle_multipliers;
  double periods = 0.0;
  double target_k = 0.0;
  std::string message;
};

struct GridSearchResult {
  std::vector<TrialSpec> candidates;
  std::vector<GridDiagnostic> diagnostics;
  std::map<std::pair<int, int>, int> cell_counts;  // (level_L, level_K)
  std::vector<std::string> empty_cells;
};

GridSearchResult grid_search(const GridSearchConfig& cfg);

enum class SelectionPolicy { kMinLengthSpread };

// One candidate per (level_L, level_K) cell for a levels_L x levels_K
// design. With kMinLengthSpread each length level independently picks the
// combination minimizing the sample standard deviation of its lengths;
// ties go to the earliest candidates.
std::vector<TrialSpec> assemble_trialset(const std::vector<TrialSpec>& candidates,
                                         SelectionPolicy policy = SelectionPolicy::kMinLengthSpread,
                                         int levels_L = 3, int levels_K = 3);

// Fills `polyline` from the realized centerline.
void attach_polyline(TrialSpec& trial, int points = kPolylinePoints);

}  // namespace steerlab::curvegen
