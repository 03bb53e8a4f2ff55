#pragma once

// Dependent measures from cursor trajectories: spline resampling, movement
// time, out-of-path movement, average speed, exits, effective width and
// trajectory heatmaps.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "steerlab/geometry.hpp"

namespace steerlab::metrics {

enum class EventKind { kStartClick, kFlagClick, kEndClick, kTunnelExit, kTunnelReenter };

std::string_view to_string(EventKind kind);
// Throws ParseError for unknown names.
EventKind event_from_string(std::string_view name);

struct Sample {
  double t = 0.0;  // ms
  double x = 0.0;
  double y = 0.0;
};

struct Event {
  double t = 0.0;
  EventKind kind = EventKind::kStartClick;
};

struct Trajectory {
  std::string session_id;
  std::string participant_id;
  std::string trial_id;
  int repetition = 0;
  bool flipped = false;
  std::vector<Sample> samples;
  std::vector<Event> events;

  // Throws ValidationError unless timestamps strictly increase, events are
  // time-ordered and each click appears at most once, in the order
  // start, flag, end.
  void validate() const;
  std::optional<double> event_time(EventKind kind) const;
};

inline constexpr double kDefaultRate = 200.0;
inline constexpr double kWeFactor = 4.133;

// Natural cubic spline through x(t) and y(t), evaluated at
// t_first + i / rate for every grid time up to t_last. Events are copied.
// Throws ValidationError for fewer than 4 samples or non-increasing t.
Trajectory resample(const Trajectory& traj, double rate = kDefaultRate);

// t(end_click) - t(start_click). Throws IncompleteTrialError.
double movement_time(const Trajectory& traj);

// Inside test used by OPM and exits: within the tunnel, or within one
// tunnel width of either endpoint.
bool counts_inside(const geometry::OffsetIndex& index, geometry::Point p);

// Fraction of samples in [start_click, end_click] that are outside.
double out_of_path_movement(const Trajectory& traj, const geometry::OffsetIndex& index);

// Path length within the trial window divided by the movement time.
double average_speed(const Trajectory& traj);

double path_distance(const Trajectory& traj);

// 4.133 times the sample standard deviation. Throws InsufficientDataError
// for fewer than 2 offsets.
double effective_width(std::span<const double> offsets);

// Inside-to-outside transitions within the trial window.
int count_exits(const Trajectory& traj, const geometry::OffsetIndex& index);

struct PhaseMeasures {
  double mt = 0.0;
  double opm = 0.0;
  double v_avg = 0.0;
  int exits = 0;
  double path_distance = 0.0;
};

struct TrialMeasures {
  double mt = 0.0;
  double opm = 0.0;
  double v_avg = 0.0;
  int exits = 0;
  double w_e = 0.0;
  double path_distance = 0.0;
  std::optional<PhaseMeasures> outbound;  // start -> flag
  std::optional<PhaseMeasures> inbound;   // flag -> end
};

// All measures of an already resampled trajectory against the tunnel in
// the trajectory's orientation.
TrialMeasures measure(const Trajectory& resampled, const geometry::OffsetIndex& index);

// resample() followed by measure().
TrialMeasures analyze_trial(const Trajectory& raw, const geometry::OffsetIndex& index,
                            double rate = kDefaultRate);

struct Heatmap {
  geometry::Point origin;  // lower-left corner of cell (0, 0)
  double cell = 0.0;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::vector<std::uint64_t> counts;  // row-major, rows along y
  std::uint64_t out_of_bounds = 0;

  std::uint64_t at(std::size_t row, std::size_t col) const { return counts[row * cols + col]; }
  std::uint64_t total() const;
};

// Bins every sample of `trajs` over the tunnel bounding box padded by the
// width. Flipped trajectories are mirrored back onto `tunnel` first.
// Throws ValidationError for an empty list or non-positive cell size.
Heatmap heatmap(std::span<const Trajectory> trajs, const geometry::Tunnel& tunnel, double cell_px);

struct MeasureRow {
  std::string trial_id;
  std::string participant_id;
  int repetition = 0;
  TrialMeasures measures;
};

struct Moments {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single value
};

struct MeanMeasures {
  double mt = 0.0;
  double opm = 0.0;
  double v_avg = 0.0;
  double exits = 0.0;
  double w_e = 0.0;
  double path_distance = 0.0;
};

struct ParticipantSummary {
  std::string trial_id;
  std::string participant_id;
  std::size_t repetitions = 0;
  MeanMeasures mean;
};

struct TrialSummary {
  std::string trial_id;
  std::size_t participants = 0;
  Moments mt, opm, v_avg, exits, w_e, path_distance;
};

struct Summary {
  std::vector<ParticipantSummary> per_participant;  // sorted by trial, participant
  std::vector<TrialSummary> per_trial;              // sorted by trial
};

// Per (trial, participant) means over repetitions, then per-trial moments
// across participant means. Throws ReferenceError when a row names a trial
// outside `known_trials` (unchecked when empty).
Summary summarize(std::span<const MeasureRow> rows, std::span<const std::string> known_trials = {});

}  // namespace steerlab::metrics
