#include "steerlab/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "steerlab/errors.hpp"

namespace steerlab::metrics {

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 5> kEventNames = {{
    {EventKind::kStartClick, "start_click"},
    {EventKind::kFlagClick, "flag_click"},
    {EventKind::kEndClick, "end_click"},
    {EventKind::kTunnelExit, "tunnel_exit"},
    {EventKind::kTunnelReenter, "tunnel_reenter"},
}};

// Second derivatives of the natural cubic spline through (t, v).
std::vector<double> spline_moments(const std::vector<double>& t, const std::vector<double>& v) {
  const std::size_t n = t.size();
  std::vector<double> m(n, 0.0);
  if (n < 3) return m;
  // Tridiagonal system for interior moments, solved by the Thomas algorithm.
  const std::size_t k = n - 2;
  std::vector<double> diag(k), upper(k), rhs(k);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = t[i] - t[i - 1];
    const double h1 = t[i + 1] - t[i];
    diag[i - 1] = 2.0 * (h0 + h1);
    upper[i - 1] = h1;
    rhs[i - 1] = 6.0 * ((v[i + 1] - v[i]) / h1 - (v[i] - v[i - 1]) / h0);
  }
  for (std::size_t i = 1; i < k; ++i) {
    const double lower = t[i + 1] - t[i];
    const double w = lower / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  m[k] = rhs[k - 1] / diag[k - 1];
  for (std::size_t i = k - 1; i-- > 0;) m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
  return m;
}

double spline_eval(const std::vector<double>& t, const std::vector<double>& v,
                   const std::vector<double>& m, std::size_t i, double x) {
  const double h = t[i + 1] - t[i];
  const double a = (t[i + 1] - x) / h;
  const double b = (x - t[i]) / h;
  return a * v[i] + b * v[i + 1] + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0;
}

struct Window {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::size_t size() const { return end - begin; }
};

Window window(const Trajectory& traj, double t0, double t1) {
  const auto& s = traj.samples;
  const auto lo = std::lower_bound(s.begin(), s.end(), t0, [](const Sample& a, double t) { return a.t < t; });
  const auto hi = std::upper_bound(s.begin(), s.end(), t1, [](double t, const Sample& a) { return t < a.t; });
  Window w;
  w.begin = static_cast<std::size_t>(lo - s.begin());
  w.end = std::max(w.begin, static_cast<std::size_t>(hi - s.begin()));
  return w;
}

double required_event(const Trajectory& traj, EventKind kind) {
  const auto t = traj.event_time(kind);
  if (!t) throw IncompleteTrialError("trajectory has no " + std::string(to_string(kind)) + " event");
  return *t;
}

Window trial_window(const Trajectory& traj) {
  const double t0 = required_event(traj, EventKind::kStartClick);
  const double t1 = required_event(traj, EventKind::kEndClick);
  const Window w = window(traj, t0, t1);
  if (w.size() == 0) throw IncompleteTrialError("no samples between start and end clicks");
  return w;
}

double window_path(const Trajectory& traj, Window w) {
  double total = 0.0;
  for (std::size_t i = w.begin + 1; i < w.end; ++i) {
    total += std::hypot(traj.samples[i].x - traj.samples[i - 1].x, traj.samples[i].y - traj.samples[i - 1].y);
  }
  return total;
}

int window_exits(const std::vector<char>& inside, Window w) {
  int exits = 0;
  for (std::size_t i = w.begin + 1; i < w.end; ++i) exits += inside[i - 1] && !inside[i];
  return exits;
}

double window_opm(const std::vector<char>& inside, Window w) {
  std::size_t out = 0;
  for (std::size_t i = w.begin; i < w.end; ++i) out += !inside[i];
  return static_cast<double>(out) / static_cast<double>(w.size());
}

std::vector<char> inside_flags(const Trajectory& traj, const geometry::OffsetIndex& index) {
  std::vector<char> flags(traj.samples.size());
  for (std::size_t i = 0; i < traj.samples.size(); ++i) {
    flags[i] = counts_inside(index, {traj.samples[i].x, traj.samples[i].y});
  }
  return flags;
}

PhaseMeasures phase(const Trajectory& traj, const std::vector<char>& inside, double t0, double t1) {
  PhaseMeasures p;
  p.mt = t1 - t0;
  const Window w = window(traj, t0, t1);
  if (w.size() == 0 || !(p.mt > 0.0)) return p;
  p.opm = window_opm(inside, w);
  p.exits = window_exits(inside, w);
  p.path_distance = window_path(traj, w);
  p.v_avg = p.path_distance / p.mt;
  return p;
}

Moments moments(const std::vector<double>& v) {
  Moments m;
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

}  // namespace

std::string_view to_string(EventKind kind) {
  for (const auto& [k, name] : kEventNames) {
    if (k == kind) return name;
  }
  return "?";
}

EventKind event_from_string(std::string_view name) {
  for (const auto& [k, n] : kEventNames) {
    if (n == name) return k;
  }
  throw ParseError("unknown event '" + std::string(name) + "'");
}

void Trajectory::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (!std::isfinite(s.t) || !std::isfinite(s.x) || !std::isfinite(s.y)) {
      throw ValidationError("sample " + std::to_string(i) + " is not finite");
    }
    if (i > 0 && !(s.t > samples[i - 1].t)) {
      throw ValidationError("timestamps must strictly increase (sample " + std::to_string(i) + ")");
    }
  }
  int next_click = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i > 0 && events[i].t < events[i - 1].t) throw ValidationError("events are not time-ordered");
    const EventKind k = events[i].kind;
    const int order = k == EventKind::kStartClick ? 0 : k == EventKind::kFlagClick ? 1 : k == EventKind::kEndClick ? 2 : -1;
    if (order < 0) continue;
    if (order < next_click) {
      throw ValidationError(std::string(to_string(k)) + " repeated or out of order");
    }
    next_click = order + 1;
  }
}

std::optional<double> Trajectory::event_time(EventKind kind) const {
  for (const Event& e : events) {
    if (e.kind == kind) return e.t;
  }
  return std::nullopt;
}

Trajectory resample(const Trajectory& traj, double rate) {
  if (!(rate > 0.0)) throw ValidationError("resampling rate must be positive");
  if (traj.samples.size() < 4) throw ValidationError("resampling needs at least 4 samples");
  traj.validate();

  const std::size_t n = traj.samples.size();
  std::vector<double> t(n), x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = traj.samples[i].t;
    x[i] = traj.samples[i].x;
    y[i] = traj.samples[i].y;
  }
  const std::vector<double> mx = spline_moments(t, x);
  const std::vector<double> my = spline_moments(t, y);

  Trajectory out = traj;
  out.samples.clear();
  const double step = 1000.0 / rate;
  const auto count = static_cast<std::size_t>(std::floor((t.back() - t.front()) / step + 1e-9)) + 1;
  out.samples.reserve(count);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double tk = std::min(t.front() + static_cast<double>(k) * step, t.back());
    while (seg + 2 < n && tk >= t[seg + 1]) ++seg;
    out.samples.push_back({tk, spline_eval(t, x, mx, seg, tk), spline_eval(t, y, my, seg, tk)});
  }
  return out;
}

double movement_time(const Trajectory& traj) {
  const double t0 = required_event(traj, EventKind::kStartClick);
  const double t1 = required_event(traj, EventKind::kEndClick);
  if (!(t1 > t0)) throw IncompleteTrialError("end click does not follow start click");
  return t1 - t0;
}

bool counts_inside(const geometry::OffsetIndex& index, geometry::Point p) {
  const geometry::Tunnel& tunnel = index.tunnel();
  const double r = tunnel.width();
  const geometry::Point a = tunnel.start();
  const geometry::Point b = tunnel.end();
  if (std::hypot(p.x - a.x, p.y - a.y) <= r || std::hypot(p.x - b.x, p.y - b.y) <= r) return true;
  return index.query(p).inside;
}

double out_of_path_movement(const Trajectory& traj, const geometry::OffsetIndex& index) {
  const Window w = trial_window(traj);
  std::size_t out = 0;
  for (std::size_t i = w.begin; i < w.end; ++i) {
    out += !counts_inside(index, {traj.samples[i].x, traj.samples[i].y});
  }
  return static_cast<double>(out) / static_cast<double>(w.size());
}

double path_distance(const Trajectory& traj) { return window_path(traj, trial_window(traj)); }

double average_speed(const Trajectory& traj) { return path_distance(traj) / movement_time(traj); }

double effective_width(std::span<const double> offsets) {
  if (offsets.size() < 2) throw InsufficientDataError("effective width needs at least 2 offsets");
  const double mean = std::accumulate(offsets.begin(), offsets.end(), 0.0) / static_cast<double>(offsets.size());
  double ss = 0.0;
  for (double o : offsets) ss += (o - mean) * (o - mean);
  return kWeFactor * std::sqrt(ss / static_cast<double>(offsets.size() - 1));
}

int count_exits(const Trajectory& traj, const geometry::OffsetIndex& index) {
  const Window w = trial_window(traj);
  int exits = 0;
  bool prev = counts_inside(index, {traj.samples[w.begin].x, traj.samples[w.begin].y});
  for (std::size_t i = w.begin + 1; i < w.end; ++i) {
    const bool cur = counts_inside(index, {traj.samples[i].x, traj.samples[i].y});
    exits += prev && !cur;
    prev = cur;
  }
  return exits;
}

TrialMeasures measure(const Trajectory& traj, const geometry::OffsetIndex& index) {
  TrialMeasures m;
  m.mt = movement_time(traj);
  const Window w = trial_window(traj);
  const std::vector<char> inside = inside_flags(traj, index);
  m.opm = window_opm(inside, w);
  m.exits = window_exits(inside, w);
  m.path_distance = window_path(traj, w);
  m.v_avg = m.path_distance / m.mt;

  std::vector<double> offsets;
  offsets.reserve(w.size());
  for (std::size_t i = w.begin; i < w.end; ++i) {
    offsets.push_back(index.query({traj.samples[i].x, traj.samples[i].y}).offset);
  }
  m.w_e = offsets.size() >= 2 ? effective_width(offsets) : 0.0;

  if (const auto flag = traj.event_time(EventKind::kFlagClick)) {
    const double t0 = *traj.event_time(EventKind::kStartClick);
    const double t1 = *traj.event_time(EventKind::kEndClick);
    m.outbound = phase(traj, inside, t0, *flag);
    m.inbound = phase(traj, inside, *flag, t1);
  }
  return m;
}

TrialMeasures analyze_trial(const Trajectory& raw, const geometry::OffsetIndex& index, double rate) {
  return measure(resample(raw, rate), index);
}

std::uint64_t Heatmap::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}) + out_of_bounds;
}

Heatmap heatmap(std::span<const Trajectory> trajs, const geometry::Tunnel& tunnel, double cell_px) {
  if (!(cell_px > 0.0) || !std::isfinite(cell_px)) throw ValidationError("cell size must be positive");
  if (trajs.empty()) throw ValidationError("heatmap needs at least one trajectory");
  const auto pts = tunnel.centerline().points();
  double x0 = pts[0].x, x1 = pts[0].x, y0 = pts[0].y, y1 = pts[0].y;
  for (const auto& p : pts) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  const double pad = tunnel.width();
  Heatmap h;
  h.origin = {x0 - pad, y0 - pad};
  h.cell = cell_px;
  h.cols = static_cast<std::size_t>(std::ceil((x1 - x0 + 2.0 * pad) / cell_px));
  h.rows = static_cast<std::size_t>(std::ceil((y1 - y0 + 2.0 * pad) / cell_px));
  h.cols = std::max<std::size_t>(h.cols, 1);
  h.rows = std::max<std::size_t>(h.rows, 1);
  h.counts.assign(h.cols * h.rows, 0);
  for (const Trajectory& traj : trajs) {
    for (const Sample& s : traj.samples) {
      const double y = traj.flipped ? -s.y : s.y;
      const double cx = std::floor((s.x - h.origin.x) / cell_px);
      const double cy = std::floor((y - h.origin.y) / cell_px);
      if (cx < 0.0 || cy < 0.0 || cx >= static_cast<double>(h.cols) || cy >= static_cast<double>(h.rows)) {
        ++h.out_of_bounds;
        continue;
      }
      ++h.counts[static_cast<std::size_t>(cy) * h.cols + static_cast<std::size_t>(cx)];
    }
  }
  return h;
}

Summary summarize(std::span<const MeasureRow> rows, std::span<const std::string> known_trials) {
  const std::set<std::string> known(known_trials.begin(), known_trials.end());
  std::map<std::pair<std::string, std::string>, std::vector<const TrialMeasures*>> cells;
  for (const MeasureRow& r : rows) {
    if (!known.empty() && !known.count(r.trial_id)) throw ReferenceError("unknown trial id '" + r.trial_id + "'");
    cells[{r.trial_id, r.participant_id}].push_back(&r.measures);
  }

  Summary out;
  std::map<std::string, std::vector<const ParticipantSummary*>> by_trial;
  for (const auto& [key, list] : cells) {
    ParticipantSummary ps;
    ps.trial_id = key.first;
    ps.participant_id = key.second;
    ps.repetitions = list.size();
    for (const TrialMeasures* m : list) {
      ps.mean.mt += m->mt;
      ps.mean.opm += m->opm;
      ps.mean.v_avg += m->v_avg;
      ps.mean.exits += static_cast<double>(m->exits);
      ps.mean.w_e += m->w_e;
      ps.mean.path_distance += m->path_distance;
    }
    const double n = static_cast<double>(list.size());
    for (double* f : {&ps.mean.mt, &ps.mean.opm, &ps.mean.v_avg, &ps.mean.exits, &ps.mean.w_e,
                      &ps.mean.path_distance}) {
      *f /= n;
    }
    out.per_participant.push_back(ps);
  }
  for (const auto& ps : out.per_participant) by_trial[ps.trial_id].push_back(&ps);
  for (const auto& [trial, list] : by_trial) {
    TrialSummary ts;
    ts.trial_id = trial;
    ts.participants = list.size();
    auto collect = [&](double MeanMeasures::*field) {
      std::vector<double> v;
      for (const ParticipantSummary* ps : list) v.push_back(ps->mean.*field);
      return moments(v);
    };
    ts.mt = collect(&MeanMeasures::mt);
    ts.opm = collect(&MeanMeasures::opm);
    ts.v_avg = collect(&MeanMeasures::v_avg);
    ts.exits = collect(&MeanMeasures::exits);
    ts.w_e = collect(&MeanMeasures::w_e);
    ts.path_distance = collect(&MeanMeasures::path_distance);
    out.per_trial.push_back(ts);
  }
  return out;
}

}  // namespace steerlab::metrics
