#include "steerlab/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "steerlab/errors.hpp"

namespace steerlab::simulator {

namespace {

// Arc-length lookups on the centerline: position, left normal and the mean
// |kappa| over an arc-length interval from a cumulative integral.
class Track {
 public:
  explicit Track(const geometry::Tunnel& tunnel) {
    const auto& c = tunnel.centerline();
    pts_.assign(c.points().begin(), c.points().end());
    s_.assign(c.s().begin(), c.s().end());
    const auto k = c.kappa();
    cum_.assign(s_.size(), 0.0);
    for (std::size_t i = 1; i < s_.size(); ++i) {
      cum_[i] = cum_[i - 1] + 0.5 * (k[i] + k[i - 1]) * (s_[i] - s_[i - 1]);
    }
  }

  double length() const { return s_.back(); }

  geometry::Point at(double s, double lateral) const {
    const std::size_t i = segment(s);
    const double h = s_[i + 1] - s_[i];
    const double u = h > 0.0 ? (s - s_[i]) / h : 0.0;
    const double dx = pts_[i + 1].x - pts_[i].x;
    const double dy = pts_[i + 1].y - pts_[i].y;
    const double n = std::hypot(dx, dy);
    const double nx = n > 0.0 ? -dy / n : 0.0;
    const double ny = n > 0.0 ? dx / n : 0.0;
    return {pts_[i].x + u * dx + lateral * nx, pts_[i].y + u * dy + lateral * ny};
  }

  double mean_kappa(double s0, double s1) const {
    s0 = std::clamp(s0, 0.0, length());
    s1 = std::clamp(s1, 0.0, length());
    if (s1 <= s0) return 0.0;
    return (cumulative(s1) - cumulative(s0)) / (s1 - s0);
  }

 private:
  std::size_t segment(double s) const {
    const auto it = std::upper_bound(s_.begin(), s_.end(), s);
    const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - s_.begin() - 1, 0));
    return std::min(idx, s_.size() - 2);
  }

  double cumulative(double s) const {
    const std::size_t i = segment(s);
    const double h = s_[i + 1] - s_[i];
    const double u = h > 0.0 ? (s - s_[i]) / h : 0.0;
    return cum_[i] + u * (cum_[i + 1] - cum_[i]);
  }

  std::vector<geometry::Point> pts_;
  std::vector<double> s_;
  std::vector<double> cum_;
};

std::string participant_name(int p) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%02d", p + 1);
  return buf;
}

}  // namespace

void AgentConfig::validate() const {
  if (!(base_speed > 0.0)) throw ValidationError("base_speed must be positive");
  if (!(lookahead > 0.0)) throw ValidationError("lookahead must be positive");
  if (!(tick_ms > 0.0)) throw ValidationError("tick must be positive");
  if (!(lateral_noise_sd >= 0.0)) throw ValidationError("lateral noise sd must be >= 0");
  if (!(curvature_gain >= 0.0) || !(slowdown >= 0.0)) {
    throw ValidationError("curvature gain and slowdown must be >= 0");
  }
  if (!(noise_correlation >= 0.0 && noise_correlation < 1.0)) {
    throw ValidationError("noise correlation must be in [0, 1)");
  }
  if (!(trial_speed_sd >= 0.0)) throw ValidationError("trial speed sd must be >= 0");
}

metrics::Trajectory simulate_trial(const geometry::Tunnel& tunnel, const AgentConfig& cfg,
                                   int repetition, std::uint64_t participant,
                                   std::uint64_t trial_key) {
  cfg.validate();
  const Track track(tunnel);
  const double length = track.length();
  if (cfg.lookahead > length) {
    throw ValidationError("lookahead exceeds the tunnel length");
  }
  Rng rng = Rng::derive({cfg.seed, participant, trial_key, static_cast<std::uint64_t>(repetition)});

  double speed = cfg.base_speed * std::pow(static_cast<double>(repetition) + 1.0, cfg.learning_rate);
  if (cfg.trial_speed_sd > 0.0) speed *= std::exp(rng.normal(0.0, cfg.trial_speed_sd));
  const double rho = cfg.noise_correlation;
  const double innovation = cfg.lateral_noise_sd * std::sqrt(1.0 - rho * rho);

  metrics::Trajectory traj;
  traj.repetition = repetition;
  double t = 0.0;
  double s = 0.0;
  double lateral = 0.0;
  auto emit = [&](std::optional<metrics::EventKind> kind) {
    const geometry::Point p = track.at(s, lateral);
    traj.samples.push_back({t, p.x, p.y});
    if (kind) traj.events.push_back({t, *kind});
  };
  emit(metrics::EventKind::kStartClick);

  for (int dir : {+1, -1}) {
    const double target = dir > 0 ? length : 0.0;
    for (;;) {
      const double kbar = dir > 0 ? track.mean_kappa(s, s + cfg.lookahead)
                                  : track.mean_kappa(s - cfg.lookahead, s);
      const double v = speed * std::pow(1.0 + cfg.curvature_gain * kbar, -cfg.slowdown);
      const double remaining = std::abs(target - s);
      lateral = rho * lateral + innovation * rng.normal();
      if (v * cfg.tick_ms >= remaining) {
        t += remaining / v;
        s = target;
        lateral = 0.0;  // the click lands on the button centre
        emit(dir > 0 ? metrics::EventKind::kFlagClick : metrics::EventKind::kEndClick);
        break;
      }
      t += cfg.tick_ms;
      s += dir * v * cfg.tick_ms;
      emit(std::nullopt);
    }
  }
  return traj;
}

std::vector<metrics::Trajectory> simulate_corpus(std::span<const curvegen::TrialSpec> trials,
                                                 const CorpusConfig& cfg) {
  cfg.agent.validate();
  if (cfg.participants < 1 || cfg.repetitions < 1) {
    throw ValidationError("participants and repetitions must be >= 1");
  }
  if (trials.empty()) throw ValidationError("no trials to simulate");

  std::vector<metrics::Trajectory> out;
  out.reserve(static_cast<std::size_t>(cfg.participants * cfg.repetitions) * trials.size());
  for (int p = 0; p < cfg.participants; ++p) {
    Rng prng = Rng::derive({cfg.agent.seed, 0xC0FFEEULL, static_cast<std::uint64_t>(p)});
    AgentConfig agent = cfg.agent;
    agent.base_speed *= std::exp(prng.normal(0.0, cfg.participant_speed_sd));
    agent.lateral_noise_sd *= std::exp(prng.normal(0.0, cfg.participant_noise_sd));
    const std::string pid = participant_name(p);

    for (std::size_t ti = 0; ti < trials.size(); ++ti) {
      const auto& trial = trials[ti];
      const geometry::Tunnel upright = curvegen::make_tunnel(trial, false);
      const geometry::Tunnel mirrored = curvegen::make_tunnel(trial, true);
      for (int r = 0; r < cfg.repetitions; ++r) {
        bool flipped = trial.sinusoid.flipped;
        if (cfg.randomize_flips) {
          Rng frng = Rng::derive({cfg.agent.seed, 0xF11FULL, static_cast<std::uint64_t>(p), ti,
                                  static_cast<std::uint64_t>(r)});
          flipped = frng.coin();
        }
        metrics::Trajectory traj = simulate_trial(flipped ? mirrored : upright, agent, r,
                                                  static_cast<std::uint64_t>(p), ti);
        traj.session_id = "sim-" + pid;
        traj.participant_id = pid;
        traj.trial_id = trial.trial_id;
        traj.flipped = flipped;
        out.push_back(std::move(traj));
      }
    }
  }
  return out;
}

std::vector<fitting::RepetitionCell> planted_cells(const models::ModelForm& form,
                                                   const models::Coefficients& coef,
                                                   std::span<const models::TrialFeatures> features,
                                                   double noise_sd, int repetitions, Rng& rng) {
  if (repetitions < 1) throw ValidationError("repetitions must be >= 1");
  if (!(noise_sd >= 0.0)) throw ValidationError("noise sd must be >= 0");
  std::vector<fitting::RepetitionCell> cells;
  for (std::size_t i = 0; i < features.size(); ++i) {
    fitting::RepetitionCell c;
    c.trial_id = "cell" + std::to_string(i);
    c.features = features[i];
    c.features.mt_mean.reset();
    const double mu = models::predict(form, coef, c.features);
    for (int r = 0; r < repetitions; ++r) c.mt_reps.push_back(mu + noise_sd * rng.normal());
    cells.push_back(std::move(c));
  }
  return cells;
}

}  // namespace steerlab::simulator
