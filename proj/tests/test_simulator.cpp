#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include "steerlab/curvegen.hpp"
#include "steerlab/errors.hpp"
#include "steerlab/fitting.hpp"
#include "steerlab/simulator.hpp"

using namespace steerlab;
using namespace steerlab::simulator;

namespace {

geometry::Tunnel straight(double length) {
  std::vector<geometry::Point> pts;
  for (int i = 0; i <= 200; ++i) pts.push_back({length * i / 200.0, 0.0});
  return geometry::Tunnel(geometry::CurveSamples::from_polyline(pts), 50.0);
}

AgentConfig quiet() {
  AgentConfig cfg;
  cfg.lateral_noise_sd = 0.0;
  cfg.trial_speed_sd = 0.0;
  return cfg;
}

std::vector<curvegen::TrialSpec> small_trialset() {
  std::vector<curvegen::TrialSpec> out;
  const double amps[3] = {88.348, 55.218, 40.158};
  const double periods[3] = {1.25, 2.0, 2.75};
  for (int k = 0; k < 3; ++k) {
    curvegen::TrialSpec t;
    t.level_L = 0;
    t.level_K = k;
    t.trial_id = curvegen::trial_id(0, k);
    t.sinusoid = {{1, 3}, periods[k], amps[k]};
    out.push_back(t);
  }
  return out;
}

}  // namespace

TEST_CASE("trials are deterministic per key") {
  const geometry::Tunnel tunnel = straight(800.0);
  AgentConfig cfg;
  cfg.seed = 17;
  const auto a = simulate_trial(tunnel, cfg, 3, 2, 5);
  const auto b = simulate_trial(tunnel, cfg, 3, 2, 5);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].x == b.samples[i].x);
    CHECK(a.samples[i].y == b.samples[i].y);
  }
  const auto c = simulate_trial(tunnel, cfg, 4, 2, 5);
  CHECK(c.samples[10].y != a.samples[10].y);
}

TEST_CASE("straight noiseless tunnel: no deviation and MT = 2L/v") {
  for (double length : {400.0, 1500.0}) {
    const geometry::Tunnel tunnel = straight(length);
    const auto traj = simulate_trial(tunnel, quiet(), 0);
    traj.validate();
    const geometry::OffsetIndex index(tunnel);
    const auto m = metrics::measure(traj, index);
    CHECK(m.opm == 0.0);
    CHECK(m.exits == 0);
    CHECK(m.mt == doctest::Approx(2.0 * length / 0.40).epsilon(1e-9));
    CHECK(m.v_avg == doctest::Approx(0.40).epsilon(1e-9));
    REQUIRE(m.outbound);
    CHECK(m.outbound->mt == doctest::Approx(length / 0.40).epsilon(1e-9));
  }
}

TEST_CASE("flag and end samples land on the endpoints") {
  const auto trials = small_trialset();
  const geometry::Tunnel tunnel = curvegen::make_tunnel(trials[1], false);
  const auto traj = simulate_trial(tunnel, AgentConfig{}, 0);
  const double flag = *traj.event_time(metrics::EventKind::kFlagClick);
  for (const auto& s : traj.samples) {
    if (s.t == flag) {
      CHECK(s.x == doctest::Approx(tunnel.end().x));
      CHECK(s.y == doctest::Approx(tunnel.end().y));
    }
  }
  CHECK(traj.samples.back().x == doctest::Approx(tunnel.start().x));
  CHECK(traj.samples.back().t == *traj.event_time(metrics::EventKind::kEndClick));
}

TEST_CASE("SL_BASE slope on straight tunnels is 2 / speed") {
  std::vector<models::TrialFeatures> feats;
  for (double length : {300.0, 600.0, 900.0, 1200.0, 1500.0}) {
    const auto traj = simulate_trial(straight(length), quiet(), 0);
    models::TrialFeatures f;
    f.L = length;
    f.mt_mean = metrics::movement_time(traj);
    feats.push_back(f);
  }
  const auto fit = fitting::fit_model({models::FormId::kSlBase, true}, feats);
  CHECK(fit.coefficients[1] == doctest::Approx(2.0 / 0.40).epsilon(0.01));
}

TEST_CASE("curvature slows the agent") {
  const auto trials = small_trialset();
  double prev = INFINITY;
  for (const auto& t : trials) {
    const geometry::Tunnel tunnel = curvegen::make_tunnel(t, false);
    const auto traj = simulate_trial(tunnel, quiet(), 0);
    const double v = metrics::average_speed(traj);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("corpus shape and determinism") {
  CorpusConfig cfg;
  cfg.participants = 3;
  cfg.repetitions = 4;
  cfg.agent.seed = 99;
  const auto trials = small_trialset();
  const auto a = simulate_corpus(trials, cfg);
  const auto b = simulate_corpus(trials, cfg);
  REQUIRE(a.size() == 3 * 4 * 3);
  CHECK(a.front().participant_id == "P01");
  CHECK(a.back().participant_id == "P03");
  CHECK(a[4].trial_id == "L0-K1");
  CHECK(a[5].repetition == 1);
  bool any_flip = false, any_plain = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].flipped == b[i].flipped);
    CHECK(a[i].samples.size() == b[i].samples.size());
    CHECK(a[i].samples.back().t == b[i].samples.back().t);
    any_flip |= a[i].flipped;
    any_plain |= !a[i].flipped;
  }
  CHECK(any_flip);
  CHECK(any_plain);
}

TEST_CASE("flipped trials are measured against the mirrored tunnel") {
  CorpusConfig cfg;
  cfg.participants = 2;
  cfg.repetitions = 6;
  cfg.agent.lateral_noise_sd = 0.0;
  const auto trials = small_trialset();
  for (const auto& traj : simulate_corpus(trials, cfg)) {
    const auto& spec = trials[curvegen::parse_trial_id(traj.trial_id).second];
    const geometry::OffsetIndex index(curvegen::make_tunnel(spec, traj.flipped));
    CHECK(metrics::measure(traj, index).opm == 0.0);
  }
}

TEST_CASE("agent configuration is validated") {
  CHECK_THROWS_AS(simulate_trial(straight(100.0), AgentConfig{.base_speed = 0.0}, 0), ValidationError);
  CHECK_THROWS_AS(simulate_trial(straight(100.0), AgentConfig{.lookahead = 500.0}, 0), ValidationError);
  CHECK_THROWS_AS(simulate_trial(straight(100.0), AgentConfig{.noise_correlation = 1.0}, 0), ValidationError);
  CHECK_THROWS_AS(simulate_corpus({}, CorpusConfig{}), ValidationError);
}

TEST_CASE("planted cells follow the model") {
  std::vector<models::TrialFeatures> feats(3);
  for (int i = 0; i < 3; ++i) {
    feats[i].L = 1000.0 + 100 * i;
    feats[i].K = 10.0;
  }
  Rng rng(1);
  const auto cells = planted_cells({models::FormId::kSlBase, true}, {{100.0, 2.0}}, feats, 0.0, 5, rng);
  REQUIRE(cells.size() == 3);
  CHECK(cells[2].mt_reps.size() == 5);
  CHECK(cells[2].mt_reps[3] == doctest::Approx(2500.0));
  CHECK_FALSE(cells[0].features.mt_mean);
}
