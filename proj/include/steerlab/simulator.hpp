#pragma once

// Seeded synthetic steering agent. The agent tracks the centerline at a
// curvature-modulated speed with AR(1) lateral noise; it exists to exercise
// the analysis pipeline, not to model people.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "steerlab/curvegen.hpp"
#include "steerlab/fitting.hpp"
#include "steerlab/geometry.hpp"
#include "steerlab/metrics.hpp"
#include "steerlab/random.hpp"

namespace steerlab::simulator {

struct AgentConfig {
  double base_speed = 0.40;       // px/ms on straight segments
  double curvature_gain = 150.0;  // r in (1 + r |kappa|)^-beta, px
  double slowdown = 0.6;          // beta
  double lateral_noise_sd = 4.0;  // stationary sd of the lateral offset, px
  double noise_correlation = 0.98;  // AR(1) coefficient per tick
  double lookahead = 60.0;        // px of centerline averaged for kappa
  double trial_speed_sd = 0.05;   // log-normal speed jitter per trial
  double learning_rate = 0.0;     // speed grows as (rep + 1)^learning_rate
  double tick_ms = 5.0;
  std::uint64_t seed = 0;

  // Throws ValidationError for non-positive speed, lookahead or tick, or
  // negative noise.
  void validate() const;
};

// One round trip (start -> flag -> back to start) through `tunnel`. Samples
// are emitted every tick; the flag and end samples fall at the exact
// arrival times. The stream is keyed on (cfg.seed, participant, trial,
// repetition). Throws ValidationError when the lookahead exceeds the
// tunnel length.
metrics::Trajectory simulate_trial(const geometry::Tunnel& tunnel, const AgentConfig& cfg,
                                   int repetition, std::uint64_t participant = 0,
                                   std::uint64_t trial_key = 0);

struct CorpusConfig {
  AgentConfig agent;
  int participants = 20;
  int repetitions = 15;
  // Per-participant log-normal spread of base speed and noise.
  double participant_speed_sd = 0.10;
  double participant_noise_sd = 0.20;
  bool randomize_flips = true;
};

// Logs ordered by participant, trial, repetition. Participant ids are
// "P01", "P02", ...
std::vector<metrics::Trajectory> simulate_corpus(std::span<const curvegen::TrialSpec> trials,
                                                 const CorpusConfig& cfg);

// Per-repetition MT drawn from `form` with Gaussian noise; cell features are
// copied from `features`.
std::vector<fitting::RepetitionCell> planted_cells(const models::ModelForm& form,
                                                   const models::Coefficients& coef,
                                                   std::span<const models::TrialFeatures> features,
                                                   double noise_sd, int repetitions, Rng& rng);

}  // namespace steerlab::simulator
