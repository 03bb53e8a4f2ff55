#pragma once

// Experiment session protocol: counterbalanced trial plans, tutorial
// gating and the block/break state machine.

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace steerlab::session {

inline constexpr int kTrialTypes = 9;
inline constexpr int kBlocks = 27;
inline constexpr int kTrialsPerBlock = 5;
inline constexpr int kExperimentTrials = kBlocks * kTrialsPerBlock;
inline constexpr int kTutorialWindow = 8;
inline constexpr int kTutorialMaxTrials = 30;
inline constexpr double kTutorialMaxCv = 0.15;
inline constexpr double kTutorialMaxExits = 2.0;
inline constexpr double kBreakMs = 15000.0;
inline constexpr std::uint64_t kTutorialSeed = 0x5EED7u;

struct PlannedTrial {
  std::string trial_id;
  bool flipped = false;
  int block = 0;  // 0-based; -1 for tutorial trials
};

struct SessionPlan {
  std::string participant_id;
  std::uint64_t seed = 0;
  bool reversed = false;
  std::vector<PlannedTrial> tutorial;
  std::vector<PlannedTrial> queue;

  // Throws PlanError unless the queue holds 135 trials in homogeneous blocks
  // of 5 with every type 15 times.
  void validate() const;
};

// Blocks are a seeded shuffle of 3 blocks per type; flips come from the
// same stream. A reversed plan is the exact reversal of the forward plan
// for the same seed. Trial ids are taken in sorted order, so input order
// does not matter. Throws PlanError unless there are 9 distinct ids.
SessionPlan make_plan(const std::string& participant_id, std::span<const std::string> trial_ids,
                      std::uint64_t seed, bool reversed);

// The fixed tutorial sequence shared by all participants.
std::vector<PlannedTrial> tutorial_sequence(std::span<const std::string> trial_ids);

enum class Phase { kTutorial, kBreak, kExperiment, kDone, kFailedTutorial };
std::string_view to_string(Phase phase);

enum class TutorialDecision { kContinue, kPass, kFail };
std::string_view to_string(TutorialDecision decision);

struct TutorialSample {
  double speed = 0.0;  // the trial's v_avg
  int exits = 0;
};

struct SessionState {
  Phase phase = Phase::kTutorial;
  std::deque<TutorialSample> window;  // last kTutorialWindow tutorial trials
  int tutorial_trials = 0;
  int experiment_trials = 0;
  double break_started_ms = 0.0;
};

// Pushes the trial into the window and evaluates the gate once the window
// is full. CV uses the sample standard deviation. Fails only when the 30th
// tutorial trial does not pass. Requires phase == kTutorial.
TutorialDecision tutorial_step(SessionState& state, const TutorialSample& trial);

struct TrialCompleted {
  TutorialSample measures;
  double t_ms = 0.0;  // completion time on the session clock
};

struct BreakFinished {
  double t_ms = 0.0;
};

using SessionEvent = std::variant<TrialCompleted, BreakFinished>;
std::string_view event_name(const SessionEvent& event);

// Applies `event`. A passed tutorial moves straight to the experiment;
// every fifth experiment trial opens a break unless the session is done.
// A break can only finish kBreakMs after it started. Illegal events throw
// ProtocolError naming the phase and the event.
SessionState advance(SessionState state, const SessionEvent& event);

// The trial the participant should run next (during a break, the first
// trial of the next block). Empty once the session is over.
std::optional<PlannedTrial> current_trial(const SessionPlan& plan, const SessionState& state);

}  // namespace steerlab::session
