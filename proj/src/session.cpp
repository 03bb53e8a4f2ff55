#include "steerlab/session.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "steerlab/errors.hpp"
#include "steerlab/random.hpp"

namespace steerlab::session {

namespace {

std::vector<std::string> canonical_ids(std::span<const std::string> trial_ids) {
  std::vector<std::string> ids(trial_ids.begin(), trial_ids.end());
  std::sort(ids.begin(), ids.end());
  if (ids.size() != static_cast<std::size_t>(kTrialTypes)) {
    throw PlanError("a plan needs " + std::to_string(kTrialTypes) + " trial types, got " +
                    std::to_string(ids.size()));
  }
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw PlanError("duplicate trial id");
  return ids;
}

[[noreturn]] void illegal(Phase phase, const SessionEvent& event) {
  throw ProtocolError("event " + std::string(event_name(event)) + " is not allowed in phase " +
                      std::string(to_string(phase)));
}

}  // namespace

void SessionPlan::validate() const {
  if (queue.size() != static_cast<std::size_t>(kExperimentTrials)) {
    throw PlanError("plan must hold " + std::to_string(kExperimentTrials) + " trials");
  }
  std::map<std::string, int> counts;
  for (std::size_t b = 0; b < static_cast<std::size_t>(kBlocks); ++b) {
    const auto& first = queue[b * kTrialsPerBlock];
    for (std::size_t i = 0; i < static_cast<std::size_t>(kTrialsPerBlock); ++i) {
      const auto& t = queue[b * kTrialsPerBlock + i];
      if (t.trial_id != first.trial_id) throw PlanError("block " + std::to_string(b) + " is not homogeneous");
      if (t.block != static_cast<int>(b)) throw PlanError("block numbering is inconsistent");
      ++counts[t.trial_id];
    }
  }
  if (counts.size() != static_cast<std::size_t>(kTrialTypes)) throw PlanError("plan must use 9 trial types");
  for (const auto& [id, n] : counts) {
    if (n != kExperimentTrials / kTrialTypes) throw PlanError(id + " appears " + std::to_string(n) + " times");
  }
}

SessionPlan make_plan(const std::string& participant_id, std::span<const std::string> trial_ids,
                      std::uint64_t seed, bool reversed) {
  const std::vector<std::string> ids = canonical_ids(trial_ids);
  Rng rng(seed);

  std::vector<std::string> blocks;
  for (const auto& id : ids) blocks.insert(blocks.end(), kBlocks / kTrialTypes, id);
  rng.shuffle(blocks.begin(), blocks.end());

  SessionPlan plan;
  plan.participant_id = participant_id;
  plan.seed = seed;
  plan.reversed = reversed;
  for (const auto& id : blocks) {
    for (int i = 0; i < kTrialsPerBlock; ++i) plan.queue.push_back({id, rng.coin(), 0});
  }
  if (reversed) std::reverse(plan.queue.begin(), plan.queue.end());
  for (std::size_t i = 0; i < plan.queue.size(); ++i) plan.queue[i].block = static_cast<int>(i) / kTrialsPerBlock;
  plan.tutorial = tutorial_sequence(ids);
  return plan;
}

std::vector<PlannedTrial> tutorial_sequence(std::span<const std::string> trial_ids) {
  const std::vector<std::string> ids = canonical_ids(trial_ids);
  Rng rng(kTutorialSeed);
  std::vector<PlannedTrial> out;
  while (out.size() < static_cast<std::size_t>(kTutorialMaxTrials)) {
    std::vector<std::string> round = ids;
    rng.shuffle(round.begin(), round.end());
    for (const auto& id : round) {
      if (out.size() == static_cast<std::size_t>(kTutorialMaxTrials)) break;
      out.push_back({id, rng.coin(), -1});
    }
  }
  return out;
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::kTutorial: return "tutorial";
    case Phase::kBreak: return "break";
    case Phase::kExperiment: return "experiment";
    case Phase::kDone: return "done";
    case Phase::kFailedTutorial: return "failed_tutorial";
  }
  return "?";
}

std::string_view to_string(TutorialDecision decision) {
  switch (decision) {
    case TutorialDecision::kContinue: return "continue";
    case TutorialDecision::kPass: return "pass";
    case TutorialDecision::kFail: return "fail";
  }
  return "?";
}

std::string_view event_name(const SessionEvent& event) {
  return std::holds_alternative<TrialCompleted>(event) ? "trial_completed" : "break_finished";
}

TutorialDecision tutorial_step(SessionState& state, const TutorialSample& trial) {
  if (state.phase != Phase::kTutorial) {
    throw ProtocolError("tutorial_step outside the tutorial (phase " + std::string(to_string(state.phase)) + ")");
  }
  state.window.push_back(trial);
  if (state.window.size() > static_cast<std::size_t>(kTutorialWindow)) state.window.pop_front();
  ++state.tutorial_trials;

  if (state.window.size() == static_cast<std::size_t>(kTutorialWindow)) {
    double mean = 0.0, exits = 0.0;
    for (const auto& t : state.window) {
      mean += t.speed;
      exits += t.exits;
    }
    const double n = static_cast<double>(state.window.size());
    mean /= n;
    exits /= n;
    double ss = 0.0;
    for (const auto& t : state.window) ss += (t.speed - mean) * (t.speed - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    const bool steady = mean > 0.0 && sd / mean < kTutorialMaxCv;
    if (steady && exits < kTutorialMaxExits) return TutorialDecision::kPass;
  }
  if (state.tutorial_trials >= kTutorialMaxTrials) return TutorialDecision::kFail;
  return TutorialDecision::kContinue;
}

SessionState advance(SessionState state, const SessionEvent& event) {
  switch (state.phase) {
    case Phase::kTutorial: {
      const auto* done = std::get_if<TrialCompleted>(&event);
      if (!done) illegal(state.phase, event);
      const TutorialDecision d = tutorial_step(state, done->measures);
      if (d == TutorialDecision::kPass) state.phase = Phase::kExperiment;
      if (d == TutorialDecision::kFail) state.phase = Phase::kFailedTutorial;
      return state;
    }
    case Phase::kExperiment: {
      const auto* done = std::get_if<TrialCompleted>(&event);
      if (!done) illegal(state.phase, event);
      ++state.experiment_trials;
      if (state.experiment_trials == kExperimentTrials) {
        state.phase = Phase::kDone;
      } else if (state.experiment_trials % kTrialsPerBlock == 0) {
        state.phase = Phase::kBreak;
        state.break_started_ms = done->t_ms;
      }
      return state;
    }
    case Phase::kBreak: {
      const auto* fin = std::get_if<BreakFinished>(&event);
      if (!fin) illegal(state.phase, event);
      if (fin->t_ms - state.break_started_ms < kBreakMs) {
        throw ProtocolError("break_finished after " + std::to_string(fin->t_ms - state.break_started_ms) +
                            " ms; the break lasts at least 15000 ms");
      }
      state.phase = Phase::kExperiment;
      return state;
    }
    case Phase::kDone:
    case Phase::kFailedTutorial:
      illegal(state.phase, event);
  }
  illegal(state.phase, event);
}

std::optional<PlannedTrial> current_trial(const SessionPlan& plan, const SessionState& state) {
  switch (state.phase) {
    case Phase::kTutorial:
      if (state.tutorial_trials < static_cast<int>(plan.tutorial.size())) {
        return plan.tutorial[static_cast<std::size_t>(state.tutorial_trials)];
      }
      return std::nullopt;
    case Phase::kBreak:
    case Phase::kExperiment:
      if (state.experiment_trials < static_cast<int>(plan.queue.size())) {
        return plan.queue[static_cast<std::size_t>(state.experiment_trials)];
      }
      return std::nullopt;
    case Phase::kDone:
    case Phase::kFailedTutorial:
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace steerlab::session
