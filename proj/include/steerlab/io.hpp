#pragma once

// File formats: trialspec v1 and fitreport v1 (JSON), trajlog v1, and the
// CSV tables for features, repetitions, measures, summaries and heatmaps.

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "steerlab/curvegen.hpp"
#include "steerlab/fitting.hpp"
#include "steerlab/inference.hpp"
#include "steerlab/metrics.hpp"

namespace steerlab::io {

using nlohmann::json;

// Shortest round-trip decimal form.
std::string format_double(double v);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// trialspec v1 ------------------------------------------------------------

json trialspec_to_json(const curvegen::TrialSpec& trial);
// Throws ParseError on missing or mistyped fields.
curvegen::TrialSpec trialspec_from_json(const json& j);

// A trial set file is a JSON array of trialspec v1 documents.
std::vector<curvegen::TrialSpec> read_trialset(const std::filesystem::path& path);
void write_trialset(const std::filesystem::path& path, std::span<const curvegen::TrialSpec> trials);
const curvegen::TrialSpec& find_trial(std::span<const curvegen::TrialSpec> trials, const std::string& id);

// trajlog v1 --------------------------------------------------------------
//
//   trajlog v1,session_id=S,participant_id=P,trial_id=L0-K0,repetition=3,flipped=0
//   t_ms,x,y[,event]
//   ...

// Throws ParseError for malformed text and ValidationError for
// non-monotonic timestamps or illegal event order.
metrics::Trajectory parse_trajlog(std::string_view text);
std::string format_trajlog(const metrics::Trajectory& traj);

// CSV tables --------------------------------------------------------------

struct FeatureRow {
  std::string trial_id;
  models::TrialFeatures features;
};

// Header `trial_id,L,K,mt_mean` with an optional `nl` column before mt_mean.
std::vector<FeatureRow> parse_features_csv(std::string_view text);
std::string format_features_csv(std::span<const FeatureRow> rows);

// Header `trial_id,L,K[,nl],repetition,mt_ms`, one row per repetition.
std::vector<fitting::RepetitionCell> parse_repetitions_csv(std::string_view text);
std::string format_repetitions_csv(std::span<const fitting::RepetitionCell> cells);

inline constexpr std::string_view kMeasuresHeader = "trial_id,participant_id,mt_ms,opm,v_avg,exits,w_e,path_px";

std::string format_measures_csv(std::span<const metrics::MeasureRow> rows);
std::vector<metrics::MeasureRow> parse_measures_csv(std::string_view text);

// Per-trial means and standard deviations across participants.
std::string format_summary_csv(const metrics::Summary& summary);

std::string format_heatmap_csv(const metrics::Heatmap& heatmap);
json heatmap_sidecar(const metrics::Heatmap& heatmap, const std::string& trial_id);

// Analysis ----------------------------------------------------------------

// Measures for each log against its trial; logs are analysed in the given
// order. Throws ReferenceError for an unknown trial id.
std::vector<metrics::MeasureRow> analyze_logs(std::span<const metrics::Trajectory> logs,
                                              std::span<const curvegen::TrialSpec> trials,
                                              double rate = metrics::kDefaultRate);

// L, K and the curvature^(1/3) integral of each trial, with mt_mean from
// the per-trial summary when present.
std::vector<FeatureRow> features_from_summary(std::span<const curvegen::TrialSpec> trials,
                                              const metrics::Summary& summary);

// Per-participant cell means of one measure ("mt", "opm", "v_avg", "exits",
// "w_e", "path") on the L x K grid implied by "L{l}-K{k}" trial ids.
// Throws ShapeError when any participant lacks a cell.
inference::RmDataset rm_dataset(const metrics::Summary& summary, const std::string& measure);

// fitreport v1 ------------------------------------------------------------

json fit_to_json(const fitting::FitResult& fit);
json fitreport(std::span<const fitting::FitResult> fits,
               std::span<const fitting::RankEntry> ranking,
               const std::vector<std::string>& failures = {});
json anova_to_json(const inference::AnovaReport& report, const std::string& measure);
json cv_to_json(std::span<const fitting::CvReport> reports);

}  // namespace steerlab::io
