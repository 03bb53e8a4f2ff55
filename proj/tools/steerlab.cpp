// steerlab command-line interface.
//
// Exit status: 0 on success, 2 for usage or validation errors, 1 for
// internal errors.

#include <CLI11.hpp>

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "steerlab/curvegen.hpp"
#include "steerlab/errors.hpp"
#include "steerlab/fitting.hpp"
#include "steerlab/inference.hpp"
#include "steerlab/io.hpp"
#include "steerlab/metrics.hpp"
#include "steerlab/models.hpp"
#include "steerlab/service.hpp"
#include "steerlab/simulator.hpp"

namespace fs = std::filesystem;
using namespace steerlab;

namespace {

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
  } else {
    io::write_file(out_path, content);
  }
}

models::ModelForm parse_form(const std::string& label) {
  const std::string suffix = "/no-intercept";
  if (label.size() > suffix.size() && label.compare(label.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return {models::form_from_string(label.substr(0, label.size() - suffix.size())), false};
  }
  return {models::form_from_string(label), true};
}

std::vector<models::ModelForm> parse_forms(const std::string& spec) {
  if (spec == "all") return fitting::standard_forms();
  std::vector<models::ModelForm> forms;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) forms.push_back(parse_form(item));
  }
  if (forms.empty()) throw ValidationError("no model forms given");
  return forms;
}

curvegen::LengthBand parse_band(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ParseError("length band must be lo:hi, got '" + text + "'");
  double lo = 0.0, hi = 0.0;
  try {
    lo = std::stod(text.substr(0, colon));
    hi = std::stod(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw ParseError("length band must be lo:hi, got '" + text + "'");
  }
  if (!(hi > lo)) throw ValidationError("length band needs hi > lo");
  return {(lo + hi) / 2.0, (hi - lo) / 2.0};
}

std::vector<fs::path> collect_logs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& e : fs::recursive_directory_iterator(in)) {
        if (e.is_regular_file() && e.path().extension() == ".trajlog") files.push_back(e.path());
      }
    } else if (fs::is_regular_file(in)) {
      files.push_back(in);
    } else {
      throw ValidationError("no such log file or directory: " + in);
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

// gen ----------------------------------------------------------------------

struct GenArgs {
  std::vector<double> k_targets;
  std::vector<std::string> bands;
  std::string out;
  double min_radius = 15.0;
  double width = curvegen::kDefaultWidth;
  bool candidates = false;
};

int run_gen(const GenArgs& a) {
  curvegen::GridSearchConfig cfg;
  if (!a.k_targets.empty()) cfg.k_targets = a.k_targets;
  if (!a.bands.empty()) {
    cfg.bands.clear();
    for (const auto& b : a.bands) cfg.bands.push_back(parse_band(b));
  }
  cfg.min_radius = a.min_radius;
  cfg.width = a.width;
  auto result = curvegen::grid_search(cfg);
  for (const auto& [cell, n] : result.cell_counts) {
    std::cerr << curvegen::trial_id(cell.first, cell.second) << ": " << n << " candidates\n";
  }
  std::cerr << result.diagnostics.size() << " grid points skipped\n";

  std::vector<curvegen::TrialSpec> out;
  if (a.candidates) {
    out = result.candidates;
  } else {
    out = curvegen::assemble_trialset(result.candidates, curvegen::SelectionPolicy::kMinLengthSpread,
                                      static_cast<int>(cfg.bands.size()), static_cast<int>(cfg.k_targets.size()));
  }
  if (out.empty()) throw ValidationError("grid search found no candidates");
  for (auto& t : out) curvegen::attach_polyline(t);
  io::json arr = io::json::array();
  for (const auto& t : out) arr.push_back(io::trialspec_to_json(t));
  emit(a.out, arr.dump(1) + "\n");
  return 0;
}

// fit / crossval -----------------------------------------------------------

int run_fit(const std::string& data, const std::string& forms_spec, const std::string& out) {
  const auto rows = io::parse_features_csv(io::read_file(data));
  std::vector<models::TrialFeatures> features;
  for (const auto& r : rows) features.push_back(r.features);
  const auto forms = parse_forms(forms_spec);
  const auto batch = fitting::fit_all(features, forms);
  if (batch.fits.empty()) throw ValidationError("no model could be fitted");
  emit(out, io::fitreport(batch.fits, batch.ranking, batch.failures).dump(1) + "\n");
  for (const auto& f : batch.failures) std::cerr << "skipped " << f << "\n";
  return 0;
}

int run_crossval(const std::string& data, const std::string& forms_spec, int folds, const std::string& scheme,
                 std::uint64_t seed, const std::string& out) {
  const auto cells = io::parse_repetitions_csv(io::read_file(data));
  if (cells.empty()) throw ValidationError("no repetitions");
  const int reps = static_cast<int>(cells.front().mt_reps.size());
  const auto fold_scheme = scheme == "random" ? fitting::FoldScheme::kSeededRandom : fitting::FoldScheme::kContiguous;
  if (scheme != "random" && scheme != "contiguous") throw ValidationError("scheme must be contiguous or random");
  const auto fold_defs = fitting::make_folds(reps, folds, fold_scheme, seed);
  std::vector<fitting::CvReport> reports;
  for (const auto& form : parse_forms(forms_spec)) {
    try {
      reports.push_back(fitting::cross_validate(cells, form, fold_defs));
    } catch (const MissingFeatureError& e) {
      std::cerr << "skipped " << models::label(form) << ": " << e.what() << "\n";
    }
  }
  std::stable_sort(reports.begin(), reports.end(),
                   [](const auto& x, const auto& y) { return x.mean_rmse < y.mean_rmse; });
  emit(out, io::cv_to_json(reports).dump(1) + "\n");
  return 0;
}

// analyze ------------------------------------------------------------------

struct AnalyzeArgs {
  std::string trials;
  std::vector<std::string> logs;
  std::string out;
  std::string summary;
  std::string features;
  std::string heatmap_dir;
  double cell = 10.0;
  double rate = metrics::kDefaultRate;
};

int run_analyze(const AnalyzeArgs& a) {
  const auto trials = io::read_trialset(a.trials);
  std::vector<metrics::Trajectory> logs;
  for (const auto& path : collect_logs(a.logs)) {
    try {
      logs.push_back(io::parse_trajlog(io::read_file(path)));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
  }
  const auto rows = io::analyze_logs(logs, trials, a.rate);
  emit(a.out, io::format_measures_csv(rows));

  std::vector<std::string> ids;
  for (const auto& t : trials) ids.push_back(t.trial_id);
  const auto summary = metrics::summarize(rows, ids);
  if (!a.summary.empty()) io::write_file(a.summary, io::format_summary_csv(summary));
  if (!a.features.empty()) {
    io::write_file(a.features, io::format_features_csv(io::features_from_summary(trials, summary)));
  }
  if (!a.heatmap_dir.empty()) {
    std::map<std::string, std::vector<metrics::Trajectory>> by_trial;
    for (const auto& log : logs) by_trial[log.trial_id].push_back(metrics::resample(log, a.rate));
    for (const auto& [id, list] : by_trial) {
      const auto& trial = io::find_trial(trials, id);
      const auto h = metrics::heatmap(list, curvegen::make_tunnel(trial, false), a.cell);
      io::write_file(fs::path(a.heatmap_dir) / (id + ".csv"), io::format_heatmap_csv(h));
      io::write_file(fs::path(a.heatmap_dir) / (id + ".json"), io::heatmap_sidecar(h, id).dump(1) + "\n");
    }
  }
  return 0;
}

int run_anova(const std::string& measures, const std::string& measure, const std::string& out) {
  const auto rows = io::parse_measures_csv(io::read_file(measures));
  const auto summary = metrics::summarize(rows);
  const auto report = inference::rm_anova(io::rm_dataset(summary, measure));
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  emit(out, io::anova_to_json(report, measure).dump(1) + "\n");
  return 0;
}

// simulate -----------------------------------------------------------------

int run_simulate(const std::string& trials_path, const simulator::CorpusConfig& cfg, const std::string& out_dir) {
  if (out_dir.empty()) throw ValidationError("--out directory is required");
  const auto trials = io::read_trialset(trials_path);
  const auto corpus = simulator::simulate_corpus(trials, cfg);
  for (const auto& traj : corpus) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_r%02d.trajlog", traj.trial_id.c_str(), traj.repetition);
    io::write_file(fs::path(out_dir) / traj.participant_id / name, io::format_trajlog(traj));
  }
  std::cerr << corpus.size() << " logs written to " << out_dir << "\n";
  return 0;
}

int run_models_list() {
  for (const auto& e : models::catalog()) {
    std::string req;
    for (const auto& f : e.required_features) req += (req.empty() ? "" : ",") + f;
    std::cout << models::to_string(e.id) << "\t" << e.formula << "\t" << req << "\n";
  }
  return 0;
}

service::Service* g_service = nullptr;

int run_serve(const std::string& trials_path, const std::string& host, int port, const std::string& data_dir) {
  service::ServiceConfig cfg;
  cfg.trials = io::read_trialset(trials_path);
  cfg.data_dir = service::resolve_data_dir(data_dir);
  service::Service svc(std::move(cfg));
  const int bound = svc.bind(host, port);
  std::cerr << "listening on http://" << host << ":" << bound << "\n";
  g_service = &svc;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->stop();
  });
  svc.run();
  g_service = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"steerlab: curvature-aware steering law toolkit"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "grid-search sinusoidal tunnels and write a trial set");
  gen_cmd->add_option("--k", gen.k_targets, "total-curvature targets (default 10 16 22)");
  gen_cmd->add_option("--l-band", gen.bands, "length bands lo:hi (default: the three design bands)");
  gen_cmd->add_option("--out", gen.out, "output JSON (default stdout)");
  gen_cmd->add_option("--min-radius", gen.min_radius, "smallest admissible radius of curvature, px");
  gen_cmd->add_option("--width", gen.width, "tunnel width, px");
  gen_cmd->add_flag("--candidates", gen.candidates, "write every candidate instead of one per cell");
  gen_cmd->add_option("--seed", seed, "unused; accepted for uniformity");

  std::string data, forms = "all", out;
  auto* fit_cmd = app.add_subcommand("fit", "fit movement-time models to a features CSV");
  fit_cmd->add_option("--data", data, "features CSV (trial_id,L,K[,nl],mt_mean)")->required();
  fit_cmd->add_option("--models", forms, "'all' or comma-separated labels, e.g. LIU/no-intercept");
  fit_cmd->add_option("--out", out, "fit report JSON (default stdout)");
  fit_cmd->add_option("--seed", seed, "unused; accepted for uniformity");

  int folds = 5;
  std::string scheme = "contiguous";
  auto* cv_cmd = app.add_subcommand("crossval", "repetition-fold cross-validation");
  cv_cmd->add_option("--data", data, "repetitions CSV (trial_id,L,K[,nl],repetition,mt_ms)")->required();
  cv_cmd->add_option("--models", forms, "'all' or comma-separated labels");
  cv_cmd->add_option("--folds", folds, "number of folds");
  cv_cmd->add_option("--scheme", scheme, "contiguous or random");
  cv_cmd->add_option("--seed", seed, "seed for the random fold scheme");
  cv_cmd->add_option("--out", out, "report JSON (default stdout)");

  AnalyzeArgs an;
  auto* an_cmd = app.add_subcommand("analyze", "measures, summaries and heatmaps from trajectory logs");
  an_cmd->add_option("--trials", an.trials, "trial set JSON")->required();
  an_cmd->add_option("--logs", an.logs, "trajlog files or directories")->required();
  an_cmd->add_option("--out", an.out, "measures CSV (default stdout)");
  an_cmd->add_option("--summary", an.summary, "per-trial summary CSV");
  an_cmd->add_option("--features", an.features, "features CSV for `fit`");
  an_cmd->add_option("--heatmap-dir", an.heatmap_dir, "directory for heatmap CSV and sidecars");
  an_cmd->add_option("--cell", an.cell, "heatmap cell size, px");
  an_cmd->add_option("--rate", an.rate, "resampling rate, Hz");
  an_cmd->add_option("--seed", seed, "unused; accepted for uniformity");

  std::string measures, measure = "mt";
  auto* anova_cmd = app.add_subcommand("anova", "two-way repeated-measures ANOVA on a measures CSV");
  anova_cmd->add_option("--measures", measures, "measures CSV from `analyze`")->required();
  anova_cmd->add_option("--measure", measure, "mt, opm, v_avg, exits, w_e or path");
  anova_cmd->add_option("--out", out, "report JSON (default stdout)");
  anova_cmd->add_option("--seed", seed, "unused; accepted for uniformity");

  std::string trials_path;
  simulator::CorpusConfig sim;
  auto* sim_cmd = app.add_subcommand("simulate", "write a synthetic trajectory corpus");
  sim_cmd->add_option("--trials", trials_path, "trial set JSON")->required();
  sim_cmd->add_option("--participants", sim.participants, "number of participants");
  sim_cmd->add_option("--reps", sim.repetitions, "repetitions per trial");
  sim_cmd->add_option("--seed", sim.agent.seed, "random seed");
  sim_cmd->add_option("--base-speed", sim.agent.base_speed, "px/ms");
  sim_cmd->add_option("--gain", sim.agent.curvature_gain, "curvature gain r, px");
  sim_cmd->add_option("--slowdown", sim.agent.slowdown, "slowdown exponent");
  sim_cmd->add_option("--noise", sim.agent.lateral_noise_sd, "lateral noise sd, px");
  sim_cmd->add_option("--learning", sim.agent.learning_rate, "practice exponent");
  sim_cmd->add_option("--out", out, "output directory")->required();

  auto* models_cmd = app.add_subcommand("models", "model catalog");
  models_cmd->require_subcommand(1);
  auto* list_cmd = models_cmd->add_subcommand("list", "list model forms");

  std::string host = "127.0.0.1", data_dir = "sessions";
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service for the web runner");
  serve_cmd->add_option("--trials", trials_path, "trial set JSON")->required();
  serve_cmd->add_option("--host", host, "bind address");
  serve_cmd->add_option("--port", port, "port (0 picks a free one)");
  serve_cmd->add_option("--data-dir", data_dir, "session directory (STEERLAB_DATA_DIR overrides)");
  serve_cmd->add_option("--seed", seed, "unused; sessions carry their own seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen);
    if (fit_cmd->parsed()) return run_fit(data, forms, out);
    if (cv_cmd->parsed()) return run_crossval(data, forms, folds, scheme, seed, out);
    if (an_cmd->parsed()) return run_analyze(an);
    if (anova_cmd->parsed()) return run_anova(measures, measure, out);
    if (sim_cmd->parsed()) return run_simulate(trials_path, sim, out);
    if (list_cmd->parsed()) return run_models_list();
    if (serve_cmd->parsed()) return run_serve(trials_path, host, port, data_dir);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
