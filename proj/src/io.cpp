#include "steerlab/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "steerlab/errors.hpp"

namespace steerlab::io {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

// Lines without trailing '\r'; blank lines dropped.
std::vector<std::string_view> lines(std::string_view text) {
  std::vector<std::string_view> out;
  for (std::string_view line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

double parse_double(std::string_view field, std::string_view what) {
  double v = 0.0;
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ParseError("bad number for " + std::string(what) + ": '" + std::string(field) + "'");
  }
  return v;
}

int parse_int(std::string_view field, std::string_view what) {
  int v = 0;
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ParseError("bad integer for " + std::string(what) + ": '" + std::string(field) + "'");
  }
  return v;
}

bool parse_bool(std::string_view field, std::string_view what) {
  if (field == "1" || field == "true") return true;
  if (field == "0" || field == "false") return false;
  throw ParseError("bad boolean for " + std::string(what) + ": '" + std::string(field) + "'");
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(std::string("trialspec is missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("trialspec field '") + key + "' has the wrong type");
  }
}

// Column lookup for headered CSV tables.
class Columns {
 public:
  Columns(std::string_view header, std::vector<std::string> required, std::vector<std::string> optional) {
    const auto names = split(header, ',');
    for (std::size_t i = 0; i < names.size(); ++i) index_[std::string(names[i])] = i;
    for (const auto& r : required) {
      if (!index_.count(r)) throw ParseError("CSV header lacks column '" + r + "'");
    }
    for (const auto& [name, i] : index_) {
      const bool known = std::find(required.begin(), required.end(), name) != required.end() ||
                         std::find(optional.begin(), optional.end(), name) != optional.end();
      if (!known) throw ParseError("unexpected CSV column '" + name + "'");
    }
    width_ = names.size();
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }
  std::string_view get(const std::vector<std::string_view>& row, const std::string& name) const {
    return row[index_.at(name)];
  }
  std::vector<std::string_view> row(std::string_view line, std::size_t line_no) const {
    auto r = split(line, ',');
    if (r.size() != width_) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(width_) + " fields");
    }
    return r;
  }

 private:
  std::map<std::string, std::size_t> index_;
  std::size_t width_ = 0;
};

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

json trialspec_to_json(const curvegen::TrialSpec& trial) {
  json poly = json::array();
  for (const auto& p : trial.polyline) poly.push_back({p.x, p.y});
  return {
      {"trial_id", trial.trial_id},
      {"level_L", trial.level_L},
      {"level_K", trial.level_K},
      {"width_px", trial.width},
      {"x_max_px", trial.sinusoid.x_max},
      {"flipped", trial.sinusoid.flipped},
      {"components", trial.sinusoid.components()},
      {"angle_multipliers", trial.sinusoid.angle_multipliers},
      {"periods", trial.sinusoid.periods},
      {"amplitude_px", trial.sinusoid.amplitude},
      {"length_px", trial.length},
      {"total_curvature", trial.total_curvature},
      {"polyline", poly},
  };
}

curvegen::TrialSpec trialspec_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("trialspec must be a JSON object");
  curvegen::TrialSpec t;
  t.trial_id = field<std::string>(j, "trial_id");
  t.level_L = field<int>(j, "level_L");
  t.level_K = field<int>(j, "level_K");
  t.width = field<double>(j, "width_px");
  t.sinusoid.x_max = field<double>(j, "x_max_px");
  t.sinusoid.flipped = field<bool>(j, "flipped");
  t.sinusoid.angle_multipliers = field<std::vector<int>>(j, "angle_multipliers");
  t.sinusoid.periods = field<double>(j, "periods");
  t.sinusoid.amplitude = field<double>(j, "amplitude_px");
  t.length = field<double>(j, "length_px");
  t.total_curvature = field<double>(j, "total_curvature");
  if (field<int>(j, "components") != t.sinusoid.components()) {
    throw ParseError("components does not match angle_multipliers");
  }
  for (const auto& p : field<std::vector<std::vector<double>>>(j, "polyline")) {
    if (p.size() != 2) throw ParseError("polyline points must be [x, y]");
    t.polyline.push_back({p[0], p[1]});
  }
  if (!(t.width > 0.0)) throw ValidationError("width_px must be positive");
  t.sinusoid.validate();
  return t;
}

std::vector<curvegen::TrialSpec> read_trialset(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw ParseError(path.string() + ": a trial set is a JSON array");
  std::vector<curvegen::TrialSpec> out;
  for (const auto& item : j) out.push_back(trialspec_from_json(item));
  return out;
}

void write_trialset(const std::filesystem::path& path, std::span<const curvegen::TrialSpec> trials) {
  json arr = json::array();
  for (const auto& t : trials) arr.push_back(trialspec_to_json(t));
  write_file(path, arr.dump(1) + "\n");
}

const curvegen::TrialSpec& find_trial(std::span<const curvegen::TrialSpec> trials, const std::string& id) {
  for (const auto& t : trials) {
    if (t.trial_id == id) return t;
  }
  throw ReferenceError("unknown trial id '" + id + "'");
}

metrics::Trajectory parse_trajlog(std::string_view text) {
  const auto ls = lines(text);
  if (ls.empty()) throw ParseError("empty trajlog");
  const auto head = split(ls[0], ',');
  if (head[0] != "trajlog v1") throw ParseError("first line must start with 'trajlog v1'");

  metrics::Trajectory traj;
  std::set<std::string> seen;
  for (std::size_t i = 1; i < head.size(); ++i) {
    const std::size_t eq = head[i].find('=');
    if (eq == std::string_view::npos) throw ParseError("header entry without '=': " + std::string(head[i]));
    const std::string key(head[i].substr(0, eq));
    const std::string_view value = head[i].substr(eq + 1);
    if (!seen.insert(key).second) throw ParseError("duplicate header key " + key);
    if (key == "session_id") traj.session_id = value;
    else if (key == "participant_id") traj.participant_id = value;
    else if (key == "trial_id") traj.trial_id = value;
    else if (key == "repetition") traj.repetition = parse_int(value, key);
    else if (key == "flipped") traj.flipped = parse_bool(value, key);
    else throw ParseError("unknown header key " + key);
  }
  for (const char* key : {"session_id", "participant_id", "trial_id", "repetition", "flipped"}) {
    if (!seen.count(key)) throw ParseError(std::string("header is missing ") + key);
  }

  for (std::size_t i = 1; i < ls.size(); ++i) {
    const auto f = split(ls[i], ',');
    if (i == 1 && f[0] == "t_ms") continue;  // optional column header
    if (f.size() != 3 && f.size() != 4) {
      throw ParseError("line " + std::to_string(i + 1) + ": expected t_ms,x,y[,event]");
    }
    const metrics::Sample s{parse_double(f[0], "t_ms"), parse_double(f[1], "x"), parse_double(f[2], "y")};
    traj.samples.push_back(s);
    if (f.size() == 4 && !f[3].empty()) traj.events.push_back({s.t, metrics::event_from_string(f[3])});
  }
  traj.validate();
  return traj;
}

std::string format_trajlog(const metrics::Trajectory& traj) {
  std::string out = "trajlog v1,session_id=" + traj.session_id + ",participant_id=" + traj.participant_id +
                    ",trial_id=" + traj.trial_id + ",repetition=" + std::to_string(traj.repetition) +
                    ",flipped=" + (traj.flipped ? "1" : "0") + "\n";
  std::size_t next_event = 0;
  for (const auto& s : traj.samples) {
    out += format_double(s.t);
    out += ',';
    out += format_double(s.x);
    out += ',';
    out += format_double(s.y);
    if (next_event < traj.events.size() && traj.events[next_event].t == s.t) {
      out += ',';
      out += metrics::to_string(traj.events[next_event].kind);
      ++next_event;
      if (next_event < traj.events.size() && traj.events[next_event].t == s.t) {
        throw ValidationError("trajlog allows one event per sample");
      }
    }
    out += '\n';
  }
  if (next_event != traj.events.size()) throw ValidationError("event time does not match any sample");
  return out;
}

std::vector<FeatureRow> parse_features_csv(std::string_view text) {
  const auto ls = lines(text);
  if (ls.empty()) throw ParseError("empty features table");
  const Columns cols(ls[0], {"trial_id", "L", "K"}, {"nl", "mt_mean"});
  std::vector<FeatureRow> out;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    const auto r = cols.row(ls[i], i + 1);
    FeatureRow row;
    row.trial_id = cols.get(r, "trial_id");
    row.features.L = parse_double(cols.get(r, "L"), "L");
    row.features.K = parse_double(cols.get(r, "K"), "K");
    if (cols.has("nl") && !cols.get(r, "nl").empty()) row.features.nl = parse_double(cols.get(r, "nl"), "nl");
    if (cols.has("mt_mean") && !cols.get(r, "mt_mean").empty()) {
      row.features.mt_mean = parse_double(cols.get(r, "mt_mean"), "mt_mean");
    }
    row.features.validate();
    out.push_back(row);
  }
  return out;
}

std::string format_features_csv(std::span<const FeatureRow> rows) {
  const bool with_nl = std::any_of(rows.begin(), rows.end(), [](const FeatureRow& r) { return r.features.nl.has_value(); });
  std::string out = with_nl ? "trial_id,L,K,nl,mt_mean\n" : "trial_id,L,K,mt_mean\n";
  for (const auto& r : rows) {
    out += r.trial_id + "," + format_double(r.features.L) + "," + format_double(r.features.K) + ",";
    if (with_nl) out += (r.features.nl ? format_double(*r.features.nl) : "") + ",";
    out += (r.features.mt_mean ? format_double(*r.features.mt_mean) : "") + "\n";
  }
  return out;
}

std::vector<fitting::RepetitionCell> parse_repetitions_csv(std::string_view text) {
  const auto ls = lines(text);
  if (ls.empty()) throw ParseError("empty repetitions table");
  const Columns cols(ls[0], {"trial_id", "L", "K", "repetition", "mt_ms"}, {"nl"});
  std::vector<fitting::RepetitionCell> cells;
  std::map<std::string, std::size_t> where;
  std::map<std::string, std::map<int, double>> reps;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    const auto r = cols.row(ls[i], i + 1);
    const std::string id(cols.get(r, "trial_id"));
    if (!where.count(id)) {
      fitting::RepetitionCell c;
      c.trial_id = id;
      c.features.L = parse_double(cols.get(r, "L"), "L");
      c.features.K = parse_double(cols.get(r, "K"), "K");
      if (cols.has("nl") && !cols.get(r, "nl").empty()) c.features.nl = parse_double(cols.get(r, "nl"), "nl");
      c.features.validate();
      where[id] = cells.size();
      cells.push_back(c);
    }
    const int rep = parse_int(cols.get(r, "repetition"), "repetition");
    if (!reps[id].emplace(rep, parse_double(cols.get(r, "mt_ms"), "mt_ms")).second) {
      throw ParseError(id + ": repetition " + std::to_string(rep) + " listed twice");
    }
  }
  for (auto& c : cells) {
    for (const auto& [rep, mt] : reps[c.trial_id]) c.mt_reps.push_back(mt);
  }
  return cells;
}

std::string format_repetitions_csv(std::span<const fitting::RepetitionCell> cells) {
  const bool with_nl = std::any_of(cells.begin(), cells.end(), [](const auto& c) { return c.features.nl.has_value(); });
  std::string out = with_nl ? "trial_id,L,K,nl,repetition,mt_ms\n" : "trial_id,L,K,repetition,mt_ms\n";
  for (const auto& c : cells) {
    for (std::size_t r = 0; r < c.mt_reps.size(); ++r) {
      out += c.trial_id + "," + format_double(c.features.L) + "," + format_double(c.features.K) + ",";
      if (with_nl) out += (c.features.nl ? format_double(*c.features.nl) : "") + ",";
      out += std::to_string(r) + "," + format_double(c.mt_reps[r]) + "\n";
    }
  }
  return out;
}

std::string format_measures_csv(std::span<const metrics::MeasureRow> rows) {
  std::string out(kMeasuresHeader);
  out += '\n';
  for (const auto& r : rows) {
    const auto& m = r.measures;
    out += r.trial_id + "," + r.participant_id + "," + format_double(m.mt) + "," + format_double(m.opm) + "," +
           format_double(m.v_avg) + "," + std::to_string(m.exits) + "," + format_double(m.w_e) + "," +
           format_double(m.path_distance) + "\n";
  }
  return out;
}

std::vector<metrics::MeasureRow> parse_measures_csv(std::string_view text) {
  const auto ls = lines(text);
  if (ls.empty() || ls[0] != kMeasuresHeader) {
    throw ParseError("measures table must start with '" + std::string(kMeasuresHeader) + "'");
  }
  std::vector<metrics::MeasureRow> out;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    const auto f = split(ls[i], ',');
    if (f.size() != 8) throw ParseError("line " + std::to_string(i + 1) + ": expected 8 fields");
    metrics::MeasureRow r;
    r.trial_id = f[0];
    r.participant_id = f[1];
    r.measures.mt = parse_double(f[2], "mt_ms");
    r.measures.opm = parse_double(f[3], "opm");
    r.measures.v_avg = parse_double(f[4], "v_avg");
    r.measures.exits = parse_int(f[5], "exits");
    r.measures.w_e = parse_double(f[6], "w_e");
    r.measures.path_distance = parse_double(f[7], "path_px");
    out.push_back(r);
  }
  return out;
}

std::string format_summary_csv(const metrics::Summary& summary) {
  std::string out =
      "trial_id,participants,mt_mean,mt_sd,opm_mean,opm_sd,v_avg_mean,v_avg_sd,exits_mean,exits_sd,"
      "w_e_mean,w_e_sd,path_mean,path_sd\n";
  for (const auto& t : summary.per_trial) {
    out += t.trial_id + "," + std::to_string(t.participants);
    for (const auto* m : {&t.mt, &t.opm, &t.v_avg, &t.exits, &t.w_e, &t.path_distance}) {
      out += "," + format_double(m->mean) + "," + format_double(m->sd);
    }
    out += "\n";
  }
  return out;
}

std::string format_heatmap_csv(const metrics::Heatmap& heatmap) {
  std::string out;
  for (std::size_t r = 0; r < heatmap.rows; ++r) {
    for (std::size_t c = 0; c < heatmap.cols; ++c) {
      if (c) out += ',';
      out += std::to_string(heatmap.at(r, c));
    }
    out += '\n';
  }
  return out;
}

json heatmap_sidecar(const metrics::Heatmap& heatmap, const std::string& trial_id) {
  return {{"trial_id", trial_id},
          {"origin_x_px", heatmap.origin.x},
          {"origin_y_px", heatmap.origin.y},
          {"cell_px", heatmap.cell},
          {"rows", heatmap.rows},
          {"cols", heatmap.cols},
          {"out_of_bounds", heatmap.out_of_bounds},
          {"total", heatmap.total()}};
}

std::vector<metrics::MeasureRow> analyze_logs(std::span<const metrics::Trajectory> logs,
                                              std::span<const curvegen::TrialSpec> trials, double rate) {
  std::map<std::pair<std::string, bool>, geometry::OffsetIndex> indexes;
  std::vector<metrics::MeasureRow> rows;
  rows.reserve(logs.size());
  for (const auto& log : logs) {
    const auto key = std::make_pair(log.trial_id, log.flipped);
    auto it = indexes.find(key);
    if (it == indexes.end()) {
      const auto& trial = find_trial(trials, log.trial_id);
      it = indexes.emplace(key, geometry::OffsetIndex(curvegen::make_tunnel(trial, log.flipped))).first;
    }
    rows.push_back({log.trial_id, log.participant_id, log.repetition, metrics::analyze_trial(log, it->second, rate)});
  }
  return rows;
}

std::vector<FeatureRow> features_from_summary(std::span<const curvegen::TrialSpec> trials,
                                              const metrics::Summary& summary) {
  std::vector<const curvegen::TrialSpec*> sorted;
  for (const auto& t : trials) sorted.push_back(&t);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->trial_id < b->trial_id; });
  std::vector<FeatureRow> out;
  for (const auto* t : sorted) {
    FeatureRow row;
    row.trial_id = t->trial_id;
    row.features.L = t->length;
    row.features.K = t->total_curvature;
    row.features.nl = geometry::nl_integral(curvegen::realize(t->sinusoid));
    for (const auto& s : summary.per_trial) {
      if (s.trial_id == t->trial_id) row.features.mt_mean = s.mt.mean;
    }
    out.push_back(row);
  }
  return out;
}

inference::RmDataset rm_dataset(const metrics::Summary& summary, const std::string& measure) {
  double metrics::MeanMeasures::*field = nullptr;
  if (measure == "mt") field = &metrics::MeanMeasures::mt;
  else if (measure == "opm") field = &metrics::MeanMeasures::opm;
  else if (measure == "v_avg") field = &metrics::MeanMeasures::v_avg;
  else if (measure == "exits") field = &metrics::MeanMeasures::exits;
  else if (measure == "w_e") field = &metrics::MeanMeasures::w_e;
  else if (measure == "path") field = &metrics::MeanMeasures::path_distance;
  else throw ValidationError("unknown measure '" + measure + "'");

  std::set<std::string> participants;
  int max_l = -1, max_k = -1;
  for (const auto& ps : summary.per_participant) {
    const auto [l, k] = curvegen::parse_trial_id(ps.trial_id);
    max_l = std::max(max_l, l);
    max_k = std::max(max_k, k);
    participants.insert(ps.participant_id);
  }
  inference::RmDataset d;
  d.participants = participants.size();
  d.levels_a = static_cast<std::size_t>(max_l + 1);
  d.levels_b = static_cast<std::size_t>(max_k + 1);
  d.values.assign(d.participants * d.levels_a * d.levels_b, 0.0);
  std::vector<char> filled(d.values.size(), 0);
  const std::vector<std::string> order(participants.begin(), participants.end());
  for (const auto& ps : summary.per_participant) {
    const auto [l, k] = curvegen::parse_trial_id(ps.trial_id);
    const auto p = static_cast<std::size_t>(std::lower_bound(order.begin(), order.end(), ps.participant_id) - order.begin());
    d.at(p, static_cast<std::size_t>(l), static_cast<std::size_t>(k)) = ps.mean.*field;
    filled[(p * d.levels_a + static_cast<std::size_t>(l)) * d.levels_b + static_cast<std::size_t>(k)] = 1;
  }
  for (std::size_t i = 0; i < filled.size(); ++i) {
    if (!filled[i]) {
      const std::size_t p = i / (d.levels_a * d.levels_b);
      throw ShapeError("participant " + order[p] + " is missing cell " +
                       curvegen::trial_id(static_cast<int>(i / d.levels_b % d.levels_a), static_cast<int>(i % d.levels_b)));
    }
  }
  return d;
}

json fit_to_json(const fitting::FitResult& fit) {
  json coefs = json::array();
  for (std::size_t j = 0; j < fit.coefficients.size(); ++j) {
    coefs.push_back({{"name", fit.names[j]},
                     {"estimate", fit.coefficients[j]},
                     {"se", number_or_null(fit.standard_errors[j])},
                     {"ci95_low", number_or_null(fit.ci95_low[j])},
                     {"ci95_high", number_or_null(fit.ci95_high[j])},
                     {"p", number_or_null(fit.p_values[j])},
                     {"stars", fitting::significance_stars(fit.p_values[j])}});
  }
  json j = {{"form_id", fit.form ? std::string(models::to_string(fit.form->id)) : "linear"},
            {"intercept", fit.form ? fit.form->intercept : true},
            {"label", fit.label()},
            {"coefficients", coefs},
            {"r2", number_or_null(fit.r2)},
            {"r2_adjusted", number_or_null(fit.r2_adjusted)},
            {"aic", number_or_null(fit.aic)},
            {"rss", fit.rss},
            {"n_points", fit.n_points},
            {"iterations", fit.iterations},
            {"warnings", fit.warnings}};
  if (fit.log_scale) {
    j["log_scale"] = {{"coefficients", fit.log_scale->coefficients},
                      {"rss", fit.log_scale->rss},
                      {"r2_adjusted", number_or_null(fit.log_scale->r2_adjusted)}};
  }
  return j;
}

json fitreport(std::span<const fitting::FitResult> fits, std::span<const fitting::RankEntry> ranking,
               const std::vector<std::string>& failures) {
  json models = json::array();
  for (const auto& r : ranking) {
    json m = fit_to_json(fits[r.fit_index]);
    m["rank"] = r.rank;
    m["delta_aic"] = number_or_null(r.delta_aic);
    m["comparable"] = r.comparable;
    m["valid"] = r.valid;
    models.push_back(m);
  }
  return {{"format", "fitreport v1"}, {"models", models}, {"failures", failures}};
}

json anova_to_json(const inference::AnovaReport& report, const std::string& measure) {
  json effects = json::array();
  for (const auto& e : report.effects) {
    effects.push_back({{"effect", e.effect},
                       {"F", number_or_null(e.F)},
                       {"df_effect", e.df_effect},
                       {"df_error", e.df_error},
                       {"gg_epsilon", e.gg_epsilon},
                       {"p", e.p},
                       {"p_uncorrected", e.p_uncorrected},
                       {"partial_eta_sq", e.partial_eta_sq},
                       {"ss_effect", e.ss_effect},
                       {"ss_error", e.ss_error},
                       {"degenerate", e.degenerate}});
  }
  return {{"format", "fitreport v1"},
          {"measure", measure},
          {"effects", effects},
          {"ss_within", report.ss_within},
          {"ss_subjects", report.ss_subjects},
          {"warnings", report.warnings}};
}

json cv_to_json(std::span<const fitting::CvReport> reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    arr.push_back({{"form_id", std::string(models::to_string(r.form.id))},
                   {"label", models::label(r.form)},
                   {"fold_rmse", r.fold_rmse},
                   {"mean_rmse", r.mean_rmse},
                   {"folds", r.folds}});
  }
  return {{"format", "fitreport v1"}, {"cross_validation", arr}};
}

}  // namespace steerlab::io
