#include "vc/json_io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace vc {

namespace fs = std::filesystem;
using ordered = nlohmann::ordered_json;

namespace {

std::string fmt(double x) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

double parse_double(std::string_view sv, const char* what) {
  double x = 0;
  auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), x);
  if (ec != std::errc() || p != sv.data() + sv.size())
    throw ValidationError(std::string("bad number in ") + what + ": " +
                          std::string(sv));
  return x;
}

long parse_long(std::string_view sv, const char* what) {
  long x = 0;
  auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), x);
  if (ec != std::errc() || p != sv.data() + sv.size())
    throw ValidationError(std::string("bad integer in ") + what + ": " +
                          std::string(sv));
  return x;
}

ordered read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return ordered::parse(in);
  } catch (const std::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

const ordered& require(const ordered& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end())
    throw ValidationError(ctx + ": missing field '" + key + "'");
  return *it;
}

TrainParams train_from_json(const ordered& j, const std::string& ctx) {
  TrainParams p;
  p.name = require(j, "name", ctx).get<std::string>();
  p.mass_kg = require(j, "mass_kg", ctx).get<double>();
  p.length_m = require(j, "length_m", ctx).get<double>();
  p.davis_a = require(j, "davis_a", ctx).get<double>();
  p.davis_b = require(j, "davis_b", ctx).get<double>();
  p.davis_c = require(j, "davis_c", ctx).get<double>();
  p.tau_s = require(j, "tau_s", ctx).get<double>();
  p.f_traction_max = require(j, "f_traction_max", ctx).get<double>();
  p.f_brake_max = require(j, "f_brake_max", ctx).get<double>();
  p.p_traction_max = require(j, "p_traction_max", ctx).get<double>();
  p.p_brake_max = require(j, "p_brake_max", ctx).get<double>();
  p.brake_rate_lead = require(j, "brake_rate_lead", ctx).get<double>();
  p.brake_rate_self = require(j, "brake_rate_self", ctx).get<double>();
  p.adhesion_mu = require(j, "adhesion_mu", ctx).get<double>();
  p.validate();
  return p;
}

ordered train_to_json(const TrainParams& p) {
  ordered j;
  j["name"] = p.name;
  j["mass_kg"] = p.mass_kg;
  j["length_m"] = p.length_m;
  j["davis_a"] = p.davis_a;
  j["davis_b"] = p.davis_b;
  j["davis_c"] = p.davis_c;
  j["tau_s"] = p.tau_s;
  j["f_traction_max"] = p.f_traction_max;
  j["f_brake_max"] = p.f_brake_max;
  j["p_traction_max"] = p.p_traction_max;
  j["p_brake_max"] = p.p_brake_max;
  j["brake_rate_lead"] = p.brake_rate_lead;
  j["brake_rate_self"] = p.brake_rate_self;
  j["adhesion_mu"] = p.adhesion_mu;
  return j;
}

LineProfile line_from_json(const ordered& j, const std::string& ctx) {
  LineProfile line;
  line.name = require(j, "name", ctx).get<std::string>();
  line.length_m = require(j, "length_m", ctx).get<double>();
  for (const auto& js : require(j, "sections", ctx)) {
    Section s;
    s.from_m = require(js, "from_m", ctx).get<double>();
    s.to_m = require(js, "to_m", ctx).get<double>();
    s.grade = require(js, "grade", ctx).get<double>();
    s.curvature = js.value("curvature", 0.0);
    s.speed_limit = require(js, "speed_limit", ctx).get<double>();
    line.sections.push_back(s);
  }
  for (const auto& js : require(j, "stations", ctx)) {
    Station st;
    st.position_m = require(js, "position_m", ctx).get<double>();
    st.dwell_s = js.value("dwell_s", 0.0);
    line.stations.push_back(st);
  }
  line.validate();
  return line;
}

ordered line_to_json(const LineProfile& line) {
  ordered j;
  j["name"] = line.name;
  j["length_m"] = line.length_m;
  j["sections"] = ordered::array();
  for (const auto& s : line.sections) {
    ordered js;
    js["from_m"] = s.from_m;
    js["to_m"] = s.to_m;
    js["grade"] = s.grade;
    js["curvature"] = s.curvature;
    js["speed_limit"] = s.speed_limit;
    j["sections"].push_back(js);
  }
  j["stations"] = ordered::array();
  for (const auto& st : line.stations) {
    ordered js;
    js["position_m"] = st.position_m;
    js["dwell_s"] = st.dwell_s;
    j["stations"].push_back(js);
  }
  return j;
}

void apply_controller_json(ControllerConfig& cfg, const ordered& j,
                           const std::string& ctx) {
  auto num = [&](const char* key, double& out) {
    if (j.contains(key)) out = j[key].get<double>();
  };
  auto integer = [&](const char* key, int& out) {
    if (j.contains(key)) out = j[key].get<int>();
  };
  num("t_s", cfg.t_s);
  integer("h_p", cfg.h_p);
  integer("h_c", cfg.h_c);
  num("v_max", cfg.v_max);
  num("v_min", cfg.v_min);
  num("j_max", cfg.j_max);
  num("d_des", cfg.d_des);
  num("d_min", cfg.d_min);
  num("w_eps_vmax", cfg.w_eps_vmax);
  num("w_eps_vmin", cfg.w_eps_vmin);
  num("w_eps_drel", cfg.w_eps_drel);
  num("w_eps_d", cfg.w_eps_d);
  integer("sqp_max_passes", cfg.sqp_max_passes);
  num("sqp_step_tol", cfg.sqp_step_tol);
  num("grid_ds", cfg.grid_ds);
  if (j.contains("qf_mode")) {
    const std::string m = j["qf_mode"].get<std::string>();
    if (m == "cost_to_go")
      cfg.qf_mode = QfMode::CostToGo;
    else if (m == "stage_only")
      cfg.qf_mode = QfMode::StageOnly;
    else
      throw ValidationError(ctx + ": unknown qf_mode '" + m + "'");
  }
  if (j.contains("qp")) {
    const auto& jq = j["qp"];
    if (jq.contains("eps")) cfg.qp.eps = jq["eps"].get<double>();
    if (jq.contains("max_iterations"))
      cfg.qp.max_iterations = jq["max_iterations"].get<int>();
    if (jq.contains("sigma")) cfg.qp.sigma = jq["sigma"].get<double>();
    if (jq.contains("alpha")) cfg.qp.alpha = jq["alpha"].get<double>();
  }
}

ordered controller_to_json(const ControllerConfig& cfg) {
  ordered j;
  j["t_s"] = cfg.t_s;
  j["h_p"] = cfg.h_p;
  j["h_c"] = cfg.h_c;
  j["v_max"] = cfg.v_max;
  j["v_min"] = cfg.v_min;
  j["j_max"] = cfg.j_max;
  j["d_des"] = cfg.d_des;
  j["d_min"] = cfg.d_min;
  j["w_eps_vmax"] = cfg.w_eps_vmax;
  j["w_eps_vmin"] = cfg.w_eps_vmin;
  j["w_eps_drel"] = cfg.w_eps_drel;
  j["w_eps_d"] = cfg.w_eps_d;
  j["sqp_max_passes"] = cfg.sqp_max_passes;
  j["sqp_step_tol"] = cfg.sqp_step_tol;
  j["qf_mode"] = cfg.qf_mode == QfMode::CostToGo ? "cost_to_go" : "stage_only";
  j["grid_ds"] = cfg.grid_ds;
  j["qp"] = ordered{{"eps", cfg.qp.eps},
                    {"max_iterations", cfg.qp.max_iterations},
                    {"sigma", cfg.qp.sigma},
                    {"alpha", cfg.qp.alpha}};
  return j;
}

void hash_mix(std::uint64_t& h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  h ^= '|';
  h *= 1099511628211ULL;
}

std::string hash_hex(std::uint64_t h) {
  char buf[20] = "0x";
  auto [p, ec] = std::to_chars(buf + 2, buf + sizeof buf, h, 16);
  return std::string(buf, p);
}

std::uint64_t hash_from_hex(const std::string& s, const std::string& ctx) {
  if (s.size() < 3 || s[0] != '0' || s[1] != 'x')
    throw ValidationError(ctx + ": bad hash literal '" + s + "'");
  std::uint64_t h = 0;
  auto [p, ec] = std::from_chars(s.data() + 2, s.data() + s.size(), h, 16);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ValidationError(ctx + ": bad hash literal '" + s + "'");
  return h;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::vector<TrainRunView> make_views(const ScenarioConfig& sc,
                                     const std::vector<IterationTrace>& traces,
                                     const std::vector<SpeedProfile>& profiles) {
  std::vector<TrainRunView> views;
  for (size_t n = 0; n < sc.trains.size(); ++n) {
    TrainRunView v;
    v.name = sc.trains[n].name;
    v.params = &sc.trains[n].params;
    v.trace = &traces[n];
    v.profile = &profiles[n];
    if (n > 0) {
      v.pred_trace = &traces[n - 1];
      v.pred_length = sc.trains[n - 1].params.length_m;
    }
    views.push_back(v);
  }
  return views;
}

ordered segment_to_json(const SegmentReport& seg) {
  ordered j;
  j["label"] = seg.label;
  j["from_m"] = seg.from_m;
  j["to_m"] = seg.to_m;
  j["specific_energy"] = seg.ef.specific_energy;
  j["specific_energy_net"] = seg.ef.specific_energy_net;
  j["force_average"] = seg.ef.force_average;
  j["traction_force_average"] = seg.ef.traction_force_average;
  j["steps"] = seg.steps;
  j["stage_cost_sum"] = seg.stage_cost_sum;
  j["max_distance"] = seg.max_distance;
  return j;
}

ordered metrics_to_json(const MetricsReport& rep) {
  ordered j;
  j["line"] = rep.line_name;
  j["simulated_s"] = rep.simulated_time_s;
  j["trains"] = ordered::array();
  for (const auto& tr : rep.trains) {
    ordered jt;
    jt["name"] = tr.name;
    jt["follower"] = tr.follower;
    jt["travel_time_s"] = tr.travel_time_s;
    jt["avg_stage_cost"] = tr.avg_stage_cost;
    jt["line"] = segment_to_json(tr.line);
    jt["segments"] = ordered::array();
    for (const auto& seg : tr.segments) jt["segments"].push_back(segment_to_json(seg));
    j["trains"].push_back(std::move(jt));
  }
  j["convoy"] = ordered{{"specific_energy", rep.convoy_specific_energy},
                        {"force_average", rep.convoy_force_average}};
  return j;
}

}  // namespace

TrainParams load_train(const std::string& path) {
  return train_from_json(read_json_file(path), path);
}

LineProfile load_line(const std::string& path) {
  return line_from_json(read_json_file(path), path);
}

ScenarioConfig load_scenario(const std::string& path) {
  const ordered j = read_json_file(path);
  const fs::path dir = fs::path(path).parent_path();
  ScenarioConfig sc;
  sc.name = require(j, "name", path).get<std::string>();
  const auto& jline = require(j, "line", path);
  sc.line = jline.is_string()
                ? load_line((dir / jline.get<std::string>()).string())
                : line_from_json(jline, path);
  sc.iterations = j.value("iterations", 10);
  for (const auto& jt : require(j, "trains", path)) {
    ScenarioTrain t;
    const auto& jp = require(jt, "train", path);
    t.params = jp.is_string()
                   ? load_train((dir / jp.get<std::string>()).string())
                   : train_from_json(jp, path);
    t.name = jt.value("name", t.params.name);
    const std::string kind = require(jt, "controller", path).get<std::string>();
    if (kind == "classical")
      t.kind = ControllerKind::Classical;
    else if (kind == "learning")
      t.kind = ControllerKind::Learning;
    else
      throw ValidationError(path + ": unknown controller kind '" + kind + "'");
    sc.trains.push_back(std::move(t));
  }
  if (j.contains("controller")) apply_controller_json(sc.cfg, j["controller"], path);
  sc.validate();
  return sc;
}

void save_scenario(const std::string& path, const ScenarioConfig& sc) {
  ordered j;
  j["name"] = sc.name;
  j["line"] = line_to_json(sc.line);
  j["iterations"] = sc.iterations;
  j["trains"] = ordered::array();
  for (const auto& t : sc.trains) {
    ordered jt;
    jt["name"] = t.name;
    jt["train"] = train_to_json(t.params);
    jt["controller"] = t.kind == ControllerKind::Classical ? "classical" : "learning";
    j["trains"].push_back(std::move(jt));
  }
  j["controller"] = controller_to_json(sc.cfg);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::uint64_t scenario_hash(const ScenarioConfig& sc) {
  std::uint64_t h = 14695981039346656037ULL;
  hash_mix(h, sc.line.name);
  hash_mix(h, fmt(sc.line.length_m));
  for (const auto& s : sc.line.sections) {
    hash_mix(h, fmt(s.from_m));
    hash_mix(h, fmt(s.to_m));
    hash_mix(h, fmt(s.grade));
    hash_mix(h, fmt(s.curvature));
    hash_mix(h, fmt(s.speed_limit));
  }
  for (const auto& st : sc.line.stations) {
    hash_mix(h, fmt(st.position_m));
    hash_mix(h, fmt(st.dwell_s));
  }
  for (const auto& t : sc.trains) {
    const auto& p = t.params;
    for (double x : {p.mass_kg, p.length_m, p.davis_a, p.davis_b, p.davis_c,
                     p.tau_s, p.f_traction_max, p.f_brake_max, p.p_traction_max,
                     p.p_brake_max, p.brake_rate_lead, p.brake_rate_self,
                     p.adhesion_mu})
      hash_mix(h, fmt(x));
  }
  const auto& c = sc.cfg;
  for (double x : {c.t_s, c.v_max, c.v_min, c.j_max, c.d_des, c.d_min,
                   c.w_eps_vmax, c.w_eps_vmin, c.w_eps_drel, c.w_eps_d,
                   c.sqp_step_tol, c.grid_ds, c.qp.eps, c.qp.sigma, c.qp.alpha})
    hash_mix(h, fmt(x));
  hash_mix(h, std::to_string(c.h_p));
  hash_mix(h, std::to_string(c.h_c));
  hash_mix(h, std::to_string(c.sqp_max_passes));
  hash_mix(h, std::to_string(c.qp.max_iterations));
  hash_mix(h, c.qf_mode == QfMode::CostToGo ? "cost_to_go" : "stage_only");
  return h;
}

void write_steps_csv(const std::string& path, const IterationLog& log) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  const size_t n_trains = log.steps.empty() ? log.traces.size()
                                            : log.steps.front().states.size();
  out << "t";
  for (size_t n = 0; n < n_trains; ++n) {
    const auto tag = "_" + std::to_string(n);
    out << ",s" << tag << ",v" << tag << ",f" << tag << ",u" << tag << ",unext"
        << tag << ",d" << tag << ",drel" << tag << ",solvems" << tag << ",passes"
        << tag << ",qpiters" << tag << ",degraded" << tag << ",pcost" << tag
        << ",lcost" << tag << ",lsum" << tag << ",lmin" << tag << ",vgap" << tag;
  }
  out << '\n';
  for (const auto& rec : log.steps) {
    out << fmt(rec.t);
    for (size_t n = 0; n < n_trains; ++n) {
      const auto& dg = rec.diags[n];
      out << ',' << fmt(rec.states[n].s) << ',' << fmt(rec.states[n].v) << ','
          << fmt(rec.states[n].f) << ',' << fmt(dg.u) << ',' << fmt(dg.u_next)
          << ',' << fmt(rec.d[n]) << ',' << fmt(rec.d_rel[n]) << ',' << fmt(dg.solve_ms) << ','
          << dg.sqp_passes << ',' << dg.qp_iterations << ','
          << (dg.degraded ? 1 : 0) << ',' << fmt(dg.policy_cost) << ','
          << fmt(dg.learning_cost) << ',' << fmt(dg.lambda_sum) << ','
          << fmt(dg.lambda_min) << ',' << fmt(dg.vterm_mix_gap);
    }
    out << '\n';
  }
}

LoadedSteps read_steps_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::string header;
  if (!std::getline(in, header))
    throw ValidationError(path + ": empty file");
  const auto cols = split_csv_line(header);
  if (cols.empty() || cols[0] != "t")
    throw ValidationError(path + ": unexpected header");
  constexpr int kPerTrain = 16;
  if ((cols.size() - 1) % kPerTrain != 0)
    throw ValidationError(path + ": unexpected column count");
  const int n_trains = static_cast<int>((cols.size() - 1) / kPerTrain);

  LoadedSteps out;
  out.n_trains = n_trains;
  out.traces.resize(n_trains);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != cols.size())
      throw ValidationError(path + ": ragged row");
    StepRecord rec;
    rec.t = parse_double(f[0], "t");
    rec.states.resize(n_trains);
    rec.diags.resize(n_trains);
    rec.d.resize(n_trains);
    rec.d_rel.resize(n_trains);
    for (int n = 0; n < n_trains; ++n) {
      const int b = 1 + n * kPerTrain;
      auto& st = rec.states[n];
      auto& dg = rec.diags[n];
      st.s = parse_double(f[b + 0], "s");
      st.v = parse_double(f[b + 1], "v");
      st.f = parse_double(f[b + 2], "f");
      dg.u = parse_double(f[b + 3], "u");
      dg.u_next = parse_double(f[b + 4], "unext");
      rec.d[n] = parse_double(f[b + 5], "d");
      rec.d_rel[n] = parse_double(f[b + 6], "drel");
      dg.solve_ms = parse_double(f[b + 7], "solvems");
      dg.sqp_passes = static_cast<int>(parse_long(f[b + 8], "passes"));
      dg.qp_iterations = parse_long(f[b + 9], "qpiters");
      dg.degraded = parse_long(f[b + 10], "degraded") != 0;
      dg.policy_cost = parse_double(f[b + 11], "pcost");
      dg.learning_cost = parse_double(f[b + 12], "lcost");
      dg.lambda_sum = parse_double(f[b + 13], "lsum");
      dg.lambda_min = parse_double(f[b + 14], "lmin");
      dg.vterm_mix_gap = parse_double(f[b + 15], "vgap");
      out.traces[n].t.push_back(rec.t);
      out.traces[n].s.push_back(st.s);
      out.traces[n].v.push_back(st.v);
      out.traces[n].f.push_back(st.f);
      out.traces[n].u.push_back(dg.u);
    }
    out.steps.push_back(std::move(rec));
  }
  return out;
}

void write_safe_set_entry(const std::string& path, std::uint64_t config_hash,
                          int iteration_id,
                          const std::vector<std::string>& train_names,
                          const std::vector<const StoredIteration*>& entries) {
  if (train_names.size() != entries.size())
    throw LengthMismatch("write_safe_set_entry: names/entries differ");
  ordered j;
  j["config_hash"] = hash_hex(config_hash);
  j["iteration_id"] = iteration_id;
  j["trains"] = ordered::array();
  for (size_t n = 0; n < entries.size(); ++n) {
    const auto& it = *entries[n];
    ordered jt;
    jt["name"] = train_names[n];
    jt["t"] = it.trace.t;
    jt["s"] = it.trace.s;
    jt["v"] = it.trace.v;
    jt["f"] = it.trace.f;
    jt["u"] = it.trace.u;
    jt["stage_cost"] = it.stage_cost;
    jt["cost_to_go"] = it.cost_to_go;
    j["trains"].push_back(std::move(jt));
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump() << '\n';
}

SafeSetEntry read_safe_set_entry(const std::string& path,
                                 std::uint64_t expected_hash) {
  const ordered j = read_json_file(path);
  const std::uint64_t h =
      hash_from_hex(require(j, "config_hash", path).get<std::string>(), path);
  if (h != expected_hash)
    throw ConfigHashMismatch(path + ": stored under a different configuration");
  SafeSetEntry entry;
  entry.iteration_id = require(j, "iteration_id", path).get<int>();
  for (const auto& jt : require(j, "trains", path)) {
    entry.train_names.push_back(require(jt, "name", path).get<std::string>());
    StoredIteration it;
    it.iteration_id = entry.iteration_id;
    it.trace.t = require(jt, "t", path).get<std::vector<double>>();
    it.trace.s = require(jt, "s", path).get<std::vector<double>>();
    it.trace.v = require(jt, "v", path).get<std::vector<double>>();
    it.trace.f = require(jt, "f", path).get<std::vector<double>>();
    it.trace.u = require(jt, "u", path).get<std::vector<double>>();
    it.stage_cost = require(jt, "stage_cost", path).get<std::vector<double>>();
    it.cost_to_go = require(jt, "cost_to_go", path).get<std::vector<double>>();
    entry.entries.push_back(std::move(it));
  }
  return entry;
}

std::string summary_text(const ScenarioConfig& sc, const IterationLog& log,
                         const MetricsReport& report) {
  ordered j;
  j["scenario"] = sc.name;
  j["iteration"] = log.iteration_id;
  j["completed"] = log.completed;
  j["metrics"] = metrics_to_json(report);
  ordered timing;
  timing["solve_wall_ms"] = log.solve_wall_ms;
  timing["simulated_s"] = log.simulated_s;
  timing["compute_to_simulated_ratio"] =
      log.simulated_s > 0 ? (log.solve_wall_ms / 1000.0) / log.simulated_s : 0.0;
  j["timing"] = std::move(timing);
  return j.dump(2) + "\n";
}

std::string metrics_json_text(const MetricsReport& report) {
  return metrics_to_json(report).dump(2) + "\n";
}

MetricsReport report_from_steps(const ScenarioConfig& sc, const LoadedSteps& steps,
                                const std::vector<SpeedProfile>& profiles) {
  if (steps.traces.size() != sc.trains.size())
    throw MismatchedScenarios("report_from_steps: train count differs");
  return build_report(make_views(sc, steps.traces, profiles), sc.line, sc.cfg,
                      sc.cfg.t_s);
}

void write_run(const std::string& out_dir, const ScenarioConfig& sc,
               const ScenarioResult& result) {
  fs::create_directories(out_dir);
  save_scenario((fs::path(out_dir) / "scenario.json").string(), sc);
  const std::uint64_t h = scenario_hash(sc);

  for (const auto& log : result.iterations) {
    std::ostringstream name;
    name << "iter_";
    if (log.iteration_id < 10) name << '0';
    name << log.iteration_id;
    const fs::path dir = fs::path(out_dir) / name.str();
    fs::create_directories(dir);
    write_steps_csv((dir / "steps.csv").string(), log);

    MetricsReport report =
        build_report(make_views(sc, log.traces, result.profiles), sc.line, sc.cfg,
                     sc.cfg.t_s);
    std::ofstream sum(dir / "summary.json");
    if (!sum) throw Error("cannot write " + (dir / "summary.json").string());
    sum << summary_text(sc, log, report);

    if (log.completed) {
      std::vector<std::string> names;
      std::vector<const StoredIteration*> entries;
      for (size_t n = 0; n < sc.trains.size(); ++n) {
        const StoredIteration* found = nullptr;
        for (const auto& it : result.safe_sets[n].iterations)
          if (it.iteration_id == log.iteration_id) found = &it;
        if (!found) continue;
        names.push_back(sc.trains[n].name);
        entries.push_back(found);
      }
      if (!entries.empty())
        write_safe_set_entry((dir / "safe_set.json").string(), h,
                             log.iteration_id, names, entries);
    }
  }
}

LoadedRun load_run(const std::string& run_dir) {
  LoadedRun run;
  run.scenario = load_scenario((fs::path(run_dir) / "scenario.json").string());
  for (int i = 0;; ++i) {
    std::ostringstream name;
    name << "iter_";
    if (i < 10) name << '0';
    name << i;
    const fs::path dir = fs::path(run_dir) / name.str();
    if (!fs::exists(dir / "steps.csv")) break;
    run.iterations.push_back(read_steps_csv((dir / "steps.csv").string()));
    std::ifstream sum(dir / "summary.json");
    if (!sum) throw ValidationError("missing " + (dir / "summary.json").string());
    std::ostringstream buf;
    buf << sum.rdbuf();
    run.summaries.push_back(buf.str());
    bool done = false;
    try {
      done = ordered::parse(run.summaries.back()).value("completed", false);
    } catch (const std::exception& e) {
      throw ValidationError((dir / "summary.json").string() + ": " + e.what());
    }
    run.completed.push_back(done);
  }
  if (run.iterations.empty())
    throw ValidationError(run_dir + ": no iterations found");
  return run;
}

}  // namespace vc
