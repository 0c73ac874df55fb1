#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "vc/json_io.hpp"
#include "vc/metrics.hpp"
#include "vc/sim.hpp"
#include "vc/speed_profile.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitCollision = 3;
constexpr int kExitSolver = 4;

std::vector<vc::SpeedProfile> run_profiles(const vc::ScenarioConfig& sc) {
  std::vector<vc::SpeedProfile> profiles;
  profiles.reserve(sc.trains.size());
  for (const auto& t : sc.trains)
    profiles.push_back(vc::build_envelope(sc.line, t.params, sc.cfg));
  return profiles;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw vc::Error("cannot write " + path);
  return out;
}

bool wants_json(const std::string& path) {
  return path.size() >= 5 && path.substr(path.size() - 5) == ".json";
}

int last_completed(const vc::LoadedRun& run) {
  for (int i = static_cast<int>(run.completed.size()) - 1; i >= 0; --i)
    if (run.completed[i]) return i;
  throw vc::ValidationError("run has no completed iteration");
}

void cmd_profile(const std::string& line_path, const std::string& train_path,
                 double grid_ds, const std::string& out_path) {
  const auto line = vc::load_line(line_path);
  const auto train = vc::load_train(train_path);
  vc::ControllerConfig cfg;
  const auto profile = vc::build_envelope(line, train, cfg, grid_ds);
  auto out = open_out(out_path);
  out << "s_m,v_dp_mps\n";
  for (size_t i = 0; i < profile.s.size(); ++i)
    out << profile.s[i] << ',' << profile.v[i] << '\n';
  std::cout << "envelope: " << profile.s.size() << " samples over "
            << line.length_m << " m -> " << out_path << "\n";
}

int cmd_simulate(const std::string& scenario_path, int iterations_override,
                 std::string out_dir) {
  auto sc = vc::load_scenario(scenario_path);
  if (iterations_override >= 0) sc.iterations = iterations_override;
  if (out_dir.empty()) out_dir = "runs/" + sc.name;

  const auto result = vc::run_scenario(sc);
  vc::write_run(out_dir, sc, result);

  bool all_completed = true;
  for (const auto& log : result.iterations) {
    const auto avgs = vc::iteration_summary(log.stage_costs);
    std::cout << "iteration " << log.iteration_id << ": "
              << (log.completed ? "completed" : "FAILED") << ", "
              << log.steps.size() << " steps, " << log.simulated_s
              << " s simulated, avg stage cost";
    for (size_t n = 0; n < avgs.size(); ++n)
      std::cout << ' ' << sc.trains[n].name << '=' << avgs[n];
    std::cout << "\n";
    all_completed = all_completed && log.completed;
  }
  std::cout << "run written to " << out_dir << "\n";
  return all_completed ? 0 : kExitCollision;
}

void cmd_report(const std::string& run_dir, int iteration,
                const std::string& out_path, const std::string& energy_mode) {
  const auto run = vc::load_run(run_dir);
  if (iteration < 0) iteration = last_completed(run);
  if (iteration >= static_cast<int>(run.iterations.size()))
    throw vc::ValidationError("iteration out of range");
  const auto profiles = run_profiles(run.scenario);
  const auto report =
      vc::report_from_steps(run.scenario, run.iterations[iteration], profiles);

  auto out = open_out(out_path);
  if (wants_json(out_path)) {
    out << vc::metrics_json_text(report);
  } else {
    out << "train,scope,metric,value\n";
    auto emit_seg = [&](const std::string& train, const vc::SegmentReport& seg,
                        bool follower) {
      out << train << ',' << seg.label << ",specific_energy,"
          << seg.ef.specific_energy << '\n';
      if (energy_mode == "net")
        out << train << ',' << seg.label << ",specific_energy_net,"
            << seg.ef.specific_energy_net << '\n';
      out << train << ',' << seg.label << ",force_average,"
          << seg.ef.force_average << '\n';
      if (follower)
        out << train << ',' << seg.label << ",max_distance," << seg.max_distance
            << '\n';
    };
    for (const auto& tr : report.trains) {
      for (const auto& seg : tr.segments) emit_seg(tr.name, seg, tr.follower);
      emit_seg(tr.name, tr.line, tr.follower);
      out << tr.name << ",line,travel_time_s," << tr.travel_time_s << '\n';
      out << tr.name << ",line,avg_stage_cost," << tr.avg_stage_cost << '\n';
    }
    out << "convoy,line,specific_energy," << report.convoy_specific_energy
        << '\n';
    out << "convoy,line,force_average," << report.convoy_force_average << '\n';
  }
  std::cout << "report for iteration " << iteration << " -> " << out_path << "\n";
}

void cmd_compare(const std::string& baseline_dir, const std::string& learned_dir,
                 const std::string& out_path, const std::string& energy_mode) {
  const auto base_run = vc::load_run(baseline_dir);
  const auto learn_run = vc::load_run(learned_dir);
  if (!base_run.completed.front())
    throw vc::ValidationError("baseline iteration 0 did not complete");
  const int learned_iter = last_completed(learn_run);

  const auto base_profiles = run_profiles(base_run.scenario);
  const auto learn_profiles = run_profiles(learn_run.scenario);
  const auto baseline = vc::report_from_steps(base_run.scenario,
                                              base_run.iterations.front(),
                                              base_profiles);
  const auto learned = vc::report_from_steps(
      learn_run.scenario, learn_run.iterations[learned_iter], learn_profiles);

  const auto rows = vc::compare_runs(baseline, learned);
  auto out = open_out(out_path);
  out << "train,scope,metric,baseline,learned,abs_delta,pct_delta\n";
  for (const auto& r : rows) {
    if (energy_mode != "net" && r.metric == "specific_energy_net") continue;
    out << r.train << ',' << r.scope << ',' << r.metric << ',' << r.baseline
        << ',' << r.learned << ',' << r.abs_delta << ',' << r.pct_delta << '\n';
  }
  std::cout << "compared baseline iter 0 vs learned iter " << learned_iter
            << " -> " << out_path << "\n";
}

void cmd_convergence(const std::string& run_dir, const std::string& out_path) {
  const auto run = vc::load_run(run_dir);
  const auto profiles = run_profiles(run.scenario);
  const size_t n_trains = run.scenario.trains.size();

  std::vector<std::vector<double>> avgs(n_trains);
  for (const auto& steps : run.iterations) {
    const auto report = vc::report_from_steps(run.scenario, steps, profiles);
    for (size_t n = 0; n < n_trains; ++n)
      avgs[n].push_back(report.trains[n].avg_stage_cost);
  }

  auto out = open_out(out_path);
  out << "iteration,completed";
  for (const auto& t : run.scenario.trains)
    out << ",avg_" << t.name << ",variation_" << t.name;
  out << '\n';
  std::vector<std::vector<double>> vars(n_trains);
  for (size_t n = 0; n < n_trains; ++n)
    vars[n] = vc::convergence_variation(avgs[n]);
  for (size_t r = 0; r < run.iterations.size(); ++r) {
    out << r << ',' << (run.completed[r] ? 1 : 0);
    for (size_t n = 0; n < n_trains; ++n)
      out << ',' << avgs[n][r] << ',' << vars[n][r];
    out << '\n';
  }
  std::cout << "convergence series over " << run.iterations.size()
            << " iterations -> " << out_path << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"virtually coupled convoy simulator and learning controller"};
  app.require_subcommand(1);

  std::string line_path, train_path, scenario_path, out_path, out_dir;
  std::string run_dir, baseline_dir, learned_dir;
  std::string energy_mode = "traction";
  double grid_ds = 0;
  int iterations = -1;
  int report_iteration = -1;

  auto* profile = app.add_subcommand("profile", "speed envelope for a line/train");
  profile->add_option("--line", line_path, "line JSON file")->required();
  profile->add_option("--train", train_path, "train JSON file")->required();
  profile->add_option("--grid-ds", grid_ds, "sample spacing in m (0 = default)");
  profile->add_option("--out", out_path, "output CSV")->required();

  auto* simulate = app.add_subcommand("simulate", "run a scenario");
  simulate->add_option("--scenario", scenario_path, "scenario JSON file")
      ->required();
  simulate->add_option("--iterations", iterations, "override learning rounds");
  simulate->add_option("--out-dir", out_dir, "run directory (default runs/<name>)");

  auto* report = app.add_subcommand("report", "metrics for one iteration");
  report->add_option("--run-dir", run_dir, "run directory")->required();
  report->add_option("--iteration", report_iteration,
                     "iteration id (default: last completed)");
  report->add_option("--out", out_path, "output file, .json or .csv")->required();
  report->add_option("--energy-mode", energy_mode, "traction|net");

  auto* compare = app.add_subcommand("compare", "baseline-vs-learned deltas");
  compare->add_option("--baseline", baseline_dir, "baseline run directory")
      ->required();
  compare->add_option("--learned", learned_dir, "learned run directory")
      ->required();
  compare->add_option("--out", out_path, "output CSV")->required();
  compare->add_option("--energy-mode", energy_mode, "traction|net");

  auto* convergence = app.add_subcommand("convergence", "stage-cost series");
  convergence->add_option("--run-dir", run_dir, "run directory")->required();
  convergence->add_option("--out", out_path, "output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (profile->parsed()) {
      cmd_profile(line_path, train_path, grid_ds, out_path);
    } else if (simulate->parsed()) {
      return cmd_simulate(scenario_path, iterations, out_dir);
    } else if (report->parsed()) {
      cmd_report(run_dir, report_iteration, out_path, energy_mode);
    } else if (compare->parsed()) {
      cmd_compare(baseline_dir, learned_dir, out_path, energy_mode);
    } else if (convergence->parsed()) {
      cmd_convergence(run_dir, out_path);
    }
    return 0;
  } catch (const vc::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const vc::InfeasibleLine& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const vc::CollisionDetected& e) {
    std::cerr << "collision: " << e.what() << "\n";
    return kExitCollision;
  } catch (const vc::NonTermination& e) {
    std::cerr << "aborted: " << e.what() << "\n";
    return kExitCollision;
  } catch (const vc::SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const vc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
