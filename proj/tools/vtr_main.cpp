#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "vtr/harness.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
  std::string config;
  std::string out = "out";
  std::optional<uint64_t> seed;
  std::optional<int> repeats;
  bool lock_camera = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_config = true) {
  auto* cfg = cmd->add_option("--config", o.config, "scenario JSON");
  if (needs_config) cfg->required();
  cmd->add_option("--out", o.out, "artifact directory");
  cmd->add_option("--seed", o.seed, "override the scenario seed");
}

vtr::Scenario load(const CommonOpts& o) {
  vtr::Scenario s = vtr::load_scenario(o.config);
  if (o.seed) s.seed = *o.seed;
  if (o.repeats) s.repeats = *o.repeats;
  return s;
}

void write_repeat_artifacts(const std::string& dir, const vtr::Scenario& s,
                            const std::vector<vtr::RepeatRunResult>& runs) {
  for (const auto& run : runs) {
    std::string stem = dir + "/repeat_" + std::to_string(run.index);
    vtr::write_repeat_csv(stem + ".csv", run);
    vtr::write_events_csv(stem + "_events.csv", run, s.dt);
  }
  std::ofstream summary(dir + "/summary.json");
  summary << vtr::run_summary_json(runs).dump(2) << "\n";
}

int do_teach(const CommonOpts& o) {
  vtr::Scenario s = load(o);
  fs::create_directories(o.out);
  vtr::World world = vtr::build_world(s);
  vtr::TeachResult teach = vtr::run_teach(s, world);
  vtr::save_map(teach.map, o.out + "/map.json");
  vtr::write_teach_truth_csv(o.out + "/teach_truth.csv", teach, s.dt);
  std::cout << "taught " << teach.map.keyframes.size() << " keyframes, "
            << teach.map.samples.size() << " samples over "
            << (teach.true_path.size() - 1) * s.dt << " s\n";
  return 0;
}

int do_learn(const CommonOpts& o) {
  vtr::Scenario s = load(o);
  vtr::Map map = vtr::load_map(o.out + "/map.json");
  vtr::run_learn(map, s.cpm);
  vtr::save_map(map, o.out + "/map.json");
  size_t entries = 0;
  for (const auto& [kf, row] : map.cpm->table) entries += row.size();
  std::cout << "learned " << entries << " performance entries over "
            << map.cpm->table.size() << " keyframes\n";
  return 0;
}

int do_repeat(const CommonOpts& o) {
  vtr::Scenario s = load(o);
  vtr::Map map = vtr::load_map(o.out + "/map.json");
  auto teach_truth =
      vtr::read_pose_column(o.out + "/teach_truth.csv", vtr::kTeachTruthPoseColumn, "W", "B");
  vtr::World world = vtr::build_world(s);
  auto runs = vtr::run_repeats(s, map, world, teach_truth, o.lock_camera);
  write_repeat_artifacts(o.out, s, runs);
  bool lost = false;
  for (const auto& r : runs) {
    std::cout << "repeat " << r.index << (r.forward ? " forward" : " backward") << ": "
              << (r.completed ? "completed" : "lost") << ", mean pte "
              << r.mean_pte << " m, max " << r.max_pte << " m, switches " << r.switch_count
              << "\n";
    lost = lost || r.lost_terminated;
  }
  return lost ? 2 : 0;
}

int do_run(const CommonOpts& o) {
  vtr::Scenario s = load(o);
  fs::create_directories(o.out);
  vtr::RunArtifacts art = vtr::run_full(s, o.lock_camera);
  vtr::save_map(art.teach.map, o.out + "/map.json");
  vtr::write_teach_truth_csv(o.out + "/teach_truth.csv", art.teach, s.dt);
  write_repeat_artifacts(o.out, s, art.repeats);
  nlohmann::json summary = vtr::run_summary_json(art.repeats);
  std::cout << summary.dump(2) << "\n";
  return summary["any_lost_termination"].get<bool>() ? 2 : 0;
}

int do_pte(const CommonOpts& o) {
  auto teach_truth =
      vtr::read_pose_column(o.out + "/teach_truth.csv", vtr::kTeachTruthPoseColumn, "W", "B");
  std::vector<vtr::Vec3> reference;
  for (const auto& p : teach_truth) reference.push_back(p.t);

  nlohmann::json summary;
  summary["repeats"] = nlohmann::json::array();
  for (int i = 0;; ++i) {
    std::string csv = o.out + "/repeat_" + std::to_string(i) + ".csv";
    if (!fs::exists(csv)) break;
    auto truth = vtr::read_pose_column(csv, vtr::kRepeatTruthPoseColumn, "W", "B");
    std::vector<vtr::Vec3> path;
    for (const auto& p : truth) path.push_back(p.t);
    auto pte = vtr::compute_pte(path, reference);
    std::ofstream out(o.out + "/pte_" + std::to_string(i) + ".csv");
    out << "tick,pte\n";
    for (size_t k = 0; k < pte.size(); ++k) out << k << "," << vtr::fmt_g17(pte[k]) << "\n";
    summary["repeats"].push_back(
        {{"index", i}, {"mean_pte", vtr::mean_of(pte)}, {"max_pte", vtr::max_of(pte)}});
  }
  if (summary["repeats"].empty()) {
    std::cerr << "no repeat CSVs under " << o.out << "\n";
    return 3;
  }
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int do_dump_cpm(const CommonOpts& o) {
  vtr::Map map = vtr::load_map(o.out + "/map.json");
  if (!map.cpm) {
    std::cerr << "map has no performance model; run learn first\n";
    return 3;
  }
  std::cout << "keyframe,camera,mean,std,count,best\n";
  char buf[64];
  for (const auto& [kf_id, row] : map.cpm->table) {
    auto best = map.cpm->best_camera(kf_id);
    for (const auto& [tag, e] : row) {
      std::snprintf(buf, sizeof(buf), "%.9g,%.9g", e.mean, e.std_dev);
      std::cout << kf_id << "," << tag << "," << buf << "," << e.count << ","
                << (best && *best == tag ? 1 : 0) << "\n";
    }
  }
  return 0;
}

int do_compare_baseline(const CommonOpts& o) {
  vtr::Scenario s = load(o);
  fs::create_directories(o.out + "/active");
  fs::create_directories(o.out + "/locked");

  vtr::World world = vtr::build_world(s);
  vtr::TeachResult teach = vtr::run_teach(s, world);
  vtr::run_learn(teach.map, s.cpm);
  vtr::save_map(teach.map, o.out + "/map.json");
  vtr::write_teach_truth_csv(o.out + "/teach_truth.csv", teach, s.dt);

  auto active = vtr::run_repeats(s, teach.map, world, teach.true_path, false);
  auto locked = vtr::run_repeats(s, teach.map, world, teach.true_path, true);
  write_repeat_artifacts(o.out + "/active", s, active);
  write_repeat_artifacts(o.out + "/locked", s, locked);

  double t0 = 0.0, t1 = s.repeat_max_duration;
  if (!s.occlusions.empty()) {
    t0 = s.occlusions.front().start;
    t1 = s.occlusions.front().end;
  }
  nlohmann::json j;
  j["active"] = vtr::run_summary_json(active);
  j["locked"] = vtr::run_summary_json(locked);
  j["window"] = {t0, t1};
  double seg_active = 0.0, seg_locked = 0.0;
  bool locked_lost = false;
  for (size_t i = 0; i < active.size() && i < locked.size(); ++i) {
    seg_active += vtr::segment_mean_pte(active[i], t0, t1);
    seg_locked += vtr::segment_mean_pte(locked[i], t0, t1);
    locked_lost = locked_lost || locked[i].lost_terminated;
  }
  j["segment_pte_active"] = seg_active / std::max<size_t>(1, active.size());
  j["segment_pte_locked"] = seg_locked / std::max<size_t>(1, locked.size());
  j["locked_lost"] = locked_lost;
  std::ofstream(o.out + "/compare.json") << j.dump(2) << "\n";
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-camera visual teach & repeat simulator"};
  app.require_subcommand(1);

  CommonOpts teach_o, learn_o, repeat_o, run_o, pte_o, dump_o, cmp_o;

  add_common(app.add_subcommand("teach", "drive the route and build the map"), teach_o);
  add_common(app.add_subcommand("learn", "fit the camera performance model"), learn_o);

  auto* repeat_cmd = app.add_subcommand("repeat", "closed-loop route repetition");
  add_common(repeat_cmd, repeat_o);
  repeat_cmd->add_option("--repeats", repeat_o.repeats, "override repeat count");
  repeat_cmd->add_flag("--lock-camera", repeat_o.lock_camera, "disable camera switching");

  auto* run_cmd = app.add_subcommand("run", "teach, learn and repeat in one go");
  add_common(run_cmd, run_o);
  run_cmd->add_option("--repeats", run_o.repeats, "override repeat count");
  run_cmd->add_flag("--lock-camera", run_o.lock_camera, "disable camera switching");

  auto* pte_cmd = app.add_subcommand("pte", "path-tracking error from recorded runs");
  add_common(pte_cmd, pte_o, false);

  auto* dump_cmd = app.add_subcommand("dump-cpm", "print the learned performance model");
  add_common(dump_cmd, dump_o, false);

  auto* cmp_cmd =
      app.add_subcommand("compare-baseline", "active switching vs. locked-camera arms");
  add_common(cmp_cmd, cmp_o);
  cmp_cmd->add_option("--repeats", cmp_o.repeats, "override repeat count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    if (app.got_subcommand("teach")) return do_teach(teach_o);
    if (app.got_subcommand("learn")) return do_learn(learn_o);
    if (app.got_subcommand("repeat")) return do_repeat(repeat_o);
    if (app.got_subcommand("run")) return do_run(run_o);
    if (app.got_subcommand("pte")) return do_pte(pte_o);
    if (app.got_subcommand("dump-cpm")) return do_dump_cpm(dump_o);
    if (app.got_subcommand("compare-baseline")) return do_compare_baseline(cmp_o);
  } catch (const vtr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const vtr::MapVersionError& e) {
    std::cerr << "map version error: " << e.what() << "\n";
    return 3;
  } catch (const vtr::MapFormatError& e) {
    std::cerr << "map format error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
