#include <doctest.h>

#include <nlohmann/json.hpp>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "kwnav/io.hpp"
#include "support/generators.hpp"

using namespace kwnav;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* cli_path() { return KWNAV_CLI_PATH; }

int run(const std::string& args) {
  const int status = std::system((std::string(cli_path()) + " " + args).c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "kwnav_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

PivotDataset noiseless_pivot_dataset(int n) {
  std::mt19937_64 rng(801);
  const Vec3 tip(0, 0, 150);
  const Vec3 pivot(20, 30, 280);
  PivotDataset data;
  for (int i = 0; i < n; ++i) {
    RigidTransform pose;
    pose.rotation = test::gen_rotation(rng);
    pose.translation = pivot - pose.rotation * tip;
    data.observations.push_back(pose);
  }
  return data;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("pivot command writes the result and a manifest") {
  const fs::path dir = scratch("pivot_ok");
  const fs::path input = dir / "dataset.json";
  io::save_pivot_dataset(input, noiseless_pivot_dataset(50), FrameId::Tracker,
                         FrameId::Cannula);

  const int code = run("--quiet --output-dir " + dir.string() + " pivot --input " +
                       input.string());
  CHECK(code == 0);
  const PivotResult result = io::load_pivot_result(dir / "pivot.json");
  CHECK(result.rms_mm < 1e-9);
  CHECK((result.tip_offset - Vec3(0, 0, 150)).norm() < 1e-9);

  const json manifest = io::load_json(dir / "pivot_manifest.json");
  CHECK(manifest["command"] == "pivot");
  CHECK(manifest["outputs"].size() == 1);
}

TEST_CASE("malformed JSON exits 2 with a line/column diagnostic") {
  const fs::path dir = scratch("pivot_bad");
  const fs::path input = dir / "broken.json";
  write_text(input, "[\n  {\"from\": \"T\",,}\n]\n");
  const fs::path stderr_file = dir / "stderr.txt";
  const int code = run("--quiet --output-dir " + dir.string() + " pivot --input " +
                       input.string() + " 2> " + stderr_file.string());
  CHECK(code == 2);
  const std::string diagnostic = slurp(stderr_file);
  CHECK(diagnostic.find(":2:") != std::string::npos);
}

TEST_CASE("a two-pose dataset is a degenerate-data failure (exit 3)") {
  const fs::path dir = scratch("pivot_two");
  const fs::path input = dir / "two.json";
  io::save_pivot_dataset(input, noiseless_pivot_dataset(2), FrameId::Tracker,
                         FrameId::Cannula);
  CHECK(run("--quiet --output-dir " + dir.string() + " pivot --input " +
            input.string()) == 3);
}

TEST_CASE("register recovers a transform through the CLI") {
  const fs::path dir = scratch("register");
  MarkerLayout model;
  model.name = "gantry";
  model.frame = FrameId::Machine;
  model.labels = {"m1", "m2", "m3", "m4", "m5", "m6", "m7"};
  model.points = {Vec3(0, 0, 0),     Vec3(120, 0, 0),   Vec3(0, 90, 0),
                  Vec3(150, 110, 20), Vec3(60, 170, 45), Vec3(200, 60, 80),
                  Vec3(90, 40, 130)};
  io::save_layout(dir / "model.json", model);

  SUBCASE("identity pair") {
    MarkerLayout observed = model;
    observed.frame = FrameId::Tracker;
    io::save_layout(dir / "observed.json", observed);
    const int code = run("--quiet --output-dir " + dir.string() +
                         " register --model " + (dir / "model.json").string() +
                         " --observed " + (dir / "observed.json").string());
    CHECK(code == 0);
    const RegistrationResult result =
        io::load_registration_result(dir / "registration.json");
    CHECK(result.fre_rms_mm < 1e-12);
    CHECK(result.xf.xf.translation.norm() < 1e-12);
  }

  SUBCASE("seven-point recovery matches the library oracle") {
    std::mt19937_64 rng(809);
    const RigidTransform truth = test::gen_rigid(rng);
    MarkerLayout observed = model;
    for (Vec3& p : observed.points) p = transform_point(truth, p);
    io::save_layout(dir / "observed.json", observed);
    const int code = run("--quiet --output-dir " + dir.string() +
                         " register --model " + (dir / "model.json").string() +
                         " --observed " + (dir / "observed.json").string());
    CHECK(code == 0);
    const RegistrationResult result =
        io::load_registration_result(dir / "registration.json");
    CHECK((result.xf.xf.translation - truth.translation).norm() < 1e-9);
    CHECK(result.xf.xf.rotation.angularDistance(truth.rotation) < 1e-9);
  }

  SUBCASE("mismatched counts exit 2") {
    MarkerLayout observed = model;
    observed.labels.pop_back();
    observed.points.pop_back();
    io::save_layout(dir / "observed.json", observed);
    CHECK(run("--quiet --output-dir " + dir.string() + " register --model " +
              (dir / "model.json").string() + " --observed " +
              (dir / "observed.json").string()) == 2);
  }
}

TEST_CASE("ct-register composes literals and rejects bad frames") {
  const fs::path dir = scratch("ct");
  io::save_transform(dir / "tp.json",
                     FramedTransform{FrameId::Tracker, FrameId::Patient, {}});
  io::save_transform(dir / "tm.json",
                     FramedTransform{FrameId::Tracker, FrameId::Machine, {}});
  io::save_transform(dir / "mi.json",
                     FramedTransform{FrameId::Machine, FrameId::Image, {}});
  const int code = run("--quiet --output-dir " + dir.string() + " ct-register --tp " +
                       (dir / "tp.json").string() + " --tm " +
                       (dir / "tm.json").string() + " --mi " +
                       (dir / "mi.json").string());
  CHECK(code == 0);
  const FramedTransform f_pi = io::load_transform(dir / "ct_registration.json");
  CHECK(f_pi.from == FrameId::Patient);
  CHECK(f_pi.to == FrameId::Image);

  // M->T instead of T->M.
  io::save_transform(dir / "tm.json",
                     FramedTransform{FrameId::Machine, FrameId::Tracker, {}});
  CHECK(run("--quiet --output-dir " + dir.string() + " ct-register --tp " +
            (dir / "tp.json").string() + " --tm " + (dir / "tm.json").string() +
            " --mi " + (dir / "mi.json").string()) == 2);
}

TEST_CASE("indicate gates dropouts and zeroes aligned streams") {
  const fs::path dir = scratch("indicate");
  io::save_plan(dir / "plan.json", TrajectoryPlan{Vec3(0, 0, 0), Vec3(0, 0, 100)});
  io::save_transform(dir / "reg.json",
                     FramedTransform{FrameId::Patient, FrameId::Image, {}});

  // Patient static at identity; tool exactly on the trajectory. The patient
  // stream drops out for one second in the middle.
  PoseStream stream;
  for (int i = 0; i <= 40; ++i) {
    const double t = 0.1 * i;
    PoseSample patient;
    patient.t_s = t;
    patient.pose = FramedTransform{FrameId::Hmd, FrameId::Patient, {}};
    patient.valid = !(t > 2.0 && t < 3.0);
    stream.push_back(patient);

    PoseSample tool;
    tool.t_s = t + 0.05;
    tool.pose = FramedTransform{FrameId::Hmd, FrameId::Cannula, {}};
    tool.valid = true;
    stream.push_back(tool);
  }
  io::save_pose_stream(dir / "stream.csv", stream);

  const int code = run("--quiet --output-dir " + dir.string() + " indicate --plan " +
                       (dir / "plan.json").string() + " --stream " +
                       (dir / "stream.csv").string() + " --ct-registration " +
                       (dir / "reg.json").string() + " --grace 0.3");
  CHECK(code == 0);

  const std::string csv = slurp(dir / "indicators.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);  // header
  int rows = 0;
  bool suspended_window_clean = true;
  while (std::getline(lines, line)) {
    ++rows;
    std::istringstream fields(line);
    std::string t_field, cx, cy, cz, radius;
    std::getline(fields, t_field, ',');
    std::getline(fields, cx, ',');
    std::getline(fields, cy, ',');
    std::getline(fields, cz, ',');
    std::getline(fields, radius, ',');
    const double t = std::stod(t_field);
    if (t > 2.3 && t < 3.0) suspended_window_clean = false;
    CHECK(std::stod(radius) < 1e-9);
  }
  CHECK(rows > 0);
  CHECK(rows < 41);  // the dropout removed rows
  CHECK(suspended_window_clean);

  // Unordered stream exits 2.
  std::swap(stream[4].t_s, stream[10].t_s);
  io::save_pose_stream(dir / "unordered.csv", stream);
  CHECK(run("--quiet --output-dir " + dir.string() + " indicate --plan " +
            (dir / "plan.json").string() + " --stream " +
            (dir / "unordered.csv").string() + " --ct-registration " +
            (dir / "reg.json").string()) == 2);
}

TEST_CASE("indicate radii match the geometric oracle for an offset tool") {
  const fs::path dir = scratch("indicate_offset");
  io::save_plan(dir / "plan.json", TrajectoryPlan{Vec3(0, 0, 0), Vec3(0, 0, 100)});
  io::save_transform(dir / "reg.json",
                     FramedTransform{FrameId::Patient, FrameId::Image, {}});

  PoseStream stream;
  PoseSample patient;
  patient.t_s = 0.0;
  patient.pose = FramedTransform{FrameId::Hmd, FrameId::Patient, {}};
  stream.push_back(patient);
  PoseSample tool;
  tool.t_s = 0.1;
  // Tool body displaced 3 mm in x: the shaft line shifts laterally.
  tool.pose = FramedTransform{FrameId::Hmd, FrameId::Cannula,
                              {Quat::Identity(), Vec3(3.0, 0.0, 0.0)}};
  stream.push_back(tool);
  io::save_pose_stream(dir / "stream.csv", stream);

  CHECK(run("--quiet --output-dir " + dir.string() + " indicate --plan " +
            (dir / "plan.json").string() + " --stream " +
            (dir / "stream.csv").string() + " --ct-registration " +
            (dir / "reg.json").string()) == 0);

  const std::string csv = slurp(dir / "indicators.csv");
  std::istringstream lines(csv);
  std::string header, row;
  std::getline(lines, header);
  REQUIRE(std::getline(lines, row));
  std::istringstream fields(row);
  std::vector<std::string> cols;
  std::string col;
  while (std::getline(fields, col, ',')) cols.push_back(col);
  REQUIRE(cols.size() == 15);
  CHECK(std::stod(cols[4]) == doctest::Approx(3.0));   // entry radius
  CHECK(std::stod(cols[11]) == doctest::Approx(3.0));  // end radius
  CHECK(std::stod(cols[5]) == doctest::Approx(-1.0));  // hatch points back in -x
}

TEST_CASE("surface-marker command finds the skin point") {
  const fs::path dir = scratch("marker");
  PointCloud cloud;
  for (int ix = -20; ix <= 20; ++ix) {
    for (int iy = -20; iy <= 20; ++iy) {
      cloud.points.emplace_back(2.0 * ix, 2.0 * iy, -20.0);
    }
  }
  io::save_cloud_csv(dir / "cloud.csv", cloud);
  io::save_plan(dir / "plan.json", TrajectoryPlan{Vec3(10, 10, 0), Vec3(10, 10, 100)});
  const int code = run("--quiet --output-dir " + dir.string() + " surface-marker " +
                       "--cloud " + (dir / "cloud.csv").string() + " --plan " +
                       (dir / "plan.json").string());
  CHECK(code == 0);
  const json marker = io::load_json(dir / "surface_marker.json");
  CHECK(marker["position_mm"][0].get<double>() == doctest::Approx(10.0));
  CHECK(marker["position_mm"][2].get<double>() == doctest::Approx(-20.0));
}

TEST_CASE("metrics command scores wire lines and compares groups") {
  const fs::path dir = scratch("metrics");
  io::save_plan(dir / "plan.json", TrajectoryPlan{Vec3(0, 0, 0), Vec3(0, 0, 100)});
  write_text(dir / "a.csv",
             "px_mm,py_mm,pz_mm,dx,dy,dz\n"
             "2,0,0,0,0,1\n"
             "3,0,0,0,0,1\n"
             "2.5,0,0,0,0,1\n");
  write_text(dir / "b.csv",
             "px_mm,py_mm,pz_mm,dx,dy,dz\n"
             "8,0,0,0,0,1\n"
             "9,0,0,0,0,1\n"
             "8.5,0,0,0,0,1\n");
  const int code = run("--quiet --output-dir " + dir.string() + " metrics --plan " +
                       (dir / "plan.json").string() + " --actual " +
                       (dir / "a.csv").string() + " --compare " +
                       (dir / "b.csv").string());
  CHECK(code == 0);
  const json summary = io::load_json(dir / "metrics_summary.json");
  CHECK(summary[0]["entry_mm"]["mean"].get<double>() == doctest::Approx(2.5));
  const json pvals = io::load_json(dir / "metrics_pvalues.json");
  CHECK(pvals["entry_mm"].get<double>() < 0.01);
  CHECK(pvals["rotation_deg"].is_null());  // both groups have zero rotation spread
}

TEST_CASE("simulate-study is byte-identical across reruns and thread counts") {
  const fs::path dir_a = scratch("study_a");
  const fs::path dir_b = scratch("study_b");
  const json config = {{"seed", 20260810},
                       {"trials_per_condition", 12},
                       {"budget",
                        {{"slam_trans_mm", 0.4},
                         {"track_trans_mm", 0.35},
                         {"track_rot_deg", 0.25},
                         {"annotation_mm", 0.4}}},
                       {"threads", 1}};
  write_text(dir_a / "config.json", config.dump());
  json config4 = config;
  config4["threads"] = 4;
  write_text(dir_b / "config.json", config4.dump());

  CHECK(run("--quiet --output-dir " + dir_a.string() + " simulate-study --config " +
            (dir_a / "config.json").string()) == 0);
  CHECK(run("--quiet --output-dir " + dir_b.string() + " simulate-study --config " +
            (dir_b / "config.json").string()) == 0);

  const std::string report_a = slurp(dir_a / "report.json");
  const std::string report_b = slurp(dir_b / "report.json");
  CHECK(report_a == report_b);
  const std::string trials_csv = slurp(dir_a / "trials.csv");
  CHECK(trials_csv == slurp(dir_b / "trials.csv"));

  // 12 trials for each of 3 mounts x 2 interfaces, one CSV row per trial.
  const long rows = std::count(trials_csv.begin(), trials_csv.end(), '\n') - 1;
  CHECK(rows == 12 * 6);

  // Rerun in place reproduces the same bytes. The global --config flag is
  // the documented alternative spelling.
  CHECK(run("--quiet --output-dir " + dir_a.string() + " --config " +
            (dir_a / "config.json").string() + " simulate-study") == 0);
  CHECK(slurp(dir_a / "report.json") == report_a);
}

TEST_CASE("zero-noise study config reports an all-zero table") {
  const fs::path dir = scratch("study_zero");
  const json config = {{"seed", 5},
                       {"trials_per_condition", 6},
                       {"use_surface_marker", {false}},
                       {"operator",
                        {{"aim_trans_std_mm", 0.0},
                         {"aim_rot_std_deg", 0.0},
                         {"freehand_scale", 1.0},
                         {"convergence_mm", 1e-6},
                         {"iterations", 40}}},
                       {"bending",
                        {{"deflect_gain_mm_per_deg", 0.0},
                         {"skate_std_mm", 0.0},
                         {"cannula_stiffness", 0.0},
                         {"wire_stiffness", 0.0}}}};
  write_text(dir / "config.json", config.dump());
  CHECK(run("--quiet --output-dir " + dir.string() + " simulate-study --config " +
            (dir / "config.json").string()) == 0);
  const json report = io::load_json(dir / "report.json");
  for (const json& row : report) {
    CHECK(row["entry_mm"]["mean"].get<double>() < 1e-6);
    CHECK(row["end_mm"]["mean"].get<double>() < 1e-6);
    CHECK(row["rotation_deg"]["mean"].get<double>() < 1e-6);
  }
}

TEST_CASE("invalid study config exits 2") {
  const fs::path dir = scratch("study_bad");
  write_text(dir / "config.json", R"({"trials_per_condition": 0})");
  CHECK(run("--quiet --output-dir " + dir.string() + " simulate-study --config " +
            (dir / "config.json").string()) == 2);
}

TEST_CASE("simulate-e2e writes the distribution summary") {
  const fs::path dir = scratch("e2e");
  const json config = {{"seed", 9},
                       {"trials", 200},
                       {"landmarks_mm", {{0, 0, 0}, {80, 10, 5}, {-60, 40, 10}}},
                       {"budget", {{"pivot_mm", 0.5}}}};
  write_text(dir / "config.json", config.dump());
  CHECK(run("--quiet --output-dir " + dir.string() + " simulate-e2e --config " +
            (dir / "config.json").string()) == 0);
  const json result = io::load_json(dir / "e2e.json");
  CHECK(result["n"].get<int>() == 600);
  CHECK(result["mean_mm"].get<double>() > 0.2);
  CHECK(result["mean_mm"].get<double>() < 0.8);
}

TEST_SUITE_END();
