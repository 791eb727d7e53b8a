// kwnav: command-line front end for the K-wire navigation geometry engine.
// Workflow stages map to subcommands: plan-time calibration/registration
// (pivot, shaft-fit, register, ct-register), run-time guidance (indicate,
// surface-marker), and the evaluation studies (metrics, simulate-e2e,
// simulate-study). Exit codes: 0 ok, 2 input error, 3 numerical/degenerate.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kwnav/io.hpp"
#include "kwnav/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kwnav;

namespace {

struct GlobalOptions {
  fs::path output_dir = ".";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void write_manifest(const GlobalOptions& global, const std::string& command,
                    const json& config, std::uint64_t seed,
                    const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& outputs) {
  io::RunManifest manifest;
  manifest.command = command;
  manifest.version = std::string(kVersion);
  manifest.seed = seed;
  manifest.config_hash = io::config_hash(config);
  for (const fs::path& p : inputs) manifest.inputs.push_back(p.string());
  for (const fs::path& p : outputs) manifest.outputs.push_back(p.string());
  io::save_manifest(global.output_dir / (command + "_manifest.json"), manifest);
}

int cmd_pivot(const GlobalOptions& global, const fs::path& input) {
  const PivotDataset data = io::load_pivot_dataset(input);
  const PivotResult result = pivot_calibrate(data);
  const fs::path out = global.output_dir / "pivot.json";
  io::save_pivot_result(out, result);
  if (!global.quiet) {
    std::printf("pivot: tip offset [%.3f %.3f %.3f] mm, rms %.3f mm, mean %.3f mm\n",
                result.tip_offset.x(), result.tip_offset.y(), result.tip_offset.z(),
                result.rms_mm, result.mean_mm);
  }
  write_manifest(global, "pivot", json{{"input", input.string()}}, 0, {input}, {out});
  return 0;
}

int cmd_shaft_fit(const GlobalOptions& global, const fs::path& input) {
  const std::vector<Vec3> tips = io::load_tip_offsets(input);
  const ShaftAxisFit fit = shaft_axis_fit(tips);
  const fs::path out = global.output_dir / "shaft.json";
  io::save_shaft_fit(out, fit);
  if (!global.quiet) {
    std::printf("shaft-fit: direction [%.6f %.6f %.6f], residual rms %.4f mm\n",
                fit.axis.direction.x(), fit.axis.direction.y(), fit.axis.direction.z(),
                fit.residual_rms_mm);
  }
  write_manifest(global, "shaft-fit", json{{"input", input.string()}}, 0, {input}, {out});
  return 0;
}

// Pairs two layout files by marker label.
std::pair<std::vector<Vec3>, std::vector<Vec3>> pair_by_label(const MarkerLayout& model,
                                                              const MarkerLayout& observed) {
  std::map<std::string, Vec3> observed_by_label;
  for (std::size_t i = 0; i < observed.labels.size(); ++i) {
    observed_by_label[observed.labels[i]] = observed.points[i];
  }
  if (model.points.size() != observed.points.size()) {
    throw InputError("register: model has " + std::to_string(model.points.size()) +
                     " markers, observed has " + std::to_string(observed.points.size()));
  }
  std::vector<Vec3> model_pts, observed_pts;
  for (std::size_t i = 0; i < model.labels.size(); ++i) {
    const auto it = observed_by_label.find(model.labels[i]);
    if (it == observed_by_label.end()) {
      throw InputError("register: observed file lacks marker '" + model.labels[i] + "'");
    }
    model_pts.push_back(model.points[i]);
    observed_pts.push_back(it->second);
  }
  return {model_pts, observed_pts};
}

int cmd_register(const GlobalOptions& global, const fs::path& model_path,
                 const std::string& observed_path, const std::string& detections_path,
                 const std::string& observed_frame_name) {
  const MarkerLayout model = io::load_layout(model_path);
  const auto observed_frame = frame_from_name(observed_frame_name);
  if (!observed_frame) {
    throw InputError("register: unknown observed frame '" + observed_frame_name + "'");
  }

  RegistrationResult result;
  std::vector<fs::path> inputs{model_path};
  if (!detections_path.empty()) {
    const PointCloud detections = io::load_cloud(detections_path);
    result = pose_from_markers(model, detections.points, *observed_frame);
    inputs.emplace_back(detections_path);
  } else {
    const MarkerLayout observed = io::load_layout(observed_path);
    const auto [model_pts, observed_pts] = pair_by_label(model, observed);
    result = paired_point_register(model_pts, observed_pts, model.frame, *observed_frame);
    inputs.emplace_back(observed_path);
  }

  const fs::path out = global.output_dir / "registration.json";
  io::save_registration_result(out, result);
  if (!global.quiet) {
    std::printf("register: %s->%s, FRE rms %.4f mm\n",
                std::string(frame_name(result.xf.from)).c_str(),
                std::string(frame_name(result.xf.to)).c_str(), result.fre_rms_mm);
  }
  write_manifest(global, "register",
                 json{{"model", model_path.string()},
                      {"observed", observed_path},
                      {"detections", detections_path}},
                 0, inputs, {out});
  return 0;
}

int cmd_ct_register(const GlobalOptions& global, const fs::path& tp_path,
                    const fs::path& tm_path, const fs::path& mi_path) {
  const FramedTransform f_tp = io::load_transform(tp_path);
  const FramedTransform f_tm = io::load_transform(tm_path);
  const FramedTransform f_mi = io::load_transform(mi_path);
  const FramedTransform f_pi = ct_register(f_tp, f_tm, f_mi);
  const fs::path out = global.output_dir / "ct_registration.json";
  io::save_transform(out, f_pi);
  if (!global.quiet) std::printf("ct-register: wrote P->I transform\n");
  write_manifest(global, "ct-register",
                 json{{"tp", tp_path.string()},
                      {"tm", tm_path.string()},
                      {"mi", mi_path.string()}},
                 0, {tp_path, tm_path, mi_path}, {out});
  return 0;
}

// Latest-valid / interpolated pose lookup over one body's samples.
class StreamCursor {
 public:
  void add(const PoseSample& sample) { samples_.push_back(sample); }

  bool empty() const { return samples_.empty(); }

  double last_valid_before(double t) const {
    double last = -std::numeric_limits<double>::infinity();
    for (const PoseSample& s : samples_) {
      if (s.t_s > t) break;
      if (s.valid) last = s.t_s;
    }
    return last;
  }

  // Pose at time t: slerp between bracketing valid samples, zero-order hold
  // off the end.
  std::optional<FramedTransform> pose_at(double t) const {
    const PoseSample* before = nullptr;
    const PoseSample* after = nullptr;
    for (const PoseSample& s : samples_) {
      if (!s.valid) continue;
      if (s.t_s <= t) before = &s;
      if (s.t_s >= t && !after) after = &s;
    }
    if (!before && !after) return std::nullopt;
    if (!before) return after->pose;
    if (!after || before == after) return before->pose;
    return FramedTransform{before->pose.from, before->pose.to,
                           interpolate_pose(*before, *after, t)};
  }

 private:
  std::vector<PoseSample> samples_;
};

int cmd_indicate(const GlobalOptions& global, const fs::path& plan_path,
                 const fs::path& stream_path, const fs::path& ct_reg_path,
                 const std::string& shaft_path, double grace_s) {
  const TrajectoryPlan plan = io::load_plan(plan_path);
  const FramedTransform f_pi = io::load_transform(ct_reg_path);
  if (f_pi.from != FrameId::Patient || f_pi.to != FrameId::Image) {
    throw FrameMismatchError("indicate: CT registration must be P->I");
  }
  Line3 shaft{Vec3::Zero(), Vec3(0.0, 0.0, 1.0)};
  std::vector<fs::path> inputs{plan_path, stream_path, ct_reg_path};
  if (!shaft_path.empty()) {
    shaft = io::load_shaft_fit(shaft_path).axis;
    inputs.emplace_back(shaft_path);
  }

  const PoseStream stream = io::load_pose_stream(stream_path);
  // Global order plus strict per-body order.
  std::map<std::pair<FrameId, FrameId>, double> last_t;
  double prev_t = -std::numeric_limits<double>::infinity();
  for (const PoseSample& s : stream) {
    if (s.t_s < prev_t) throw OrderingError("indicate: stream is not time-ordered");
    prev_t = s.t_s;
    const auto key = std::make_pair(s.pose.from, s.pose.to);
    const auto it = last_t.find(key);
    if (it != last_t.end() && s.t_s <= it->second) {
      throw OrderingError("indicate: timestamps must strictly increase per body");
    }
    last_t[key] = s.t_s;
  }

  StreamCursor wh, hp, hc;
  for (const PoseSample& s : stream) {
    if (s.pose.from == FrameId::World && s.pose.to == FrameId::Hmd) wh.add(s);
    if (s.pose.from == FrameId::Hmd && s.pose.to == FrameId::Patient) hp.add(s);
    if (s.pose.from == FrameId::Hmd && s.pose.to == FrameId::Cannula) hc.add(s);
  }
  if (hc.empty()) throw InputError("indicate: stream has no H->C tool samples");
  if (hp.empty()) throw InputError("indicate: stream has no H->P patient samples");

  std::string csv =
      "t_s,entry_cx_mm,entry_cy_mm,entry_cz_mm,entry_radius_mm,entry_hx,entry_hy,"
      "entry_hz,end_cx_mm,end_cy_mm,end_cz_mm,end_radius_mm,end_hx,end_hy,end_hz\n";
  char buf[512];
  for (const PoseSample& s : stream) {
    if (!(s.pose.from == FrameId::Hmd && s.pose.to == FrameId::Cannula) || !s.valid) {
      continue;
    }
    const double t = s.t_s;
    const NavState gate =
        gate_navigation(hc.last_valid_before(t), hp.last_valid_before(t), t, grace_s);
    if (gate.state == NavGate::Suspended) continue;

    // Without a usable SLAM stream the HMD frame stands in for the world.
    FramedTransform f_wh_chain{FrameId::World, FrameId::Hmd, RigidTransform{}};
    if (!wh.empty()) {
      if (const auto f_wh = wh.pose_at(t)) f_wh_chain = *f_wh;
    }
    const auto f_hp = hp.pose_at(t);
    if (!f_hp) continue;

    try {
      const WorldTrajectory traj = world_trajectory(f_wh_chain, *f_hp, f_pi, plan);
      const Line3 tool = tool_axis_world(f_wh_chain, s.pose, shaft);
      const IndicatorGeometry ind = error_indicator(tool, traj.entry_w, traj.exit_w);
      const Vec3 eh = ind.entry_hatch.value_or(Vec3::Zero());
      const Vec3 xh = ind.end_hatch.value_or(Vec3::Zero());
      std::snprintf(buf, sizeof(buf),
                    "%.9f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,"
                    "%.6f,%.6f\n",
                    t, ind.entry_center.x(), ind.entry_center.y(), ind.entry_center.z(),
                    ind.entry_radius_mm, eh.x(), eh.y(), eh.z(), ind.end_center.x(),
                    ind.end_center.y(), ind.end_center.z(), ind.end_radius_mm, xh.x(),
                    xh.y(), xh.z());
      csv += buf;
    } catch (const NoIntersectionError&) {
      // Tool swung past the guard angle; same treatment as a dropout.
      continue;
    }
  }

  const fs::path out = global.output_dir / "indicators.csv";
  {
    std::FILE* f = std::fopen(out.string().c_str(), "wb");
    if (!f) throw InputError("cannot write " + out.string());
    std::fwrite(csv.data(), 1, csv.size(), f);
    std::fclose(f);
  }
  write_manifest(global, "indicate",
                 json{{"plan", plan_path.string()},
                      {"stream", stream_path.string()},
                      {"ct_registration", ct_reg_path.string()},
                      {"shaft", shaft_path},
                      {"grace_s", grace_s}},
                 0, inputs, {out});
  return 0;
}

int cmd_surface_marker(const GlobalOptions& global, const fs::path& cloud_path,
                       const fs::path& plan_path, const std::string& wi_path,
                       std::size_t k) {
  const PointCloud cloud = io::load_cloud(cloud_path);
  const TrajectoryPlan plan = io::load_plan(plan_path);
  Vec3 entry = plan.entry;
  Vec3 exit = plan.exit;
  std::vector<fs::path> inputs{cloud_path, plan_path};
  if (!wi_path.empty()) {
    const FramedTransform f_wi = io::load_transform(wi_path);
    if (f_wi.from != FrameId::World || f_wi.to != FrameId::Image) {
      throw FrameMismatchError("surface-marker: transform must be W->I");
    }
    entry = transform_point(f_wi, entry);
    exit = transform_point(f_wi, exit);
    inputs.emplace_back(wi_path);
  }
  const Line3 axis = make_line(entry, entry - exit);
  const SurfaceMarker marker = surface_marker(cloud, axis, k);

  const fs::path out = global.output_dir / "surface_marker.json";
  io::save_json(out, json{{"position_mm",
                           {marker.position.x(), marker.position.y(), marker.position.z()}},
                          {"normal", {marker.normal.x(), marker.normal.y(), marker.normal.z()}},
                          {"k", k}});
  if (!global.quiet) {
    std::printf("surface-marker: position [%.3f %.3f %.3f] mm\n", marker.position.x(),
                marker.position.y(), marker.position.z());
  }
  write_manifest(global, "surface-marker",
                 json{{"cloud", cloud_path.string()},
                      {"plan", plan_path.string()},
                      {"world_from_image", wi_path},
                      {"k", k}},
                 0, inputs, {out});
  return 0;
}

std::vector<Line3> load_lines_csv(const fs::path& path) {
  std::vector<Line3> lines;
  std::FILE* f = std::fopen(path.string().c_str(), "rb");
  if (!f) throw InputError("cannot open file: " + path.string());
  char line[512];
  std::size_t line_no = 0;
  while (std::fgets(line, sizeof(line), f)) {
    ++line_no;
    if (line_no == 1 && std::string(line).starts_with("px_mm")) continue;
    double px, py, pz, dx, dy, dz;
    if (std::sscanf(line, "%lf,%lf,%lf,%lf,%lf,%lf", &px, &py, &pz, &dx, &dy, &dz) != 6) {
      if (std::string(line).find_first_not_of(" \t\r\n") == std::string::npos) continue;
      std::fclose(f);
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected px_mm,py_mm,pz_mm,dx,dy,dz");
    }
    lines.push_back(make_line(Vec3(px, py, pz), Vec3(dx, dy, dz)));
  }
  std::fclose(f);
  if (lines.empty()) throw InputError("no wire lines in " + path.string());
  return lines;
}

int cmd_metrics(const GlobalOptions& global, const fs::path& plan_path,
                const fs::path& actual_path, const std::string& compare_path,
                const std::string& condition) {
  const TrajectoryPlan plan = io::load_plan(plan_path);
  const std::vector<Line3> actual = load_lines_csv(actual_path);

  std::vector<PlacementError> errors;
  errors.reserve(actual.size());
  for (const Line3& wire : actual) {
    errors.push_back(placement_error(plan.entry, plan.exit, wire));
  }

  std::vector<fs::path> inputs{plan_path, actual_path};
  std::vector<fs::path> outputs;
  const fs::path trials_out = global.output_dir / "metrics_trials.csv";
  io::save_trials_csv(trials_out, {{condition, errors}});
  outputs.push_back(trials_out);

  if (errors.size() >= 2) {
    const StudySummary summary = summarize(errors);
    const fs::path summary_out = global.output_dir / "metrics_summary.json";
    io::save_report(summary_out, {{condition, summary}});
    outputs.push_back(summary_out);
    if (!global.quiet) {
      std::printf("%s: entry %s, mid %s, end %s, rotation %s (n=%d)\n", condition.c_str(),
                  format_mean_std(summary.entry_mm).c_str(),
                  format_mean_std(summary.mid_mm).c_str(),
                  format_mean_std(summary.end_mm).c_str(),
                  format_mean_std(summary.rotation_deg).c_str(), summary.n);
    }
  }

  if (!compare_path.empty()) {
    const std::vector<Line3> other = load_lines_csv(compare_path);
    std::vector<PlacementError> other_errors;
    other_errors.reserve(other.size());
    for (const Line3& wire : other) {
      other_errors.push_back(placement_error(plan.entry, plan.exit, wire));
    }
    auto field = [](const std::vector<PlacementError>& v, auto getter) {
      std::vector<double> out;
      out.reserve(v.size());
      for (const PlacementError& e : v) out.push_back(getter(e));
      return out;
    };
    // A zero-variance field has no defined p-value; report null for it
    // instead of failing the whole comparison.
    auto p_or_null = [&](auto getter) -> json {
      try {
        return significance(field(errors, getter), field(other_errors, getter));
      } catch (const DegenerateInputError&) {
        return nullptr;
      }
    };
    json pvals;
    pvals["entry_mm"] = p_or_null([](auto& e) { return e.entry_mm; });
    pvals["mid_mm"] = p_or_null([](auto& e) { return e.mid_mm; });
    pvals["end_mm"] = p_or_null([](auto& e) { return e.end_mm; });
    pvals["rotation_deg"] = p_or_null([](auto& e) { return e.rotation_deg; });
    const fs::path p_out = global.output_dir / "metrics_pvalues.json";
    io::save_json(p_out, pvals);
    outputs.push_back(p_out);
    inputs.emplace_back(compare_path);
  }

  write_manifest(global, "metrics",
                 json{{"plan", plan_path.string()},
                      {"actual", actual_path.string()},
                      {"compare", compare_path},
                      {"condition", condition}},
                 0, inputs, outputs);
  return 0;
}

int cmd_simulate_e2e(const GlobalOptions& global, const fs::path& config_path) {
  const json config_json = io::load_json(config_path);
  io::E2eConfig config = io::e2e_config_from_json(config_json);
  if (global.seed) config.seed = *global.seed;

  const E2eSummary summary =
      simulate_e2e(config.budget, config.landmarks_mm, config.trials, config.seed);

  const fs::path out = global.output_dir / "e2e.json";
  io::save_json(out, json{{"mean_mm", summary.mean_mm},
                          {"std_mm", summary.std_mm},
                          {"n", summary.samples_mm.size()},
                          {"seed", config.seed}});
  if (!global.quiet) {
    std::printf("simulate-e2e: system error %.2f ± %.2f mm over %zu samples\n",
                summary.mean_mm, summary.std_mm, summary.samples_mm.size());
  }
  write_manifest(global, "simulate-e2e", config_json, config.seed, {config_path}, {out});
  return 0;
}

int cmd_simulate_study(const GlobalOptions& global, const fs::path& config_path) {
  const json config_json = io::load_json(config_path);
  io::StudyConfig config = io::study_config_from_json(config_json);
  if (global.seed) config.seed = *global.seed;

  const PhantomSpec phantom = generate_phantom(config.seed);
  std::vector<io::ConditionReport> report;
  std::vector<std::pair<std::string, std::vector<PlacementError>>> trials;

  for (bool marker : config.surface_marker) {
    for (MountMode mode : config.modes) {
      const std::string condition =
          std::string(mount_mode_name(mode)) + (marker ? "+marker" : "");
      std::vector<PlacementError> errors = simulate_insertion(
          phantom, mode, marker, config.budget, config.op, config.bending, config.depth,
          config.trials_per_condition, config.seed, config.threads);
      if (errors.size() >= 2) {
        report.push_back({condition, summarize(errors)});
      }
      trials.emplace_back(condition, std::move(errors));
    }
  }

  const fs::path report_out = global.output_dir / "report.json";
  const fs::path trials_out = global.output_dir / "trials.csv";
  io::save_report(report_out, report);
  io::save_trials_csv(trials_out, trials);

  if (!global.quiet) {
    std::printf("%-22s %-16s %-16s %-16s %-16s %s\n", "Navigation Target",
                "Entry (mm)", "Mid (mm)", "End (mm)", "Rotation (deg)", "n");
    for (const io::ConditionReport& row : report) {
      std::printf("%-22s %-16s %-16s %-16s %-16s %d\n", row.condition.c_str(),
                  format_mean_std(row.summary.entry_mm).c_str(),
                  format_mean_std(row.summary.mid_mm).c_str(),
                  format_mean_std(row.summary.end_mm).c_str(),
                  format_mean_std(row.summary.rotation_deg).c_str(), row.summary.n);
    }
  }

  write_manifest(global, "simulate-study", config_json, config.seed, {config_path},
                 {report_out, trials_out});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"K-wire navigation geometry engine and study simulator"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalOptions global;
  app.add_option("--output-dir", global.output_dir, "Directory for outputs and manifests");
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Override the config seed");
  app.add_flag("--quiet", global.quiet, "Suppress stdout summaries");
  fs::path global_config;
  app.add_option("--config", global_config,
                 "Config JSON for the simulate commands (per-command --config wins)");

  fs::path pivot_input;
  auto* pivot = app.add_subcommand("pivot", "Pivot calibration from a pose dataset");
  pivot->add_option("--input", pivot_input, "Pivot dataset JSON")->required();

  fs::path shaft_input;
  auto* shaft = app.add_subcommand("shaft-fit", "Fit the shaft axis to tip offsets");
  shaft->add_option("--input", shaft_input, "Tip offsets JSON")->required();

  fs::path reg_model;
  std::string reg_observed, reg_detections, reg_observed_frame = "T";
  auto* reg = app.add_subcommand("register", "Paired-point or correspondence-free registration");
  reg->add_option("--model", reg_model, "Model marker layout JSON")->required();
  reg->add_option("--observed", reg_observed, "Observed layout JSON (paired by label)");
  reg->add_option("--detections", reg_detections, "Unordered detections CSV");
  reg->add_option("--observed-frame", reg_observed_frame, "Frame of the observations");

  fs::path ct_tp, ct_tm, ct_mi;
  auto* ct = app.add_subcommand("ct-register", "Compose the CT registration chain");
  ct->add_option("--tp", ct_tp, "T->P transform literal")->required();
  ct->add_option("--tm", ct_tm, "T->M transform literal")->required();
  ct->add_option("--mi", ct_mi, "M->I transform literal")->required();

  fs::path ind_plan, ind_stream, ind_reg;
  std::string ind_shaft;
  double ind_grace = 0.3;
  auto* ind = app.add_subcommand("indicate", "Per-timestamp error indicators from a pose stream");
  ind->add_option("--plan", ind_plan, "Trajectory plan JSON")->required();
  ind->add_option("--stream", ind_stream, "Pose stream CSV")->required();
  ind->add_option("--ct-registration", ind_reg, "P->I transform literal")->required();
  ind->add_option("--shaft", ind_shaft, "Shaft fit JSON (default: +z through origin)");
  ind->add_option("--grace", ind_grace, "Dropout grace period in seconds");

  fs::path sm_cloud, sm_plan;
  std::string sm_wi;
  std::size_t sm_k = 500;
  auto* sm = app.add_subcommand("surface-marker", "Skin insertion point from a point cloud");
  sm->add_option("--cloud", sm_cloud, "Point cloud CSV or ascii PLY")->required();
  sm->add_option("--plan", sm_plan, "Trajectory plan JSON")->required();
  sm->add_option("--world-from-image", sm_wi, "W->I transform literal (default identity)");
  sm->add_option("-k,--neighbors", sm_k, "Neighbor count for the plane fit");

  fs::path met_plan, met_actual;
  std::string met_compare, met_condition = "actual";
  auto* met = app.add_subcommand("metrics", "Placement errors of measured wire lines");
  met->add_option("--plan", met_plan, "Trajectory plan JSON")->required();
  met->add_option("--actual", met_actual, "Wire lines CSV")->required();
  met->add_option("--compare", met_compare, "Second wire lines CSV for significance");
  met->add_option("--condition", met_condition, "Label for the report rows");

  fs::path e2e_config;
  auto* e2e = app.add_subcommand("simulate-e2e", "Touch-point accuracy Monte Carlo");
  e2e->add_option("--config", e2e_config, "E2E config JSON");

  fs::path study_config;
  auto* study = app.add_subcommand("simulate-study", "Insertion study Monte Carlo");
  study->add_option("--config", study_config, "Study config JSON");

  try {
    app.parse(argc, argv);
    if (seed_opt->count() > 0) global.seed = seed_value;
    std::error_code ec;
    fs::create_directories(global.output_dir, ec);

    if (*pivot) return cmd_pivot(global, pivot_input);
    if (*shaft) return cmd_shaft_fit(global, shaft_input);
    if (*reg) {
      if (reg_observed.empty() == reg_detections.empty()) {
        throw InputError("register: provide exactly one of --observed / --detections");
      }
      return cmd_register(global, reg_model, reg_observed, reg_detections,
                          reg_observed_frame);
    }
    if (*ct) return cmd_ct_register(global, ct_tp, ct_tm, ct_mi);
    if (*ind) return cmd_indicate(global, ind_plan, ind_stream, ind_reg, ind_shaft, ind_grace);
    if (*sm) return cmd_surface_marker(global, sm_cloud, sm_plan, sm_wi, sm_k);
    if (*met) return cmd_metrics(global, met_plan, met_actual, met_compare, met_condition);
    auto resolve_config = [&](const fs::path& sub, const char* command) {
      if (!sub.empty()) return sub;
      if (!global_config.empty()) return global_config;
      throw InputError(std::string(command) + ": no config file given");
    };
    if (*e2e) return cmd_simulate_e2e(global, resolve_config(e2e_config, "simulate-e2e"));
    if (*study) {
      return cmd_simulate_study(global, resolve_config(study_config, "simulate-study"));
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const DegenerateInputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
}
