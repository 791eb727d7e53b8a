#include "kwnav/io.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace kwnav::io {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path.string());
  out << contents;
}

// nlohmann reports a byte offset; turn that into line:col for diagnostics.
std::pair<std::size_t, std::size_t> line_col(const std::string& text,
                                             std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

Vec3 vec3_from_json(const json& value, const char* what) {
  if (!value.is_array() || value.size() != 3) {
    throw InputError(std::string(what) + " must be a 3-element array");
  }
  return {value[0].get<double>(), value[1].get<double>(), value[2].get<double>()};
}

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

FrameId frame_from_json(const json& value, const char* what) {
  const std::string name = value.get<std::string>();
  const auto id = frame_from_name(name);
  if (!id) throw InputError(std::string(what) + ": unknown frame '" + name + "'");
  return *id;
}

double get_or(const json& value, const char* key, double fallback) {
  return value.contains(key) ? value.at(key).get<double>() : fallback;
}

}  // namespace

json load_json(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError(path.string() + ":" + std::to_string(line) + ":" +
                     std::to_string(col) + ": " + e.what());
  }
}

void save_json(const std::filesystem::path& path, const json& value) {
  write_file(path, value.dump(2) + "\n");
}

json transform_to_json(const FramedTransform& xf) {
  return json{{"from", std::string(frame_name(xf.from))},
              {"to", std::string(frame_name(xf.to))},
              {"q",
               {xf.xf.rotation.w(), xf.xf.rotation.x(), xf.xf.rotation.y(),
                xf.xf.rotation.z()}},
              {"t", vec3_to_json(xf.xf.translation)}};
}

FramedTransform transform_from_json(const json& value) {
  if (!value.is_object()) throw InputError("transform literal must be an object");
  for (const char* key : {"from", "to", "q", "t"}) {
    if (!value.contains(key)) {
      throw InputError(std::string("transform literal missing key '") + key + "'");
    }
  }
  const json& q = value.at("q");
  if (!q.is_array() || q.size() != 4) {
    throw InputError("transform literal: 'q' must be [w,x,y,z]");
  }
  FramedTransform out;
  out.from = frame_from_json(value.at("from"), "transform literal 'from'");
  out.to = frame_from_json(value.at("to"), "transform literal 'to'");
  out.xf = make_rigid_transform(
      Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
           q[3].get<double>()),
      vec3_from_json(value.at("t"), "transform literal 't'"), 1e-6);
  return out;
}

FramedTransform load_transform(const std::filesystem::path& path) {
  return transform_from_json(load_json(path));
}

void save_transform(const std::filesystem::path& path, const FramedTransform& xf) {
  save_json(path, transform_to_json(xf));
}

PivotDataset load_pivot_dataset(const std::filesystem::path& path) {
  const json value = load_json(path);
  if (!value.is_array()) throw InputError("pivot dataset must be a JSON array");
  PivotDataset data;
  data.observations.reserve(value.size());
  bool first = true;
  FrameId from = FrameId::Tracker, to = FrameId::Cannula;
  for (const json& entry : value) {
    const FramedTransform xf = transform_from_json(entry);
    if (first) {
      from = xf.from;
      to = xf.to;
      first = false;
    } else if (xf.from != from || xf.to != to) {
      throw InputError("pivot dataset: observations must share one frame pair");
    }
    data.observations.push_back(xf.xf);
  }
  return data;
}

void save_pivot_dataset(const std::filesystem::path& path, const PivotDataset& data,
                        FrameId from, FrameId to) {
  json arr = json::array();
  for (const RigidTransform& xf : data.observations) {
    arr.push_back(transform_to_json({from, to, xf}));
  }
  save_json(path, arr);
}

json pivot_result_to_json(const PivotResult& result) {
  return json{{"tip_offset", vec3_to_json(result.tip_offset)},
              {"pivot_point", vec3_to_json(result.pivot_point)},
              {"rms_mm", result.rms_mm},
              {"mean_mm", result.mean_mm}};
}

void save_pivot_result(const std::filesystem::path& path, const PivotResult& result) {
  save_json(path, pivot_result_to_json(result));
}

PivotResult load_pivot_result(const std::filesystem::path& path) {
  const json value = load_json(path);
  PivotResult result;
  result.tip_offset = vec3_from_json(value.at("tip_offset"), "tip_offset");
  result.pivot_point = vec3_from_json(value.at("pivot_point"), "pivot_point");
  result.rms_mm = value.at("rms_mm").get<double>();
  result.mean_mm = value.at("mean_mm").get<double>();
  return result;
}

std::vector<Vec3> load_tip_offsets(const std::filesystem::path& path) {
  const json value = load_json(path);
  if (!value.is_array()) throw InputError("tip offset file must be a JSON array");
  std::vector<Vec3> out;
  out.reserve(value.size());
  for (const json& entry : value) {
    if (entry.is_object() && entry.contains("tip_offset")) {
      out.push_back(vec3_from_json(entry.at("tip_offset"), "tip_offset"));
    } else {
      out.push_back(vec3_from_json(entry, "tip offset"));
    }
  }
  return out;
}

void save_shaft_fit(const std::filesystem::path& path, const ShaftAxisFit& fit) {
  save_json(path, json{{"axis",
                        {{"point_mm", vec3_to_json(fit.axis.point)},
                         {"direction", vec3_to_json(fit.axis.direction)}}},
                       {"residual_rms_mm", fit.residual_rms_mm}});
}

ShaftAxisFit load_shaft_fit(const std::filesystem::path& path) {
  const json value = load_json(path);
  ShaftAxisFit fit;
  fit.axis = make_line(vec3_from_json(value.at("axis").at("point_mm"), "axis point"),
                       vec3_from_json(value.at("axis").at("direction"), "axis direction"));
  fit.residual_rms_mm = value.at("residual_rms_mm").get<double>();
  return fit;
}

MarkerLayout load_layout(const std::filesystem::path& path) {
  const json value = load_json(path);
  MarkerLayout layout;
  layout.name = value.contains("name") ? value.at("name").get<std::string>() : "";
  if (value.contains("frame")) {
    layout.frame = frame_from_json(value.at("frame"), "layout 'frame'");
  }
  if (!value.contains("points") || !value.at("points").is_object()) {
    throw InputError("marker layout: 'points' must be an object of name -> [x,y,z]");
  }
  // json objects iterate in sorted key order, so file order is irrelevant.
  for (const auto& [label, coords] : value.at("points").items()) {
    layout.labels.push_back(label);
    layout.points.push_back(vec3_from_json(coords, "layout point"));
  }
  return layout;
}

void save_layout(const std::filesystem::path& path, const MarkerLayout& layout) {
  json points = json::object();
  for (std::size_t i = 0; i < layout.points.size(); ++i) {
    points[layout.labels[i]] = vec3_to_json(layout.points[i]);
  }
  save_json(path, json{{"name", layout.name},
                       {"frame", std::string(frame_name(layout.frame))},
                       {"points", points}});
}

void save_registration_result(const std::filesystem::path& path,
                              const RegistrationResult& result) {
  save_json(path, json{{"xf", transform_to_json(result.xf)},
                       {"fre_rms_mm", result.fre_rms_mm}});
}

RegistrationResult load_registration_result(const std::filesystem::path& path) {
  const json value = load_json(path);
  RegistrationResult result;
  result.xf = transform_from_json(value.at("xf"));
  result.fre_rms_mm = value.at("fre_rms_mm").get<double>();
  return result;
}

TrajectoryPlan load_plan(const std::filesystem::path& path) {
  const json value = load_json(path);
  return make_plan(vec3_from_json(value.at("entry_mm"), "plan entry"),
                   vec3_from_json(value.at("exit_mm"), "plan exit"));
}

void save_plan(const std::filesystem::path& path, const TrajectoryPlan& plan) {
  save_json(path, json{{"entry_mm", vec3_to_json(plan.entry)},
                       {"exit_mm", vec3_to_json(plan.exit)},
                       {"frame", "I"}});
}

PoseStream load_pose_stream(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  PoseStream stream;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.starts_with("t_s")) continue;
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != 11) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected 11 fields, got " + std::to_string(fields.size()));
    }
    try {
      PoseSample sample;
      sample.t_s = std::stod(fields[0]);
      const auto from = frame_from_name(fields[1]);
      const auto to = frame_from_name(fields[2]);
      if (!from || !to) {
        throw InputError("unknown frame '" + fields[1] + "'/'" + fields[2] + "'");
      }
      sample.pose.from = *from;
      sample.pose.to = *to;
      sample.pose.xf = make_rigid_transform(
          Quat(std::stod(fields[3]), std::stod(fields[4]), std::stod(fields[5]),
               std::stod(fields[6])),
          Vec3(std::stod(fields[7]), std::stod(fields[8]), std::stod(fields[9])),
          1e-6);
      sample.valid = std::stoi(fields[10]) != 0;
      stream.push_back(sample);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return stream;
}

void save_pose_stream(const std::filesystem::path& path, const PoseStream& stream) {
  std::ostringstream out;
  out << "t_s,frame_from,frame_to,qw,qx,qy,qz,tx_mm,ty_mm,tz_mm,valid\n";
  char buf[256];
  for (const PoseSample& s : stream) {
    std::snprintf(buf, sizeof(buf),
                  "%.9f,%s,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", s.t_s,
                  std::string(frame_name(s.pose.from)).c_str(),
                  std::string(frame_name(s.pose.to)).c_str(), s.pose.xf.rotation.w(),
                  s.pose.xf.rotation.x(), s.pose.xf.rotation.y(),
                  s.pose.xf.rotation.z(), s.pose.xf.translation.x(),
                  s.pose.xf.translation.y(), s.pose.xf.translation.z(),
                  s.valid ? 1 : 0);
    out << buf;
  }
  write_file(path, out.str());
}

namespace {

PointCloud load_cloud_ply(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t vertex_count = 0;
  bool in_header = true;
  std::size_t line_no = 0;
  PointCloud cloud;
  while (std::getline(in, line)) {
    ++line_no;
    if (in_header) {
      if (line.starts_with("element vertex")) {
        std::istringstream row(line);
        std::string tok;
        row >> tok >> tok >> vertex_count;
      } else if (line.starts_with("format") && line.find("ascii") == std::string::npos) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": only ascii PLY is supported");
      } else if (line.starts_with("end_header")) {
        in_header = false;
      }
      continue;
    }
    if (cloud.points.size() >= vertex_count) break;
    std::istringstream row(line);
    double x, y, z;
    if (!(row >> x >> y >> z)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": malformed vertex line");
    }
    cloud.points.emplace_back(x, y, z);
  }
  if (cloud.points.size() != vertex_count) {
    throw ParseError(path.string() + ": expected " + std::to_string(vertex_count) +
                     " vertices, got " + std::to_string(cloud.points.size()));
  }
  return cloud;
}

}  // namespace

PointCloud load_cloud(const std::filesystem::path& path) {
  if (path.extension() == ".ply") return load_cloud_ply(path);
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  PointCloud cloud;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.starts_with("x_mm")) continue;
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != 3) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected x_mm,y_mm,z_mm");
    }
    try {
      cloud.points.emplace_back(std::stod(fields[0]), std::stod(fields[1]),
                                std::stod(fields[2]));
    } catch (const std::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate_cloud(cloud);
  return cloud;
}

void save_cloud_csv(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ostringstream out;
  out << "x_mm,y_mm,z_mm\n";
  char buf[128];
  for (const Vec3& p : cloud.points) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.x(), p.y(), p.z());
    out << buf;
  }
  write_file(path, out.str());
}

NoiseBudget budget_from_json(const json& value) {
  NoiseBudget b;
  b.slam_trans_mm = get_or(value, "slam_trans_mm", 0.0);
  b.slam_rot_deg = get_or(value, "slam_rot_deg", 0.0);
  b.track_trans_mm = get_or(value, "track_trans_mm", 0.0);
  b.track_rot_deg = get_or(value, "track_rot_deg", 0.0);
  b.pivot_mm = get_or(value, "pivot_mm", 0.0);
  b.ctreg_trans_mm = get_or(value, "ctreg_trans_mm", 0.0);
  b.ctreg_rot_deg = get_or(value, "ctreg_rot_deg", 0.0);
  b.annotation_mm = get_or(value, "annotation_mm", 0.0);
  for (double v : {b.slam_trans_mm, b.slam_rot_deg, b.track_trans_mm, b.track_rot_deg,
                   b.pivot_mm, b.ctreg_trans_mm, b.ctreg_rot_deg, b.annotation_mm}) {
    if (v < 0.0) throw InputError("noise budget entries must be >= 0");
  }
  return b;
}

json budget_to_json(const NoiseBudget& b) {
  return json{{"slam_trans_mm", b.slam_trans_mm},
              {"slam_rot_deg", b.slam_rot_deg},
              {"track_trans_mm", b.track_trans_mm},
              {"track_rot_deg", b.track_rot_deg},
              {"pivot_mm", b.pivot_mm},
              {"ctreg_trans_mm", b.ctreg_trans_mm},
              {"ctreg_rot_deg", b.ctreg_rot_deg},
              {"annotation_mm", b.annotation_mm}};
}

OperatorModel operator_from_json(const json& value) {
  OperatorModel op;
  op.aim_trans_std_mm = get_or(value, "aim_trans_std_mm", op.aim_trans_std_mm);
  op.aim_rot_std_deg = get_or(value, "aim_rot_std_deg", op.aim_rot_std_deg);
  if (value.contains("iterations")) op.iterations = value.at("iterations").get<int>();
  op.convergence_mm = get_or(value, "convergence_mm", op.convergence_mm);
  op.freehand_scale = get_or(value, "freehand_scale", op.freehand_scale);
  op.initial_offset_mm = get_or(value, "initial_offset_mm", op.initial_offset_mm);
  op.initial_tilt_deg = get_or(value, "initial_tilt_deg", op.initial_tilt_deg);
  if (op.aim_trans_std_mm < 0.0 || op.aim_rot_std_deg < 0.0 || op.iterations < 1) {
    throw InputError("operator model: residuals must be >= 0 and iterations >= 1");
  }
  return op;
}

BendingModel bending_from_json(const json& value) {
  BendingModel b;
  b.deflect_gain_mm_per_deg =
      get_or(value, "deflect_gain_mm_per_deg", b.deflect_gain_mm_per_deg);
  b.skate_std_mm = get_or(value, "skate_std_mm", b.skate_std_mm);
  b.cannula_stiffness = get_or(value, "cannula_stiffness", b.cannula_stiffness);
  b.wire_stiffness = get_or(value, "wire_stiffness", b.wire_stiffness);
  if (b.deflect_gain_mm_per_deg < 0.0 || b.skate_std_mm < 0.0 ||
      b.cannula_stiffness < 0.0 || b.cannula_stiffness > 1.0 ||
      b.wire_stiffness < 0.0 || b.wire_stiffness > 1.0) {
    throw InputError("bending model: gains >= 0, stiffness factors in [0,1]");
  }
  return b;
}

DepthSensorModel depth_from_json(const json& value) {
  DepthSensorModel d;
  d.point_noise_std_mm = get_or(value, "point_noise_std_mm", d.point_noise_std_mm);
  d.marker_bias_mm = get_or(value, "marker_bias_mm", d.marker_bias_mm);
  if (d.point_noise_std_mm < 0.0 || d.marker_bias_mm < 0.0) {
    throw InputError("depth sensor model: values must be >= 0");
  }
  return d;
}

StudyConfig study_config_from_json(const json& value) {
  StudyConfig config;
  if (value.contains("seed")) config.seed = value.at("seed").get<std::uint64_t>();
  if (value.contains("trials_per_condition")) {
    config.trials_per_condition = value.at("trials_per_condition").get<int>();
  }
  if (config.trials_per_condition < 1) {
    throw InputError("study config: trials_per_condition must be >= 1");
  }
  if (value.contains("modes")) {
    config.modes.clear();
    for (const json& m : value.at("modes")) {
      const auto mode = mount_mode_from_name(m.get<std::string>());
      if (!mode) throw InputError("study config: unknown mode '" + m.get<std::string>() + "'");
      config.modes.push_back(*mode);
    }
    if (config.modes.empty()) throw InputError("study config: 'modes' is empty");
  }
  if (value.contains("use_surface_marker")) {
    config.surface_marker.clear();
    for (const json& f : value.at("use_surface_marker")) {
      config.surface_marker.push_back(f.get<bool>());
    }
    if (config.surface_marker.empty()) {
      throw InputError("study config: 'use_surface_marker' is empty");
    }
  }
  if (value.contains("budget")) config.budget = budget_from_json(value.at("budget"));
  if (value.contains("operator")) config.op = operator_from_json(value.at("operator"));
  if (value.contains("bending")) config.bending = bending_from_json(value.at("bending"));
  if (value.contains("depth")) config.depth = depth_from_json(value.at("depth"));
  if (value.contains("threads")) config.threads = value.at("threads").get<int>();
  if (config.threads < 1) throw InputError("study config: threads must be >= 1");
  return config;
}

StudyConfig load_study_config(const std::filesystem::path& path) {
  return study_config_from_json(load_json(path));
}

E2eConfig e2e_config_from_json(const json& value) {
  E2eConfig config;
  if (value.contains("seed")) config.seed = value.at("seed").get<std::uint64_t>();
  if (value.contains("trials")) config.trials = value.at("trials").get<int>();
  if (config.trials < 1) throw InputError("e2e config: trials must be >= 1");
  if (!value.contains("landmarks_mm")) {
    throw InputError("e2e config: 'landmarks_mm' is required");
  }
  for (const json& lm : value.at("landmarks_mm")) {
    config.landmarks_mm.push_back(vec3_from_json(lm, "landmark"));
  }
  if (config.landmarks_mm.empty()) throw InputError("e2e config: no landmarks");
  if (value.contains("budget")) config.budget = budget_from_json(value.at("budget"));
  return config;
}

E2eConfig load_e2e_config(const std::filesystem::path& path) {
  return e2e_config_from_json(load_json(path));
}

namespace {

json field_to_json(const FieldStats& stats) {
  return json{{"mean", stats.mean}, {"std", stats.std}};
}

}  // namespace

json report_to_json(const std::vector<ConditionReport>& report) {
  json arr = json::array();
  for (const ConditionReport& entry : report) {
    arr.push_back(json{{"condition", entry.condition},
                       {"entry_mm", field_to_json(entry.summary.entry_mm)},
                       {"mid_mm", field_to_json(entry.summary.mid_mm)},
                       {"end_mm", field_to_json(entry.summary.end_mm)},
                       {"rotation_deg", field_to_json(entry.summary.rotation_deg)},
                       {"n", entry.summary.n}});
  }
  return arr;
}

void save_report(const std::filesystem::path& path,
                 const std::vector<ConditionReport>& report) {
  save_json(path, report_to_json(report));
}

void save_trials_csv(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, std::vector<PlacementError>>>&
        trials_by_condition) {
  std::ostringstream out;
  out << "condition,trial,entry_mm,mid_mm,end_mm,rotation_deg\n";
  char buf[256];
  for (const auto& [condition, trials] : trials_by_condition) {
    for (std::size_t i = 0; i < trials.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,%.6f,%.6f,%.6f\n", condition.c_str(),
                    i, trials[i].entry_mm, trials[i].mid_mm, trials[i].end_mm,
                    trials[i].rotation_deg);
      out << buf;
    }
  }
  write_file(path, out.str());
}

std::string config_hash(const json& config) {
  const std::string dump = config.dump();
  std::uint64_t hash = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : dump) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

void save_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
  save_json(path, json{{"command", manifest.command},
                       {"version", manifest.version},
                       {"seed", manifest.seed},
                       {"config_hash", manifest.config_hash},
                       {"inputs", manifest.inputs},
                       {"outputs", manifest.outputs}});
}

}  // namespace kwnav::io
