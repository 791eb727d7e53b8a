#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kwnav/calibration.hpp"
#include "kwnav/geometry.hpp"
#include "kwnav/metrics.hpp"
#include "kwnav/navigation.hpp"
#include "kwnav/registration.hpp"
#include "kwnav/simulation.hpp"
#include "kwnav/tracking.hpp"

namespace kwnav::io {

/// Parses a JSON file; ParseError messages carry "path:line:col".
nlohmann::json load_json(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const nlohmann::json& value);

// Transform literal: {"from": "P", "to": "I", "q": [w,x,y,z], "t": [x,y,z]},
// translations in millimetres. Shared by every format that embeds a
// transform.
nlohmann::json transform_to_json(const FramedTransform& xf);
FramedTransform transform_from_json(const nlohmann::json& value);
FramedTransform load_transform(const std::filesystem::path& path);
void save_transform(const std::filesystem::path& path, const FramedTransform& xf);

// Pivot dataset: JSON array of transform literals, one per observed pose.
// All entries must share the same frame pair.
PivotDataset load_pivot_dataset(const std::filesystem::path& path);
void save_pivot_dataset(const std::filesystem::path& path, const PivotDataset& data,
                        FrameId from, FrameId to);

nlohmann::json pivot_result_to_json(const PivotResult& result);
void save_pivot_result(const std::filesystem::path& path, const PivotResult& result);
PivotResult load_pivot_result(const std::filesystem::path& path);

// Shaft-fit input: JSON array of [x,y,z] tip offsets, or of pivot-result
// objects whose "tip_offset" is used.
std::vector<Vec3> load_tip_offsets(const std::filesystem::path& path);
void save_shaft_fit(const std::filesystem::path& path, const ShaftAxisFit& fit);
ShaftAxisFit load_shaft_fit(const std::filesystem::path& path);

// Marker layout: {"name": str, "points": {"m1": [x,y,z], ...}} plus an
// optional "frame" tag.
MarkerLayout load_layout(const std::filesystem::path& path);
void save_layout(const std::filesystem::path& path, const MarkerLayout& layout);

void save_registration_result(const std::filesystem::path& path,
                              const RegistrationResult& result);
RegistrationResult load_registration_result(const std::filesystem::path& path);

// Plan: {"entry_mm": [...], "exit_mm": [...], "frame": "I"}.
TrajectoryPlan load_plan(const std::filesystem::path& path);
void save_plan(const std::filesystem::path& path, const TrajectoryPlan& plan);

// Pose stream CSV with header
// t_s,frame_from,frame_to,qw,qx,qy,qz,tx_mm,ty_mm,tz_mm,valid
PoseStream load_pose_stream(const std::filesystem::path& path);
void save_pose_stream(const std::filesystem::path& path, const PoseStream& stream);

// Point cloud: CSV x_mm,y_mm,z_mm, or ascii vertex-only PLY when the file
// extension is .ply.
PointCloud load_cloud(const std::filesystem::path& path);
void save_cloud_csv(const std::filesystem::path& path, const PointCloud& cloud);

NoiseBudget budget_from_json(const nlohmann::json& value);
nlohmann::json budget_to_json(const NoiseBudget& budget);
OperatorModel operator_from_json(const nlohmann::json& value);
BendingModel bending_from_json(const nlohmann::json& value);
DepthSensorModel depth_from_json(const nlohmann::json& value);

/// Study configuration for `simulate-study`.
struct StudyConfig {
  std::uint64_t seed = 1;
  int trials_per_condition = 500;
  std::vector<MountMode> modes{MountMode::NonTracked, MountMode::DrillMounted,
                               MountMode::Cannula};
  std::vector<bool> surface_marker{false, true};
  NoiseBudget budget;
  OperatorModel op;
  BendingModel bending;
  DepthSensorModel depth;
  int threads = 1;
};

StudyConfig study_config_from_json(const nlohmann::json& value);
StudyConfig load_study_config(const std::filesystem::path& path);

/// Configuration for `simulate-e2e`.
struct E2eConfig {
  std::uint64_t seed = 1;
  int trials = 10000;
  std::vector<Vec3> landmarks_mm;
  NoiseBudget budget;
};

E2eConfig e2e_config_from_json(const nlohmann::json& value);
E2eConfig load_e2e_config(const std::filesystem::path& path);

struct ConditionReport {
  std::string condition;
  StudySummary summary;
};

nlohmann::json report_to_json(const std::vector<ConditionReport>& report);
void save_report(const std::filesystem::path& path,
                 const std::vector<ConditionReport>& report);

/// Per-trial CSV: condition,trial,entry_mm,mid_mm,end_mm,rotation_deg.
void save_trials_csv(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, std::vector<PlacementError>>>&
                         trials_by_condition);

/// Every CLI run writes one of these next to its outputs; identical
/// manifests (seed included) imply identical outputs.
struct RunManifest {
  std::string command;
  std::string version;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

/// FNV-1a over the canonical JSON dump; identifies configs, not tamper-proof.
std::string config_hash(const nlohmann::json& config);
void save_manifest(const std::filesystem::path& path, const RunManifest& manifest);

}  // namespace kwnav::io
