#include "kwnav/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "kwnav/navigation.hpp"

namespace kwnav {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg2Rad = kPi / 180.0;

// RNG stream ids; per-trial streams hang off these.
constexpr std::uint64_t kStreamE2e = 1;
constexpr std::uint64_t kStreamPhantom = 2;
constexpr std::uint64_t kStreamStudyBase = 16;  // + mode index * 2 + surface marker

double gauss(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

Vec3 gauss3(Rng& rng) {
  const double x = gauss(rng);
  const double y = gauss(rng);
  const double z = gauss(rng);
  return {x, y, z};
}

// Isotropic translation noise with 3D-rms magnitude `std_mm`.
Vec3 translation_noise(Rng& rng, double std_mm) {
  return (std_mm / std::sqrt(3.0)) * gauss3(rng);
}

Vec3 random_unit(Rng& rng) {
  for (;;) {
    const Vec3 v = gauss3(rng);
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

// Rotation about a uniformly random axis by a Gaussian angle (rms `std_deg`).
Quat rotation_noise(Rng& rng, double std_deg) {
  const Vec3 axis = random_unit(rng);
  const double angle = gauss(rng) * std_deg * kDeg2Rad;
  if (angle == 0.0) return Quat::Identity();
  return Quat(Eigen::AngleAxisd(angle, axis));
}

// Orthonormal basis of the plane orthogonal to unit `axis`.
std::pair<Vec3, Vec3> plane_basis(const Vec3& axis) {
  const Vec3 u = axis.unitOrthogonal();
  return {u, axis.cross(u)};
}

// 2D Gaussian offset in the plane orthogonal to `axis`, per-axis std.
Vec3 in_plane_gauss(Rng& rng, const Vec3& axis, double std_mm) {
  const auto [u, v] = plane_basis(axis);
  const double a = gauss(rng);
  const double b = gauss(rng);
  return std_mm * (a * u + b * v);
}

// Uniformly random unit vector in the plane orthogonal to `axis`.
Vec3 in_plane_dir(Rng& rng, const Vec3& axis) {
  const auto [u, v] = plane_basis(axis);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  const double a = angle(rng);
  return std::cos(a) * u + std::sin(a) * v;
}

// Tilts `dir` by `angle_deg` about a random axis orthogonal to it.
Vec3 tilt_direction(Rng& rng, const Vec3& dir, double angle_deg) {
  if (angle_deg == 0.0) return dir;
  const Vec3 axis = in_plane_dir(rng, dir);
  return Eigen::AngleAxisd(angle_deg * kDeg2Rad, axis) * dir;
}

Vec3 intersect_plane(const Line3& line, const Vec3& anchor, const Vec3& axis_dir) {
  const double denom = line.direction.dot(axis_dir);
  const double t = (anchor - line.point).dot(axis_dir) / denom;
  return line.point + t * line.direction;
}

Line3 jitter_line(Rng& rng, const Line3& line, double trans_std_mm,
                  double rot_std_deg) {
  Line3 out;
  out.point = line.point + translation_noise(rng, trans_std_mm);
  const Quat dq = rotation_noise(rng, rot_std_deg);
  out.direction = dq * line.direction;
  return out;
}

}  // namespace

Rng make_trial_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t trial) {
  std::seed_seq seq{
      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  return Rng(seq);
}

Quat random_rotation(Rng& rng) {
  // Normalized 4D Gaussian is uniform on SO(3).
  for (;;) {
    const double w = gauss(rng);
    const double x = gauss(rng);
    const double y = gauss(rng);
    const double z = gauss(rng);
    Quat q(w, x, y, z);
    const double n = q.norm();
    if (n > 1e-12) return Quat(q.coeffs() / n);
  }
}

RigidTransform random_transform(Rng& rng, double max_trans_mm) {
  std::uniform_real_distribution<double> u(-max_trans_mm, max_trans_mm);
  RigidTransform out;
  out.rotation = random_rotation(rng);
  const double x = u(rng);
  const double y = u(rng);
  const double z = u(rng);
  out.translation = Vec3(x, y, z);
  return out;
}

RigidTransform perturb(const RigidTransform& xf, double trans_std_mm,
                       double rot_std_deg, Rng& rng) {
  RigidTransform out;
  out.translation = xf.translation + translation_noise(rng, trans_std_mm);
  const Quat dq = rotation_noise(rng, rot_std_deg);
  // Right-composed so rotation noise does not leak into the translation.
  out.rotation = dq.isApprox(Quat::Identity(), 0.0)
                     ? xf.rotation
                     : (xf.rotation * dq).normalized();
  return out;
}

FramedTransform perturb(const FramedTransform& xf, double trans_std_mm,
                        double rot_std_deg, Rng& rng) {
  return {xf.from, xf.to, perturb(xf.xf, trans_std_mm, rot_std_deg, rng)};
}

Vec3 perturb_point(const Vec3& p, double std_mm, Rng& rng) {
  return p + translation_noise(rng, std_mm);
}

E2eScene random_scene(Rng& rng) {
  E2eScene scene;
  scene.f_wh = {FrameId::World, FrameId::Hmd, random_transform(rng)};
  scene.f_hp = {FrameId::Hmd, FrameId::Patient, random_transform(rng)};
  scene.f_pi = {FrameId::Patient, FrameId::Image, random_transform(rng)};
  scene.tip_offset = Vec3(0.0, 0.0, 150.0);
  return scene;
}

E2eSummary simulate_e2e(const NoiseBudget& budget, std::span<const Vec3> landmarks_image,
                        int trials, std::uint64_t seed,
                        const std::optional<E2eScene>& scene) {
  if (trials < 1) throw InputError("simulate_e2e: trials must be >= 1");
  if (landmarks_image.empty()) throw InputError("simulate_e2e: no landmarks");

  E2eSummary summary;
  summary.samples_mm.reserve(static_cast<std::size_t>(trials) * landmarks_image.size());

  for (int trial = 0; trial < trials; ++trial) {
    Rng rng = make_trial_rng(seed, kStreamE2e, static_cast<std::uint64_t>(trial));
    const E2eScene sc = scene ? *scene : random_scene(rng);
    const FramedTransform chain_true = sc.f_wh * sc.f_hp * sc.f_pi;

    for (const Vec3& landmark : landmarks_image) {
      // Place the pointer tip exactly on the landmark: orientation free,
      // translation solved from the chain identity.
      const Vec3 w_true = transform_point(chain_true, landmark);
      const Quat tip_rot = random_rotation(rng);
      const Vec3 tip_in_h = transform_point(invert(sc.f_wh), w_true);
      const FramedTransform f_htip{
          FrameId::Hmd, FrameId::Tip,
          {tip_rot, tip_in_h - tip_rot * sc.tip_offset}};

      // The plan side uses the SLAM state captured at anchor time, the tool
      // side the state at touch time; independent draws model the drift.
      const FramedTransform f_wh_tool =
          perturb(sc.f_wh, budget.slam_trans_mm, budget.slam_rot_deg, rng);
      const FramedTransform f_wh_plan =
          perturb(sc.f_wh, budget.slam_trans_mm, budget.slam_rot_deg, rng);
      const FramedTransform f_htip_hat =
          perturb(f_htip, budget.track_trans_mm, budget.track_rot_deg, rng);
      const FramedTransform f_hp_hat =
          perturb(sc.f_hp, budget.track_trans_mm, budget.track_rot_deg, rng);
      const FramedTransform f_pi_hat =
          perturb(sc.f_pi, budget.ctreg_trans_mm, budget.ctreg_rot_deg, rng);
      const Vec3 tip_offset_hat = perturb_point(sc.tip_offset, budget.pivot_mm, rng);
      const Vec3 landmark_hat = perturb_point(landmark, budget.annotation_mm, rng);

      const Vec3 tool_side = transform_point(f_wh_tool * f_htip_hat, tip_offset_hat);
      const Vec3 plan_side =
          transform_point(f_wh_plan * f_hp_hat * f_pi_hat, landmark_hat);
      summary.samples_mm.push_back((tool_side - plan_side).norm());
    }
  }

  const double n = static_cast<double>(summary.samples_mm.size());
  double sum = 0.0;
  for (double s : summary.samples_mm) sum += s;
  summary.mean_mm = sum / n;
  if (summary.samples_mm.size() > 1) {
    double ss = 0.0;
    for (double s : summary.samples_mm) {
      ss += (s - summary.mean_mm) * (s - summary.mean_mm);
    }
    summary.std_mm = std::sqrt(ss / (n - 1.0));
  }
  return summary;
}

PhantomSpec generate_phantom(std::uint64_t seed) {
  PhantomSpec spec;
  spec.seed = seed;
  Rng rng = make_trial_rng(seed, kStreamPhantom, 0);
  std::uniform_real_distribution<double> jitter(-5.0, 5.0);
  std::uniform_real_distribution<double> tilt(0.0, 15.0);
  std::uniform_real_distribution<double> azimuth(0.0, 2.0 * kPi);
  int idx = 0;
  for (int ix = -1; ix <= 1; ++ix) {
    for (int iy = -1; iy <= 1; ++iy) {
      const double jx = jitter(rng);
      const double jy = jitter(rng);
      const double theta = tilt(rng) * kDeg2Rad;
      const double phi = azimuth(rng);
      Corridor c;
      c.entry = Vec3(40.0 * ix + jx, 40.0 * iy + jy, 0.0);
      const Vec3 dir(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                     std::cos(theta));
      c.exit = c.entry + 100.0 * dir;
      spec.corridors[idx++] = c;
    }
  }
  return spec;
}

std::string_view mount_mode_name(MountMode mode) {
  switch (mode) {
    case MountMode::NonTracked: return "non-tracked";
    case MountMode::DrillMounted: return "drill";
    case MountMode::Cannula: return "cannula";
  }
  return "?";
}

std::optional<MountMode> mount_mode_from_name(std::string_view name) {
  if (name == "non-tracked") return MountMode::NonTracked;
  if (name == "drill") return MountMode::DrillMounted;
  if (name == "cannula") return MountMode::Cannula;
  return std::nullopt;
}

double stiffness_for_mode(const BendingModel& bending, MountMode mode) {
  return mode == MountMode::Cannula ? bending.cannula_stiffness
                                    : bending.wire_stiffness;
}

namespace {

PlacementError run_insertion_trial(const PhantomSpec& phantom, MountMode mode,
                                   bool use_surface_marker, const NoiseBudget& budget,
                                   const OperatorModel& op, const BendingModel& bending,
                                   const DepthSensorModel& depth, Rng& rng,
                                   std::size_t trial) {
  const Corridor& corridor = phantom.corridors[trial % phantom.corridors.size()];
  const TrajectoryPlan plan{corridor.entry, corridor.exit};

  // True chain and the estimated chain the guidance actually displays. The
  // displayed corridor is anchored once per trial; SLAM drift, patient
  // tracking, CT registration, and annotation noise are baked into it.
  const FramedTransform f_wh{FrameId::World, FrameId::Hmd, random_transform(rng)};
  const FramedTransform f_hp{FrameId::Hmd, FrameId::Patient, random_transform(rng)};
  const FramedTransform f_pi{FrameId::Patient, FrameId::Image, random_transform(rng)};
  const FramedTransform f_wh0 = perturb(f_wh, budget.slam_trans_mm, budget.slam_rot_deg, rng);
  const FramedTransform f_hp0 = perturb(f_hp, budget.track_trans_mm, budget.track_rot_deg, rng);
  const FramedTransform f_pi0 = perturb(f_pi, budget.ctreg_trans_mm, budget.ctreg_rot_deg, rng);
  const TrajectoryPlan plan_annotated{
      perturb_point(plan.entry, budget.annotation_mm, rng),
      perturb_point(plan.exit, budget.annotation_mm, rng)};

  const WorldTrajectory traj_true = world_trajectory(f_wh, f_hp, f_pi, plan);
  const WorldTrajectory traj_disp = world_trajectory(f_wh0, f_hp0, f_pi0, plan_annotated);
  const Vec3 axis_true = traj_true.axis.direction;    // out of the body
  const Vec3 axis_disp = traj_disp.axis.direction;
  const Vec3 insert_disp = -axis_disp;                // drilling direction

  // Entry constraint from the depth-sensor surface marker: an incision at
  // the marker pins the wire laterally; only the direction stays adjustable.
  // ToF range error displaces each cloud point along the scan ray; the
  // surgeon later lines the hologram up with the real skin along a different
  // view ray, so depth error turns into lateral incision error.
  std::optional<Vec3> incision;
  if (use_surface_marker) {
    const FramedTransform chain_true = f_wh * f_hp * f_pi;
    const Vec3 skin_normal_w =
        transform_direction(chain_true, Vec3(0.0, 0.0, -1.0));
    const Vec3 skin_origin_w = transform_point(
        chain_true, Vec3(corridor.entry.x(), corridor.entry.y(),
                         -phantom.soft_tissue_depth_mm));

    // Oblique sensor and cut-time view directions, independent azimuths.
    std::uniform_real_distribution<double> view_tilt(20.0 * kDeg2Rad, 50.0 * kDeg2Rad);
    auto oblique_dir = [&](double tilt) {
      const Vec3 lateral = in_plane_dir(rng, skin_normal_w);
      return (std::cos(tilt) * skin_normal_w + std::sin(tilt) * lateral).normalized();
    };
    const Vec3 scan_ray = oblique_dir(view_tilt(rng));
    const Vec3 cut_view = oblique_dir(view_tilt(rng));

    PointCloud cloud;
    cloud.points.reserve(1200);
    std::uniform_real_distribution<double> patch(-60.0, 60.0);
    for (int i = 0; i < 1200; ++i) {
      const double px = corridor.entry.x() + patch(rng);
      const double py = corridor.entry.y() + patch(rng);
      const Vec3 skin_image(px, py, -phantom.soft_tissue_depth_mm);
      const Vec3 range_noise = depth.point_noise_std_mm * gauss(rng) * scan_ray;
      cloud.points.push_back(transform_point(chain_true, skin_image) + range_noise);
    }
    const SurfaceMarker marker = surface_marker(cloud, traj_disp.axis, 500);
    const Vec3 displayed = marker.position + depth.marker_bias_mm * marker.normal;
    // Project the hologram onto the real skin plane along the cut-time view.
    const double denom = cut_view.dot(skin_normal_w);
    const double t = (skin_origin_w - displayed).dot(skin_normal_w) / denom;
    incision = displayed + t * cut_view;
  }

  // Operator alignment. Tracked modes iterate against the error indicator;
  // the non-tracked mode is a single freehand aim at the displayed line.
  Line3 tool;
  Vec3 drill_slip = Vec3::Zero();  // entry-plane bend accumulated in drill mode
  Vec3 drill_bend = Vec3::Zero();  // end-plane bend accumulated in drill mode
  const double stiffness = stiffness_for_mode(bending, mode);

  if (mode == MountMode::NonTracked) {
    const double scale = op.freehand_scale;
    const Vec3 entry_pt =
        incision ? *incision
                 : traj_disp.entry_w + in_plane_gauss(rng, axis_disp,
                                                      scale * op.aim_trans_std_mm);
    const double tilt_deg = std::abs(gauss(rng)) * scale * op.aim_rot_std_deg;
    tool = make_line(entry_pt, tilt_direction(rng, insert_disp, tilt_deg));
  } else {
    const Vec3 entry0 =
        incision ? *incision
                 : traj_disp.entry_w +
                       op.initial_offset_mm * in_plane_dir(rng, axis_disp);
    tool = make_line(entry0, tilt_direction(rng, insert_disp, op.initial_tilt_deg));

    for (int it = 0; it < op.iterations; ++it) {
      // What the HMD shows for the tracked body this frame.
      const Line3 shown =
          jitter_line(rng, tool, budget.track_trans_mm, budget.track_rot_deg);
      const IndicatorGeometry ind =
          error_indicator(shown, traj_disp.entry_w, traj_disp.exit_w);
      const double visible = incision
                                 ? ind.end_radius_mm
                                 : std::max(ind.entry_radius_mm, ind.end_radius_mm);
      if (visible <= op.convergence_mm) break;

      const Vec3 corr_entry = ind.entry_hatch
                                  ? (ind.entry_radius_mm * *ind.entry_hatch).eval()
                                  : Vec3::Zero();
      const Vec3 corr_end = ind.end_hatch
                                ? (ind.end_radius_mm * *ind.end_hatch).eval()
                                : Vec3::Zero();

      Line3 adjusted;
      if (incision) {
        // Pivot about the incision; only the deep end is corrected.
        const Vec3 cur_end = intersect_plane(tool, traj_disp.exit_w, axis_disp);
        const Vec3 new_end = cur_end + corr_end +
                             in_plane_gauss(rng, axis_disp, op.aim_trans_std_mm);
        Vec3 dir = (new_end - *incision).normalized();
        dir = tilt_direction(rng, dir, std::abs(gauss(rng)) * op.aim_rot_std_deg);
        adjusted = make_line(*incision, dir);
      } else {
        const Vec3 cur_entry = intersect_plane(tool, traj_disp.entry_w, axis_disp);
        const Vec3 cur_end = intersect_plane(tool, traj_disp.exit_w, axis_disp);
        const Vec3 new_entry = cur_entry + corr_entry +
                               in_plane_gauss(rng, axis_disp, op.aim_trans_std_mm);
        const Vec3 new_end = cur_end + corr_end +
                             in_plane_gauss(rng, axis_disp, op.aim_trans_std_mm);
        Vec3 dir = (new_end - new_entry).normalized();
        dir = tilt_direction(rng, dir, std::abs(gauss(rng)) * op.aim_rot_std_deg);
        adjusted = make_line(new_entry, dir);
      }

      // Re-aiming through engaged tissue flexes the wire relative to the
      // drill-mounted marker; the display keeps showing the straight drill
      // axis, so these increments are invisible to the operator.
      const double corr_angle_deg =
          angle_between_deg(tool.direction, adjusted.direction);
      const double bend_mag =
          bending.deflect_gain_mm_per_deg * corr_angle_deg * stiffness;
      const Vec3 slip_inc = bend_mag * in_plane_dir(rng, axis_true);
      const Vec3 bend_inc = bend_mag * in_plane_dir(rng, axis_true);
      if (mode == MountMode::DrillMounted) {
        drill_slip += slip_inc;
        drill_bend += bend_inc;
      }
      tool = adjusted;
    }
  }

  // Bending between the guided (tracked) axis and the wire actually drilled:
  // soft-tissue deflection grows with the off-axis entry angle and shows up
  // at depth; skating displaces the whole wire at bone contact.
  const Vec3 base_entry = intersect_plane(tool, traj_true.entry_w, axis_true);
  const Vec3 base_end = intersect_plane(tool, traj_true.exit_w, axis_true);
  const double off_axis_deg = axis_deviation_deg(tool.direction, axis_true);
  const Vec3 deflect = (bending.deflect_gain_mm_per_deg * off_axis_deg * stiffness) *
                       in_plane_dir(rng, axis_true);
  const Vec3 skate = in_plane_gauss(rng, axis_true, bending.skate_std_mm * stiffness);

  const Vec3 wire_entry = base_entry + skate + drill_slip;
  const Vec3 wire_end = base_end + skate + deflect + drill_bend;
  const Line3 wire = make_line(wire_entry, wire_end - wire_entry);

  return placement_error(traj_true.entry_w, traj_true.exit_w, wire);
}

}  // namespace

std::vector<PlacementError> simulate_insertion(
    const PhantomSpec& phantom, MountMode mode, bool use_surface_marker,
    const NoiseBudget& budget, const OperatorModel& op, const BendingModel& bending,
    const DepthSensorModel& depth, int trials, std::uint64_t seed, int threads) {
  if (trials < 1) throw InputError("simulate_insertion: trials must be >= 1");
  if (op.iterations < 1) throw InputError("simulate_insertion: iterations must be >= 1");

  const std::uint64_t stream =
      kStreamStudyBase + static_cast<std::uint64_t>(mode) * 2 +
      (use_surface_marker ? 1 : 0);

  std::vector<PlacementError> results(static_cast<std::size_t>(trials));
  auto run_range = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      Rng rng = make_trial_rng(seed, stream, static_cast<std::uint64_t>(i));
      results[static_cast<std::size_t>(i)] =
          run_insertion_trial(phantom, mode, use_surface_marker, budget, op, bending,
                              depth, rng, static_cast<std::size_t>(i));
    }
  };

  const int n_threads = std::max(1, threads);
  if (n_threads == 1 || trials < 2 * n_threads) {
    run_range(0, trials);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (trials + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      const int begin = t * chunk;
      const int end = std::min(trials, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(run_range, begin, end);
    }
    for (std::thread& t : pool) t.join();
  }
  return results;
}

}  // namespace kwnav
