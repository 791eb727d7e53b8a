#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "kwnav/geometry.hpp"
#include "kwnav/metrics.hpp"

namespace kwnav {

using Rng = std::mt19937_64;

/// Independent RNG stream for one trial; identical for serial and parallel
/// execution.
Rng make_trial_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t trial);

/// Uniform random rotation.
Quat random_rotation(Rng& rng);

/// Random rigid transform with translation components uniform in
/// [-max_trans_mm, max_trans_mm].
RigidTransform random_transform(Rng& rng, double max_trans_mm = 300.0);

// Noise magnitude convention, used by every field below and by perturb():
// translational magnitudes are the rms of the 3D offset norm (per-axis
// standard deviation = value / sqrt(3)); rotational magnitudes are the rms
// of the rotation angle about a uniformly random axis. Under this convention
// pivot poses with translation noise sigma yield a calibration rms of about
// sigma, matching how the hardware vendors report 3D rms figures.

/// Error budget for the transformation chain; one entry per chain component.
struct NoiseBudget {
  double slam_trans_mm = 0.0;   // F^W_H, redrawn per evaluation (drift)
  double slam_rot_deg = 0.0;
  double track_trans_mm = 0.0;  // per tracked body: F^H_tip / F^H_C / F^H_P
  double track_rot_deg = 0.0;
  double pivot_mm = 0.0;        // tip offset p_tip
  double ctreg_trans_mm = 0.0;  // F^P_I
  double ctreg_rot_deg = 0.0;
  double annotation_mm = 0.0;   // annotated points p_I
};

/// Applies Gaussian noise to a transform: translation gets an isotropic
/// offset, rotation is right-composed with a random-axis rotation of
/// Gaussian angle, so the two channels stay decoupled. Frame tags are
/// preserved; zero stds return the input bit-exactly.
FramedTransform perturb(const FramedTransform& xf, double trans_std_mm,
                        double rot_std_deg, Rng& rng);
RigidTransform perturb(const RigidTransform& xf, double trans_std_mm,
                       double rot_std_deg, Rng& rng);

Vec3 perturb_point(const Vec3& p, double std_mm, Rng& rng);

/// Fixed chain geometry for the touch-point study; when absent, a fresh
/// scene is drawn per trial.
struct E2eScene {
  FramedTransform f_wh;  // W -> H
  FramedTransform f_hp;  // H -> P
  FramedTransform f_pi;  // P -> I
  Vec3 tip_offset{0.0, 0.0, 150.0};
};

E2eScene random_scene(Rng& rng);

struct E2eSummary {
  double mean_mm = 0.0;
  double std_mm = 0.0;
  std::vector<double> samples_mm;  // trial-major, landmark-minor
};

/// Touch-point simulation: per trial the pointer tip is placed exactly on
/// each landmark, every chain component is then perturbed per the budget,
/// and both sides of the tool/plan chain identity are evaluated. The HMD
/// pose F^W_H is perturbed independently per side: the plan side uses the
/// SLAM state captured when the plan was anchored, the tool side the state
/// at touch time, so the slam budget models drift between the two.
E2eSummary simulate_e2e(const NoiseBudget& budget, std::span<const Vec3> landmarks_image,
                        int trials, std::uint64_t seed,
                        const std::optional<E2eScene>& scene = std::nullopt);

/// One drilling corridor in image coordinates: a 100 mm axis segment from
/// the bone-surface entry to the exit.
struct Corridor {
  Vec3 entry{0.0, 0.0, 0.0};
  Vec3 exit{0.0, 0.0, 100.0};
};

/// Nine-corridor phantom: 3x3 grid of 100 mm corridors tilted uniformly
/// within [0, 15) degrees of vertical, covered by 20 mm of soft tissue.
struct PhantomSpec {
  std::array<Corridor, 9> corridors;
  double soft_tissue_depth_mm = 20.0;
  std::uint64_t seed = 0;
};

PhantomSpec generate_phantom(std::uint64_t seed);

enum class MountMode { NonTracked, DrillMounted, Cannula };

std::string_view mount_mode_name(MountMode mode);
std::optional<MountMode> mount_mode_from_name(std::string_view name);

/// Stand-in for the human in the loop. Tracked modes iterate corrections
/// against the error indicator down to the aiming floor; the non-tracked
/// mode aims once at the displayed line with the floor scaled by
/// `freehand_scale`.
struct OperatorModel {
  double aim_trans_std_mm = 1.5;  // execution noise per correction, entry plane
  double aim_rot_std_deg = 0.8;   // execution noise per correction, axis
  int iterations = 8;
  double convergence_mm = 0.5;
  double freehand_scale = 3.0;    // non-tracked residual floor multiplier
  double initial_offset_mm = 10.0;  // rough first placement before corrections
  double initial_tilt_deg = 4.0;
};

/// Wire bending between the tracked body and the wire actually drilled.
/// `cannula_stiffness` scales the effects in Cannula mode (0 = fully rigid
/// sleeve), `wire_stiffness` in the Drill/NonTracked modes (1 = bare wire);
/// setting both to 0 ablates bending entirely.
struct BendingModel {
  double deflect_gain_mm_per_deg = 1.0;  // endpoint offset per degree off-axis
  double skate_std_mm = 4.0;             // tip slip on bone contact
  double cannula_stiffness = 0.05;
  double wire_stiffness = 1.0;
};

double stiffness_for_mode(const BendingModel& bending, MountMode mode);

/// HMD depth-sensor quality for the synthesized skin cloud. Range noise acts
/// along the oblique scan ray and re-projects into lateral incision error at
/// cut time.
struct DepthSensorModel {
  double point_noise_std_mm = 5.0;
  double marker_bias_mm = 2.5;
};

/// Simulated insertion study. Per trial: pick a corridor; derive the entry
/// from a noisy skin-cloud surface marker when enabled; run the operator
/// alignment loop against the displayed (chain-perturbed) trajectory; apply
/// bending between the guided axis and the drilled wire (soft-tissue
/// deflection proportional to the off-axis entry angle, tip skating at bone
/// contact, and -- in drill-mounted mode only -- bend accumulated by
/// corrections made against the misleading drill-marker feedback); score the
/// wire against the true corridor. Deterministic for a fixed seed; trial i
/// owns the RNG stream (seed, condition, i).
std::vector<PlacementError> simulate_insertion(
    const PhantomSpec& phantom, MountMode mode, bool use_surface_marker,
    const NoiseBudget& budget, const OperatorModel& op, const BendingModel& bending,
    const DepthSensorModel& depth, int trials, std::uint64_t seed, int threads = 1);

}  // namespace kwnav
