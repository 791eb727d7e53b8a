#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "kwnav/registration.hpp"
#include "support/generators.hpp"
#include "support/stats.hpp"

using namespace kwnav;

namespace {

// The seven-marker CT-gantry layout used across these tests.
std::vector<Vec3> gantry_points() {
  return {Vec3(0, 0, 0),     Vec3(120, 0, 0),   Vec3(0, 90, 0),  Vec3(150, 110, 20),
          Vec3(60, 170, 45), Vec3(200, 60, 80), Vec3(90, 40, 130)};
}

MarkerLayout five_marker_layout() {
  MarkerLayout layout;
  layout.name = "tool-array";
  layout.frame = FrameId::Cannula;
  layout.labels = {"m1", "m2", "m3", "m4", "m5"};
  layout.points = {Vec3(0, 0, 0), Vec3(60, 0, 0), Vec3(0, 45, 0), Vec3(10, 5, 50),
                   Vec3(90, 75, 35)};
  return layout;
}

}  // namespace

TEST_SUITE_BEGIN("registration");

TEST_CASE("identical point sets register to the identity") {
  const std::vector<Vec3> pts = gantry_points();
  const RegistrationResult result =
      paired_point_register(pts, pts, FrameId::Machine, FrameId::Tracker);
  CHECK(result.fre_rms_mm < 1e-12);
  CHECK(result.xf.from == FrameId::Tracker);
  CHECK(result.xf.to == FrameId::Machine);
  CHECK(result.xf.xf.translation.norm() < 1e-12);
  CHECK(result.xf.xf.rotation.angularDistance(Quat::Identity()) < 1e-12);
}

TEST_CASE("seven-marker recovery of a random rigid motion is exact") {
  std::mt19937_64 rng(211);
  const std::vector<Vec3> model = gantry_points();
  for (int i = 0; i < 200; ++i) {
    const RigidTransform truth = test::gen_rigid(rng);
    std::vector<Vec3> observed;
    for (const Vec3& p : model) observed.push_back(transform_point(truth, p));

    const RegistrationResult result =
        paired_point_register(model, observed, FrameId::Machine, FrameId::Tracker);
    CHECK((result.xf.xf.translation - truth.translation).norm() < 1e-9);
    CHECK(result.xf.xf.rotation.angularDistance(truth.rotation) < 1e-9);
    CHECK(result.fre_rms_mm < 1e-9);
  }
}

TEST_CASE("noisy FRE matches the dof-adjusted expectation") {
  std::mt19937_64 rng(223);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::vector<Vec3> model = gantry_points();
  const double sigma = 0.3;  // 3D rms
  const double per_axis = sigma / std::sqrt(3.0);
  const int reps = 400;

  std::vector<double> fre_values;
  fre_values.reserve(reps);
  for (int r = 0; r < reps; ++r) {
    const RigidTransform truth = test::gen_rigid(rng);
    std::vector<Vec3> observed;
    for (const Vec3& p : model) {
      observed.push_back(transform_point(truth, p) +
                         per_axis * Vec3(gauss(rng), gauss(rng), gauss(rng)));
    }
    fre_values.push_back(
        paired_point_register(model, observed, FrameId::Machine, FrameId::Tracker)
            .fre_rms_mm);
  }
  // E[FRE^2] = (1 - 2/N) * sigma^2 for small isotropic noise.
  const double expected = sigma * std::sqrt(1.0 - 2.0 / 7.0);
  CHECK(test::sample_rms(fre_values) == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("shape errors are rejected") {
  const std::vector<Vec3> model = gantry_points();
  std::vector<Vec3> short_set(model.begin(), model.begin() + 5);
  CHECK_THROWS_AS(
      paired_point_register(model, short_set, FrameId::Machine, FrameId::Tracker),
      InputError);

  std::vector<Vec3> pair(model.begin(), model.begin() + 2);
  CHECK_THROWS_AS(paired_point_register(pair, pair, FrameId::Machine, FrameId::Tracker),
                  InsufficientDataError);

  std::vector<Vec3> collinear{Vec3(0, 0, 0), Vec3(10, 0, 0), Vec3(20, 0, 0),
                              Vec3(30, 0, 0)};
  CHECK_THROWS_AS(
      paired_point_register(collinear, collinear, FrameId::Machine, FrameId::Tracker),
      DegenerateInputError);
}

TEST_CASE("registration is left-equivariant") {
  std::mt19937_64 rng(227);
  const std::vector<Vec3> model = gantry_points();
  const RigidTransform truth = test::gen_rigid(rng);
  std::vector<Vec3> observed;
  for (const Vec3& p : model) observed.push_back(transform_point(truth, p));

  const RigidTransform g = test::gen_rigid(rng);
  std::vector<Vec3> moved;
  for (const Vec3& p : observed) moved.push_back(transform_point(g, p));

  const RegistrationResult base =
      paired_point_register(model, observed, FrameId::Machine, FrameId::Tracker);
  const RegistrationResult shifted =
      paired_point_register(model, moved, FrameId::Machine, FrameId::Tracker);
  const RigidTransform expected = compose(g, base.xf.xf);
  CHECK((shifted.xf.xf.translation - expected.translation).norm() < 1e-9);
  CHECK(shifted.xf.xf.rotation.angularDistance(expected.rotation) < 1e-9);
}

TEST_CASE("FRE is invariant under joint rigid motion") {
  std::mt19937_64 rng(229);
  std::normal_distribution<double> gauss(0.0, 0.2);
  const std::vector<Vec3> model = gantry_points();
  std::vector<Vec3> observed;
  for (const Vec3& p : model) {
    observed.push_back(p + Vec3(gauss(rng), gauss(rng), gauss(rng)));
  }
  const double fre =
      paired_point_register(model, observed, FrameId::Machine, FrameId::Tracker)
          .fre_rms_mm;

  const RigidTransform g = test::gen_rigid(rng);
  std::vector<Vec3> model_moved, observed_moved;
  for (const Vec3& p : model) model_moved.push_back(transform_point(g, p));
  for (const Vec3& p : observed) observed_moved.push_back(transform_point(g, p));
  const double fre_moved = paired_point_register(model_moved, observed_moved,
                                                 FrameId::Machine, FrameId::Tracker)
                               .fre_rms_mm;
  CHECK(fre_moved == doctest::Approx(fre).epsilon(1e-9));
}

TEST_CASE("pose recovery from permuted unordered detections") {
  std::mt19937_64 rng(233);
  const MarkerLayout layout = five_marker_layout();
  for (int i = 0; i < 50; ++i) {
    const RigidTransform truth = test::gen_rigid(rng);
    std::vector<Vec3> detections;
    for (const Vec3& p : layout.points) detections.push_back(transform_point(truth, p));
    std::shuffle(detections.begin(), detections.end(), rng);

    const RegistrationResult result =
        pose_from_markers(layout, detections, FrameId::Hmd);
    CHECK(result.xf.from == FrameId::Hmd);
    CHECK(result.xf.to == FrameId::Cannula);
    CHECK((result.xf.xf.translation - truth.translation).norm() < 1e-9);
    CHECK(result.xf.xf.rotation.angularDistance(truth.rotation) < 1e-9);
  }
}

TEST_CASE("pose recovery survives one missing marker") {
  std::mt19937_64 rng(239);
  const MarkerLayout layout = five_marker_layout();
  const RigidTransform truth = test::gen_rigid(rng);
  std::vector<Vec3> detections;
  for (std::size_t i = 0; i < layout.points.size(); ++i) {
    if (i == 2) continue;  // drop one marker
    detections.push_back(transform_point(truth, layout.points[i]));
  }
  std::shuffle(detections.begin(), detections.end(), rng);

  const RegistrationResult result = pose_from_markers(layout, detections, FrameId::Hmd);
  CHECK((result.xf.xf.translation - truth.translation).norm() < 1e-9);
  CHECK(result.xf.xf.rotation.angularDistance(truth.rotation) < 1e-9);
}

TEST_CASE("too few detections signals tracking failure") {
  const MarkerLayout layout = five_marker_layout();
  std::vector<Vec3> two{layout.points[0], layout.points[1]};
  CHECK_THROWS_AS(pose_from_markers(layout, two, FrameId::Hmd), TrackingFailure);
}

TEST_CASE("detection order never changes the answer") {
  std::mt19937_64 rng(241);
  const MarkerLayout layout = five_marker_layout();
  const RigidTransform truth = test::gen_rigid(rng);
  std::vector<Vec3> detections;
  for (const Vec3& p : layout.points) detections.push_back(transform_point(truth, p));

  const RegistrationResult first = pose_from_markers(layout, detections, FrameId::Hmd);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(detections.begin(), detections.end(), rng);
    const RegistrationResult again =
        pose_from_markers(layout, detections, FrameId::Hmd);
    CHECK((again.xf.xf.translation - first.xf.xf.translation).norm() < 1e-12);
    CHECK(again.xf.xf.rotation.angularDistance(first.xf.xf.rotation) < 1e-12);
  }
}

TEST_CASE("mirror ghost detection is flagged as ambiguous") {
  MarkerLayout layout = five_marker_layout();
  layout.labels.pop_back();
  layout.points.pop_back();  // keep m1..m4; m4 = (10, 5, 50) off the m1-m3 plane
  validate_layout(layout);

  std::vector<Vec3> detections = layout.points;
  // The mirror of m4 through the z=0 plane of m1..m3 replicates all of its
  // pairwise distances, so two equally good assignments exist.
  detections.push_back(Vec3(10.0, 5.0, -50.0));
  CHECK_THROWS_AS(pose_from_markers(layout, detections, FrameId::Hmd), AmbiguityError);
}

TEST_CASE("layout validation enforces the invariants") {
  MarkerLayout collinear;
  collinear.name = "bad";
  collinear.labels = {"a", "b", "c"};
  collinear.points = {Vec3(0, 0, 0), Vec3(10, 0, 0), Vec3(20, 0, 0)};
  CHECK_THROWS_AS(validate_layout(collinear), DegenerateInputError);

  MarkerLayout equidistant;
  equidistant.name = "bad2";
  equidistant.labels = {"a", "b", "c"};
  // Equilateral triangle: all pairwise distances identical.
  equidistant.points = {Vec3(0, 0, 0), Vec3(50, 0, 0), Vec3(25, 43.3012701892, 0)};
  CHECK_THROWS_AS(validate_layout(equidistant), DegenerateInputError);
}

TEST_CASE("ct_register composes the chain with frame checks") {
  const FramedTransform tp = FramedTransform::identity(FrameId::Tracker);
  FramedTransform tp2 = tp;
  tp2.to = FrameId::Patient;
  FramedTransform tm = FramedTransform::identity(FrameId::Tracker);
  tm.to = FrameId::Machine;
  FramedTransform mi = FramedTransform::identity(FrameId::Machine);
  mi.to = FrameId::Image;

  const FramedTransform id_result = ct_register(tp2, tm, mi);
  CHECK(id_result.from == FrameId::Patient);
  CHECK(id_result.to == FrameId::Image);
  CHECK(id_result.xf.translation.norm() < 1e-15);

  std::mt19937_64 rng(251);
  const FramedTransform f_tp = test::gen_framed(rng, FrameId::Tracker, FrameId::Patient);
  const FramedTransform f_tm = test::gen_framed(rng, FrameId::Tracker, FrameId::Machine);
  const FramedTransform f_mi = test::gen_framed(rng, FrameId::Machine, FrameId::Image);
  const FramedTransform chain = ct_register(f_tp, f_tm, f_mi);
  const Eigen::Matrix4d oracle = test::gen_matrix(f_tp.xf).inverse() *
                                 test::gen_matrix(f_tm.xf) * test::gen_matrix(f_mi.xf);
  const Vec3 p = test::gen_vec(rng);
  CHECK((transform_point(chain, p) - test::apply_matrix(oracle, p)).norm() < 1e-9);

  // F^T_M handed in as M->T is a frame error.
  CHECK_THROWS_AS(ct_register(f_tp, invert(f_tm), f_mi), FrameMismatchError);
}

TEST_SUITE_END();
