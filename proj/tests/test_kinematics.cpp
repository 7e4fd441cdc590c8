#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <linkcal/linkcal.hpp>

#include "helpers.hpp"

using namespace linkcal;

namespace {

/// Independent homogeneous-matrix composition of the workpiece branch.
Vec3 ball_point_matrix_oracle(const MachineTopology& topo, const Pose& pose) {
  auto translation = [](const Vec3& t) {
    Mat4 m = Mat4::Identity();
    m.block<3, 1>(0, 3) = t;
    return m;
  };
  auto rotation = [](const Vec3& axis, double angle_rad) {
    Mat4 m = Mat4::Identity();
    m.block<3, 3>(0, 0) = Eigen::AngleAxisd(angle_rad, axis).toRotationMatrix();
    return m;
  };
  const Mat4 chain = translation(pose.y_mm * topo.y_dir()) *
                     translation(topo.a_anchor_carriage()) *
                     rotation(topo.a_dir_carriage(), deg_to_rad(pose.a_deg)) *
                     translation(topo.c_anchor_platform()) *
                     rotation(topo.c_dir_platform(), deg_to_rad(pose.c_deg)) *
                     translation(topo.ball_in_table());
  const Eigen::Vector4d origin(0, 0, 0, 1);
  return (chain * origin).head<3>();
}

}  // namespace

TEST_CASE("topology validation enforces chain order, unit axes and strokes") {
  auto topo = MachineTopology::trunnion_45_default();
  CHECK_NOTHROW(topo.validate());

  auto bad_order = topo;
  std::swap(bad_order.chain[1], bad_order.chain[2]);
  CHECK_THROWS_AS(bad_order.validate(), ConfigError);

  auto bad_dir = topo;
  bad_dir.chain[MachineTopology::iC].direction = Vec3(0, 0, 1.001);
  CHECK_THROWS_AS(bad_dir.validate(), ConfigError);

  auto bad_stroke = topo;
  bad_stroke.chain[MachineTopology::iX].stroke_max = 400.0;
  CHECK_THROWS_AS(bad_stroke.validate(), ConfigError);

  auto bad_tilt = topo;
  bad_tilt.chain[MachineTopology::iA].direction = Vec3(0, 0, 1);
  CHECK_THROWS_AS(bad_tilt.validate(), ConfigError);
}

TEST_CASE("forward_nominal: coincidence at the home pose") {
  const auto topo = MachineTopology::trunnion_45_default();
  const Pose home = inverse_kinematics_coincidence(topo, 0.0, 0.0);
  const auto kin = forward_nominal(topo, home);
  CHECK((kin.tool_point - kin.ball_point).norm() < 1e-12);
  CHECK(kin.frames.size() == 8);
}

TEST_CASE("forward_nominal: +1 mm z offset moves the tool by (0,0,1)") {
  const auto topo = MachineTopology::trunnion_45_default();
  Pose pose = inverse_kinematics_coincidence(topo, 0.0, 0.0);
  pose.z_mm += 1.0;
  const auto kin = forward_nominal(topo, pose);
  CHECK((kin.tool_point - kin.ball_point - Vec3(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("forward_nominal: matches a homogeneous-matrix oracle at a=90") {
  const auto topo = MachineTopology::trunnion_45_default();
  const Pose pose = inverse_kinematics_coincidence(topo, 90.0, 0.0);
  const auto kin = forward_nominal(topo, pose);
  CHECK((kin.ball_point - ball_point_matrix_oracle(topo, pose)).norm() < 1e-10);

  RngStream rng(11);
  for (int i = 0; i < 20; ++i) {
    const Pose p = inverse_kinematics_coincidence(topo, rng.uniform(0, 180), rng.uniform(0, 1250));
    const auto k = forward_nominal(topo, p);
    CHECK((k.ball_point - ball_point_matrix_oracle(topo, p)).norm() < 1e-10);
  }
}

TEST_CASE("forward_nominal: out-of-stroke pose names the axis") {
  const auto topo = MachineTopology::trunnion_45_default();
  Pose pose = inverse_kinematics_coincidence(topo, 0.0, 0.0);
  pose.x_mm = 1000.0;
  CHECK_THROWS_WITH_AS(forward_nominal(topo, pose), doctest::Contains("axis X"), DataError);
}

TEST_CASE("jacobian: tool setup columns are identity directions") {
  const auto topo = MachineTopology::trunnion_45_default();
  RngStream rng(4);
  for (int i = 0; i < 10; ++i) {
    const Pose p = inverse_kinematics_coincidence(topo, rng.uniform(0, 180), rng.uniform(0, 1250));
    const auto blk = build_jacobian_row(topo, p);
    CHECK((Vec3(blk.J.col(kXT)) - Vec3::UnitX()).norm() == 0.0);
    CHECK((Vec3(blk.J.col(kYT)) - Vec3::UnitY()).norm() == 0.0);
    CHECK((Vec3(blk.J.col(kZT)) - Vec3::UnitZ()).norm() == 0.0);
  }
}

TEST_CASE("jacobian: translation columns are direction cosines") {
  const auto topo = MachineTopology::trunnion_45_default();
  RngStream rng(6);
  for (int i = 0; i < 50; ++i) {
    const Pose p = inverse_kinematics_coincidence(topo, rng.uniform(0, 180), rng.uniform(0, 1250));
    const auto blk = build_jacobian_row(topo, p);
    for (int col = kYC; col <= kZW; ++col)
      CHECK(Vec3(blk.J.col(col)).cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("jacobian: zero lever arm kills the A-tilt columns") {
  // ball placed exactly on the A anchor at c = 0
  auto topo = MachineTopology::trunnion_45_default();
  topo.chain[MachineTopology::iW].location = -topo.c_anchor_platform();
  const Pose pose = inverse_kinematics_coincidence(topo, 37.0, 0.0);
  const auto blk = build_jacobian_row(topo, pose);
  CHECK(Vec3(blk.J.col(kBetaA)).norm() < 1e-12);
  CHECK(Vec3(blk.J.col(kGammaA)).norm() < 1e-12);
}

TEST_CASE("jacobian: agrees with central finite differences of the perturbed forward") {
  const auto topo = MachineTopology::trunnion_45_default();
  RngStream rng(20260808);
  const double h = 1e-7;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Pose pose =
        inverse_kinematics_coincidence(topo, rng.uniform(0, 180), rng.uniform(0, 1250));
    const auto blk = build_jacobian_row(topo, pose);
    for (int j = 0; j < kParamCount; ++j) {
      ErrorParameterVector plus, minus;
      plus[j] = h;
      minus[j] = -h;
      const Vec3 fd = (volumetric_error_perturbed(topo, pose, plus) -
                       volumetric_error_perturbed(topo, pose, minus)) /
                      (2.0 * h);
      worst = std::max(worst, (fd - Vec3(blk.J.col(j))).cwiseAbs().maxCoeff());
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("assemble: shape, stacking order and pose-count guard") {
  const auto topo = MachineTopology::trunnion_45_default();
  const auto poses5 = linkcal::testing::short_identification_trajectory(topo, 5);
  const auto jid = assemble_identification_jacobian(topo, poses5);
  CHECK(jid.J.rows() == 15);
  CHECK(jid.J.cols() == 14);

  for (int k = 0; k < 5; ++k) {
    const auto blk = build_jacobian_row(topo, poses5[static_cast<std::size_t>(k)]);
    CHECK((jid.J.middleRows(3 * k, 3) - blk.J).cwiseAbs().maxCoeff() == 0.0);
  }

  const std::vector<Pose> too_few(poses5.begin(), poses5.begin() + 4);
  CHECK_THROWS_AS(assemble_identification_jacobian(topo, too_few), DataError);
}

TEST_CASE("assemble: 807-pose trajectory gives a 2421x14 system") {
  const auto topo = MachineTopology::trunnion_45_default();
  const auto poses =
      generate_identification_trajectory(topo, TrajectorySpec::identification_default());
  const auto jid = assemble_identification_jacobian(topo, poses);
  CHECK(jid.J.rows() == 2421);
  CHECK(jid.J.cols() == 14);
  CHECK(jid.pose_count() == 807);
}

TEST_CASE("condition_number: identity, known spectrum, singular detection") {
  CHECK(condition_number(Eigen::MatrixXd::Identity(14, 14)) == doctest::Approx(1.0));

  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(15, 14);
  m(0, 0) = 10.0;
  CHECK(condition_number(m) == doctest::Approx(10.0));

  Eigen::MatrixXd singular = Eigen::MatrixXd::Identity(15, 14);
  singular.col(13) = singular.col(12);
  CHECK_THROWS_WITH_AS(condition_number(singular), doctest::Contains("rank"), DataError);
}

TEST_CASE("condition_number: default trajectory regression baseline") {
  const auto topo = MachineTopology::trunnion_45_default();
  const auto poses =
      generate_identification_trajectory(topo, TrajectorySpec::identification_default());
  const auto jid = assemble_identification_jacobian(topo, poses);
  // frozen from the shipped geometry; reporting units
  CHECK(condition_number_report_units(jid) == doctest::Approx(59.7423244).epsilon(1e-3));
}

TEST_CASE("predict: zero parameters give zero errors") {
  const auto topo = MachineTopology::trunnion_45_default();
  const auto poses = linkcal::testing::short_identification_trajectory(topo, 20);
  const auto jid = assemble_identification_jacobian(topo, poses);
  const auto errors = predict_volumetric_errors(jid, ErrorParameterVector{});
  for (const auto& e : errors) CHECK(e.delta_mm.norm() == 0.0);
}

TEST_CASE("predict: a pure ball z offset transports with constant magnitude") {
  const auto topo = MachineTopology::trunnion_45_default();
  const auto poses = linkcal::testing::short_identification_trajectory(topo, 40);
  const auto jid = assemble_identification_jacobian(topo, poses);
  ErrorParameterVector p;
  p[kZW] = 0.010;  // 10 um
  const auto errors = predict_volumetric_errors(jid, p);
  for (std::size_t k = 0; k < errors.size(); ++k) {
    CHECK(errors[k].delta_mm.norm() == doctest::Approx(0.010).epsilon(1e-12));
    const auto blk = build_jacobian_row(topo, poses[k]);
    CHECK((errors[k].delta_mm - 0.010 * Vec3(blk.J.col(kZW))).norm() < 1e-15);
    CHECK(errors[k].frame == Frame::machine);
  }
}

TEST_CASE("predict: reference parameters produce tens of um over the trajectory") {
  const auto topo = MachineTopology::trunnion_45_default();
  const auto poses =
      generate_identification_trajectory(topo, TrajectorySpec::identification_default());
  const auto jid = assemble_identification_jacobian(topo, poses);
  const auto errors = predict_volumetric_errors(jid, linkcal::testing::reference_parameters());
  double peak = 0.0;
  for (const auto& e : errors) peak = std::max(peak, e.delta_mm.cwiseAbs().maxCoeff());
  CHECK(peak * kUmPerMm > 10.0);
  CHECK(peak * kUmPerMm < 300.0);
}

TEST_CASE("property: prediction is linear in the parameters") {
  const auto topo = MachineTopology::trunnion_45_default();
  const auto poses = linkcal::testing::short_identification_trajectory(topo, 15);
  const auto jid = assemble_identification_jacobian(topo, poses);
  RngStream rng(99);
  for (int t = 0; t < 25; ++t) {
    ErrorParameterVector p1, p2, combo;
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    for (int i = 0; i < kParamCount; ++i) {
      p1[i] = rng.normal(0, 1e-4);
      p2[i] = rng.normal(0, 1e-4);
      combo[i] = a * p1[i] + b * p2[i];
    }
    const auto e1 = predict_volumetric_errors(jid, p1);
    const auto e2 = predict_volumetric_errors(jid, p2);
    const auto ec = predict_volumetric_errors(jid, combo);
    for (std::size_t k = 0; k < ec.size(); ++k) {
      const Vec3 expect = a * e1[k].delta_mm + b * e2[k].delta_mm;
      CHECK((ec[k].delta_mm - expect).norm() <= 1e-12 * std::max(1.0, expect.norm()));
    }
  }
}

TEST_CASE("property: permuting poses permutes the row blocks") {
  const auto topo = MachineTopology::trunnion_45_default();
  auto poses = linkcal::testing::short_identification_trajectory(topo, 12);
  const auto jid = assemble_identification_jacobian(topo, poses);

  std::vector<std::size_t> perm = {7, 2, 9, 0, 11, 4, 1, 8, 3, 10, 5, 6};
  std::vector<Pose> shuffled;
  for (std::size_t idx : perm) shuffled.push_back(poses[idx]);
  const auto jid_perm = assemble_identification_jacobian(topo, shuffled);

  for (std::size_t r = 0; r < perm.size(); ++r) {
    CHECK((jid_perm.J.middleRows(3 * static_cast<Eigen::Index>(r), 3) -
           jid.J.middleRows(3 * static_cast<Eigen::Index>(perm[r]), 3))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("property: A-tilt columns scale with the ball lever arm") {
  auto topo = MachineTopology::trunnion_45_default();
  const Pose pose = inverse_kinematics_coincidence(topo, 55.0, 0.0);
  const auto blk1 = build_jacobian_row(topo, pose);

  // double the ball offset from the A axis at c = 0
  auto topo2 = topo;
  topo2.chain[MachineTopology::iW].location =
      topo.c_anchor_platform() + 2.0 * topo.ball_in_table();
  const auto blk2 = build_jacobian_row(topo2, pose);

  CHECK(Vec3(blk2.J.col(kBetaA)).norm() ==
        doctest::Approx(2.0 * Vec3(blk1.J.col(kBetaA)).norm()).epsilon(1e-12));
  CHECK(Vec3(blk2.J.col(kGammaA)).norm() ==
        doctest::Approx(2.0 * Vec3(blk1.J.col(kGammaA)).norm()).epsilon(1e-12));
}

TEST_CASE("report units round trip") {
  const auto p = linkcal::testing::reference_parameters();
  const auto back = ErrorParameterVector::from_report_units(p.to_report_units());
  for (int i = 0; i < kParamCount; ++i)
    CHECK(back[i] == doctest::Approx(p[i]).epsilon(1e-14));
  CHECK(p.to_report_units()[kAlphaZ] == doctest::Approx(138.3));
  CHECK(p.to_report_units()[kZW] == doctest::Approx(18.8));
}
