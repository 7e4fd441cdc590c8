#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <linkcal/linkcal.hpp>

#include "helpers.hpp"

using namespace linkcal;

namespace {

ErrorVectorSet make_set(const Eigen::VectorXd& chi) {
  ErrorVectorSet set;
  set.chi_mm = chi;
  for (int k = 0; k < chi.size() / 3; ++k) set.pose_indices.push_back(k + 1);
  return set;
}

}  // namespace

TEST_CASE("identify: noiseless round trip recovers the planted parameters") {
  const auto topo = MachineTopology::trunnion_45_default();
  const auto poses = linkcal::testing::short_identification_trajectory(topo, 60);
  const auto jid = assemble_identification_jacobian(topo, poses);
  const auto p_true = linkcal::testing::reference_parameters();

  const auto res = identify(jid, make_set(jid.J * p_true.v));
  for (int i = 0; i < kParamCount; ++i)
    CHECK(std::abs(res.parameters[i] - p_true[i]) <= 1e-9 * std::abs(p_true[i]));
  CHECK(res.rms_um.maxCoeff() < 1e-9);
  CHECK(res.condition_number > 1.0);
}

TEST_CASE("identify: zero measurements give zero parameters") {
  const auto topo = MachineTopology::trunnion_45_default();
  const auto poses = linkcal::testing::short_identification_trajectory(topo, 20);
  const auto jid = assemble_identification_jacobian(topo, poses);
  const auto res = identify(jid, make_set(Eigen::VectorXd::Zero(jid.J.rows())));
  CHECK(res.parameters.v.norm() == 0.0);
  CHECK(res.rms_um.norm() == 0.0);
}

TEST_CASE("identify: range-orthogonal noise lands entirely in the residual") {
  const auto topo = MachineTopology::trunnion_45_default();
  const auto poses = linkcal::testing::short_identification_trajectory(topo, 30);
  const auto jid = assemble_identification_jacobian(topo, poses);
  const auto p_true = linkcal::testing::reference_parameters();

  // project random noise onto the orthogonal complement of the column space
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jid.J, Eigen::ComputeFullU);
  RngStream rng(3);
  Eigen::VectorXd noise(jid.J.rows());
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = rng.normal(0, 1e-3);
  const Eigen::MatrixXd u_range = svd.matrixU().leftCols(kParamCount);
  noise -= u_range * (u_range.transpose() * noise);

  const auto res = identify(jid, make_set(jid.J * p_true.v + noise));
  for (int i = 0; i < kParamCount; ++i)
    CHECK(res.parameters[i] == doctest::Approx(p_true[i]).epsilon(1e-9));
  CHECK(res.residual_mm.norm() == doctest::Approx(noise.norm()).epsilon(1e-9));
}

TEST_CASE("identify: guards on frame, rows and rank") {
  const auto topo = MachineTopology::trunnion_45_default();
  const auto poses = linkcal::testing::short_identification_trajectory(topo, 20);
  const auto jid = assemble_identification_jacobian(topo, poses);

  auto sensor_set = make_set(Eigen::VectorXd::Zero(jid.J.rows()));
  sensor_set.frame = Frame::sensor;
  CHECK_THROWS_WITH_AS(identify(jid, sensor_set), doctest::Contains("machine frame"), DataError);

  CHECK_THROWS_WITH_AS(identify(jid, make_set(Eigen::VectorXd::Zero(jid.J.rows() - 3))),
                       doctest::Contains(std::to_string(jid.J.rows()).c_str()), DataError);

  // five copies of one pose cannot separate the parameters
  const std::vector<Pose> repeated(5, poses.front());
  const auto jbad = assemble_identification_jacobian(topo, repeated);
  CHECK_THROWS_WITH_AS(identify(jbad, make_set(Eigen::VectorXd::Zero(15))),
                       doctest::Contains("rank deficient"), DataError);
}

TEST_CASE("identify: residual orthogonal to the column space") {
  const auto topo = MachineTopology::trunnion_45_default();
  const auto poses = linkcal::testing::short_identification_trajectory(topo, 40);
  const auto jid = assemble_identification_jacobian(topo, poses);
  RngStream rng(8);
  Eigen::VectorXd chi(jid.J.rows());
  for (Eigen::Index i = 0; i < chi.size(); ++i) chi(i) = rng.normal(0, 0.01);

  const auto res = identify(jid, make_set(chi));
  const double bound = 1e-9 * jid.J.norm() * res.residual_mm.norm();
  CHECK((jid.J.transpose() * res.residual_mm).cwiseAbs().maxCoeff() < std::max(bound, 1e-15));
}

TEST_CASE("identify: scale equivariance") {
  const auto topo = MachineTopology::trunnion_45_default();
  const auto poses = linkcal::testing::short_identification_trajectory(topo, 25);
  const auto jid = assemble_identification_jacobian(topo, poses);
  RngStream rng(9);
  Eigen::VectorXd chi(jid.J.rows());
  for (Eigen::Index i = 0; i < chi.size(); ++i) chi(i) = rng.normal(0, 0.01);

  const auto r1 = identify(jid, make_set(chi));
  const auto r2 = identify(jid, make_set(Eigen::VectorXd(3.5 * chi)));
  for (int i = 0; i < kParamCount; ++i)
    CHECK(r2.parameters[i] == doctest::Approx(3.5 * r1.parameters[i]).epsilon(1e-12));
}

TEST_CASE("property: noise-free round trip on random trajectories and parameters") {
  const auto topo = MachineTopology::trunnion_45_default();
  RngStream rng(17);
  for (int t = 0; t < 20; ++t) {
    std::vector<Pose> poses;
    for (int k = 0; k < 8; ++k) {
      Pose p = inverse_kinematics_coincidence(topo, rng.uniform(0, 180), rng.uniform(0, 1250));
      p.index = k + 1;
      poses.push_back(p);
    }
    ErrorParameterVector p_true;
    for (int i = 0; i < kParamCount; ++i)
      p_true[i] = param_is_angular(i) ? rng.normal(0, 100e-6) : rng.normal(0, 0.05);

    const auto jid = assemble_identification_jacobian(topo, poses);
    const auto res = identify(jid, make_set(jid.J * p_true.v));
    for (int i = 0; i < kParamCount; ++i)
      CHECK(std::abs(res.parameters[i] - p_true[i]) <=
            1e-9 * std::max(std::abs(p_true[i]), 1e-6));
  }
}

TEST_CASE("residual_report: zero and constant series") {
  const auto topo = MachineTopology::trunnion_45_default();
  const auto poses = linkcal::testing::short_identification_trajectory(topo, 20);
  const auto jid = assemble_identification_jacobian(topo, poses);

  const auto zero = identify(jid, make_set(Eigen::VectorXd::Zero(jid.J.rows())));
  const auto rep_zero = residual_report(zero);
  CHECK(rep_zero.rms_um.norm() == 0.0);
  CHECK(rep_zero.max_abs_um == 0.0);
  CHECK(rep_zero.residual_um.size() == 20);

  IdentificationResult synthetic;
  synthetic.residual_mm = Eigen::VectorXd::Zero(60);
  for (int k = 0; k < 20; ++k) synthetic.residual_mm(3 * k) = 0.002;  // 2 um in x
  synthetic.rms_um = Vec3(2.0, 0.0, 0.0);
  synthetic.max_abs_um = 2.0;
  const auto rep = residual_report(synthetic);
  CHECK(rep.rms_um[0] == doctest::Approx(2.0));
  for (const auto& r : rep.residual_um) CHECK(r.x() == doctest::Approx(2.0));
}

TEST_CASE("validate: zero for generated data, sigma for white noise") {
  const auto topo = MachineTopology::trunnion_45_default();
  const auto poses = linkcal::testing::short_identification_trajectory(topo, 600);
  const auto jid = assemble_identification_jacobian(topo, poses);
  const auto p = linkcal::testing::reference_parameters();

  CHECK(validate_parameters(p, jid, make_set(jid.J * p.v)).maxCoeff() < 1e-9);

  const double sigma_um = 2.0;
  RngStream rng(12);
  Eigen::VectorXd chi = jid.J * p.v;
  for (Eigen::Index i = 0; i < chi.size(); ++i) chi(i) += rng.normal(0.0, sigma_um * kMmPerUm);
  const Vec3 rms = validate_parameters(p, jid, make_set(chi));
  for (int axis = 0; axis < 3; ++axis) {
    CHECK(rms[axis] > sigma_um * 0.8);
    CHECK(rms[axis] < sigma_um * 1.2);
  }
}
