#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <string>
#include <vector>

#include "linkcal/common.hpp"
#include "linkcal/kinematics.hpp"

namespace linkcal {

/// Stacked measured volumetric errors over a pose set (mm).
struct ErrorVectorSet {
  Eigen::VectorXd chi_mm;
  std::vector<int> pose_indices;
  std::vector<double> timestamps_s;  // optional, empty when unused
  Frame frame = Frame::machine;

  int pose_count() const { return static_cast<int>(pose_indices.size()); }

  Vec3 at(int k) const { return chi_mm.segment(3 * k, 3); }

  void validate() const {
    if (chi_mm.size() % 3 != 0)
      throw DataError("error vector set length " + std::to_string(chi_mm.size()) +
                      " is not divisible by 3");
    if (static_cast<Eigen::Index>(pose_indices.size()) * 3 != chi_mm.size())
      throw DataError("error vector set index map covers " +
                      std::to_string(pose_indices.size()) + " poses for " +
                      std::to_string(chi_mm.size()) + " values");
    if (!timestamps_s.empty() && timestamps_s.size() != pose_indices.size())
      throw DataError("timestamp count does not match pose count");
  }
};

struct IdentificationResult {
  ErrorParameterVector parameters;
  Eigen::VectorXd residual_mm;  // chi - J * p
  Vec3 rms_um = Vec3::Zero();
  double max_abs_um = 0.0;
  double condition_number = 0.0;
};

/// Pseudo-inverse solver with a fixed factorisation, reusable across many
/// right-hand sides from the same trajectory.
class IdentificationSolver {
 public:
  explicit IdentificationSolver(const IdentificationJacobian& jid)
      : rows_(jid.J.rows()),
        svd_(jid.J, Eigen::ComputeThinU | Eigen::ComputeThinV) {
    const auto& sv = svd_.singularValues();
    const double smax = sv(0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > kCutoff * smax) ++rank;
    if (rank < kParamCount) {
      // name the combination closest to the null space
      const Eigen::VectorXd null_dir = svd_.matrixV().col(kParamCount - 1);
      Eigen::Index worst;
      null_dir.cwiseAbs().maxCoeff(&worst);
      throw DataError("identification Jacobian is rank deficient (rank " +
                      std::to_string(rank) + " of 14); near-null direction dominated by " +
                      param_names()[static_cast<std::size_t>(worst)]);
    }
    condition_ = smax / sv(sv.size() - 1);
  }

  Param14 solve(const Eigen::VectorXd& chi) const {
    const auto& sv = svd_.singularValues();
    Eigen::VectorXd coeff = svd_.matrixU().transpose() * chi;
    for (Eigen::Index i = 0; i < sv.size(); ++i) coeff(i) /= sv(i);
    return svd_.matrixV() * coeff;
  }

  double condition_number() const { return condition_; }
  Eigen::Index rows() const { return rows_; }

  static constexpr double kCutoff = 1e-10;

 private:
  Eigen::Index rows_;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd_;
  double condition_ = 0.0;
};

/// Least-squares solution of J * p = chi with residual diagnostics.
inline IdentificationResult identify(const IdentificationJacobian& jid,
                                     const ErrorVectorSet& chi) {
  chi.validate();
  if (chi.frame != Frame::machine)
    throw DataError("error vector set must be in the machine frame before identification");
  if (chi.chi_mm.size() != jid.J.rows())
    throw DataError("row mismatch: Jacobian has " + std::to_string(jid.J.rows()) +
                    " rows, error vector set has " + std::to_string(chi.chi_mm.size()));

  IdentificationSolver solver(jid);
  IdentificationResult res;
  res.parameters.v = solver.solve(chi.chi_mm);
  res.condition_number = solver.condition_number();
  res.residual_mm = chi.chi_mm - jid.J * res.parameters.v;

  const Eigen::Index n = res.residual_mm.size() / 3;
  for (int axis = 0; axis < 3; ++axis) {
    double s2 = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double r = res.residual_mm(3 * k + axis);
      s2 += r * r;
    }
    res.rms_um[axis] = std::sqrt(s2 / double(n)) * kUmPerMm;
  }
  res.max_abs_um = res.residual_mm.cwiseAbs().maxCoeff() * kUmPerMm;
  return res;
}

/// Plot-ready residual series.
struct ResidualReport {
  std::vector<int> pose_indices;
  std::vector<Vec3> residual_um;  // per pose, x/y/z
  Vec3 rms_um = Vec3::Zero();
  double max_abs_um = 0.0;
};

inline ResidualReport residual_report(const IdentificationResult& result,
                                      const std::vector<int>& pose_indices = {}) {
  ResidualReport rep;
  const Eigen::Index n = result.residual_mm.size() / 3;
  rep.residual_um.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    rep.residual_um.push_back(result.residual_mm.segment(3 * k, 3) * kUmPerMm);
    rep.pose_indices.push_back(
        pose_indices.empty() ? static_cast<int>(k + 1) : pose_indices[static_cast<std::size_t>(k)]);
  }
  rep.rms_um = result.rms_um;
  rep.max_abs_um = result.max_abs_um;
  return rep;
}

/// Per-axis RMS of the prediction error of `p` on an independent trajectory, um.
inline Vec3 validate_parameters(const ErrorParameterVector& p, const IdentificationJacobian& j_val,
                                const ErrorVectorSet& chi_val) {
  chi_val.validate();
  if (chi_val.chi_mm.size() != j_val.J.rows())
    throw DataError("row mismatch between validation Jacobian and measurements");
  const Eigen::VectorXd r = chi_val.chi_mm - j_val.J * p.v;
  const Eigen::Index n = r.size() / 3;
  Vec3 rms = Vec3::Zero();
  for (int axis = 0; axis < 3; ++axis) {
    double s2 = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) s2 += r(3 * k + axis) * r(3 * k + axis);
    rms[axis] = std::sqrt(s2 / double(n)) * kUmPerMm;
  }
  return rms;
}

}  // namespace linkcal
