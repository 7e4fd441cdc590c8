#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <string>
#include <vector>

#include "linkcal/common.hpp"

namespace linkcal {

/// Homogeneous 4xN bundle of 3-vector displacements (mm, bottom row ones).
struct DisplacementSet {
  Eigen::Matrix4Xd m;

  static DisplacementSet from_points(const std::vector<Vec3>& pts) {
    DisplacementSet s;
    s.m.resize(4, static_cast<Eigen::Index>(pts.size()));
    for (Eigen::Index i = 0; i < s.m.cols(); ++i) {
      s.m.col(i).head<3>() = pts[static_cast<std::size_t>(i)];
      s.m(3, i) = 1.0;
    }
    return s;
  }

  Eigen::Index count() const { return m.cols(); }
  Vec3 point(Eigen::Index i) const { return m.col(i).head<3>(); }

  void validate() const {
    if (count() < 4)
      throw DataError("displacement set needs at least 4 points, got " +
                      std::to_string(count()));
    for (Eigen::Index i = 0; i < count(); ++i)
      if (std::abs(m(3, i) - 1.0) > 1e-12)
        throw DataError("displacement set bottom row must be all ones");
  }
};

/// Homogeneous sensor-frame-to-machine-frame map.
struct FrameTransform {
  Mat4 m = Mat4::Identity();

  Vec3 e(int i) const { return m.col(i).head<3>(); }
  Vec3 offset() const { return m.col(3).head<3>(); }
  Mat3 linear() const { return m.topLeftCorner<3, 3>(); }

  /// Affine map with prescribed column norms (gains), pairwise column
  /// projections and offset; built from the symmetric square root of the
  /// target Gram matrix.
  static FrameTransform from_gram(const Vec3& gains, const Vec3& projections,
                                  const Vec3& offset_mm) {
    Mat3 gram;
    gram << gains[0] * gains[0], projections[0], projections[1],
            projections[0], gains[1] * gains[1], projections[2],
            projections[1], projections[2], gains[2] * gains[2];
    Eigen::SelfAdjointEigenSolver<Mat3> es(gram);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw ConfigError("requested gains/projections do not form a valid transform");
    const Mat3 root = es.operatorSqrt();
    FrameTransform t;
    t.m.topLeftCorner<3, 3>() = root;
    t.m.col(3).head<3>() = offset_mm;
    return t;
  }
};

/// Deviation of a fitted transform from the ideal orthonormal map.
/// Offsets in mm. Flags follow the instrument acceptance envelope:
/// gains within 1%, projections within 0.05, offsets within 10 um.
struct TransformQuality {
  Vec3 norms = Vec3::Ones();
  Vec3 projections = Vec3::Zero();  // e1.e2, e1.e3, e2.e3
  Vec3 offset_mm = Vec3::Zero();
  bool gain_flag = false;
  bool projection_flag = false;
  bool offset_flag = false;

  bool any_flag() const { return gain_flag || projection_flag || offset_flag; }
};

inline TransformQuality transform_quality(const FrameTransform& t) {
  TransformQuality q;
  q.norms = Vec3(t.e(0).norm(), t.e(1).norm(), t.e(2).norm());
  q.projections = Vec3(t.e(0).dot(t.e(1)), t.e(0).dot(t.e(2)), t.e(1).dot(t.e(2)));
  q.offset_mm = t.offset();
  q.gain_flag = ((q.norms - Vec3::Ones()).cwiseAbs().maxCoeff() > 0.01);
  q.projection_flag = (q.projections.cwiseAbs().maxCoeff() > 0.05);
  q.offset_flag = (q.offset_mm.cwiseAbs().maxCoeff() > 0.010);
  return q;
}

struct FrameTransformFit {
  FrameTransform transform;
  Eigen::Matrix3Xd residuals_mm;  // per-point, programmed minus mapped
  Vec3 residual_std_mm = Vec3::Zero();
};

/// Least-squares transform mapping measured (sensor) displacements onto
/// programmed (machine) ones: M = programmed * pinv(measured). The bottom
/// row comes out as (0,0,0,1) up to rounding and is snapped exactly.
inline FrameTransformFit fit_frame_transform(const DisplacementSet& programmed,
                                             const DisplacementSet& measured) {
  programmed.validate();
  measured.validate();
  if (programmed.count() != measured.count())
    throw DataError("programmed and measured sets differ in size: " +
                    std::to_string(programmed.count()) + " vs " +
                    std::to_string(measured.count()));

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(measured.m,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-12 * sv(0)) ++rank;
  if (rank < 4)
    throw DataError("measured displacement set is degenerate (rank " + std::to_string(rank) +
                    " of 4): points are affinely dependent");

  Eigen::VectorXd inv_sv = sv;
  for (Eigen::Index i = 0; i < sv.size(); ++i) inv_sv(i) = 1.0 / sv(i);
  const Eigen::MatrixXd pinv =
      svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();

  FrameTransformFit fit;
  fit.transform.m = programmed.m * pinv;
  fit.transform.m.row(3) << 0, 0, 0, 1;

  fit.residuals_mm = (programmed.m - fit.transform.m * measured.m).topRows<3>();
  const Eigen::Index n = fit.residuals_mm.cols();
  if (n > 1) {
    for (int r = 0; r < 3; ++r) {
      const double mu = fit.residuals_mm.row(r).mean();
      fit.residual_std_mm[r] = std::sqrt(
          (fit.residuals_mm.row(r).array() - mu).square().sum() / double(n - 1));
    }
  }
  return fit;
}

/// Map one sensor reading (mm) into the machine frame.
inline VolumetricError apply_transform(const FrameTransform& t, const Vec3& sensor_reading_mm) {
  Eigen::Vector4d h;
  h << sensor_reading_mm, 1.0;
  const Eigen::Vector4d mapped = t.m * h;
  return VolumetricError{mapped.head<3>(), Frame::machine};
}

}  // namespace linkcal
