#pragma once

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "hemlets/container.hpp"
#include "hemlets/kernels.hpp"

namespace hemlets {

inline constexpr int kBodyJoints = 24;
inline constexpr int kShapeCoeffs = 10;

using Mat3 = Eigen::Matrix3d;
using Vector3 = Eigen::Vector3d;

struct BodyParams {
  std::array<double, kShapeCoeffs> beta{};
  /// Axis-angle per joint, radians.
  std::array<Vector3, kBodyJoints> theta = zero_pose();

  static std::array<Vector3, kBodyJoints> zero_pose() {
    std::array<Vector3, kBodyJoints> t;
    t.fill(Vector3::Zero());
    return t;
  }
};

/// SMPL-style rig without pose-corrective blend shapes. Vertices in metres.
struct RigTemplate {
  int num_vertices = 0;
  std::vector<double> vertices;     ///< V x 3
  std::vector<double> regressor;    ///< 24 x V
  std::array<int, kBodyJoints> parents{};
  std::vector<double> weights;      ///< V x 24, rows sum to 1
  std::vector<double> shape_basis;  ///< V x 3 x 10
  std::vector<std::array<int, 3>> faces;

  /// Throws invalid_rig on size mismatches, bad weights or a non-tree parent graph.
  void validate() const;
};

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vector3 translation = Vector3::Zero();
};

struct BodyMesh {
  std::vector<double> vertices;  ///< V x 3
  std::array<Vector3, kBodyJoints> joints;
};

/// Axis-angle to rotation matrix; the zero vector maps to the identity.
Mat3 rodrigues(const Vector3& axis_angle);
/// Inverse of rodrigues with angle in [0, pi].
Vector3 rotation_to_axis_angle(const Mat3& rotation);
/// Nearest rotation in the Frobenius sense (SVD with determinant correction).
Mat3 project_to_so3(const Mat3& m);

/// Rest joint positions after applying the shape blend offsets.
std::array<Vector3, kBodyJoints> shaped_rest_joints(const BodyParams& params, const RigTemplate& rig);
std::vector<double> shaped_vertices(const BodyParams& params, const RigTemplate& rig);

/// Global joint transforms: parent global transform composed with the local
/// rotation about the shaped rest joint.
std::array<RigidTransform, kBodyJoints> forward_kinematics(const BodyParams& params, const RigTemplate& rig);

/// Linear blend skinning. beta = 0, theta = 0 returns the template vertices bit-exactly.
BodyMesh skin(const BodyParams& params, const RigTemplate& rig, kernels::Exec exec = kernels::default_exec());

/// Procedural 24-joint rig: a ring of four vertices at every joint and at every bone midpoint (188 vertices).
RigTemplate make_synthetic_rig();

Container rig_to_container(const RigTemplate& rig);
/// Loads a rig (e.g. externally converted SMPL parameters); skinning rows are renormalised.
RigTemplate rig_from_container(const Container& container);

/// ASCII OBJ with `v` and 1-based `f` records.
void write_obj(const std::filesystem::path& path, std::span<const double> vertices,
               std::span<const std::array<int, 3>> faces);

/// Row-major 3x3 blocks of rodrigues(theta_i) for all 24 joints.
std::vector<double> pose_rotations(const BodyParams& params);

}  // namespace hemlets
