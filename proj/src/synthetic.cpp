#include "hemlets/synthetic.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

namespace hemlets {

namespace {

using Eigen::AngleAxisd;
using Eigen::Matrix3d;
using Eigen::Vector3d;

constexpr double kDeg = std::numbers::pi / 180.0;

Vector3d to_eigen(Vec3 v) { return {v.x, v.y, v.z}; }
Vec3 from_eigen(const Vector3d& v) { return {v.x(), v.y(), v.z()}; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Rotation by a uniformly random angle in [0, max] about a random axis.
Matrix3d random_cone_rotation(std::mt19937_64& rng, double max_rad) {
  const double z = uniform(rng, -1.0, 1.0);
  const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  const Vector3d axis(r * std::cos(phi), r * std::sin(phi), z);
  return AngleAxisd(uniform(rng, 0.0, max_rad), axis).toRotationMatrix();
}

Matrix3d rot(double deg, const Vector3d& axis) { return AngleAxisd(deg * kDeg, axis).toRotationMatrix(); }

// Ball joint for a bone hanging along +y: flexion swings it to the front (-z),
// abduction outward (side = +1 for left, -1 for right), twist about the bone.
Matrix3d ball_joint(std::mt19937_64& rng, double s, int side, double flex_lo, double flex_hi, double abd_lo,
                    double abd_hi, double twist) {
  const double flex = s * uniform(rng, flex_lo, flex_hi);
  const double abd = s * uniform(rng, abd_lo, abd_hi);
  const double tw = s * uniform(rng, -twist, twist);
  return rot(-side * abd, Vector3d::UnitZ()) * rot(-flex, Vector3d::UnitX()) * rot(tw, Vector3d::UnitY());
}

// Local rotation of the bone ending at `child`.
Matrix3d local_rotation(std::mt19937_64& rng, int child, const SyntheticPoseConfig& c) {
  const double s = c.range_scale;
  using namespace joint;
  switch (child) {
    case spine:
    case thorax: return random_cone_rotation(rng, s * c.torso_swing_deg * kDeg);
    case l_shoulder:
    case r_shoulder:
    case l_hip:
    case r_hip: return random_cone_rotation(rng, s * 8.0 * kDeg);
    case l_elbow: return ball_joint(rng, s, +1, -40.0, 150.0, 0.0, 90.0, 45.0);
    case r_elbow: return ball_joint(rng, s, -1, -40.0, 150.0, 0.0, 90.0, 45.0);
    case l_wrist:
    case r_wrist: return rot(-s * uniform(rng, 0.0, 140.0), Vector3d::UnitX());
    case l_knee: return ball_joint(rng, s, +1, -20.0, 100.0, -10.0, 40.0, 20.0);
    case r_knee: return ball_joint(rng, s, -1, -20.0, 100.0, -10.0, 40.0, 20.0);
    case l_ankle:
    case r_ankle: return rot(s * uniform(rng, 0.0, 130.0), Vector3d::UnitX());
    default: return Matrix3d::Identity();
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Pose3D rest_pose_mm() {
  Pose3D p = Pose3D::all_valid();
  using namespace joint;
  p.coords[pelvis] = {0, 0, 0};
  p.coords[spine] = {0, -230, 0};
  p.coords[thorax] = {0, -470, 0};
  p.coords[upper_neck] = {0, -560, 0};
  p.coords[nose] = {0, -640, -90};
  p.coords[head_top] = {0, -760, 0};
  p.coords[l_shoulder] = {170, -450, 0};
  p.coords[l_elbow] = {170, -170, 0};
  p.coords[l_wrist] = {170, 80, 0};
  p.coords[r_shoulder] = {-170, -450, 0};
  p.coords[r_elbow] = {-170, -170, 0};
  p.coords[r_wrist] = {-170, 80, 0};
  p.coords[l_hip] = {130, 0, 0};
  p.coords[l_knee] = {130, 450, 0};
  p.coords[l_ankle] = {130, 890, 0};
  p.coords[r_hip] = {-130, 0, 0};
  p.coords[r_knee] = {-130, 450, 0};
  p.coords[r_ankle] = {-130, 890, 0};
  return p;
}

Pose3D random_pose_mm(std::mt19937_64& rng, const SyntheticPoseConfig& config) {
  const Skeleton& sk = canonical_skeleton();
  const Pose3D rest = rest_pose_mm();
  Pose3D out = rest;

  // Accumulated rotation applied to each joint's subtree; parts are stored parents-first.
  std::array<Matrix3d, kNumJoints> frame;
  frame.fill(Matrix3d::Identity());
  for (const Part& part : sk.parts()) {
    frame[part.child] = frame[part.parent] * local_rotation(rng, part.child, config);
    const Vector3d bone = to_eigen(rest.coords[part.child] - rest.coords[part.parent]);
    out.coords[part.child] = out.coords[part.parent] + from_eigen(frame[part.child] * bone);
  }
  // Head joints ride rigidly on the thorax.
  for (int j : {joint::upper_neck, joint::nose, joint::head_top}) {
    const Vector3d off = to_eigen(rest.coords[j] - rest.coords[joint::thorax]);
    out.coords[j] = out.coords[joint::thorax] + from_eigen(frame[joint::thorax] * off);
  }

  const Matrix3d global = AngleAxisd(uniform(rng, -1.0, 1.0) * config.yaw_range_deg * kDeg, Vector3d::UnitY())
                              .toRotationMatrix() *
                          AngleAxisd(uniform(rng, -1.0, 1.0) * config.pitch_range_deg * kDeg, Vector3d::UnitX())
                              .toRotationMatrix();
  for (auto& c : out.coords) c = from_eigen(global * to_eigen(c));
  return out;
}

Pose2D project_orthographic(const Pose3D& pose_mm, double mm_per_pixel, Vec2 center) {
  Pose2D p;
  for (int j = 0; j < kNumJoints; ++j) {
    p.valid[j] = pose_mm.valid[j];
    p.coords[j] = {center.x + pose_mm.coords[j].x / mm_per_pixel, center.y + pose_mm.coords[j].y / mm_per_pixel};
  }
  return p;
}

Pose3D to_voxel_space(const Pose3D& pose_mm, VolumeDims dims, double extent_mm) {
  const int root = canonical_skeleton().root_index();
  const Vec3 r = pose_mm.coords[root];
  const Vec3 c{0.5 * (dims.width - 1), 0.5 * (dims.height - 1), 0.5 * (dims.depth - 1)};
  Pose3D out = pose_mm;
  out.voxel_units = true;
  for (int j = 0; j < kNumJoints; ++j) {
    const Vec3 d = pose_mm.coords[j] - r;
    out.coords[j] = {c.x + d.x * dims.width / extent_mm, c.y + d.y * dims.height / extent_mm,
                     c.z + d.z * dims.depth / extent_mm};
  }
  return out;
}

Pose3D from_voxel_space(const Pose3D& pose_voxel, VolumeDims dims, double extent_mm) {
  const Vec3 c{0.5 * (dims.width - 1), 0.5 * (dims.height - 1), 0.5 * (dims.depth - 1)};
  Pose3D out = pose_voxel;
  out.voxel_units = false;
  for (int j = 0; j < kNumJoints; ++j) {
    const Vec3 d = pose_voxel.coords[j] - c;
    out.coords[j] = {d.x * extent_mm / dims.width, d.y * extent_mm / dims.height, d.z * extent_mm / dims.depth};
  }
  return out;
}

}  // namespace hemlets
