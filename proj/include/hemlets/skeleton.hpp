#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace hemlets {

inline constexpr int kNumJoints = 18;
inline constexpr int kNumParts = 14;

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct Vec2 {
  double x = 0.0, y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

double norm(Vec3 v);

struct Part {
  int parent = 0;
  int child = 0;
  friend bool operator==(const Part&, const Part&) = default;
};

/// Joint/part topology shared by every module.
///
/// The canonical instance merges the Human3.6M and MPII joint sets into 18
/// joints. Only 14 joints are part children; pelvis (the root), upper neck,
/// nose and head top never appear as a child. A custom part table may be
/// supplied for experiments, but it must keep 18 joints and 14 parts.
class Skeleton {
 public:
  Skeleton(std::vector<std::string> joint_names, std::vector<Part> parts, int root_index,
           std::vector<std::pair<int, int>> mirror_pairs);

  const std::vector<std::string>& joint_names() const { return joint_names_; }
  const std::vector<Part>& parts() const { return parts_; }
  const std::vector<std::pair<int, int>>& mirror_pairs() const { return mirror_pairs_; }
  int root_index() const { return root_; }
  int num_joints() const { return static_cast<int>(joint_names_.size()); }
  int num_parts() const { return static_cast<int>(parts_.size()); }

  /// Left/right counterpart of a joint (itself for central joints).
  int mirror_joint(int joint) const { return joint_mirror_[joint]; }
  /// Part whose endpoints are the mirrored endpoints of `part`.
  int mirror_part(int part) const { return part_mirror_[part]; }

  int joint_index(const std::string& name) const;
  /// Part index for an ordered (parent, child) pair, or -1.
  int find_part(int parent, int child) const;

  /// FNV-1a over the textual topology; stable across runs and platforms.
  std::uint64_t topology_hash() const;

 private:
  std::vector<std::string> joint_names_;
  std::vector<Part> parts_;
  int root_;
  std::vector<std::pair<int, int>> mirror_pairs_;
  std::vector<int> joint_mirror_;
  std::vector<int> part_mirror_;
};

const Skeleton& canonical_skeleton();

namespace joint {
enum : int {
  pelvis = 0,
  spine,
  thorax,
  upper_neck,
  nose,
  head_top,
  l_shoulder,
  l_elbow,
  l_wrist,
  r_shoulder,
  r_elbow,
  r_wrist,
  l_hip,
  l_knee,
  l_ankle,
  r_hip,
  r_knee,
  r_ankle,
};
}  // namespace joint

struct Pose3D {
  std::array<Vec3, kNumJoints> coords{};
  std::array<bool, kNumJoints> valid{};
  /// Coordinates are voxel indices instead of millimetres.
  bool voxel_units = false;

  static Pose3D all_valid();
  bool is_finite() const;
};

struct Pose2D {
  std::array<Vec2, kNumJoints> coords{};
  std::array<bool, kNumJoints> valid{};

  static Pose2D all_valid();
  bool is_finite() const;
};

/// Euclidean length of part `part_index`; throws invalid_joint if an endpoint is invalid.
double part_length(const Pose3D& pose, int part_index, const Skeleton& skeleton = canonical_skeleton());

/// Angle in degrees between the bone and the image (x-y) plane, in [0, 90].
double tilt_angle(const Pose3D& pose, int part_index, const Skeleton& skeleton = canonical_skeleton());

/// Same as tilt_angle but signed by z_child - z_parent, in [-90, 90].
double signed_tilt_angle(const Pose3D& pose, int part_index,
                         const Skeleton& skeleton = canonical_skeleton());

/// Versioned topology document (joints, parts, mirror pairs).
nlohmann::json skeleton_to_json(const Skeleton& skeleton);
Skeleton skeleton_from_json(const nlohmann::json& doc);

inline constexpr int kSkeletonSchemaVersion = 1;

}  // namespace hemlets
