#include "hemlets/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hemlets/error.hpp"

namespace hemlets {

double norm(Vec3 v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }

Skeleton::Skeleton(std::vector<std::string> joint_names, std::vector<Part> parts, int root_index,
                   std::vector<std::pair<int, int>> mirror_pairs)
    : joint_names_(std::move(joint_names)),
      parts_(std::move(parts)),
      root_(root_index),
      mirror_pairs_(std::move(mirror_pairs)) {
  const int n = num_joints();
  if (n != kNumJoints || num_parts() != kNumParts) {
    throw Error(ErrorCode::config, "skeleton must have 18 joints and 14 parts");
  }
  if (root_ < 0 || root_ >= n) throw Error(ErrorCode::config, "root index out of range");

  std::vector<int> child_count(n, 0);
  for (const Part& p : parts_) {
    if (p.parent < 0 || p.parent >= n || p.child < 0 || p.child >= n || p.parent == p.child) {
      throw Error(ErrorCode::config, "part endpoints must be distinct valid joints");
    }
    if (p.child == root_) throw Error(ErrorCode::config, "root cannot be a part child");
    if (++child_count[p.child] > 1) throw Error(ErrorCode::config, "joint is the child of two parts");
  }
  // Every part must chain back to the root through parent links.
  for (const Part& p : parts_) {
    int j = p.parent;
    int steps = 0;
    while (j != root_) {
      auto it = std::find_if(parts_.begin(), parts_.end(), [j](const Part& q) { return q.child == j; });
      if (it == parts_.end() || ++steps > n) {
        throw Error(ErrorCode::config, "part " + joint_names_[p.parent] + " does not reach the root");
      }
      j = it->parent;
    }
  }

  joint_mirror_.resize(n);
  for (int j = 0; j < n; ++j) joint_mirror_[j] = j;
  for (auto [l, r] : mirror_pairs_) {
    if (l < 0 || l >= n || r < 0 || r >= n || l == r || joint_mirror_[l] != l || joint_mirror_[r] != r) {
      throw Error(ErrorCode::config, "mirror pairs must be disjoint pairs of distinct joints");
    }
    joint_mirror_[l] = r;
    joint_mirror_[r] = l;
  }
  part_mirror_.resize(parts_.size());
  for (int k = 0; k < num_parts(); ++k) {
    const int m = find_part(joint_mirror_[parts_[k].parent], joint_mirror_[parts_[k].child]);
    if (m < 0) throw Error(ErrorCode::config, "part table is not closed under mirroring");
    part_mirror_[k] = m;
  }
}

int Skeleton::joint_index(const std::string& name) const {
  auto it = std::find(joint_names_.begin(), joint_names_.end(), name);
  if (it == joint_names_.end()) throw Error(ErrorCode::invalid_joint, "unknown joint name '" + name + "'");
  return static_cast<int>(it - joint_names_.begin());
}

int Skeleton::find_part(int parent, int child) const {
  for (int k = 0; k < num_parts(); ++k) {
    if (parts_[k].parent == parent && parts_[k].child == child) return k;
  }
  return -1;
}

std::uint64_t Skeleton::topology_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  };
  for (const auto& name : joint_names_) mix(name);
  for (const Part& p : parts_) mix(std::to_string(p.parent) + ">" + std::to_string(p.child));
  mix("root" + std::to_string(root_));
  for (auto [l, r] : mirror_pairs_) mix(std::to_string(l) + "|" + std::to_string(r));
  return h;
}

const Skeleton& canonical_skeleton() {
  using namespace joint;
  static const Skeleton skeleton(
      {"pelvis", "spine", "thorax", "upper_neck", "nose", "head_top", "l_shoulder", "l_elbow",
       "l_wrist", "r_shoulder", "r_elbow", "r_wrist", "l_hip", "l_knee", "l_ankle", "r_hip", "r_knee",
       "r_ankle"},
      {
          {pelvis, spine},
          {spine, thorax},
          {thorax, l_shoulder},
          {l_shoulder, l_elbow},
          {l_elbow, l_wrist},
          {thorax, r_shoulder},
          {r_shoulder, r_elbow},
          {r_elbow, r_wrist},
          {pelvis, l_hip},
          {l_hip, l_knee},
          {l_knee, l_ankle},
          {pelvis, r_hip},
          {r_hip, r_knee},
          {r_knee, r_ankle},
      },
      pelvis,
      {{l_shoulder, r_shoulder}, {l_elbow, r_elbow}, {l_wrist, r_wrist}, {l_hip, r_hip},
       {l_knee, r_knee}, {l_ankle, r_ankle}});
  return skeleton;
}

Pose3D Pose3D::all_valid() {
  Pose3D p;
  p.valid.fill(true);
  return p;
}

bool Pose3D::is_finite() const {
  for (int j = 0; j < kNumJoints; ++j) {
    if (valid[j] && !(std::isfinite(coords[j].x) && std::isfinite(coords[j].y) && std::isfinite(coords[j].z))) {
      return false;
    }
  }
  return true;
}

Pose2D Pose2D::all_valid() {
  Pose2D p;
  p.valid.fill(true);
  return p;
}

bool Pose2D::is_finite() const {
  for (int j = 0; j < kNumJoints; ++j) {
    if (valid[j] && !(std::isfinite(coords[j].x) && std::isfinite(coords[j].y))) return false;
  }
  return true;
}

namespace {

Vec3 bone_vector(const Pose3D& pose, int part_index, const Skeleton& skeleton) {
  if (part_index < 0 || part_index >= skeleton.num_parts()) {
    throw Error(ErrorCode::invalid_joint, "part index " + std::to_string(part_index) + " out of range");
  }
  const Part& p = skeleton.parts()[part_index];
  if (!pose.valid[p.parent] || !pose.valid[p.child]) {
    throw Error(ErrorCode::invalid_joint, "part " + std::to_string(part_index) + " has an invalid endpoint");
  }
  return pose.coords[p.child] - pose.coords[p.parent];
}

}  // namespace

double part_length(const Pose3D& pose, int part_index, const Skeleton& skeleton) {
  return norm(bone_vector(pose, part_index, skeleton));
}

double signed_tilt_angle(const Pose3D& pose, int part_index, const Skeleton& skeleton) {
  const Vec3 d = bone_vector(pose, part_index, skeleton);
  const double len = norm(d);
  if (!(len > 0.0)) {
    throw Error(ErrorCode::degenerate_part, "part " + std::to_string(part_index) + " has zero length");
  }
  const double s = std::clamp(d.z / len, -1.0, 1.0);
  return std::asin(s) * 180.0 / std::numbers::pi;
}

double tilt_angle(const Pose3D& pose, int part_index, const Skeleton& skeleton) {
  return std::abs(signed_tilt_angle(pose, part_index, skeleton));
}

nlohmann::json skeleton_to_json(const Skeleton& skeleton) {
  nlohmann::json doc;
  doc["schema"] = "hemlets.skeleton";
  doc["version"] = kSkeletonSchemaVersion;
  doc["joints"] = skeleton.joint_names();
  doc["root"] = skeleton.joint_names()[skeleton.root_index()];
  auto& parts = doc["parts"] = nlohmann::json::array();
  for (const Part& p : skeleton.parts()) {
    parts.push_back({skeleton.joint_names()[p.parent], skeleton.joint_names()[p.child]});
  }
  auto& mirrors = doc["mirror_pairs"] = nlohmann::json::array();
  for (auto [l, r] : skeleton.mirror_pairs()) {
    mirrors.push_back({skeleton.joint_names()[l], skeleton.joint_names()[r]});
  }
  return doc;
}

Skeleton skeleton_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("schema").get<std::string>() != "hemlets.skeleton") {
      throw Error(ErrorCode::parse, "not a skeleton document");
    }
    if (doc.at("version").get<int>() != kSkeletonSchemaVersion) {
      throw Error(ErrorCode::parse, "unsupported skeleton schema version");
    }
    auto names = doc.at("joints").get<std::vector<std::string>>();
    auto index = [&names](const std::string& n) {
      auto it = std::find(names.begin(), names.end(), n);
      if (it == names.end()) throw Error(ErrorCode::parse, "unknown joint '" + n + "'");
      return static_cast<int>(it - names.begin());
    };
    std::vector<Part> parts;
    for (const auto& p : doc.at("parts")) parts.push_back({index(p.at(0)), index(p.at(1))});
    std::vector<std::pair<int, int>> mirrors;
    for (const auto& m : doc.at("mirror_pairs")) mirrors.emplace_back(index(m.at(0)), index(m.at(1)));
    const int root = index(doc.at("root").get<std::string>());
    return Skeleton(std::move(names), std::move(parts), root, std::move(mirrors));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, e.what());
  }
}

}  // namespace hemlets
