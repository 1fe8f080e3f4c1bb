#pragma once

// Procedural poses in camera coordinates: x to the right, y down (image
// rows), z is depth away from the camera. Millimetres, pelvis at the origin.

#include <cstdint>
#include <random>

#include "hemlets/heatmap_codec.hpp"
#include "hemlets/skeleton.hpp"

namespace hemlets {

struct SyntheticPoseConfig {
  /// Multiplies every joint range below (0 = rest pose up to global rotation).
  double range_scale = 1.0;
  /// Maximum deviation of the two spine bones.
  double torso_swing_deg = 20.0;
  /// Global rotation about the vertical axis is uniform in [-yaw, yaw].
  double yaw_range_deg = 180.0;
  double pitch_range_deg = 10.0;
};

/// Upright, arms-down reference pose facing the camera.
Pose3D rest_pose_mm();

/// Articulated random pose with bone lengths preserved: shoulders and hips
/// swing mostly forward and outward, elbows bend forward and knees backward
/// (one-sided hinges), the spine sways inside a cone; then a global yaw/pitch.
Pose3D random_pose_mm(std::mt19937_64& rng, const SyntheticPoseConfig& config = {});

/// Orthographic projection: pixel = center + (x, y) / mm_per_pixel.
Pose2D project_orthographic(const Pose3D& pose_mm, double mm_per_pixel, Vec2 center);

/// Root-relative millimetres to voxel indices with the root at the volume
/// center; `extent_mm` spans the full volume along every axis.
Pose3D to_voxel_space(const Pose3D& pose_mm, VolumeDims dims, double extent_mm);
Pose3D from_voxel_space(const Pose3D& pose_voxel, VolumeDims dims, double extent_mm);

/// SplitMix64 step; derives independent per-record seeds from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);
/// Uniform double in [0, 1) from the top 53 bits of one draw.
double uniform01(std::mt19937_64& rng);

}  // namespace hemlets
