#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "hemlets/kernels.hpp"
#include "hemlets/skeleton.hpp"

namespace hemlets {

struct GridSize {
  int height = 64;
  int width = 64;
};

struct VolumeDims {
  int depth = 64;
  int height = 64;
  int width = 64;
};

struct HeatmapGrid {
  int height = 0;
  int width = 0;
  std::vector<double> values;
  bool out_of_frame = false;

  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Per-part stack of `layers` heatmaps with a same-shaped binary mask.
/// HEMlets use three layers ordered [T-1, T0, T+1]; the 5-state variant uses five.
struct PartHeatmaps {
  int parts = 0;
  int layers = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;
  /// Per part: an endpoint fell outside the grid (the tail is still rendered).
  std::vector<bool> out_of_frame;

  PartHeatmaps() = default;
  PartHeatmaps(int parts, int layers, int height, int width);

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  std::size_t offset(int part, int layer) const {
    return (static_cast<std::size_t>(part) * layers + layer) * plane_size();
  }
  std::span<double> layer(int part, int layer) { return {values.data() + offset(part, layer), plane_size()}; }
  std::span<const double> layer(int part, int layer) const {
    return {values.data() + offset(part, layer), plane_size()};
  }
  std::span<std::uint8_t> layer_mask(int part, int layer) {
    return {mask.data() + offset(part, layer), plane_size()};
  }
  std::span<const std::uint8_t> layer_mask(int part, int layer) const {
    return {mask.data() + offset(part, layer), plane_size()};
  }
  bool layer_supervised(int part, int layer) const;
};

using HeatmapTriplets = PartHeatmaps;

/// Index of polarity r in a triplet stack.
constexpr int polarity_layer(int r) { return r + 1; }

/// N x D x H x W blobs in voxel-index space.
struct VolumetricHeatmap {
  int channels = 0;
  VolumeDims dims;
  std::vector<double> values;
  std::vector<bool> out_of_volume;

  std::size_t volume_size() const { return static_cast<std::size_t>(dims.depth) * dims.height * dims.width; }
  std::span<const double> channel(int c) const { return {values.data() + c * volume_size(), volume_size()}; }
};

/// Stack of N per-joint 2D heatmaps (the L_2D targets).
struct JointHeatmaps {
  int joints = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  std::span<const double> joint(int n) const { return {values.data() + n * plane_size(), plane_size()}; }
};

/// Relative depth ordering of a (parent, child) pair: +1 when the child is
/// closer (z_p - z_c > eps), -1 when it is farther, 0 inside the closed band.
int tri_state(double z_parent, double z_child, double epsilon);

struct AdaptiveEpsilon {
  double value = 0.0;
  bool degenerate = false;
};

/// eps_k = 0.5 * |B_k|. Throws invalid_joint for invalid endpoints.
AdaptiveEpsilon adaptive_epsilon(const Pose3D& pose, int part_index,
                                 const Skeleton& skeleton = canonical_skeleton());

/// Tri-state labels for every part, nullopt where an endpoint is invalid.
std::vector<std::optional<int>> part_polarities(const Pose3D& pose, const Skeleton& skeleton = canonical_skeleton());

HeatmapGrid render_gaussian(Vec2 center, GridSize grid, double sigma);

/// How an Unknown depth label masks its part.
enum class UnknownMaskPolicy {
  polarity_layers,  ///< mask T-1 and T+1, keep the parent in T0 supervised
  all_layers,
};

struct EncodeOptions {
  GridSize grid;
  double sigma = 2.0;
  double truncate = 3.0;
  UnknownMaskPolicy unknown_policy = UnknownMaskPolicy::polarity_layers;
  kernels::Exec exec = kernels::default_exec();
};

/// HEMlets from full 3D ground truth: tri-state labels use the adaptive epsilon.
HeatmapTriplets encode_hemlets(const Pose3D& pose3d, const Pose2D& pose2d,
                               const Skeleton& skeleton = canonical_skeleton(), const EncodeOptions& options = {});

/// HEMlets from 2D joints plus per-part polarity labels (nullopt = Unknown).
HeatmapTriplets encode_hemlets_labeled(const Pose2D& pose2d, std::span<const std::optional<int>> polarity,
                                       const Skeleton& skeleton = canonical_skeleton(),
                                       const EncodeOptions& options = {});

/// Polarity of the child joint read back from a triplet stack.
/// Throws unknown_polarity when the part's polarity layers are masked or the stack is empty.
int decode_hemlets_polarity(const HeatmapTriplets& triplets, int part_index, double presence_threshold = 0.5);

/// Five-state bin (0..4) of a signed tilt angle in degrees.
int five_state_bin(double signed_tilt_deg);

/// 5s-HEM: parent in the middle layer, child in the layer of its signed tilt bin.
PartHeatmaps encode_5s(const Pose3D& pose3d, const Pose2D& pose2d, const Skeleton& skeleton = canonical_skeleton(),
                       const EncodeOptions& options = {});

/// 2s-HEM: the closer joint goes to T+1, the farther to T-1, both to T0 when tied.
PartHeatmaps encode_2s(const Pose3D& pose3d, const Pose2D& pose2d, const Skeleton& skeleton = canonical_skeleton(),
                       const EncodeOptions& options = {});

JointHeatmaps render_joint_heatmaps(const Pose2D& pose2d, GridSize grid, double sigma = 2.0,
                                    kernels::Exec exec = kernels::default_exec());

struct VolumetricOptions {
  VolumeDims dims;
  std::array<double, 3> sigma_xyz{2.0, 2.0, 2.0};
  double truncate = 3.0;
  kernels::Exec exec = kernels::default_exec();
};

/// Per-joint 3D Gaussian blobs centered at voxel-space joint locations; invalid joints give zero channels.
VolumetricHeatmap render_volumetric_target(const Pose3D& pose_voxel, const VolumetricOptions& options = {});

/// Horizontal flip of every layer with mirrored part identities swapped.
PartHeatmaps mirror_part_heatmaps(const PartHeatmaps& stack, const Skeleton& skeleton = canonical_skeleton());

/// 8-bit binary PGM of a [0, 1] plane (values clamped).
void write_pgm(const std::filesystem::path& path, std::span<const double> plane, int height, int width);

}  // namespace hemlets
