#pragma once

#include <span>
#include <vector>

#include "hemlets/heatmap_codec.hpp"
#include "hemlets/kernels.hpp"
#include "hemlets/skeleton.hpp"

namespace hemlets {

enum class CoordinateFrame {
  voxel_index,      ///< 0-based voxel/pixel indices
  normalized_unit,  ///< index / (extent - 1), so every axis spans [0, 1]
};

struct SoftArgmaxConfig {
  /// Multiplies the logits before exponentiation.
  double temperature = 1.0;
  CoordinateFrame frame = CoordinateFrame::voxel_index;
  /// `heatmap` treats the input as non-negative weights (e.g. rendered targets)
  /// and normalises by their sum instead of applying softmax.
  kernels::WeightMode input = kernels::WeightMode::logits;
};

/// Probability-weighted mean voxel coordinate (x = width index, y = height, z = depth).
Vec3 soft_argmax_3d(std::span<const double> volume, VolumeDims dims, const SoftArgmaxConfig& config = {});
Vec2 soft_argmax_2d(std::span<const double> grid, GridSize size, const SoftArgmaxConfig& config = {});
Vec2 soft_argmax_2d(const HeatmapGrid& grid, const SoftArgmaxConfig& config = {});

/// Vector-Jacobian product: grad[i] = sum_a upstream[a] * d out_a / d volume[i].
void soft_argmax_3d_vjp(std::span<const double> volume, VolumeDims dims, const SoftArgmaxConfig& config,
                        Vec3 upstream, std::span<double> grad);

/// Soft-argmax of every channel; invalid channels (all zero in heatmap mode) come back invalid.
Pose3D decode_volumetric(const VolumetricHeatmap& heatmap, const SoftArgmaxConfig& config = {},
                         kernels::Exec exec = kernels::default_exec());

/// Running per-part mean bone length in millimetres.
struct BoneLengthModel {
  std::vector<double> mean_length = std::vector<double>(kNumParts, 0.0);
  std::vector<long long> count = std::vector<long long>(kNumParts, 0);

  double total_mean_length() const;
};

/// Folds one ground-truth pose into the running means; parts with an invalid endpoint are skipped.
BoneLengthModel update_bone_lengths(BoneLengthModel model, const Pose3D& pose_gt_mm,
                                    const Skeleton& skeleton = canonical_skeleton());

/// Root-relative metric pose. The single scale factor is
///   s = sum_k mean_length_k / sum_k voxel_length_k
/// over parts valid in the decoded pose with positive voxel length and a trained mean.
Pose3D voxel_to_metric(const Pose3D& pose_voxel, const BoneLengthModel& model,
                       const Skeleton& skeleton = canonical_skeleton());

/// The scale factor used by voxel_to_metric.
double metric_scale(const Pose3D& pose_voxel, const BoneLengthModel& model,
                    const Skeleton& skeleton = canonical_skeleton());

nlohmann::json bone_length_model_to_json(const BoneLengthModel& model, const Skeleton& skeleton = canonical_skeleton());
BoneLengthModel bone_length_model_from_json(const nlohmann::json& doc);

}  // namespace hemlets
