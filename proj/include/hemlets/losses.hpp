#pragma once

#include <span>
#include <vector>

#include "hemlets/heatmap_codec.hpp"
#include "hemlets/skeleton.hpp"

namespace hemlets {

/// Weight of the intermediate (HEMlets + 2D heatmap) loss in the total loss.
inline constexpr double kDefaultAlpha = 0.05;
inline constexpr int kSmplJoints = 24;
inline constexpr int kSmplShape = 10;

struct HeatmapLossOptions {
  /// Divide the summed squared error by the number of pixels per plane.
  bool normalize_by_pixels = false;
};

/// Sum over parts/layers/pixels of ((gt - pred) * mask)^2; the mask is taken from `gt`.
double hemlets_loss(const HeatmapTriplets& pred, const HeatmapTriplets& gt, const HeatmapLossOptions& options = {});
/// d loss / d pred, same layout as pred.values.
std::vector<double> hemlets_loss_grad(const HeatmapTriplets& pred, const HeatmapTriplets& gt,
                                      const HeatmapLossOptions& options = {});

double heatmap2d_loss(const JointHeatmaps& pred, const JointHeatmaps& gt, const HeatmapLossOptions& options = {});
std::vector<double> heatmap2d_loss_grad(const JointHeatmaps& pred, const JointHeatmaps& gt,
                                        const HeatmapLossOptions& options = {});

/// sum_n |dx| + |dy| + lambda |dz| over joints valid in gt; lambda must be 0 or 1.
double joint3d_loss(const Pose3D& pred, const Pose3D& gt, int lambda);
/// Subgradient (sign convention: 0 at a kink).
std::array<Vec3, kNumJoints> joint3d_loss_grad(const Pose3D& pred, const Pose3D& gt, int lambda);

double total_loss(double l_int, double l_3d, double alpha = kDefaultAlpha);

enum class RotationNorm { elementwise_l1, frobenius };

/// Sum over 24 joints of |R_gt - R_pred|. Rotations are 24 row-major 3x3 blocks (216 values).
double smpl_pose_loss(std::span<const double> pred_rotations, std::span<const double> gt_rotations,
                      RotationNorm norm = RotationNorm::elementwise_l1);
std::vector<double> smpl_pose_loss_grad(std::span<const double> pred_rotations, std::span<const double> gt_rotations,
                                        RotationNorm norm = RotationNorm::elementwise_l1);

double smpl_shape_loss(std::span<const double> pred_beta, std::span<const double> gt_beta);
std::vector<double> smpl_shape_loss_grad(std::span<const double> pred_beta, std::span<const double> gt_beta);

double mesh_loss(double l_theta, double l_beta, double l_tot);

struct LossBreakdown {
  double l_hem = 0.0;
  double l_2d = 0.0;
  double l_3d = 0.0;
  double l_int = 0.0;
  double l_tot = 0.0;
  double l_theta = 0.0;
  double l_beta = 0.0;
  double l_mesh = 0.0;
  int lambda = 1;
  double alpha = kDefaultAlpha;
  bool body_terms = false;

  /// Fills l_int, l_tot and (when body_terms) l_mesh from the component terms.
  static LossBreakdown combine(double l_hem, double l_2d, double l_3d, int lambda, double alpha = kDefaultAlpha);
  LossBreakdown with_body_terms(double l_theta, double l_beta) const;
};

nlohmann::json to_json(const LossBreakdown& b);

}  // namespace hemlets
