#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hemlets/autodiff.hpp"
#include "hemlets/body_model.hpp"
#include "hemlets/skeleton.hpp"

namespace hemlets {

/// Linear regression head: [18 x 3 joints (metres), features] -> (beta, 24 rotation matrices).
class BodyHead {
 public:
  static constexpr int kRotationValues = 9 * kBodyJoints;

  /// Untrained: predict() throws not_ready.
  BodyHead() = default;
  /// Zero weights; rotation biases are identity matrices, shape biases zero.
  static BodyHead identity(int feature_dim);

  bool ready() const { return w_beta_.defined(); }
  int feature_dim() const { return feature_dim_; }
  int input_dim() const { return 3 * kNumJoints + feature_dim_; }

  /// [joints (mm / 1000), features].
  std::vector<double> make_input(const Pose3D& joints3d_mm, std::span<const double> features) const;

  struct Output {
    ad::DiffArray beta;       ///< [B, 10]
    ad::DiffArray rotations;  ///< [B, 216], unconstrained 3x3 blocks
  };
  Output forward(const ad::DiffArray& input) const;

  /// Rotation blocks projected to SO(3), then converted back to axis-angle.
  BodyParams predict(const Pose3D& joints3d_mm, std::span<const double> features) const;

  std::vector<ad::DiffArray> parameters() const { return {w_beta_, b_beta_, w_rot_, b_rot_}; }

 private:
  int feature_dim_ = 0;
  ad::DiffArray w_beta_, b_beta_, w_rot_, b_rot_;
};

struct BodyTrainSample {
  Pose3D joints3d_mm;
  std::vector<double> features;
  BodyParams params;
};

struct BodyTrainConfig {
  int epochs = 300;
  double learning_rate = 0.01;
  /// Multiplicative decay per epoch.
  double lr_decay = 0.99;
  int batch_size = 10;
  std::uint64_t seed = 1;
  /// Constant pose-stage loss folded into l_mesh (no gradient reaches the head).
  double l_tot = 0.0;
};

/// Summed l_theta, l_beta and l_mesh = l_theta + l_beta + l_tot over a batch.
struct BodyBatchLoss {
  ad::DiffArray l_theta, l_beta, l_mesh;
};

BodyBatchLoss body_batch_loss(const BodyHead& head, std::span<const BodyTrainSample* const> batch, double l_tot);

struct BodyTrainLog {
  /// Per-sample mean of l_theta + l_beta after each epoch.
  std::vector<double> loss;
};

/// Minibatch SGD on l_mesh; the head is updated in place.
BodyTrainLog train_body_head(BodyHead& head, std::span<const BodyTrainSample> data, const BodyTrainConfig& config);

/// Random (joints, features, params) triples from the synthetic rig. Joints are the
/// posed rig joints mapped onto the 18-joint skeleton; features are beta plus noise.
std::vector<BodyTrainSample> make_body_samples(const RigTemplate& rig, int count, int feature_dim, std::uint64_t seed);

/// 24 rig joints (metres, y up) to the canonical 18-joint skeleton (mm, y down).
Pose3D body_joints_to_pose(const std::array<Vector3, kBodyJoints>& joints);

}  // namespace hemlets
