#pragma once

// Desk-scale end-to-end regressor: noisy 2D joints -> per-joint volumetric
// logits -> soft-argmax voxel coordinates, with optional HEMlets and 2D
// heatmap intermediate supervision.
//
//   x (36 [+14 hints]) -> h1 = relu(W1 x + b1)
//   h1 -> hem (K x 3 x G x G), h1 -> hm (N x G x G)          intermediate heads
//   [h1, hem, hm] -> h2 = relu(W2 . + b2) -> depth profile (N x D)
//   logits[n, z, y, x] = gain * hm[n, y, x] + depth[n, z]
//   softmax over each volume, expectation -> (x, y, z) per joint

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hemlets/autodiff.hpp"
#include "hemlets/container.hpp"
#include "hemlets/data_io.hpp"
#include "hemlets/error.hpp"
#include "hemlets/heatmap_codec.hpp"
#include "hemlets/losses.hpp"
#include "hemlets/synthetic.hpp"

namespace hemlets {

struct ToyDataConfig {
  int train_size = 256;
  /// Leading training samples with 3D labels; the rest are 2D-only (lambda = 0)
  /// and carry simulated FBI depth labels instead. Negative means all of them.
  int train_3d_size = -1;
  int val_size = 128;
  GridSize grid{8, 8};
  VolumeDims dims{8, 8, 8};
  /// Millimetres spanned by the heatmap grid and by every volume axis.
  double extent_mm = 2400.0;
  /// Gaussian sigma of the intermediate targets, in grid pixels.
  double sigma = 1.0;
  /// Standard deviation of the noise added to the 2D inputs, in grid pixels.
  double input_noise_px = 0.1;
  std::uint64_t seed = 7;
  SyntheticPoseConfig poses;
  /// Annotator model for the 2D-only samples.
  FbiNoiseProfile fbi_noise;
};

struct ToySample {
  Pose3D target_voxel;
  Pose2D joints2d;
  /// Normalised network input (noisy 2D joints).
  std::vector<double> input;
  HeatmapTriplets hemlets;
  JointHeatmaps heatmaps2d;
  /// Tri-state labels for 3D samples, FBI labels (nullopt = Unknown) for 2D-only ones.
  std::vector<std::optional<int>> polarity;
  /// 1 when the depth target is supervised.
  int lambda = 1;
};

struct ToyDataset {
  ToyDataConfig config;
  std::vector<ToySample> train;
  std::vector<ToySample> val;
};

ToyDataset make_toy_dataset(const ToyDataConfig& config);
/// Builds one sample from a millimetre pose; `noise` is added to the 2D input.
ToySample make_toy_sample(const Pose3D& pose_mm, const ToyDataConfig& config, std::span<const Vec2> noise);
/// 2D-only variant: depth is unsupervised and the HEMlets come from `labels`.
ToySample make_toy_sample_2d(const Pose3D& pose_mm, const ToyDataConfig& config, std::span<const Vec2> noise,
                             const FbiRecord& labels);

struct ToyModelConfig {
  int hidden = 64;
  /// Append the 14 ground-truth part polarities to the input.
  bool polarity_hints = false;
  /// The heatmap grid must match the volume's height and width.
  GridSize grid{8, 8};
  VolumeDims dims{8, 8, 8};
  /// Multiplies the 2D heatmap branch inside the volume logits.
  double plane_gain = 6.0;
};

struct ToyForward {
  ad::DiffArray hemlets;   ///< [B, K*3*G*G]
  ad::DiffArray heatmaps;  ///< [B, N*G*G]
  ad::DiffArray coords;    ///< [B*N, 3] voxel (x, y, z)
};

class ToyRegressor {
 public:
  ToyRegressor() = default;
  /// He-uniform weights, zero biases.
  static ToyRegressor init(const ToyModelConfig& config, std::uint64_t seed);

  const ToyModelConfig& config() const { return config_; }
  int input_dim() const;
  ToyForward forward(const ad::DiffArray& input) const;
  std::vector<ad::DiffArray>& parameters() { return params_; }
  const std::vector<ad::DiffArray>& parameters() const { return params_; }
  static const std::vector<std::string>& parameter_names();

  /// Predicted voxel poses for a set of samples (no gradient use).
  std::vector<Pose3D> predict(std::span<const ToySample> samples) const;

  Container to_container() const;
  static ToyRegressor from_container(const Container& container);

 private:
  ToyModelConfig config_;
  std::vector<ad::DiffArray> params_;
};

struct ToyTrainConfig {
  int epochs = 30;
  double learning_rate = 0.02;
  int batch_size = 16;
  double alpha = kDefaultAlpha;
  /// Include alpha * (L_HEM + L_2D) in the objective; false is the L_3D-only baseline.
  bool intermediate = true;
  /// Depth supervision flag of the 3D loss (0 = 2D-only data).
  int lambda = 1;
  std::uint64_t seed = 1;
  int hidden = 64;
  bool polarity_hints = false;
  double plane_gain = 6.0;
};

struct EpochLog {
  int epoch = 0;
  /// Per-sample means of the training loss terms over the epoch.
  LossBreakdown loss;
  double train_mpjpe_voxel = 0.0;
  double val_mpjpe_voxel = 0.0;
};

nlohmann::json to_json(const EpochLog& log);

struct TrainResult {
  ToyRegressor model;
  std::vector<EpochLog> log;
};

/// Thrown when a loss becomes non-finite; carries the state before the failing step.
class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(const std::string& what, TrainResult last_finite)
      : Error(ErrorCode::training_diverged, what), last_finite_(std::move(last_finite)) {}
  const TrainResult& last_finite() const { return last_finite_; }

 private:
  TrainResult last_finite_;
};

/// Summed losses of one minibatch (per-term scalars plus the objective).
struct ToyBatchLoss {
  ad::DiffArray l_hem, l_2d, l_3d, objective;
};

ToyBatchLoss toy_batch_loss(const ToyRegressor& model, std::span<const ToySample* const> batch,
                            const ToyTrainConfig& config);

/// Plain minibatch SGD; the objective is averaged over the batch. Deterministic for a fixed seed.
TrainResult train_toy(const ToyDataset& data, const ToyTrainConfig& config,
                      const std::function<void(const EpochLog&)>& on_epoch = {});

/// Mean hip-aligned voxel MPJPE.
double voxel_mpjpe(std::span<const Pose3D> pred, std::span<const ToySample> samples);

}  // namespace hemlets
