#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "hemlets/skeleton.hpp"

namespace hemlets {

enum class Alignment { hip, procrustes };

enum class ProcrustesMode {
  similarity,  ///< rotation + translation + uniform scale
  rigid,       ///< rotation + translation
};

struct MetricOptions {
  double pck_threshold_mm = 150.0;
  double auc_max_threshold_mm = 150.0;
  int auc_steps = 31;
  ProcrustesMode procrustes = ProcrustesMode::similarity;
};

struct EvalReport {
  double mpjpe_mm = 0.0;
  double pa_mpjpe_mm = 0.0;
  double pck_percent = 0.0;
  double auc_percent = 0.0;
  /// Hip-aligned error per joint; NaN where a joint was never jointly valid.
  std::array<double, kNumJoints> per_joint_errors{};
  Alignment alignment = Alignment::hip;
  int poses = 0;
};

/// Per-joint Euclidean error after moving both roots to the origin (NaN for joints not jointly valid).
std::array<double, kNumJoints> hip_aligned_errors(const Pose3D& pred, const Pose3D& gt,
                                                  const Skeleton& skeleton = canonical_skeleton());

double mpjpe(const Pose3D& pred, const Pose3D& gt, const Skeleton& skeleton = canonical_skeleton());

/// `pred` mapped onto `gt` by the least-squares similarity (or rigid) transform over jointly valid joints.
Pose3D procrustes_align(const Pose3D& pred, const Pose3D& gt, ProcrustesMode mode = ProcrustesMode::similarity);
double pa_mpjpe(const Pose3D& pred, const Pose3D& gt, ProcrustesMode mode = ProcrustesMode::similarity);

/// Percentage of errors strictly below the threshold.
double pck_from_errors(std::span<const double> errors, double threshold_mm);
/// Mean PCK over `steps` evenly spaced thresholds in [0, max_threshold].
double auc_from_errors(std::span<const double> errors, double max_threshold_mm, int steps);

double pck3d(const Pose3D& pred, const Pose3D& gt, double threshold_mm = 150.0,
             const Skeleton& skeleton = canonical_skeleton());
double auc(const Pose3D& pred, const Pose3D& gt, double max_threshold_mm = 150.0, int steps = 31,
           const Skeleton& skeleton = canonical_skeleton());

/// Pooled metrics over a set of pose pairs (joints are pooled, not per-pose averaged).
EvalReport evaluate(std::span<const Pose3D> pred, std::span<const Pose3D> gt, const MetricOptions& options = {},
                    const Skeleton& skeleton = canonical_skeleton());

struct GroupReport {
  std::string group;
  EvalReport report;
};

/// One report per distinct group label (first-seen order) plus a trailing "Average" row over all pairs.
std::vector<GroupReport> evaluate_grouped(std::span<const Pose3D> pred, std::span<const Pose3D> gt,
                                          std::span<const std::string> groups, const MetricOptions& options = {},
                                          const Skeleton& skeleton = canonical_skeleton());

nlohmann::json to_json(const EvalReport& report, const Skeleton& skeleton = canonical_skeleton());

}  // namespace hemlets
