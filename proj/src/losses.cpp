#include "hemlets/losses.hpp"

#include <cmath>

#include "hemlets/error.hpp"

namespace hemlets {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_same_shape(const PartHeatmaps& a, const PartHeatmaps& b) {
  if (a.parts != b.parts || a.layers != b.layers || a.height != b.height || a.width != b.width ||
      a.values.size() != b.values.size() || b.mask.size() != b.values.size()) {
    throw Error(ErrorCode::dimension, "heatmap stacks differ in shape");
  }
}

void check_same_shape(const JointHeatmaps& a, const JointHeatmaps& b) {
  if (a.joints != b.joints || a.height != b.height || a.width != b.width || a.values.size() != b.values.size()) {
    throw Error(ErrorCode::dimension, "joint heatmap stacks differ in shape");
  }
}

double pixel_norm(const HeatmapLossOptions& o, int height, int width) {
  return o.normalize_by_pixels ? 1.0 / (static_cast<double>(height) * width) : 1.0;
}

void check_lambda(int lambda) {
  if (lambda != 0 && lambda != 1) throw Error(ErrorCode::config, "lambda must be 0 or 1");
}

void check_rotations(std::span<const double> a, std::span<const double> b) {
  if (a.size() != 9 * kSmplJoints || b.size() != 9 * kSmplJoints) {
    throw Error(ErrorCode::dimension, "expected 24 row-major 3x3 rotation matrices");
  }
}

void check_beta(std::span<const double> a, std::span<const double> b) {
  if (a.size() != kSmplShape || b.size() != kSmplShape) {
    throw Error(ErrorCode::dimension, "expected 10 shape coefficients");
  }
}

}  // namespace

double hemlets_loss(const HeatmapTriplets& pred, const HeatmapTriplets& gt, const HeatmapLossOptions& o) {
  check_same_shape(pred, gt);
  double s = 0.0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    if (!gt.mask[i]) continue;
    const double r = gt.values[i] - pred.values[i];
    s += r * r;
  }
  return s * pixel_norm(o, gt.height, gt.width);
}

std::vector<double> hemlets_loss_grad(const HeatmapTriplets& pred, const HeatmapTriplets& gt,
                                      const HeatmapLossOptions& o) {
  check_same_shape(pred, gt);
  const double scale = 2.0 * pixel_norm(o, gt.height, gt.width);
  std::vector<double> g(gt.values.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (gt.mask[i]) g[i] = scale * (pred.values[i] - gt.values[i]);
  }
  return g;
}

double heatmap2d_loss(const JointHeatmaps& pred, const JointHeatmaps& gt, const HeatmapLossOptions& o) {
  check_same_shape(pred, gt);
  double s = 0.0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    const double r = gt.values[i] - pred.values[i];
    s += r * r;
  }
  return s * pixel_norm(o, gt.height, gt.width);
}

std::vector<double> heatmap2d_loss_grad(const JointHeatmaps& pred, const JointHeatmaps& gt,
                                        const HeatmapLossOptions& o) {
  check_same_shape(pred, gt);
  const double scale = 2.0 * pixel_norm(o, gt.height, gt.width);
  std::vector<double> g(gt.values.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * (pred.values[i] - gt.values[i]);
  return g;
}

double joint3d_loss(const Pose3D& pred, const Pose3D& gt, int lambda) {
  check_lambda(lambda);
  double s = 0.0;
  for (int n = 0; n < kNumJoints; ++n) {
    if (!gt.valid[n]) continue;
    const Vec3 d = gt.coords[n] - pred.coords[n];
    s += std::abs(d.x) + std::abs(d.y);
    if (lambda) s += std::abs(d.z);
  }
  return s;
}

std::array<Vec3, kNumJoints> joint3d_loss_grad(const Pose3D& pred, const Pose3D& gt, int lambda) {
  check_lambda(lambda);
  std::array<Vec3, kNumJoints> g{};
  for (int n = 0; n < kNumJoints; ++n) {
    if (!gt.valid[n]) continue;
    const Vec3 d = pred.coords[n] - gt.coords[n];
    g[n] = {sign(d.x), sign(d.y), lambda ? sign(d.z) : 0.0};
  }
  return g;
}

double total_loss(double l_int, double l_3d, double alpha) { return alpha * l_int + l_3d; }

double smpl_pose_loss(std::span<const double> pred, std::span<const double> gt, RotationNorm norm) {
  check_rotations(pred, gt);
  double s = 0.0;
  for (int i = 0; i < kSmplJoints; ++i) {
    double term = 0.0;
    for (int e = 0; e < 9; ++e) {
      const double d = gt[9 * i + e] - pred[9 * i + e];
      term += norm == RotationNorm::elementwise_l1 ? std::abs(d) : d * d;
    }
    s += norm == RotationNorm::elementwise_l1 ? term : std::sqrt(term);
  }
  return s;
}

std::vector<double> smpl_pose_loss_grad(std::span<const double> pred, std::span<const double> gt, RotationNorm norm) {
  check_rotations(pred, gt);
  std::vector<double> g(pred.size(), 0.0);
  for (int i = 0; i < kSmplJoints; ++i) {
    if (norm == RotationNorm::elementwise_l1) {
      for (int e = 0; e < 9; ++e) g[9 * i + e] = sign(pred[9 * i + e] - gt[9 * i + e]);
      continue;
    }
    double f2 = 0.0;
    for (int e = 0; e < 9; ++e) f2 += (pred[9 * i + e] - gt[9 * i + e]) * (pred[9 * i + e] - gt[9 * i + e]);
    const double f = std::sqrt(f2);
    if (f == 0.0) continue;
    for (int e = 0; e < 9; ++e) g[9 * i + e] = (pred[9 * i + e] - gt[9 * i + e]) / f;
  }
  return g;
}

double smpl_shape_loss(std::span<const double> pred, std::span<const double> gt) {
  check_beta(pred, gt);
  double s = 0.0;
  for (int i = 0; i < kSmplShape; ++i) s += std::abs(gt[i] - pred[i]);
  return s;
}

std::vector<double> smpl_shape_loss_grad(std::span<const double> pred, std::span<const double> gt) {
  check_beta(pred, gt);
  std::vector<double> g(kSmplShape);
  for (int i = 0; i < kSmplShape; ++i) g[i] = sign(pred[i] - gt[i]);
  return g;
}

double mesh_loss(double l_theta, double l_beta, double l_tot) { return l_theta + l_beta + l_tot; }

LossBreakdown LossBreakdown::combine(double l_hem, double l_2d, double l_3d, int lambda, double alpha) {
  check_lambda(lambda);
  LossBreakdown b;
  b.l_hem = l_hem;
  b.l_2d = l_2d;
  b.l_3d = l_3d;
  b.l_int = l_hem + l_2d;
  b.l_tot = total_loss(b.l_int, l_3d, alpha);
  b.lambda = lambda;
  b.alpha = alpha;
  return b;
}

LossBreakdown LossBreakdown::with_body_terms(double l_theta_, double l_beta_) const {
  LossBreakdown b = *this;
  b.l_theta = l_theta_;
  b.l_beta = l_beta_;
  b.l_mesh = mesh_loss(l_theta_, l_beta_, l_tot);
  b.body_terms = true;
  return b;
}

nlohmann::json to_json(const LossBreakdown& b) {
  nlohmann::json j = {{"l_hem", b.l_hem}, {"l_2d", b.l_2d}, {"l_3d", b.l_3d}, {"l_int", b.l_int},
                      {"l_tot", b.l_tot}, {"lambda", b.lambda}, {"alpha", b.alpha}};
  if (b.body_terms) {
    j["l_theta"] = b.l_theta;
    j["l_beta"] = b.l_beta;
    j["l_mesh"] = b.l_mesh;
  }
  return j;
}

}  // namespace hemlets
