#include "hemlets/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "hemlets/error.hpp"

namespace hemlets {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> jointly_valid(const Pose3D& a, const Pose3D& b) {
  std::vector<int> idx;
  for (int j = 0; j < kNumJoints; ++j) {
    if (a.valid[j] && b.valid[j]) idx.push_back(j);
  }
  return idx;
}

Eigen::Matrix3Xd gather(const Pose3D& p, const std::vector<int>& idx) {
  Eigen::Matrix3Xd m(3, idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const Vec3 c = p.coords[idx[i]];
    m.col(static_cast<Eigen::Index>(i)) << c.x, c.y, c.z;
  }
  return m;
}

void check_options(const MetricOptions& o) {
  if (o.auc_steps < 2) throw Error(ErrorCode::config, "AUC needs at least two thresholds");
  if (!(o.auc_max_threshold_mm >= 0.0)) throw Error(ErrorCode::config, "AUC max threshold must be non-negative");
}

std::vector<double> finite_errors(std::span<const double> errors) {
  std::vector<double> out;
  for (double e : errors) {
    if (!std::isnan(e)) out.push_back(e);
  }
  return out;
}

}  // namespace

std::array<double, kNumJoints> hip_aligned_errors(const Pose3D& pred, const Pose3D& gt, const Skeleton& skeleton) {
  const int root = skeleton.root_index();
  if (!pred.valid[root] || !gt.valid[root]) throw Error(ErrorCode::empty_evaluation, "root joint must be valid in both poses");
  std::array<double, kNumJoints> e;
  e.fill(kNaN);
  for (int j : jointly_valid(pred, gt)) {
    e[j] = norm((pred.coords[j] - pred.coords[root]) - (gt.coords[j] - gt.coords[root]));
  }
  return e;
}

double mpjpe(const Pose3D& pred, const Pose3D& gt, const Skeleton& skeleton) {
  const auto e = finite_errors(hip_aligned_errors(pred, gt, skeleton));
  if (e.empty()) throw Error(ErrorCode::empty_evaluation, "no jointly valid joints");
  double s = 0.0;
  for (double v : e) s += v;
  return s / static_cast<double>(e.size());
}

Pose3D procrustes_align(const Pose3D& pred, const Pose3D& gt, ProcrustesMode mode) {
  const auto idx = jointly_valid(pred, gt);
  if (idx.size() < 3) throw Error(ErrorCode::alignment_degenerate, "need at least three jointly valid joints");
  const Eigen::Matrix3Xd x = gather(pred, idx);
  const Eigen::Matrix3Xd y = gather(gt, idx);
  const Eigen::Vector3d mx = x.rowwise().mean();
  const Eigen::Vector3d my = y.rowwise().mean();
  const Eigen::Matrix3Xd xc = x.colwise() - mx;
  const Eigen::Matrix3Xd yc = y.colwise() - my;

  // Both point sets must span at least a plane.
  for (const Eigen::Matrix3Xd* m : {&xc, &yc}) {
    Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(*m);
    const auto s = svd.singularValues();
    if (!(s(0) > 0.0) || s(1) <= 1e-9 * s(0)) {
      throw Error(ErrorCode::alignment_degenerate, "jointly valid joints are collinear");
    }
  }

  const Eigen::Matrix3d cov = yc * xc.transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Eigen::Matrix3d r = svd.matrixU() * d * svd.matrixV().transpose();
  double s = 1.0;
  if (mode == ProcrustesMode::similarity) {
    s = (svd.singularValues().asDiagonal() * d).trace() / xc.squaredNorm();
  }
  const Eigen::Vector3d t = my - s * r * mx;

  Pose3D out = pred;
  for (int j = 0; j < kNumJoints; ++j) {
    if (!pred.valid[j]) continue;
    const Vec3 c = pred.coords[j];
    const Eigen::Vector3d v = s * r * Eigen::Vector3d(c.x, c.y, c.z) + t;
    out.coords[j] = {v.x(), v.y(), v.z()};
  }
  return out;
}

double pa_mpjpe(const Pose3D& pred, const Pose3D& gt, ProcrustesMode mode) {
  const Pose3D aligned = procrustes_align(pred, gt, mode);
  const auto idx = jointly_valid(pred, gt);
  double s = 0.0;
  for (int j : idx) s += norm(aligned.coords[j] - gt.coords[j]);
  return s / static_cast<double>(idx.size());
}

double pck_from_errors(std::span<const double> errors, double threshold_mm) {
  const auto e = finite_errors(errors);
  if (e.empty()) throw Error(ErrorCode::empty_evaluation, "no errors to score");
  std::size_t hits = 0;
  for (double v : e) hits += v < threshold_mm ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(e.size());
}

double auc_from_errors(std::span<const double> errors, double max_threshold_mm, int steps) {
  if (steps < 2) throw Error(ErrorCode::config, "AUC needs at least two thresholds");
  double s = 0.0;
  for (int i = 0; i < steps; ++i) {
    s += pck_from_errors(errors, max_threshold_mm * i / (steps - 1));
  }
  return s / steps;
}

double pck3d(const Pose3D& pred, const Pose3D& gt, double threshold_mm, const Skeleton& skeleton) {
  return pck_from_errors(hip_aligned_errors(pred, gt, skeleton), threshold_mm);
}

double auc(const Pose3D& pred, const Pose3D& gt, double max_threshold_mm, int steps, const Skeleton& skeleton) {
  return auc_from_errors(hip_aligned_errors(pred, gt, skeleton), max_threshold_mm, steps);
}

EvalReport evaluate(std::span<const Pose3D> pred, std::span<const Pose3D> gt, const MetricOptions& o,
                    const Skeleton& skeleton) {
  check_options(o);
  if (pred.size() != gt.size()) throw Error(ErrorCode::dimension, "prediction and ground-truth counts differ");
  if (pred.empty()) throw Error(ErrorCode::empty_evaluation, "no poses to evaluate");
  std::vector<double> all;
  std::array<double, kNumJoints> joint_sum{};
  std::array<int, kNumJoints> joint_count{};
  double pa_sum = 0.0;
  std::size_t pa_count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto e = hip_aligned_errors(pred[i], gt[i], skeleton);
    for (int j = 0; j < kNumJoints; ++j) {
      if (std::isnan(e[j])) continue;
      all.push_back(e[j]);
      joint_sum[j] += e[j];
      ++joint_count[j];
    }
    const auto idx = jointly_valid(pred[i], gt[i]);
    pa_sum += pa_mpjpe(pred[i], gt[i], o.procrustes) * static_cast<double>(idx.size());
    pa_count += idx.size();
  }
  if (all.empty()) throw Error(ErrorCode::empty_evaluation, "no jointly valid joints");
  EvalReport r;
  double total = 0.0;
  for (double v : all) total += v;
  r.mpjpe_mm = total / static_cast<double>(all.size());
  r.pa_mpjpe_mm = pa_sum / static_cast<double>(pa_count);
  r.pck_percent = pck_from_errors(all, o.pck_threshold_mm);
  r.auc_percent = auc_from_errors(all, o.auc_max_threshold_mm, o.auc_steps);
  for (int j = 0; j < kNumJoints; ++j) r.per_joint_errors[j] = joint_count[j] ? joint_sum[j] / joint_count[j] : kNaN;
  r.poses = static_cast<int>(pred.size());
  return r;
}

std::vector<GroupReport> evaluate_grouped(std::span<const Pose3D> pred, std::span<const Pose3D> gt,
                                          std::span<const std::string> groups, const MetricOptions& o,
                                          const Skeleton& skeleton) {
  if (groups.size() != pred.size()) throw Error(ErrorCode::dimension, "one group label per pose expected");
  std::vector<std::string> order;
  for (const auto& g : groups) {
    if (std::find(order.begin(), order.end(), g) == order.end()) order.push_back(g);
  }
  std::vector<GroupReport> out;
  for (const auto& g : order) {
    std::vector<Pose3D> p, t;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (groups[i] == g) {
        p.push_back(pred[i]);
        t.push_back(gt[i]);
      }
    }
    out.push_back({g, evaluate(p, t, o, skeleton)});
  }
  out.push_back({"Average", evaluate(pred, gt, o, skeleton)});
  return out;
}

nlohmann::json to_json(const EvalReport& r, const Skeleton& skeleton) {
  nlohmann::json per_joint = nlohmann::json::object();
  for (int j = 0; j < kNumJoints; ++j) {
    per_joint[skeleton.joint_names()[j]] = std::isnan(r.per_joint_errors[j]) ? nlohmann::json(nullptr)
                                                                             : nlohmann::json(r.per_joint_errors[j]);
  }
  return {{"mpjpe_mm", r.mpjpe_mm},       {"pa_mpjpe_mm", r.pa_mpjpe_mm},
          {"pck_percent", r.pck_percent}, {"auc_percent", r.auc_percent},
          {"poses", r.poses},             {"alignment", r.alignment == Alignment::hip ? "hip" : "procrustes"},
          {"per_joint_mm", per_joint}};
}

}  // namespace hemlets
