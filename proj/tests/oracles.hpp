#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner.

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hemlets/autodiff.hpp"
#include "hemlets/body_model.hpp"
#include "hemlets/skeleton.hpp"
#include "hemlets/toy_training.hpp"

namespace hemlets::oracle {

using ad::DiffArray;

inline DiffArray random_var(std::mt19937_64& rng, ad::Shape shape, double scale = 1.0, double keep_away = 0.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(ad::shape_size(shape));
  for (double& x : v) {
    do x = g(rng);
    while (std::abs(x) < keep_away);
  }
  return DiffArray::variable(std::move(shape), std::move(v));
}

/// Largest relative deviation between backward() and central differences over all leaves.
inline double max_fd_error(std::vector<DiffArray> leaves, const std::function<DiffArray()>& f, double step = 1e-5) {
  ad::backward(f());
  double worst = 0.0;
  for (DiffArray& leaf : leaves) {
    const std::vector<double> g(leaf.grad().begin(), leaf.grad().end());
    auto v = leaf.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double x = v[i];
      v[i] = x + step;
      const double up = f().item();
      v[i] = x - step;
      const double down = f().item();
      v[i] = x;
      const double fd = (up - down) / (2 * step);
      const double err = std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-3});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

/// FD error of every autodiff primitive on one random instance.
inline std::vector<std::pair<std::string, double>> primitive_fd_errors(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  DiffArray a = random_var(rng, {3, 4});
  DiffArray b = random_var(rng, {3, 4});
  DiffArray row = random_var(rng, {4});
  DiffArray m = random_var(rng, {4, 2});
  const DiffArray w = random_var(rng, {3, 4});
  const DiffArray weights = DiffArray::constant({3, 4}, std::vector<double>(w.values().begin(), w.values().end()));

  std::vector<std::pair<std::string, double>> out;
  out.emplace_back("add", max_fd_error({a, row}, [&] { return ad::square_sum(ad::add(a, row)); }));
  out.emplace_back("sub", max_fd_error({a, b}, [&] { return ad::square_sum(ad::sub(a, b)); }));
  out.emplace_back("multiply", max_fd_error({a, b}, [&] { return ad::sum(ad::multiply(ad::multiply(a, b), weights)); }));
  out.emplace_back("scale", max_fd_error({a}, [&] { return ad::sum(ad::multiply(ad::scale(a, -1.7), weights)); }));
  out.emplace_back("matmul", max_fd_error({a, m}, [&] { return ad::square_sum(ad::matmul(a, m)); }));
  out.emplace_back("reshape", max_fd_error({a}, [&] { return ad::sum(ad::reshape(ad::multiply(a, weights), {12})); }));
  out.emplace_back("concat_columns",
                   max_fd_error({a, b}, [&] { return ad::square_sum(ad::concat_columns(a, ad::scale(b, 2.0))); }));
  out.emplace_back("abs_sum", max_fd_error({a}, [&] { return ad::abs_sum(ad::add(a, row)); }));

  DiffArray far = random_var(rng, {3, 4}, 1.0, 0.05);
  out.emplace_back("relu", max_fd_error({far}, [&] { return ad::sum(ad::multiply(ad::relu(far), weights)); }));

  DiffArray logits = random_var(rng, {2, 2, 3, 2});
  const DiffArray pw =
      DiffArray::constant({2, 2, 3, 2}, std::vector<double>(logits.values().begin(), logits.values().end()));
  for (int axes : {1, 2, 3}) {
    out.emplace_back("softmax_over_axes/" + std::to_string(axes), max_fd_error({logits}, [&] {
                       return ad::sum(ad::multiply(ad::softmax_over_axes(logits, axes, 0.8), pw));
                     }));
  }

  DiffArray plane = random_var(rng, {2, 6});
  DiffArray depth = random_var(rng, {2, 3});
  const DiffArray dw = random_var(rng, {2, 18});
  out.emplace_back("depth_plane_sum", max_fd_error({plane, depth}, [&] {
                     return ad::sum(ad::multiply(ad::depth_plane_sum(plane, depth), dw));
                   }));

  DiffArray vol = random_var(rng, {2, 24});
  const DiffArray cw = random_var(rng, {2, 3});
  out.emplace_back("expectation_over_grid", max_fd_error({vol}, [&] {
                     return ad::sum(ad::multiply(ad::expectation_over_grid(ad::softmax_over_axes(vol, 1), 2, 3, 4), cw));
                   }));
  return out;
}

/// Toy net -> soft-argmax -> 3D loss -> total objective with alpha = 0.05 on a 3x3x3 instance.
inline double composed_fd_error(std::uint64_t seed) {
  ToyDataConfig dc;
  dc.grid = {3, 3};
  dc.dims = {3, 3, 3};
  dc.train_size = 3;
  dc.val_size = 0;
  dc.seed = 100 + seed;
  const ToyDataset data = make_toy_dataset(dc);
  ToyModelConfig mc;
  mc.hidden = 4;
  mc.grid = dc.grid;
  mc.dims = dc.dims;
  mc.polarity_hints = seed % 2 == 1;
  ToyRegressor model = ToyRegressor::init(mc, seed);
  // Random biases keep every ReLU away from its kink.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  for (DiffArray& p : model.parameters())
    for (double& v : p.mutable_values()) v += g(rng);
  ToyTrainConfig tc;
  tc.alpha = 0.05;
  std::vector<const ToySample*> batch;
  for (const auto& s : data.train) batch.push_back(&s);
  return max_fd_error(model.parameters(), [&] { return toy_batch_loss(model, batch, tc).objective; });
}

/// Brute force over rotations about z at 0.1 degree steps, with and without an
/// in-plane mirror (half turn about x); scale and translation solved per angle.
/// Returns the mean joint error at the least-squares optimum on the grid.
inline double grid_pa_error(const Pose3D& pred, const Pose3D& gt, std::span<const int> joints) {
  auto vec = [](Vec3 c) { return Eigen::Vector3d(c.x, c.y, c.z); };
  Eigen::Vector3d ca = Eigen::Vector3d::Zero(), cb = Eigen::Vector3d::Zero();
  for (int j : joints) {
    ca += vec(pred.coords[j]);
    cb += vec(gt.coords[j]);
  }
  ca /= static_cast<double>(joints.size());
  cb /= static_cast<double>(joints.size());
  double best_sse = std::numeric_limits<double>::infinity(), best_err = 0.0;
  for (int mirror = 0; mirror < 2; ++mirror) {
    const Eigen::Matrix3d f = mirror ? Eigen::Matrix3d(Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitX()))
                                     : Eigen::Matrix3d::Identity();
    for (int step = 0; step < 3600; ++step) {
      const Eigen::Matrix3d r =
          Eigen::AngleAxisd(step * 0.1 * std::numbers::pi / 180.0, Eigen::Vector3d::UnitZ()).toRotationMatrix() * f;
      double num = 0.0, den = 0.0;
      for (int j : joints) {
        const Eigen::Vector3d a = r * (vec(pred.coords[j]) - ca);
        num += a.dot(vec(gt.coords[j]) - cb);
        den += a.squaredNorm();
      }
      const double s = std::max(0.0, num / den);
      double sse = 0.0, err = 0.0;
      for (int j : joints) {
        const Eigen::Vector3d d = s * (r * (vec(pred.coords[j]) - ca)) - (vec(gt.coords[j]) - cb);
        sse += d.squaredNorm();
        err += d.norm();
      }
      if (sse < best_sse) {
        best_sse = sse;
        best_err = err / static_cast<double>(joints.size());
      }
    }
  }
  return best_err;
}

/// Mean PCK over `steps` evenly spaced thresholds in [0, max_t], strict comparison.
inline double sweep_auc(std::span<const double> errors, double max_t, int steps) {
  double total = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double t = max_t * i / (steps - 1);
    int below = 0;
    for (double e : errors) below += e < t;
    total += 100.0 * below / static_cast<double>(errors.size());
  }
  return total / steps;
}

/// Explicit posing of one vertex at a time: shape offsets, regressed rest
/// joints, chained global rotations, weighted sum of rigid transforms.
inline std::vector<double> naive_skin(const BodyParams& p, const RigTemplate& rig) {
  const int v_count = rig.num_vertices;
  std::vector<Vector3> shaped(v_count);
  for (int v = 0; v < v_count; ++v) {
    for (int c = 0; c < 3; ++c) {
      double x = rig.vertices[3 * v + c];
      for (int k = 0; k < kShapeCoeffs; ++k) x += rig.shape_basis[(3 * v + c) * kShapeCoeffs + k] * p.beta[k];
      shaped[v][c] = x;
    }
  }
  std::array<Vector3, kBodyJoints> rest;
  for (int j = 0; j < kBodyJoints; ++j) {
    rest[j].setZero();
    for (int v = 0; v < v_count; ++v) rest[j] += rig.regressor[j * v_count + v] * shaped[v];
  }
  std::array<Mat3, kBodyJoints> rot;
  std::array<Vector3, kBodyJoints> pos;
  for (int j = 0; j < kBodyJoints; ++j) {
    const int parent = rig.parents[j];
    const double angle = p.theta[j].norm();
    const Mat3 local = Eigen::AngleAxisd(angle, angle > 0 ? Vector3(p.theta[j] / angle) : Vector3::UnitX())
                           .toRotationMatrix();
    if (parent < 0) {
      rot[j] = local;
      pos[j] = rest[j];
    } else {
      rot[j] = rot[parent] * local;
      pos[j] = pos[parent] + rot[parent] * (rest[j] - rest[parent]);
    }
  }
  std::vector<double> out(3 * v_count);
  for (int v = 0; v < v_count; ++v) {
    Vector3 acc = Vector3::Zero();
    for (int j = 0; j < kBodyJoints; ++j) {
      acc += rig.weights[v * kBodyJoints + j] * (rot[j] * (shaped[v] - rest[j]) + pos[j]);
    }
    for (int c = 0; c < 3; ++c) out[3 * v + c] = acc[c];
  }
  return out;
}

}  // namespace hemlets::oracle
