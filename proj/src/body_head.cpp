#include "hemlets/body_head.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "hemlets/error.hpp"
#include "hemlets/synthetic.hpp"

namespace hemlets {

using ad::DiffArray;

BodyHead BodyHead::identity(int feature_dim) {
  if (feature_dim < 0) throw Error(ErrorCode::config, "feature dimension must be non-negative");
  BodyHead h;
  h.feature_dim_ = feature_dim;
  const int in = h.input_dim();
  h.w_beta_ = DiffArray::zeros({in, kShapeCoeffs}, true);
  h.b_beta_ = DiffArray::zeros({kShapeCoeffs}, true);
  h.w_rot_ = DiffArray::zeros({in, kRotationValues}, true);
  std::vector<double> eye(kRotationValues, 0.0);
  for (int j = 0; j < kBodyJoints; ++j) {
    for (int d = 0; d < 3; ++d) eye[9 * j + 4 * d] = 1.0;
  }
  h.b_rot_ = DiffArray::variable({kRotationValues}, std::move(eye));
  return h;
}

std::vector<double> BodyHead::make_input(const Pose3D& joints3d_mm, std::span<const double> features) const {
  if (static_cast<int>(features.size()) != feature_dim_) {
    throw Error(ErrorCode::dimension, "expected " + std::to_string(feature_dim_) + " features");
  }
  std::vector<double> x;
  x.reserve(input_dim());
  for (int j = 0; j < kNumJoints; ++j) {
    const Vec3 c = joints3d_mm.valid[j] ? joints3d_mm.coords[j] : Vec3{};
    x.insert(x.end(), {c.x / 1000.0, c.y / 1000.0, c.z / 1000.0});
  }
  x.insert(x.end(), features.begin(), features.end());
  return x;
}

BodyHead::Output BodyHead::forward(const DiffArray& input) const {
  if (!ready()) throw Error(ErrorCode::not_ready, "body head is not trained");
  if (input.rank() != 2 || input.dim(1) != input_dim()) throw Error(ErrorCode::dimension, "body head input must be [B, in]");
  return {ad::add(ad::matmul(input, w_beta_), b_beta_), ad::add(ad::matmul(input, w_rot_), b_rot_)};
}

BodyParams BodyHead::predict(const Pose3D& joints3d_mm, std::span<const double> features) const {
  if (!ready()) throw Error(ErrorCode::not_ready, "body head is not trained");
  const Output out = forward(DiffArray::constant({1, input_dim()}, make_input(joints3d_mm, features)));
  BodyParams p;
  for (int b = 0; b < kShapeCoeffs; ++b) p.beta[b] = out.beta.values()[b];
  const auto r = out.rotations.values();
  for (int j = 0; j < kBodyJoints; ++j) {
    Mat3 m;
    for (int a = 0; a < 3; ++a) {
      for (int c = 0; c < 3; ++c) m(a, c) = r[9 * j + 3 * a + c];
    }
    p.theta[j] = rotation_to_axis_angle(project_to_so3(m));
  }
  return p;
}

BodyBatchLoss body_batch_loss(const BodyHead& head, std::span<const BodyTrainSample* const> batch, double l_tot) {
  std::vector<double> x, beta, rot;
  for (const BodyTrainSample* s : batch) {
    const auto in = head.make_input(s->joints3d_mm, s->features);
    x.insert(x.end(), in.begin(), in.end());
    beta.insert(beta.end(), s->params.beta.begin(), s->params.beta.end());
    const auto r = pose_rotations(s->params);
    rot.insert(rot.end(), r.begin(), r.end());
  }
  const int n = static_cast<int>(batch.size());
  const BodyHead::Output out = head.forward(DiffArray::constant({n, head.input_dim()}, std::move(x)));
  BodyBatchLoss l;
  l.l_beta = ad::abs_sum(ad::sub(out.beta, DiffArray::constant({n, kShapeCoeffs}, std::move(beta))));
  l.l_theta = ad::abs_sum(ad::sub(out.rotations, DiffArray::constant({n, BodyHead::kRotationValues}, std::move(rot))));
  l.l_mesh = ad::add(ad::add(l.l_theta, l.l_beta), DiffArray::constant({}, {l_tot * n}));
  return l;
}

BodyTrainLog train_body_head(BodyHead& head, std::span<const BodyTrainSample> data, const BodyTrainConfig& config) {
  if (!head.ready()) throw Error(ErrorCode::not_ready, "initialise the head before training");
  if (data.empty()) throw Error(ErrorCode::config, "no training pairs");
  if (!(config.learning_rate >= 0.0) || config.batch_size <= 0) throw Error(ErrorCode::config, "bad training config");

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  BodyTrainLog log;
  double lr = config.learning_rate;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1))]);
    }
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<const BodyTrainSample*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        batch.push_back(&data[order[i]]);
      }
      const BodyBatchLoss l = body_batch_loss(head, batch, config.l_tot);
      const DiffArray objective = ad::scale(l.l_mesh, 1.0 / static_cast<double>(batch.size()));
      if (!std::isfinite(objective.item())) throw Error(ErrorCode::training_diverged, "non-finite body-head loss");
      total += l.l_theta.item() + l.l_beta.item();
      ad::backward(objective);
      for (DiffArray p : head.parameters()) {
        auto v = p.mutable_values();
        const auto g = p.grad();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
      }
    }
    log.loss.push_back(total / static_cast<double>(data.size()));
    lr *= config.lr_decay;
  }
  return log;
}

Pose3D body_joints_to_pose(const std::array<Vector3, kBodyJoints>& j) {
  static constexpr std::array<int, kNumJoints> kSource = {0, 6, 9, 12, 15, -1, 16, 18, 20, 17, 19, 21, 1, 4, 7, 2, 5, 8};
  Pose3D p = Pose3D::all_valid();
  for (int n = 0; n < kNumJoints; ++n) {
    const Vector3 v = kSource[n] >= 0 ? j[kSource[n]] : Vector3(j[15] + 0.8 * (j[15] - j[12]));
    p.coords[n] = {1000.0 * v.x(), -1000.0 * v.y(), -1000.0 * v.z()};
  }
  return p;
}

std::vector<BodyTrainSample> make_body_samples(const RigTemplate& rig, int count, int feature_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<BodyTrainSample> out;
  for (int i = 0; i < count; ++i) {
    BodyTrainSample s;
    for (double& b : s.params.beta) b = gauss(rng);
    for (auto& t : s.params.theta) t = 0.3 * Vector3(gauss(rng), gauss(rng), gauss(rng));
    s.joints3d_mm = body_joints_to_pose(skin(s.params, rig).joints);
    s.features.resize(feature_dim);
    for (int f = 0; f < feature_dim; ++f) {
      s.features[f] = (f < kShapeCoeffs ? s.params.beta[f] : 0.0) + 0.1 * gauss(rng);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace hemlets
