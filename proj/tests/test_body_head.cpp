#include <doctest.h>

#include <cmath>
#include <random>

#include "hemlets/body_head.hpp"
#include "hemlets/error.hpp"

using namespace hemlets;

namespace {

double mean_vertex_error(const BodyParams& a, const BodyParams& b, const RigTemplate& rig) {
  const auto x = skin(a, rig).vertices, y = skin(b, rig).vertices;
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); i += 3)
    s += std::hypot(x[i] - y[i], x[i + 1] - y[i + 1], x[i + 2] - y[i + 2]);
  return s / (x.size() / 3);
}

}  // namespace

TEST_CASE("untrained head is not ready") {
  const BodyHead head;
  CHECK_FALSE(head.ready());
  try {
    head.predict(Pose3D::all_valid(), {});
    FAIL("predict on an untrained head");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::not_ready);
  }
}

TEST_CASE("identity head on zero input gives zero shape and identity rotations") {
  const BodyHead head = BodyHead::identity(5);
  Pose3D zero = Pose3D::all_valid();
  const std::vector<double> features(5, 0.0);
  const BodyParams p = head.predict(zero, features);
  for (double b : p.beta) CHECK(b == 0.0);
  for (const auto& t : p.theta) CHECK(t.norm() == 0.0);
}

TEST_CASE("memorisation of 50 pairs drops below the pinned bound") {
  const RigTemplate rig = make_synthetic_rig();
  const auto data = make_body_samples(rig, 50, 8, 3);
  BodyHead head = BodyHead::identity(8);
  const BodyTrainLog log = train_body_head(head, data, {});
  REQUIRE(log.loss.size() == 300);
  CHECK(log.loss.front() > 40.0);
  CHECK(log.loss.back() < 27.0);
}

TEST_CASE("ground-truth pose matters more than ground-truth shape") {
  const RigTemplate rig = make_synthetic_rig();
  const auto train = make_body_samples(rig, 50, 8, 3);
  BodyHead head = BodyHead::identity(8);
  train_body_head(head, train, {});
  double with_theta = 0.0, with_beta = 0.0;
  for (const auto& s : make_body_samples(rig, 30, 8, 99)) {
    const BodyParams pred = head.predict(s.joints3d_mm, s.features);
    BodyParams a = pred, b = pred;
    a.theta = s.params.theta;
    b.beta = s.params.beta;
    with_theta += mean_vertex_error(a, s.params, rig);
    with_beta += mean_vertex_error(b, s.params, rig);
  }
  CHECK(with_theta < 0.5 * with_beta);
}

TEST_CASE("l_mesh gradient matches central differences") {
  const RigTemplate rig = make_synthetic_rig();
  const auto data = make_body_samples(rig, 3, 4, 5);
  BodyHead head = BodyHead::identity(4);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 0.05);
  for (ad::DiffArray p : head.parameters())
    for (double& v : p.mutable_values()) v += g(rng);
  std::vector<const BodyTrainSample*> batch;
  for (const auto& s : data) batch.push_back(&s);

  ad::backward(body_batch_loss(head, batch, 0.7).l_mesh);
  double worst = 0.0;
  const double step = 1e-6;
  for (ad::DiffArray p : head.parameters()) {
    const std::vector<double> grad(p.grad().begin(), p.grad().end());
    auto v = p.mutable_values();
    for (std::size_t i = 0; i < v.size(); i += 7) {
      const double x = v[i];
      v[i] = x + step;
      const double up = body_batch_loss(head, batch, 0.7).l_mesh.item();
      v[i] = x - step;
      const double down = body_batch_loss(head, batch, 0.7).l_mesh.item();
      v[i] = x;
      const double fd = (up - down) / (2 * step);
      worst = std::max(worst, std::abs(fd - grad[i]) / std::max(1.0, std::abs(fd)));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("rig joints map onto the canonical skeleton") {
  const RigTemplate rig = make_synthetic_rig();
  const BodyMesh m = skin(BodyParams{}, rig);
  const Pose3D p = body_joints_to_pose(m.joints);
  const Skeleton& sk = canonical_skeleton();
  for (int j = 0; j < kNumJoints; ++j) CHECK(p.valid[j]);
  CHECK(p.coords[sk.joint_index("head_top")].y < p.coords[sk.joint_index("pelvis")].y);
  CHECK(p.coords[sk.joint_index("r_ankle")].y > p.coords[sk.joint_index("pelvis")].y);
}
