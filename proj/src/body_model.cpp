#include "hemlets/body_model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <numbers>

#include "hemlets/error.hpp"

namespace hemlets {

namespace {

Mat3 hat(const Vector3& v) {
  Mat3 k;
  k << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return k;
}

Vector3 vertex(const std::vector<double>& v, int i) { return {v[3 * i], v[3 * i + 1], v[3 * i + 2]}; }

// SMPL kinematic tree.
constexpr std::array<int, kBodyJoints> kSmplParents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8,
                                                       9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};

}  // namespace

Mat3 rodrigues(const Vector3& w) {
  const double angle = w.norm();
  const Mat3 k = hat(w);
  if (angle < 1e-8) {
    // Second-order expansion; exact identity for the zero vector.
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const Mat3 kn = k / angle;
  return Mat3::Identity() + std::sin(angle) * kn + (1.0 - std::cos(angle)) * kn * kn;
}

Vector3 rotation_to_axis_angle(const Mat3& r) {
  const double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double angle = std::acos(c);
  const Vector3 v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  if (angle < 1e-8) return 0.5 * v;
  if (std::numbers::pi - angle > 1e-6) return angle / (2.0 * std::sin(angle)) * v;
  // Near a half turn: axis from the largest column of (R + I) / 2 = a a^T.
  const Mat3 b = 0.5 * (r + Mat3::Identity());
  int col = 0;
  b.diagonal().maxCoeff(&col);
  Vector3 axis = b.col(col) / std::sqrt(std::max(b(col, col), 1e-300));
  axis.normalize();
  if (axis.dot(v) < 0.0) axis = -axis;
  return angle * axis;
}

Mat3 project_to_so3(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

void RigTemplate::validate() const {
  const auto v = static_cast<std::size_t>(num_vertices);
  if (num_vertices <= 0 || vertices.size() != 3 * v || regressor.size() != kBodyJoints * v ||
      weights.size() != v * kBodyJoints || shape_basis.size() != v * 3 * kShapeCoeffs) {
    throw Error(ErrorCode::invalid_rig, "rig array sizes do not match the vertex count");
  }
  for (std::size_t i = 0; i < v; ++i) {
    double s = 0.0;
    for (int j = 0; j < kBodyJoints; ++j) {
      const double w = weights[i * kBodyJoints + j];
      if (w < 0.0 || !std::isfinite(w)) throw Error(ErrorCode::invalid_rig, "negative or non-finite skinning weight");
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-9) throw Error(ErrorCode::invalid_rig, "skinning weights must sum to one");
  }
  int roots = 0;
  for (int j = 0; j < kBodyJoints; ++j) {
    if (parents[j] == -1) {
      ++roots;
      continue;
    }
    if (parents[j] < 0 || parents[j] >= kBodyJoints || parents[j] == j) {
      throw Error(ErrorCode::invalid_rig, "parent index out of range");
    }
  }
  if (roots != 1) throw Error(ErrorCode::invalid_rig, "rig must have exactly one root");
  for (int j = 0; j < kBodyJoints; ++j) {
    int k = j, steps = 0;
    while (parents[k] != -1) {
      k = parents[k];
      if (++steps > kBodyJoints) throw Error(ErrorCode::invalid_rig, "cyclic parent graph");
    }
  }
  for (const auto& f : faces) {
    for (int idx : f) {
      if (idx < 0 || idx >= num_vertices) throw Error(ErrorCode::invalid_rig, "face index out of range");
    }
  }
}

std::vector<double> shaped_vertices(const BodyParams& params, const RigTemplate& rig) {
  std::vector<double> out = rig.vertices;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double* basis = &rig.shape_basis[i * kShapeCoeffs];
    for (int b = 0; b < kShapeCoeffs; ++b) {
      if (params.beta[b] != 0.0) out[i] += params.beta[b] * basis[b];
    }
  }
  return out;
}

namespace {

std::array<Vector3, kBodyJoints> regress_joints(const std::vector<double>& verts, const RigTemplate& rig) {
  std::array<Vector3, kBodyJoints> joints;
  for (int j = 0; j < kBodyJoints; ++j) {
    Vector3 s = Vector3::Zero();
    const double* w = &rig.regressor[static_cast<std::size_t>(j) * rig.num_vertices];
    for (int v = 0; v < rig.num_vertices; ++v) {
      if (w[v] != 0.0) s += w[v] * vertex(verts, v);
    }
    joints[j] = s;
  }
  return joints;
}

// Processing order with every parent before its children.
std::vector<int> topological_order(const RigTemplate& rig) {
  std::vector<int> order;
  std::vector<bool> placed(kBodyJoints, false);
  while (static_cast<int>(order.size()) < kBodyJoints) {
    bool progressed = false;
    for (int j = 0; j < kBodyJoints; ++j) {
      if (placed[j]) continue;
      if (rig.parents[j] == -1 || placed[rig.parents[j]]) {
        order.push_back(j);
        placed[j] = true;
        progressed = true;
      }
    }
    if (!progressed) throw Error(ErrorCode::invalid_rig, "cyclic parent graph");
  }
  return order;
}

struct Posing {
  std::array<RigidTransform, kBodyJoints> global;
  /// Global transform relative to the shaped rest pose: x -> R x + t.
  std::array<RigidTransform, kBodyJoints> relative;
};

Posing pose_rig(const BodyParams& params, const RigTemplate& rig, const std::array<Vector3, kBodyJoints>& rest) {
  Posing p;
  for (int j : topological_order(rig)) {
    const Mat3 local = rodrigues(params.theta[j]);
    const int parent = rig.parents[j];
    if (parent == -1) {
      p.global[j] = {local, rest[j]};
      p.relative[j] = {local, rest[j] - local * rest[j]};
      continue;
    }
    const RigidTransform& gp = p.global[parent];
    const RigidTransform& ap = p.relative[parent];
    p.global[j] = {gp.rotation * local, gp.rotation * (rest[j] - rest[parent]) + gp.translation};
    // Built from the parent's relative transform so that zero rotations give exact zeros.
    p.relative[j] = {gp.rotation * local, gp.rotation * (rest[j] - local * rest[j]) + ap.translation};
  }
  return p;
}

}  // namespace

std::array<Vector3, kBodyJoints> shaped_rest_joints(const BodyParams& params, const RigTemplate& rig) {
  return regress_joints(shaped_vertices(params, rig), rig);
}

std::array<RigidTransform, kBodyJoints> forward_kinematics(const BodyParams& params, const RigTemplate& rig) {
  rig.validate();
  return pose_rig(params, rig, shaped_rest_joints(params, rig)).global;
}

BodyMesh skin(const BodyParams& params, const RigTemplate& rig, kernels::Exec exec) {
  rig.validate();
  const std::vector<double> shaped = shaped_vertices(params, rig);
  const auto rest = regress_joints(shaped, rig);
  const Posing posing = pose_rig(params, rig, rest);

  std::vector<double> transforms(12 * kBodyJoints);
  for (int j = 0; j < kBodyJoints; ++j) {
    const RigidTransform& a = posing.relative[j];
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) transforms[12 * j + 3 * r + c] = a.rotation(r, c);
      transforms[12 * j + 9 + r] = a.translation(r);
    }
  }
  BodyMesh mesh;
  mesh.vertices.resize(shaped.size());
  kernels::blend_skin(exec, shaped, rig.weights, rig.num_vertices, kBodyJoints, transforms, mesh.vertices);
  for (int j = 0; j < kBodyJoints; ++j) mesh.joints[j] = posing.global[j].translation;
  return mesh;
}

RigTemplate make_synthetic_rig() {
  // Rest joints in metres, y up, pelvis at the origin; "left" is +x.
  const std::array<Vector3, kBodyJoints> joints = {
      Vector3(0.00, 0.00, 0.00),   Vector3(0.09, -0.08, 0.00),  Vector3(-0.09, -0.08, 0.00),
      Vector3(0.00, 0.11, -0.02),  Vector3(0.10, -0.48, 0.01),  Vector3(-0.10, -0.48, 0.01),
      Vector3(0.00, 0.25, -0.01),  Vector3(0.10, -0.88, -0.03), Vector3(-0.10, -0.88, -0.03),
      Vector3(0.00, 0.31, 0.00),   Vector3(0.10, -0.93, 0.10),  Vector3(-0.10, -0.93, 0.10),
      Vector3(0.00, 0.52, -0.01),  Vector3(0.08, 0.42, -0.01),  Vector3(-0.08, 0.42, -0.01),
      Vector3(0.00, 0.66, 0.03),   Vector3(0.18, 0.45, -0.02),  Vector3(-0.18, 0.45, -0.02),
      Vector3(0.44, 0.45, -0.03),  Vector3(-0.44, 0.45, -0.03), Vector3(0.69, 0.45, -0.02),
      Vector3(-0.69, 0.45, -0.02), Vector3(0.78, 0.44, -0.02),  Vector3(-0.78, 0.44, -0.02)};
  const std::array<double, kBodyJoints> radius = {0.12, 0.08, 0.08, 0.11, 0.06, 0.06, 0.11, 0.045,
                                                  0.045, 0.12, 0.04, 0.04, 0.05, 0.06, 0.06, 0.09,
                                                  0.05, 0.05, 0.04, 0.04, 0.03, 0.03, 0.03, 0.03};

  RigTemplate rig;
  rig.parents = kSmplParents;

  // Ring of four points around `center` perpendicular to `axis`.
  std::vector<Vector3> ring_centers;
  auto add_ring = [&](const Vector3& center, Vector3 axis, double r) {
    if (axis.norm() < 1e-12) axis = Vector3::UnitY();
    axis.normalize();
    Vector3 u = axis.cross(std::abs(axis.y()) < 0.9 ? Vector3::UnitY() : Vector3::UnitX()).normalized();
    const Vector3 w = axis.cross(u);
    for (const Vector3& d : {u, w, Vector3(-u), Vector3(-w)}) {
      const Vector3 p = center + r * d;
      rig.vertices.insert(rig.vertices.end(), {p.x(), p.y(), p.z()});
      ring_centers.push_back(center);
    }
  };

  auto bone_axis = [&](int j) {
    return rig.parents[j] == -1 ? Vector3(Vector3::UnitY()) : Vector3(joints[j] - joints[rig.parents[j]]);
  };
  for (int j = 0; j < kBodyJoints; ++j) add_ring(joints[j], bone_axis(j), radius[j]);
  // Mid rings on every bone (parent -> child), indexed by the child joint.
  std::array<int, kBodyJoints> mid_ring{};
  for (int c = 1; c < kBodyJoints; ++c) {
    const int p = rig.parents[c];
    mid_ring[c] = static_cast<int>(rig.vertices.size() / 3);
    add_ring(0.5 * (joints[p] + joints[c]), joints[c] - joints[p], 0.5 * (radius[p] + radius[c]));
  }
  rig.num_vertices = static_cast<int>(rig.vertices.size() / 3);
  const int nv = rig.num_vertices;

  rig.weights.assign(static_cast<std::size_t>(nv) * kBodyJoints, 0.0);
  rig.regressor.assign(static_cast<std::size_t>(kBodyJoints) * nv, 0.0);
  for (int j = 0; j < kBodyJoints; ++j) {
    for (int q = 0; q < 4; ++q) {
      const int v = 4 * j + q;
      rig.regressor[static_cast<std::size_t>(j) * nv + v] = 0.25;
      const int p = rig.parents[j];
      if (p == -1) {
        rig.weights[static_cast<std::size_t>(v) * kBodyJoints + j] = 1.0;
      } else {
        rig.weights[static_cast<std::size_t>(v) * kBodyJoints + j] = 0.5;
        rig.weights[static_cast<std::size_t>(v) * kBodyJoints + p] = 0.5;
      }
    }
  }
  for (int c = 1; c < kBodyJoints; ++c) {
    for (int q = 0; q < 4; ++q) {
      // Mid-bone vertices follow the bone's driving (parent) joint only.
      rig.weights[static_cast<std::size_t>(mid_ring[c] + q) * kBodyJoints + rig.parents[c]] = 1.0;
    }
  }

  rig.shape_basis.assign(static_cast<std::size_t>(nv) * 3 * kShapeCoeffs, 0.0);
  for (int v = 0; v < nv; ++v) {
    const Vector3 p = vertex(rig.vertices, v);
    const Vector3 radial = p - ring_centers[v];
    for (int b = 0; b < kShapeCoeffs; ++b) {
      Vector3 off;
      switch (b) {
        case 0: off = 0.2 * radial; break;                 // girth
        case 1: off = Vector3(0.0, 0.03 * p.y(), 0.0); break;  // height
        case 2: off = Vector3(0.03 * p.x(), 0.0, 0.0); break;  // width
        default: {
          const double phase = (b + 1) * (1.3 * p.x() + 0.7 * p.y() + 1.1 * p.z());
          off = 0.005 * Vector3(std::sin(phase), std::sin(phase + 1.0), std::sin(phase + 2.0));
        }
      }
      for (int d = 0; d < 3; ++d) rig.shape_basis[(static_cast<std::size_t>(v) * 3 + d) * kShapeCoeffs + b] = off(d);
    }
  }

  // Tubes: joint ring of parent -> mid ring -> joint ring of child.
  auto connect = [&](int a0, int b0) {
    for (int q = 0; q < 4; ++q) {
      const int a = a0 + q, a1 = a0 + (q + 1) % 4, b = b0 + q, b1 = b0 + (q + 1) % 4;
      rig.faces.push_back({a, b, b1});
      rig.faces.push_back({a, b1, a1});
    }
  };
  for (int c = 1; c < kBodyJoints; ++c) {
    connect(4 * rig.parents[c], mid_ring[c]);
    connect(mid_ring[c], 4 * c);
  }
  rig.validate();
  return rig;
}

Container rig_to_container(const RigTemplate& rig) {
  rig.validate();
  const auto nv = static_cast<std::uint32_t>(rig.num_vertices);
  Container c;
  c.add("rig.vertices", {nv, 3}, rig.vertices);
  c.add("rig.regressor", {kBodyJoints, nv}, rig.regressor);
  std::vector<double> parents(rig.parents.begin(), rig.parents.end());
  c.add("rig.parents", {kBodyJoints}, parents);
  c.add("rig.weights", {nv, kBodyJoints}, rig.weights);
  c.add("rig.shape_basis", {nv, 3, kShapeCoeffs}, rig.shape_basis);
  std::vector<double> faces;
  for (const auto& f : rig.faces) faces.insert(faces.end(), f.begin(), f.end());
  c.add("rig.faces", {static_cast<std::uint32_t>(rig.faces.size()), 3}, faces);
  return c;
}

RigTemplate rig_from_container(const Container& c) {
  RigTemplate rig;
  const Tensor& verts = c.at("rig.vertices");
  if (verts.dims.size() != 2 || verts.dims[1] != 3) throw Error(ErrorCode::invalid_rig, "rig.vertices must be V x 3");
  rig.num_vertices = static_cast<int>(verts.dims[0]);
  rig.vertices = verts.as_double();
  rig.regressor = c.at("rig.regressor").as_double();
  const auto parents = c.at("rig.parents").as_double();
  if (parents.size() != kBodyJoints) throw Error(ErrorCode::invalid_rig, "rig.parents must have 24 entries");
  for (int j = 0; j < kBodyJoints; ++j) rig.parents[j] = static_cast<int>(parents[j]);
  rig.weights = c.at("rig.weights").as_double();
  rig.shape_basis = c.at("rig.shape_basis").as_double();
  if (const Tensor* f = c.find("rig.faces")) {
    const auto v = f->as_double();
    for (std::size_t i = 0; i + 2 < v.size(); i += 3) {
      rig.faces.push_back({static_cast<int>(v[i]), static_cast<int>(v[i + 1]), static_cast<int>(v[i + 2])});
    }
  }
  // float32 storage breaks exact row sums; renormalise.
  if (rig.weights.size() == static_cast<std::size_t>(rig.num_vertices) * kBodyJoints) {
    for (int v = 0; v < rig.num_vertices; ++v) {
      double s = 0.0;
      for (int j = 0; j < kBodyJoints; ++j) s += rig.weights[static_cast<std::size_t>(v) * kBodyJoints + j];
      if (s > 0.0) {
        for (int j = 0; j < kBodyJoints; ++j) rig.weights[static_cast<std::size_t>(v) * kBodyJoints + j] /= s;
      }
    }
  }
  rig.validate();
  return rig;
}

void write_obj(const std::filesystem::path& path, std::span<const double> vertices,
               std::span<const std::array<int, 3>> faces) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  f.precision(9);
  for (std::size_t i = 0; i + 2 < vertices.size(); i += 3) {
    f << "v " << vertices[i] << ' ' << vertices[i + 1] << ' ' << vertices[i + 2] << '\n';
  }
  for (const auto& t : faces) f << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  if (!f) throw Error(ErrorCode::io, "write failed for " + path.string());
}

std::vector<double> pose_rotations(const BodyParams& params) {
  std::vector<double> out(9 * kBodyJoints);
  for (int j = 0; j < kBodyJoints; ++j) {
    const Mat3 r = rodrigues(params.theta[j]);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) out[9 * j + 3 * a + b] = r(a, b);
    }
  }
  return out;
}

}  // namespace hemlets
