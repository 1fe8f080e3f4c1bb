#include "hemlets/heatmap_codec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "hemlets/error.hpp"

namespace hemlets {

namespace {

bool outside(Vec2 p, int height, int width) {
  return p.x < 0.0 || p.y < 0.0 || p.x > width - 1 || p.y > height - 1;
}

void check_options(const EncodeOptions& o) {
  if (o.grid.height <= 0 || o.grid.width <= 0) throw Error(ErrorCode::config, "grid dimensions must be positive");
  if (!(o.sigma > 0.0)) throw Error(ErrorCode::config, "sigma must be positive");
}

void set_mask(PartHeatmaps& s, int part, int layer) {
  auto m = s.layer_mask(part, layer);
  std::fill(m.begin(), m.end(), std::uint8_t{1});
}

void render(PartHeatmaps& s, const std::vector<kernels::GaussianStamp>& stamps, const EncodeOptions& o) {
  kernels::render_gaussian_stack(o.exec, s.values, s.parts * s.layers, s.height, s.width, stamps,
                                 {o.sigma, o.truncate});
}

kernels::GaussianStamp stamp(const PartHeatmaps& s, int part, int layer, Vec2 at) {
  return {part * s.layers + layer, at.x, at.y};
}

}  // namespace

PartHeatmaps::PartHeatmaps(int parts_, int layers_, int height_, int width_)
    : parts(parts_),
      layers(layers_),
      height(height_),
      width(width_),
      values(static_cast<std::size_t>(parts_) * layers_ * height_ * width_, 0.0),
      mask(values.size(), 0),
      out_of_frame(parts_, false) {}

bool PartHeatmaps::layer_supervised(int part, int l) const {
  auto m = layer_mask(part, l);
  return std::any_of(m.begin(), m.end(), [](std::uint8_t v) { return v != 0; });
}

int tri_state(double z_parent, double z_child, double epsilon) {
  const double d = z_parent - z_child;
  if (d > epsilon) return 1;
  if (d < -epsilon) return -1;
  return 0;
}

AdaptiveEpsilon adaptive_epsilon(const Pose3D& pose, int part_index, const Skeleton& skeleton) {
  const double len = part_length(pose, part_index, skeleton);
  if (!(len > 0.0)) return {0.0, true};
  return {0.5 * len, false};
}

std::vector<std::optional<int>> part_polarities(const Pose3D& pose, const Skeleton& skeleton) {
  std::vector<std::optional<int>> out(skeleton.num_parts());
  for (int k = 0; k < skeleton.num_parts(); ++k) {
    const Part& p = skeleton.parts()[k];
    if (!pose.valid[p.parent] || !pose.valid[p.child]) continue;
    const double eps = adaptive_epsilon(pose, k, skeleton).value;
    out[k] = tri_state(pose.coords[p.parent].z, pose.coords[p.child].z, eps);
  }
  return out;
}

HeatmapGrid render_gaussian(Vec2 center, GridSize grid, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::config, "sigma must be positive");
  if (grid.height <= 0 || grid.width <= 0) throw Error(ErrorCode::config, "grid dimensions must be positive");
  HeatmapGrid g{grid.height, grid.width, std::vector<double>(static_cast<std::size_t>(grid.height) * grid.width, 0.0),
                outside(center, grid.height, grid.width)};
  const kernels::GaussianStamp s{0, center.x, center.y};
  kernels::render_gaussian_stack(kernels::Exec::serial, g.values, 1, grid.height, grid.width, {&s, 1}, {sigma, 3.0});
  return g;
}

HeatmapTriplets encode_hemlets_labeled(const Pose2D& pose2d, std::span<const std::optional<int>> polarity,
                                       const Skeleton& skeleton, const EncodeOptions& options) {
  check_options(options);
  if (static_cast<int>(polarity.size()) != skeleton.num_parts()) {
    throw Error(ErrorCode::dimension, "one polarity label per part expected");
  }
  HeatmapTriplets out(skeleton.num_parts(), 3, options.grid.height, options.grid.width);
  std::vector<kernels::GaussianStamp> stamps;
  for (int k = 0; k < skeleton.num_parts(); ++k) {
    const Part& part = skeleton.parts()[k];
    if (!pose2d.valid[part.parent] || !pose2d.valid[part.child]) continue;
    const Vec2 p = pose2d.coords[part.parent];
    const Vec2 c = pose2d.coords[part.child];
    out.out_of_frame[k] = outside(p, out.height, out.width) || outside(c, out.height, out.width);

    if (const auto& r = polarity[k]) {
      if (*r < -1 || *r > 1) throw Error(ErrorCode::invalid_input, "polarity must be -1, 0 or +1");
      stamps.push_back(stamp(out, k, polarity_layer(0), p));
      stamps.push_back(stamp(out, k, polarity_layer(*r), c));
      for (int l = 0; l < 3; ++l) set_mask(out, k, l);
    } else if (options.unknown_policy == UnknownMaskPolicy::polarity_layers) {
      stamps.push_back(stamp(out, k, polarity_layer(0), p));
      set_mask(out, k, polarity_layer(0));
    }
  }
  render(out, stamps, options);
  return out;
}

HeatmapTriplets encode_hemlets(const Pose3D& pose3d, const Pose2D& pose2d, const Skeleton& skeleton,
                               const EncodeOptions& options) {
  const auto labels = part_polarities(pose3d, skeleton);
  return encode_hemlets_labeled(pose2d, labels, skeleton, options);
}

int decode_hemlets_polarity(const HeatmapTriplets& t, int part_index, double presence_threshold) {
  if (t.layers != 3) throw Error(ErrorCode::dimension, "triplet stack must have three layers");
  if (part_index < 0 || part_index >= t.parts) throw Error(ErrorCode::invalid_input, "part index out of range");
  if (!t.layer_supervised(part_index, polarity_layer(-1)) || !t.layer_supervised(part_index, polarity_layer(1))) {
    throw Error(ErrorCode::unknown_polarity, "part " + std::to_string(part_index) + " is masked");
  }
  const auto neg = t.layer(part_index, polarity_layer(-1));
  const auto zero = t.layer(part_index, polarity_layer(0));
  const auto pos = t.layer(part_index, polarity_layer(1));

  std::size_t best_idx = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < neg.size(); ++i) {
    const double v = std::max(neg[i], pos[i]);
    if (v > best) {
      best = v;
      best_idx = i;
    }
  }
  if (best >= presence_threshold) {
    if (neg[best_idx] == pos[best_idx]) {
      throw Error(ErrorCode::unknown_polarity, "tied polarity responses");
    }
    return neg[best_idx] > pos[best_idx] ? -1 : 1;
  }
  const double zero_peak = *std::max_element(zero.begin(), zero.end());
  if (zero_peak >= presence_threshold) return 0;
  throw Error(ErrorCode::unknown_polarity, "no joint response in part " + std::to_string(part_index));
}

int five_state_bin(double a) {
  const double m = std::abs(a);
  const int band = m <= 30.0 ? 0 : (m < 60.0 ? 1 : 2);
  return a > 0.0 ? 2 + band : 2 - band;
}

PartHeatmaps encode_5s(const Pose3D& pose3d, const Pose2D& pose2d, const Skeleton& skeleton,
                       const EncodeOptions& options) {
  check_options(options);
  PartHeatmaps out(skeleton.num_parts(), 5, options.grid.height, options.grid.width);
  std::vector<kernels::GaussianStamp> stamps;
  for (int k = 0; k < skeleton.num_parts(); ++k) {
    const Part& part = skeleton.parts()[k];
    if (!pose2d.valid[part.parent] || !pose2d.valid[part.child]) continue;
    if (!pose3d.valid[part.parent] || !pose3d.valid[part.child]) continue;
    const Vec2 p = pose2d.coords[part.parent];
    const Vec2 c = pose2d.coords[part.child];
    out.out_of_frame[k] = outside(p, out.height, out.width) || outside(c, out.height, out.width);
    const int bin = adaptive_epsilon(pose3d, k, skeleton).degenerate
                        ? 2
                        : five_state_bin(signed_tilt_angle(pose3d, k, skeleton));
    stamps.push_back(stamp(out, k, 2, p));
    stamps.push_back(stamp(out, k, bin, c));
    for (int l = 0; l < 5; ++l) set_mask(out, k, l);
  }
  render(out, stamps, options);
  return out;
}

PartHeatmaps encode_2s(const Pose3D& pose3d, const Pose2D& pose2d, const Skeleton& skeleton,
                       const EncodeOptions& options) {
  check_options(options);
  PartHeatmaps out(skeleton.num_parts(), 3, options.grid.height, options.grid.width);
  std::vector<kernels::GaussianStamp> stamps;
  const auto labels = part_polarities(pose3d, skeleton);
  for (int k = 0; k < skeleton.num_parts(); ++k) {
    const Part& part = skeleton.parts()[k];
    if (!pose2d.valid[part.parent] || !pose2d.valid[part.child] || !labels[k]) continue;
    const Vec2 p = pose2d.coords[part.parent];
    const Vec2 c = pose2d.coords[part.child];
    out.out_of_frame[k] = outside(p, out.height, out.width) || outside(c, out.height, out.width);
    // r = +1: child closer. The closer joint goes to the positive layer.
    const int r = *labels[k];
    stamps.push_back(stamp(out, k, polarity_layer(-r), p));
    stamps.push_back(stamp(out, k, polarity_layer(r), c));
    for (int l = 0; l < 3; ++l) set_mask(out, k, l);
  }
  render(out, stamps, options);
  return out;
}

JointHeatmaps render_joint_heatmaps(const Pose2D& pose2d, GridSize grid, double sigma, kernels::Exec exec) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::config, "sigma must be positive");
  JointHeatmaps out{kNumJoints, grid.height, grid.width,
                    std::vector<double>(static_cast<std::size_t>(kNumJoints) * grid.height * grid.width, 0.0)};
  std::vector<kernels::GaussianStamp> stamps;
  for (int n = 0; n < kNumJoints; ++n) {
    if (pose2d.valid[n]) stamps.push_back({n, pose2d.coords[n].x, pose2d.coords[n].y});
  }
  kernels::render_gaussian_stack(exec, out.values, kNumJoints, grid.height, grid.width, stamps, {sigma, 3.0});
  return out;
}

VolumetricHeatmap render_volumetric_target(const Pose3D& pose, const VolumetricOptions& o) {
  for (double s : o.sigma_xyz) {
    if (!(s > 0.0)) throw Error(ErrorCode::config, "sigma components must be positive");
  }
  const VolumeDims d = o.dims;
  if (d.depth <= 0 || d.height <= 0 || d.width <= 0) throw Error(ErrorCode::config, "volume dims must be positive");
  VolumetricHeatmap out;
  out.channels = kNumJoints;
  out.dims = d;
  out.values.assign(out.volume_size() * kNumJoints, 0.0);
  out.out_of_volume.assign(kNumJoints, false);
  std::vector<kernels::VolumeStamp> centers(kNumJoints);
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  for (int n = 0; n < kNumJoints; ++n) {
    if (!pose.valid[n]) {
      centers[n] = {nan, nan, nan};
      continue;
    }
    const Vec3 c = pose.coords[n];
    centers[n] = {c.x, c.y, c.z};
    out.out_of_volume[n] = c.x < 0 || c.y < 0 || c.z < 0 || c.x > d.width - 1 || c.y > d.height - 1 ||
                           c.z > d.depth - 1;
  }
  kernels::render_volume_stack(o.exec, out.values, kNumJoints, d.depth, d.height, d.width, centers, o.sigma_xyz,
                               o.truncate);
  return out;
}

PartHeatmaps mirror_part_heatmaps(const PartHeatmaps& s, const Skeleton& skeleton) {
  if (s.parts != skeleton.num_parts()) throw Error(ErrorCode::dimension, "part count mismatch");
  PartHeatmaps out(s.parts, s.layers, s.height, s.width);
  for (int k = 0; k < s.parts; ++k) {
    const int m = skeleton.mirror_part(k);
    out.out_of_frame[m] = s.out_of_frame[k];
    for (int l = 0; l < s.layers; ++l) {
      const std::size_t src = s.offset(k, l), dst = out.offset(m, l);
      for (int y = 0; y < s.height; ++y) {
        for (int x = 0; x < s.width; ++x) {
          const std::size_t a = static_cast<std::size_t>(y) * s.width + x;
          const std::size_t b = static_cast<std::size_t>(y) * s.width + (s.width - 1 - x);
          out.values[dst + b] = s.values[src + a];
          out.mask[dst + b] = s.mask[src + a];
        }
      }
    }
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, std::span<const double> plane, int height, int width) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  f << "P5\n" << width << ' ' << height << "\n255\n";
  std::vector<unsigned char> row(width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double v = std::clamp(plane[static_cast<std::size_t>(y) * width + x], 0.0, 1.0);
      row[x] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    f.write(reinterpret_cast<const char*>(row.data()), width);
  }
  if (!f) throw Error(ErrorCode::io, "write failed for " + path.string());
}

}  // namespace hemlets
