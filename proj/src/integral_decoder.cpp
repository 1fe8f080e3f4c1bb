#include "hemlets/integral_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hemlets/error.hpp"

namespace hemlets {

namespace {

void validate(std::span<const double> volume, std::size_t expected, const SoftArgmaxConfig& config) {
  if (volume.size() != expected || expected == 0) {
    throw Error(ErrorCode::dimension, "volume size does not match dims");
  }
  if (!(config.temperature > 0.0)) throw Error(ErrorCode::config, "temperature must be positive");
  double total = 0.0;
  for (double v : volume) {
    if (!std::isfinite(v)) throw Error(ErrorCode::invalid_input, "non-finite heatmap value");
    if (config.input == kernels::WeightMode::heatmap) {
      if (v < 0.0) throw Error(ErrorCode::invalid_input, "negative heatmap weight");
      total += v;
    }
  }
  if (config.input == kernels::WeightMode::heatmap && !(total > 0.0)) {
    throw Error(ErrorCode::invalid_input, "heatmap has zero mass");
  }
}

double frame_scale(int extent, CoordinateFrame frame) {
  if (frame == CoordinateFrame::voxel_index) return 1.0;
  return extent > 1 ? 1.0 / (extent - 1) : 0.0;
}

Vec3 to_frame(const double* xyz, VolumeDims d, CoordinateFrame frame) {
  return {xyz[0] * frame_scale(d.width, frame), xyz[1] * frame_scale(d.height, frame),
          xyz[2] * frame_scale(d.depth, frame)};
}

std::size_t volume_size(VolumeDims d) { return static_cast<std::size_t>(d.depth) * d.height * d.width; }

}  // namespace

Vec3 soft_argmax_3d(std::span<const double> volume, VolumeDims dims, const SoftArgmaxConfig& config) {
  validate(volume, volume_size(dims), config);
  double xyz[3];
  kernels::soft_argmax_batch(kernels::Exec::serial, volume, 1, dims.depth, dims.height, dims.width,
                             config.temperature, config.input, xyz);
  return to_frame(xyz, dims, config.frame);
}

Vec2 soft_argmax_2d(std::span<const double> grid, GridSize size, const SoftArgmaxConfig& config) {
  const Vec3 v = soft_argmax_3d(grid, {1, size.height, size.width}, config);
  return {v.x, v.y};
}

Vec2 soft_argmax_2d(const HeatmapGrid& grid, const SoftArgmaxConfig& config) {
  return soft_argmax_2d(grid.values, {grid.height, grid.width}, config);
}

void soft_argmax_3d_vjp(std::span<const double> volume, VolumeDims d, const SoftArgmaxConfig& config, Vec3 upstream,
                        std::span<double> grad) {
  validate(volume, volume_size(d), config);
  if (grad.size() != volume.size()) throw Error(ErrorCode::dimension, "gradient buffer size mismatch");
  const double sx = frame_scale(d.width, config.frame);
  const double sy = frame_scale(d.height, config.frame);
  const double sz = frame_scale(d.depth, config.frame);

  std::vector<double> w(volume.size());
  double total = 0.0;
  if (config.input == kernels::WeightMode::logits) {
    double shift = -std::numeric_limits<double>::infinity();
    for (double v : volume) shift = std::max(shift, config.temperature * v);
    for (std::size_t i = 0; i < w.size(); ++i) total += w[i] = std::exp(config.temperature * volume[i] - shift);
  } else {
    for (std::size_t i = 0; i < w.size(); ++i) total += w[i] = volume[i];
  }
  double mean[3] = {0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (int z = 0; z < d.depth; ++z) {
    for (int y = 0; y < d.height; ++y) {
      for (int x = 0; x < d.width; ++x, ++i) {
        const double p = w[i] / total;
        mean[0] += p * x * sx;
        mean[1] += p * y * sy;
        mean[2] += p * z * sz;
      }
    }
  }
  i = 0;
  for (int z = 0; z < d.depth; ++z) {
    for (int y = 0; y < d.height; ++y) {
      for (int x = 0; x < d.width; ++x, ++i) {
        const double centered = upstream.x * (x * sx - mean[0]) + upstream.y * (y * sy - mean[1]) +
                                upstream.z * (z * sz - mean[2]);
        // logits: d mean / d f_i = T p_i (c_i - mean); weights: (c_i - mean) / total
        grad[i] = config.input == kernels::WeightMode::logits ? config.temperature * (w[i] / total) * centered
                                                              : centered / total;
      }
    }
  }
}

Pose3D decode_volumetric(const VolumetricHeatmap& h, const SoftArgmaxConfig& config, kernels::Exec exec) {
  Pose3D out;
  out.voxel_units = true;
  const VolumeDims d = h.dims;
  const std::size_t vol = h.volume_size();
  std::vector<double> xyz(3 * static_cast<std::size_t>(h.channels));
  // An all-zero target channel (invalid joint) decodes as an invalid joint.
  std::vector<bool> empty(h.channels, false);
  for (int c = 0; c < h.channels; ++c) {
    const auto ch = h.channel(c);
    empty[c] = config.input == kernels::WeightMode::heatmap &&
               std::all_of(ch.begin(), ch.end(), [](double v) { return v == 0.0; });
    if (!empty[c]) validate(ch, vol, config);
  }
  kernels::soft_argmax_batch(exec, h.values, h.channels, d.depth, d.height, d.width, config.temperature, config.input,
                             xyz);
  for (int c = 0; c < std::min(h.channels, kNumJoints); ++c) {
    out.valid[c] = !empty[c];
    out.coords[c] = empty[c] ? Vec3{} : to_frame(&xyz[3 * c], d, config.frame);
  }
  return out;
}

double BoneLengthModel::total_mean_length() const {
  double s = 0.0;
  for (double m : mean_length) s += m;
  return s;
}

BoneLengthModel update_bone_lengths(BoneLengthModel model, const Pose3D& pose, const Skeleton& skeleton) {
  for (int k = 0; k < skeleton.num_parts(); ++k) {
    const Part& p = skeleton.parts()[k];
    if (!pose.valid[p.parent] || !pose.valid[p.child]) continue;
    const double len = part_length(pose, k, skeleton);
    const auto n = ++model.count[k];
    model.mean_length[k] += (len - model.mean_length[k]) / static_cast<double>(n);
  }
  return model;
}

double metric_scale(const Pose3D& pose, const BoneLengthModel& model, const Skeleton& skeleton) {
  double learned = 0.0, decoded = 0.0;
  for (int k = 0; k < skeleton.num_parts(); ++k) {
    const Part& p = skeleton.parts()[k];
    if (!pose.valid[p.parent] || !pose.valid[p.child] || model.count[k] == 0) continue;
    const double len = part_length(pose, k, skeleton);
    if (!(len > 0.0) || !(model.mean_length[k] > 0.0)) continue;
    learned += model.mean_length[k];
    decoded += len;
  }
  if (!(decoded > 0.0)) throw Error(ErrorCode::scaling_undefined, "no valid non-degenerate part to scale by");
  return learned / decoded;
}

Pose3D voxel_to_metric(const Pose3D& pose, const BoneLengthModel& model, const Skeleton& skeleton) {
  const int root = skeleton.root_index();
  if (!pose.valid[root]) throw Error(ErrorCode::invalid_joint, "root joint must be valid");
  const double s = metric_scale(pose, model, skeleton);
  Pose3D out = pose;
  out.voxel_units = false;
  for (int j = 0; j < kNumJoints; ++j) {
    if (pose.valid[j]) out.coords[j] = s * (pose.coords[j] - pose.coords[root]);
  }
  return out;
}

nlohmann::json bone_length_model_to_json(const BoneLengthModel& model, const Skeleton& skeleton) {
  nlohmann::json doc;
  doc["schema"] = "hemlets.bone_lengths";
  doc["version"] = 1;
  doc["topology_hash"] = skeleton.topology_hash();
  doc["mean_length_mm"] = model.mean_length;
  doc["count"] = model.count;
  return doc;
}

BoneLengthModel bone_length_model_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("schema").get<std::string>() != "hemlets.bone_lengths" || doc.at("version").get<int>() != 1) {
      throw Error(ErrorCode::parse, "not a version-1 bone length document");
    }
    BoneLengthModel m;
    m.mean_length = doc.at("mean_length_mm").get<std::vector<double>>();
    m.count = doc.at("count").get<std::vector<long long>>();
    if (m.mean_length.size() != kNumParts || m.count.size() != kNumParts) {
      throw Error(ErrorCode::parse, "bone length document must list 14 parts");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, e.what());
  }
}

}  // namespace hemlets
