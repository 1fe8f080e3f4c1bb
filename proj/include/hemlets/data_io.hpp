#pragma once

// Annotation files and coordinate preprocessing.
//
// All annotation files are line-delimited JSON. The first non-empty line is a
// header {"schema": ..., "version": 1}; every following non-empty line is one
// record. Parse failures throw ErrorCode::parse with the 1-based line number.
//
//   hemlets.poses    {"id", "group"?, "joints3d"?: 18x[x,y,z], "joints2d"?: 18x[x,y], "valid"?: 18 bools}
//   hemlets.fbi      {"id", "provenance"?, "joints2d"?, "labels": {"parent-child": "forward"|"backward"|"unknown"}}
//   hemlets.ordinal  {"id", "pairs": [{"a": joint, "b": joint, "relation": "closer"|"farther"|"ambiguous"}]}
//
// In an ordinal pair the relation describes joint a relative to joint b.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hemlets/skeleton.hpp"

namespace hemlets {

inline constexpr int kAnnotationSchemaVersion = 1;

struct PoseRecord {
  std::string id;
  std::string group;
  std::optional<Pose3D> pose3d;
  std::optional<Pose2D> pose2d;
};

std::vector<PoseRecord> read_pose_records(std::istream& in);
std::vector<PoseRecord> read_pose_file(const std::filesystem::path& path);
void write_pose_records(std::ostream& out, std::span<const PoseRecord> records);
void write_pose_file(const std::filesystem::path& path, std::span<const PoseRecord> records);

/// Forward: the child joint is closer to the camera than the parent (tri_state +1).
enum class FbiLabel { forward, backward, unknown };

const char* to_string(FbiLabel label);

struct FbiRecord {
  std::string image_id;
  std::string provenance;
  std::optional<Pose2D> joints2d;
  std::array<FbiLabel, kNumParts> labels;

  FbiRecord() { labels.fill(FbiLabel::unknown); }
};

using FBIAnnotationSet = std::vector<FbiRecord>;

std::vector<FbiRecord> read_fbi_records(std::istream& in);
void write_fbi_records(std::ostream& out, std::span<const FbiRecord> records);

enum class OrdinalRelation { closer, farther, ambiguous };

struct OrdinalPair {
  int a = 0;
  int b = 0;
  OrdinalRelation relation = OrdinalRelation::ambiguous;
};

struct OrdinalRecord {
  std::string image_id;
  std::vector<OrdinalPair> pairs;
};

using OrdinalAnnotationSet = std::vector<OrdinalRecord>;

std::vector<OrdinalRecord> read_ordinal_records(std::istream& in);

/// Keeps only pairs lying on a canonical part. Conflicting duplicates give Unknown.
FBIAnnotationSet ordinal_to_fbi(std::span<const OrdinalRecord> ordinal, const Skeleton& skeleton = canonical_skeleton());

/// Per-part polarity supervision: forward -> +1, backward -> -1, unknown -> nullopt (masked).
std::vector<std::optional<int>> fbi_to_mask(const FbiRecord& record);

struct Box {
  double x = 0.0;
  double y = 0.0;
  double width = 0.0;
  double height = 0.0;
};

/// Square crop around a box, resized to output_size x output_size.
struct CropTransform {
  Box source;
  Box square;
  int output_size = 256;
  double scale = 1.0;

  Vec2 forward(Vec2 p) const { return {(p.x - square.x) * scale, (p.y - square.y) * scale}; }
  Vec2 inverse(Vec2 p) const { return {p.x / scale + square.x, p.y / scale + square.y}; }
  /// Row-major 2x3 affine [a b c; d e f].
  std::array<double, 6> forward_affine() const { return {scale, 0.0, -square.x * scale, 0.0, scale, -square.y * scale}; }
  std::array<double, 6> inverse_affine() const { return {1.0 / scale, 0.0, square.x, 0.0, 1.0 / scale, square.y}; }
};

/// Throws ErrorCode::geometry for a non-positive box area or image size.
CropTransform crop_and_resize(const Box& box, int image_width, int image_height, int output_size = 256);

struct AugmentConfig {
  double max_rotation_deg = 30.0;
  double min_scale = 0.75;
  double max_scale = 1.25;
  double flip_probability = 0.5;
  /// Side of the square crop frame the 2D joints live in.
  double frame_size = 256.0;

  static AugmentConfig identity() { return {0.0, 1.0, 1.0, 0.0, 256.0}; }
};

struct AugmentParams {
  double rotation_deg = 0.0;
  double scale = 1.0;
  bool flip = false;
};

struct PoseSample {
  Pose2D pose2d;
  Pose3D pose3d;
};

AugmentParams sample_augment_params(std::uint64_t seed, const AugmentConfig& config);

/// Mirror (x -> frame-1-x in 2D, x -> -x in 3D, left/right joints swapped), then
/// rotate both about the frame center / root by the same in-plane angle; the
/// scale acts on the 2D frame only.
PoseSample apply_augment(const PoseSample& sample, const AugmentParams& params, const AugmentConfig& config,
                         const Skeleton& skeleton = canonical_skeleton());
PoseSample augment(const PoseSample& sample, std::uint64_t seed, const AugmentConfig& config = {},
                   const Skeleton& skeleton = canonical_skeleton());

struct NoiseBand {
  double error_rate = 0.0;
  double skip_rate = 0.0;
};

/// Annotator noise by bone tilt. Below low_tilt_deg the low band applies, at or
/// above high_tilt_deg the high band; rates are interpolated linearly in between.
struct FbiNoiseProfile {
  NoiseBand high_tilt{0.074, 0.10};
  NoiseBand low_tilt{0.20, 0.25};
  double low_tilt_deg = 20.0;
  double high_tilt_deg = 30.0;

  static FbiNoiseProfile noise_free() { return {{0, 0}, {0, 0}, 20.0, 30.0}; }
  static FbiNoiseProfile constant(NoiseBand band) { return {band, band, 20.0, 30.0}; }
  NoiseBand band_for(double tilt_deg) const;
};

/// One record per pose. Each part is skipped with the skip rate (Unknown);
/// otherwise its true label is flipped with the error rate. Parts with an
/// invalid endpoint or no depth difference are Unknown. Record i draws from
/// derive_seed(seed, i), so results do not depend on batch order.
FBIAnnotationSet simulate_fbi_annotator(std::span<const Pose3D> gt_poses, const FbiNoiseProfile& profile,
                                        std::uint64_t seed, const Skeleton& skeleton = canonical_skeleton());

/// True FBI label of a part from 3D ground truth.
FbiLabel true_fbi_label(const Pose3D& pose, int part_index, const Skeleton& skeleton = canonical_skeleton());

}  // namespace hemlets
