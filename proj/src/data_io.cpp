#include "hemlets/data_io.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "hemlets/error.hpp"
#include "hemlets/synthetic.hpp"

namespace hemlets {

using nlohmann::json;

namespace {

[[noreturn]] void fail_line(int line, const std::string& what) {
  throw Error(ErrorCode::parse, "line " + std::to_string(line) + ": " + what);
}

struct Line {
  int number;
  json doc;
};

// Reads the header plus records, checking the schema name and version.
std::vector<Line> read_jsonl(std::istream& in, const std::string& schema) {
  std::vector<Line> out;
  std::string text;
  int number = 0;
  bool header = false;
  while (std::getline(in, text)) {
    ++number;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      fail_line(number, std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) fail_line(number, "expected a JSON object");
    if (!header) {
      if (doc.value("schema", "") != schema) fail_line(number, "expected header with schema \"" + schema + "\"");
      if (doc.value("version", -1) != kAnnotationSchemaVersion) fail_line(number, "unsupported schema version");
      header = true;
      continue;
    }
    out.push_back({number, std::move(doc)});
  }
  if (!header) throw Error(ErrorCode::parse, "line " + std::to_string(number + 1) + ": missing " + schema + " header");
  return out;
}

double number_at(const json& v, int line, const char* field) {
  if (!v.is_number()) fail_line(line, std::string(field) + ": expected a number");
  return v.get<double>();
}

Pose2D parse_pose2d(const json& arr, const json* valid, int line) {
  if (!arr.is_array() || arr.size() != kNumJoints) {
    fail_line(line, "joints2d: expected " + std::to_string(kNumJoints) + " joints");
  }
  Pose2D p;
  for (int j = 0; j < kNumJoints; ++j) {
    const json& c = arr[j];
    if (c.is_null()) continue;
    if (!c.is_array() || c.size() != 2) fail_line(line, "joints2d: expected [x, y]");
    p.coords[j] = {number_at(c[0], line, "joints2d"), number_at(c[1], line, "joints2d")};
    p.valid[j] = valid ? (*valid)[j].get<bool>() : true;
  }
  if (!p.is_finite()) fail_line(line, "joints2d: non-finite coordinate");
  return p;
}

Pose3D parse_pose3d(const json& arr, const json* valid, int line) {
  if (!arr.is_array() || arr.size() != kNumJoints) {
    fail_line(line, "joints3d: expected " + std::to_string(kNumJoints) + " joints");
  }
  Pose3D p;
  for (int j = 0; j < kNumJoints; ++j) {
    const json& c = arr[j];
    if (c.is_null()) continue;
    if (!c.is_array() || c.size() != 3) fail_line(line, "joints3d: expected [x, y, z]");
    p.coords[j] = {number_at(c[0], line, "joints3d"), number_at(c[1], line, "joints3d"),
                   number_at(c[2], line, "joints3d")};
    p.valid[j] = valid ? (*valid)[j].get<bool>() : true;
  }
  if (!p.is_finite()) fail_line(line, "joints3d: non-finite coordinate");
  return p;
}

const json* parse_valid(const json& doc, int line) {
  if (!doc.contains("valid")) return nullptr;
  const json& v = doc["valid"];
  if (!v.is_array() || v.size() != kNumJoints) fail_line(line, "valid: expected 18 booleans");
  for (const auto& b : v) {
    if (!b.is_boolean()) fail_line(line, "valid: expected 18 booleans");
  }
  return &v;
}

std::string record_id(const json& doc, int line) {
  if (!doc.contains("id")) fail_line(line, "missing \"id\"");
  if (doc["id"].is_string()) return doc["id"].get<std::string>();
  if (doc["id"].is_number_integer()) return std::to_string(doc["id"].get<long long>());
  fail_line(line, "\"id\" must be a string or integer");
}

json pose2d_json(const Pose2D& p) {
  json a = json::array();
  for (int j = 0; j < kNumJoints; ++j) a.push_back(p.valid[j] ? json{p.coords[j].x, p.coords[j].y} : json(nullptr));
  return a;
}

json pose3d_json(const Pose3D& p) {
  json a = json::array();
  for (int j = 0; j < kNumJoints; ++j) {
    a.push_back(p.valid[j] ? json{p.coords[j].x, p.coords[j].y, p.coords[j].z} : json(nullptr));
  }
  return a;
}

std::string part_key(const Skeleton& sk, int k) {
  const Part& p = sk.parts()[k];
  return sk.joint_names()[p.parent] + "-" + sk.joint_names()[p.child];
}

FbiLabel label_from_string(const std::string& s, int line) {
  if (s == "forward") return FbiLabel::forward;
  if (s == "backward") return FbiLabel::backward;
  if (s == "unknown") return FbiLabel::unknown;
  fail_line(line, "unknown FBI label \"" + s + "\"");
}

}  // namespace

std::vector<PoseRecord> read_pose_records(std::istream& in) {
  std::vector<PoseRecord> out;
  for (const Line& l : read_jsonl(in, "hemlets.poses")) {
    PoseRecord r;
    r.id = record_id(l.doc, l.number);
    r.group = l.doc.value("group", "");
    const json* valid = parse_valid(l.doc, l.number);
    if (l.doc.contains("joints3d")) r.pose3d = parse_pose3d(l.doc["joints3d"], valid, l.number);
    if (l.doc.contains("joints2d")) r.pose2d = parse_pose2d(l.doc["joints2d"], valid, l.number);
    if (!r.pose3d && !r.pose2d) fail_line(l.number, "record has neither joints3d nor joints2d");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PoseRecord> read_pose_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path.string());
  return read_pose_records(f);
}

void write_pose_records(std::ostream& out, std::span<const PoseRecord> records) {
  out << json{{"schema", "hemlets.poses"}, {"version", kAnnotationSchemaVersion}}.dump() << '\n';
  for (const auto& r : records) {
    json doc{{"id", r.id}};
    if (!r.group.empty()) doc["group"] = r.group;
    if (r.pose3d) doc["joints3d"] = pose3d_json(*r.pose3d);
    if (r.pose2d) doc["joints2d"] = pose2d_json(*r.pose2d);
    out << doc.dump() << '\n';
  }
}

void write_pose_file(const std::filesystem::path& path, std::span<const PoseRecord> records) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  write_pose_records(f, records);
  if (!f) throw Error(ErrorCode::io, "write failed for " + path.string());
}

const char* to_string(FbiLabel label) {
  switch (label) {
    case FbiLabel::forward: return "forward";
    case FbiLabel::backward: return "backward";
    case FbiLabel::unknown: return "unknown";
  }
  return "unknown";
}

std::vector<FbiRecord> read_fbi_records(std::istream& in) {
  const Skeleton& sk = canonical_skeleton();
  std::map<std::string, int> keys;
  for (int k = 0; k < kNumParts; ++k) keys[part_key(sk, k)] = k;

  std::vector<FbiRecord> out;
  for (const Line& l : read_jsonl(in, "hemlets.fbi")) {
    FbiRecord r;
    r.image_id = record_id(l.doc, l.number);
    r.provenance = l.doc.value("provenance", "");
    if (l.doc.contains("joints2d")) r.joints2d = parse_pose2d(l.doc["joints2d"], parse_valid(l.doc, l.number), l.number);
    const json labels = l.doc.value("labels", json::object());
    if (!labels.is_object()) fail_line(l.number, "labels: expected an object");
    for (const auto& [key, value] : labels.items()) {
      const auto it = keys.find(key);
      if (it == keys.end()) fail_line(l.number, "labels: \"" + key + "\" is not a canonical part");
      if (!value.is_string()) fail_line(l.number, "labels: expected a string");
      r.labels[it->second] = label_from_string(value.get<std::string>(), l.number);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_fbi_records(std::ostream& out, std::span<const FbiRecord> records) {
  const Skeleton& sk = canonical_skeleton();
  out << json{{"schema", "hemlets.fbi"}, {"version", kAnnotationSchemaVersion}}.dump() << '\n';
  for (const auto& r : records) {
    json labels = json::object();
    for (int k = 0; k < kNumParts; ++k) labels[part_key(sk, k)] = to_string(r.labels[k]);
    json doc{{"id", r.image_id}, {"labels", labels}};
    if (!r.provenance.empty()) doc["provenance"] = r.provenance;
    if (r.joints2d) doc["joints2d"] = pose2d_json(*r.joints2d);
    out << doc.dump() << '\n';
  }
}

std::vector<OrdinalRecord> read_ordinal_records(std::istream& in) {
  const Skeleton& sk = canonical_skeleton();
  std::vector<OrdinalRecord> out;
  for (const Line& l : read_jsonl(in, "hemlets.ordinal")) {
    OrdinalRecord r;
    r.image_id = record_id(l.doc, l.number);
    const json pairs = l.doc.value("pairs", json::array());
    if (!pairs.is_array()) fail_line(l.number, "pairs: expected an array");
    for (const auto& p : pairs) {
      if (!p.is_object() || !p.contains("a") || !p.contains("b") || !p.contains("relation")) {
        fail_line(l.number, "pairs: expected {a, b, relation}");
      }
      OrdinalPair op;
      try {
        op.a = sk.joint_index(p["a"].get<std::string>());
        op.b = sk.joint_index(p["b"].get<std::string>());
      } catch (const std::exception& e) {
        fail_line(l.number, e.what());
      }
      const std::string rel = p["relation"].is_string() ? p["relation"].get<std::string>() : "";
      if (rel == "closer") op.relation = OrdinalRelation::closer;
      else if (rel == "farther") op.relation = OrdinalRelation::farther;
      else if (rel == "ambiguous") op.relation = OrdinalRelation::ambiguous;
      else fail_line(l.number, "pairs: unknown relation \"" + rel + "\"");
      if (op.a == op.b) fail_line(l.number, "pairs: a joint cannot be compared with itself");
      r.pairs.push_back(op);
    }
    if (r.pairs.size() > static_cast<std::size_t>(kNumJoints * (kNumJoints - 1) / 2)) {
      fail_line(l.number, "more pairs than joint combinations");
    }
    out.push_back(std::move(r));
  }
  return out;
}

FBIAnnotationSet ordinal_to_fbi(std::span<const OrdinalRecord> ordinal, const Skeleton& skeleton) {
  FBIAnnotationSet out;
  for (const auto& rec : ordinal) {
    FbiRecord r;
    r.image_id = rec.image_id;
    r.provenance = "ordinal";
    std::array<bool, kNumParts> seen{};
    for (const auto& pair : rec.pairs) {
      int part = skeleton.find_part(pair.a, pair.b);
      bool a_is_parent = true;
      if (part < 0) {
        part = skeleton.find_part(pair.b, pair.a);
        a_is_parent = false;
      }
      if (part < 0) continue;

      FbiLabel label = FbiLabel::unknown;
      if (pair.relation != OrdinalRelation::ambiguous) {
        const bool a_closer = pair.relation == OrdinalRelation::closer;
        const bool child_closer = a_is_parent ? !a_closer : a_closer;
        label = child_closer ? FbiLabel::forward : FbiLabel::backward;
      }
      if (seen[part] && r.labels[part] != label) label = FbiLabel::unknown;
      r.labels[part] = label;
      seen[part] = true;
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::optional<int>> fbi_to_mask(const FbiRecord& record) {
  std::vector<std::optional<int>> out(kNumParts);
  for (int k = 0; k < kNumParts; ++k) {
    if (record.labels[k] == FbiLabel::forward) out[k] = +1;
    if (record.labels[k] == FbiLabel::backward) out[k] = -1;
  }
  return out;
}

CropTransform crop_and_resize(const Box& box, int image_width, int image_height, int output_size) {
  if (!(box.width > 0.0) || !(box.height > 0.0) || !std::isfinite(box.x) || !std::isfinite(box.y)) {
    throw Error(ErrorCode::geometry, "crop box must have positive area");
  }
  if (image_width <= 0 || image_height <= 0 || output_size <= 0) {
    throw Error(ErrorCode::geometry, "image and output sizes must be positive");
  }
  CropTransform t;
  t.source = box;
  t.output_size = output_size;
  const double side = std::max(box.width, box.height);
  const double cx = box.x + 0.5 * box.width;
  const double cy = box.y + 0.5 * box.height;
  t.square = {cx - 0.5 * side, cy - 0.5 * side, side, side};
  t.scale = output_size / side;
  return t;
}

AugmentParams sample_augment_params(std::uint64_t seed, const AugmentConfig& c) {
  std::mt19937_64 rng(seed);
  AugmentParams p;
  p.rotation_deg = (2.0 * uniform01(rng) - 1.0) * c.max_rotation_deg;
  p.scale = c.min_scale + (c.max_scale - c.min_scale) * uniform01(rng);
  p.flip = uniform01(rng) < c.flip_probability;
  return p;
}

PoseSample apply_augment(const PoseSample& sample, const AugmentParams& params, const AugmentConfig& config,
                         const Skeleton& skeleton) {
  PoseSample out = sample;
  if (params.flip) {
    for (int j = 0; j < kNumJoints; ++j) {
      const int m = skeleton.mirror_joint(j);
      out.pose2d.coords[j] = {config.frame_size - 1.0 - sample.pose2d.coords[m].x, sample.pose2d.coords[m].y};
      out.pose2d.valid[j] = sample.pose2d.valid[m];
      out.pose3d.coords[j] = {-sample.pose3d.coords[m].x, sample.pose3d.coords[m].y, sample.pose3d.coords[m].z};
      out.pose3d.valid[j] = sample.pose3d.valid[m];
    }
  }
  if (params.rotation_deg == 0.0 && params.scale == 1.0) return out;

  const double a = params.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(a), s = std::sin(a);
  const double mid = 0.5 * (config.frame_size - 1.0);
  for (auto& p : out.pose2d.coords) {
    const double dx = p.x - mid, dy = p.y - mid;
    p = {mid + params.scale * (c * dx - s * dy), mid + params.scale * (s * dx + c * dy)};
  }
  if (params.rotation_deg != 0.0) {
    const Vec3 root = out.pose3d.coords[skeleton.root_index()];
    for (auto& p : out.pose3d.coords) {
      const double dx = p.x - root.x, dy = p.y - root.y;
      p = {root.x + c * dx - s * dy, root.y + s * dx + c * dy, p.z};
    }
  }
  return out;
}

PoseSample augment(const PoseSample& sample, std::uint64_t seed, const AugmentConfig& config, const Skeleton& skeleton) {
  return apply_augment(sample, sample_augment_params(seed, config), config, skeleton);
}

NoiseBand FbiNoiseProfile::band_for(double tilt_deg) const {
  if (tilt_deg >= high_tilt_deg) return high_tilt;
  if (tilt_deg < low_tilt_deg) return low_tilt;
  const double t = (tilt_deg - low_tilt_deg) / (high_tilt_deg - low_tilt_deg);
  return {low_tilt.error_rate + t * (high_tilt.error_rate - low_tilt.error_rate),
          low_tilt.skip_rate + t * (high_tilt.skip_rate - low_tilt.skip_rate)};
}

FbiLabel true_fbi_label(const Pose3D& pose, int part_index, const Skeleton& skeleton) {
  const Part& p = skeleton.parts().at(part_index);
  if (!pose.valid[p.parent] || !pose.valid[p.child]) return FbiLabel::unknown;
  const double dz = pose.coords[p.parent].z - pose.coords[p.child].z;
  if (dz > 0.0) return FbiLabel::forward;
  if (dz < 0.0) return FbiLabel::backward;
  return FbiLabel::unknown;
}

FBIAnnotationSet simulate_fbi_annotator(std::span<const Pose3D> gt_poses, const FbiNoiseProfile& profile,
                                        std::uint64_t seed, const Skeleton& skeleton) {
  for (const NoiseBand& b : {profile.high_tilt, profile.low_tilt}) {
    for (double r : {b.error_rate, b.skip_rate}) {
      if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorCode::config, "noise rates must lie in [0, 1]");
    }
  }
  if (!(profile.low_tilt_deg <= profile.high_tilt_deg)) throw Error(ErrorCode::config, "tilt bands are inverted");

  FBIAnnotationSet out(gt_poses.size());
  for (std::size_t i = 0; i < gt_poses.size(); ++i) {
    std::mt19937_64 rng(derive_seed(seed, i));
    FbiRecord& r = out[i];
    r.image_id = std::to_string(i);
    r.provenance = "simulated";
    for (int k = 0; k < skeleton.num_parts(); ++k) {
      // Two draws per part regardless of outcome keep the stream aligned across profiles.
      const double u_skip = uniform01(rng);
      const double u_err = uniform01(rng);
      const FbiLabel truth = true_fbi_label(gt_poses[i], k, skeleton);
      if (truth == FbiLabel::unknown) continue;
      const NoiseBand band = profile.band_for(tilt_angle(gt_poses[i], k, skeleton));
      if (u_skip < band.skip_rate) continue;
      const bool flip = u_err < band.error_rate;
      r.labels[k] = flip ? (truth == FbiLabel::forward ? FbiLabel::backward : FbiLabel::forward) : truth;
    }
  }
  return out;
}

}  // namespace hemlets
