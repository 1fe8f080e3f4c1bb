#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "hemlets/body_model.hpp"
#include "hemlets/container.hpp"
#include "hemlets/data_io.hpp"
#include "hemlets/error.hpp"
#include "hemlets/heatmap_codec.hpp"
#include "hemlets/integral_decoder.hpp"
#include "hemlets/kernels.hpp"
#include "hemlets/metrics.hpp"
#include "hemlets/synthetic.hpp"
#include "hemlets/toy_training.hpp"

namespace hemlets::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::io: return kIoFailure;
    case ErrorCode::training_diverged:
    case ErrorCode::scaling_undefined:
    case ErrorCode::alignment_degenerate:
    case ErrorCode::unknown_polarity: return kNumericalFailure;
    default: return kInputError;
  }
}

std::optional<long long> env_integer(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  try {
    std::size_t used = 0;
    const long long n = std::stoll(v, &used);
    if (used != std::string(v).size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw Error(ErrorCode::config, std::string(name) + " must be an integer");
  }
}

struct Common {
  std::uint64_t seed = 1;
  int threads = 0;
};

void apply_threads(int threads) {
  if (threads == 1) {
    kernels::set_default_exec(kernels::Exec::serial);
  } else {
    kernels::set_default_exec(kernels::Exec::parallel);
    kernels::set_num_threads(threads);
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  return f;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path.string());
  return f;
}

// ---------------------------------------------------------------- encode

struct EncodeArgs {
  fs::path poses, out, bones_out;
  int grid = 64;
  double sigma = 2.0;
  int volume = 32;
  double depth_range_mm = 2000.0;
  std::string unknown_policy = "polarity";
};

int cmd_encode(const EncodeArgs& a, std::ostream& out) {
  if (a.grid <= 0 || a.volume <= 0 || !(a.sigma > 0.0) || !(a.depth_range_mm > 0.0)) {
    throw Error(ErrorCode::config, "grid, volume, sigma and depth range must be positive");
  }
  const auto records = read_pose_file(a.poses);
  if (records.empty()) throw Error(ErrorCode::parse, "pose file has no records");
  const Skeleton& sk = canonical_skeleton();

  EncodeOptions enc;
  enc.grid = {a.grid, a.grid};
  enc.sigma = a.sigma;
  enc.unknown_policy = a.unknown_policy == "all" ? UnknownMaskPolicy::all_layers : UnknownMaskPolicy::polarity_layers;
  VolumetricOptions vol;
  vol.dims = {a.volume, a.volume, a.volume};
  vol.sigma_xyz = {a.sigma * a.volume / a.grid, a.sigma * a.volume / a.grid, a.sigma * a.volume / a.grid};

  const auto n = static_cast<std::uint32_t>(records.size());
  const auto g = static_cast<std::uint32_t>(a.grid);
  const auto v = static_cast<std::uint32_t>(a.volume);
  std::vector<double> hem, mask, hm, volumetric, poses3d, valid;
  std::array<std::array<int, 4>, kNumParts> histogram{};  // -1, 0, +1, unknown
  BoneLengthModel bones;

  for (const auto& r : records) {
    if (!r.pose3d) throw Error(ErrorCode::parse, "record " + r.id + " has no joints3d");
    const Pose3D& p3 = *r.pose3d;
    Pose2D p2;
    if (r.pose2d) {
      p2 = *r.pose2d;
      for (auto& c : p2.coords) c = {c.x * a.grid / 256.0, c.y * a.grid / 256.0};
    } else {
      // No 2D annotation: orthographic projection of the root-relative pose into the grid.
      Pose3D rel = p3;
      for (auto& c : rel.coords) c = c - p3.coords[sk.root_index()];
      p2 = project_orthographic(rel, a.depth_range_mm / a.grid, {0.5 * (a.grid - 1), 0.5 * (a.grid - 1)});
    }
    const HeatmapTriplets t = encode_hemlets(p3, p2, sk, enc);
    hem.insert(hem.end(), t.values.begin(), t.values.end());
    mask.insert(mask.end(), t.mask.begin(), t.mask.end());
    const JointHeatmaps h = render_joint_heatmaps(p2, enc.grid, a.sigma, enc.exec);
    hm.insert(hm.end(), h.values.begin(), h.values.end());

    // Voxel pose: x, y follow the 2D grid, z maps root-relative depth over the depth range.
    Pose3D vox = p3;
    vox.voxel_units = true;
    const double zr = p3.valid[sk.root_index()] ? p3.coords[sk.root_index()].z : 0.0;
    for (int j = 0; j < kNumJoints; ++j) {
      vox.valid[j] = p3.valid[j] && p2.valid[j];
      vox.coords[j] = {p2.coords[j].x * a.volume / a.grid, p2.coords[j].y * a.volume / a.grid,
                       0.5 * (a.volume - 1) + (p3.coords[j].z - zr) * a.volume / a.depth_range_mm};
      poses3d.insert(poses3d.end(), {vox.coords[j].x, vox.coords[j].y, vox.coords[j].z});
      valid.push_back(vox.valid[j] ? 1.0 : 0.0);
    }
    const VolumetricHeatmap vh = render_volumetric_target(vox, vol);
    volumetric.insert(volumetric.end(), vh.values.begin(), vh.values.end());

    const auto pol = part_polarities(p3, sk);
    for (int k = 0; k < kNumParts; ++k) ++histogram[k][pol[k] ? *pol[k] + 1 : 3];
    bones = update_bone_lengths(bones, p3, sk);
  }

  Container c;
  c.add("hemlets", {n, kNumParts, 3, g, g}, hem);
  c.add("hemlets_mask", {n, kNumParts, 3, g, g}, mask);
  c.add("heatmaps2d", {n, kNumJoints, g, g}, hm);
  c.add("volumetric", {n, kNumJoints, v, v, v}, volumetric);
  c.add("poses3d", {n, kNumJoints, 3}, poses3d);
  c.add("valid", {n, kNumJoints}, valid);
  write_container(a.out, c);
  if (!a.bones_out.empty()) {
    auto f = open_out(a.bones_out);
    f << bone_length_model_to_json(bones, sk).dump(2) << '\n';
  }

  out << "encoded " << n << " poses -> " << a.out.string() << "\n";
  out << std::left << std::setw(24) << "part" << std::right << std::setw(8) << "-1" << std::setw(8) << "0"
      << std::setw(8) << "+1" << std::setw(9) << "unknown" << "\n";
  for (int k = 0; k < kNumParts; ++k) {
    const Part& p = sk.parts()[k];
    out << std::left << std::setw(24) << (sk.joint_names()[p.parent] + "-" + sk.joint_names()[p.child]) << std::right;
    for (int b = 0; b < 3; ++b) out << std::setw(8) << histogram[k][b];
    out << std::setw(9) << histogram[k][3] << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------- decode

struct DecodeArgs {
  fs::path in, out, bones;
  double presence = 0.5;
};

HeatmapTriplets triplets_from(const Tensor& values, const Tensor* mask, std::uint32_t index) {
  if (values.dims.size() != 5 || values.dims[1] != kNumParts || values.dims[2] != 3) {
    throw Error(ErrorCode::dimension, "hemlets tensor must be [P, 14, 3, H, W]");
  }
  HeatmapTriplets t(kNumParts, 3, static_cast<int>(values.dims[3]), static_cast<int>(values.dims[4]));
  const std::size_t stride = t.values.size();
  std::copy_n(values.data.begin() + index * stride, stride, t.values.begin());
  if (mask) {
    for (std::size_t i = 0; i < stride; ++i) t.mask[i] = mask->data[index * stride + i] != 0.0f ? 1 : 0;
  }
  return t;
}

int cmd_decode(const DecodeArgs& a, std::ostream& out) {
  const Container c = read_container(a.in);
  const Tensor& hem = c.at("hemlets");
  const Tensor* mask = c.find("hemlets_mask");
  const Skeleton& sk = canonical_skeleton();
  const std::uint32_t n = hem.dims.empty() ? 0 : hem.dims[0];

  std::optional<BoneLengthModel> bones;
  if (!a.bones.empty()) {
    auto f = open_in(a.bones);
    try {
      bones = bone_length_model_from_json(json::parse(f));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse, a.bones.string() + ": " + e.what());
    }
  }

  std::vector<PoseRecord> decoded;
  for (std::uint32_t i = 0; i < n; ++i) {
    const HeatmapTriplets t = triplets_from(hem, mask, i);
    out << "pose " << i << ":";
    for (int k = 0; k < kNumParts; ++k) {
      try {
        const int r = decode_hemlets_polarity(t, k, a.presence);
        out << ' ' << (r > 0 ? '+' : (r < 0 ? '-' : '0'));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::unknown_polarity) throw;
        out << " ?";
      }
    }
    out << "\n";

    if (const Tensor* vol = c.find("volumetric"); vol && !a.out.empty()) {
      if (vol->dims.size() != 5 || vol->dims[0] != n || vol->dims[1] != kNumJoints) {
        throw Error(ErrorCode::dimension, "volumetric tensor must be [P, 18, D, H, W]");
      }
      VolumetricHeatmap vh;
      vh.channels = kNumJoints;
      vh.dims = {static_cast<int>(vol->dims[2]), static_cast<int>(vol->dims[3]), static_cast<int>(vol->dims[4])};
      const std::size_t stride = kNumJoints * vh.volume_size();
      vh.values.assign(vol->data.begin() + i * stride, vol->data.begin() + (i + 1) * stride);
      SoftArgmaxConfig cfg;
      cfg.input = kernels::WeightMode::heatmap;
      PoseRecord r;
      r.id = std::to_string(i);
      r.pose3d = bones ? voxel_to_metric(decode_volumetric(vh, cfg), *bones, sk) : decode_volumetric(vh, cfg);
      decoded.push_back(std::move(r));
    }
  }
  if (!a.out.empty()) {
    if (!c.find("volumetric")) throw Error(ErrorCode::parse, "container has no volumetric tensor to decode");
    write_pose_file(a.out, decoded);
  }
  return kOk;
}

// ---------------------------------------------------------------- train-toy

struct TrainArgs {
  int epochs = 30;
  double learning_rate = 0.02;
  double alpha = kDefaultAlpha;
  int batch_size = 16;
  int hidden = 64;
  int train_size = 256;
  int val_size = 128;
  int train_3d_size = -1;
  double plane_gain = 6.0;
  int lambda = 1;
  bool baseline = false;
  bool hints = false;
  double noise = 0.1;
  std::uint64_t data_seed = 7;
  fs::path log, model;
};

int cmd_train_toy(const TrainArgs& a, const Common& common, std::ostream& out) {
  if (a.learning_rate < 0.0) throw Error(ErrorCode::config, "learning rate must be positive (or exactly 0)");
  ToyDataConfig dc;
  dc.train_size = a.train_size;
  dc.val_size = a.val_size;
  dc.train_3d_size = a.train_3d_size;
  dc.input_noise_px = a.noise;
  dc.seed = a.data_seed;
  const ToyDataset data = make_toy_dataset(dc);

  ToyTrainConfig tc;
  tc.epochs = a.epochs;
  tc.learning_rate = a.learning_rate;
  tc.alpha = a.alpha;
  tc.batch_size = a.batch_size;
  tc.hidden = a.hidden;
  tc.lambda = a.lambda;
  tc.intermediate = !a.baseline;
  tc.polarity_hints = a.hints;
  tc.plane_gain = a.plane_gain;
  tc.seed = common.seed;

  std::ofstream log;
  if (!a.log.empty()) log = open_out(a.log);
  auto emit = [&](const EpochLog& e) {
    const std::string line = to_json(e).dump();
    if (log.is_open()) log << line << '\n';
    out << line << '\n';
  };
  try {
    const TrainResult r = train_toy(data, tc, emit);
    if (!a.model.empty()) write_container(a.model, r.model.to_container());
  } catch (const TrainingDivergedError& e) {
    if (!a.model.empty()) write_container(a.model, e.last_finite().model.to_container());
    throw;
  }
  if (log.is_open() && !log) throw Error(ErrorCode::io, "write failed for " + a.log.string());
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  fs::path pred, gt, json_out;
  std::string procrustes = "similarity";
  double pck = 150.0;
  double auc_max = 150.0;
  int auc_steps = 31;
  bool grouped = false;
};

void print_report(std::ostream& out, const EvalReport& r) {
  out << std::fixed << std::setprecision(3);
  out << "MPJPE (mm)     " << r.mpjpe_mm << "\n"
      << "PA-MPJPE (mm)  " << r.pa_mpjpe_mm << "\n"
      << "3DPCK (%)      " << r.pck_percent << "\n"
      << "AUC (%)        " << r.auc_percent << "\n";
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto pred = read_pose_file(a.pred);
  const auto gt = read_pose_file(a.gt);
  if (pred.size() != gt.size()) throw Error(ErrorCode::dimension, "prediction and ground-truth files differ in length");
  if (pred.empty()) throw Error(ErrorCode::empty_evaluation, "no poses to evaluate");
  if (a.procrustes != "similarity" && a.procrustes != "rigid") throw Error(ErrorCode::config, "unknown procrustes mode");

  std::vector<Pose3D> p, g;
  std::vector<std::string> groups;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred[i].pose3d || !gt[i].pose3d) throw Error(ErrorCode::parse, "record " + std::to_string(i) + " lacks joints3d");
    p.push_back(*pred[i].pose3d);
    g.push_back(*gt[i].pose3d);
    groups.push_back(gt[i].group.empty() ? "all" : gt[i].group);
  }
  MetricOptions o;
  o.pck_threshold_mm = a.pck;
  o.auc_max_threshold_mm = a.auc_max;
  o.auc_steps = a.auc_steps;
  o.procrustes = a.procrustes == "rigid" ? ProcrustesMode::rigid : ProcrustesMode::similarity;

  const EvalReport report = evaluate(p, g, o);
  print_report(out, report);
  const Skeleton& sk = canonical_skeleton();
  out << "\n" << std::left << std::setw(14) << "joint" << std::right << std::setw(12) << "error (mm)" << "\n";
  for (int j = 0; j < kNumJoints; ++j) {
    out << std::left << std::setw(14) << sk.joint_names()[j] << std::right << std::setw(12);
    if (std::isnan(report.per_joint_errors[j])) out << "-";
    else out << report.per_joint_errors[j];
    out << "\n";
  }
  json doc = to_json(report);
  if (a.grouped) {
    const auto rows = evaluate_grouped(p, g, groups, o);
    out << "\n" << std::left << std::setw(16) << "group" << std::right << std::setw(10) << "MPJPE" << std::setw(10)
        << "PA-MPJPE" << std::setw(10) << "PCK" << std::setw(10) << "AUC" << "\n";
    json table = json::array();
    for (const auto& row : rows) {
      out << std::left << std::setw(16) << row.group << std::right << std::setw(10) << row.report.mpjpe_mm
          << std::setw(10) << row.report.pa_mpjpe_mm << std::setw(10) << row.report.pck_percent << std::setw(10)
          << row.report.auc_percent << "\n";
      table.push_back({{"group", row.group}, {"report", to_json(row.report)}});
    }
    doc["groups"] = table;
  }
  if (!a.json_out.empty()) {
    auto f = open_out(a.json_out);
    f << doc.dump(2) << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------- simulate-fbi / convert-ordinal

struct SimulateArgs {
  fs::path poses, out;
  double high_error = 0.074, high_skip = 0.10, low_error = 0.20, low_skip = 0.25;
};

int cmd_simulate_fbi(const SimulateArgs& a, const Common& common, std::ostream& out) {
  const auto records = read_pose_file(a.poses);
  std::vector<Pose3D> poses;
  for (const auto& r : records) {
    if (!r.pose3d) throw Error(ErrorCode::parse, "record " + r.id + " has no joints3d");
    poses.push_back(*r.pose3d);
  }
  FbiNoiseProfile profile;
  profile.high_tilt = {a.high_error, a.high_skip};
  profile.low_tilt = {a.low_error, a.low_skip};
  FBIAnnotationSet fbi = simulate_fbi_annotator(poses, profile, common.seed);

  long long annotated = 0, skipped = 0, errors = 0;
  for (std::size_t i = 0; i < fbi.size(); ++i) {
    fbi[i].image_id = records[i].id;
    fbi[i].joints2d = records[i].pose2d;
    for (int k = 0; k < kNumParts; ++k) {
      const FbiLabel truth = true_fbi_label(poses[i], k);
      if (truth == FbiLabel::unknown) continue;
      if (fbi[i].labels[k] == FbiLabel::unknown) {
        ++skipped;
      } else {
        ++annotated;
        errors += fbi[i].labels[k] != truth ? 1 : 0;
      }
    }
  }
  auto f = open_out(a.out);
  write_fbi_records(f, fbi);
  const double parts = static_cast<double>(annotated + skipped);
  out << std::fixed << std::setprecision(2) << "parts " << annotated + skipped << ", skipped "
      << (parts > 0 ? 100.0 * skipped / parts : 0.0) << "%, errors "
      << (annotated > 0 ? 100.0 * errors / annotated : 0.0) << "% of annotated\n";
  return kOk;
}

struct ConvertArgs {
  fs::path in, out;
};

int cmd_convert_ordinal(const ConvertArgs& a, std::ostream& out) {
  auto in = open_in(a.in);
  const auto ordinal = read_ordinal_records(in);
  const FBIAnnotationSet fbi = ordinal_to_fbi(ordinal);
  auto f = open_out(a.out);
  write_fbi_records(f, fbi);
  long long labelled = 0;
  for (const auto& r : fbi) {
    for (FbiLabel l : r.labels) labelled += l != FbiLabel::unknown ? 1 : 0;
  }
  out << "converted " << fbi.size() << " records, " << labelled << " labelled parts\n";
  return kOk;
}

// ---------------------------------------------------------------- dump

struct DumpArgs {
  fs::path in, out;
};

std::string index_suffix(const std::vector<std::uint32_t>& idx) {
  std::ostringstream s;
  for (std::uint32_t i : idx) s << '_' << std::setw(3) << std::setfill('0') << i;
  return s.str();
}

void write_stick_figure(const fs::path& path, std::span<const float> xyz) {
  const Skeleton& sk = canonical_skeleton();
  auto f = open_out(path);
  f << std::setprecision(9);
  for (int j = 0; j < kNumJoints; ++j) f << "v " << xyz[3 * j] << ' ' << xyz[3 * j + 1] << ' ' << xyz[3 * j + 2] << "\n";
  for (const Part& p : sk.parts()) f << "l " << p.parent + 1 << ' ' << p.child + 1 << "\n";
  if (!f) throw Error(ErrorCode::io, "write failed for " + path.string());
}

int cmd_dump(const DumpArgs& a, std::ostream& out) {
  const Container c = read_container(a.in);
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec || !fs::is_directory(a.out)) throw Error(ErrorCode::io, "cannot create output directory " + a.out.string());

  int images = 0, figures = 0;
  for (const Tensor& t : c.tensors()) {
    const auto& d = t.dims;
    if (d.size() == 3 && d[1] == kNumJoints && d[2] == 3) {
      for (std::uint32_t p = 0; p < d[0]; ++p) {
        write_stick_figure(a.out / (t.name + index_suffix({p}) + ".obj"),
                           std::span<const float>(t.data).subspan(p * kNumJoints * 3, kNumJoints * 3));
        ++figures;
      }
      continue;
    }
    if (d.size() < 3) continue;
    // Planes are the last two axes; rank-5 volumes are max-projected along depth.
    const bool project = d.size() >= 5;
    const std::uint32_t h = d[d.size() - 2], w = d[d.size() - 1];
    const std::uint32_t depth = project ? d[d.size() - 3] : 1;
    const std::size_t lead_axes = d.size() - (project ? 3 : 2);
    std::size_t planes = 1;
    for (std::size_t i = 0; i < lead_axes; ++i) planes *= d[i];
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t pi = 0; pi < planes; ++pi) {
      std::vector<double> img(plane, 0.0);
      for (std::uint32_t z = 0; z < depth; ++z) {
        const float* src = t.data.data() + (pi * depth + z) * plane;
        for (std::size_t i = 0; i < plane; ++i) img[i] = std::max(img[i], static_cast<double>(src[i]));
      }
      std::vector<std::uint32_t> idx(lead_axes);
      std::size_t rem = pi;
      for (std::size_t ax = lead_axes; ax-- > 0;) {
        idx[ax] = static_cast<std::uint32_t>(rem % d[ax]);
        rem /= d[ax];
      }
      write_pgm(a.out / (t.name + index_suffix(idx) + (project ? "_maxz" : "") + ".pgm"), img, static_cast<int>(h),
                static_cast<int>(w));
      ++images;
    }
  }
  out << "wrote " << images << " images and " << figures << " stick figures to " << a.out.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- skin

struct SkinArgs {
  fs::path params, rig, out, export_rig;
  bool random = false;
};

BodyParams read_body_params(const fs::path& path) {
  auto f = open_in(path);
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, path.string() + ": " + e.what());
  }
  BodyParams p;
  try {
    const auto beta = doc.value("beta", std::vector<double>{});
    if (!beta.empty()) {
      if (beta.size() != kShapeCoeffs) throw Error(ErrorCode::dimension, "beta needs 10 values");
      std::copy(beta.begin(), beta.end(), p.beta.begin());
    }
    const auto theta = doc.value("theta", std::vector<std::vector<double>>{});
    if (!theta.empty()) {
      if (theta.size() != kBodyJoints) throw Error(ErrorCode::dimension, "theta needs 24 axis-angle triples");
      for (int j = 0; j < kBodyJoints; ++j) {
        if (theta[j].size() != 3) throw Error(ErrorCode::dimension, "theta entries are [x, y, z]");
        p.theta[j] = {theta[j][0], theta[j][1], theta[j][2]};
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, path.string() + ": " + e.what());
  }
  return p;
}

int cmd_skin(const SkinArgs& a, const Common& common, std::ostream& out) {
  const RigTemplate rig = a.rig.empty() ? make_synthetic_rig() : rig_from_container(read_container(a.rig));
  BodyParams p;
  if (!a.params.empty()) {
    p = read_body_params(a.params);
  } else if (a.random) {
    std::mt19937_64 rng(common.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& b : p.beta) b = gauss(rng);
    for (auto& t : p.theta) t = 0.3 * Vector3(gauss(rng), gauss(rng), gauss(rng));
  }
  const BodyMesh mesh = skin(p, rig);
  if (!a.out.empty()) write_obj(a.out, mesh.vertices, rig.faces);
  if (!a.export_rig.empty()) write_container(a.export_rig, rig_to_container(rig));
  out << "skinned " << rig.num_vertices << " vertices, " << rig.faces.size() << " faces\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"HEMlets pose toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option defaults (flags take precedence)");
  Common common;
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> threads_flag;
  app.add_option("--seed", seed_flag, "Random seed (env HEMLETS_SEED)");
  app.add_option("--threads", threads_flag, "Worker threads; 1 forces the serial kernels (env HEMLETS_THREADS)");

  EncodeArgs enc;
  auto* c_enc = app.add_subcommand("encode", "Render HEMlets, 2D and volumetric targets for a pose file");
  c_enc->add_option("poses", enc.poses, "hemlets.poses JSONL file")->required();
  c_enc->add_option("-o,--out", enc.out, "Output container")->required();
  c_enc->add_option("--grid", enc.grid, "Heatmap side in pixels")->capture_default_str();
  c_enc->add_option("--sigma", enc.sigma, "Gaussian sigma in pixels")->capture_default_str();
  c_enc->add_option("--volume", enc.volume, "Volumetric side in voxels")->capture_default_str();
  c_enc->add_option("--depth-range-mm", enc.depth_range_mm, "Depth span of the volume")->capture_default_str();
  c_enc->add_option("--unknown-mask", enc.unknown_policy, "polarity | all")->check(CLI::IsMember({"polarity", "all"}));
  c_enc->add_option("--bones-out", enc.bones_out, "Write the bone-length model learned from the poses");

  DecodeArgs dec;
  auto* c_dec = app.add_subcommand("decode", "Read polarities (and voxel poses) back from a container");
  c_dec->add_option("container", dec.in)->required();
  c_dec->add_option("-o,--out", dec.out, "Write soft-argmax poses as hemlets.poses JSONL");
  c_dec->add_option("--bones", dec.bones, "Bone-length model JSON for metric scaling");
  c_dec->add_option("--presence", dec.presence, "Peak threshold for the +-1 layers")->capture_default_str();

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train-toy", "Train the toy regressor on synthetic poses");
  c_tr->add_option("--epochs", tr.epochs)->capture_default_str();
  c_tr->add_option("--lr", tr.learning_rate)->capture_default_str();
  c_tr->add_option("--alpha", tr.alpha)->capture_default_str();
  c_tr->add_option("--batch-size", tr.batch_size)->capture_default_str();
  c_tr->add_option("--hidden", tr.hidden)->capture_default_str();
  c_tr->add_option("--train-size", tr.train_size)->capture_default_str();
  c_tr->add_option("--val-size", tr.val_size)->capture_default_str();
  c_tr->add_option("--train-3d", tr.train_3d_size, "Training samples with 3D labels; the rest get simulated FBI labels (-1 = all)")
      ->capture_default_str();
  c_tr->add_option("--plane-gain", tr.plane_gain)->capture_default_str();
  c_tr->add_option("--lambda", tr.lambda)->capture_default_str();
  c_tr->add_option("--noise", tr.noise, "2D input noise (grid pixels)")->capture_default_str();
  c_tr->add_option("--data-seed", tr.data_seed)->capture_default_str();
  c_tr->add_flag("--baseline", tr.baseline, "Drop the intermediate HEMlets/2D supervision");
  c_tr->add_flag("--hints", tr.hints, "Feed ground-truth part polarities as extra inputs");
  c_tr->add_option("--log", tr.log, "Line-delimited JSON training log");
  c_tr->add_option("--model", tr.model, "Output parameter container");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "MPJPE / PA-MPJPE / 3DPCK / AUC of a prediction file");
  c_ev->add_option("pred", ev.pred)->required();
  c_ev->add_option("gt", ev.gt)->required();
  c_ev->add_option("--procrustes", ev.procrustes, "similarity | rigid")->capture_default_str();
  c_ev->add_option("--pck-threshold", ev.pck)->capture_default_str();
  c_ev->add_option("--auc-max", ev.auc_max)->capture_default_str();
  c_ev->add_option("--auc-steps", ev.auc_steps)->capture_default_str();
  c_ev->add_flag("--grouped", ev.grouped, "Per-group table using the ground-truth \"group\" field");
  c_ev->add_option("--json", ev.json_out, "Write the report as JSON");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate-fbi", "Noisy FBI labels from 3D ground truth");
  c_sim->add_option("poses", sim.poses)->required();
  c_sim->add_option("-o,--out", sim.out)->required();
  c_sim->add_option("--high-error", sim.high_error)->capture_default_str();
  c_sim->add_option("--high-skip", sim.high_skip)->capture_default_str();
  c_sim->add_option("--low-error", sim.low_error)->capture_default_str();
  c_sim->add_option("--low-skip", sim.low_skip)->capture_default_str();

  ConvertArgs conv;
  auto* c_conv = app.add_subcommand("convert-ordinal", "Ordinal depth pairs to FBI labels");
  c_conv->add_option("ordinal", conv.in)->required();
  c_conv->add_option("-o,--out", conv.out)->required();

  DumpArgs dump;
  auto* c_dump = app.add_subcommand("dump", "PGM images of every heatmap plane and OBJ stick figures");
  c_dump->add_option("container", dump.in)->required();
  c_dump->add_option("-o,--out", dump.out, "Output directory")->required();

  SkinArgs sk;
  auto* c_skin = app.add_subcommand("skin", "Pose the body rig and export an OBJ mesh");
  c_skin->add_option("--params", sk.params, "JSON {\"beta\": [10], \"theta\": [[3] x 24]}");
  c_skin->add_option("--rig", sk.rig, "Rig container (default: built-in synthetic rig)");
  c_skin->add_flag("--random", sk.random, "Draw random parameters from --seed");
  c_skin->add_option("-o,--out", sk.out, "OBJ output");
  c_skin->add_option("--export-rig", sk.export_rig, "Write the rig as a container");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    const auto env_seed = env_integer("HEMLETS_SEED");
    const auto env_threads = env_integer("HEMLETS_THREADS");
    common.seed = seed_flag ? *seed_flag : (env_seed ? static_cast<std::uint64_t>(*env_seed) : 1);
    common.threads = threads_flag ? *threads_flag : (env_threads ? static_cast<int>(*env_threads) : 0);
    apply_threads(common.threads);

    if (c_enc->parsed()) return cmd_encode(enc, out);
    if (c_dec->parsed()) return cmd_decode(dec, out);
    if (c_tr->parsed()) return cmd_train_toy(tr, common, out);
    if (c_ev->parsed()) return cmd_eval(ev, out);
    if (c_sim->parsed()) return cmd_simulate_fbi(sim, common, out);
    if (c_conv->parsed()) return cmd_convert_ordinal(conv, out);
    if (c_dump->parsed()) return cmd_dump(dump, out);
    if (c_skin->parsed()) return cmd_skin(sk, common, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace hemlets::cli
