#include "hemlets/toy_training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hemlets/metrics.hpp"

namespace hemlets {

using ad::DiffArray;

namespace {

constexpr int kInputCoords = 2 * kNumJoints;

int grid_size(const GridSize& g) { return g.height * g.width; }
int volume_size(const VolumeDims& d) { return d.depth * d.height * d.width; }

DiffArray he_uniform(int fan_in, int fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / fan_in);
  std::vector<double> v(static_cast<std::size_t>(fan_in) * fan_out);
  for (double& x : v) x = (2.0 * uniform01(rng) - 1.0) * limit;
  return DiffArray::variable({fan_in, fan_out}, std::move(v));
}

DiffArray bias(int n) { return DiffArray::zeros({n}, true); }

}  // namespace

ToySample make_toy_sample(const Pose3D& pose_mm, const ToyDataConfig& config, std::span<const Vec2> noise) {
  ToySample s;
  const double mm_per_px = config.extent_mm / config.grid.width;
  const Vec2 center{0.5 * (config.grid.width - 1), 0.5 * (config.grid.height - 1)};
  s.joints2d = project_orthographic(pose_mm, mm_per_px, center);
  s.target_voxel = to_voxel_space(pose_mm, config.dims, config.extent_mm);
  s.input.resize(kInputCoords);
  for (int j = 0; j < kNumJoints; ++j) {
    const Vec2 n = noise.empty() ? Vec2{} : noise[j];
    s.input[2 * j] = (s.joints2d.coords[j].x + n.x - center.x) / (0.5 * config.grid.width);
    s.input[2 * j + 1] = (s.joints2d.coords[j].y + n.y - center.y) / (0.5 * config.grid.height);
  }
  EncodeOptions enc;
  enc.grid = config.grid;
  enc.sigma = config.sigma;
  s.hemlets = encode_hemlets(pose_mm, s.joints2d, canonical_skeleton(), enc);
  s.heatmaps2d = render_joint_heatmaps(s.joints2d, config.grid, config.sigma);
  s.polarity = part_polarities(pose_mm);
  return s;
}

ToySample make_toy_sample_2d(const Pose3D& pose_mm, const ToyDataConfig& config, std::span<const Vec2> noise,
                             const FbiRecord& labels) {
  ToySample s = make_toy_sample(pose_mm, config, noise);
  EncodeOptions enc;
  enc.grid = config.grid;
  enc.sigma = config.sigma;
  s.polarity = fbi_to_mask(labels);
  s.hemlets = encode_hemlets_labeled(s.joints2d, s.polarity, canonical_skeleton(), enc);
  s.lambda = 0;
  return s;
}

ToyDataset make_toy_dataset(const ToyDataConfig& config) {
  if (config.train_size <= 0) throw Error(ErrorCode::config, "toy dataset needs at least one training sample");
  if (config.val_size < 0) throw Error(ErrorCode::config, "validation size must be non-negative");
  ToyDataset d;
  d.config = config;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n3d = config.train_3d_size < 0 ? config.train_size : std::min(config.train_3d_size, config.train_size);
  std::vector<Pose3D> poses;
  std::vector<std::array<Vec2, kNumJoints>> noises;
  for (int i = 0; i < config.train_size + config.val_size; ++i) {
    poses.push_back(random_pose_mm(rng, config.poses));
    auto& noise = noises.emplace_back();
    for (auto& n : noise) n = {config.input_noise_px * gauss(rng), config.input_noise_px * gauss(rng)};
  }
  const auto weak = std::span(poses).subspan(n3d, config.train_size - n3d);
  const FBIAnnotationSet labels = simulate_fbi_annotator(weak, config.fbi_noise, derive_seed(config.seed, 1));
  for (int i = 0; i < config.train_size + config.val_size; ++i) {
    const bool weak_sample = i >= n3d && i < config.train_size;
    ToySample s = weak_sample ? make_toy_sample_2d(poses[i], config, noises[i], labels[i - n3d])
                              : make_toy_sample(poses[i], config, noises[i]);
    (i < config.train_size ? d.train : d.val).push_back(std::move(s));
  }
  return d;
}

int ToyRegressor::input_dim() const { return kInputCoords + (config_.polarity_hints ? kNumParts : 0); }

const std::vector<std::string>& ToyRegressor::parameter_names() {
  static const std::vector<std::string> names = {"toy.w1",  "toy.b1", "toy.w_hem", "toy.b_hem", "toy.w_hm",
                                                 "toy.b_hm", "toy.w2", "toy.b2",    "toy.w_depth", "toy.b_depth"};
  return names;
}

ToyRegressor ToyRegressor::init(const ToyModelConfig& config, std::uint64_t seed) {
  if (config.hidden <= 0 || grid_size(config.grid) <= 0 || volume_size(config.dims) <= 0) {
    throw Error(ErrorCode::config, "toy model sizes must be positive");
  }
  if (config.grid.height != config.dims.height || config.grid.width != config.dims.width) {
    throw Error(ErrorCode::config, "toy heatmap grid must match the volume's height and width");
  }
  ToyRegressor m;
  m.config_ = config;
  std::mt19937_64 rng(seed);
  const int h = config.hidden;
  const int hem = kNumParts * 3 * grid_size(config.grid);
  const int hm = kNumJoints * grid_size(config.grid);
  const int depth = kNumJoints * config.dims.depth;
  m.params_ = {he_uniform(m.input_dim(), h, rng), bias(h),   he_uniform(h, hem, rng), bias(hem),
               he_uniform(h, hm, rng),          bias(hm),  he_uniform(h + hem + hm, h, rng), bias(h),
               he_uniform(h, depth, rng),       bias(depth)};
  return m;
}

ToyForward ToyRegressor::forward(const DiffArray& input) const {
  if (params_.empty()) throw Error(ErrorCode::not_ready, "toy regressor has no parameters");
  if (input.rank() != 2 || input.dim(1) != input_dim()) throw Error(ErrorCode::dimension, "toy input must be [B, in]");
  const auto& p = params_;
  const int batch = input.dim(0);
  const DiffArray h1 = ad::relu(ad::add(ad::matmul(input, p[0]), p[1]));
  ToyForward f;
  f.hemlets = ad::add(ad::matmul(h1, p[2]), p[3]);
  f.heatmaps = ad::add(ad::matmul(h1, p[4]), p[5]);
  const DiffArray joined = ad::concat_columns(ad::concat_columns(h1, f.hemlets), f.heatmaps);
  const DiffArray h2 = ad::relu(ad::add(ad::matmul(joined, p[6]), p[7]));
  const DiffArray depth = ad::reshape(ad::add(ad::matmul(h2, p[8]), p[9]), {batch * kNumJoints, config_.dims.depth});
  const DiffArray plane = ad::scale(ad::reshape(f.heatmaps, {batch * kNumJoints, grid_size(config_.grid)}),
                                    config_.plane_gain);
  const DiffArray prob = ad::softmax_over_axes(ad::depth_plane_sum(plane, depth), 1);
  f.coords = ad::expectation_over_grid(prob, config_.dims.depth, config_.dims.height, config_.dims.width);
  return f;
}

namespace {

DiffArray batch_input(const ToyRegressor& model, std::span<const ToySample* const> batch) {
  const int in = model.input_dim();
  std::vector<double> x;
  x.reserve(batch.size() * in);
  for (const ToySample* s : batch) {
    x.insert(x.end(), s->input.begin(), s->input.end());
    if (model.config().polarity_hints) {
      for (const auto& r : s->polarity) x.push_back(r ? static_cast<double>(*r) : 0.0);
    }
  }
  return DiffArray::constant({static_cast<int>(batch.size()), in}, std::move(x));
}

}  // namespace

std::vector<Pose3D> ToyRegressor::predict(std::span<const ToySample> samples) const {
  std::vector<Pose3D> out;
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    std::vector<const ToySample*> chunk;
    for (std::size_t i = start; i < std::min(samples.size(), start + kChunk); ++i) chunk.push_back(&samples[i]);
    const ToyForward f = forward(batch_input(*this, chunk));
    const auto c = f.coords.values();
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      Pose3D p = Pose3D::all_valid();
      p.voxel_units = true;
      for (int j = 0; j < kNumJoints; ++j) {
        const std::size_t r = 3 * (b * kNumJoints + j);
        p.coords[j] = {c[r], c[r + 1], c[r + 2]};
      }
      out.push_back(p);
    }
  }
  return out;
}

Container ToyRegressor::to_container() const {
  Container c;
  const std::vector<double> cfg = {static_cast<double>(config_.hidden), config_.polarity_hints ? 1.0 : 0.0,
                                   static_cast<double>(config_.grid.height), static_cast<double>(config_.grid.width),
                                   static_cast<double>(config_.dims.depth), static_cast<double>(config_.dims.height),
                                   static_cast<double>(config_.dims.width), config_.plane_gain};
  c.add("toy.config", {static_cast<std::uint32_t>(cfg.size())}, cfg);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    std::vector<std::uint32_t> dims(params_[i].shape().begin(), params_[i].shape().end());
    c.add(parameter_names()[i], dims, params_[i].values());
  }
  return c;
}

ToyRegressor ToyRegressor::from_container(const Container& container) {
  const auto cfg = container.at("toy.config").as_double();
  if (cfg.size() != 8) throw Error(ErrorCode::parse, "toy.config must hold 8 values");
  ToyModelConfig mc;
  mc.hidden = static_cast<int>(cfg[0]);
  mc.polarity_hints = cfg[1] != 0.0;
  mc.grid = {static_cast<int>(cfg[2]), static_cast<int>(cfg[3])};
  mc.dims = {static_cast<int>(cfg[4]), static_cast<int>(cfg[5]), static_cast<int>(cfg[6])};
  mc.plane_gain = cfg[7];
  ToyRegressor m = init(mc, 0);
  for (std::size_t i = 0; i < m.params_.size(); ++i) {
    const Tensor& t = container.at(parameter_names()[i]);
    if (t.element_count() != m.params_[i].size()) throw Error(ErrorCode::parse, t.name + ": unexpected size");
    const auto v = t.as_double();
    std::copy(v.begin(), v.end(), m.params_[i].mutable_values().begin());
  }
  return m;
}

ToyBatchLoss toy_batch_loss(const ToyRegressor& model, std::span<const ToySample* const> batch,
                            const ToyTrainConfig& config) {
  if (config.lambda != 0 && config.lambda != 1) throw Error(ErrorCode::config, "lambda must be 0 or 1");
  const ToyForward f = model.forward(batch_input(model, batch));

  std::vector<double> gt, weight, hem_gt, hem_mask, hm_gt;
  for (const ToySample* s : batch) {
    for (int j = 0; j < kNumJoints; ++j) {
      const Vec3 c = s->target_voxel.coords[j];
      const double v = s->target_voxel.valid[j] ? 1.0 : 0.0;
      gt.insert(gt.end(), {c.x, c.y, c.z});
      weight.insert(weight.end(), {v, v, v * s->lambda * config.lambda});
    }
    hem_gt.insert(hem_gt.end(), s->hemlets.values.begin(), s->hemlets.values.end());
    for (std::uint8_t m : s->hemlets.mask) hem_mask.push_back(m);
    hm_gt.insert(hm_gt.end(), s->heatmaps2d.values.begin(), s->heatmaps2d.values.end());
  }
  ToyBatchLoss l;
  l.l_3d = ad::abs_sum(ad::multiply(ad::sub(f.coords, DiffArray::constant(f.coords.shape(), std::move(gt))),
                                    DiffArray::constant(f.coords.shape(), std::move(weight))));
  l.l_hem = ad::square_sum(ad::multiply(ad::sub(f.hemlets, DiffArray::constant(f.hemlets.shape(), std::move(hem_gt))),
                                        DiffArray::constant(f.hemlets.shape(), std::move(hem_mask))));
  l.l_2d = ad::square_sum(ad::sub(f.heatmaps, DiffArray::constant(f.heatmaps.shape(), std::move(hm_gt))));
  l.objective = config.intermediate ? ad::add(l.l_3d, ad::scale(ad::add(l.l_hem, l.l_2d), config.alpha)) : l.l_3d;
  return l;
}

double voxel_mpjpe(std::span<const Pose3D> pred, std::span<const ToySample> samples) {
  if (pred.size() != samples.size() || pred.empty()) throw Error(ErrorCode::empty_evaluation, "no poses to score");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += mpjpe(pred[i], samples[i].target_voxel);
  return s / static_cast<double>(pred.size());
}

nlohmann::json to_json(const EpochLog& log) {
  return {{"epoch", log.epoch},
          {"loss", to_json(log.loss)},
          {"train_mpjpe_voxel", log.train_mpjpe_voxel},
          {"val_mpjpe_voxel", log.val_mpjpe_voxel}};
}

TrainResult train_toy(const ToyDataset& data, const ToyTrainConfig& config,
                      const std::function<void(const EpochLog&)>& on_epoch) {
  if (data.train.empty()) throw Error(ErrorCode::config, "training set is empty");
  if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
    throw Error(ErrorCode::config, "learning rate must be finite and non-negative");
  }
  if (config.epochs < 0 || config.batch_size <= 0) throw Error(ErrorCode::config, "epochs/batch size out of range");

  ToyModelConfig mc;
  mc.hidden = config.hidden;
  mc.polarity_hints = config.polarity_hints;
  mc.plane_gain = config.plane_gain;
  mc.grid = data.config.grid;
  mc.dims = data.config.dims;

  TrainResult result;
  result.model = ToyRegressor::init(mc, derive_seed(config.seed, 0));
  std::mt19937_64 rng(derive_seed(config.seed, 1));
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1))]);
    }
    double s_hem = 0.0, s_2d = 0.0, s_3d = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<const ToySample*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        batch.push_back(&data.train[order[i]]);
      }
      const ToyBatchLoss l = toy_batch_loss(result.model, batch, config);
      const DiffArray objective = ad::scale(l.objective, 1.0 / static_cast<double>(batch.size()));
      if (!std::isfinite(objective.item())) {
        throw TrainingDivergedError("non-finite loss in epoch " + std::to_string(epoch), result);
      }
      s_hem += l.l_hem.item();
      s_2d += l.l_2d.item();
      s_3d += l.l_3d.item();
      if (config.learning_rate == 0.0) continue;
      ad::backward(objective);
      for (DiffArray& p : result.model.parameters()) {
        auto v = p.mutable_values();
        const auto g = p.grad();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= config.learning_rate * g[i];
      }
    }
    const double n = static_cast<double>(data.train.size());
    EpochLog e;
    e.epoch = epoch;
    e.loss = LossBreakdown::combine(s_hem / n, s_2d / n, s_3d / n, config.lambda,
                                    config.intermediate ? config.alpha : 0.0);
    e.train_mpjpe_voxel = voxel_mpjpe(result.model.predict(data.train), data.train);
    e.val_mpjpe_voxel = data.val.empty() ? 0.0 : voxel_mpjpe(result.model.predict(data.val), data.val);
    result.log.push_back(e);
    if (on_epoch) on_epoch(e);
  }
  return result;
}

}  // namespace hemlets
