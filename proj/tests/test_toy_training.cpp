#include <doctest.h>

#include <cmath>

#include "hemlets/error.hpp"
#include "hemlets/toy_training.hpp"

using namespace hemlets;

namespace {

ToyDataConfig small_data() {
  ToyDataConfig c;
  c.train_size = 24;
  c.val_size = 8;
  return c;
}

ToyTrainConfig short_run() {
  ToyTrainConfig c;
  c.epochs = 2;
  c.hidden = 16;
  c.batch_size = 8;
  return c;
}

}  // namespace

TEST_CASE("dataset layout and mixed supervision") {
  ToyDataConfig c = small_data();
  c.train_3d_size = 10;
  const ToyDataset d = make_toy_dataset(c);
  REQUIRE(d.train.size() == 24);
  REQUIRE(d.val.size() == 8);
  for (int i = 0; i < 24; ++i) CHECK(d.train[i].lambda == (i < 10 ? 1 : 0));
  for (const auto& s : d.val) CHECK(s.lambda == 1);
  CHECK(d.train[0].input.size() == 2 * kNumJoints);
  CHECK(d.train[0].hemlets.values.size() == std::size_t(kNumParts * 3 * 8 * 8));

  // The leading 3D samples do not depend on how many 2D-only samples follow.
  const ToyDataset all3d = make_toy_dataset(small_data());
  CHECK(all3d.train[3].input == d.train[3].input);
  CHECK(all3d.train[15].input == d.train[15].input);
  for (const auto& s : all3d.train) CHECK(s.lambda == 1);

  ToyDataConfig clean = c;
  clean.fbi_noise = FbiNoiseProfile::noise_free();
  const ToyDataset exact = make_toy_dataset(clean);
  const auto& weak = exact.train[20];
  const auto& full = all3d.train[20];
  for (int k = 0; k < kNumParts; ++k)
    if (weak.polarity[k] && full.polarity[k] && *full.polarity[k] != 0) CHECK(*weak.polarity[k] == *full.polarity[k]);
}

TEST_CASE("2D-only samples leave the depth output unsupervised") {
  ToyDataConfig c = small_data();
  c.train_3d_size = 0;
  const ToyDataset d = make_toy_dataset(c);
  ToyModelConfig mc;
  mc.hidden = 8;
  const ToyRegressor model = ToyRegressor::init(mc, 3);
  std::vector<const ToySample*> batch{&d.train[0], &d.train[1]};
  ToyTrainConfig tc = short_run();
  const ToyBatchLoss a = toy_batch_loss(model, batch, tc);
  ToyDataset shifted = d;
  for (auto& s : shifted.train)
    for (auto& p : s.target_voxel.coords) p.z += 3.0;
  std::vector<const ToySample*> moved{&shifted.train[0], &shifted.train[1]};
  CHECK(toy_batch_loss(model, moved, tc).l_3d.item() == a.l_3d.item());
}

TEST_CASE("zero learning rate keeps the parameters") {
  const ToyDataset d = make_toy_dataset(small_data());
  ToyTrainConfig tc = short_run();
  tc.learning_rate = 0.0;
  const TrainResult r = train_toy(d, tc);
  ToyModelConfig mc;
  mc.hidden = tc.hidden;
  const ToyRegressor fresh = ToyRegressor::init(mc, derive_seed(tc.seed, 0));
  for (std::size_t i = 0; i < fresh.parameters().size(); ++i) {
    const auto a = r.model.parameters()[i].values(), b = fresh.parameters()[i].values();
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
  CHECK(r.log.size() == 2);
  CHECK(r.log[0].val_mpjpe_voxel == r.log[1].val_mpjpe_voxel);
}

TEST_CASE("training is deterministic and reduces the training loss") {
  const ToyDataset d = make_toy_dataset(small_data());
  ToyTrainConfig tc = short_run();
  tc.epochs = 6;
  const TrainResult a = train_toy(d, tc);
  const TrainResult b = train_toy(d, tc);
  for (std::size_t e = 0; e < a.log.size(); ++e) CHECK(to_json(a.log[e]).dump() == to_json(b.log[e]).dump());
  CHECK(a.model.to_container().serialize() == b.model.to_container().serialize());
  CHECK(a.log.back().loss.l_tot < a.log.front().loss.l_tot);
  const auto j = to_json(a.log.back());
  for (const char* key : {"epoch", "train_mpjpe_voxel", "val_mpjpe_voxel"}) CHECK(j.contains(key));
}

TEST_CASE("baseline objective is the 3D term alone") {
  const ToyDataset d = make_toy_dataset(small_data());
  ToyModelConfig mc;
  mc.hidden = 8;
  const ToyRegressor model = ToyRegressor::init(mc, 2);
  std::vector<const ToySample*> batch{&d.train[0], &d.train[1], &d.train[2]};
  ToyTrainConfig tc = short_run();
  const ToyBatchLoss full = toy_batch_loss(model, batch, tc);
  CHECK(full.objective.item() ==
        doctest::Approx(tc.alpha * (full.l_hem.item() + full.l_2d.item()) + full.l_3d.item()).epsilon(1e-12));
  tc.intermediate = false;
  const ToyBatchLoss base = toy_batch_loss(model, batch, tc);
  CHECK(base.objective.item() == doctest::Approx(base.l_3d.item()).epsilon(1e-12));
}

TEST_CASE("model container round trip and config errors") {
  ToyModelConfig mc;
  mc.hidden = 8;
  mc.polarity_hints = true;
  const ToyRegressor m = ToyRegressor::init(mc, 4);
  CHECK(m.input_dim() == 2 * kNumJoints + kNumParts);
  const ToyRegressor back = ToyRegressor::from_container(m.to_container());
  CHECK(back.config().hidden == 8);
  CHECK(back.config().polarity_hints);
  CHECK(back.config().plane_gain == mc.plane_gain);
  const ToyDataset d = make_toy_dataset(small_data());
  ToyModelConfig bad;
  bad.grid = {6, 6};
  CHECK_THROWS_AS(ToyRegressor::init(bad, 1), Error);
  ToyTrainConfig tc = short_run();
  tc.lambda = 2;
  CHECK_THROWS_AS(train_toy(d, tc), Error);
}

TEST_CASE("divergence is reported with the last finite state") {
  const ToyDataset d = make_toy_dataset(small_data());
  ToyTrainConfig tc = short_run();
  tc.learning_rate = 1e6;
  tc.epochs = 20;
  try {
    train_toy(d, tc);
    FAIL("no divergence");
  } catch (const TrainingDivergedError& e) {
    CHECK(e.code() == ErrorCode::training_diverged);
    for (const auto& p : e.last_finite().model.parameters())
      for (double v : p.values()) CHECK(std::isfinite(v));
  }
}
