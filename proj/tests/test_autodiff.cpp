#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "hemlets/autodiff.hpp"
#include "hemlets/error.hpp"
#include "hemlets/toy_training.hpp"
#include "oracles.hpp"

using namespace hemlets;
using ad::DiffArray;

using oracle::max_fd_error;
using oracle::random_var;

TEST_CASE("trivial forward examples") {
  const DiffArray logits = DiffArray::constant({1, 8}, std::vector<double>(8, 3.0));
  const DiffArray sm = ad::softmax_over_axes(logits, 1);
  for (double p : sm.values()) CHECK(p == doctest::Approx(0.125));

  const DiffArray uniform = DiffArray::constant({1, 27}, std::vector<double>(27, 1.0 / 27));
  const DiffArray e = ad::expectation_over_grid(uniform, 3, 3, 3);
  for (double c : e.values()) CHECK(c == doctest::Approx(1.0));

  const DiffArray eye = DiffArray::constant({2, 2}, {1, 0, 0, 1});
  const DiffArray x = DiffArray::constant({2, 3}, {1, 2, 3, 4, 5, 6});
  const DiffArray y = ad::matmul(eye, x);
  CHECK(std::vector<double>(y.values().begin(), y.values().end()) == std::vector<double>{1, 2, 3, 4, 5, 6});

  const DiffArray v = DiffArray::constant({2, 3}, {1, 2, 3, 4, 5, 6});
  const DiffArray c = ad::concat_columns(v, DiffArray::constant({2, 1}, {7, 8}));
  CHECK(std::vector<double>(c.values().begin(), c.values().end()) == std::vector<double>{1, 2, 3, 7, 4, 5, 6, 8});
  const DiffArray dps = ad::depth_plane_sum(DiffArray::constant({1, 2}, {1, 2}), DiffArray::constant({1, 2}, {10, 20}));
  CHECK(std::vector<double>(dps.values().begin(), dps.values().end()) == std::vector<double>{11, 12, 21, 22});
}

TEST_CASE("trivial backward examples and re-zeroing") {
  std::mt19937_64 rng(1);
  DiffArray x = random_var(rng, {3, 4});
  ad::backward(ad::sum(x));
  for (double g : x.grad()) CHECK(g == 1.0);
  const DiffArray s = ad::square_sum(x);
  ad::backward(s);
  ad::backward(s);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x.grad()[i] == doctest::Approx(2.0 * x.values()[i]));
}

TEST_CASE("shape and rank errors") {
  const DiffArray a = DiffArray::zeros({2, 3});
  const DiffArray b = DiffArray::zeros({3, 2});
  CHECK_THROWS_AS(ad::add(a, b), Error);
  CHECK_THROWS_AS(ad::multiply(a, b), Error);
  CHECK_THROWS_AS(ad::matmul(a, a), Error);
  CHECK_THROWS_AS(ad::reshape(a, {5}), Error);
  CHECK_THROWS_AS(DiffArray::constant({2, 2}, {1, 2, 3}), Error);
  try {
    ad::backward(a);
    FAIL("non-scalar sink accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::rank);
  }
}

TEST_CASE("every primitive matches central differences over 20 seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& [name, err] : oracle::primitive_fd_errors(seed)) {
      CAPTURE(seed);
      CAPTURE(name);
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("soft-argmax gradient sums to zero along every block") {
  std::mt19937_64 rng(3);
  DiffArray vol = random_var(rng, {3, 27});
  const DiffArray coords = ad::expectation_over_grid(ad::softmax_over_axes(vol, 1), 3, 3, 3);
  for (int axis = 0; axis < 3; ++axis) {
    std::vector<double> pick(9, 0.0);
    for (int b = 0; b < 3; ++b) pick[3 * b + axis] = 1.0;
    ad::backward(ad::sum(ad::multiply(coords, DiffArray::constant({3, 3}, pick))));
    for (int b = 0; b < 3; ++b) {
      double s = 0.0;
      for (int i = 0; i < 27; ++i) s += vol.grad()[27 * b + i];
      CHECK(std::abs(s) < 1e-12);
    }
  }
}

TEST_CASE("composed pipeline gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    CHECK(oracle::composed_fd_error(seed) < 1e-4);
  }
}
