#include <doctest.h>

#include <filesystem>

#include "hemlets/container.hpp"
#include "hemlets/error.hpp"

using namespace hemlets;

TEST_CASE("container round trip preserves order, dims and float32 values") {
  Container c;
  const std::vector<double> a{1.0, -2.5, 3.25, 1e-3, 0.1, 7};
  c.add("alpha", {2, 3}, a);
  c.add("beta", {1}, std::vector<double>{42.0});
  const auto bytes = c.serialize();
  CHECK(bytes[0] == 'H');
  CHECK(bytes[3] == 'C');
  const Container back = Container::deserialize(bytes);
  REQUIRE(back.tensors().size() == 2);
  CHECK(back.tensors()[0].name == "alpha");
  CHECK(back.at("alpha").dims == std::vector<std::uint32_t>{2, 3});
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(back.at("alpha").data[i] == static_cast<float>(a[i]));
  CHECK(back.serialize() == bytes);
  CHECK(back.find("gamma") == nullptr);
  CHECK_THROWS_AS(back.at("gamma"), Error);
}

TEST_CASE("container rejects malformed input") {
  Container c;
  c.add("x", {2}, std::vector<double>{1, 2});
  CHECK_THROWS_AS(c.add("x", {1}, std::vector<double>{1}), Error);
  CHECK_THROWS_AS(c.add("y", {3}, std::vector<double>{1, 2}), Error);
  auto bytes = c.serialize();
  CHECK_THROWS_AS(Container::deserialize(std::span(bytes).first(bytes.size() - 1)), Error);
  bytes.push_back(0);
  CHECK_THROWS_AS(Container::deserialize(bytes), Error);
  bytes[0] = 'X';
  CHECK_THROWS_AS(Container::deserialize(bytes), Error);
}

TEST_CASE("container file io") {
  const auto dir = std::filesystem::temp_directory_path() / "hemlets_container_test";
  std::filesystem::create_directories(dir);
  Container c;
  c.add("v", {3}, std::vector<double>{1, 2, 3});
  write_container(dir / "c.bin", c);
  CHECK(read_container(dir / "c.bin").at("v").data == std::vector<float>{1, 2, 3});
  try {
    read_container(dir / "missing.bin");
    FAIL("missing file read");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
  }
  std::filesystem::remove_all(dir);
}
