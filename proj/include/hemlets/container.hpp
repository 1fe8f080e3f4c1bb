#pragma once

// Flat binary tensor container.
//
// Layout (all integers little-endian uint32, data little-endian IEEE float32):
//
//   "HEMC"                      4 magic bytes
//   version                     currently 1
//   tensor_count
//   repeated tensor_count times:
//     name_length, name bytes (UTF-8, no terminator)
//     rank, dims[rank]
//     prod(dims) float32 values, row-major
//
// Tensor order is preserved, so a write of the same content is byte-identical.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hemlets {

inline constexpr std::uint32_t kContainerVersion = 1;

struct Tensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const;
  std::vector<double> as_double() const { return {data.begin(), data.end()}; }
};

class Container {
 public:
  void add(std::string name, std::vector<std::uint32_t> dims, std::span<const double> values);
  void add(Tensor tensor);

  const std::vector<Tensor>& tensors() const { return tensors_; }
  bool empty() const { return tensors_.empty(); }
  const Tensor* find(const std::string& name) const;
  /// Throws parse error when the tensor is missing.
  const Tensor& at(const std::string& name) const;

  std::vector<std::uint8_t> serialize() const;
  static Container deserialize(std::span<const std::uint8_t> bytes);

 private:
  std::vector<Tensor> tensors_;
};

void write_container(const std::filesystem::path& path, const Container& container);
Container read_container(const std::filesystem::path& path);

}  // namespace hemlets
