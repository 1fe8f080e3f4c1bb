#include "hemlets/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>

#include "hemlets/error.hpp"

namespace hemlets {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'H', 'E', 'M', 'C'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::parse, "container truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t Tensor::element_count() const {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

void Container::add(std::string name, std::vector<std::uint32_t> dims, std::span<const double> values) {
  Tensor t{std::move(name), std::move(dims), std::vector<float>(values.begin(), values.end())};
  add(std::move(t));
}

void Container::add(Tensor tensor) {
  if (tensor.element_count() != tensor.data.size()) {
    throw Error(ErrorCode::dimension, "tensor '" + tensor.name + "' dims do not match data size");
  }
  if (find(tensor.name)) throw Error(ErrorCode::invalid_input, "duplicate tensor '" + tensor.name + "'");
  tensors_.push_back(std::move(tensor));
}

const Tensor* Container::find(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const Tensor& Container::at(const std::string& name) const {
  if (const Tensor* t = find(name)) return *t;
  throw Error(ErrorCode::parse, "container has no tensor '" + name + "'");
}

std::vector<std::uint8_t> Container::serialize() const {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kContainerVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors_.size()));
  for (const Tensor& t : tensors_) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put_u32(out, d);
    for (float f : t.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

Container Container::deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorCode::parse, "bad container magic");
  if (const auto v = r.u32(); v != kContainerVersion) {
    throw Error(ErrorCode::parse, "unsupported container version " + std::to_string(v));
  }
  Container c;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor t;
    t.name.resize(r.u32());
    r.raw(t.name.data(), t.name.size());
    t.dims.resize(r.u32());
    for (auto& d : t.dims) d = r.u32();
    t.data.resize(t.element_count());
    for (float& f : t.data) f = std::bit_cast<float>(r.u32());
    c.add(std::move(t));
  }
  if (!r.done()) throw Error(ErrorCode::parse, "trailing bytes after container");
  return c;
}

void write_container(const std::filesystem::path& path, const Container& container) {
  const auto bytes = container.serialize();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::io, "write failed for " + path.string());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return Container::deserialize(bytes);
}

}  // namespace hemlets
