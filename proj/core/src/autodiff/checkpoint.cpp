#include "p2p/autodiff/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>

#include "p2p/error.hpp"

namespace p2p::ad {

namespace {

constexpr char kMagic[4] = {'P', '2', 'P', '1'};

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw DataError("cannot open checkpoint for writing: " + path.string());
  }
  template <typename U>
  void uint(U v) {
    unsigned char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
    out_.write(reinterpret_cast<const char*>(bytes), sizeof(U));
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }
  void finish(const std::filesystem::path& path) {
    out_.flush();
    if (!out_) throw DataError("failed writing checkpoint " + path.string());
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw DataError("cannot open checkpoint: " + path.string());
  }
  template <typename U>
  U uint() {
    unsigned char bytes[sizeof(U)];
    raw(reinterpret_cast<char*>(bytes), sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(bytes[i]) << (8 * i));
    return v;
  }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  void raw(char* data, std::size_t n) {
    in_.read(data, static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) {
      throw DataError("truncated checkpoint: " + path_.string());
    }
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
};

}  // namespace

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  Writer w(path);
  w.raw(kMagic, 4);
  w.uint(static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& t : checkpoint.tensors) {
    if (element_count(t.shape) != t.values.size()) {
      throw DimensionError("checkpoint entry " + t.name + " has inconsistent shape");
    }
    w.uint(static_cast<std::uint32_t>(t.name.size()));
    w.raw(t.name.data(), t.name.size());
    w.uint(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.uint(static_cast<std::uint32_t>(d));
    for (float v : t.values) w.f32(v);
  }
  w.uint(static_cast<std::uint8_t>(checkpoint.optimizer.has_value() ? 1 : 0));
  if (checkpoint.optimizer) {
    const auto& s = *checkpoint.optimizer;
    w.uint(static_cast<std::uint64_t>(s.step));
    w.f64(s.beta1);
    w.f64(s.beta2);
    w.f64(s.epsilon);
    w.f64(s.learning_rate);
    if (s.m.size() != s.v.size()) throw DimensionError("adam state has unequal moment lists");
    w.uint(static_cast<std::uint32_t>(s.m.size()));
    for (std::size_t i = 0; i < s.m.size(); ++i) {
      if (s.m[i].size() != s.v[i].size()) throw DimensionError("adam state has unequal moment sizes");
      w.uint(static_cast<std::uint64_t>(s.m[i].size()));
      for (double m : s.m[i]) w.f32(static_cast<float>(m));
      for (double v : s.v[i]) w.f32(static_cast<float>(v));
    }
  }
  w.finish(path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[4];
  r.raw(magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) throw DataError("not a P2P1 checkpoint: " + path.string());

  Checkpoint cp;
  const auto count = r.uint<std::uint32_t>();
  cp.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray t;
    t.name.resize(r.uint<std::uint32_t>());
    r.raw(t.name.data(), t.name.size());
    const auto rank = r.uint<std::uint32_t>();
    for (std::uint32_t d = 0; d < rank; ++d) t.shape.push_back(r.uint<std::uint32_t>());
    t.values.resize(element_count(t.shape));
    for (auto& v : t.values) v = r.f32();
    cp.tensors.push_back(std::move(t));
  }
  if (r.uint<std::uint8_t>() != 0) {
    AdamState s;
    s.step = r.uint<std::uint64_t>();
    s.beta1 = r.f64();
    s.beta2 = r.f64();
    s.epsilon = r.f64();
    s.learning_rate = r.f64();
    const auto moments = r.uint<std::uint32_t>();
    for (std::uint32_t i = 0; i < moments; ++i) {
      const auto n = r.uint<std::uint64_t>();
      std::vector<double> m(n), v(n);
      for (auto& x : m) x = r.f32();
      for (auto& x : v) x = r.f32();
      s.m.push_back(std::move(m));
      s.v.push_back(std::move(v));
    }
    cp.optimizer = std::move(s);
  }
  if (!r.at_end()) throw DataError("trailing bytes after checkpoint: " + path.string());
  return cp;
}

}  // namespace p2p::ad
