#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "fraudkit/error.hpp"
#include "fraudkit/net.hpp"

namespace fraudkit::net {
namespace {

constexpr char kMagic[4] = {'F', 'K', 'N', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}
  void need(std::size_t k) const {
    if (pos_ + k > n_) throw Error("load_model: truncated file");
  }
  template <typename T>
  T uint() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(p_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  const std::uint8_t* take(std::size_t k) {
    need(k);
    const auto* at = p_ + pos_;
    pos_ += k;
    return at;
  }
  std::size_t remaining() const { return n_ - pos_; }

 private:
  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

std::uint32_t checksum(const std::uint8_t* p, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), p, static_cast<uInt>(n)));
}

}  // namespace

std::vector<std::uint8_t> serialize(const NetworkModel& m) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.uint<std::uint32_t>(kFormatVersion);
  w.uint<std::uint64_t>(m.input_dim());
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(m.layers().size()));
  for (const auto& l : m.layers()) {
    w.uint<std::uint8_t>(static_cast<std::uint8_t>(l.kind));
    w.uint<std::uint8_t>(static_cast<std::uint8_t>(l.activation));
    w.uint<std::uint16_t>(0);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(l.units));
    w.f64(l.rate);
  }
  w.uint<std::uint64_t>(m.init_seed());
  w.uint<std::uint64_t>(m.dropout_seed());
  w.uint<std::uint64_t>(m.parameter_count());
  for (const auto& p : m.params()) {
    for (Eigen::Index i = 0; i < p.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.weights.cols(); ++j) w.f64(p.weights(i, j));
    }
    for (Eigen::Index i = 0; i < p.bias.size(); ++i) w.f64(p.bias(i));
  }
  auto& bytes = w.data();
  const auto crc = checksum(bytes.data(), bytes.size());
  w.uint<std::uint32_t>(crc);
  return std::move(bytes);
}

NetworkModel deserialize(const std::vector<std::uint8_t>& bytes,
                         std::optional<std::size_t> expected_input_dim) {
  if (bytes.size() < sizeof kMagic + 4) throw Error("load_model: truncated file");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw Error("load_model: not a model file");
  const std::size_t body = bytes.size() - 4;
  Reader tail(bytes.data() + body, 4);
  if (tail.uint<std::uint32_t>() != checksum(bytes.data(), body)) {
    throw Error("load_model: checksum mismatch (file corrupted)");
  }

  Reader r(bytes.data(), body);
  r.take(sizeof kMagic);
  const auto version = r.uint<std::uint32_t>();
  if (version != kFormatVersion) {
    throw Error("load_model: format version " + std::to_string(version) + ", expected " +
                std::to_string(kFormatVersion));
  }
  const auto input_dim = static_cast<std::size_t>(r.uint<std::uint64_t>());
  if (expected_input_dim && *expected_input_dim != input_dim) {
    throw Error("load_model: model input_dim " + std::to_string(input_dim) + ", expected " +
                std::to_string(*expected_input_dim));
  }
  const auto layer_count = r.uint<std::uint32_t>();
  std::vector<LayerSpec> layers;
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    LayerSpec l;
    const auto kind = r.uint<std::uint8_t>();
    const auto act = r.uint<std::uint8_t>();
    r.uint<std::uint16_t>();
    if (kind > 1 || act > 2) throw Error("load_model: unknown layer or activation tag");
    l.kind = static_cast<LayerKind>(kind);
    l.activation = static_cast<Activation>(act);
    l.units = r.uint<std::uint32_t>();
    l.rate = r.f64();
    layers.push_back(l);
  }
  const auto init_seed = r.uint<std::uint64_t>();
  const auto dropout_seed = r.uint<std::uint64_t>();
  NetworkModel m(input_dim, std::move(layers), init_seed, dropout_seed);
  if (r.uint<std::uint64_t>() != m.parameter_count()) {
    throw Error("load_model: parameter count does not match the layer list");
  }
  for (auto& p : m.params()) {
    for (Eigen::Index i = 0; i < p.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.weights.cols(); ++j) p.weights(i, j) = r.f64();
    }
    for (Eigen::Index i = 0; i < p.bias.size(); ++i) p.bias(i) = r.f64();
    if (!p.weights.allFinite() || !p.bias.allFinite()) throw Error("load_model: non-finite weight");
  }
  if (r.remaining() != 0) throw Error("load_model: trailing bytes after payload");
  return m;
}

void save_model(const NetworkModel& m, const std::filesystem::path& path) {
  const auto bytes = serialize(m);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write " + path.string());
}

NetworkModel load_model(const std::filesystem::path& path, std::optional<std::size_t> expected_input_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes, expected_input_dim);
}

}  // namespace fraudkit::net
