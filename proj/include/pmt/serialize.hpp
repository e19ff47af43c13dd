#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "pmt/model.hpp"
#include "pmt/tensor.hpp"

namespace pmt {

struct SerializeError : Error {
  using Error::Error;
};
struct BadMagicError : SerializeError {
  using SerializeError::SerializeError;
};
struct VersionMismatchError : SerializeError {
  using SerializeError::SerializeError;
};
struct TruncatedStreamError : SerializeError {
  using SerializeError::SerializeError;
};
struct SchemaMismatchError : SerializeError {
  using SerializeError::SerializeError;
};

using Bytes = std::vector<std::uint8_t>;
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

namespace detail {

inline void put_u16(Bytes& b, std::uint16_t v) {
  b.push_back(v & 0xFF);
  b.push_back((v >> 8) & 0xFF);
}
inline void put_u32(Bytes& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xFF);
}
inline void put_f64(Bytes& b, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  for (int i = 0; i < 8; ++i) b.push_back((u >> (8 * i)) & 0xFF);
}

struct Reader {
  const Bytes& b;
  std::size_t pos = 0;
  std::string context = "stream";

  void need(std::size_t n) const {
    if (pos + n > b.size()) {
      throw TruncatedStreamError("truncated stream while reading " + context);
    }
  }
  std::uint8_t u8() {
    need(1);
    return b[pos++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = b[pos] | (std::uint16_t(b[pos + 1]) << 8);
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= std::uint64_t(b[pos + i]) << (8 * i);
    pos += 8;
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(&b[pos]), n);
    pos += n;
    return s;
  }
};

}  // namespace detail

inline constexpr char kWeightMagic[4] = {'P', 'M', 'T', 'W'};
inline constexpr std::uint32_t kWeightVersion = 1;

// "PMTW" | version u32 LE | tensor count u32 LE | per tensor:
// name len u16 LE, name, rank u8, dims u32 LE, values f64 LE.
inline Bytes serialize_tensors(const NamedTensors& tensors) {
  Bytes out;
  out.insert(out.end(), kWeightMagic, kWeightMagic + 4);
  detail::put_u32(out, kWeightVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    detail::put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(t.shape.size()));
    for (std::size_t d : t.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.values) detail::put_f64(out, v);
  }
  return out;
}

inline NamedTensors deserialize_tensors(const Bytes& bytes) {
  detail::Reader r{bytes};
  r.context = "magic";
  r.need(4);
  if (std::memcmp(&bytes[0], kWeightMagic, 4) != 0) {
    throw BadMagicError("bad magic: not a PMTW weight stream");
  }
  r.pos = 4;
  r.context = "version";
  const std::uint32_t version = r.u32();
  if (version != kWeightVersion) {
    throw VersionMismatchError("unsupported weight version " +
                               std::to_string(version));
  }
  r.context = "tensor count";
  const std::uint32_t count = r.u32();
  NamedTensors out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    r.context = "tensor " + std::to_string(i) + " header";
    const std::uint16_t name_len = r.u16();
    const std::string name = r.str(name_len);
    r.context = "tensor \"" + name + "\"";
    const std::uint8_t rank = r.u8();
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    Tensor t(shape);
    for (double& v : t.values) v = r.f64();
    out.emplace_back(name, std::move(t));
  }
  return out;
}

inline std::string tensor_name(std::size_t layer, std::size_t param_index) {
  return "layer" + std::to_string(layer) +
         (param_index == 0 ? ".weight" : ".bias");
}

inline Bytes serialize_weights(const Model& m) {
  NamedTensors named;
  for (std::size_t li = 0; li < m.num_layers(); ++li) {
    for (std::size_t pi = 0; pi < m.params[li].size(); ++pi) {
      named.emplace_back(tensor_name(li, pi), m.params[li][pi]);
    }
  }
  return serialize_tensors(named);
}

// Exact inverse of serialize_weights; names and shapes must match the spec.
inline Model deserialize_weights(const Bytes& bytes, const ModelSpec& spec) {
  spec.validate();
  NamedTensors named = deserialize_tensors(bytes);
  Model m{spec, {}, 0};
  m.params.resize(spec.layers.size());
  std::size_t cursor = 0;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    auto shapes = layer_param_shapes(spec.layers[li]);
    for (std::size_t pi = 0; pi < shapes.size(); ++pi) {
      if (cursor >= named.size()) {
        throw SchemaMismatchError("missing tensor " + tensor_name(li, pi));
      }
      auto& [name, t] = named[cursor++];
      if (name != tensor_name(li, pi)) {
        throw SchemaMismatchError("tensor name \"" + name + "\", expected \"" +
                                  tensor_name(li, pi) + "\"");
      }
      if (t.shape != shapes[pi]) {
        throw SchemaMismatchError("tensor \"" + name + "\" shape " +
                                  shape_str(t.shape) + ", expected " +
                                  shape_str(shapes[pi]));
      }
      m.params[li].push_back(std::move(t));
    }
  }
  if (cursor != named.size()) {
    throw SchemaMismatchError("stream has " + std::to_string(named.size()) +
                              " tensors, spec expects " + std::to_string(cursor));
  }
  return m;
}

inline void write_file(const std::string& path, const Bytes& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path);
}

inline Bytes read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw IoError("cannot open " + path);
  const auto size = f.tellg();
  f.seekg(0);
  Bytes bytes(static_cast<std::size_t>(size));
  f.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!f) throw IoError("read failed: " + path);
  return bytes;
}

}  // namespace pmt
