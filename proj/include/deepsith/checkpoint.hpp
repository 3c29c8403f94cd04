#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "deepsith/common.hpp"
#include "deepsith/nn.hpp"

namespace deepsith {

// Checkpoint layout (little-endian):
//   "DSTH" | u32 version | u64 json_len | json bytes |
//   u32 n_arrays | per array: u16 name_len | name | u8 dtype | u64 count | data
// dtype is the element size in bytes (4 = float, 8 = double). The JSON blob
// is an opaque config echo; loading checks it byte-for-byte against the
// caller's expectation only if one is supplied.

namespace detail {

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), std::streamsize(n));
}

template <class T>
void put(std::ostream& os, T v) {
  put_bytes(os, &v, sizeof(T));
}

inline void get_bytes(std::istream& is, void* p, std::size_t n) {
  is.read(static_cast<char*>(p), std::streamsize(n));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
}

template <class T>
T get(std::istream& is) {
  T v;
  get_bytes(is, &v, sizeof(T));
  return v;
}

}  // namespace detail

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <Real S>
void save_checkpoint(const std::string& path, DeepSITHNet<S>& net,
                     const std::string& config_json) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  detail::put_bytes(os, "DSTH", 4);
  detail::put(os, kCheckpointVersion);
  detail::put(os, std::uint64_t(config_json.size()));
  detail::put_bytes(os, config_json.data(), config_json.size());
  auto params = param_views(net);
  auto buffers = buffer_views(net);
  detail::put(os, std::uint32_t(params.size() + buffers.size()));
  auto dump = [&os](const ArrayView<S>& view) {
    detail::put(os, std::uint16_t(view.name.size()));
    detail::put_bytes(os, view.name.data(), view.name.size());
    detail::put(os, std::uint8_t(sizeof(S)));
    detail::put(os, std::uint64_t(view.size));
    detail::put_bytes(os, view.data, view.size * sizeof(S));
  };
  for (const auto& view : params) dump(view);
  for (const auto& view : buffers) dump(view);
  if (!os) throw std::runtime_error("checkpoint: write to " + path + " failed");
}

// Reads the config echo without touching any arrays.
inline std::string read_checkpoint_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  detail::get_bytes(is, magic, 4);
  if (std::memcmp(magic, "DSTH", 4) != 0)
    throw std::runtime_error("checkpoint: " + path + " has the wrong magic bytes");
  const auto version = detail::get<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const auto len = detail::get<std::uint64_t>(is);
  std::string json(len, '\0');
  detail::get_bytes(is, json.data(), len);
  return json;
}

// Loads arrays into an already-built net; shapes and names must match what
// save_checkpoint wrote for an identically configured network.
template <Real S>
std::string load_checkpoint(const std::string& path, DeepSITHNet<S>& net) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  detail::get_bytes(is, magic, 4);
  if (std::memcmp(magic, "DSTH", 4) != 0)
    throw std::runtime_error("checkpoint: " + path + " has the wrong magic bytes");
  const auto version = detail::get<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const auto len = detail::get<std::uint64_t>(is);
  std::string json(len, '\0');
  detail::get_bytes(is, json.data(), len);

  auto params = param_views(net);
  auto buffers = buffer_views(net);
  std::vector<ArrayView<S>*> expected;
  for (auto& view : params) expected.push_back(&view);
  for (auto& view : buffers) expected.push_back(&view);
  const auto count = detail::get<std::uint32_t>(is);
  if (count != expected.size())
    throw std::runtime_error("checkpoint: " + path + " holds " + std::to_string(count) +
                             " arrays, expected " + std::to_string(expected.size()));
  for (auto* view : expected) {
    const auto name_len = detail::get<std::uint16_t>(is);
    std::string name(name_len, '\0');
    detail::get_bytes(is, name.data(), name_len);
    if (name != view->name)
      throw std::runtime_error("checkpoint: array '" + name + "' where '" +
                               view->name + "' was expected");
    const auto dtype = detail::get<std::uint8_t>(is);
    if (dtype != sizeof(S))
      throw std::runtime_error("checkpoint: array '" + name + "' holds " +
                               std::to_string(dtype) + "-byte elements, expected " +
                               std::to_string(sizeof(S)));
    const auto n = detail::get<std::uint64_t>(is);
    if (n != view->size)
      throw std::runtime_error("checkpoint: array '" + name + "' has " +
                               std::to_string(n) + " elements, expected " +
                               std::to_string(view->size));
    detail::get_bytes(is, view->data, n * sizeof(S));
  }
  return json;
}

}  // namespace deepsith
