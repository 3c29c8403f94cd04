#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <zlib.h>

#include "deepsith/common.hpp"

namespace deepsith {

// MD5 digest as lowercase hex. Round constants are derived from their
// defining formula floor(|sin(i+1)| * 2^32) instead of being transcribed.
inline std::string md5_hex(const void* data, std::size_t len) {
  static const int shifts[64] = {7, 12, 17, 22, 7, 12, 17, 22, 7, 12, 17, 22,
                                 7, 12, 17, 22, 5, 9,  14, 20, 5, 9,  14, 20,
                                 5, 9,  14, 20, 5, 9,  14, 20, 4, 11, 16, 23,
                                 4, 11, 16, 23, 4, 11, 16, 23, 4, 11, 16, 23,
                                 6, 10, 15, 21, 6, 10, 15, 21, 6, 10, 15, 21,
                                 6, 10, 15, 21};
  std::uint32_t K[64];
  for (int i = 0; i < 64; ++i)
    K[i] = std::uint32_t(std::floor(std::fabs(std::sin(double(i) + 1.0)) * 4294967296.0));

  std::vector<std::uint8_t> msg(static_cast<const std::uint8_t*>(data),
                                static_cast<const std::uint8_t*>(data) + len);
  msg.push_back(0x80);
  while (msg.size() % 64 != 56) msg.push_back(0);
  const std::uint64_t bits = std::uint64_t(len) * 8;
  for (int i = 0; i < 8; ++i) msg.push_back(std::uint8_t(bits >> (8 * i)));

  std::uint32_t h[4] = {0x67452301u, 0xefcdab89u, 0x98badcfeu, 0x10325476u};
  for (std::size_t chunk = 0; chunk < msg.size(); chunk += 64) {
    std::uint32_t M[16];
    for (int i = 0; i < 16; ++i)
      std::memcpy(&M[i], msg.data() + chunk + 4 * i, 4);  // little-endian host
    std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3];
    for (int i = 0; i < 64; ++i) {
      std::uint32_t f, g;
      if (i < 16) {
        f = (b & c) | (~b & d);
        g = std::uint32_t(i);
      } else if (i < 32) {
        f = (d & b) | (~d & c);
        g = (5u * i + 1u) % 16u;
      } else if (i < 48) {
        f = b ^ c ^ d;
        g = (3u * i + 5u) % 16u;
      } else {
        f = c ^ (b | ~d);
        g = (7u * i) % 16u;
      }
      const std::uint32_t tmp = d;
      d = c;
      c = b;
      const std::uint32_t x = a + f + K[i] + M[g];
      b = b + ((x << shifts[i]) | (x >> (32 - shifts[i])));
      a = tmp;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
  }
  std::string out(32, '0');
  static const char* hex = "0123456789abcdef";
  for (int i = 0; i < 16; ++i) {
    const std::uint8_t byte = std::uint8_t(h[i / 4] >> (8 * (i % 4)));
    out[2 * i] = hex[byte >> 4];
    out[2 * i + 1] = hex[byte & 0xf];
  }
  return out;
}

// Inflates a gzip stream.
inline std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& gz) {
  z_stream strm{};
  if (inflateInit2(&strm, 16 + MAX_WBITS) != Z_OK)
    throw std::runtime_error("gunzip: inflateInit2 failed");
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  strm.next_in = const_cast<std::uint8_t*>(gz.data());
  strm.avail_in = uInt(gz.size());
  int ret = Z_OK;
  do {
    strm.next_out = buf;
    strm.avail_out = sizeof buf;
    ret = inflate(&strm, Z_NO_FLUSH);
    if (ret != Z_OK && ret != Z_STREAM_END) {
      inflateEnd(&strm);
      throw std::runtime_error("gunzip: corrupt stream (zlib code " +
                               std::to_string(ret) + ")");
    }
    out.insert(out.end(), buf, buf + (sizeof buf - strm.avail_out));
  } while (ret != Z_STREAM_END);
  inflateEnd(&strm);
  return out;
}

struct MnistFile {
  const char* name;     // decompressed file name
  const char* md5_gz;   // digest of the .gz payload as served
};

inline constexpr MnistFile kMnistFiles[4] = {
    {"train-images-idx3-ubyte", "f68b3c2dcbeaaa9fbdd348bbdeb94873"},
    {"train-labels-idx1-ubyte", "d53e105ee54ea40749a09fcbcd1e9432"},
    {"t10k-images-idx3-ubyte", "9fb629c4189551a2d022fa330f9573f3"},
    {"t10k-labels-idx1-ubyte", "ec29112dd5afa0611ce80d1b7f02629c"},
};

inline constexpr const char* kMnistDefaultBase =
    "https://ossci-datasets.s3.amazonaws.com/mnist";

}  // namespace deepsith
