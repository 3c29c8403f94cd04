#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace deepsith {

template <class T>
concept Real = std::floating_point<T>;

// Deterministic 64-bit generator (splitmix64). The double-producing methods
// avoid std::uniform_real_distribution and friends so that streams are
// bit-identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; two uniforms per draw, no cached state.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

  // Derives an independent stream from (seed, purpose, index). Purpose tags
  // keep consumers (init, shuffle, dropout, data) decoupled: adding a draw to
  // one never shifts another.
  static std::uint64_t derive(std::uint64_t seed, std::string_view purpose,
                              std::uint64_t index = 0) {
    std::uint64_t h = seed ^ 0x51afd7ed558ccd36ull;
    for (const char c : purpose) h = mix_(h ^ static_cast<std::uint8_t>(c));
    return mix_(h ^ index);
  }

 private:
  static std::uint64_t mix_(std::uint64_t z) {
    z = (z + 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

// Dense row-major matrix kernels used by the network layers. All accumulate
// into C so callers control zeroing. Column tiling keeps the streamed operand
// L2-resident; loop order is fixed, so results are reproducible run to run.
namespace detail {
inline constexpr std::size_t kColTile = 256;
}

// C (m x n) += A (m x p) * B (p x n)
template <Real S>
void gemm_acc(const S* A, const S* B, S* C, std::size_t m, std::size_t p,
              std::size_t n) {
  for (std::size_t c0 = 0; c0 < n; c0 += detail::kColTile) {
    const std::size_t c1 = std::min(n, c0 + detail::kColTile);
    for (std::size_t i = 0; i < m; ++i) {
      S* Ci = C + i * n;
      const S* Ai = A + i * p;
      for (std::size_t k = 0; k < p; ++k) {
        const S a = Ai[k];
        if (a == S(0)) continue;
        const S* Bk = B + k * n;
        for (std::size_t j = c0; j < c1; ++j) Ci[j] += a * Bk[j];
      }
    }
  }
}

// C (p x n) += A^T * B where A is (m x p), B is (m x n)
template <Real S>
void gemm_at_acc(const S* A, const S* B, S* C, std::size_t m, std::size_t p,
                 std::size_t n) {
  for (std::size_t c0 = 0; c0 < n; c0 += detail::kColTile) {
    const std::size_t c1 = std::min(n, c0 + detail::kColTile);
    for (std::size_t k = 0; k < p; ++k) {
      S* Ck = C + k * n;
      for (std::size_t i = 0; i < m; ++i) {
        const S a = A[i * p + k];
        if (a == S(0)) continue;
        const S* Bi = B + i * n;
        for (std::size_t j = c0; j < c1; ++j) Ck[j] += a * Bi[j];
      }
    }
  }
}

// C (m x p) += A * B^T where A is (m x n), B is (p x n); rows dotted pairwise.
template <Real S>
void gemm_bt_acc(const S* A, const S* B, S* C, std::size_t m, std::size_t p,
                 std::size_t n) {
  for (std::size_t k = 0; k < p; ++k) {
    const S* Bk = B + k * n;
    for (std::size_t i = 0; i < m; ++i) {
      const S* Ai = A + i * n;
      S acc = 0;
      for (std::size_t j = 0; j < n; ++j) acc += Ai[j] * Bk[j];
      C[i * p + k] += acc;
    }
  }
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace deepsith
