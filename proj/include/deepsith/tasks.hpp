#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "deepsith/common.hpp"
#include "deepsith/sith.hpp"

namespace deepsith {

// One supervised example. Classification fills `label`; regression fills
// `target` (scalar target -> size 1, series target -> one value per step,
// possibly fewer than input steps when the task predicts ahead).
template <Real S = double>
struct Example {
  Signal<S> input;
  std::vector<S> target;
  int label = -1;
};

// --- adding problem ----------------------------------------------------------

// Two channels: channel 0 is uniform noise in [0,1), channel 1 marks exactly
// two steps with 1 (one in each half of the sequence). The target is the sum
// of channel 0 at the marked steps. Draw order is fixed: T value draws, then
// the two marker positions.
template <Real S = double>
Example<S> gen_adding(std::size_t T, std::uint64_t seed) {
  require(T >= 2, "gen_adding: need at least two steps");
  Rng rng(seed);
  Example<S> ex;
  ex.input = Signal<S>(T, 2);
  for (std::size_t t = 0; t < T; ++t)
    ex.input.at(t, 0) = static_cast<S>(rng.uniform());
  const std::size_t half = T / 2;
  const std::size_t m1 = rng.below(half);
  const std::size_t m2 = half + rng.below(T - half);
  ex.input.at(m1, 1) = S(1);
  ex.input.at(m2, 1) = S(1);
  ex.target = {static_cast<S>(ex.input.at(m1, 0) + ex.input.at(m2, 0))};
  return ex;
}

// --- Mackey-Glass ------------------------------------------------------------

struct MackeyGlassParams {
  double tau = 17;
  double beta = 0.2;
  double gamma = 0.1;
  double n = 10;
  double dt = 1.0;
  std::size_t warmup = 500;
  double history_base = 1.2;
  double history_jitter = 0.1;  // uniform +- jitter on the constant history
};

namespace detail {

inline double mg_drift(double x_delayed, double x, const MackeyGlassParams& p) {
  return p.beta * x_delayed / (1.0 + std::pow(x_delayed, p.n)) - p.gamma * x;
}

}  // namespace detail

// Integrates the delay equation
//   x'(t) = beta x(t-tau) / (1 + x(t-tau)^n) - gamma x(t)
// with classic RK4 and linear interpolation into the stored trajectory for
// the delayed term. Constant history on t <= 0. Returns x sampled at the
// first `length` steps after the warmup period.
inline std::vector<double> gen_mackey_glass(const MackeyGlassParams& p,
                                            std::size_t length,
                                            std::uint64_t seed) {
  require(p.tau >= p.dt, "gen_mackey_glass: tau must be at least dt");
  require(p.dt > 0 && p.beta > 0 && p.gamma > 0, "gen_mackey_glass: bad params");
  require(length >= 1, "gen_mackey_glass: need a positive length");
  Rng rng(seed);
  const double hist =
      p.history_base + (p.history_jitter > 0
                            ? rng.uniform(-p.history_jitter, p.history_jitter)
                            : 0.0);
  const std::size_t total = p.warmup + length;
  std::vector<double> x(total);
  auto value_at = [&](double t) -> double {
    if (t <= 0.0) return hist;
    const double s = t / p.dt - 1.0;  // x[j] holds the state at t = (j+1)*dt
    const long lo = long(std::floor(s));
    const double w = s - double(lo);
    const double a = lo < 0 ? hist : x[std::size_t(lo)];
    if (w == 0.0 || lo + 1 >= long(total)) return a;
    const double b = x[std::size_t(lo + 1)];
    return a * (1.0 - w) + b * w;
  };
  double cur = hist;
  for (std::size_t j = 0; j < total; ++j) {
    const double t = double(j) * p.dt;
    const double h = p.dt;
    const double k1 = detail::mg_drift(value_at(t - p.tau), cur, p);
    const double k2 = detail::mg_drift(value_at(t + h / 2 - p.tau), cur + h / 2 * k1, p);
    const double k3 = detail::mg_drift(value_at(t + h / 2 - p.tau), cur + h / 2 * k2, p);
    const double k4 = detail::mg_drift(value_at(t + h - p.tau), cur + h * k3, p);
    cur += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    x[j] = cur;
  }
  return {x.begin() + std::ptrdiff_t(p.warmup), x.end()};
}

// Delay/look-ahead pairs forming the prediction benchmark grid.
inline std::vector<std::pair<int, int>> mackey_glass_pairs() {
  return {{17, 15}, {34, 30}, {51, 45}, {68, 60}, {85, 75}};
}

template <Real S = double>
struct SplitDataset {
  std::vector<Example<S>> train, test;
};

// Independent series per example (seed derived from the master seed and the
// series index); input is the first `signal_len` steps, target[t] = x(t+dist)
// for every input step. First half of the series goes to train, second half
// to test.
template <Real S = double>
SplitDataset<S> make_mackey_glass_dataset(const MackeyGlassParams& p, int dist,
                                          std::size_t n_signals,
                                          std::size_t signal_len,
                                          std::uint64_t seed) {
  require(dist >= 1, "make_mackey_glass_dataset: dist must be positive");
  require(n_signals >= 2 && n_signals % 2 == 0,
          "make_mackey_glass_dataset: n_signals must be even");
  SplitDataset<S> ds;
  for (std::size_t i = 0; i < n_signals; ++i) {
    const auto series =
        gen_mackey_glass(p, signal_len + std::size_t(dist), Rng::derive(seed, "mg", i));
    Example<S> ex;
    ex.input = Signal<S>(signal_len, 1);
    for (std::size_t t = 0; t < signal_len; ++t)
      ex.input.at(t, 0) = static_cast<S>(series[t]);
    ex.target.resize(signal_len);
    for (std::size_t t = 0; t < signal_len; ++t)
      ex.target[t] = static_cast<S>(series[t + std::size_t(dist)]);
    (i < n_signals / 2 ? ds.train : ds.test).push_back(std::move(ex));
  }
  return ds;
}

// --- hateful eight -----------------------------------------------------------

// Eight classes, one per 3-symbol dot/dash code (class bit j set -> symbol j
// is a dash). Dots last 1 step, dashes 3, symbols are separated by 1-step
// gaps, and every pattern ends with 3 steps of silence; the whole code fits a
// fixed 17-step window, zero-padded on the right. The window comes first,
// then `noise_len` steps of signal-similar noise, so the classifier has to
// carry the decoded class through an arbitrarily long distracting tail.
inline constexpr std::size_t kHateful8Window = 17;
inline constexpr int kHateful8Classes = 8;

inline std::array<std::uint8_t, kHateful8Window> hateful8_pattern(int cls) {
  require(cls >= 0 && cls < kHateful8Classes, "hateful8_pattern: class out of range");
  std::array<std::uint8_t, kHateful8Window> w{};
  std::size_t pos = 0;
  for (int sym = 0; sym < 3; ++sym) {
    const std::size_t len = (cls >> sym) & 1 ? 3 : 1;
    for (std::size_t j = 0; j < len; ++j) w[pos++] = 1;
    if (sym < 2) ++pos;  // inter-symbol gap
  }
  return w;  // worst case fills 11 steps; >= 3 trailing zeros always remain
}

// The noise is a stream of three-symbol pseudo-letters with the same
// statistics as the signals: dots and dashes in even mixture, 1-step gaps
// inside a letter, a 3-step pause after each, truncated at noise_len.
template <Real S = double>
Example<S> gen_hateful8(std::size_t noise_len, int cls, std::uint64_t seed) {
  Rng rng(seed);
  const auto pattern = hateful8_pattern(cls);
  Example<S> ex;
  ex.input = Signal<S>(kHateful8Window + noise_len, 1);
  for (std::size_t j = 0; j < kHateful8Window; ++j)
    ex.input.at(j, 0) = static_cast<S>(pattern[j]);
  const std::size_t end = kHateful8Window + noise_len;
  std::size_t t = kHateful8Window;
  while (t < end) {
    for (int sym = 0; sym < 3 && t < end; ++sym) {
      const std::size_t len = rng.next_u64() & 1 ? 3 : 1;
      for (std::size_t j = 0; j < len && t < end; ++j) ex.input.at(t++, 0) = S(1);
      if (sym < 2) ++t;  // intra-letter gap
    }
    t += 3;  // letter-end pause
  }
  ex.label = cls;
  return ex;
}

// 32 train and 10 test examples per class, fresh noise for every example.
template <Real S = double>
SplitDataset<S> make_hateful8_dataset(std::size_t noise_len, std::uint64_t seed,
                                      std::size_t train_per_class = 32,
                                      std::size_t test_per_class = 10) {
  SplitDataset<S> ds;
  for (int cls = 0; cls < kHateful8Classes; ++cls) {
    for (std::size_t i = 0; i < train_per_class; ++i)
      ds.train.push_back(gen_hateful8<S>(
          noise_len, cls, Rng::derive(seed, "h8-train", std::uint64_t(cls) * 10000 + i)));
    for (std::size_t i = 0; i < test_per_class; ++i)
      ds.test.push_back(gen_hateful8<S>(
          noise_len, cls, Rng::derive(seed, "h8-test", std::uint64_t(cls) * 10000 + i)));
  }
  return ds;
}

// --- MNIST -------------------------------------------------------------------

struct MnistSet {
  std::size_t count = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols
  std::vector<std::uint8_t> labels;  // count

  std::size_t pixels_per_image() const { return rows * cols; }
};

namespace detail {

inline std::uint32_t read_be32(std::istream& is, const std::string& path) {
  std::uint8_t b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("idx: " + path + " is truncated");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace detail

// Reads one images/labels pair in IDX format (big-endian headers, magic
// 0x803 for 3-d byte tensors, 0x801 for label vectors).
inline MnistSet read_idx(const std::string& images_path,
                         const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw std::runtime_error("idx: cannot open " + images_path);
  if (detail::read_be32(imgs, images_path) != 0x00000803u)
    throw std::runtime_error("idx: " + images_path + " is not an image file");
  MnistSet set;
  set.count = detail::read_be32(imgs, images_path);
  set.rows = detail::read_be32(imgs, images_path);
  set.cols = detail::read_be32(imgs, images_path);
  set.pixels.resize(set.count * set.rows * set.cols);
  imgs.read(reinterpret_cast<char*>(set.pixels.data()),
            std::streamsize(set.pixels.size()));
  if (!imgs || imgs.gcount() != std::streamsize(set.pixels.size()))
    throw std::runtime_error("idx: " + images_path + " is truncated");

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw std::runtime_error("idx: cannot open " + labels_path);
  if (detail::read_be32(labs, labels_path) != 0x00000801u)
    throw std::runtime_error("idx: " + labels_path + " is not a label file");
  const std::size_t n = detail::read_be32(labs, labels_path);
  if (n != set.count)
    throw std::runtime_error("idx: " + images_path + " holds " +
                             std::to_string(set.count) + " images but " +
                             labels_path + " holds " + std::to_string(n) + " labels");
  set.labels.resize(n);
  labs.read(reinterpret_cast<char*>(set.labels.data()), std::streamsize(n));
  if (!labs || labs.gcount() != std::streamsize(n))
    throw std::runtime_error("idx: " + labels_path + " is truncated");
  return set;
}

struct MnistData {
  MnistSet train, test;           // test stays empty if the t10k files are absent
  std::vector<std::uint32_t> permutation;  // pixel order used by mnist_signal
  bool permuted = false;
};

// Loads the standard file names from `dir`. With `permuted` set, a fixed
// pixel shuffle (derived from perm_seed) is applied to every image, turning
// row-scan digits into sequences with no local structure.
inline MnistData load_mnist_sequences(const std::string& dir, bool permuted,
                                      std::uint64_t perm_seed = 0) {
  MnistData data;
  data.train = read_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
  {
    std::ifstream probe(dir + "/t10k-images-idx3-ubyte");
    if (probe)
      data.test = read_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
  }
  const std::size_t d = data.train.pixels_per_image();
  data.permutation.resize(d);
  for (std::size_t i = 0; i < d; ++i) data.permutation[i] = std::uint32_t(i);
  data.permuted = permuted;
  if (permuted) {
    Rng rng(Rng::derive(perm_seed, "pixel-perm"));
    rng.shuffle(data.permutation);
  }
  return data;
}

// One image as a 1-channel sequence of pixel intensities in [0, 1].
template <Real S = double>
Signal<S> mnist_signal(const MnistSet& set, std::size_t idx,
                       const std::vector<std::uint32_t>& permutation) {
  require(idx < set.count, "mnist_signal: index out of range");
  const std::size_t d = set.pixels_per_image();
  require(permutation.size() == d, "mnist_signal: permutation size mismatch");
  Signal<S> sig(d, 1);
  const std::uint8_t* px = set.pixels.data() + idx * d;
  for (std::size_t t = 0; t < d; ++t)
    sig.at(t, 0) = static_cast<S>(px[permutation[t]]) / S(255);
  return sig;
}

// --- batching ----------------------------------------------------------------

// Shuffled index batches covering [0, n); the last batch may be short.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                          std::size_t batch_size,
                                                          Rng& rng) {
  require(batch_size >= 1, "make_batches: batch_size must be positive");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(idx.begin() + std::ptrdiff_t(start),
                         idx.begin() + std::ptrdiff_t(end));
  }
  return batches;
}

// Shuffled train/holdout split of [0, n).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, Rng& rng) {
  require(train_fraction > 0 && train_fraction < 1,
          "split_indices: fraction must lie in (0, 1)");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  const std::size_t cut = std::size_t(double(n) * train_fraction);
  return {std::vector<std::size_t>(idx.begin(), idx.begin() + std::ptrdiff_t(cut)),
          std::vector<std::size_t>(idx.begin() + std::ptrdiff_t(cut), idx.end())};
}

}  // namespace deepsith
