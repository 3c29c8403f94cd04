#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "deepsith/common.hpp"

namespace deepsith {

// Geometric ladder of filter centers: values[i] = tau_min * (1 + growth)^i,
// with growth chosen so values[count-1] lands exactly on tau_max. Ratios of
// consecutive centers are constant, i.e. the ladder is even in log space.
struct TauStarGrid {
  double tau_min = 0;
  double tau_max = 0;
  std::size_t count = 0;
  double growth = 0;
  std::vector<double> values;

  void validate() const {
    require(count >= 2, "TauStarGrid: need at least two centers");
    require(tau_min > 0 && tau_max > tau_min,
            "TauStarGrid: need 0 < tau_min < tau_max");
    require(values.size() == count, "TauStarGrid: values/count mismatch");
  }
};

inline TauStarGrid geometric_taus(double tau_min, double tau_max,
                                  std::size_t count) {
  require(count >= 2, "geometric_taus: count must be at least 2");
  require(tau_min > 0, "geometric_taus: tau_min must be positive");
  require(tau_max > tau_min, "geometric_taus: tau_max must exceed tau_min");
  TauStarGrid g;
  g.tau_min = tau_min;
  g.tau_max = tau_max;
  g.count = count;
  g.growth = std::pow(tau_max / tau_min, 1.0 / double(count - 1)) - 1.0;
  g.values.resize(count);
  const double llo = std::log(tau_min), lhi = std::log(tau_max);
  for (std::size_t i = 0; i < count; ++i)
    g.values[i] = std::exp(llo + (lhi - llo) * double(i) / double(count - 1));
  g.values.front() = tau_min;  // pin endpoints against rounding
  g.values.back() = tau_max;
  return g;
}

// phi(x) = x^k exp(-k x) for x > 0, else 0. Unimodal with its peak at x = 1
// and peak height exp(-k); underflows to 0 far from the peak for large k,
// which is why kernel construction below works in log space instead.
inline double phi(double x, int k) {
  require(k >= 1, "phi: k must be at least 1");
  if (x <= 0.0) return 0.0;
  return std::exp(double(k) * (std::log(x) - x));
}

// Same shape scaled to unit peak height.
inline double phi_peak_normalized(double x, int k) {
  require(k >= 1, "phi_peak_normalized: k must be at least 1");
  if (x <= 0.0) return 0.0;
  return std::exp(double(k) * (std::log(x) + 1.0 - x));
}

namespace detail {

// Regularized lower incomplete gamma P(a, x); series for x < a + 1,
// Lentz continued fraction otherwise.
inline double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: bad args");
  if (x == 0.0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 1000; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15)
        return sum * std::exp(-x + a * std::log(x) - lg);
    }
    throw std::runtime_error("gamma_p: series failed to converge");
  }
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 1000; ++i) {
    const double an = -double(i) * (double(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15)
      return 1.0 - std::exp(-x + a * std::log(x) - lg) * h;
  }
  throw std::runtime_error("gamma_p: continued fraction failed to converge");
}

}  // namespace detail

struct FilterSpec {
  TauStarGrid grid;
  int k = 1;
  double dt = 1.0;
  double truncation_mass = 0.999;
  double hard_cap_factor = 16.0;

  void validate() const {
    grid.validate();
    require(k >= 1, "FilterSpec: k must be at least 1");
    require(dt > 0, "FilterSpec: dt must be positive");
    require(truncation_mass > 0.99 && truncation_mass < 1.0,
            "FilterSpec: truncation_mass must lie in (0.99, 1)");
    require(hard_cap_factor > 0, "FilterSpec: hard_cap_factor must be positive");
  }
};

// Bank of causal FIR kernels, one per grid center. Row i holds phi sampled at
// lags 0..lengths[i] (in units of dt), shifted/exponentiated in log space and
// normalized to unit sum, so a constant input reproduces itself exactly.
template <Real S = double>
struct FilterBank {
  FilterSpec spec;
  std::vector<std::vector<S>> kernels;
  std::vector<std::size_t> lengths;  // max lag per row; row i has lengths[i]+1 taps

  std::size_t rows() const { return kernels.size(); }
};

// Smallest max-lag L such that the continuous kernel carries at least
// truncation_mass of its area on [0, L*dt]. The area fraction is the
// regularized incomplete gamma P(k+1, k*L*dt/tau), monotone in L.
inline std::size_t truncation_length(double tau, int k, double dt, double mass,
                                     std::size_t hard_cap) {
  std::size_t lo = 1, hi = hard_cap;
  if (detail::gamma_p(double(k) + 1.0, double(k) * double(hi) * dt / tau) < mass)
    throw std::runtime_error(
        "truncation_length: kernel for tau*=" + std::to_string(tau) +
        ", k=" + std::to_string(k) + " exceeds the hard cap of " +
        std::to_string(hard_cap) + " taps; raise the cap or the grid density");
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (detail::gamma_p(double(k) + 1.0, double(k) * double(mid) * dt / tau) >= mass)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

template <Real S = double>
FilterBank<S> build_kernels(const FilterSpec& spec) {
  spec.validate();
  const std::size_t hard_cap = static_cast<std::size_t>(
      std::ceil(spec.hard_cap_factor * spec.grid.tau_max / spec.dt));
  FilterBank<S> bank;
  bank.spec = spec;
  bank.kernels.reserve(spec.grid.count);
  bank.lengths.reserve(spec.grid.count);
  std::vector<double> logw;
  for (const double tau : spec.grid.values) {
    const std::size_t L =
        truncation_length(tau, spec.k, spec.dt, spec.truncation_mass, hard_cap);
    logw.assign(L + 1, -std::numeric_limits<double>::infinity());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 1; l <= L; ++l) {
      const double x = double(l) * spec.dt / tau;
      logw[l] = double(spec.k) * (std::log(x) - x);
      top = std::max(top, logw[l]);
    }
    std::vector<double> w(L + 1, 0.0);
    double sum = 0.0;
    for (std::size_t l = 1; l <= L; ++l) {
      w[l] = std::exp(logw[l] - top);
      sum += w[l];
    }
    std::vector<S> row(L + 1);
    for (std::size_t l = 0; l <= L; ++l) row[l] = static_cast<S>(w[l] / sum);
    bank.kernels.push_back(std::move(row));
    bank.lengths.push_back(L);
  }
  return bank;
}

// Mean lag and lag spread of a kernel row treated as a distribution over lags.
struct LagMoments {
  double mean = 0;
  double stddev = 0;
};

template <Real S>
LagMoments lag_moments(const std::vector<S>& row) {
  double wsum = 0, mean = 0;
  for (std::size_t l = 0; l < row.size(); ++l) {
    wsum += double(row[l]);
    mean += double(l) * double(row[l]);
  }
  mean /= wsum;
  double var = 0;
  for (std::size_t l = 0; l < row.size(); ++l)
    var += double(row[l]) * (double(l) - mean) * (double(l) - mean);
  return {mean, std::sqrt(var / wsum)};
}

// Flatness score for a candidate k: evaluate every peak-normalized filter on
// a log-even time axis spanning [tau_min, tau_max], sum the full bank and the
// odd-indexed half-bank, and return std(full) / std(half). Low values mean
// the bank tiles the window evenly yet stays sparse enough that dropping
// every other filter leaves visible ripple.
inline double std_ratio_objective(const TauStarGrid& grid, int k,
                                  std::size_t n_samples = 400) {
  grid.validate();
  require(k >= 1, "std_ratio_objective: k must be at least 1");
  require(n_samples >= 8, "std_ratio_objective: n_samples too small");
  const double llo = std::log(grid.tau_min), lhi = std::log(grid.tau_max);
  double sum_all = 0, sum_odd = 0, sq_all = 0, sq_odd = 0;
  for (std::size_t j = 0; j < n_samples; ++j) {
    const double t =
        std::exp(llo + (lhi - llo) * double(j) / double(n_samples - 1));
    double all = 0, odd = 0;
    for (std::size_t i = 0; i < grid.count; ++i) {
      const double v = phi_peak_normalized(t / grid.values[i], k);
      all += v;
      if (i % 2 == 1) odd += v;
    }
    sum_all += all;
    sq_all += all * all;
    sum_odd += odd;
    sq_odd += odd * odd;
  }
  const double n = double(n_samples);
  const double var_all = sq_all / n - (sum_all / n) * (sum_all / n);
  const double var_odd = sq_odd / n - (sum_odd / n) * (sum_odd / n);
  return std::sqrt(std::max(var_all, 0.0) / std::max(var_odd, 1e-300));
}

struct KSelectionReport {
  TauStarGrid grid;
  std::vector<int> candidate_ks;
  std::vector<double> objective_values;
  int chosen_k = 0;

  void write_csv(std::ostream& os) const {
    os << "k,objective\n";
    for (std::size_t i = 0; i < candidate_ks.size(); ++i) {
      os << candidate_ks[i] << ',';
      const auto old = os.precision(17);
      os << objective_values[i] << '\n';
      os.precision(old);
    }
  }
};

// Scans k = 1..k_max and keeps the argmin of the flatness score; ties go to
// the smaller k. Deterministic for a fixed grid.
inline KSelectionReport select_k(const TauStarGrid& grid, int k_max = 300) {
  require(k_max >= 1, "select_k: k_max must be at least 1");
  KSelectionReport report;
  report.grid = grid;
  report.candidate_ks.reserve(std::size_t(k_max));
  report.objective_values.reserve(std::size_t(k_max));
  double best = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= k_max; ++k) {
    const double obj = std_ratio_objective(grid, k);
    report.candidate_ks.push_back(k);
    report.objective_values.push_back(obj);
    if (obj < best) {
      best = obj;
      report.chosen_k = k;
    }
  }
  return report;
}

}  // namespace deepsith
