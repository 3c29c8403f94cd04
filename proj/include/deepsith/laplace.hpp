#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "deepsith/common.hpp"
#include "deepsith/filterbank.hpp"

namespace deepsith {

// Real-pole grid for the streaming route. Each target center tau*_i is read
// out at s = k/tau*_i; the dense axis oversamples between targets by a factor
// `oversampling` and extends k points past each end so that k rounds of
// central differencing still cover every target. The axis is even in log s.
struct SGrid {
  int k = 0;
  std::size_t oversampling = 0;
  std::vector<double> taus;            // target centers, ascending
  std::vector<double> tau_dense;       // dense axis, ascending
  std::vector<double> s_values;        // k / tau_dense, descending
  std::vector<std::size_t> target_indices;

  static constexpr int max_k = 12;  // differencing noise grows too fast beyond

  static SGrid for_taus(const TauStarGrid& grid, int k, std::size_t oversampling = 4) {
    grid.validate();
    require(k >= 1, "SGrid: k must be at least 1");
    require(k <= max_k, "SGrid: k > " + std::to_string(max_k) +
                            " is not supported; differencing error grows as k^3");
    require(oversampling >= 1, "SGrid: oversampling must be at least 1");
    SGrid g;
    g.k = k;
    g.oversampling = oversampling;
    g.taus = grid.values;
    const double llo = std::log(grid.tau_min), lhi = std::log(grid.tau_max);
    const double dlog = (lhi - llo) / double((grid.count - 1) * oversampling);
    const std::size_t npts = (grid.count - 1) * oversampling + 1 + 2 * std::size_t(k);
    g.tau_dense.resize(npts);
    g.s_values.resize(npts);
    for (std::size_t j = 0; j < npts; ++j) {
      g.tau_dense[j] = std::exp(llo + dlog * (double(j) - double(k)));
      g.s_values[j] = double(k) / g.tau_dense[j];
    }
    g.target_indices.resize(grid.count);
    for (std::size_t i = 0; i < grid.count; ++i)
      g.target_indices[i] = std::size_t(k) + i * oversampling;
    return g;
  }
};

// Running Laplace transform of the input: one leaky integrator per pole,
// dF/ds-pole = -s F + f(t), advanced by exact exponential decay plus a
// rectangle-rule source term. Memory is O(features * poles) no matter how
// long the stream runs.
template <Real S = double>
struct LaplaceState {
  SGrid grid;
  std::size_t features = 0;
  std::vector<S> F;  // [f * poles + j]
  double t = 0;

  LaplaceState() = default;
  LaplaceState(SGrid g, std::size_t n_features)
      : grid(std::move(g)),
        features(n_features),
        F(n_features * grid.s_values.size(), S(0)) {}

  std::size_t poles() const { return grid.s_values.size(); }

 private:
  double cached_dt_ = 0;
  std::vector<S> decay_;
  template <Real S2>
  friend void laplace_step(LaplaceState<S2>&, std::span<const S2>, double);
};

template <Real S>
void laplace_step(LaplaceState<S>& state, std::span<const S> f_t, double dt) {
  require(dt > 0, "laplace_step: dt must be positive");
  require(f_t.size() == state.features, "laplace_step: feature count mismatch");
  const std::size_t P = state.poles();
  if (dt != state.cached_dt_) {
    state.decay_.resize(P);
    for (std::size_t j = 0; j < P; ++j)
      state.decay_[j] = static_cast<S>(std::exp(-state.grid.s_values[j] * dt));
    state.cached_dt_ = dt;
  }
  for (std::size_t f = 0; f < state.features; ++f) {
    S* Ff = state.F.data() + f * P;
    const S drive = static_cast<S>(f_t[f] * S(dt));
    for (std::size_t j = 0; j < P; ++j) Ff[j] = Ff[j] * state.decay_[j] + drive;
  }
  state.t += dt;
}

// Post inversion: f~(tau*) = (-1)^k / k! * s^(k+1) * d^k F / d s^k at
// s = k/tau*, with the k-th derivative estimated by k passes of first-order
// central differences on the log-even pole axis. Returns the current memory
// snapshot, row-major [feature][target]. Accuracy degrades with k (the
// differencing stencil error compounds); raise the grid oversampling to
// compensate when k is large.
template <Real S>
std::vector<S> post_invert(const LaplaceState<S>& state, int k,
                           const TauStarGrid& taus) {
  const SGrid& g = state.grid;
  require(k == g.k, "post_invert: k does not match the state's grid");
  require(taus.count == g.target_indices.size() &&
              std::abs(taus.values.front() - g.taus.front()) < 1e-12 &&
              std::abs(taus.values.back() - g.taus.back()) < 1e-12,
          "post_invert: tau grid does not match the state's grid");
  const std::size_t P = state.poles();
  const double ck = ((k % 2 == 0) ? 1.0 : -1.0) / std::tgamma(double(k) + 1.0);
  std::vector<S> out(state.features * taus.count);
  std::vector<double> cur(P), nxt(P);
  for (std::size_t f = 0; f < state.features; ++f) {
    const S* Ff = state.F.data() + f * P;
    for (std::size_t j = 0; j < P; ++j) cur[j] = double(Ff[j]);
    for (int it = 0; it < k; ++it) {
      for (std::size_t j = 1; j + 1 < P; ++j)
        nxt[j] = (cur[j + 1] - cur[j - 1]) / (g.s_values[j + 1] - g.s_values[j - 1]);
      nxt[0] = nxt[P - 1] = 0.0;
      std::swap(cur, nxt);
    }
    for (std::size_t i = 0; i < taus.count; ++i) {
      const std::size_t j = g.target_indices[i];
      const double s = g.s_values[j];
      out[f * taus.count + i] =
          static_cast<S>(ck * std::pow(s, double(k) + 1.0) * cur[j]);
    }
  }
  return out;
}

}  // namespace deepsith
