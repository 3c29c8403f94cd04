#pragma once

#include <cstddef>
#include <vector>

#include "deepsith/common.hpp"
#include "deepsith/filterbank.hpp"

namespace deepsith {

// Multichannel time series, stored channel-major: data[f*steps + t]. Keeping
// each channel contiguous lets the convolutions below run as straight-line
// axpy loops over t.
template <Real S = double>
struct Signal {
  std::size_t steps = 0;
  std::size_t features = 0;
  std::vector<S> data;

  Signal() = default;
  Signal(std::size_t T, std::size_t F) : steps(T), features(F), data(T * F, S(0)) {}

  S& at(std::size_t t, std::size_t f) { return data[f * steps + t]; }
  const S& at(std::size_t t, std::size_t f) const { return data[f * steps + t]; }
  S* channel(std::size_t f) { return data.data() + f * steps; }
  const S* channel(std::size_t f) const { return data.data() + f * steps; }
};

// Output of a filter bank applied to a signal: one pane per (feature, center)
// pair, pane-major like Signal so it doubles as a (features*taus) x steps
// matrix with rows indexed p = f*taus + i.
template <Real S = double>
struct SithActivation {
  std::size_t steps = 0;
  std::size_t features = 0;
  std::size_t taus = 0;
  std::vector<S> data;
  const FilterBank<S>* bank = nullptr;  // non-owning; the bank that produced this

  SithActivation() = default;
  SithActivation(std::size_t T, std::size_t F, std::size_t N)
      : steps(T), features(F), taus(N), data(T * F * N, S(0)) {}

  std::size_t panes() const { return features * taus; }
  S& at(std::size_t t, std::size_t f, std::size_t i) {
    return data[(f * taus + i) * steps + t];
  }
  const S& at(std::size_t t, std::size_t f, std::size_t i) const {
    return data[(f * taus + i) * steps + t];
  }
  S* pane(std::size_t f, std::size_t i) {
    return data.data() + (f * taus + i) * steps;
  }
  const S* pane(std::size_t f, std::size_t i) const {
    return data.data() + (f * taus + i) * steps;
  }
};

// Causal convolution of every channel with every kernel row. Kernels sum to
// one, so each pane is a sliding weighted average of its channel's past at
// the row's characteristic lag.
template <Real S>
SithActivation<S> sith_forward(const Signal<S>& x, const FilterBank<S>& bank) {
  require(x.features >= 1 && x.steps >= 1, "sith_forward: empty signal");
  require(bank.rows() >= 1, "sith_forward: empty bank");
  const std::size_t T = x.steps, N = bank.rows();
  SithActivation<S> out(T, x.features, N);
  out.bank = &bank;
  for (std::size_t f = 0; f < x.features; ++f) {
    const S* xf = x.channel(f);
    for (std::size_t i = 0; i < N; ++i) {
      const auto& K = bank.kernels[i];
      S* o = out.pane(f, i);
      const std::size_t lmax = std::min(bank.lengths[i], T - 1);
      for (std::size_t l = 0; l <= lmax; ++l) {
        const S kl = K[l];
        const S* src = xf;
        S* dst = o + l;
        for (std::size_t t = 0; t + l < T; ++t) dst[t] += kl * src[t];
      }
    }
  }
  return out;
}

// Exact adjoint of sith_forward: correlates the upstream gradient with the
// kernels, grad_x[t,f] = sum_i sum_l K_i[l] * grad[t+l,f,i].
template <Real S>
Signal<S> sith_backward(const SithActivation<S>& grad, const FilterBank<S>& bank) {
  require(grad.taus == bank.rows(), "sith_backward: grad/bank row mismatch");
  const std::size_t T = grad.steps;
  Signal<S> gx(T, grad.features);
  for (std::size_t f = 0; f < grad.features; ++f) {
    S* g = gx.channel(f);
    for (std::size_t i = 0; i < grad.taus; ++i) {
      const auto& K = bank.kernels[i];
      const S* go = grad.pane(f, i);
      const std::size_t lmax = std::min(bank.lengths[i], T - 1);
      for (std::size_t l = 0; l <= lmax; ++l) {
        const S kl = K[l];
        const S* src = go + l;
        for (std::size_t t = 0; t + l < T; ++t) g[t] += kl * src[t];
      }
    }
  }
  return gx;
}

}  // namespace deepsith
