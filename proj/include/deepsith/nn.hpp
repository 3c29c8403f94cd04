#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "deepsith/common.hpp"
#include "deepsith/filterbank.hpp"
#include "deepsith/sith.hpp"

namespace deepsith {

enum class Mode { Train, Eval };
enum class ReadoutMode { FinalStep, EveryStep };

template <Real S = double>
struct DenseLayer {
  std::size_t out_dim = 0, in_dim = 0;
  std::vector<S> weights;  // out_dim x in_dim, row-major
  std::vector<S> bias;     // out_dim

  DenseLayer() = default;
  DenseLayer(std::size_t out, std::size_t in)
      : out_dim(out), in_dim(in), weights(out * in, S(0)), bias(out, S(0)) {}
};

// Per-feature normalization over the batch-and-time axis; population variance
// on both the batch statistics and the running ones.
template <Real S = double>
struct BatchNorm {
  std::size_t dim = 0;
  S momentum = S(0.1);
  S eps = S(1e-5);
  std::vector<S> gamma, beta, running_mean, running_var;

  BatchNorm() = default;
  explicit BatchNorm(std::size_t d)
      : dim(d), gamma(d, S(1)), beta(d, S(0)), running_mean(d, S(0)),
        running_var(d, S(1)) {}
};

// One block of the stack: memory filters over the incoming signal, a dense
// map with bias across the flattened (feature, center) panes at every step,
// ReLU, then optional batch norm and dropout.
template <Real S = double>
struct DeepSITHLayer {
  FilterBank<S> bank;
  DenseLayer<S> dense;
  bool use_batch_norm = false;
  BatchNorm<S> bn;
  S dropout_rate = S(0);
};

template <Real S = double>
struct DeepSITHNet {
  std::vector<DeepSITHLayer<S>> layers;
  DenseLayer<S> readout;
  ReadoutMode readout_mode = ReadoutMode::FinalStep;
};

// --- parameter registry -----------------------------------------------------
//
// A flat, ordered view of every trainable array (and separately the batch
// norm running buffers). The order defines the gradient layout, the Adam
// state layout, and the checkpoint layout, so it must stay stable.

template <Real S>
struct ArrayView {
  std::string name;
  S* data;
  std::size_t size;
};

template <Real S>
std::vector<ArrayView<S>> param_views(DeepSITHNet<S>& net) {
  std::vector<ArrayView<S>> v;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    v.push_back({p + "dense.weight", layer.dense.weights.data(), layer.dense.weights.size()});
    v.push_back({p + "dense.bias", layer.dense.bias.data(), layer.dense.bias.size()});
    if (layer.use_batch_norm) {
      v.push_back({p + "bn.gamma", layer.bn.gamma.data(), layer.bn.gamma.size()});
      v.push_back({p + "bn.beta", layer.bn.beta.data(), layer.bn.beta.size()});
    }
  }
  v.push_back({"readout.weight", net.readout.weights.data(), net.readout.weights.size()});
  v.push_back({"readout.bias", net.readout.bias.data(), net.readout.bias.size()});
  return v;
}

template <Real S>
std::vector<ArrayView<S>> buffer_views(DeepSITHNet<S>& net) {
  std::vector<ArrayView<S>> v;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    if (!layer.use_batch_norm) continue;
    const std::string p = "layer" + std::to_string(l) + ".bn.";
    v.push_back({p + "running_mean", layer.bn.running_mean.data(), layer.bn.running_mean.size()});
    v.push_back({p + "running_var", layer.bn.running_var.data(), layer.bn.running_var.size()});
  }
  return v;
}

template <Real S>
std::size_t count_parameters(DeepSITHNet<S>& net) {
  std::size_t n = 0;
  for (const auto& view : param_views(net)) n += view.size;
  return n;
}

// Gradient buffer laid out exactly like param_views(net).
template <Real S>
struct Gradients {
  std::vector<S> flat;
  std::vector<std::size_t> offsets;  // one per param view, parallel order

  void zero() { std::fill(flat.begin(), flat.end(), S(0)); }
};

template <Real S>
Gradients<S> make_gradients(DeepSITHNet<S>& net) {
  Gradients<S> g;
  std::size_t total = 0;
  for (const auto& view : param_views(net)) {
    g.offsets.push_back(total);
    total += view.size;
  }
  g.flat.assign(total, S(0));
  return g;
}

// Uniform +-1/sqrt(fan_in) weights, zero biases; one derived stream per
// array so layer widths can change without reshuffling the others.
template <Real S>
void init_net(DeepSITHNet<S>& net, std::uint64_t seed) {
  auto views = param_views(net);
  std::size_t dense_idx = 0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    auto& view = views[i];
    if (view.name.ends_with("dense.weight") || view.name == "readout.weight") {
      std::size_t fan_in = 0;
      for (auto& layer : net.layers)
        if (layer.dense.weights.data() == view.data) fan_in = layer.dense.in_dim;
      if (net.readout.weights.data() == view.data) fan_in = net.readout.in_dim;
      const double bound = 1.0 / std::sqrt(double(fan_in));
      Rng rng(Rng::derive(seed, "init", dense_idx++));
      for (std::size_t j = 0; j < view.size; ++j)
        view.data[j] = static_cast<S>(rng.uniform(-bound, bound));
    }
    // biases stay zero; bn gamma/beta keep their 1/0 defaults
  }
}

// --- forward / backward ------------------------------------------------------

template <Real S>
struct LayerTrace {
  std::vector<SithActivation<S>> act;   // per sample, panes x T
  std::vector<std::vector<S>> relu;     // per sample, H x T, post-ReLU
  std::vector<std::vector<S>> xhat;     // per sample, H x T (batch norm only)
  std::vector<S> invstd;                // per feature (batch norm, train stats)
  std::vector<std::vector<S>> dropmask; // per sample, H x T, values {0, 1/(1-p)}
};

template <Real S>
struct ForwardTrace {
  std::vector<LayerTrace<S>> layers;
  std::vector<Signal<S>> final_out;  // last layer output per sample (readout input)
};

namespace detail {

// z = W a + b for every time step; a is panes x T, result H x T.
template <Real S>
std::vector<S> dense_forward(const DenseLayer<S>& d, const S* a, std::size_t T) {
  std::vector<S> z(d.out_dim * T);
  for (std::size_t h = 0; h < d.out_dim; ++h)
    std::fill_n(z.data() + h * T, T, d.bias[h]);
  gemm_acc(d.weights.data(), a, z.data(), d.out_dim, d.in_dim, T);
  return z;
}

}  // namespace detail

// Runs the stack over a batch. Train mode uses batch statistics for the norm
// layers (updating the running buffers) and samples fresh dropout masks from
// `rng`; eval mode uses the running buffers and no dropout. Pass `trace` to
// keep what the backward pass needs.
template <Real S>
std::vector<Signal<S>> net_forward(DeepSITHNet<S>& net,
                                   const std::vector<Signal<S>>& batch,
                                   Mode mode, Rng* rng = nullptr,
                                   ForwardTrace<S>* trace = nullptr) {
  require(!batch.empty(), "net_forward: empty batch");
  require(!net.layers.empty(), "net_forward: network has no layers");
  const std::size_t B = batch.size();
  if (trace) {
    trace->layers.assign(net.layers.size(), {});
    trace->final_out.clear();
  }
  std::vector<Signal<S>> cur(batch);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    LayerTrace<S>* lt = trace ? &trace->layers[l] : nullptr;
    const std::size_t H = layer.dense.out_dim;
    std::vector<std::vector<S>> r(B);
    std::vector<SithActivation<S>> acts;
    if (lt) acts.reserve(B);
    for (std::size_t b = 0; b < B; ++b) {
      SithActivation<S> a = sith_forward(cur[b], layer.bank);
      require(a.panes() == layer.dense.in_dim,
              "net_forward: layer " + std::to_string(l) + " expects " +
                  std::to_string(layer.dense.in_dim) + " inputs, got " +
                  std::to_string(a.panes()));
      r[b] = detail::dense_forward(layer.dense, a.data.data(), a.steps);
      for (S& v : r[b])
        if (v < S(0)) v = S(0);
      if (lt) acts.push_back(std::move(a));
    }
    if (lt) lt->act = std::move(acts);

    std::vector<std::vector<S>> y;
    if (layer.use_batch_norm) {
      auto& bn = layer.bn;
      require(bn.dim == H, "net_forward: batch norm width mismatch");
      y.resize(B);
      std::vector<double> mean(H), var(H);
      if (mode == Mode::Train) {
        std::size_t M = 0;
        for (std::size_t b = 0; b < B; ++b) M += cur[b].steps;
        for (std::size_t h = 0; h < H; ++h) {
          double s1 = 0, s2 = 0;
          for (std::size_t b = 0; b < B; ++b) {
            const S* row = r[b].data() + h * cur[b].steps;
            for (std::size_t t = 0; t < cur[b].steps; ++t) {
              s1 += double(row[t]);
              s2 += double(row[t]) * double(row[t]);
            }
          }
          mean[h] = s1 / double(M);
          var[h] = std::max(s2 / double(M) - mean[h] * mean[h], 0.0);
          bn.running_mean[h] = static_cast<S>((1.0 - double(bn.momentum)) * double(bn.running_mean[h]) +
                                              double(bn.momentum) * mean[h]);
          bn.running_var[h] = static_cast<S>((1.0 - double(bn.momentum)) * double(bn.running_var[h]) +
                                             double(bn.momentum) * var[h]);
        }
      } else {
        for (std::size_t h = 0; h < H; ++h) {
          mean[h] = double(bn.running_mean[h]);
          var[h] = double(bn.running_var[h]);
        }
      }
      if (lt) {
        lt->invstd.resize(H);
        lt->xhat.resize(B);
      }
      std::vector<S> invstd(H);
      for (std::size_t h = 0; h < H; ++h)
        invstd[h] = static_cast<S>(1.0 / std::sqrt(var[h] + double(bn.eps)));
      if (lt) lt->invstd = invstd;
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t T = cur[b].steps;
        y[b].resize(H * T);
        if (lt) lt->xhat[b].resize(H * T);
        for (std::size_t h = 0; h < H; ++h) {
          const S* rin = r[b].data() + h * T;
          S* yout = y[b].data() + h * T;
          S* xh = lt ? lt->xhat[b].data() + h * T : nullptr;
          for (std::size_t t = 0; t < T; ++t) {
            const S x = static_cast<S>((double(rin[t]) - mean[h]) * double(invstd[h]));
            if (xh) xh[t] = x;
            yout[t] = bn.gamma[h] * x + bn.beta[h];
          }
        }
      }
    } else {
      y = r;
    }
    if (lt) lt->relu = std::move(r);

    const bool drop = mode == Mode::Train && layer.dropout_rate > S(0);
    if (drop) {
      require(rng != nullptr, "net_forward: dropout in train mode needs an rng");
      const S keep_scale = S(1) / (S(1) - layer.dropout_rate);
      if (lt) lt->dropmask.resize(B);
      for (std::size_t b = 0; b < B; ++b) {
        if (lt) lt->dropmask[b].resize(y[b].size());
        for (std::size_t e = 0; e < y[b].size(); ++e) {
          const S m = rng->uniform() < double(layer.dropout_rate) ? S(0) : keep_scale;
          y[b][e] *= m;
          if (lt) lt->dropmask[b][e] = m;
        }
      }
    }

    std::vector<Signal<S>> next(B);
    for (std::size_t b = 0; b < B; ++b) {
      next[b].steps = cur[b].steps;
      next[b].features = H;
      next[b].data = std::move(y[b]);
    }
    cur = std::move(next);
  }
  if (trace) trace->final_out = cur;

  std::vector<Signal<S>> outputs(B);
  const auto& ro = net.readout;
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t T = cur[b].steps;
    require(cur[b].features == ro.in_dim, "net_forward: readout width mismatch");
    if (net.readout_mode == ReadoutMode::FinalStep) {
      Signal<S> out(1, ro.out_dim);
      for (std::size_t c = 0; c < ro.out_dim; ++c) {
        double acc = double(ro.bias[c]);
        const S* w = ro.weights.data() + c * ro.in_dim;
        for (std::size_t h = 0; h < ro.in_dim; ++h)
          acc += double(w[h]) * double(cur[b].at(T - 1, h));
        out.at(0, c) = static_cast<S>(acc);
      }
      outputs[b] = std::move(out);
    } else {
      Signal<S> out(T, ro.out_dim);
      out.data = detail::dense_forward(ro, cur[b].data.data(), T);
      outputs[b] = std::move(out);
    }
  }
  return outputs;
}

// Accumulates parameter gradients for a batch previously run through
// net_forward in train mode with a trace. `output_grads` holds dLoss/dOutput
// per sample, shaped like the forward outputs; any loss-side reduction
// (batch mean etc.) must already be folded in.
template <Real S>
void net_backward(DeepSITHNet<S>& net, const ForwardTrace<S>& trace,
                  const std::vector<Signal<S>>& output_grads,
                  Gradients<S>& grads) {
  const std::size_t B = output_grads.size();
  require(trace.final_out.size() == B, "net_backward: trace/batch mismatch");
  require(trace.layers.size() == net.layers.size(),
          "net_backward: trace does not match network depth");

  std::vector<std::size_t> offs(net.layers.size() * 4 + 2, 0);
  {
    std::size_t vi = 0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      offs[l * 4 + 0] = grads.offsets[vi++];
      offs[l * 4 + 1] = grads.offsets[vi++];
      if (net.layers[l].use_batch_norm) {
        offs[l * 4 + 2] = grads.offsets[vi++];
        offs[l * 4 + 3] = grads.offsets[vi++];
      }
    }
    offs[net.layers.size() * 4 + 0] = grads.offsets[vi++];
    offs[net.layers.size() * 4 + 1] = grads.offsets[vi];
  }
  S* g_wr = grads.flat.data() + offs[net.layers.size() * 4 + 0];
  S* g_br = grads.flat.data() + offs[net.layers.size() * 4 + 1];

  // Readout backward: `douts` becomes dLoss/d(last layer output), H x T.
  const auto& ro = net.readout;
  std::vector<std::vector<S>> douts(B);
  for (std::size_t b = 0; b < B; ++b) {
    const Signal<S>& o = trace.final_out[b];
    const std::size_t T = o.steps;
    douts[b].assign(ro.in_dim * T, S(0));
    const Signal<S>& dl = output_grads[b];
    if (net.readout_mode == ReadoutMode::FinalStep) {
      for (std::size_t c = 0; c < ro.out_dim; ++c) {
        const S d = dl.at(0, c);
        if (d == S(0)) continue;
        g_br[c] += d;
        S* gw = g_wr + c * ro.in_dim;
        const S* w = ro.weights.data() + c * ro.in_dim;
        for (std::size_t h = 0; h < ro.in_dim; ++h) {
          gw[h] += d * o.at(T - 1, h);
          douts[b][h * T + (T - 1)] += w[h] * d;
        }
      }
    } else {
      gemm_bt_acc(dl.data.data(), o.data.data(), g_wr, ro.out_dim, ro.in_dim, T);
      for (std::size_t c = 0; c < ro.out_dim; ++c) {
        const S* row = dl.channel(c);
        S acc = 0;
        for (std::size_t t = 0; t < T; ++t) acc += row[t];
        g_br[c] += acc;
      }
      gemm_at_acc(ro.weights.data(), dl.data.data(), douts[b].data(), ro.out_dim,
                  ro.in_dim, T);
    }
  }

  for (std::size_t l = net.layers.size(); l-- > 0;) {
    auto& layer = net.layers[l];
    const LayerTrace<S>& lt = trace.layers[l];
    const std::size_t H = layer.dense.out_dim;
    S* g_w = grads.flat.data() + offs[l * 4 + 0];
    S* g_b = grads.flat.data() + offs[l * 4 + 1];

    // dropout
    if (!lt.dropmask.empty())
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t e = 0; e < douts[b].size(); ++e)
          douts[b][e] *= lt.dropmask[b][e];

    // batch norm
    if (layer.use_batch_norm) {
      S* g_gamma = grads.flat.data() + offs[l * 4 + 2];
      S* g_beta = grads.flat.data() + offs[l * 4 + 3];
      std::size_t M = 0;
      for (std::size_t b = 0; b < B; ++b) M += lt.xhat[b].size() / H;
      for (std::size_t h = 0; h < H; ++h) {
        double sum_dy = 0, sum_dy_xh = 0;
        for (std::size_t b = 0; b < B; ++b) {
          const std::size_t T = lt.xhat[b].size() / H;
          const S* dy = douts[b].data() + h * T;
          const S* xh = lt.xhat[b].data() + h * T;
          for (std::size_t t = 0; t < T; ++t) {
            sum_dy += double(dy[t]);
            sum_dy_xh += double(dy[t]) * double(xh[t]);
          }
        }
        g_gamma[h] += static_cast<S>(sum_dy_xh);
        g_beta[h] += static_cast<S>(sum_dy);
        const double mean_dy = sum_dy / double(M);
        const double mean_dy_xh = sum_dy_xh / double(M);
        const double scale = double(layer.bn.gamma[h]) * double(lt.invstd[h]);
        for (std::size_t b = 0; b < B; ++b) {
          const std::size_t T = lt.xhat[b].size() / H;
          S* dy = douts[b].data() + h * T;
          const S* xh = lt.xhat[b].data() + h * T;
          for (std::size_t t = 0; t < T; ++t)
            dy[t] = static_cast<S>(scale * (double(dy[t]) - mean_dy -
                                            double(xh[t]) * mean_dy_xh));
        }
      }
    }

    // ReLU, dense, and the filter adjoint back to the layer input
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t T = lt.act[b].steps;
      const S* r = lt.relu[b].data();
      S* dz = douts[b].data();
      for (std::size_t e = 0; e < H * T; ++e)
        if (r[e] <= S(0)) dz[e] = S(0);
      gemm_bt_acc(dz, lt.act[b].data.data(), g_w, H, layer.dense.in_dim, T);
      for (std::size_t h = 0; h < H; ++h) {
        const S* row = dz + h * T;
        S acc = 0;
        for (std::size_t t = 0; t < T; ++t) acc += row[t];
        g_b[h] += acc;
      }
      if (l == 0) continue;  // input gradients are not needed
      SithActivation<S> da(T, lt.act[b].features, lt.act[b].taus);
      gemm_at_acc(layer.dense.weights.data(), dz, da.data.data(), H,
                  layer.dense.in_dim, T);
      Signal<S> dx = sith_backward(da, layer.bank);
      douts[b] = std::move(dx.data);
    }
  }
}

// Single-signal, eval-mode pass through one layer; handy for probing a block
// in isolation.
template <Real S>
Signal<S> layer_forward(DeepSITHLayer<S>& layer, const Signal<S>& x) {
  DeepSITHNet<S> tmp;
  tmp.layers.push_back(layer);
  tmp.readout = DenseLayer<S>(layer.dense.out_dim, layer.dense.out_dim);
  for (std::size_t i = 0; i < layer.dense.out_dim; ++i)
    tmp.readout.weights[i * layer.dense.out_dim + i] = S(1);
  tmp.readout_mode = ReadoutMode::EveryStep;
  auto out = net_forward(tmp, std::vector<Signal<S>>{x}, Mode::Eval);
  return std::move(out[0]);
}

// --- optimizer ---------------------------------------------------------------

template <Real S = double>
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<S> m, v;
};

template <Real S>
AdamState<S> make_adam(DeepSITHNet<S>& net, double lr) {
  AdamState<S> st;
  st.lr = lr;
  std::size_t total = 0;
  for (const auto& view : param_views(net)) total += view.size;
  st.m.assign(total, S(0));
  st.v.assign(total, S(0));
  return st;
}

template <Real S>
void adam_step(DeepSITHNet<S>& net, const Gradients<S>& grads, AdamState<S>& st) {
  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, double(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, double(st.step));
  auto views = param_views(net);
  std::size_t off = 0;
  for (auto& view : views) {
    for (std::size_t j = 0; j < view.size; ++j) {
      const double g = double(grads.flat[off + j]);
      const double m = st.beta1 * double(st.m[off + j]) + (1.0 - st.beta1) * g;
      const double v = st.beta2 * double(st.v[off + j]) + (1.0 - st.beta2) * g * g;
      st.m[off + j] = static_cast<S>(m);
      st.v[off + j] = static_cast<S>(v);
      view.data[j] -= static_cast<S>(st.lr * (m / bc1) /
                                     (std::sqrt(v / bc2) + st.eps));
    }
    off += view.size;
  }
}

// --- losses ------------------------------------------------------------------

template <Real S>
struct LossResult {
  double value = 0;
  std::vector<Signal<S>> grads;  // dLoss/dOutput, batch-mean reduction included
};

// Softmax cross entropy on final-step logits, averaged over the batch.
template <Real S>
LossResult<S> softmax_cross_entropy(const std::vector<Signal<S>>& outputs,
                                    const std::vector<int>& labels) {
  require(outputs.size() == labels.size(), "cross entropy: batch size mismatch");
  const std::size_t B = outputs.size();
  LossResult<S> res;
  res.grads.resize(B);
  double total = 0;
  for (std::size_t b = 0; b < B; ++b) {
    const Signal<S>& o = outputs[b];
    require(o.steps == 1, "cross entropy: expected final-step outputs");
    const std::size_t C = o.features;
    require(labels[b] >= 0 && std::size_t(labels[b]) < C,
            "cross entropy: label out of range");
    double mx = -1e300;
    for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, double(o.at(0, c)));
    double lse = 0;
    for (std::size_t c = 0; c < C; ++c) lse += std::exp(double(o.at(0, c)) - mx);
    lse = mx + std::log(lse);
    total += lse - double(o.at(0, labels[b]));
    Signal<S> g(1, C);
    for (std::size_t c = 0; c < C; ++c) {
      const double p = std::exp(double(o.at(0, c)) - lse);
      g.at(0, c) = static_cast<S>((p - (int(c) == labels[b] ? 1.0 : 0.0)) / double(B));
    }
    res.grads[b] = std::move(g);
  }
  res.value = total / double(B);
  return res;
}

// Mean squared error over every predicted element that has a target. Targets
// may be shorter than the prediction series (e.g. look-ahead regression near
// the end of a signal); surplus predictions contribute nothing.
template <Real S>
LossResult<S> mse_loss(const std::vector<Signal<S>>& outputs,
                       const std::vector<std::vector<S>>& targets) {
  require(outputs.size() == targets.size(), "mse: batch size mismatch");
  const std::size_t B = outputs.size();
  std::size_t n = 0;
  for (const auto& tgt : targets) n += tgt.size();
  require(n > 0, "mse: no targets");
  LossResult<S> res;
  res.grads.resize(B);
  double total = 0;
  for (std::size_t b = 0; b < B; ++b) {
    const Signal<S>& o = outputs[b];
    const auto& tgt = targets[b];
    require(o.features == 1, "mse: expected one output channel");
    require(tgt.size() <= o.steps, "mse: more targets than predictions");
    Signal<S> g(o.steps, 1);
    for (std::size_t t = 0; t < tgt.size(); ++t) {
      const double d = double(o.at(t, 0)) - double(tgt[t]);
      total += d * d;
      g.at(t, 0) = static_cast<S>(2.0 * d / double(n));
    }
    res.grads[b] = std::move(g);
  }
  res.value = total / double(n);
  return res;
}

// Root mean squared error normalized by the standard deviation of the target
// series: 0 for perfect prediction, 1 for predicting the target mean.
inline double nrmse(const std::vector<double>& pred,
                    const std::vector<double>& target) {
  require(pred.size() == target.size() && !pred.empty(), "nrmse: size mismatch");
  double mse = 0, mean = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = pred[i] - target[i];
    mse += d * d;
    mean += target[i];
  }
  mse /= double(pred.size());
  mean /= double(target.size());
  double var = 0;
  for (const double t : target) var += (t - mean) * (t - mean);
  var /= double(target.size());
  require(var > 0, "nrmse: constant target has no scale");
  return std::sqrt(mse / var);
}

}  // namespace deepsith
