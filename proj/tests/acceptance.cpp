// Acceptance suite for the reference configurations. Each numbered check
// prints supporting detail and exactly one [PASS]/[FAIL] summary line; the
// exit code is zero only if every requested check passed.
//
//   acceptance --criterion 4    run one check
//   acceptance                  run all ten in order
//
// Checks 6 to 9 run real training on one thread and take minutes to hours.
// Check 9 expects the MNIST idx files under ./data, so run from the repo
// root (ctest does).

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <iomanip>
#include <iostream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "deepsith/experiment.hpp"
#include "deepsith/laplace.hpp"

using namespace deepsith;

namespace {

const char* const kPresets[] = {"adding", "mackey-glass", "hateful8", "smnist"};

double last_metric(const RunRecord& r, const std::string& name) {
  double v = std::numeric_limits<double>::quiet_NaN();
  for (const auto& row : r.rows)
    if (row.metric == name) v = row.value;
  return v;
}

// 1. count_parameters reproduces the reference totals exactly.
bool crit1() {
  const std::pair<const char*, std::size_t> expected[] = {{"smnist", 146350},
                                                          {"psmnist", 146350},
                                                          {"adding", 25151},
                                                          {"mackey-glass", 10301},
                                                          {"hateful8", 37808}};
  bool ok = true;
  for (const auto& [task, want] : expected) {
    auto net = build_net<float>(preset_config(task));
    const std::size_t got = count_parameters(net);
    std::cout << "  " << task << ": " << got << " parameters, expected " << want
              << (got == want ? "" : "  <- MISMATCH") << "\n";
    ok = ok && got == want;
  }
  return ok;
}

// 2. Bank properties on every preset grid: log-even centers, unit row sums,
// peak within one lag of tau*, coefficient of variation shared across the
// resolvable rows, and a repeated select_k scan returning identical output.
bool crit2() {
  bool ok = true;
  for (const char* task : kPresets) {
    for (const auto& lc : preset_config(task).layers) {
      FilterSpec spec;
      spec.grid = geometric_taus(lc.tau_min, lc.tau_max, lc.n_taus);
      spec.k = lc.k;
      const auto& v = spec.grid.values;
      const double gmean =
          (std::log(v.back()) - std::log(v.front())) / double(v.size() - 1);
      double grid_dev = 0;
      for (std::size_t i = 0; i + 1 < v.size(); ++i)
        grid_dev = std::max(
            grid_dev, std::abs(std::log(v[i + 1]) - std::log(v[i]) - gmean) / gmean);

      const auto bank = build_kernels<double>(spec);
      double sum_dev = 0, peak_dev = 0, cv_lo = 1e300, cv_hi = 0;
      std::size_t resolvable = 0;
      for (std::size_t i = 0; i < bank.rows(); ++i) {
        const auto& row = bank.kernels[i];
        double sum = 0;
        std::size_t arg = 0;
        for (std::size_t l = 0; l < row.size(); ++l) {
          sum += row[l];
          if (row[l] > row[arg]) arg = l;
        }
        sum_dev = std::max(sum_dev, std::abs(sum - 1.0));
        peak_dev = std::max(peak_dev, std::abs(double(arg) - v[i]));
        const auto m = lag_moments(row);
        if (m.stddev < 1.0) continue;  // discretization dominates sub-lag rows
        ++resolvable;
        cv_lo = std::min(cv_lo, m.stddev / m.mean);
        cv_hi = std::max(cv_hi, m.stddev / m.mean);
      }
      const double spread = (cv_hi - cv_lo) / cv_lo;
      std::cout << "  " << task << " tau_max=" << lc.tau_max << " N=" << lc.n_taus
                << " k=" << lc.k << ": sum dev " << sum_dev << ", peak dev "
                << peak_dev << ", cv spread " << 100 * spread << "% over "
                << resolvable << " rows, grid dev " << grid_dev << "\n";
      ok = ok && grid_dev < 1e-9 && sum_dev <= 1e-6 && peak_dev <= 1.0 + 1e-9 &&
           resolvable >= 2 && spread < 0.05;
    }
  }
  const auto a = select_k(geometric_taus(1, 50, 10));
  const auto b = select_k(geometric_taus(1, 50, 10));
  const bool same =
      a.chosen_k == b.chosen_k && a.objective_values == b.objective_values;
  std::cout << "  select_k repeated scan: chosen " << a.chosen_k << " and "
            << b.chosen_k << ", objectives " << (same ? "identical" : "DIFFER")
            << "\n";
  return ok && same;
}

// 3. select_k lands within 20% of every preset layer's k.
bool crit3() {
  bool ok = true;
  std::size_t hits = 0, total = 0;
  for (const char* task : kPresets) {
    for (const auto& lc : preset_config(task).layers) {
      const auto report = select_k(geometric_taus(lc.tau_min, lc.tau_max, lc.n_taus));
      const double lo = 0.8 * lc.k, hi = 1.2 * lc.k;
      const bool in = double(report.chosen_k) >= lo - 1e-9 &&
                      double(report.chosen_k) <= hi + 1e-9;
      std::cout << "  " << task << " grid (1, " << lc.tau_max << ") x "
                << lc.n_taus << ": chose k=" << report.chosen_k << ", preset k="
                << lc.k << " -> " << (in ? "within 20%" : "OUT OF TOLERANCE")
                << "\n";
      ++total;
      hits += in;
      ok = ok && in;
    }
  }
  std::cout << "  " << hits << " of " << total << " grids within tolerance\n";
  if (!ok)
    std::cout << "  note: the scan prefers sharper kernels than the "
                 "mackey-glass presets on their sparse N=8 grids; the "
                 "objective's exact normalization is underdetermined, see "
                 "README\n";
  return ok;
}

// 4. Analytic gradients vs central finite differences on randomized small
// nets, double precision, every parameter of every instance.
bool crit4() {
  std::size_t checked = 0, bad = 0, max_params = 0;
  double worst = 0;
  for (int inst = 0; inst < 100; ++inst) {
    Rng rng(Rng::derive(424242, "gradcheck", std::uint64_t(inst)));
    DeepSITHNet<double> net;
    std::size_t in_f = 1;
    const std::size_t n_layers = 1 + (rng.next_u64() & 1);
    for (std::size_t l = 0; l < n_layers; ++l) {
      FilterSpec fs;
      fs.grid = geometric_taus(1.5, 5.0 + double(rng.below(20)), 3 + rng.below(4));
      fs.k = 2 + int(rng.below(6));
      DeepSITHLayer<double> layer;
      layer.bank = build_kernels<double>(fs);
      const std::size_t hidden = 4 + rng.below(7);
      layer.dense = DenseLayer<double>(hidden, in_f * fs.grid.count);
      layer.use_batch_norm = rng.next_u64() & 1;
      if (layer.use_batch_norm) layer.bn = BatchNorm<double>(hidden);
      layer.dropout_rate = (rng.next_u64() & 1) ? 0.25 : 0.0;
      net.layers.push_back(std::move(layer));
      in_f = hidden;
    }
    const bool classify = rng.next_u64() & 1;
    net.readout = DenseLayer<double>(classify ? 3 : 1, in_f);
    net.readout_mode = classify ? ReadoutMode::FinalStep : ReadoutMode::EveryStep;
    init_net(net, 1000 + std::uint64_t(inst));
    for (auto& view : param_views(net))  // keep ReLU inputs off the kink
      if (view.name.ends_with(".bias"))
        for (std::size_t i = 0; i < view.size; ++i) view.data[i] += 0.05;

    const std::size_t T = 6 + rng.below(7), B = 2 + rng.below(3);
    std::vector<Signal<double>> batch;
    std::vector<int> labels;
    std::vector<std::vector<double>> targets;
    for (std::size_t b = 0; b < B; ++b) {
      Signal<double> x(T, 1);
      for (std::size_t t = 0; t < T; ++t) x.at(t, 0) = rng.uniform(-1.0, 1.0);
      batch.push_back(std::move(x));
      labels.push_back(int(rng.below(3)));
      std::vector<double> tgt(T - 2);
      for (auto& y : tgt) y = rng.uniform(-1.0, 1.0);
      targets.push_back(std::move(tgt));
    }
    const std::uint64_t drop_seed = Rng::derive(9000, "mask", std::uint64_t(inst));
    auto loss_of = [&]() {
      Rng drop(drop_seed);
      auto outs = net_forward(net, batch, Mode::Train, &drop);
      return classify ? softmax_cross_entropy(outs, labels).value
                      : mse_loss(outs, targets).value;
    };
    auto grads = make_gradients(net);
    {
      Rng drop(drop_seed);
      ForwardTrace<double> trace;
      auto outs = net_forward(net, batch, Mode::Train, &drop, &trace);
      const auto loss = classify ? softmax_cross_entropy(outs, labels)
                                 : mse_loss(outs, targets);
      net_backward(net, trace, loss.grads, grads);
    }
    auto views = param_views(net);
    max_params = std::max(max_params, count_parameters(net));
    for (std::size_t v = 0; v < views.size(); ++v) {
      for (std::size_t i = 0; i < views[v].size; ++i) {
        double& w = views[v].data[i];
        const double saved = w;
        const double a = grads.flat[grads.offsets[v] + i];
        // A probe that straddles a ReLU kink corrupts the difference by O(1)
        // regardless of h, but shrinking h moves the probe off the kink; a
        // wrong adjoint stays wrong at every h. Accept the first h that
        // agrees.
        bool pass = false;
        double fd = 0;
        for (const double div : {1.0, 64.0, 4096.0}) {
          const double h = 1e-5 * std::max(1.0, std::abs(saved)) / div;
          w = saved + h;
          const double up = loss_of();
          w = saved - h;
          const double dn = loss_of();
          w = saved;
          fd = (up - dn) / (2.0 * h);
          const double scale = std::max(std::abs(a), std::abs(fd));
          if (std::abs(a - fd) <= 1e-4 * scale + 1e-7) {
            if (scale > 1e-6) worst = std::max(worst, std::abs(a - fd) / scale);
            pass = true;
            break;
          }
        }
        if (!pass && ++bad <= 5)
          std::cout << "  instance " << inst << " " << views[v].name << "[" << i
                    << "]: analytic " << a << " vs fd " << fd << "\n";
        ++checked;
      }
    }
  }
  std::cout << "  " << checked << " parameters across 100 nets (largest "
            << max_params << " params): " << bad
            << " outside tolerance, worst relative gap "
            << std::setprecision(3) << worst << std::setprecision(6) << "\n";
  return bad == 0 && max_params <= 5000;
}

// 5. The streaming transform plus inversion agrees with direct convolution at
// the final step of a 200-step random positive signal, per tau, within 10%.
bool crit5() {
  const auto grid = geometric_taus(4, 64, 6);
  Rng rng(551);
  Signal<double> x(200, 1);
  for (std::size_t t = 0; t < x.steps; ++t) x.at(t, 0) = 0.5 + rng.uniform();
  bool ok = true;
  for (const int k : {2, 4, 8}) {
    FilterSpec spec;
    spec.grid = grid;
    spec.k = k;
    const auto conv = sith_forward(x, build_kernels<double>(spec));
    LaplaceState<double> state(SGrid::for_taus(grid, k, 16), 1);
    for (std::size_t t = 0; t < x.steps; ++t) {
      const double v = x.at(t, 0);
      laplace_step(state, std::span<const double>(&v, 1), 1.0);
    }
    const auto inv = post_invert(state, k, grid);
    double worst = 0;
    for (std::size_t i = 0; i < grid.count; ++i) {
      const double ref = conv.at(x.steps - 1, 0, i);
      worst = std::max(worst, std::abs(inv[i] - ref) / std::abs(ref));
    }
    std::cout << "  k=" << k << ": worst per-tau relative gap "
              << 100 * worst << "%\n";
    ok = ok && worst <= 0.10;
  }
  return ok;
}

// 6. Adding problem at T=100: the 100-sample running MSE must cross the
// two-marker variance baseline (1/6) within 500 steps and 0.05 within 2500,
// for at least 4 of 5 seeds.
bool crit6() {
  auto cfg = preset_config("adding");
  cfg.train.stop_metric = "running_mse";  // past 0.05 the curve only bounces
  cfg.train.stop_value = 0.05;
  cfg.train.stop_at_or_above = false;
  const auto records = run_experiment(resolve(cfg), &std::cout);
  std::size_t good = 0;
  for (const auto& r : records) {
    std::uint64_t at_baseline = 0, at_low = 0;
    for (const auto& row : r.rows) {
      if (row.metric != "running_mse") continue;
      if (!at_baseline && row.value < 0.167) at_baseline = row.step;
      if (!at_low && row.value < 0.05) at_low = row.step;
    }
    const bool pass = r.completed && at_baseline > 0 && at_baseline <= 500 &&
                      at_low > 0 && at_low <= 2500;
    std::cout << "  seed " << r.seed << ": below 0.167 at step " << at_baseline
              << ", below 0.05 at step " << at_low << (pass ? "" : "  <- MISS")
              << "\n";
    good += pass;
  }
  std::cout << "  " << good << " of " << records.size() << " seeds passed (need 4)\n";
  return good >= 4;
}

// 7. Hateful-8 with a 300-step noise tail reaches 100% test accuracy within
// 60 epochs for at least 4 of 5 seeds.
bool crit7() {
  const auto cfg = resolve(preset_config("hateful8"));
  const auto records = run_experiment(cfg, &std::cout);
  std::size_t good = 0;
  for (const auto& r : records) {
    std::uint64_t epoch = 0;
    for (const auto& row : r.rows)
      if (row.metric == "test_accuracy" && row.value >= 1.0) {
        epoch = row.step;
        break;
      }
    const bool pass = r.completed && epoch > 0 && epoch <= 60;
    std::cout << "  seed " << r.seed << ": "
              << (epoch ? "80/80 at epoch " + std::to_string(epoch)
                        : "never reached 100%")
              << (pass ? "" : "  <- MISS") << "\n";
    good += pass;
  }
  std::cout << "  " << good << " of " << records.size() << " seeds passed (need 4)\n";
  return good >= 4;
}

// 8. Mackey-Glass 17/15 beats the mean predictor by a wide margin on every
// seed, and the same seeds degrade (or hold) when the delay pair grows to
// 85/75.
bool crit8() {
  auto base = preset_config("mackey-glass");
  const auto near_records = run_experiment(resolve(base), &std::cout);
  base.task.mg_tau = 85;
  base.task.mg_dist = 75;
  const auto far_records = run_experiment(resolve(base), &std::cout);
  bool ok = near_records.size() == far_records.size();
  for (std::size_t i = 0; i < near_records.size() && ok; ++i) {
    const auto& a = near_records[i];
    const auto& b = far_records[i];
    const double n_near = last_metric(a, "test_nrmse");
    const double n_far = last_metric(b, "test_nrmse");
    const bool pass =
        a.completed && b.completed && n_near < 0.5 && n_far >= n_near;
    std::cout << "  seed " << a.seed << ": nrmse 17/15 = " << n_near
              << ", 85/75 = " << n_far << (pass ? "" : "  <- MISS") << "\n";
    ok = ok && pass;
  }
  return ok;
}

// 9. Sequential MNIST on the bundled 10k-image subset: at least 90% held-out
// accuracy within 10 epochs.
bool crit9() {
  auto cfg = preset_config("smnist");
  cfg.n_runs = 1;
  cfg.train.stop_metric = "test_accuracy";
  cfg.train.stop_value = 0.90;
  const auto records = run_experiment(resolve(cfg), &std::cout);
  const auto& r = records.at(0);
  double best = 0;
  std::uint64_t best_epoch = 0;
  for (const auto& row : r.rows)
    if (row.metric == "test_accuracy" && row.value > best) {
      best = row.value;
      best_epoch = row.step;
    }
  std::cout << "  seed " << r.seed << ": best held-out accuracy " << best
            << " at epoch " << best_epoch << "\n";
  return r.completed && best >= 0.90 && best_epoch <= 10;
}

// 10. Re-running a config with the same seed reproduces the records byte for
// byte (single-threaded; the canonical form excludes wall time).
bool crit10() {
  ExperimentConfig adding;
  adding.task.name = "adding";
  adding.task.T = 20;
  adding.layers = {{1, 12, 4, 6, 5, false}};
  adding.train.batch_size = 8;
  adding.train.steps = 40;
  adding.train.log_every = 5;
  adding.seeds = {3};

  ExperimentConfig h8;
  h8.task.name = "hateful8";
  h8.task.noise_len = 10;
  h8.layers = {{1, 5, 3, 4, 2, true}};
  h8.train.batch_size = 16;
  h8.train.epochs = 2;
  h8.seeds = {7};

  bool ok = true;
  for (const auto& cfg : {adding, h8}) {
    const auto rc = resolve(cfg);
    const auto first = run_experiment(rc);
    const auto second = run_experiment(rc);
    bool same = first.size() == second.size();
    for (std::size_t i = 0; i < first.size() && same; ++i)
      same = record_to_json(first[i], true).dump() ==
             record_to_json(second[i], true).dump();
    std::cout << "  " << cfg.task.name << ": repeated records "
              << (same ? "bit-identical" : "DIFFER") << "\n";
    ok = ok && same;
  }
  return ok;
}

struct Criterion {
  bool (*fn)();
  const char* what;
};

const Criterion kCriteria[] = {
    {crit1, "reference parameter counts reproduced exactly"},
    {crit2, "filter bank properties hold on every preset grid"},
    {crit3, "select_k within 20% of every preset k"},
    {crit4, "analytic gradients match finite differences on 100 random nets"},
    {crit5, "streaming transform matches the convolution route"},
    {crit6, "adding problem running MSE crosses 0.167 by step 500 and 0.05 by 2500"},
    {crit7, "hateful-8 reaches 100% test accuracy within 60 epochs"},
    {crit8, "mackey-glass nrmse below 0.5 and degrades with longer delays"},
    {crit9, "smnist 10k subset reaches 90% held-out accuracy within 10 epochs"},
    {crit10, "repeated seeded runs produce bit-identical records"},
};

int run_criterion(int n) {
  const auto& c = kCriteria[n - 1];
  std::cout << "criterion " << n << ": " << c.what << "\n";
  bool ok = false;
  try {
    ok = c.fn();
  } catch (const std::exception& e) {
    std::cout << "  error: " << e.what() << "\n";
  }
  std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << n << ": " << c.what
            << std::endl;
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc == 3 && std::strcmp(argv[1], "--criterion") == 0) {
    const int n = std::atoi(argv[2]);
    if (n < 1 || n > 10) {
      std::cerr << "criterion must be 1..10\n";
      return 2;
    }
    return run_criterion(n);
  }
  if (argc != 1) {
    std::cerr << "usage: acceptance [--criterion N]\n";
    return 2;
  }
  int failures = 0;
  for (int n = 1; n <= 10; ++n) failures += run_criterion(n);
  return failures;
}
