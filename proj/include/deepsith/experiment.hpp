#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "deepsith/checkpoint.hpp"
#include "deepsith/config.hpp"
#include "deepsith/nn.hpp"
#include "deepsith/tasks.hpp"

namespace deepsith {

inline std::size_t task_in_features(const std::string& name) {
  return name == "adding" ? 2 : 1;
}

inline std::size_t task_out_dim(const std::string& name) {
  if (name == "adding" || name == "mackey-glass") return 1;
  if (name == "hateful8") return std::size_t(kHateful8Classes);
  if (name == "smnist" || name == "psmnist") return 10;
  throw std::invalid_argument("unknown task '" + name + "'");
}

inline bool task_is_classification(const std::string& name) {
  return name == "hateful8" || name == "smnist" || name == "psmnist";
}

// Fills in anything the runner derives from the raw config: automatic k
// selection per layer and the explicit seed list. Idempotent.
inline ExperimentConfig resolve(ExperimentConfig cfg) {
  require(!cfg.layers.empty(), "config: at least one layer required");
  task_out_dim(cfg.task.name);  // validates the task name
  for (auto& lc : cfg.layers) {
    const auto grid = geometric_taus(lc.tau_min, lc.tau_max, lc.n_taus);
    if (lc.k == 0) lc.k = select_k(grid).chosen_k;
    require(lc.k >= 1, "config: layer k must be positive");
    require(lc.hidden >= 1, "config: layer width must be positive");
  }
  if (cfg.seeds.empty()) {
    require(cfg.n_runs >= 1, "config: n_runs must be positive");
    for (std::size_t i = 0; i < cfg.n_runs; ++i)
      cfg.seeds.push_back(cfg.master_seed + i);
  }
  cfg.n_runs = cfg.seeds.size();
  if (cfg.task.name == "adding")
    require(cfg.train.steps >= 1, "config: adding trains by steps; set train.steps");
  else
    require(cfg.train.epochs >= 1, "config: set train.epochs");
  require(!cfg.train.lr.empty(), "config: need at least one learning rate");
  require(cfg.train.precision == "f32" || cfg.train.precision == "f64",
          "config: precision must be f32 or f64");
  return cfg;
}

template <Real S>
DeepSITHNet<S> build_net(const ExperimentConfig& cfg) {
  DeepSITHNet<S> net;
  std::size_t in_f = task_in_features(cfg.task.name);
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    const auto& lc = cfg.layers[i];
    DeepSITHLayer<S> layer;
    FilterSpec fs;
    fs.grid = geometric_taus(lc.tau_min, lc.tau_max, lc.n_taus);
    fs.k = lc.k;
    layer.bank = build_kernels<S>(fs);
    layer.dense = DenseLayer<S>(lc.hidden, in_f * lc.n_taus);
    layer.use_batch_norm = lc.batch_norm;
    if (lc.batch_norm) layer.bn = BatchNorm<S>(lc.hidden);
    layer.dropout_rate =
        i + 1 < cfg.layers.size() ? static_cast<S>(cfg.train.dropout) : S(0);
    net.layers.push_back(std::move(layer));
    in_f = lc.hidden;
  }
  net.readout = DenseLayer<S>(task_out_dim(cfg.task.name), in_f);
  net.readout_mode = cfg.task.name == "mackey-glass" ? ReadoutMode::EveryStep
                                                     : ReadoutMode::FinalStep;
  return net;
}

// --- run records ---------------------------------------------------------------

struct MetricRow {
  std::uint64_t step = 0;
  std::string metric;
  double value = 0;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::size_t param_count = 0;
  std::vector<int> resolved_ks;
  bool completed = false;
  std::string note;
  double wall_seconds = 0;
  std::vector<MetricRow> rows;
};

// `canonical` drops the timing field, leaving only content that must be
// bit-identical between repeated runs of the same configuration.
inline json record_to_json(const RunRecord& r, bool canonical = false) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back(json::array({row.step, row.metric, row.value}));
  json j{{"seed", r.seed},       {"param_count", r.param_count},
         {"resolved_ks", r.resolved_ks}, {"completed", r.completed},
         {"note", r.note},       {"rows", rows}};
  if (!canonical) j["wall_seconds"] = r.wall_seconds;
  return j;
}

inline RunRecord record_from_json(const json& j) {
  RunRecord r;
  j.at("seed").get_to(r.seed);
  j.at("param_count").get_to(r.param_count);
  j.at("resolved_ks").get_to(r.resolved_ks);
  j.at("completed").get_to(r.completed);
  j.at("note").get_to(r.note);
  if (j.contains("wall_seconds")) j.at("wall_seconds").get_to(r.wall_seconds);
  for (const auto& row : j.at("rows"))
    r.rows.push_back({row.at(0).get<std::uint64_t>(), row.at(1).get<std::string>(),
                      row.at(2).get<double>()});
  return r;
}

inline json records_to_json(const ExperimentConfig& cfg,
                            const std::vector<RunRecord>& records) {
  json j{{"config", cfg}, {"records", json::array()}};
  for (const auto& r : records) j["records"].push_back(record_to_json(r));
  return j;
}

// --- aggregation -----------------------------------------------------------------

// Two-sided 97.5% Student-t quantile; past the table the normal limit is close
// enough for reporting purposes.
inline double t_quantile_975(std::size_t dof) {
  static const double table[] = {
      12.7062, 4.3027, 3.1824, 2.7764, 2.5706, 2.4469, 2.3646, 2.3060,
      2.2622,  2.2281, 2.2010, 2.1788, 2.1604, 2.1448, 2.1314, 2.1199,
      2.1098,  2.1009, 2.0930, 2.0860, 2.0796, 2.0739, 2.0687, 2.0639,
      2.0595,  2.0555, 2.0518, 2.0484, 2.0452, 2.0423};
  require(dof >= 1, "t_quantile_975: dof must be positive");
  if (dof <= 30) return table[dof - 1];
  if (dof <= 40) return 2.0211;
  if (dof <= 60) return 2.0003;
  if (dof <= 120) return 1.9799;
  return 1.9600;
}

struct AggregateRow {
  std::uint64_t step = 0;
  std::string metric;
  double mean = 0, ci_low = 0, ci_high = 0;
  std::size_t n = 0;
};

// Mean and 95% confidence interval per (metric, step) across runs. Runs that
// stopped early simply contribute to fewer groups; n records how many runs a
// group saw. A single observation gets a zero-width interval.
inline std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records) {
  std::map<std::pair<std::string, std::uint64_t>, std::vector<double>> groups;
  for (const auto& r : records)
    for (const auto& row : r.rows)
      groups[{row.metric, row.step}].push_back(row.value);
  std::vector<AggregateRow> out;
  for (const auto& [key, vals] : groups) {
    AggregateRow a;
    a.metric = key.first;
    a.step = key.second;
    a.n = vals.size();
    double mean = 0;
    for (const double v : vals) mean += v;
    mean /= double(vals.size());
    a.mean = mean;
    if (vals.size() >= 2) {
      double ss = 0;
      for (const double v : vals) ss += (v - mean) * (v - mean);
      const double sd = std::sqrt(ss / double(vals.size() - 1));
      const double half =
          t_quantile_975(vals.size() - 1) * sd / std::sqrt(double(vals.size()));
      a.ci_low = mean - half;
      a.ci_high = mean + half;
    } else {
      a.ci_low = a.ci_high = mean;
    }
    out.push_back(std::move(a));
  }
  return out;
}

// --- metrics CSV -----------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// Columns: task,seed,step,metric,value,ci_low,ci_high. Per-run rows leave the
// interval columns empty; aggregate rows carry seed "all". The configuration
// is embedded as a leading comment line.
inline void write_metrics_csv(std::ostream& os, const ExperimentConfig& cfg,
                              const std::vector<RunRecord>& records,
                              const std::vector<AggregateRow>& aggregates) {
  os << "# config: " << json(cfg).dump() << "\n";
  os << "task,seed,step,metric,value,ci_low,ci_high\n";
  for (const auto& r : records)
    for (const auto& row : r.rows)
      os << cfg.task.name << ',' << r.seed << ',' << row.step << ',' << row.metric
         << ',' << detail::fmt_double(row.value) << ",,\n";
  for (const auto& a : aggregates)
    os << cfg.task.name << ",all," << a.step << ',' << a.metric << ','
       << detail::fmt_double(a.mean) << ',' << detail::fmt_double(a.ci_low) << ','
       << detail::fmt_double(a.ci_high) << '\n';
}

struct CsvRow {
  std::string task, seed, metric;
  std::uint64_t step = 0;
  double value = 0;
  double ci_low = std::numeric_limits<double>::quiet_NaN();
  double ci_high = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<CsvRow> read_metrics_csv(std::istream& is) {
  std::vector<CsvRow> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "task,seed,step,metric,value,ci_low,ci_high")
        throw std::runtime_error("metrics csv: unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i)
      if (i == line.size() || line[i] == ',') {
        cells.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    if (cells.size() != 7)
      throw std::runtime_error("metrics csv: malformed row '" + line + "'");
    CsvRow row;
    row.task = cells[0];
    row.seed = cells[1];
    row.step = std::stoull(cells[2]);
    row.metric = cells[3];
    row.value = std::stod(cells[4]);
    if (!cells[5].empty()) row.ci_low = std::stod(cells[5]);
    if (!cells[6].empty()) row.ci_high = std::stod(cells[6]);
    rows.push_back(std::move(row));
  }
  if (!header_seen) throw std::runtime_error("metrics csv: missing header");
  return rows;
}

// --- evaluation ------------------------------------------------------------------

template <Real S>
double eval_accuracy(DeepSITHNet<S>& net, const std::vector<Example<S>>& examples,
                     std::size_t batch_size) {
  std::size_t correct = 0;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t end = std::min(examples.size(), start + batch_size);
    std::vector<Signal<S>> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(examples[i].input);
    auto outs = net_forward(net, batch, Mode::Eval);
    for (std::size_t i = start; i < end; ++i) {
      const Signal<S>& o = outs[i - start];
      std::size_t best = 0;
      for (std::size_t c = 1; c < o.features; ++c)
        if (o.at(0, c) > o.at(0, best)) best = c;
      if (int(best) == examples[i].label) ++correct;
    }
  }
  return double(correct) / double(examples.size());
}

template <Real S>
double eval_nrmse(DeepSITHNet<S>& net, const std::vector<Example<S>>& examples,
                  std::size_t batch_size) {
  std::vector<double> pred, target;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t end = std::min(examples.size(), start + batch_size);
    std::vector<Signal<S>> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(examples[i].input);
    auto outs = net_forward(net, batch, Mode::Eval);
    for (std::size_t i = start; i < end; ++i) {
      const auto& tgt = examples[i].target;
      for (std::size_t t = 0; t < tgt.size(); ++t) {
        pred.push_back(double(outs[i - start].at(t, 0)));
        target.push_back(double(tgt[t]));
      }
    }
  }
  return nrmse(pred, target);
}

// --- training --------------------------------------------------------------------

namespace detail {

inline double lr_at(const std::vector<double>& schedule, std::size_t unit,
                    std::size_t total) {
  if (schedule.size() == 1 || total == 0) return schedule[0];
  std::size_t idx = unit * schedule.size() / total;
  if (idx >= schedule.size()) idx = schedule.size() - 1;
  return schedule[idx];
}

inline bool stop_hit(const TrainConfig& tc, const std::string& metric, double v) {
  if (tc.stop_metric != metric) return false;
  return tc.stop_at_or_above ? v >= tc.stop_value : v <= tc.stop_value;
}

template <Real S>
SplitDataset<S> build_dataset(const ExperimentConfig& cfg) {
  const auto& t = cfg.task;
  if (t.name == "mackey-glass") {
    MackeyGlassParams p;
    p.tau = t.mg_tau;
    // Sample the attractor, not the transient: the settle time scales with
    // the delay, and the constant-history start needs tens of tau to decay.
    p.warmup = std::max(p.warmup, std::size_t(60.0 * p.tau));
    return make_mackey_glass_dataset<S>(p, t.mg_dist, t.mg_signals, t.mg_len,
                                        cfg.master_seed);
  }
  if (t.name == "hateful8")
    return make_hateful8_dataset<S>(t.noise_len, cfg.master_seed);
  if (t.name == "smnist" || t.name == "psmnist") {
    const MnistData data =
        load_mnist_sequences(t.data_dir, t.name == "psmnist", t.perm_seed);
    SplitDataset<S> ds;
    auto emit = [&](const MnistSet& set, std::size_t idx) {
      Example<S> ex;
      ex.input = mnist_signal<S>(set, idx, data.permutation);
      ex.label = int(set.labels[idx]);
      return ex;
    };
    if (t.train_fraction < 1.0) {
      Rng rng(Rng::derive(cfg.master_seed, "holdout"));
      auto [tr, te] = split_indices(data.train.count, t.train_fraction, rng);
      for (const auto i : tr) ds.train.push_back(emit(data.train, i));
      for (const auto i : te) ds.test.push_back(emit(data.train, i));
    } else {
      require(data.test.count > 0,
              "mnist: train_fraction is 1 but no t10k files were found in " + t.data_dir);
      for (std::size_t i = 0; i < data.train.count; ++i)
        ds.train.push_back(emit(data.train, i));
      for (std::size_t i = 0; i < data.test.count; ++i)
        ds.test.push_back(emit(data.test, i));
    }
    return ds;
  }
  throw std::invalid_argument("build_dataset: task '" + t.name + "' has no fixed dataset");
}

}  // namespace detail

// Trains one seed and returns its record. The config must already be
// resolved. Progress goes to `log` when given (one line per epoch, or every
// 50 steps for step-trained tasks).
template <Real S>
RunRecord run_single(const ExperimentConfig& cfg, std::uint64_t seed,
                     std::ostream* log = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.seed = seed;
  auto net = build_net<S>(cfg);
  init_net(net, seed);
  rec.param_count = count_parameters(net);
  for (const auto& lc : cfg.layers) rec.resolved_ks.push_back(lc.k);
  auto grads = make_gradients(net);
  auto adam = make_adam(net, cfg.train.lr[0]);
  const std::size_t B = cfg.train.batch_size;
  const std::string& task = cfg.task.name;
  bool diverged = false;

  auto note_divergence = [&](double loss, std::uint64_t at, const char* unit) {
    if (std::isfinite(loss)) return false;
    rec.note = "loss became non-finite at " + std::string(unit) + " " + std::to_string(at);
    if (log) *log << "  [seed " << seed << "] " << rec.note << "\n";
    return true;
  };

  if (task == "adding") {
    std::deque<std::pair<double, std::size_t>> window;  // (sum sq err, items)
    double win_sq = 0;
    std::size_t win_items = 0;
    for (std::uint64_t step = 1; step <= cfg.train.steps; ++step) {
      std::vector<Signal<S>> batch;
      std::vector<std::vector<S>> targets;
      for (std::size_t j = 0; j < B; ++j) {
        auto ex = gen_adding<S>(cfg.task.T,
                                Rng::derive(seed, "data", (step - 1) * B + j));
        batch.push_back(std::move(ex.input));
        targets.push_back(std::move(ex.target));
      }
      adam.lr = detail::lr_at(cfg.train.lr, step - 1, cfg.train.steps);
      Rng drop_rng(Rng::derive(seed, "dropout", step));
      ForwardTrace<S> trace;
      auto outs = net_forward(net, batch, Mode::Train, &drop_rng, &trace);
      auto loss = mse_loss(outs, targets);
      if ((diverged = note_divergence(loss.value, step, "step"))) break;
      grads.zero();
      net_backward(net, trace, loss.grads, grads);
      adam_step(net, grads, adam);

      window.emplace_back(loss.value * double(B), B);
      win_sq += loss.value * double(B);
      win_items += B;
      while (win_items - window.front().second >= 100) {
        win_sq -= window.front().first;
        win_items -= window.front().second;
        window.pop_front();
      }
      const double running = win_sq / double(win_items);
      if (step % cfg.train.log_every == 0 || step == cfg.train.steps)
        rec.rows.push_back({step, "running_mse", running});
      if (log && step % 50 == 0)
        *log << "  [seed " << seed << "] step " << step << " running_mse "
             << running << std::endl;
      if (win_items >= 100 && detail::stop_hit(cfg.train, "running_mse", running)) {
        if (rec.rows.empty() || rec.rows.back().step != step)
          rec.rows.push_back({step, "running_mse", running});
        rec.note = "early stop at step " + std::to_string(step);
        break;
      }
    }
  } else {
    auto ds = detail::build_dataset<S>(cfg);
    const bool classify = task_is_classification(task);
    const std::string eval_metric = classify ? "test_accuracy" : "test_nrmse";
    for (std::uint64_t epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
      adam.lr = detail::lr_at(cfg.train.lr, epoch - 1, cfg.train.epochs);
      Rng shuffle_rng(Rng::derive(seed, "shuffle", epoch));
      const auto batches = make_batches(ds.train.size(), B, shuffle_rng);
      double loss_sum = 0;
      std::size_t loss_n = 0;
      for (std::size_t bi = 0; bi < batches.size(); ++bi) {
        std::vector<Signal<S>> batch;
        std::vector<std::vector<S>> targets;
        std::vector<int> labels;
        for (const auto idx : batches[bi]) {
          batch.push_back(ds.train[idx].input);
          if (classify)
            labels.push_back(ds.train[idx].label);
          else
            targets.push_back(ds.train[idx].target);
        }
        Rng drop_rng(Rng::derive(seed, "dropout", (epoch - 1) * batches.size() + bi));
        ForwardTrace<S> trace;
        auto outs = net_forward(net, batch, Mode::Train, &drop_rng, &trace);
        auto loss = classify ? softmax_cross_entropy(outs, labels)
                             : mse_loss(outs, targets);
        if ((diverged = note_divergence(loss.value, epoch, "epoch"))) break;
        grads.zero();
        net_backward(net, trace, loss.grads, grads);
        adam_step(net, grads, adam);
        loss_sum += loss.value;
        ++loss_n;
      }
      if (diverged) break;
      const double train_loss = loss_sum / double(loss_n);
      const double ev = classify ? eval_accuracy(net, ds.test, B)
                                 : eval_nrmse(net, ds.test, B);
      rec.rows.push_back({epoch, "train_loss", train_loss});
      rec.rows.push_back({epoch, eval_metric, ev});
      if (log)
        *log << "  [seed " << seed << "] epoch " << epoch << " train_loss "
             << train_loss << " " << eval_metric << " " << ev << std::endl;
      if (detail::stop_hit(cfg.train, eval_metric, ev)) {
        rec.note = "early stop at epoch " + std::to_string(epoch);
        break;
      }
    }
  }

  rec.completed = !diverged;
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (rec.completed && !cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    save_checkpoint(cfg.output_dir + "/ckpt_seed" + std::to_string(seed) + ".bin",
                    net, json(cfg).dump());
  }
  return rec;
}

// Runs every seed in the (resolved) config in order.
template <Real S>
std::vector<RunRecord> run_experiment_typed(const ExperimentConfig& cfg,
                                            std::ostream* log = nullptr) {
  std::vector<RunRecord> records;
  for (const auto seed : cfg.seeds) {
    if (log) *log << "seed " << seed << " (" << cfg.task.name << ")" << std::endl;
    records.push_back(run_single<S>(cfg, seed, log));
  }
  return records;
}

inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg,
                                             std::ostream* log = nullptr) {
  if (cfg.train.precision == "f64") return run_experiment_typed<double>(cfg, log);
  return run_experiment_typed<float>(cfg, log);
}

}  // namespace deepsith
