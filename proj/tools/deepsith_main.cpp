// Command-line front end: dataset fetching/generation, training runs,
// checkpoint evaluation, parameter sweeps, k selection, and CSV export.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>

#include "deepsith/experiment.hpp"
#include "deepsith/fetch.hpp"

namespace fs = std::filesystem;
using namespace deepsith;

namespace {

std::string default_data_dir() {
  if (const char* env = std::getenv("DEEPSITH_DATA_DIR")) return env;
  return "data";
}

std::vector<double> parse_lr_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
  return out;
}

struct TrainFlags {
  std::string config_path, task, out_dir;
  std::string data_dir = default_data_dir();
  std::string lr_csv, seeds_csv, precision, stop_metric;
  std::size_t T = 0, batch = 0, steps = 0, epochs = 0, runs = 0, mg_signals = 0,
              mg_len = 0, noise_len = std::size_t(-1), log_every = 0;
  double mg_tau = 0, dropout = -1, stop_value = 0, train_fraction = -1;
  int mg_dist = 0;
  std::uint64_t master_seed = 0, perm_seed = std::uint64_t(-1);
  bool stop_below = false;
  bool have_master_seed = false, have_stop = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON experiment config");
  cmd->add_option("--task", f.task,
                  "preset: adding | mackey-glass | hateful8 | smnist | psmnist");
  cmd->add_option("--out", f.out_dir, "output directory");
  cmd->add_option("--data-dir", f.data_dir,
                  "MNIST idx directory (or set DEEPSITH_DATA_DIR)");
  cmd->add_option("--T", f.T, "adding: sequence length");
  cmd->add_option("--mg-tau", f.mg_tau, "mackey-glass: delay");
  cmd->add_option("--mg-dist", f.mg_dist, "mackey-glass: look-ahead");
  cmd->add_option("--mg-signals", f.mg_signals, "mackey-glass: series count");
  cmd->add_option("--mg-len", f.mg_len, "mackey-glass: steps per series");
  cmd->add_option("--noise-len", f.noise_len, "hateful8: noise tail length");
  cmd->add_option("--perm-seed", f.perm_seed, "psmnist: pixel permutation seed");
  cmd->add_option("--train-fraction", f.train_fraction,
                  "mnist: holdout split of the training file");
  cmd->add_option("--batch", f.batch, "batch size");
  cmd->add_option("--steps", f.steps, "training steps (adding)");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--lr", f.lr_csv, "learning rate(s), comma separated");
  cmd->add_option("--dropout", f.dropout, "dropout rate (all layers but last)");
  cmd->add_option("--precision", f.precision, "f32 | f64");
  cmd->add_option("--log-every", f.log_every, "step logging cadence (adding)");
  cmd->add_option("--seeds", f.seeds_csv, "explicit seeds, comma separated");
  cmd->add_option("--master-seed", f.master_seed, "first seed")
      ->each([&](const std::string&) { f.have_master_seed = true; });
  cmd->add_option("--runs", f.runs, "number of seeds from --master-seed");
  cmd->add_option("--stop-metric", f.stop_metric, "early-stop metric name")
      ->each([&](const std::string&) { f.have_stop = true; });
  cmd->add_option("--stop-value", f.stop_value, "early-stop threshold");
  cmd->add_flag("--stop-below", f.stop_below,
                "stop when the metric falls to or below the threshold");
}

ExperimentConfig config_from_flags(const TrainFlags& f) {
  ExperimentConfig cfg;
  if (!f.config_path.empty()) {
    std::ifstream is(f.config_path);
    if (!is) throw std::runtime_error("cannot open config " + f.config_path);
    cfg = json::parse(is).get<ExperimentConfig>();
  } else if (!f.task.empty()) {
    cfg = preset_config(f.task);
  } else {
    throw CLI::ValidationError("train", "pass --config or --task");
  }
  if (!f.task.empty() && !f.config_path.empty() && f.task != cfg.task.name)
    throw CLI::ValidationError("train", "--task contradicts the config file");
  if (f.T) cfg.task.T = f.T;
  if (f.mg_tau > 0) cfg.task.mg_tau = f.mg_tau;
  if (f.mg_dist > 0) cfg.task.mg_dist = f.mg_dist;
  if (f.mg_signals) cfg.task.mg_signals = f.mg_signals;
  if (f.mg_len) cfg.task.mg_len = f.mg_len;
  if (f.noise_len != std::size_t(-1)) cfg.task.noise_len = f.noise_len;
  if (f.perm_seed != std::uint64_t(-1)) cfg.task.perm_seed = f.perm_seed;
  if (f.train_fraction >= 0) cfg.task.train_fraction = f.train_fraction;
  cfg.task.data_dir = f.data_dir;
  if (f.batch) cfg.train.batch_size = f.batch;
  if (f.steps) cfg.train.steps = f.steps;
  if (f.epochs) cfg.train.epochs = f.epochs;
  if (!f.lr_csv.empty()) cfg.train.lr = parse_lr_list(f.lr_csv);
  if (f.dropout >= 0) cfg.train.dropout = f.dropout;
  if (!f.precision.empty()) cfg.train.precision = f.precision;
  if (f.log_every) cfg.train.log_every = f.log_every;
  if (f.have_stop) {
    cfg.train.stop_metric = f.stop_metric;
    cfg.train.stop_value = f.stop_value;
    cfg.train.stop_at_or_above = !f.stop_below;
  }
  if (!f.seeds_csv.empty()) {
    cfg.seeds.clear();
    std::stringstream ss(f.seeds_csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) cfg.seeds.push_back(std::stoull(cell));
  } else if (f.have_master_seed || f.runs) {
    cfg.seeds.clear();
    if (f.have_master_seed) cfg.master_seed = f.master_seed;
    if (f.runs) cfg.n_runs = f.runs;
  }
  if (!f.out_dir.empty()) cfg.output_dir = f.out_dir;
  return cfg;
}

// Runs the experiment and writes config.json, records.json, metrics.csv and
// summary.csv next to the checkpoints. Returns false if any seed failed.
bool train_and_write(const ExperimentConfig& raw, std::ostream& log) {
  const ExperimentConfig cfg = resolve(raw);
  if (!cfg.output_dir.empty()) {
    fs::create_directories(cfg.output_dir);
    std::ofstream(cfg.output_dir + "/config.json") << json(cfg).dump(2) << "\n";
  }
  const auto records = run_experiment(cfg, &log);
  const auto aggregates = aggregate(records);
  if (!cfg.output_dir.empty()) {
    std::ofstream(cfg.output_dir + "/records.json")
        << records_to_json(cfg, records).dump(2) << "\n";
    std::ofstream metrics(cfg.output_dir + "/metrics.csv");
    write_metrics_csv(metrics, cfg, records, aggregates);
    std::ofstream summary(cfg.output_dir + "/summary.csv");
    write_metrics_csv(summary, cfg, {}, aggregates);
  }
  bool all_ok = true;
  for (const auto& r : records) {
    log << "seed " << r.seed << ": " << (r.completed ? "completed" : "FAILED");
    if (!r.note.empty()) log << " (" << r.note << ")";
    if (!r.rows.empty())
      log << "; last " << r.rows.back().metric << " = " << r.rows.back().value;
    log << "\n";
    all_ok = all_ok && r.completed;
  }
  return all_ok;
}

int cmd_fetch_data(const std::string& dir, const std::string& base_url, bool verify) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos)
    throw std::runtime_error("base url must start with http:// or https://");
  const auto host_end = base_url.find('/', scheme_end + 3);
  const std::string host = base_url.substr(0, host_end);
  const std::string prefix = host_end == std::string::npos ? "" : base_url.substr(host_end);
  httplib::Client client(host);
  client.set_follow_location(true);
  client.set_read_timeout(120, 0);
  fs::create_directories(dir);
  for (const auto& file : kMnistFiles) {
    const std::string url_path = prefix + "/" + file.name + ".gz";
    std::cout << "fetching " << host << url_path << std::endl;
    auto res = client.Get(url_path);
    if (!res || res->status != 200)
      throw std::runtime_error("download of " + url_path + " failed" +
                               (res ? " with status " + std::to_string(res->status)
                                    : " (no response)"));
    const std::vector<std::uint8_t> gz(res->body.begin(), res->body.end());
    if (verify) {
      const std::string digest = md5_hex(gz.data(), gz.size());
      if (digest != file.md5_gz)
        throw std::runtime_error(std::string(file.name) + ".gz digest " + digest +
                                 " does not match expected " + file.md5_gz);
    }
    const auto raw = gunzip(gz);
    const std::string out_path = dir + "/" + file.name;
    std::ofstream os(out_path, std::ios::binary);
    os.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
    if (!os) throw std::runtime_error("cannot write " + out_path);
    std::cout << "  wrote " << out_path << " (" << raw.size() << " bytes"
              << (verify ? ", verified" : "") << ")" << std::endl;
  }
  return 0;
}

int cmd_gen(const std::string& task, std::size_t count, std::uint64_t seed,
            const TrainFlags& f, const std::string& out_path) {
  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot write " + out_path);
  os << "# task: " << task << ", count: " << count << ", seed: " << seed << "\n";
  if (task == "adding") {
    const std::size_t T = f.T ? f.T : 100;
    os << "sample\tt\tvalue\tmarker\ttarget\n";
    for (std::size_t i = 0; i < count; ++i) {
      const auto ex = gen_adding<double>(T, Rng::derive(seed, "gen", i));
      for (std::size_t t = 0; t < T; ++t)
        os << i << '\t' << t << '\t' << ex.input.at(t, 0) << '\t'
           << ex.input.at(t, 1) << '\t' << ex.target[0] << '\n';
    }
  } else if (task == "mackey-glass") {
    MackeyGlassParams p;
    if (f.mg_tau > 0) p.tau = f.mg_tau;
    const int dist = f.mg_dist > 0 ? f.mg_dist : 15;
    const std::size_t len = f.mg_len ? f.mg_len : 500;
    os << "sample\tt\tx\ttarget\n";
    for (std::size_t i = 0; i < count; ++i) {
      const auto series = gen_mackey_glass(p, len + std::size_t(dist),
                                           Rng::derive(seed, "gen", i));
      for (std::size_t t = 0; t < len; ++t)
        os << i << '\t' << t << '\t' << series[t] << '\t'
           << series[t + std::size_t(dist)] << '\n';
    }
  } else if (task == "hateful8") {
    const std::size_t noise = f.noise_len != std::size_t(-1) ? f.noise_len : 300;
    os << "sample\tt\tvalue\tlabel\n";
    for (std::size_t i = 0; i < count; ++i) {
      const int cls = int(i % kHateful8Classes);
      const auto ex = gen_hateful8<double>(noise, cls, Rng::derive(seed, "gen", i));
      for (std::size_t t = 0; t < ex.input.steps; ++t)
        os << i << '\t' << t << '\t' << ex.input.at(t, 0) << '\t' << cls << '\n';
    }
  } else if (task == "smnist" || task == "psmnist") {
    const auto data = load_mnist_sequences(f.data_dir, task == "psmnist",
                                           f.perm_seed != std::uint64_t(-1) ? f.perm_seed : 0);
    os << "sample\tt\tvalue\tlabel\n";
    for (std::size_t i = 0; i < std::min(count, data.train.count); ++i) {
      const auto sig = mnist_signal<double>(data.train, i, data.permutation);
      for (std::size_t t = 0; t < sig.steps; ++t)
        os << i << '\t' << t << '\t' << sig.at(t, 0) << '\t'
           << int(data.train.labels[i]) << '\n';
    }
  } else {
    throw std::runtime_error("gen: unknown task '" + task + "'");
  }
  std::cout << "wrote " << out_path << std::endl;
  return 0;
}

template <Real S>
int eval_checkpoint_typed(const ExperimentConfig& cfg, const std::string& path,
                          std::size_t batch) {
  auto net = build_net<S>(cfg);
  load_checkpoint(path, net);
  const std::size_t B = batch ? batch : cfg.train.batch_size;
  if (cfg.task.name == "adding") {
    std::vector<Signal<S>> inputs;
    std::vector<std::vector<S>> targets;
    for (std::size_t i = 0; i < 1000; ++i) {
      auto ex = gen_adding<S>(cfg.task.T, Rng::derive(9999, "eval", i));
      inputs.push_back(std::move(ex.input));
      targets.push_back(std::move(ex.target));
    }
    double sq = 0;
    for (std::size_t start = 0; start < inputs.size(); start += B) {
      const std::size_t end = std::min(inputs.size(), start + B);
      std::vector<Signal<S>> b(inputs.begin() + std::ptrdiff_t(start),
                               inputs.begin() + std::ptrdiff_t(end));
      auto outs = net_forward(net, b, Mode::Eval);
      for (std::size_t i = start; i < end; ++i) {
        const double d = double(outs[i - start].at(0, 0)) - double(targets[i][0]);
        sq += d * d;
      }
    }
    std::cout << "mse " << sq / double(inputs.size()) << " (1000 fresh samples)"
              << std::endl;
    return 0;
  }
  auto ds = detail::build_dataset<S>(cfg);
  if (task_is_classification(cfg.task.name))
    std::cout << "test_accuracy " << eval_accuracy(net, ds.test, B) << std::endl;
  else
    std::cout << "test_nrmse " << eval_nrmse(net, ds.test, B) << std::endl;
  return 0;
}

int cmd_eval(const std::string& path, const std::string& data_dir, std::size_t batch) {
  auto cfg = json::parse(read_checkpoint_config(path)).get<ExperimentConfig>();
  if (!data_dir.empty()) cfg.task.data_dir = data_dir;
  std::cout << "task " << cfg.task.name << ", " << cfg.layers.size()
            << " layers, precision " << cfg.train.precision << std::endl;
  if (cfg.train.precision == "f64")
    return eval_checkpoint_typed<double>(cfg, path, batch);
  return eval_checkpoint_typed<float>(cfg, path, batch);
}

int cmd_export(const std::string& records_path, const std::string& metrics_path,
               const std::string& summary_path) {
  std::ifstream is(records_path);
  if (!is) throw std::runtime_error("cannot open " + records_path);
  const json j = json::parse(is);
  const auto cfg = j.at("config").get<ExperimentConfig>();
  std::vector<RunRecord> records;
  for (const auto& rj : j.at("records")) records.push_back(record_from_json(rj));
  const auto aggregates = aggregate(records);
  if (!metrics_path.empty()) {
    std::ofstream os(metrics_path);
    write_metrics_csv(os, cfg, records, aggregates);
    std::cout << "wrote " << metrics_path << std::endl;
  }
  if (!summary_path.empty()) {
    std::ofstream os(summary_path);
    write_metrics_csv(os, cfg, {}, aggregates);
    std::cout << "wrote " << summary_path << std::endl;
  }
  return 0;
}

// One axis of a sweep: "name=v1,v2,...". Values stay strings until applied.
struct SweepAxis {
  std::string name;
  std::vector<std::string> values;
};

void apply_sweep_value(ExperimentConfig& cfg, const std::string& name,
                       const std::string& value) {
  if (name == "T")
    cfg.task.T = std::stoull(value);
  else if (name == "noise-len")
    cfg.task.noise_len = std::stoull(value);
  else if (name == "mg-pair") {  // "tau:dist"
    const auto colon = value.find(':');
    if (colon == std::string::npos)
      throw std::runtime_error("sweep: mg-pair values look like tau:dist");
    cfg.task.mg_tau = std::stod(value.substr(0, colon));
    cfg.task.mg_dist = std::stoi(value.substr(colon + 1));
  } else if (name == "lr")
    cfg.train.lr = parse_lr_list(value);
  else if (name == "batch")
    cfg.train.batch_size = std::stoull(value);
  else if (name == "dropout")
    cfg.train.dropout = std::stod(value);
  else
    throw std::runtime_error("sweep: unknown parameter '" + name + "'");
}

int cmd_sweep(const TrainFlags& flags, const std::vector<std::string>& axis_specs) {
  if (flags.out_dir.empty())
    throw CLI::ValidationError("sweep", "pass --out for the sweep root");
  std::vector<SweepAxis> axes;
  for (const auto& spec : axis_specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("sweep: --param looks like name=v1,v2,...");
    SweepAxis axis;
    axis.name = spec.substr(0, eq);
    std::stringstream ss(spec.substr(eq + 1));
    std::string cell;
    while (std::getline(ss, cell, ',')) axis.values.push_back(cell);
    if (axis.values.empty()) throw std::runtime_error("sweep: empty axis " + axis.name);
    axes.push_back(std::move(axis));
  }
  if (axes.empty()) throw std::runtime_error("sweep: pass at least one --param");

  std::vector<std::size_t> cursor(axes.size(), 0);
  bool all_ok = true;
  while (true) {
    ExperimentConfig cfg = config_from_flags(flags);
    std::string tag;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      apply_sweep_value(cfg, axes[a].name, axes[a].values[cursor[a]]);
      std::string v = axes[a].values[cursor[a]];
      for (auto& c : v)
        if (c == ':' || c == ',') c = '-';
      tag += (a ? "_" : "") + axes[a].name + "-" + v;
    }
    cfg.output_dir = flags.out_dir + "/" + tag;
    std::cout << "=== sweep point " << tag << " ===" << std::endl;
    all_ok = train_and_write(cfg, std::cout) && all_ok;

    std::size_t a = 0;
    for (; a < axes.size(); ++a) {
      if (++cursor[a] < axes[a].values.size()) break;
      cursor[a] = 0;
    }
    if (a == axes.size()) break;
  }
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scale-invariant temporal memory networks: data, training, evaluation"};
  app.require_subcommand(1);

  auto* fetch = app.add_subcommand("fetch-data", "download the MNIST idx files");
  std::string fetch_dir = default_data_dir();
  std::string fetch_base = kMnistDefaultBase;
  bool no_verify = false;
  fetch->add_option("--out", fetch_dir, "target directory");
  fetch->add_option("--base-url", fetch_base, "mirror base url");
  fetch->add_flag("--no-verify", no_verify, "skip digest verification");

  auto* gen = app.add_subcommand("gen", "write generated samples as TSV");
  TrainFlags gen_flags;
  std::string gen_task, gen_out = "samples.tsv";
  std::size_t gen_count = 8;
  std::uint64_t gen_seed = 1;
  gen->add_option("--task", gen_task)->required();
  gen->add_option("--count", gen_count, "samples to emit");
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out, "output TSV path");
  gen->add_option("--T", gen_flags.T, "adding: sequence length");
  gen->add_option("--mg-tau", gen_flags.mg_tau);
  gen->add_option("--mg-dist", gen_flags.mg_dist);
  gen->add_option("--mg-len", gen_flags.mg_len);
  gen->add_option("--noise-len", gen_flags.noise_len);
  gen->add_option("--data-dir", gen_flags.data_dir);
  gen->add_option("--perm-seed", gen_flags.perm_seed);

  auto* train = app.add_subcommand("train", "train one configuration across seeds");
  TrainFlags train_flags;
  add_train_flags(train, train_flags);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_data_dir;
  std::size_t eval_batch = 0;
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--data-dir", eval_data_dir, "override the stored data dir");
  eval->add_option("--batch", eval_batch);

  auto* sweep = app.add_subcommand("sweep", "cartesian sweep over task parameters");
  TrainFlags sweep_flags;
  std::vector<std::string> sweep_axes;
  add_train_flags(sweep, sweep_flags);
  sweep->add_option("--param", sweep_axes, "axis as name=v1,v2,... (repeatable)");

  auto* selectk = app.add_subcommand("select-k", "scan k for a filter grid");
  double sk_tau_min = 1, sk_tau_max = 0;
  std::size_t sk_n = 0;
  int sk_kmax = 300;
  std::string sk_out;
  selectk->add_option("--tau-min", sk_tau_min);
  selectk->add_option("--tau-max", sk_tau_max)->required();
  selectk->add_option("--n-taus", sk_n)->required();
  selectk->add_option("--k-max", sk_kmax);
  selectk->add_option("--out", sk_out, "write the k/objective table as CSV");

  auto* exp = app.add_subcommand("export", "re-derive CSVs from records.json");
  std::string exp_records, exp_metrics, exp_summary;
  exp->add_option("--records", exp_records)->required();
  exp->add_option("--out-metrics", exp_metrics);
  exp->add_option("--out-summary", exp_summary);

  CLI11_PARSE(app, argc, argv);

  try {
    if (fetch->parsed()) return cmd_fetch_data(fetch_dir, fetch_base, !no_verify);
    if (gen->parsed()) return cmd_gen(gen_task, gen_count, gen_seed, gen_flags, gen_out);
    if (train->parsed())
      return train_and_write(config_from_flags(train_flags), std::cout) ? 0 : 1;
    if (eval->parsed()) return cmd_eval(eval_ckpt, eval_data_dir, eval_batch);
    if (sweep->parsed()) return cmd_sweep(sweep_flags, sweep_axes);
    if (selectk->parsed()) {
      const auto report = select_k(geometric_taus(sk_tau_min, sk_tau_max, sk_n), sk_kmax);
      std::cout << "chosen k = " << report.chosen_k << std::endl;
      if (!sk_out.empty()) {
        std::ofstream os(sk_out);
        report.write_csv(os);
        std::cout << "wrote " << sk_out << std::endl;
      }
      return 0;
    }
    if (exp->parsed()) return cmd_export(exp_records, exp_metrics, exp_summary);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
