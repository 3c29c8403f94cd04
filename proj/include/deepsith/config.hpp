#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "deepsith/common.hpp"

namespace deepsith {

using json = nlohmann::json;

// One block of the stack. k = 0 requests automatic selection from the grid.
struct LayerConfig {
  double tau_min = 1.0;
  double tau_max = 0.0;
  std::size_t n_taus = 0;
  std::size_t hidden = 0;
  int k = 0;
  bool batch_norm = false;
};

struct TaskConfig {
  std::string name;  // adding | mackey-glass | hateful8 | smnist | psmnist

  std::size_t T = 100;          // adding: sequence length
  double mg_tau = 17;           // mackey-glass: delay
  int mg_dist = 15;             //   look-ahead
  std::size_t mg_signals = 128; //   series count (even; half train, half test)
  std::size_t mg_len = 500;     //   steps per series
  std::size_t noise_len = 300;  // hateful8: noise tail length
  std::string data_dir = "data";  // mnist: directory with the idx files
  std::uint64_t perm_seed = 0;    //   pixel permutation seed (psmnist)
  double train_fraction = 0.8;    //   holdout split of the training file
};

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t steps = 0;    // fresh-sample tasks train by step count
  std::size_t epochs = 0;   // fixed-dataset tasks train by epoch
  std::vector<double> lr = {1e-3};  // >1 entry: annealed over equal thirds
  double dropout = 0.2;             // applied to every layer but the last
  std::string precision = "f32";    // f32 | f64
  std::size_t log_every = 2;        // step-based logging cadence
  std::string stop_metric;          // optional early stop, e.g. "test_accuracy"
  double stop_value = 0.0;
  bool stop_at_or_above = true;  // direction of the early-stop comparison
};

struct ExperimentConfig {
  TaskConfig task;
  std::vector<LayerConfig> layers;
  TrainConfig train;
  std::uint64_t master_seed = 1;
  std::size_t n_runs = 5;
  std::vector<std::uint64_t> seeds;  // explicit list wins over master_seed/n_runs
  std::string output_dir;
};

inline void to_json(json& j, const LayerConfig& c) {
  j = json{{"tau_min", c.tau_min}, {"tau_max", c.tau_max}, {"n_taus", c.n_taus},
           {"hidden", c.hidden},   {"k", c.k},             {"batch_norm", c.batch_norm}};
}

inline void from_json(const json& j, LayerConfig& c) {
  c = LayerConfig{};
  j.at("tau_max").get_to(c.tau_max);
  j.at("n_taus").get_to(c.n_taus);
  j.at("hidden").get_to(c.hidden);
  if (j.contains("tau_min")) j.at("tau_min").get_to(c.tau_min);
  if (j.contains("k")) j.at("k").get_to(c.k);
  if (j.contains("batch_norm")) j.at("batch_norm").get_to(c.batch_norm);
}

inline void to_json(json& j, const TaskConfig& c) {
  j = json{{"name", c.name}};
  if (c.name == "adding") j["T"] = c.T;
  if (c.name == "mackey-glass") {
    j["mg_tau"] = c.mg_tau;
    j["mg_dist"] = c.mg_dist;
    j["mg_signals"] = c.mg_signals;
    j["mg_len"] = c.mg_len;
  }
  if (c.name == "hateful8") j["noise_len"] = c.noise_len;
  if (c.name == "smnist" || c.name == "psmnist") {
    j["data_dir"] = c.data_dir;
    j["perm_seed"] = c.perm_seed;
    j["train_fraction"] = c.train_fraction;
  }
}

inline void from_json(const json& j, TaskConfig& c) {
  c = TaskConfig{};
  j.at("name").get_to(c.name);
  if (j.contains("T")) j.at("T").get_to(c.T);
  if (j.contains("mg_tau")) j.at("mg_tau").get_to(c.mg_tau);
  if (j.contains("mg_dist")) j.at("mg_dist").get_to(c.mg_dist);
  if (j.contains("mg_signals")) j.at("mg_signals").get_to(c.mg_signals);
  if (j.contains("mg_len")) j.at("mg_len").get_to(c.mg_len);
  if (j.contains("noise_len")) j.at("noise_len").get_to(c.noise_len);
  if (j.contains("data_dir")) j.at("data_dir").get_to(c.data_dir);
  if (j.contains("perm_seed")) j.at("perm_seed").get_to(c.perm_seed);
  if (j.contains("train_fraction")) j.at("train_fraction").get_to(c.train_fraction);
}

inline void to_json(json& j, const TrainConfig& c) {
  j = json{{"batch_size", c.batch_size}, {"steps", c.steps},
           {"epochs", c.epochs},         {"lr", c.lr},
           {"dropout", c.dropout},       {"precision", c.precision},
           {"log_every", c.log_every}};
  if (!c.stop_metric.empty()) {
    j["stop_metric"] = c.stop_metric;
    j["stop_value"] = c.stop_value;
    j["stop_at_or_above"] = c.stop_at_or_above;
  }
}

inline void from_json(const json& j, TrainConfig& c) {
  c = TrainConfig{};
  j.at("batch_size").get_to(c.batch_size);
  if (j.contains("steps")) j.at("steps").get_to(c.steps);
  if (j.contains("epochs")) j.at("epochs").get_to(c.epochs);
  if (j.contains("lr")) j.at("lr").get_to(c.lr);
  if (j.contains("dropout")) j.at("dropout").get_to(c.dropout);
  if (j.contains("precision")) j.at("precision").get_to(c.precision);
  if (j.contains("log_every")) j.at("log_every").get_to(c.log_every);
  if (j.contains("stop_metric")) j.at("stop_metric").get_to(c.stop_metric);
  if (j.contains("stop_value")) j.at("stop_value").get_to(c.stop_value);
  if (j.contains("stop_at_or_above")) j.at("stop_at_or_above").get_to(c.stop_at_or_above);
}

inline void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"task", c.task},           {"layers", c.layers},
           {"train", c.train},         {"master_seed", c.master_seed},
           {"n_runs", c.n_runs},       {"seeds", c.seeds},
           {"output_dir", c.output_dir}};
}

inline void from_json(const json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  j.at("task").get_to(c.task);
  j.at("layers").get_to(c.layers);
  j.at("train").get_to(c.train);
  if (j.contains("master_seed")) j.at("master_seed").get_to(c.master_seed);
  if (j.contains("n_runs")) j.at("n_runs").get_to(c.n_runs);
  if (j.contains("seeds")) j.at("seeds").get_to(c.seeds);
  if (j.contains("output_dir")) j.at("output_dir").get_to(c.output_dir);
}

// Reference configurations for the four benchmarks.
inline ExperimentConfig preset_config(const std::string& task) {
  ExperimentConfig cfg;
  cfg.task.name = task;
  if (task == "adding") {
    cfg.layers = {{1, 20, 13, 25, 75, false},
                  {1, 120, 13, 25, 27, false},
                  {1, 720, 13, 25, 14, false},
                  {1, 4320, 13, 25, 8, false}};
    cfg.train.batch_size = 50;
    cfg.train.steps = 2500;
    cfg.train.lr = {1e-3};
  } else if (task == "mackey-glass") {
    cfg.layers = {{1, 25, 8, 25, 15, false},
                  {1, 50, 8, 25, 8, false},
                  {1, 150, 8, 25, 4, false}};
    cfg.train.batch_size = 32;
    // 64 train signals at batch 32 is only two optimizer steps per epoch, so
    // the epoch budget is long; the anneal runs in five equal segments. Short
    // budgets leave both delay pairs in a mid-descent regime where per-seed
    // luck dominates; by 3000 epochs every seed pins near its floor.
    cfg.train.epochs = 3000;
    cfg.train.lr = {1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
  } else if (task == "hateful8") {
    cfg.layers = {{1, 25, 10, 35, 35, true},
                  {1, 100, 10, 35, 16, true},
                  {1, 400, 10, 35, 9, true},
                  {1, 1200, 10, 35, 6, true}};
    cfg.train.batch_size = 32;
    cfg.train.epochs = 60;
    cfg.train.lr = {1e-3};
    cfg.train.stop_metric = "test_accuracy";
    cfg.train.stop_value = 1.0;
  } else if (task == "smnist" || task == "psmnist") {
    cfg.layers = {{1, 30, 20, 60, 125, true},
                  {1, 150, 20, 60, 61, true},
                  {1, 750, 20, 60, 35, true}};
    cfg.train.batch_size = 64;
    cfg.train.epochs = 10;
    cfg.train.lr = {2e-3, 2e-4, 2e-5};
    if (task == "psmnist") cfg.task.perm_seed = 777;
  } else {
    throw std::invalid_argument("preset_config: unknown task '" + task + "'");
  }
  return cfg;
}

}  // namespace deepsith
