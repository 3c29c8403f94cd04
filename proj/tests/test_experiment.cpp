#include "deepsith/experiment.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace deepsith;

TEST(Config, JsonRoundTripKeepsEveryField) {
  auto cfg = preset_config("hateful8");
  cfg.master_seed = 99;
  cfg.n_runs = 2;
  cfg.output_dir = "runs/h8";
  const json j = cfg;
  const auto back = j.get<ExperimentConfig>();
  ASSERT_EQ(back.layers.size(), 4u);
  EXPECT_EQ(back.layers[1].tau_max, 100.0);
  EXPECT_EQ(back.layers[1].k, 16);
  EXPECT_EQ(back.layers[1].hidden, 35u);
  EXPECT_TRUE(back.layers[1].batch_norm);
  EXPECT_EQ(back.task.name, "hateful8");
  EXPECT_EQ(back.task.noise_len, 300u);
  EXPECT_EQ(back.train.batch_size, 32u);
  EXPECT_EQ(back.train.stop_metric, "test_accuracy");
  EXPECT_EQ(back.train.stop_value, 1.0);
  EXPECT_EQ(back.master_seed, 99u);
  EXPECT_EQ(back.output_dir, "runs/h8");

  const json p = preset_config("psmnist");
  EXPECT_EQ(p.at("task").at("perm_seed").get<std::uint64_t>(), 777u);
  EXPECT_EQ(p.at("train").at("lr").size(), 3u);
}

TEST(Config, ResolveSelectsKAndExpandsSeeds) {
  ExperimentConfig cfg;
  cfg.task.name = "adding";
  cfg.layers = {{1, 50, 10, 8, 0, false}};  // k = 0 requests selection
  cfg.train.steps = 10;
  cfg.master_seed = 10;
  cfg.n_runs = 3;
  const auto r = resolve(cfg);
  EXPECT_EQ(r.layers[0].k, select_k(geometric_taus(1, 50, 10)).chosen_k);
  EXPECT_EQ(r.seeds, (std::vector<std::uint64_t>{10, 11, 12}));
  EXPECT_EQ(r.n_runs, 3u);
  EXPECT_EQ(resolve(r).layers[0].k, r.layers[0].k);  // idempotent

  cfg.seeds = {42, 7};
  EXPECT_EQ(resolve(cfg).seeds, (std::vector<std::uint64_t>{42, 7}));

  ExperimentConfig bad = cfg;
  bad.layers.clear();
  EXPECT_THROW(resolve(bad), std::invalid_argument);
  bad = cfg;
  bad.train.precision = "f16";
  EXPECT_THROW(resolve(bad), std::invalid_argument);
  bad = cfg;
  bad.task.name = "mackey-glass";  // epoch-trained, but only steps are set
  bad.train.steps = 0;
  EXPECT_THROW(resolve(bad), std::invalid_argument);
}

TEST(Records, JsonRoundTripAndCanonicalForm) {
  RunRecord r;
  r.seed = 3;
  r.param_count = 123;
  r.resolved_ks = {4, 2};
  r.completed = true;
  r.note = "early stop at epoch 2";
  r.wall_seconds = 1.5;
  r.rows = {{1, "train_loss", 0.25}, {1, "test_accuracy", 0.75}};
  const json full = record_to_json(r);
  EXPECT_TRUE(full.contains("wall_seconds"));
  const json canon = record_to_json(r, true);
  EXPECT_FALSE(canon.contains("wall_seconds"));
  const auto back = record_from_json(full);
  EXPECT_EQ(back.seed, 3u);
  EXPECT_EQ(back.resolved_ks, r.resolved_ks);
  EXPECT_EQ(back.note, r.note);
  EXPECT_EQ(back.wall_seconds, 1.5);
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[1].metric, "test_accuracy");
  EXPECT_EQ(back.rows[1].value, 0.75);
}

TEST(Aggregate, StudentTIntervals) {
  RunRecord a, b;
  a.rows = {{5, "test_accuracy", 0.0}};
  b.rows = {{5, "test_accuracy", 2.0}};
  const auto agg = aggregate({a, b});
  ASSERT_EQ(agg.size(), 1u);
  EXPECT_EQ(agg[0].n, 2u);
  EXPECT_NEAR(agg[0].mean, 1.0, 1e-15);
  // sd = sqrt(2), half-width = t_{0.975,1} * sd / sqrt(2) = 12.7062
  EXPECT_NEAR(agg[0].ci_high - agg[0].mean, 12.7062, 1e-9);
  EXPECT_NEAR(agg[0].mean - agg[0].ci_low, 12.7062, 1e-9);

  RunRecord c = a, d = a;
  const auto tight = aggregate({c, d, a});
  EXPECT_EQ(tight[0].n, 3u);
  EXPECT_EQ(tight[0].ci_low, tight[0].ci_high);  // identical values

  const auto single = aggregate({a});
  EXPECT_EQ(single[0].n, 1u);
  EXPECT_EQ(single[0].ci_low, single[0].mean);
}

TEST(Aggregate, GroupsByMetricAndStep) {
  RunRecord a, b;
  a.rows = {{1, "train_loss", 0.5}, {2, "train_loss", 0.25}, {2, "test_nrmse", 0.9}};
  b.rows = {{1, "train_loss", 0.7}};
  const auto agg = aggregate({a, b});
  ASSERT_EQ(agg.size(), 3u);
  // map ordering: (metric, step) lexicographic
  EXPECT_EQ(agg[0].metric, "test_nrmse");
  EXPECT_EQ(agg[1].step, 1u);
  EXPECT_EQ(agg[1].n, 2u);
  EXPECT_NEAR(agg[1].mean, 0.6, 1e-15);
  EXPECT_EQ(agg[2].step, 2u);
  EXPECT_EQ(agg[2].n, 1u);
}

TEST(MetricsCsv, RoundTripIsExact) {
  auto cfg = preset_config("adding");
  cfg.seeds = {1, 2};
  RunRecord a, b;
  a.seed = 1;
  a.rows = {{10, "running_mse", 1.0 / 3.0}, {20, "running_mse", 0.1234567890123456789}};
  b.seed = 2;
  b.rows = {{10, "running_mse", 2.0 / 7.0}};
  const auto agg = aggregate({a, b});
  std::stringstream ss;
  write_metrics_csv(ss, cfg, {a, b}, agg);
  const std::string text = ss.str();
  EXPECT_EQ(text.rfind("# config: ", 0), 0u);  // config echo leads the file

  std::stringstream in(text);
  const auto rows = read_metrics_csv(in);
  ASSERT_EQ(rows.size(), 3u + agg.size());
  EXPECT_EQ(rows[0].task, "adding");
  EXPECT_EQ(rows[0].seed, "1");
  EXPECT_EQ(rows[0].step, 10u);
  EXPECT_EQ(rows[0].value, 1.0 / 3.0);  // %.17g round-trips doubles exactly
  EXPECT_TRUE(std::isnan(rows[0].ci_low));
  EXPECT_EQ(rows[2].seed, "2");
  const auto& agg_row = rows[3];
  EXPECT_EQ(agg_row.seed, "all");
  EXPECT_EQ(agg_row.value, agg[0].mean);
  EXPECT_EQ(agg_row.ci_low, agg[0].ci_low);
  EXPECT_EQ(agg_row.ci_high, agg[0].ci_high);
}

TEST(MetricsCsv, HandlesEmptyAndMalformedInput) {
  auto cfg = preset_config("adding");
  std::stringstream ss;
  write_metrics_csv(ss, cfg, {}, {});
  std::stringstream in(ss.str());
  EXPECT_TRUE(read_metrics_csv(in).empty());

  std::stringstream no_header("adding,1,10,running_mse,0.5,,\n");
  EXPECT_THROW(read_metrics_csv(no_header), std::runtime_error);
  std::stringstream short_row(
      "task,seed,step,metric,value,ci_low,ci_high\nadding,1,10\n");
  EXPECT_THROW(read_metrics_csv(short_row), std::runtime_error);
}

TEST(Schedules, LearningRateThirdsAndStopRule) {
  const std::vector<double> lr = {2e-3, 2e-4, 2e-5};
  std::vector<double> seen;
  for (std::size_t u = 0; u < 10; ++u) seen.push_back(detail::lr_at(lr, u, 10));
  const std::vector<double> expect = {2e-3, 2e-3, 2e-3, 2e-3, 2e-4,
                                      2e-4, 2e-4, 2e-5, 2e-5, 2e-5};
  EXPECT_EQ(seen, expect);
  EXPECT_EQ(detail::lr_at({1e-3}, 7, 10), 1e-3);
  EXPECT_EQ(detail::lr_at(lr, 0, 0), 2e-3);

  TrainConfig tc;
  tc.stop_metric = "test_accuracy";
  tc.stop_value = 1.0;
  EXPECT_TRUE(detail::stop_hit(tc, "test_accuracy", 1.0));
  EXPECT_FALSE(detail::stop_hit(tc, "test_accuracy", 0.99));
  EXPECT_FALSE(detail::stop_hit(tc, "train_loss", 1.0));
  tc.stop_metric = "running_mse";
  tc.stop_value = 0.05;
  tc.stop_at_or_above = false;
  EXPECT_TRUE(detail::stop_hit(tc, "running_mse", 0.04));
  EXPECT_FALSE(detail::stop_hit(tc, "running_mse", 0.06));
}

TEST(EvalHelpers, AccuracyAndNrmseOnAConstantNet) {
  // a net that ignores its input: readout weights zero, bias fixed
  DeepSITHNet<double> net;
  DeepSITHLayer<double> layer;
  FilterSpec fs;
  fs.grid = geometric_taus(2, 8, 3);
  fs.k = 3;
  layer.bank = build_kernels<double>(fs);
  layer.dense = DenseLayer<double>(2, 3);
  net.layers.push_back(layer);
  net.readout = DenseLayer<double>(4, 2);
  net.readout.bias = {0.0, 0.0, 1.0, 0.0};  // always predicts class 2
  net.readout_mode = ReadoutMode::FinalStep;

  std::vector<Example<double>> examples;
  for (int i = 0; i < 6; ++i) {
    Example<double> ex;
    ex.input = Signal<double>(5, 1);
    ex.label = i < 3 ? 2 : 3;
    examples.push_back(std::move(ex));
  }
  EXPECT_DOUBLE_EQ(eval_accuracy(net, examples, 4), 0.5);

  DeepSITHNet<double> reg;
  reg.layers.push_back(layer);
  reg.readout = DenseLayer<double>(1, 2);
  reg.readout.bias = {1.0};  // constant prediction of 1
  reg.readout_mode = ReadoutMode::EveryStep;
  std::vector<Example<double>> series(1);
  series[0].input = Signal<double>(2, 1);
  series[0].target = {0.0, 2.0};  // mean 1, sd 1 -> predicting the mean gives 1
  EXPECT_NEAR(eval_nrmse(reg, series, 4), 1.0, 1e-12);
}

namespace {

ExperimentConfig micro_hateful8() {
  ExperimentConfig cfg;
  cfg.task.name = "hateful8";
  cfg.task.noise_len = 10;
  cfg.layers = {{1, 5, 3, 4, 2, true}};
  cfg.train.batch_size = 16;
  cfg.train.epochs = 2;
  cfg.train.lr = {1e-3};
  cfg.train.dropout = 0.2;
  cfg.train.precision = "f32";
  cfg.master_seed = 5;
  cfg.seeds = {5};
  return resolve(cfg);
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  EXPECT_TRUE(bool(is)) << path;
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(RunSingle, RepeatRunsAreBitIdentical) {
  auto cfg = micro_hateful8();
  cfg.output_dir = "tmp_micro";
  const auto rec_a = run_single<float>(cfg, 5);
  const std::string bytes_a = slurp("tmp_micro/ckpt_seed5.bin");
  const auto rec_b = run_single<float>(cfg, 5);

  EXPECT_TRUE(rec_a.completed);
  EXPECT_EQ(rec_a.resolved_ks, (std::vector<int>{2}));
  ASSERT_EQ(rec_a.rows.size(), 4u);  // train_loss + test_accuracy per epoch
  EXPECT_EQ(rec_a.rows[0].metric, "train_loss");
  EXPECT_EQ(rec_a.rows[1].metric, "test_accuracy");
  EXPECT_EQ(record_to_json(rec_a, true).dump(), record_to_json(rec_b, true).dump());
  EXPECT_EQ(bytes_a, slurp("tmp_micro/ckpt_seed5.bin"));

  // the checkpoint loads back into an identically built net
  auto net = build_net<float>(cfg);
  const std::string echo = load_checkpoint("tmp_micro/ckpt_seed5.bin", net);
  EXPECT_EQ(json::parse(echo).at("task").at("name"), "hateful8");
  std::filesystem::remove_all("tmp_micro");
}

TEST(RunSingle, DivergenceIsReportedNotHidden) {
  ExperimentConfig cfg;
  cfg.task.name = "adding";
  cfg.task.T = 10;
  cfg.layers = {{1, 5, 3, 4, 2, false}};
  cfg.train.batch_size = 4;
  cfg.train.steps = 40;
  cfg.train.lr = {1e20};  // absurd on purpose: activations overflow float
  cfg.train.precision = "f32";
  cfg.seeds = {1};
  cfg = resolve(cfg);
  const auto rec = run_single<float>(cfg, 1);
  EXPECT_FALSE(rec.completed);
  EXPECT_NE(rec.note.find("non-finite"), std::string::npos);
}
