#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nilmbench/model.hpp"
#include "oracles.hpp"

using namespace nilmbench;

namespace {

// small stack for fast training tests
ArchSpec tiny_arch(int window, int n_tasks) {
  ArchSpec arch;
  arch.window_size = window;
  arch.conv = {{8, 5}, {8, 3}};
  arch.dense_width = 32;
  arch.n_tasks = n_tasks;
  return arch;
}

WindowBatch synthetic_batch(const ArchSpec& arch, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  WindowBatch batch;
  batch.window = arch.window_size;
  batch.n_tasks = arch.n_tasks;
  batch.count = count;
  batch.inputs.resize(count * arch.window_size);
  for (double& v : batch.inputs) v = rng.uniform(-1.0, 1.0);
  batch.targets.resize(count * arch.n_tasks);
  for (int t = 0; t < arch.n_tasks; ++t) {
    for (std::size_t i = 0; i < count; ++i) {
      // a learnable deterministic function of the window
      const double* w = batch.input_row(i);
      double acc = 0.0;
      for (int j = 0; j < arch.window_size; ++j) acc += w[j];
      batch.targets[t * count + i] = std::tanh(acc) * (t + 1);
    }
  }
  batch.target_stats.assign(arch.n_tasks, NormStats{});
  return batch;
}

std::vector<double> flatten_params(const ModelParams& p) {
  std::vector<double> out;
  for_each_param_array(p, [&](int, const std::vector<double>& a) {
    out.insert(out.end(), a.begin(), a.end());
  });
  return out;
}

}  // namespace

TEST_CASE("default architecture widths and parameter count at w=99") {
  const std::vector<std::pair<int, int>> layers = {{30, 10}, {30, 8}, {40, 6}, {50, 5}, {50, 5}};
  // oracle values computed from the architecture description alone
  const auto widths = oracles::conv_widths(99, layers);
  CHECK(widths == std::vector<long long>{90, 83, 78, 74, 70});
  const long long expected = oracles::param_count(99, layers, 1024, 1);
  CHECK(expected == 3623449);

  const ModelParams model = build_seq2point(99, 1, 1);
  const auto got_widths = conv_output_widths(model.arch);
  REQUIRE(got_widths.size() == 5);
  for (std::size_t i = 0; i < got_widths.size(); ++i) CHECK(got_widths[i] == widths[i]);
  CHECK(flatten_size(model.arch) == 3500);
  CHECK(param_count(model) == expected);
}

TEST_CASE("parameter count matches oracle at w=499") {
  const std::vector<std::pair<int, int>> layers = {{30, 10}, {30, 8}, {40, 6}, {50, 5}, {50, 5}};
  const ModelParams model = build_seq2point(499, 1, 1);
  CHECK(param_count(model) == oracles::param_count(499, layers, 1024, 1));
  CHECK(conv_output_widths(model.arch).front() == 490);
}

TEST_CASE("MTL adds exactly the extra heads") {
  const ModelParams single = build_seq2point(99, 1, 1);
  const ModelParams mtl = build_seq2point(99, 4, 1);
  CHECK(param_count(mtl) - param_count(single) == 3 * (1024 + 1));

  const double ratio = static_cast<double>(param_count(mtl)) /
                       (4.0 * static_cast<double>(param_count(single)));
  CHECK(ratio > 0.24);
  CHECK(ratio < 0.26);
}

TEST_CASE("window too small for the conv stack") {
  CHECK_THROWS_AS(build_seq2point(20, 1, 1), std::invalid_argument);
}

TEST_CASE("forward: zero params give zero predictions") {
  ModelParams model = build_seq2point(99, 2, 1);
  for_each_param_array(model, [](int, std::vector<double>& a) {
    std::fill(a.begin(), a.end(), 0.0);
  });
  std::vector<double> window(99, 1.25);
  const auto preds = predict(model, window.data(), 1);
  REQUIRE(preds.size() == 2);
  CHECK(preds[0] == 0.0);
  CHECK(preds[1] == 0.0);
}

TEST_CASE("forward: batch shape and determinism") {
  const ArchSpec arch = tiny_arch(25, 4);
  const ModelParams model = build_from_arch(arch, 3);
  const WindowBatch batch = synthetic_batch(arch, 6, 17);
  const auto a = predict(model, batch);
  const auto b = predict(model, batch);
  CHECK(a.size() == 6 * 4);
  CHECK(a == b);

  WindowBatch wrong = batch;
  wrong.window = 24;
  CHECK_THROWS_AS(predict(model, wrong), std::invalid_argument);
}

TEST_CASE("op_count follows the per-layer formula") {
  const ArchSpec arch = default_arch(99, 1);
  // layer 2: 40 filters, 30 inputs, kernel 6, output width 78
  CHECK(conv_layer_ops(arch, 2) == 561600LL);

  long long total = 0;
  const auto widths = conv_output_widths(arch);
  long long in_ch = 1;
  for (std::size_t i = 0; i < arch.conv.size(); ++i) {
    total += static_cast<long long>(arch.conv[i].filters) * in_ch * arch.conv[i].kernel *
             widths[i];
    in_ch = arch.conv[i].filters;
  }
  CHECK(op_count(arch) == total);

  ArchSpec empty;
  empty.window_size = 10;
  empty.n_tasks = 1;
  CHECK(op_count(empty) == 0);
}

TEST_CASE("train: learning_rate 0 leaves params unchanged") {
  const ArchSpec arch = tiny_arch(25, 1);
  const ModelParams model = build_from_arch(arch, 5);
  const WindowBatch batch = synthetic_batch(arch, 16, 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.0;
  cfg.seed = 1;
  const TrainResult result = train(model, batch, cfg);
  CHECK_FALSE(result.diverged);
  CHECK(flatten_params(result.params) == flatten_params(model));
}

TEST_CASE("train: fully frozen mask leaves params unchanged") {
  const ArchSpec arch = tiny_arch(25, 2);
  ModelParams model = build_from_arch(arch, 5);
  std::fill(model.freeze_mask.begin(), model.freeze_mask.end(), 1);
  const WindowBatch batch = synthetic_batch(arch, 16, 2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-2;
  cfg.seed = 1;
  const TrainResult result = train(model, batch, cfg);
  CHECK(flatten_params(result.params) == flatten_params(model));
}

TEST_CASE("train: frozen conv layers stay bit-identical") {
  const ArchSpec arch = tiny_arch(25, 1);
  ModelParams model = build_from_arch(arch, 5);
  model.freeze_mask[0] = 1;  // freeze first conv layer only
  const WindowBatch batch = synthetic_batch(arch, 32, 2);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-3;
  cfg.seed = 1;
  const TrainResult result = train(model, batch, cfg);
  CHECK(result.params.conv[0].weights == model.conv[0].weights);
  CHECK(result.params.conv[0].bias == model.conv[0].bias);
  // unfrozen layers did move
  CHECK(result.params.conv[1].weights != model.conv[1].weights);
}

TEST_CASE("train: overfits a tiny fixed dataset") {
  const ArchSpec arch = tiny_arch(25, 1);
  const ModelParams model = build_from_arch(arch, 7);
  const WindowBatch batch = synthetic_batch(arch, 32, 4);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 32;
  cfg.learning_rate = 3e-3;
  cfg.seed = 2;
  const TrainResult result = train(model, batch, cfg);
  REQUIRE_FALSE(result.diverged);
  REQUIRE(result.epoch_loss.size() == 200);
  CHECK(result.epoch_loss.back() < 0.01 * result.epoch_loss.front());
}

TEST_CASE("train: loss is non-increasing up to tolerance on a tiny dataset") {
  const ArchSpec arch = tiny_arch(25, 1);
  const ModelParams model = build_from_arch(arch, 11);
  const WindowBatch batch = synthetic_batch(arch, 24, 6);
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.batch_size = 24;  // full batch keeps the per-epoch loss comparable
  cfg.learning_rate = 1e-4;
  cfg.seed = 3;
  const TrainResult result = train(model, batch, cfg);
  int violations = 0;
  for (std::size_t e = 1; e < result.epoch_loss.size(); ++e) {
    if (result.epoch_loss[e] > result.epoch_loss[e - 1] + 1e-6) ++violations;
  }
  CHECK(violations < 5);
}

TEST_CASE("train: task-count mismatch rejected") {
  const ArchSpec arch = tiny_arch(25, 2);
  const ModelParams model = build_from_arch(arch, 5);
  const WindowBatch batch = synthetic_batch(tiny_arch(25, 1), 8, 2);
  TrainConfig cfg;
  CHECK_THROWS_AS(train(model, batch, cfg), std::invalid_argument);
}

TEST_CASE("build is reproducible per seed") {
  const ModelParams a = build_seq2point(99, 2, 77);
  const ModelParams b = build_seq2point(99, 2, 77);
  const ModelParams c = build_seq2point(99, 2, 78);
  CHECK(flatten_params(a) == flatten_params(b));
  CHECK(flatten_params(a) != flatten_params(c));
}
