#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nilmbench/data.hpp"

using namespace nilmbench;

namespace {

std::string write_temp_csv(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << body;
  return path.string();
}

}  // namespace

TEST_CASE("load_series: plain rows at fixed spacing") {
  const auto path = write_temp_csv("nb_plain.csv",
                                   "timestamp,watts\n0,10\n60,20\n120,30\n");
  const auto segs = load_series(path);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].period == doctest::Approx(60.0));
  CHECK(segs[0].values == std::vector<double>{10.0, 20.0, 30.0});
}

TEST_CASE("load_series: single missing sample forward-filled") {
  const auto path = write_temp_csv("nb_fill.csv",
                                   "timestamp,watts\n0,10\n60,20\n180,40\n240,50\n");
  const auto segs = load_series(path);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].values == std::vector<double>{10.0, 20.0, 20.0, 40.0, 50.0});
}

TEST_CASE("load_series: long gap splits into segments") {
  std::string body = "timestamp,watts\n";
  for (int i = 0; i < 5; ++i) body += std::to_string(i * 600) + ",10\n";
  body += std::to_string(4 * 600 + 7200) + ",99\n";  // 2 h hole, 10 min period
  body += std::to_string(4 * 600 + 7800) + ",98\n";
  const auto path = write_temp_csv("nb_gap.csv", body);
  LoadOptions opts;
  opts.max_fill = 3;
  const auto segs = load_series(path, opts);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].values.size() == 5);
  CHECK(segs[1].values == std::vector<double>{99.0, 98.0});
}

TEST_CASE("load_series: non-monotone and junk rows rejected") {
  const auto bad1 = write_temp_csv("nb_mono.csv", "timestamp,watts\n60,1\n0,2\n");
  CHECK_THROWS_AS(load_series(bad1), std::runtime_error);
  const auto bad2 = write_temp_csv("nb_junk.csv", "timestamp,watts\n0,abc\n");
  CHECK_THROWS_AS(load_series(bad2), std::runtime_error);
  const auto bad3 = write_temp_csv("nb_header.csv", "time,power\n0,1\n");
  CHECK_THROWS_AS(load_series(bad3), std::runtime_error);
}

TEST_CASE("save/load round trip") {
  PowerSeries s;
  s.start_time = 100.0;
  s.period = 30.0;
  s.values = {1.5, 0.0, 7.25, 3.125};
  const auto path = (std::filesystem::temp_directory_path() / "nb_rt.csv").string();
  save_series_csv(path, s);
  const auto segs = load_series(path);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].start_time == s.start_time);
  CHECK(segs[0].period == s.period);
  CHECK(segs[0].values == s.values);
}

TEST_CASE("resample: constant and mean aggregation") {
  PowerSeries s;
  s.period = 30.0;
  s.values = {5.0, 5.0, 5.0, 5.0};
  const PowerSeries r = resample(s, 60.0);
  CHECK(r.values == std::vector<double>{5.0, 5.0});

  PowerSeries t;
  t.period = 30.0;
  t.values = {0.0, 10.0};
  CHECK(resample(t, 60.0).values == std::vector<double>{5.0});
}

TEST_CASE("resample preserves energy for exact bin alignment") {
  Rng rng(19);
  PowerSeries s;
  s.period = 15.0;
  s.values.resize(480);
  for (double& v : s.values) v = rng.uniform(0.0, 500.0);
  const PowerSeries r = resample(s, 60.0);
  REQUIRE(r.values.size() == 120);
  double energy_in = 0.0;
  for (double v : s.values) energy_in += v * s.period;
  double energy_out = 0.0;
  for (double v : r.values) energy_out += v * r.period;
  CHECK(std::abs(energy_in - energy_out) / energy_in < 1e-9);
}

TEST_CASE("normalize: constant series clamps std") {
  PowerSeries s;
  s.values = {42.0, 42.0, 42.0};
  NormStats stats;
  const PowerSeries n = normalize(s, &stats);
  for (double v : n.values) CHECK(v == 0.0);
  CHECK(stats.std == kNormStdFloor);
}

TEST_CASE("normalize round trip is near-exact") {
  Rng rng(23);
  PowerSeries s;
  s.values.resize(1000);
  for (double& v : s.values) v = rng.uniform(0.0, 2000.0);
  NormStats stats;
  const PowerSeries n = normalize(s, &stats);
  const auto back = denormalize_values(n.values, stats);
  double worst = 0.0;
  for (std::size_t i = 0; i < back.size(); ++i) {
    worst = std::max(worst, std::abs(back[i] - s.values[i]));
  }
  CHECK(worst < 1e-12 * 2000.0);
}

TEST_CASE("make_windows: count law and midpoint targets") {
  PowerSeries mains;
  mains.values = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  PowerSeries app = mains;
  for (double& v : app.values) v *= 10.0;

  const WindowBatch batch = make_windows(mains, {app}, 4);
  CHECK(batch.count == 7);
  // midpoint index floor(4/2)=2: targets are app[2..8]
  for (std::size_t i = 0; i < batch.count; ++i) {
    CHECK(batch.target(0, i) == 10.0 * static_cast<double>(i + 2));
  }

  const WindowBatch one = make_windows(mains, {app}, 10);
  CHECK(one.count == 1);
  CHECK(one.target(0, 0) == 50.0);

  // property: count == T - w + 1 over a range of (T, w)
  for (std::size_t T = 5; T <= 40; T += 7) {
    PowerSeries m;
    m.values.assign(T, 1.0);
    for (int w = 1; w <= static_cast<int>(T); w += 3) {
      CHECK(make_windows(m, {}, w).count == T - w + 1);
    }
  }
}

TEST_CASE("make_windows: misaligned or short series rejected") {
  PowerSeries mains;
  mains.values = {1, 2, 3};
  PowerSeries other;
  other.values = {1, 2};
  CHECK_THROWS_AS(make_windows(mains, {other}, 2), std::invalid_argument);
  CHECK_THROWS_AS(make_windows(other, {}, 5), std::invalid_argument);
}

TEST_CASE("w=99 target offset is 49") {
  PowerSeries mains;
  mains.values.assign(99, 0.0);
  PowerSeries app;
  app.values.assign(99, 0.0);
  app.values[49] = 123.0;
  const WindowBatch batch = make_windows(mains, {app}, 99);
  REQUIRE(batch.count == 1);
  CHECK(batch.target(0, 0) == 123.0);
}

TEST_CASE("synth: exact additive identity at sigma=0") {
  SynthSpec spec;
  spec.length = 4000;
  spec.appliances = {{3600.0, 0.4, 150.0, 0.1}, {7200.0, 0.2, 900.0, 0.05}};
  spec.residual_level = 35.0;
  spec.noise_sigma = 0.0;
  const SynthHousehold hh = synth_household(spec, 11);
  for (std::size_t t = 0; t < hh.mains.values.size(); ++t) {
    double sum = hh.residual.values[t];
    for (const auto& a : hh.appliances) sum += a.values[t];
    CHECK(hh.mains.values[t] - sum == 0.0);
  }
}

TEST_CASE("synth: reproducible per seed") {
  SynthSpec spec;
  spec.length = 500;
  spec.appliances = {{1800.0, 0.3, 200.0, 0.2}};
  spec.noise_sigma = 5.0;
  const SynthHousehold a = synth_household(spec, 101);
  const SynthHousehold b = synth_household(spec, 101);
  const SynthHousehold c = synth_household(spec, 102);
  CHECK(a.mains.values == b.mains.values);
  CHECK(a.mains.values != c.mains.values);
}

TEST_CASE("synth: noise residual has near-zero empirical mean") {
  SynthSpec spec;
  spec.length = 100000;
  spec.appliances = {{3600.0, 0.5, 100.0, 0.0}};
  spec.residual_level = 20.0;
  spec.noise_sigma = 8.0;
  const SynthHousehold hh = synth_household(spec, 31);
  double acc = 0.0;
  for (std::size_t t = 0; t < hh.mains.values.size(); ++t) {
    double clean = hh.residual.values[t];
    for (const auto& a : hh.appliances) clean += a.values[t];
    acc += hh.mains.values[t] - clean;
  }
  const double mean = acc / static_cast<double>(spec.length);
  const double bound = 3.0 * spec.noise_sigma / std::sqrt(static_cast<double>(spec.length));
  CHECK(std::abs(mean) < bound);
}

TEST_CASE("split and subsample keep shapes consistent") {
  PowerSeries mains;
  mains.values.resize(200);
  for (std::size_t i = 0; i < mains.values.size(); ++i) {
    mains.values[i] = static_cast<double>(i % 17);
  }
  PowerSeries app = mains;
  const WindowBatch batch = build_batch(mains, {app}, 21);
  const auto [train_b, eval_b] = split_batch(batch, 0.25);
  CHECK(train_b.count + eval_b.count == batch.count);
  CHECK(eval_b.count == static_cast<std::size_t>(0.25 * batch.count));

  const WindowBatch sub = subsample_batch(batch, 40, Rng(5));
  CHECK(sub.count == 40);
  CHECK(sub.inputs.size() == 40 * 21);
  CHECK(sub.targets.size() == 40);
}
