#include "nilmbench/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nilmbench {

namespace {

double parse_double(const std::string& s, const std::string& path, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\r')) ++pos;
    if (pos != s.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": unparseable value '" +
                             s + "'");
  }
}

}  // namespace

std::vector<PowerSeries> load_series(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "timestamp,watts") {
    throw std::runtime_error(path + ": expected header 'timestamp,watts', got '" + line + "'");
  }

  std::vector<double> ts;
  std::vector<double> watts;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": missing comma");
    }
    const double t = parse_double(line.substr(0, comma), path, line_no);
    const double w = parse_double(line.substr(comma + 1), path, line_no);
    if (!ts.empty() && t <= ts.back()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": non-monotone timestamp");
    }
    ts.push_back(t);
    watts.push_back(std::max(0.0, w));
  }
  if (ts.empty()) throw std::runtime_error(path + ": no data rows");
  if (ts.size() == 1) {
    PowerSeries s;
    s.start_time = ts[0];
    s.period = 1.0;
    s.values = {watts[0]};
    return {s};
  }

  // sampling period = median of consecutive diffs
  std::vector<double> diffs(ts.size() - 1);
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) diffs[i] = ts[i + 1] - ts[i];
  std::vector<double> sorted = diffs;
  std::sort(sorted.begin(), sorted.end());
  const double period = sorted[sorted.size() / 2];
  if (period <= 0.0) throw std::runtime_error(path + ": could not infer sampling period");

  std::vector<PowerSeries> segments;
  PowerSeries cur;
  cur.start_time = ts[0];
  cur.period = period;
  cur.values.push_back(watts[0]);
  for (std::size_t i = 1; i < ts.size(); ++i) {
    const double gap = (ts[i] - ts[i - 1]) / period;
    const long steps = std::lround(gap);
    if (std::abs(gap - static_cast<double>(steps)) > 0.1 || steps < 1) {
      throw std::runtime_error(path + ": irregular timestamp spacing near t=" +
                               std::to_string(ts[i]));
    }
    const long missing = steps - 1;
    if (missing == 0) {
      cur.values.push_back(watts[i]);
    } else if (missing <= opts.max_fill) {
      for (long j = 0; j < missing; ++j) cur.values.push_back(cur.values.back());
      cur.values.push_back(watts[i]);
    } else {
      segments.push_back(std::move(cur));
      cur = PowerSeries{};
      cur.start_time = ts[i];
      cur.period = period;
      cur.values.push_back(watts[i]);
    }
  }
  segments.push_back(std::move(cur));
  return segments;
}

void save_series_csv(const std::string& path, const PowerSeries& series) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "timestamp,watts\n";
  char buf[64];
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    const double t = series.start_time + static_cast<double>(i) * series.period;
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", t, series.values[i]);
    out << buf;
  }
}

PowerSeries resample(const PowerSeries& series, double target_period) {
  if (target_period <= 0.0) throw std::invalid_argument("resample: target_period <= 0");
  const double ratio = target_period / series.period;
  const long m = std::lround(ratio);
  if (m < 1 || std::abs(ratio - static_cast<double>(m)) > 0.01) {
    throw std::invalid_argument("resample: target_period must be an integer multiple of period");
  }
  PowerSeries out;
  out.start_time = series.start_time;
  out.period = target_period;
  const std::size_t bins = series.values.size() / static_cast<std::size_t>(m);
  out.values.reserve(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    double acc = 0.0;
    for (long j = 0; j < m; ++j) acc += series.values[b * m + j];
    out.values.push_back(acc / static_cast<double>(m));
  }
  return out;
}

NormStats compute_stats(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("compute_stats: empty series");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) {
    const double d = v - mean;
    var += d * d;
  }
  var /= static_cast<double>(values.size());
  NormStats s;
  s.mean = mean;
  s.std = std::max(std::sqrt(var), kNormStdFloor);
  return s;
}

PowerSeries normalize(const PowerSeries& series, NormStats* stats_out) {
  const NormStats stats = compute_stats(series.values);
  if (stats_out) *stats_out = stats;
  PowerSeries out = series;
  for (double& v : out.values) v = (v - stats.mean) / stats.std;
  return out;
}

std::vector<double> normalize_values(const std::vector<double>& values, const NormStats& stats) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - stats.mean) / stats.std;
  return out;
}

std::vector<double> denormalize_values(const std::vector<double>& values, const NormStats& stats) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] * stats.std + stats.mean;
  return out;
}

namespace {

void check_aligned(const PowerSeries& a, const PowerSeries& b) {
  if (a.start_time != b.start_time || a.period != b.period ||
      a.values.size() != b.values.size()) {
    throw std::invalid_argument("make_windows: series not aligned");
  }
}

}  // namespace

WindowBatch make_windows(const PowerSeries& mains, const std::vector<PowerSeries>& appliances,
                         int window) {
  if (window < 1) throw std::invalid_argument("make_windows: window < 1");
  const std::size_t T = mains.values.size();
  if (T < static_cast<std::size_t>(window)) {
    throw std::invalid_argument("make_windows: series shorter than window");
  }
  for (const auto& a : appliances) check_aligned(mains, a);

  WindowBatch batch;
  batch.window = window;
  batch.n_tasks = static_cast<int>(appliances.size());
  batch.count = T - static_cast<std::size_t>(window) + 1;
  batch.inputs.resize(batch.count * window);
  for (std::size_t i = 0; i < batch.count; ++i) {
    std::copy(mains.values.begin() + i, mains.values.begin() + i + window,
              batch.inputs.begin() + i * window);
  }
  const std::size_t mid = static_cast<std::size_t>(window) / 2;
  batch.targets.resize(static_cast<std::size_t>(batch.n_tasks) * batch.count);
  for (int task = 0; task < batch.n_tasks; ++task) {
    const auto& vals = appliances[task].values;
    for (std::size_t i = 0; i < batch.count; ++i) {
      batch.targets[task * batch.count + i] = vals[i + mid];
    }
  }
  batch.target_stats.assign(batch.n_tasks, NormStats{});
  return batch;
}

WindowBatch build_batch(const PowerSeries& mains, const std::vector<PowerSeries>& appliances,
                        int window) {
  NormStats mains_stats;
  const PowerSeries mains_n = normalize(mains, &mains_stats);
  std::vector<PowerSeries> apps_n;
  std::vector<NormStats> app_stats;
  apps_n.reserve(appliances.size());
  for (const auto& a : appliances) {
    NormStats s;
    apps_n.push_back(normalize(a, &s));
    app_stats.push_back(s);
  }
  WindowBatch batch = make_windows(mains_n, apps_n, window);
  batch.mains_stats = mains_stats;
  batch.target_stats = app_stats;
  return batch;
}

TargetWindows build_target_windows(const PowerSeries& mains, int window) {
  NormStats stats;
  const PowerSeries mains_n = normalize(mains, &stats);
  const WindowBatch b = make_windows(mains_n, {}, window);
  TargetWindows t;
  t.window = window;
  t.count = b.count;
  t.inputs = b.inputs;
  t.mains_stats = stats;
  return t;
}

std::pair<WindowBatch, WindowBatch> split_batch(const WindowBatch& batch, double eval_fraction) {
  if (eval_fraction < 0.0 || eval_fraction >= 1.0) {
    throw std::invalid_argument("split_batch: eval_fraction out of range");
  }
  const std::size_t eval_count =
      static_cast<std::size_t>(std::floor(eval_fraction * static_cast<double>(batch.count)));
  const std::size_t train_count = batch.count - eval_count;

  auto take = [&](std::size_t begin, std::size_t n) {
    WindowBatch out;
    out.window = batch.window;
    out.n_tasks = batch.n_tasks;
    out.count = n;
    out.mains_stats = batch.mains_stats;
    out.target_stats = batch.target_stats;
    out.inputs.assign(batch.inputs.begin() + begin * batch.window,
                      batch.inputs.begin() + (begin + n) * batch.window);
    out.targets.resize(static_cast<std::size_t>(batch.n_tasks) * n);
    for (int task = 0; task < batch.n_tasks; ++task) {
      std::copy(batch.targets.begin() + task * batch.count + begin,
                batch.targets.begin() + task * batch.count + begin + n,
                out.targets.begin() + task * n);
    }
    return out;
  };
  return {take(0, train_count), take(train_count, eval_count)};
}

WindowBatch subsample_batch(const WindowBatch& batch, std::size_t max_count, Rng rng) {
  if (batch.count <= max_count) return batch;
  // floating stride keeps coverage across the whole span
  std::vector<std::size_t> picks(max_count);
  const double stride = static_cast<double>(batch.count) / static_cast<double>(max_count);
  for (std::size_t i = 0; i < max_count; ++i) {
    const double base = stride * static_cast<double>(i);
    const std::size_t lo = static_cast<std::size_t>(base);
    const std::size_t span = std::max<std::size_t>(1, static_cast<std::size_t>(stride));
    picks[i] = std::min(batch.count - 1, lo + rng.next_below(span));
  }
  WindowBatch out;
  out.window = batch.window;
  out.n_tasks = batch.n_tasks;
  out.count = max_count;
  out.mains_stats = batch.mains_stats;
  out.target_stats = batch.target_stats;
  out.inputs.resize(max_count * batch.window);
  out.targets.resize(static_cast<std::size_t>(batch.n_tasks) * max_count);
  for (std::size_t i = 0; i < max_count; ++i) {
    std::copy(batch.input_row(picks[i]), batch.input_row(picks[i]) + batch.window,
              out.inputs.begin() + i * batch.window);
    for (int task = 0; task < batch.n_tasks; ++task) {
      out.targets[task * max_count + i] = batch.target(task, picks[i]);
    }
  }
  return out;
}

SynthHousehold synth_household(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.length < 1) throw std::invalid_argument("synth_household: length < 1");
  if (spec.appliances.empty()) throw std::invalid_argument("synth_household: no appliances");
  if (spec.sample_period <= 0.0) throw std::invalid_argument("synth_household: bad period");

  const Rng root(seed);
  const std::size_t T = static_cast<std::size_t>(spec.length);

  SynthHousehold hh;
  hh.noise_sigma = spec.noise_sigma;
  hh.appliances.reserve(spec.appliances.size());

  for (std::size_t a = 0; a < spec.appliances.size(); ++a) {
    const AppliancePattern& pat = spec.appliances[a];
    if (pat.period_s <= 0.0 || pat.duty < 0.0 || pat.duty > 1.0 || pat.level_w < 0.0) {
      throw std::invalid_argument("synth_household: bad appliance pattern");
    }
    Rng rng = root.stream("appliance", a);
    PowerSeries s;
    s.start_time = spec.start_time;
    s.period = spec.sample_period;
    s.values.assign(T, 0.0);

    const double period_samples = pat.period_s / spec.sample_period;
    // phase offset so appliances do not all switch at t=0
    double cycle_start = -rng.next_double() * period_samples;
    while (cycle_start < static_cast<double>(T)) {
      const double len = period_samples * (1.0 + pat.jitter * rng.uniform(-1.0, 1.0));
      const double on = pat.duty * period_samples * (1.0 + pat.jitter * rng.uniform(-1.0, 1.0));
      const long lo = std::max(0L, static_cast<long>(std::ceil(cycle_start)));
      const long hi = std::min(static_cast<long>(T),
                               static_cast<long>(std::ceil(cycle_start + std::max(0.0, on))));
      for (long t = lo; t < hi; ++t) s.values[static_cast<std::size_t>(t)] = pat.level_w;
      cycle_start += std::max(1.0, len);
    }
    hh.appliances.push_back(std::move(s));
  }

  hh.residual.start_time = spec.start_time;
  hh.residual.period = spec.sample_period;
  hh.residual.values.assign(T, spec.residual_level);

  Rng noise = root.stream("noise");
  hh.mains.start_time = spec.start_time;
  hh.mains.period = spec.sample_period;
  hh.mains.values.assign(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double acc = 0.0;
    for (const auto& s : hh.appliances) acc += s.values[t];
    acc += hh.residual.values[t];
    if (spec.noise_sigma > 0.0) acc += noise.normal(0.0, spec.noise_sigma);
    hh.mains.values[t] = acc;
  }
  return hh;
}

}  // namespace nilmbench
