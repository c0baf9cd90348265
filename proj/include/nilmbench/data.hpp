#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nilmbench/rng.hpp"

namespace nilmbench {

// Uniformly sampled power signal in watts.
struct PowerSeries {
  double start_time = 0.0;  // epoch seconds
  double period = 1.0;      // seconds, > 0
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

struct NormStats {
  double mean = 0.0;
  double std = 1.0;  // already clamped to >= kNormStdFloor
};

inline constexpr double kNormStdFloor = 1e-6;

struct LoadOptions {
  // gaps of up to this many missing samples are forward-filled; longer gaps
  // split the series into segments
  int max_fill = 3;
};

// Reads a `timestamp,watts` CSV into uniformly sampled segments.
// Throws std::runtime_error on unparseable rows or non-monotone timestamps.
std::vector<PowerSeries> load_series(const std::string& path, const LoadOptions& opts = {});

void save_series_csv(const std::string& path, const PowerSeries& series);

// Mean-aggregates into bins of target_period; trailing partial bin dropped.
PowerSeries resample(const PowerSeries& series, double target_period);

NormStats compute_stats(const std::vector<double>& values);
PowerSeries normalize(const PowerSeries& series, NormStats* stats_out);
std::vector<double> normalize_values(const std::vector<double>& values, const NormStats& stats);
std::vector<double> denormalize_values(const std::vector<double>& values, const NormStats& stats);

// Input windows with midpoint targets. Inputs are count x window (row-major),
// targets are task-major: targets[task * count + i].
struct WindowBatch {
  int window = 0;
  int n_tasks = 0;
  std::size_t count = 0;
  std::vector<double> inputs;
  std::vector<double> targets;
  NormStats mains_stats;
  std::vector<NormStats> target_stats;  // one per task

  const double* input_row(std::size_t i) const { return inputs.data() + i * window; }
  double target(int task, std::size_t i) const { return targets[task * count + i]; }
};

// Mains windows only; carries no appliance labels by construction, so
// unsupervised consumers cannot read targets even by accident.
struct TargetWindows {
  int window = 0;
  std::size_t count = 0;
  std::vector<double> inputs;
  NormStats mains_stats;

  const double* input_row(std::size_t i) const { return inputs.data() + i * window; }
};

// Slides a length-w window over aligned, already-normalized series. The target
// for the window starting at t is the appliance value at t + floor(w/2).
// Throws std::invalid_argument on misaligned series or T < w.
WindowBatch make_windows(const PowerSeries& mains, const std::vector<PowerSeries>& appliances,
                         int window);

// normalize + make_windows, keeping the stats used.
WindowBatch build_batch(const PowerSeries& mains, const std::vector<PowerSeries>& appliances,
                        int window);

TargetWindows build_target_windows(const PowerSeries& mains, int window);

// Deterministic index split: first (1 - eval_fraction) of windows for
// training, the rest for evaluation (time-ordered).
std::pair<WindowBatch, WindowBatch> split_batch(const WindowBatch& batch, double eval_fraction);

WindowBatch subsample_batch(const WindowBatch& batch, std::size_t max_count, Rng rng);

// Square-wave ON/OFF appliance pattern.
struct AppliancePattern {
  double period_s = 3600.0;  // cycle length in seconds
  double duty = 0.3;         // fraction of the cycle spent ON
  double level_w = 100.0;    // power draw when ON
  double jitter = 0.0;       // +- relative jitter on cycle length and ON duration
};

struct SynthSpec {
  int length = 0;             // number of samples T
  double sample_period = 60.0;
  double start_time = 0.0;
  std::vector<AppliancePattern> appliances;
  double residual_level = 0.0;  // constant unmetered load u_t
  double noise_sigma = 0.0;     // std dev of the Gaussian noise term
};

// mains[t] = sum_i appliance[i][t] + residual[t] + noise[t], exactly; the
// mains is not clamped so the additive identity holds bit-for-bit at sigma=0.
struct SynthHousehold {
  PowerSeries mains;
  std::vector<PowerSeries> appliances;
  PowerSeries residual;
  double noise_sigma = 0.0;
};

SynthHousehold synth_household(const SynthSpec& spec, std::uint64_t seed);

}  // namespace nilmbench
