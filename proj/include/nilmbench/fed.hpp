#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nilmbench/adapt.hpp"
#include "nilmbench/compress.hpp"
#include "nilmbench/model.hpp"

namespace nilmbench {

// Normalized weighted elementwise mean. Input vectors must share a size;
// weights (if given) must be nonnegative and not all zero. Arrays that are
// bitwise identical across inputs pass through unchanged, so averaging K
// copies of one model returns that model exactly.
std::vector<double> average_vectors(const std::vector<const std::vector<double>*>& inputs,
                                    const std::vector<double>* weights);

// Federated aggregation over full parameter sets. All inputs must share one
// ArchSpec; a mismatch throws std::invalid_argument.
ModelParams fedavg(const std::vector<ModelParams>& clients,
                   const std::vector<double>* weights = nullptr);

enum class AggregationPolicy { kUniform, kSampleWeighted };

struct FedConfig {
  int window = 99;
  double prune_fraction = 0.6;
  TrainConfig cloud_train;
  TrainConfig retrain;
  TrainConfig client_train;
  CoralConfig coral;
  std::size_t source_sample = 1024;
  double probe_fraction = 0.2;
  AggregationPolicy policy = AggregationPolicy::kUniform;
  bool aggregate_heads = true;  // false: trunk only, server keeps its heads
  int workers = 0;              // 0 = one per client, capped by hardware
  std::uint64_t seed = 0;
};

// Server side: global parameters, cloud-owned probe split and the cached
// source sample shipped to clients. Holds no client data.
struct ServerState {
  ModelParams global;
  int round = 0;
  WindowBatch source_sample;
  WindowBatch probe;
  PruneReport prune_report;
  std::vector<std::string> client_ids;
  double bootstrap_probe_mae = 0.0;
};

struct ClientState {
  std::string id;
  PowerSeries mains;
  std::vector<PowerSeries> appliances;  // simulation ground truth, eval only
  std::optional<ModelParams> personalized;
  std::optional<MetricsReport> last_metrics;
};

struct ClientRoundEntry {
  std::string id;
  bool ok = false;
  std::string error;
  double update_norm = 0.0;
  double regression_loss = 0.0;
  double coral_loss = 0.0;
  std::size_t local_windows = 0;
  double wall_seconds = 0.0;
};

struct RoundReport {
  int round = 0;
  bool aborted = false;
  std::vector<ClientRoundEntry> clients;
  std::string params_digest;
  double probe_mean_mae = 0.0;
  double wall_seconds = 0.0;
};

// Step one of the workflow: train the multi-task model on cloud data, run the
// prune/retrain pipeline at prune_fraction and install the result as the
// global model, keeping a probe split and the client-bound source sample.
ServerState bootstrap(const PowerSeries& cloud_mains,
                      const std::vector<PowerSeries>& cloud_appliances, const FedConfig& cfg);

struct ClientUpdate {
  ModelParams params;
  double regression_loss = 0.0;
  double coral_loss = 0.0;
  std::size_t local_windows = 0;
};

// Personalizes the global model on one client's unlabeled mains. Throws on
// empty local data.
ClientUpdate client_update(const ClientState& client, const ModelParams& global,
                           const ServerState& server, const FedConfig& cfg);

// One synchronous round: distribute, personalize in parallel workers,
// aggregate, evaluate on the probe split. If every client fails the round is
// aborted and the server is left untouched.
RoundReport run_round(ServerState& server, std::vector<ClientState>& clients,
                      const FedConfig& cfg);

double probe_mean_mae(const ModelParams& params, const WindowBatch& probe);

}  // namespace nilmbench
