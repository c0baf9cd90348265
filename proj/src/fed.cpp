#include "nilmbench/fed.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <future>
#include <stdexcept>
#include <thread>

#include "nilmbench/params_io.hpp"

namespace nilmbench {

std::vector<double> average_vectors(const std::vector<const std::vector<double>*>& inputs,
                                    const std::vector<double>* weights) {
  if (inputs.empty()) throw std::invalid_argument("average_vectors: no inputs");
  const std::size_t n = inputs[0]->size();
  for (const auto* v : inputs) {
    if (v->size() != n) throw std::invalid_argument("average_vectors: size mismatch");
  }
  std::vector<double> norm_w;
  if (weights) {
    if (weights->size() != inputs.size()) {
      throw std::invalid_argument("average_vectors: weight count mismatch");
    }
    double total = 0.0;
    for (double w : *weights) {
      if (w < 0.0 || !std::isfinite(w)) {
        throw std::invalid_argument("average_vectors: weights must be nonnegative");
      }
      total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("average_vectors: weights sum to zero");
    norm_w.reserve(weights->size());
    for (double w : *weights) norm_w.push_back(w / total);
  } else {
    norm_w.assign(inputs.size(), 1.0 / static_cast<double>(inputs.size()));
  }

  // identical inputs pass through bit-exactly (mean of equal vectors)
  bool all_equal = true;
  for (std::size_t k = 1; all_equal && k < inputs.size(); ++k) {
    all_equal = std::memcmp(inputs[0]->data(), inputs[k]->data(), n * sizeof(double)) == 0;
  }
  if (all_equal) return *inputs[0];

  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const double w = norm_w[k];
    const double* src = inputs[k]->data();
    for (std::size_t i = 0; i < n; ++i) out[i] += w * src[i];
  }
  return out;
}

ModelParams fedavg(const std::vector<ModelParams>& clients, const std::vector<double>* weights) {
  if (clients.empty()) throw std::invalid_argument("fedavg: no client models");
  for (const auto& c : clients) {
    if (!(c.arch == clients[0].arch)) {
      throw std::invalid_argument("fedavg: architecture mismatch across clients");
    }
  }
  if (clients.size() == 1 && !weights) return clients[0];

  ModelParams out = clients[0];
  std::vector<std::vector<double>*> out_arrays;
  for_each_param_array(out, [&](int, std::vector<double>& a) { out_arrays.push_back(&a); });

  std::vector<std::vector<const std::vector<double>*>> gathered(out_arrays.size());
  for (const auto& client : clients) {
    std::size_t idx = 0;
    for_each_param_array(client, [&](int, const std::vector<double>& a) {
      gathered[idx++].push_back(&a);
    });
  }
  for (std::size_t i = 0; i < out_arrays.size(); ++i) {
    *out_arrays[i] = average_vectors(gathered[i], weights);
  }
  return out;
}

ServerState bootstrap(const PowerSeries& cloud_mains,
                      const std::vector<PowerSeries>& cloud_appliances, const FedConfig& cfg) {
  if (cloud_appliances.empty()) throw std::invalid_argument("bootstrap: no cloud appliances");

  const WindowBatch all = build_batch(cloud_mains, cloud_appliances, cfg.window);
  auto [train_batch, probe] = split_batch(all, cfg.probe_fraction);
  if (train_batch.count == 0 || probe.count == 0) {
    throw std::invalid_argument("bootstrap: cloud dataset too small");
  }

  const ArchSpec arch = default_arch(cfg.window, static_cast<int>(cloud_appliances.size()));
  const Rng root(cfg.seed);
  CompressResult compressed =
      compress_pipeline(train_batch, probe, arch, cfg.prune_fraction, cfg.cloud_train,
                        cfg.retrain, Rng(cfg.seed).stream("init").next_u64());

  ServerState server;
  server.global = std::move(compressed.params);
  server.prune_report = std::move(compressed.report);
  server.probe = std::move(probe);
  server.source_sample =
      subsample_batch(train_batch, cfg.source_sample, root.stream("source_sample"));
  server.bootstrap_probe_mae = probe_mean_mae(server.global, server.probe);
  return server;
}

double probe_mean_mae(const ModelParams& params, const WindowBatch& probe) {
  const std::vector<double> per_task = eval_mae_watts(params, probe);
  double acc = 0.0;
  for (double v : per_task) acc += v;
  return acc / static_cast<double>(per_task.size());
}

ClientUpdate client_update(const ClientState& client, const ModelParams& global,
                           const ServerState& server, const FedConfig& cfg) {
  if (client.mains.values.size() < static_cast<std::size_t>(cfg.window)) {
    throw std::invalid_argument("client " + client.id + ": no usable local windows");
  }
  const TargetWindows target = build_target_windows(client.mains, cfg.window);
  if (target.count == 0) {
    throw std::invalid_argument("client " + client.id + ": no usable local windows");
  }

  TrainConfig train_cfg = cfg.client_train;
  // per-client sub-stream keeps clients decorrelated but reproducible
  train_cfg.seed = Rng(cfg.seed).stream("client." + client.id).next_u64();

  PersonalizeResult personalized =
      personalize(global, server.source_sample, target, cfg.coral, train_cfg);
  if (personalized.diverged) {
    throw std::runtime_error("client " + client.id + ": personalization diverged");
  }

  ClientUpdate update;
  update.params = std::move(personalized.params);
  update.local_windows = target.count;
  update.regression_loss = personalized.epoch_regression_loss.empty()
                               ? 0.0
                               : personalized.epoch_regression_loss.back();
  update.coral_loss =
      personalized.epoch_coral_loss.empty() ? 0.0 : personalized.epoch_coral_loss.back();
  return update;
}

namespace {

double update_norm(const ModelParams& a, const ModelParams& b) {
  std::vector<const std::vector<double>*> arrays_a;
  for_each_param_array(a, [&](int, const std::vector<double>& v) { arrays_a.push_back(&v); });
  std::vector<const std::vector<double>*> arrays_b;
  for_each_param_array(b, [&](int, const std::vector<double>& v) { arrays_b.push_back(&v); });
  double acc = 0.0;
  for (std::size_t i = 0; i < arrays_a.size(); ++i) {
    for (std::size_t j = 0; j < arrays_a[i]->size(); ++j) {
      const double d = (*arrays_a[i])[j] - (*arrays_b[i])[j];
      acc += d * d;
    }
  }
  return std::sqrt(acc);
}

}  // namespace

RoundReport run_round(ServerState& server, std::vector<ClientState>& clients,
                      const FedConfig& cfg) {
  if (clients.empty()) throw std::invalid_argument("run_round: no clients");
  const auto t0 = std::chrono::steady_clock::now();

  RoundReport report;
  report.round = server.round + 1;
  report.clients.resize(clients.size());

  int workers = cfg.workers > 0 ? cfg.workers
                                : static_cast<int>(std::min<std::size_t>(
                                      clients.size(),
                                      std::max(1u, std::thread::hardware_concurrency())));
  workers = std::max(1, workers);

  std::vector<std::optional<ClientUpdate>> updates(clients.size());
  const ModelParams& global = server.global;

  std::size_t next = 0;
  while (next < clients.size()) {
    const std::size_t batch_end = std::min(clients.size(), next + workers);
    std::vector<std::future<void>> futures;
    for (std::size_t i = next; i < batch_end; ++i) {
      futures.push_back(std::async(std::launch::async, [&, i] {
        ClientRoundEntry& entry = report.clients[i];
        entry.id = clients[i].id;
        const auto c0 = std::chrono::steady_clock::now();
        try {
          ClientUpdate u = client_update(clients[i], global, server, cfg);
          if (!(u.params.arch == global.arch)) {
            throw std::runtime_error("client " + clients[i].id + ": architecture mismatch");
          }
          entry.update_norm = update_norm(u.params, global);
          entry.regression_loss = u.regression_loss;
          entry.coral_loss = u.coral_loss;
          entry.local_windows = u.local_windows;
          entry.ok = true;
          updates[i] = std::move(u);
        } catch (const std::exception& e) {
          entry.ok = false;
          entry.error = e.what();
        }
        entry.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - c0).count();
      }));
    }
    for (auto& f : futures) f.get();
    next = batch_end;
  }

  std::vector<ModelParams> participating;
  std::vector<double> weights;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    if (!updates[i]) continue;
    participating.push_back(std::move(updates[i]->params));
    weights.push_back(static_cast<double>(updates[i]->local_windows));
  }
  if (participating.empty()) {
    report.aborted = true;
    report.params_digest = params_digest(server.global);
    report.probe_mean_mae = probe_mean_mae(server.global, server.probe);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
  }

  ModelParams aggregated =
      cfg.policy == AggregationPolicy::kSampleWeighted
          ? fedavg(participating, &weights)
          : fedavg(participating, nullptr);
  if (!cfg.aggregate_heads) {
    // trunk-only policy: conv + shared dense move, server keeps its heads
    aggregated.heads = server.global.heads;
  }

  // store personalized models back on the clients (edge-side state)
  std::size_t k = 0;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    if (report.clients[i].ok) clients[i].personalized = participating[k++];
  }

  server.global = std::move(aggregated);
  server.round += 1;
  report.params_digest = params_digest(server.global);
  report.probe_mean_mae = probe_mean_mae(server.global, server.probe);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace nilmbench
