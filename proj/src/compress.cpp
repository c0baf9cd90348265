#include "nilmbench/compress.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nilmbench {

std::vector<double> score_filters(const FilterBank& bank) {
  std::vector<double> scores(bank.out_channels, 0.0);
  const std::size_t per_filter =
      static_cast<std::size_t>(bank.in_channels) * bank.kernel_size;
  for (int f = 0; f < bank.out_channels; ++f) {
    const double* w = bank.filter(f);
    double acc = 0.0;
    for (std::size_t i = 0; i < per_filter; ++i) acc += std::abs(w[i]);
    scores[f] = acc;
  }
  return scores;
}

int kept_filter_count(int filters, double fraction) {
  // nearest-even rounding, at least one filter survives
  const int kept = static_cast<int>(std::nearbyint((1.0 - fraction) * filters));
  return std::max(1, kept);
}

namespace {

std::vector<int> select_kept(const std::vector<double>& scores, double fraction) {
  const int n = static_cast<int>(scores.size());
  const int kept = kept_filter_count(n, fraction);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  // highest score first; ties keep the lower index
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  std::vector<int> result(order.begin(), order.begin() + kept);
  std::sort(result.begin(), result.end());
  return result;
}

}  // namespace

PruneResult prune_model(const ModelParams& params, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("prune_model: fraction must be in [0, 1)");
  }

  PruneResult result;
  result.mask.kept.reserve(params.conv.size());
  for (const auto& bank : params.conv) {
    result.mask.kept.push_back(select_kept(score_filters(bank), fraction));
  }

  ModelParams& out = result.params;
  out.arch = params.arch;
  out.freeze_mask = params.freeze_mask;
  out.heads = params.heads;

  std::vector<int> prev_kept;  // empty means all input channels survive
  for (std::size_t layer = 0; layer < params.conv.size(); ++layer) {
    const FilterBank& src = params.conv[layer];
    const std::vector<int>& kept = result.mask.kept[layer];
    const std::vector<int> in_kept = prev_kept.empty()
                                         ? [&] {
                                             std::vector<int> all(src.in_channels);
                                             std::iota(all.begin(), all.end(), 0);
                                             return all;
                                           }()
                                         : prev_kept;
    FilterBank dst(static_cast<int>(kept.size()), static_cast<int>(in_kept.size()),
                   src.kernel_size, src.stride);
    for (std::size_t fo = 0; fo < kept.size(); ++fo) {
      dst.bias[fo] = src.bias[kept[fo]];
      for (std::size_t ci = 0; ci < in_kept.size(); ++ci) {
        for (int k = 0; k < src.kernel_size; ++k) {
          dst.w(static_cast<int>(fo), static_cast<int>(ci), k) =
              src.w(kept[fo], in_kept[ci], k);
        }
      }
    }
    out.conv.push_back(std::move(dst));
    out.arch.conv[layer].filters = static_cast<int>(kept.size());
    prev_kept = kept;
  }

  // shared dense: drop input columns of removed last-conv channels.
  // flatten layout is channel-major: column index = channel * width + pos.
  const int last_width = conv_output_widths(out.arch).back();
  const std::vector<int>& last_kept = result.mask.kept.back();
  DenseLayer dense(params.shared_dense.out_dim,
                   static_cast<int>(last_kept.size()) * last_width);
  dense.bias = params.shared_dense.bias;
  const int old_in = params.shared_dense.in_dim;
  for (int o = 0; o < dense.out_dim; ++o) {
    const double* src_row =
        params.shared_dense.weights.data() + static_cast<std::size_t>(o) * old_in;
    double* dst_row = dense.weights.data() + static_cast<std::size_t>(o) * dense.in_dim;
    for (std::size_t c = 0; c < last_kept.size(); ++c) {
      const double* src_cols = src_row + static_cast<std::size_t>(last_kept[c]) * last_width;
      std::copy(src_cols, src_cols + last_width, dst_row + c * last_width);
    }
  }
  out.shared_dense = std::move(dense);
  return result;
}

std::vector<double> eval_mae_watts(const ModelParams& params, const WindowBatch& batch) {
  const std::vector<double> preds = predict(params, batch);
  const int n_tasks = batch.n_tasks;
  std::vector<double> result(n_tasks, 0.0);
  for (int t = 0; t < n_tasks; ++t) {
    const NormStats& stats = batch.target_stats[t];
    double acc = 0.0;
    for (std::size_t i = 0; i < batch.count; ++i) {
      const double p = preds[i * n_tasks + t] * stats.std + stats.mean;
      const double y = batch.target(t, i) * stats.std + stats.mean;
      acc += std::abs(p - y);
    }
    result[t] = acc / static_cast<double>(batch.count);
  }
  return result;
}

namespace {

CompressResult finish_pipeline(const ModelParams& trained, const WindowBatch& train_batch,
                               const WindowBatch& eval_batch, double fraction,
                               const TrainConfig& retrain_cfg) {
  CompressResult result;
  PruneReport& report = result.report;
  report.fraction = fraction;
  report.params_before = param_count(trained);
  report.conv_ops_before = op_count(trained.arch);
  report.dense_ops_before = dense_op_count(trained.arch);
  report.mae_before = eval_mae_watts(trained, eval_batch);

  PruneResult pruned = prune_model(trained, fraction);
  for (std::size_t i = 0; i < pruned.mask.kept.size(); ++i) {
    const int before = trained.arch.conv[i].filters;
    const int after = static_cast<int>(pruned.mask.kept[i].size());
    report.layer_fraction_pruned.push_back(static_cast<double>(before - after) /
                                           static_cast<double>(before));
  }

  ModelParams final_params = std::move(pruned.params);
  if (fraction > 0.0) {
    TrainResult retrained = train(final_params, train_batch, retrain_cfg);
    if (retrained.diverged) {
      throw std::runtime_error("compress_pipeline: retraining diverged");
    }
    final_params = std::move(retrained.params);
  }

  report.params_after = param_count(final_params);
  report.conv_ops_after = op_count(final_params.arch);
  report.dense_ops_after = dense_op_count(final_params.arch);
  report.mae_after = eval_mae_watts(final_params, eval_batch);
  result.params = std::move(final_params);
  return result;
}

}  // namespace

CompressResult compress_pipeline(const WindowBatch& train_batch, const WindowBatch& eval_batch,
                                 const ArchSpec& arch, double fraction,
                                 const TrainConfig& train_cfg, const TrainConfig& retrain_cfg,
                                 std::uint64_t init_seed) {
  ModelParams initial = build_from_arch(arch, init_seed);
  TrainResult trained = train(initial, train_batch, train_cfg);
  if (trained.diverged) {
    throw std::runtime_error("compress_pipeline: initial training diverged");
  }
  return finish_pipeline(trained.params, train_batch, eval_batch, fraction, retrain_cfg);
}

CompressResult compress_pretrained(const ModelParams& trained, const WindowBatch& train_batch,
                                   const WindowBatch& eval_batch, double fraction,
                                   const TrainConfig& retrain_cfg) {
  return finish_pipeline(trained, train_batch, eval_batch, fraction, retrain_cfg);
}

}  // namespace nilmbench
