#include "nilmbench/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace nilmbench {

std::vector<double> covariance(const std::vector<double>& features, std::size_t n, int dim) {
  if (n < 2) throw std::invalid_argument("covariance: need at least 2 rows");
  if (features.size() != n * static_cast<std::size_t>(dim)) {
    throw std::invalid_argument("covariance: feature size mismatch");
  }
  std::vector<double> mean(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = features.data() + i * dim;
    for (int j = 0; j < dim; ++j) mean[j] += row[j];
  }
  for (double& m : mean) m /= static_cast<double>(n);

  std::vector<double> cov(static_cast<std::size_t>(dim) * dim, 0.0);
  std::vector<double> centered(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = features.data() + i * dim;
    for (int j = 0; j < dim; ++j) centered[j] = row[j] - mean[j];
    for (int a = 0; a < dim; ++a) {
      const double ca = centered[a];
      double* cov_row = cov.data() + static_cast<std::size_t>(a) * dim;
      for (int b = a; b < dim; ++b) cov_row[b] += ca * centered[b];
    }
  }
  const double norm = 1.0 / static_cast<double>(n - 1);
  for (int a = 0; a < dim; ++a) {
    for (int b = a; b < dim; ++b) {
      const double v = cov[static_cast<std::size_t>(a) * dim + b] * norm;
      cov[static_cast<std::size_t>(a) * dim + b] = v;
      cov[static_cast<std::size_t>(b) * dim + a] = v;
    }
  }
  return cov;
}

double coral_loss(const std::vector<double>& cov_s, const std::vector<double>& cov_t, int dim) {
  const std::size_t size = static_cast<std::size_t>(dim) * dim;
  if (cov_s.size() != size || cov_t.size() != size) {
    throw std::invalid_argument("coral_loss: covariance shape mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = cov_s[i] - cov_t[i];
    acc += d * d;
  }
  return acc / (4.0 * static_cast<double>(dim) * static_cast<double>(dim));
}

namespace {

// grad = centered(F) * D * scale, computed without materializing centered(F)
void accumulate_coral_grad(const std::vector<double>& features, std::size_t n, int dim,
                           const std::vector<double>& diff, double scale,
                           std::vector<double>& grad) {
  std::vector<double> mean(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = features.data() + i * dim;
    for (int j = 0; j < dim; ++j) mean[j] += row[j];
  }
  for (double& m : mean) m /= static_cast<double>(n);

  grad.assign(n * static_cast<std::size_t>(dim), 0.0);
  std::vector<double> centered(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = features.data() + i * dim;
    double* g_row = grad.data() + i * dim;
    for (int j = 0; j < dim; ++j) centered[j] = row[j] - mean[j];
    for (int a = 0; a < dim; ++a) {
      const double ca = centered[a];
      if (ca == 0.0) continue;
      const double* d_row = diff.data() + static_cast<std::size_t>(a) * dim;
      for (int b = 0; b < dim; ++b) g_row[b] += ca * d_row[b] * scale;
    }
  }
}

}  // namespace

CoralGrad coral_loss_grad(const std::vector<double>& feat_s, std::size_t n_s,
                          const std::vector<double>& feat_t, std::size_t n_t, int dim) {
  const std::vector<double> cov_s = covariance(feat_s, n_s, dim);
  const std::vector<double> cov_t = covariance(feat_t, n_t, dim);

  CoralGrad out;
  out.loss = coral_loss(cov_s, cov_t, dim);

  std::vector<double> diff(cov_s.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = cov_s[i] - cov_t[i];

  const double sigma2 = static_cast<double>(dim) * static_cast<double>(dim);
  accumulate_coral_grad(feat_s, n_s, dim, diff, 1.0 / (sigma2 * static_cast<double>(n_s - 1)),
                        out.grad_source);
  accumulate_coral_grad(feat_t, n_t, dim, diff, -1.0 / (sigma2 * static_cast<double>(n_t - 1)),
                        out.grad_target);
  return out;
}

double edge_loss(double regression_loss, double coral, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("edge_loss: lambda < 0");
  return regression_loss + lambda * coral;
}

namespace {

// Dense trunk applied to precomputed flatten features: the trainable part of
// a conv-frozen model.
struct DenseHeadModel {
  DenseLayer* shared;
  std::vector<DenseLayer>* heads;
};

void dense_head_forward(const ModelParams& p, const double* feat, int flat_dim,
                        std::vector<double>& act, std::vector<double>& preds) {
  const int dim = p.arch.dense_width;
  act.resize(dim);
  for (int o = 0; o < dim; ++o) {
    const double* w = p.shared_dense.weights.data() + static_cast<std::size_t>(o) * flat_dim;
    double acc = p.shared_dense.bias[o];
    for (int i = 0; i < flat_dim; ++i) acc += w[i] * feat[i];
    act[o] = acc > 0.0 ? acc : 0.0;
  }
  preds.resize(p.heads.size());
  for (std::size_t t = 0; t < p.heads.size(); ++t) {
    const double* hw = p.heads[t].weights.data();
    double acc = p.heads[t].bias[0];
    for (int i = 0; i < dim; ++i) acc += hw[i] * act[i];
    preds[t] = acc;
  }
}

}  // namespace

PersonalizeResult personalize(const ModelParams& cloud_model, const WindowBatch& source,
                              const TargetWindows& target, const CoralConfig& coral_cfg,
                              const TrainConfig& train_cfg) {
  if (target.count == 0) throw std::invalid_argument("personalize: empty target data");
  if (source.count == 0) throw std::invalid_argument("personalize: empty source data");
  if (source.window != cloud_model.arch.window_size ||
      target.window != cloud_model.arch.window_size) {
    throw std::invalid_argument("personalize: window size mismatch");
  }
  if (source.n_tasks != cloud_model.arch.n_tasks) {
    throw std::invalid_argument("personalize: task count mismatch");
  }
  if (coral_cfg.lambda < 0.0) throw std::invalid_argument("personalize: lambda < 0");
  if (train_cfg.epochs < 0 || train_cfg.batch_size < 1) {
    throw std::invalid_argument("personalize: bad train config");
  }

  PersonalizeResult result;
  result.params = cloud_model;
  ModelParams& p = result.params;
  for (int l = 0; l < p.n_conv(); ++l) p.freeze_mask[l] = 1;
  if (train_cfg.epochs == 0) return result;

  const int flat_dim = flatten_size(p.arch);
  const int dense_dim = p.arch.dense_width;
  const int n_tasks = p.arch.n_tasks;

  // conv layers are frozen, so flatten features are constants; compute once
  const std::vector<double> feat_s = flatten_features(p, source.inputs.data(), source.count);
  const std::vector<double> feat_t = flatten_features(p, target.inputs.data(), target.count);

  const bool align_dense = coral_cfg.layer == CoralConfig::AlignLayer::SharedDense;
  const int coral_dim = align_dense ? dense_dim : flat_dim;

  const std::size_t batches_per_epoch =
      (source.count + train_cfg.batch_size - 1) / train_cfg.batch_size;
  const std::size_t total_steps = batches_per_epoch * static_cast<std::size_t>(train_cfg.epochs);
  const std::size_t warmup_steps = static_cast<std::size_t>(
      std::ceil(coral_cfg.warmup_fraction * static_cast<double>(total_steps)));

  const AdamConfig adam_cfg = train_cfg.adam();
  AdamState st_dw(p.shared_dense.weights.size());
  AdamState st_db(p.shared_dense.bias.size());
  std::vector<AdamState> st_hw;
  std::vector<AdamState> st_hb;
  for (int t = 0; t < n_tasks; ++t) {
    st_hw.emplace_back(p.heads[t].weights.size());
    st_hb.emplace_back(p.heads[t].bias.size());
  }

  const Rng root(train_cfg.seed);
  Rng target_rng = root.stream("target");
  std::vector<std::size_t> order(source.count);
  std::iota(order.begin(), order.end(), 0);

  const std::size_t m = std::min<std::size_t>(
      std::max(2, coral_cfg.target_batch), target.count);

  std::vector<double> gw_dense(p.shared_dense.weights.size());
  std::vector<double> gb_dense(p.shared_dense.bias.size());
  std::vector<std::vector<double>> gw_heads(n_tasks, std::vector<double>(dense_dim));
  std::vector<double> gb_heads(n_tasks);

  ModelParams last_good = p;
  std::size_t step = 0;

  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    Rng shuffle = root.stream("shuffle", static_cast<std::uint64_t>(epoch));
    for (std::size_t i = source.count; i > 1; --i) {
      std::swap(order[i - 1], order[shuffle.next_below(i)]);
    }

    double epoch_reg = 0.0;
    double epoch_coral = 0.0;
    std::size_t n_batches = 0;

    for (std::size_t begin = 0; begin < source.count; begin += train_cfg.batch_size) {
      const std::size_t b =
          std::min<std::size_t>(train_cfg.batch_size, source.count - begin);
      if (b < 2 && coral_cfg.lambda > 0.0) break;  // covariance needs >= 2 rows

      // source forward
      std::vector<double> act_s(b * dense_dim);
      std::vector<double> preds(b * n_tasks);
      {
        std::vector<double> act;
        std::vector<double> pr;
        for (std::size_t j = 0; j < b; ++j) {
          const double* z = feat_s.data() + order[begin + j] * flat_dim;
          dense_head_forward(p, z, flat_dim, act, pr);
          std::copy(act.begin(), act.end(), act_s.begin() + j * dense_dim);
          for (int t = 0; t < n_tasks; ++t) preds[j * n_tasks + t] = pr[t];
        }
      }

      double reg_loss = 0.0;
      std::vector<double> grad_pred(b * static_cast<std::size_t>(n_tasks));
      for (int t = 0; t < n_tasks; ++t) {
        double acc = 0.0;
        for (std::size_t j = 0; j < b; ++j) {
          const double d = preds[j * n_tasks + t] - source.target(t, order[begin + j]);
          acc += d * d;
          grad_pred[j * n_tasks + t] = 2.0 * d / static_cast<double>(b);
        }
        reg_loss += acc / static_cast<double>(b);
      }

      // target minibatch forward (needed only when the CORAL term is active)
      const double warm =
          warmup_steps == 0 ? 1.0
                            : std::min(1.0, static_cast<double>(step + 1) /
                                                static_cast<double>(warmup_steps));
      const double lambda_eff = coral_cfg.lambda * warm;

      double coral_value = 0.0;
      std::vector<double> act_t;
      std::vector<std::size_t> t_rows;
      CoralGrad coral;
      if (lambda_eff > 0.0) {
        t_rows.resize(m);
        for (std::size_t j = 0; j < m; ++j) t_rows[j] = target_rng.next_below(target.count);
        act_t.resize(m * static_cast<std::size_t>(dense_dim));
        std::vector<double> act;
        std::vector<double> pr;
        for (std::size_t j = 0; j < m; ++j) {
          const double* z = feat_t.data() + t_rows[j] * flat_dim;
          dense_head_forward(p, z, flat_dim, act, pr);
          std::copy(act.begin(), act.end(), act_t.begin() + j * dense_dim);
        }
        if (align_dense) {
          coral = coral_loss_grad(act_s, b, act_t, m, coral_dim);
        } else {
          // flatten features are frozen constants; the loss is reported but
          // cannot move any trainable parameter
          std::vector<double> fs(b * static_cast<std::size_t>(flat_dim));
          for (std::size_t j = 0; j < b; ++j) {
            std::copy(feat_s.data() + order[begin + j] * flat_dim,
                      feat_s.data() + (order[begin + j] + 1) * flat_dim,
                      fs.begin() + j * flat_dim);
          }
          std::vector<double> ft(m * static_cast<std::size_t>(flat_dim));
          for (std::size_t j = 0; j < m; ++j) {
            std::copy(feat_t.data() + t_rows[j] * flat_dim,
                      feat_t.data() + (t_rows[j] + 1) * flat_dim,
                      ft.begin() + j * flat_dim);
          }
          coral.loss = coral_loss(covariance(fs, b, flat_dim), covariance(ft, m, flat_dim),
                                  flat_dim);
        }
        coral_value = coral.loss;
      }

      const double total_loss = edge_loss(reg_loss, coral_value, lambda_eff);
      if (!std::isfinite(total_loss)) {
        result.params = last_good;
        result.diverged = true;
        return result;
      }
      epoch_reg += reg_loss;
      epoch_coral += coral_value;
      ++n_batches;
      ++step;

      // backward
      std::fill(gw_dense.begin(), gw_dense.end(), 0.0);
      std::fill(gb_dense.begin(), gb_dense.end(), 0.0);
      for (int t = 0; t < n_tasks; ++t) {
        std::fill(gw_heads[t].begin(), gw_heads[t].end(), 0.0);
        gb_heads[t] = 0.0;
      }

      std::vector<double> grad_act(dense_dim);
      for (std::size_t j = 0; j < b; ++j) {
        const double* act = act_s.data() + j * dense_dim;
        std::fill(grad_act.begin(), grad_act.end(), 0.0);
        for (int t = 0; t < n_tasks; ++t) {
          const double g = grad_pred[j * n_tasks + t];
          const double* hw = p.heads[t].weights.data();
          double* gw = gw_heads[t].data();
          for (int i = 0; i < dense_dim; ++i) {
            gw[i] += g * act[i];
            grad_act[i] += g * hw[i];
          }
          gb_heads[t] += g;
        }
        if (align_dense && lambda_eff > 0.0) {
          const double* cg = coral.grad_source.data() + j * dense_dim;
          for (int i = 0; i < dense_dim; ++i) grad_act[i] += lambda_eff * cg[i];
        }
        const double* z = feat_s.data() + order[begin + j] * flat_dim;
        for (int o = 0; o < dense_dim; ++o) {
          if (act[o] <= 0.0) continue;
          const double go = grad_act[o];
          gb_dense[o] += go;
          double* gw_row = gw_dense.data() + static_cast<std::size_t>(o) * flat_dim;
          for (int i = 0; i < flat_dim; ++i) gw_row[i] += go * z[i];
        }
      }
      if (align_dense && lambda_eff > 0.0) {
        for (std::size_t j = 0; j < m; ++j) {
          const double* act = act_t.data() + j * dense_dim;
          const double* cg = coral.grad_target.data() + j * dense_dim;
          const double* z = feat_t.data() + t_rows[j] * flat_dim;
          for (int o = 0; o < dense_dim; ++o) {
            if (act[o] <= 0.0) continue;
            const double go = lambda_eff * cg[o];
            gb_dense[o] += go;
            double* gw_row = gw_dense.data() + static_cast<std::size_t>(o) * flat_dim;
            for (int i = 0; i < flat_dim; ++i) gw_row[i] += go * z[i];
          }
        }
      }

      bool ok = adam_update(p.shared_dense.weights, gw_dense, st_dw, adam_cfg) &&
                adam_update(p.shared_dense.bias, gb_dense, st_db, adam_cfg);
      for (int t = 0; ok && t < n_tasks; ++t) {
        ok = adam_update(p.heads[t].weights, gw_heads[t], st_hw[t], adam_cfg) &&
             adam_update(p.heads[t].bias, {gb_heads[t]}, st_hb[t], adam_cfg);
      }
      if (!ok) {
        result.params = last_good;
        result.diverged = true;
        return result;
      }
    }

    if (n_batches == 0) break;  // not enough source rows for a covariance
    result.epoch_regression_loss.push_back(epoch_reg / static_cast<double>(n_batches));
    result.epoch_coral_loss.push_back(epoch_coral / static_cast<double>(n_batches));
    last_good = p;
  }
  return result;
}

double coral_probe(const ModelParams& params, const WindowBatch& source,
                   const TargetWindows& target, CoralConfig::AlignLayer layer,
                   std::size_t max_windows) {
  const std::size_t n_s = std::min(source.count, max_windows);
  const std::size_t n_t = std::min(target.count, max_windows);
  if (n_s < 2 || n_t < 2) throw std::invalid_argument("coral_probe: need >= 2 windows");
  const bool dense = layer == CoralConfig::AlignLayer::SharedDense;
  const int dim = dense ? params.arch.dense_width : flatten_size(params.arch);
  const std::vector<double> fs =
      dense ? dense_features(params, source.inputs.data(), n_s)
            : flatten_features(params, source.inputs.data(), n_s);
  const std::vector<double> ft =
      dense ? dense_features(params, target.inputs.data(), n_t)
            : flatten_features(params, target.inputs.data(), n_t);
  return coral_loss(covariance(fs, n_s, dim), covariance(ft, n_t, dim), dim);
}

namespace {

void copy_layer_prefix(ModelParams& dst, const ModelParams& src, int n_layers) {
  const int n_conv = src.n_conv();
  for (int i = 0; i < std::min(n_layers, n_conv); ++i) dst.conv[i] = src.conv[i];
  if (n_layers > n_conv) dst.shared_dense = src.shared_dense;
  if (n_layers > n_conv + 1) dst.heads = src.heads;
}

}  // namespace

std::string TransferGridResult::to_csv() const {
  std::string out = "layers_transferred,mode,mae,sae,f1\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%d,%s,%.6f,%.6f,%.6f\n", r.layers_transferred,
                  r.fine_tuned ? "fine_tuned" : "fixed", r.mae, r.sae, r.f1);
    out += line;
  }
  return out;
}

TransferGridResult transfer_grid(const ModelParams& source_model,
                                 const WindowBatch& target_train,
                                 const WindowBatch& target_eval, const GridConfig& cfg) {
  const int total_layers = source_model.arch.n_layers();
  TransferGridResult result;

  for (int n = 1; n <= total_layers; ++n) {
    for (const bool fine_tuned : {false, true}) {
      const std::uint64_t row_seed =
          Rng(cfg.init_seed).stream("grid", static_cast<std::uint64_t>(n * 2 + fine_tuned))
              .next_u64();
      ModelParams candidate = build_from_arch(source_model.arch, row_seed);
      copy_layer_prefix(candidate, source_model, n);
      for (int l = 0; l < total_layers; ++l) {
        candidate.freeze_mask[l] = (!fine_tuned && l < n) ? 1 : 0;
      }

      TrainResult trained = train(candidate, target_train, cfg.retrain);

      const std::vector<double> preds = predict(trained.params, target_eval);
      const int n_tasks = target_eval.n_tasks;
      std::vector<double> pred_watts(preds.size());
      std::vector<double> truth_watts(preds.size());
      for (int t = 0; t < n_tasks; ++t) {
        const NormStats& stats = target_eval.target_stats[t];
        for (std::size_t i = 0; i < target_eval.count; ++i) {
          pred_watts[t * target_eval.count + i] = preds[i * n_tasks + t] * stats.std + stats.mean;
          truth_watts[t * target_eval.count + i] =
              target_eval.target(t, i) * stats.std + stats.mean;
        }
      }
      const MetricsReport report = evaluate_metrics(pred_watts, truth_watts, n_tasks, {},
                                                    cfg.on_threshold_watts);
      TransferRow row;
      row.layers_transferred = n;
      row.fine_tuned = fine_tuned;
      double sae_acc = 0.0;
      double f1_acc = 0.0;
      int sae_n = 0;
      for (const auto& a : report.appliances) {
        if (a.sae) {
          sae_acc += *a.sae;
          ++sae_n;
        }
        f1_acc += a.f1.f1;
      }
      row.mae = report.mean_mae();
      row.sae = sae_n > 0 ? sae_acc / sae_n : 0.0;
      row.f1 = f1_acc / static_cast<double>(report.appliances.size());
      row.final_train_loss = trained.epoch_loss.empty() ? 0.0 : trained.epoch_loss.back();
      result.rows.push_back(row);
    }
  }
  return result;
}

}  // namespace nilmbench
