#pragma once

// Deterministic minibatch training for the MLP and GRU models.

#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "csilab/common.hpp"
#include "csilab/gru.hpp"
#include "csilab/mlp.hpp"
#include "csilab/rng.hpp"

namespace csilab {

enum class Optimizer { kSgd, kAdam };

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 50;
  Optimizer optimizer = Optimizer::kAdam;
  std::uint64_t seed = 0;
  int patience = 0;  // early stop on validation loss after this many stale epochs; 0 disables
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct TrainResult {
  std::vector<double> loss_trace;  // mean training loss per epoch
  std::vector<double> val_trace;   // validation loss per epoch, empty without a held-out set
  int best_epoch = -1;
};

namespace detail {

inline void validate_train_config(const TrainConfig& cfg) {
  if (cfg.learning_rate < 0.0) throw std::invalid_argument("train: negative learning rate");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  if (cfg.epochs < 0) throw std::invalid_argument("train: negative epochs");
}

// Shared driver: shuffles indices per epoch with a derived seed, steps the
// optimizer on flattened parameters, and restores the best validation
// checkpoint when early stopping is active.
inline TrainResult minibatch_fit(
    VecR& params, std::size_t n, const TrainConfig& cfg,
    const std::function<double(const std::vector<std::size_t>&, VecR&)>& batch_grad,
    const std::function<double()>& val_loss) {
  validate_train_config(cfg);
  if (n == 0) throw std::invalid_argument("train: empty dataset");

  TrainResult res;
  VecR adam_m = VecR::Zero(params.size());
  VecR adam_v = VecR::Zero(params.size());
  long adam_t = 0;
  VecR best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int stale = 0;
  const bool track_best = static_cast<bool>(val_loss);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> batch;
  VecR grad(params.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, 0x65706f ^ static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      batch.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                   order.begin() + static_cast<std::ptrdiff_t>(stop));
      grad.setZero();
      const double loss = batch_grad(batch, grad);
      if (!std::isfinite(loss) || loss > 1e6) {
        res.loss_trace.push_back(loss);
        throw TrainingDivergedError("training diverged", res.loss_trace);
      }
      epoch_loss += loss;
      ++batches;

      if (cfg.optimizer == Optimizer::kSgd) {
        params -= cfg.learning_rate * grad;
      } else {
        ++adam_t;
        adam_m = cfg.adam_beta1 * adam_m + (1.0 - cfg.adam_beta1) * grad;
        adam_v = cfg.adam_beta2 * adam_v.array() + (1.0 - cfg.adam_beta2) * grad.array().square();
        const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam_t));
        const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam_t));
        params.array() -= cfg.learning_rate * (adam_m.array() / bc1) /
                          ((adam_v.array() / bc2).sqrt() + cfg.adam_eps);
      }
    }
    res.loss_trace.push_back(epoch_loss / static_cast<double>(batches));

    if (track_best) {
      const double vl = val_loss();
      if (!std::isfinite(vl) || vl > 1e6)
        throw TrainingDivergedError("validation loss diverged", res.loss_trace);
      res.val_trace.push_back(vl);
      if (vl < best_val) {
        best_val = vl;
        best_params = params;
        res.best_epoch = epoch;
        stale = 0;
      } else {
        ++stale;
      }
      if (cfg.patience > 0 && stale >= cfg.patience) break;
    }
  }
  if (track_best && res.best_epoch >= 0) params = best_params;
  return res;
}

}  // namespace detail

// Classification trainer; pass a held-out set to enable early stopping.
inline TrainResult train_mlp(MlpModel& model, const MatR& x, const std::vector<int>& labels,
                             const TrainConfig& cfg, const MatR* x_val = nullptr,
                             const std::vector<int>* labels_val = nullptr) {
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw std::invalid_argument("train_mlp: label count mismatch");
  VecR params = mlp_pack(model);
  const auto batch_grad = [&](const std::vector<std::size_t>& idx, VecR& grad) {
    mlp_unpack(model, params);
    MatR bx(static_cast<Eigen::Index>(idx.size()), x.cols());
    std::vector<int> by(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      bx.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
      by[i] = labels[idx[i]];
    }
    const MlpGradients g = mlp_gradients(model, bx, by);
    grad = mlp_pack_gradients(model, g);
    return g.loss;
  };
  std::function<double()> val;
  if (x_val != nullptr && labels_val != nullptr)
    val = [&]() {
      mlp_unpack(model, params);
      return mlp_loss(model, *x_val, *labels_val);
    };
  TrainResult res =
      detail::minibatch_fit(params, static_cast<std::size_t>(x.rows()), cfg, batch_grad, val);
  mlp_unpack(model, params);
  return res;
}

// Spectrum-regression trainer (raw targets against the pre-head output).
inline TrainResult train_mlp(MlpModel& model, const MatR& x, const MatR& targets,
                             const TrainConfig& cfg, const MatR* x_val = nullptr,
                             const MatR* targets_val = nullptr) {
  if (targets.rows() != x.rows()) throw std::invalid_argument("train_mlp: target count mismatch");
  VecR params = mlp_pack(model);
  const auto batch_grad = [&](const std::vector<std::size_t>& idx, VecR& grad) {
    mlp_unpack(model, params);
    MatR bx(static_cast<Eigen::Index>(idx.size()), x.cols());
    MatR by(static_cast<Eigen::Index>(idx.size()), targets.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      bx.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
      by.row(static_cast<Eigen::Index>(i)) = targets.row(static_cast<Eigen::Index>(idx[i]));
    }
    const MlpGradients g = mlp_gradients(model, bx, by);
    grad = mlp_pack_gradients(model, g);
    return g.loss;
  };
  std::function<double()> val;
  if (x_val != nullptr && targets_val != nullptr)
    val = [&]() {
      mlp_unpack(model, params);
      return mlp_loss(model, *x_val, *targets_val);
    };
  TrainResult res =
      detail::minibatch_fit(params, static_cast<std::size_t>(x.rows()), cfg, batch_grad, val);
  mlp_unpack(model, params);
  return res;
}

inline TrainResult train_gru(GruSeq2Seq& model, const std::vector<GruRecord>& records,
                             const TrainConfig& cfg,
                             const std::vector<GruRecord>* val_records = nullptr) {
  VecR params = gru_pack(model);
  std::vector<GruRecord> batch;
  const auto batch_grad = [&](const std::vector<std::size_t>& idx, VecR& grad) {
    gru_unpack(model, params);
    batch.clear();
    for (std::size_t i : idx) batch.push_back(records[i]);
    const GruGradients g = gru_gradients(model, batch);
    grad = gru_pack_gradients(model, g);
    return g.loss;
  };
  std::function<double()> val;
  if (val_records != nullptr)
    val = [&]() {
      gru_unpack(model, params);
      return gru_loss(model, *val_records);
    };
  TrainResult res = detail::minibatch_fit(params, records.size(), cfg, batch_grad, val);
  gru_unpack(model, params);
  return res;
}

}  // namespace csilab
