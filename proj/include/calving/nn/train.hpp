#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "calving/nn/network.hpp"

namespace calving::nn {

struct TrainConfig {
  double learning_rate = 0.005;
  int batch_size = 20;
  double lr_decay_factor = 5.0;
  int patience_decay = 2;  // consecutive val-loss increases before an LR decay
  int patience_stop = 2;   // consecutive increases shortly after a decay stop training
  int max_epochs = 30;     // unstated upstream; exposed here, documented in README
  uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0)) throw ContractViolation("learning_rate must be > 0");
    if (batch_size < 1) throw ContractViolation("batch_size must be >= 1");
    if (!(lr_decay_factor > 1)) throw ContractViolation("lr_decay_factor must be > 1");
    if (patience_decay < 1 || patience_stop < 1)
      throw ContractViolation("patience values must be >= 1");
    if (max_epochs < 1) throw ContractViolation("max_epochs must be >= 1");
  }
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;         // rate in effect during this epoch's updates
  bool lr_decayed = false; // decay was triggered after this epoch's validation
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::string stop_reason;  // "max_epochs" | "early_stop" | "diverged"
  int best_epoch = -1;      // 1-based epoch of the lowest validation loss
  double best_val_loss = std::numeric_limits<double>::infinity();
};

struct TrainDiverged : std::runtime_error {
  explicit TrainDiverged(std::string what, TrainHistory h)
      : std::runtime_error(std::move(what)), history(std::move(h)) {}
  TrainHistory history;
};

// Model concept used by train() and finite_difference_check():
//   double loss_and_grad(std::span<const int> idx, std::vector<double>* grad);
//     mean loss over the given sample indices; when grad != nullptr it is
//     resized and filled with d(loss)/d(params) (flat layout).
//   std::vector<double> get_params() const;
//   void set_params(std::span<const double>);

// Plain network over a fixed dataset of (input, label) pairs.
struct NetModel {
  Network net;
  const std::vector<Tensor>* inputs = nullptr;
  const std::vector<int>* labels = nullptr;

  double loss_and_grad(std::span<const int> idx, std::vector<double>* grad) {
    if (idx.empty()) throw ContractViolation("loss_and_grad: empty batch");
    ParamSet g;
    if (grad) g = zero_like(net);
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(idx.size());
    ForwardTrace trace;
    for (int i : idx) {
      const Tensor& x = (*inputs)[static_cast<size_t>(i)];
      const int y = (*labels)[static_cast<size_t>(i)];
      if (grad) {
        Tensor p = forward(net, x, &trace);
        loss += cross_entropy(p, y) * inv;
        backward(net, trace, cross_entropy_grad(p, y, inv), g);
      } else {
        loss += cross_entropy(forward(net, x), y) * inv;
      }
    }
    if (grad) {
      grad->clear();
      grad->reserve(net.param_count());
      for (const auto& lp : g) {
        grad->insert(grad->end(), lp.w.begin(), lp.w.end());
        grad->insert(grad->end(), lp.b.begin(), lp.b.end());
      }
    }
    return loss;
  }

  std::vector<double> get_params() const { return net.flat_params(); }
  void set_params(std::span<const double> p) { net.set_flat_params(p); }
};

namespace detail {

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace detail

// SGD with the validation-driven schedule: the learning rate is divided by
// lr_decay_factor after `patience_decay` consecutive validation-loss
// increases; training stops early when `patience_stop` consecutive increases
// fall within the patience_stop + 1 epochs following a decay. The model is
// left at the parameters of the best-validation epoch. Fully deterministic
// given cfg.seed.
template <class Model>
TrainHistory train(Model& model, std::span<const int> train_idx, std::span<const int> val_idx,
                   const TrainConfig& cfg) {
  cfg.validate();
  if (train_idx.empty() || val_idx.empty())
    throw ContractViolation("train: train and validation sets must be non-empty");
  {
    std::unordered_set<int> seen(train_idx.begin(), train_idx.end());
    for (int i : val_idx)
      if (seen.count(i))
        throw ContractViolation("train: train and validation sets overlap at index " +
                                std::to_string(i));
  }

  TrainHistory history;
  Rng rng(cfg.seed);
  double lr = cfg.learning_rate;
  double prev_val = std::numeric_limits<double>::infinity();
  int consec_increases = 0;
  int last_decay_epoch = -1;
  std::vector<double> best_params = model.get_params();
  std::vector<int> order(train_idx.begin(), train_idx.end());
  std::vector<double> grad;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double train_loss = 0.0;
    size_t seen = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t n = std::min<size_t>(cfg.batch_size, order.size() - start);
      std::span<const int> batch(order.data() + start, n);
      double batch_loss = model.loss_and_grad(batch, &grad);
      if (!std::isfinite(batch_loss) || !detail::all_finite(grad)) {
        history.stop_reason = "diverged";
        throw TrainDiverged("non-finite loss or gradient at epoch " + std::to_string(epoch),
                            history);
      }
      std::vector<double> params = model.get_params();
      for (size_t k = 0; k < params.size(); ++k) params[k] -= lr * grad[k];
      model.set_params(params);
      train_loss += batch_loss * static_cast<double>(n);
      seen += n;
    }
    train_loss /= static_cast<double>(seen);

    const double val_loss = model.loss_and_grad(val_idx, nullptr);
    if (!std::isfinite(val_loss)) {
      history.stop_reason = "diverged";
      throw TrainDiverged("non-finite validation loss at epoch " + std::to_string(epoch),
                          history);
    }

    EpochRecord rec{epoch, train_loss, val_loss, lr, false};
    if (val_loss < history.best_val_loss) {
      history.best_val_loss = val_loss;
      history.best_epoch = epoch;
      best_params = model.get_params();
    }

    if (epoch > 1 && val_loss > prev_val)
      ++consec_increases;
    else
      consec_increases = 0;
    prev_val = val_loss;

    if (consec_increases >= cfg.patience_decay) {
      if (last_decay_epoch >= 0 && epoch - last_decay_epoch <= cfg.patience_stop + 1) {
        history.epochs.push_back(rec);
        history.stop_reason = "early_stop";
        model.set_params(best_params);
        return history;
      }
      lr /= cfg.lr_decay_factor;
      last_decay_epoch = epoch;
      consec_increases = 0;
      rec.lr_decayed = true;
    }
    history.epochs.push_back(rec);
  }
  history.stop_reason = "max_epochs";
  model.set_params(best_params);
  return history;
}

// Central-difference gradient check. Returns the max over parameters of
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
template <class Model>
double finite_difference_check(Model& model, std::span<const int> idx, double epsilon) {
  if (!(epsilon > 0)) throw ContractViolation("finite_difference_check: epsilon must be > 0");
  std::vector<double> analytic;
  model.loss_and_grad(idx, &analytic);
  std::vector<double> params = model.get_params();
  double max_rel = 0.0;
  for (size_t i = 0; i < params.size(); ++i) {
    const double orig = params[i];
    params[i] = orig + epsilon;
    model.set_params(params);
    const double up = model.loss_and_grad(idx, nullptr);
    params[i] = orig - epsilon;
    model.set_params(params);
    const double down = model.loss_and_grad(idx, nullptr);
    params[i] = orig;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double rel = std::abs(analytic[i] - numeric) /
                       std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, rel);
  }
  model.set_params(params);
  return max_rel;
}

inline double finite_difference_check(const Network& net,
                                      const std::vector<std::pair<Tensor, int>>& batch,
                                      double epsilon) {
  std::vector<Tensor> inputs;
  std::vector<int> labels;
  std::vector<int> idx;
  inputs.reserve(batch.size());
  for (const auto& [x, y] : batch) {
    idx.push_back(static_cast<int>(inputs.size()));
    inputs.push_back(x);
    labels.push_back(y);
  }
  NetModel model{net, &inputs, &labels};
  return finite_difference_check(model, idx, epsilon);
}

}  // namespace calving::nn
