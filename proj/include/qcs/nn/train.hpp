#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "qcs/augment.hpp"
#include "qcs/nn/adam.hpp"
#include "qcs/nn/network.hpp"
#include "qcs/nn/schedule.hpp"

namespace qcs::nn {

struct TrainingConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_size = 4;
  int max_epochs = 40;
  double plateau_factor = 5.0;
  int plateau_patience = 3;
  int early_stop_patience = 8;
  double min_delta = 1e-6;
  std::uint64_t seed = 0;

  void validate() const {
    require(learning_rate > 0, "learning_rate must be positive");
    require(0 < beta1 && beta1 < beta2 && beta2 < 1, "require 0 < beta1 < beta2 < 1");
    require(adam_epsilon > 0, "adam_epsilon must be positive");
    require(batch_size >= 1, "batch_size must be at least 1");
    require(max_epochs >= 1, "max_epochs must be at least 1");
    require(plateau_factor > 1, "plateau_factor must exceed 1");
    require(plateau_patience >= 1 && early_stop_patience >= 1, "patience must be at least 1");
  }

  ScheduleConfig schedule() const {
    return {learning_rate, plateau_factor, plateau_patience, early_stop_patience, min_delta};
  }
  AdamParams adam() const { return {beta1, beta2, adam_epsilon}; }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_accuracy = 0;
  double lr = 0;
};

/// Weights are those of `epoch_of_best`, not of the last epoch run.
template <typename Scalar>
struct TrainedModel {
  Network<Scalar> network;
  double best_validation_loss = 0;
  double best_validation_accuracy = 0;
  int epoch_of_best = 0;
  std::vector<EpochRecord> history;
};

struct TrainHooks {
  /// Replaces the measured validation loss (tests drive the scheduler with scripted losses).
  std::function<double(int epoch, double measured)> validation_loss;
  std::function<void(const EpochRecord&)> on_epoch;
};

template <typename Scalar>
std::vector<Example<Scalar>> make_examples(std::span<const LabeledImage> images) {
  std::vector<Example<Scalar>> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back({to_input<Scalar>(img.image), class_index(img.label)});
  return out;
}

/// Predicted class with ties resolved to COVID.
template <typename Scalar>
int predicted_class(const VectorX<Scalar>& logits) {
  return logits(0) >= logits(1) ? 0 : 1;
}

template <typename Scalar>
std::pair<double, double> evaluate_loss_accuracy(const Network<Scalar>& net, std::span<const Example<Scalar>> data) {
  if (data.empty()) return {0.0, 0.0};
  double loss = 0;
  int correct = 0;
  for (const auto& ex : data) {
    const VectorX<Scalar> z = net.logits(ex.input);
    loss += static_cast<double>(cross_entropy(z, ex.label));
    correct += predicted_class(z) == ex.label ? 1 : 0;
  }
  return {loss / static_cast<double>(data.size()), static_cast<double>(correct) / static_cast<double>(data.size())};
}

/// Mini-batch Adam with plateau LR schedule, early stopping and best-checkpoint restore.
/// With an empty validation set the schedule watches the training loss instead.
template <typename Scalar>
TrainedModel<Scalar> train(ArchId arch, std::span<const Example<Scalar>> train_set,
                           std::span<const Example<Scalar>> validation_set, const TrainingConfig& cfg,
                           const TrainHooks& hooks = {}, int input_size = 128) {
  cfg.validate();
  if (train_set.empty()) fail(ErrorKind::EmptyTrainingSet, std::string(to_string(arch)));

  Network<Scalar> net = Network<Scalar>::initialized(arch, cfg.seed, input_size);
  TrainedModel<Scalar> result{net, 0, 0, 0, {}};
  PlateauSchedule schedule(cfg.schedule());
  AdamState<Scalar> adam;
  TensorList<Scalar> grads = zeros_like(net.parameters());

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  long step = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = schedule.learning_rate();
    std::mt19937_64 rng(mix_seed(cfg.seed, 0x100000ULL + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double train_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      train_loss += static_cast<double>(net.loss_and_gradients(train_set, batch, grads)) * static_cast<double>(batch.size());
      adam_step(net.parameters(), grads, adam, cfg.adam(), lr, ++step);
    }
    train_loss /= static_cast<double>(order.size());

    auto [val_loss, val_acc] = validation_set.empty() ? std::pair{train_loss, 0.0}
                                                      : evaluate_loss_accuracy(net, validation_set);
    if (hooks.validation_loss) val_loss = hooks.validation_loss(epoch, val_loss);

    const EpochRecord record{epoch, train_loss, val_loss, val_acc, lr};
    result.history.push_back(record);
    if (hooks.on_epoch) hooks.on_epoch(record);

    const EpochDecision decision = schedule.observe(val_loss);
    if (decision.improved) {
      result.network = net;
      result.best_validation_loss = val_loss;
      result.best_validation_accuracy = val_acc;
      result.epoch_of_best = epoch;
    }
    if (decision.stop) break;
  }
  if (result.epoch_of_best == 0) {
    // Validation loss never finite: keep the final weights.
    result.network = net;
    result.epoch_of_best = static_cast<int>(result.history.size());
    result.best_validation_loss = result.history.back().val_loss;
    result.best_validation_accuracy = result.history.back().val_accuracy;
  }
  return result;
}

}  // namespace qcs::nn
