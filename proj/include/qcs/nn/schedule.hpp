#pragma once

#include <limits>

namespace qcs::nn {

struct ScheduleConfig {
  double initial_lr = 1e-4;
  double plateau_factor = 5.0;   // lr is divided by this
  int plateau_patience = 3;
  int early_stop_patience = 8;
  double min_delta = 1e-6;       // improvement means loss < best - min_delta
};

struct EpochDecision {
  bool improved = false;
  bool lr_dropped = false;
  bool stop = false;
};

/// Reduce-on-plateau learning rate plus early stopping, both keyed on validation loss.
/// The two patience counters run independently and both reset on improvement; the
/// plateau counter also resets after each drop.
class PlateauSchedule {
 public:
  explicit PlateauSchedule(const ScheduleConfig& cfg) : cfg_(cfg), lr_(cfg.initial_lr) {}

  EpochDecision observe(double validation_loss) {
    ++epoch_;
    EpochDecision d;
    if (validation_loss < best_ - cfg_.min_delta) {
      best_ = validation_loss;
      best_epoch_ = epoch_;
      plateau_count_ = 0;
      stall_count_ = 0;
      d.improved = true;
      return d;
    }
    ++plateau_count_;
    ++stall_count_;
    if (plateau_count_ >= cfg_.plateau_patience) {
      lr_ /= cfg_.plateau_factor;
      plateau_count_ = 0;
      d.lr_dropped = true;
    }
    d.stop = stall_count_ >= cfg_.early_stop_patience;
    return d;
  }

  double learning_rate() const noexcept { return lr_; }
  double best_loss() const noexcept { return best_; }
  int best_epoch() const noexcept { return best_epoch_; }
  int epoch() const noexcept { return epoch_; }

 private:
  ScheduleConfig cfg_;
  double lr_;
  double best_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int epoch_ = 0;
  int plateau_count_ = 0;
  int stall_count_ = 0;
};

}  // namespace qcs::nn
