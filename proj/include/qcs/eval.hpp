#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qcs/types.hpp"

namespace qcs {

struct ConfusionCounts {
  long tp = 0;
  long tn = 0;
  long fp = 0;
  long fn = 0;

  long total() const noexcept { return tp + tn + fp + fn; }
  /// Same predictions scored with the other class as positive.
  ConfusionCounts swapped() const noexcept { return {tn, tp, fn, fp}; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp, tn += o.tn, fp += o.fp, fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Throws LengthMismatch on unequal lengths; empty inputs violate the precondition.
ConfusionCounts confusion(std::span<const Label> predictions, std::span<const Label> truths, Label positive);

/// Absent value means UNDEFINED (zero denominator).
struct MetricSet {
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> sensitivity;
  std::optional<double> f1;
  std::optional<double> specificity;

  friend bool operator==(const MetricSet&, const MetricSet&) = default;
};

MetricSet metrics(const ConfusionCounts& c);

/// Support-weighted mean per metric. Classes whose value is UNDEFINED drop out and the
/// remaining weights are renormalized.
MetricSet overall(const std::map<Label, MetricSet>& per_class, const std::map<Label, long>& supports);

/// Per-class rows plus the overall row, as laid out in the results tables.
struct ClassMetrics {
  MetricSet covid;
  MetricSet healthy;
  MetricSet overall;

  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

/// `c` is scored with COVID as positive. A class with zero support is left out of the overall row.
ClassMetrics class_metrics(const ConfusionCounts& c);

/// Mean of the defined values across entries; UNDEFINED if none is defined.
MetricSet mean(std::span<const MetricSet> sets);

}  // namespace qcs
