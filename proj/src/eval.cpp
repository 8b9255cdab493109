#include "qcs/eval.hpp"

#include "qcs/error.hpp"

namespace qcs {

namespace {

std::optional<double> ratio(long num, long den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

using Field = std::optional<double> MetricSet::*;
constexpr Field kFields[] = {&MetricSet::accuracy, &MetricSet::precision, &MetricSet::sensitivity,
                             &MetricSet::f1, &MetricSet::specificity};

}  // namespace

ConfusionCounts confusion(std::span<const Label> predictions, std::span<const Label> truths, Label positive) {
  if (predictions.size() != truths.size())
    fail(ErrorKind::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                        std::to_string(truths.size()) + " truths");
  require(!predictions.empty(), "confusion needs at least one sample");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred_pos = predictions[i] == positive;
    const bool true_pos = truths[i] == positive;
    if (pred_pos && true_pos) ++c.tp;
    else if (!pred_pos && !true_pos) ++c.tn;
    else if (pred_pos) ++c.fp;
    else ++c.fn;
  }
  return c;
}

MetricSet metrics(const ConfusionCounts& c) {
  require(c.tp >= 0 && c.tn >= 0 && c.fp >= 0 && c.fn >= 0, "counts must be nonnegative");
  require(c.total() > 0, "metrics need at least one sample");
  MetricSet m;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.sensitivity = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  if (m.precision && m.sensitivity && *m.precision + *m.sensitivity > 0)
    m.f1 = 2.0 * *m.precision * *m.sensitivity / (*m.precision + *m.sensitivity);
  return m;
}

MetricSet overall(const std::map<Label, MetricSet>& per_class, const std::map<Label, long>& supports) {
  require(!per_class.empty(), "overall needs at least one class");
  MetricSet out;
  for (Field field : kFields) {
    double weighted = 0.0, weight = 0.0;
    for (const auto& [label, set] : per_class) {
      const auto it = supports.find(label);
      require(it != supports.end() && it->second > 0, "supports must be positive for every class");
      if (!(set.*field)) continue;
      weighted += static_cast<double>(it->second) * *(set.*field);
      weight += static_cast<double>(it->second);
    }
    if (weight > 0) out.*field = weighted / weight;
  }
  return out;
}

ClassMetrics class_metrics(const ConfusionCounts& c) {
  ClassMetrics out{metrics(c), metrics(c.swapped()), {}};
  std::map<Label, MetricSet> per_class;
  std::map<Label, long> supports;
  if (const long n = c.tp + c.fn; n > 0) per_class[Label::Covid] = out.covid, supports[Label::Covid] = n;
  if (const long n = c.tn + c.fp; n > 0) per_class[Label::Healthy] = out.healthy, supports[Label::Healthy] = n;
  out.overall = overall(per_class, supports);
  return out;
}

MetricSet mean(std::span<const MetricSet> sets) {
  MetricSet out;
  for (Field field : kFields) {
    double sum = 0.0;
    int n = 0;
    for (const auto& s : sets) {
      if (!(s.*field)) continue;
      sum += *(s.*field);
      ++n;
    }
    if (n > 0) out.*field = sum / n;
  }
  return out;
}

}  // namespace qcs
