#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qcs/bundle.hpp"
#include "qcs/corpus.hpp"
#include "qcs/eval.hpp"
#include "qcs/nn/train.hpp"

namespace qcs {

/// A (pipeline, sound) training problem.
///
/// The asymptomatic pipeline separates COVID (any symptom status) from asymptomatic HEALTHY;
/// the symptomatic pipeline separates symptomatic COVID from symptomatic HEALTHY.
enum class Task { AsymptomaticCough, SymptomaticBreath, AsymptomaticBreath, SymptomaticCough };

std::string_view pipeline_name(Task t) noexcept;
SoundKind sound_of(Task t) noexcept;
/// Class of `r` within task `t`, or nullopt if the subject is outside it.
std::optional<Label> task_label(Task t, const SubjectRecord& r) noexcept;

struct ReportRow {
  std::string model;     // architecture name or "ensemble"
  ConfusionCounts counts;  // COVID positive
  ClassMetrics metrics;
};

/// 3 network rows and 1 ensemble row.
struct ReportBlock {
  std::string pipeline;
  std::string sound;
  std::vector<ReportRow> rows;
};

struct ModelSummary {
  std::string pipeline;
  std::string sound;
  std::string arch;
  int train_images = 0;
  int validation_images = 0;
  int epochs_run = 0;
  int epoch_of_best = 0;
  double validation_accuracy = 0;
  double validation_loss = 0;
};

struct FoldReport {
  int fold = 0;
  int test_subjects = 0;
  std::vector<ModelSummary> models;
  std::vector<ReportBlock> blocks;
  /// Full cascade over every test subject.
  ReportRow screening;
  std::map<std::string, int> pipeline_counts;
};

struct CvReport {
  int folds = 0;
  std::uint64_t seed = 0;
  std::vector<FoldReport> per_fold;
  /// Per-row metrics averaged over folds; counts summed.
  std::vector<ReportBlock> mean_blocks;
  ReportRow mean_screening;
};

/// Stable key order; byte-identical for identical inputs.
std::string to_json(const CvReport& report);
/// Human-readable tables, one per (pipeline, sound) block.
std::string render_text(const CvReport& report);

using LogFn = std::function<void(const std::string&)>;

struct CvOptions {
  int folds = 5;
  double validation_fraction = 0.10;
  /// Root of every split, augmentation and initialization seed.
  std::uint64_t seed = 1;
  nn::TrainingConfig training;
  FeatureConfig features;
  /// Per-task balance target; defaults to the larger class count of the training split.
  std::optional<int> balance_target;
  /// Pins the multiplier per label name ("covid", "healthy").
  std::map<std::string, int> balance_overrides;
  /// Also train breath models for the asymptomatic pipeline and cough models for the symptomatic one.
  bool extended_blocks = false;
  /// 0 = one worker per hardware thread. Results do not depend on this.
  int threads = 0;
  LogFn log;
};

CvReport run_cv(const Dataset& dataset, const CvOptions& options);

struct BundleOptions {
  double validation_fraction = 0.10;
  std::uint64_t seed = 1;
  nn::TrainingConfig training;
  FeatureConfig features;
  std::optional<int> balance_target;
  std::map<std::string, int> balance_overrides;
  int threads = 0;
  LogFn log;
};

/// Trains the six serving models on the whole dataset minus a stratified validation holdout.
StoredBundle train_bundle(const Dataset& dataset, const BundleOptions& options);

/// Scores a trained bundle on every subject of `dataset` (one pseudo-fold).
CvReport evaluate_bundle(const StoredBundle& bundle, const Dataset& dataset, int threads = 0);

/// Per stratum: sorted, shuffled with `seed`, first round(fraction * n) ids go to validation.
/// Returns {train_ids, validation_ids}.
std::pair<std::vector<std::string>, std::vector<std::string>> stratified_holdout(const Dataset& dataset,
                                                                                 double fraction,
                                                                                 std::uint64_t seed);

}  // namespace qcs
