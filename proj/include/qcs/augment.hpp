#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qcs/audio.hpp"
#include "qcs/spectrogram.hpp"
#include "qcs/types.hpp"

namespace qcs {

enum class AugmentKind { TimeShift, AddNoise, Gain };

/// Magnitude units: TimeShift = fraction of length in (-0.25, 0.25); AddNoise = SNR dB in
/// [20, 40]; Gain = dB in [-6, 6].
struct AugmentOp {
  AugmentKind kind = AugmentKind::TimeShift;
  double magnitude = 0.0;

  void validate() const;
};

AudioClip apply_augment(const AudioClip& clip, const AugmentOp& op, std::uint64_t seed);

struct ClassBalance {
  int original_count = 0;
  int multiplier = 1;
  int target_count = 0;

  friend bool operator==(const ClassBalance&, const ClassBalance&) = default;
};

using BalancePlan = std::map<std::string, ClassBalance>;

/// multiplier = max(1, round(target / count)) unless `overrides` pins it for a class.
BalancePlan compute_balance_plan(const std::map<std::string, int>& class_counts, int target,
                                 const std::map<std::string, int>& overrides = {});

struct LabeledClip {
  std::string source_id;
  AudioClip clip;
  Label label = Label::Healthy;
};

struct LabeledImage {
  std::string source_id;
  SpectroImage image;
  Label label = Label::Healthy;
  int variant = 0;  // 0 is the unaugmented original
};

/// Operator for the v-th augmented variant (v >= 1) of `source_id`: kinds round-robin over
/// TimeShift, AddNoise, Gain; magnitudes drawn from a generator seeded by (seed, source_id, v).
AugmentOp variant_op(std::uint64_t seed, const std::string& source_id, int variant);

/// The original plus (multiplier - 1) augmented variants of one standardized clip.
/// `original` may carry a precomputed image of the unaugmented clip.
std::vector<LabeledImage> expand_sample(const LabeledClip& sample, int multiplier, std::uint64_t seed,
                                        const FeatureConfig& features, const SpectroImage* original = nullptr);

/// Balanced training images; plan keys are `to_string(label)`. Throws PlanMismatch when a label
/// is absent from the plan or counts disagree with the plan.
std::vector<LabeledImage> expand_training_set(std::span<const LabeledClip> samples, const BalancePlan& plan,
                                              std::uint64_t seed, const FeatureConfig& features = {});

}  // namespace qcs
