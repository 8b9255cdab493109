#include "qcs/augment.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "qcs/error.hpp"

namespace qcs {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void AugmentOp::validate() const {
  const bool ok = [&] {
    switch (kind) {
      case AugmentKind::TimeShift: return magnitude > -0.25 && magnitude < 0.25;
      case AugmentKind::AddNoise: return magnitude >= 20.0 && magnitude <= 40.0;
      case AugmentKind::Gain: return magnitude >= -6.0 && magnitude <= 6.0;
    }
    return false;
  }();
  if (!ok) fail(ErrorKind::MagnitudeOutOfRange, "magnitude " + std::to_string(magnitude));
}

AudioClip apply_augment(const AudioClip& clip, const AugmentOp& op, std::uint64_t seed) {
  op.validate();
  AudioClip out = clip;
  const Eigen::Index n = clip.samples.size();
  if (n == 0) return out;

  switch (op.kind) {
    case AugmentKind::TimeShift: {
      Eigen::Index shift = static_cast<Eigen::Index>(std::llround(op.magnitude * static_cast<double>(n))) % n;
      if (shift < 0) shift += n;
      if (shift != 0) {
        out.samples.tail(n - shift) = clip.samples.head(n - shift);
        out.samples.head(shift) = clip.samples.tail(shift);
      }
      break;
    }
    case AugmentKind::AddNoise: {
      const double signal_power = clip.samples.squaredNorm() / static_cast<double>(n);
      if (signal_power <= 0.0) break;
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> gauss(0.0, 1.0);
      Eigen::VectorXd noise(n);
      for (Eigen::Index i = 0; i < n; ++i) noise[i] = gauss(rng);
      const double noise_power = noise.squaredNorm() / static_cast<double>(n);
      noise *= std::sqrt(signal_power / std::pow(10.0, op.magnitude / 10.0) / noise_power);
      out.samples = (clip.samples + noise).cwiseMax(-1.0).cwiseMin(1.0);
      break;
    }
    case AugmentKind::Gain:
      out.samples = (clip.samples * std::pow(10.0, op.magnitude / 20.0)).cwiseMax(-1.0).cwiseMin(1.0);
      break;
  }
  return out;
}

BalancePlan compute_balance_plan(const std::map<std::string, int>& class_counts, int target,
                                 const std::map<std::string, int>& overrides) {
  require(!class_counts.empty(), "no classes to balance");
  int largest = 0;
  for (const auto& [label, count] : class_counts) {
    if (count < 1) fail(ErrorKind::EmptyClass, label);
    largest = std::max(largest, count);
  }
  require(target >= largest, "balance target below the largest class count");

  BalancePlan plan;
  for (const auto& [label, count] : class_counts) {
    int multiplier = std::max(1, static_cast<int>(std::lround(static_cast<double>(target) / count)));
    if (const auto it = overrides.find(label); it != overrides.end()) {
      require(it->second >= 1, "override multiplier must be at least 1");
      multiplier = it->second;
    }
    plan[label] = ClassBalance{count, multiplier, count * multiplier};
  }
  for (const auto& [label, _] : overrides)
    require(class_counts.contains(label), "override for unknown class " + label);
  return plan;
}

AugmentOp variant_op(std::uint64_t seed, const std::string& source_id, int variant) {
  require(variant >= 1, "variant index starts at 1");
  std::mt19937_64 rng(mix_seed(seed ^ fnv1a(source_id), static_cast<std::uint64_t>(variant)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AugmentOp op;
  switch ((variant - 1) % 3) {
    case 0: {
      // Shifts of at least 2% so every variant differs from its source.
      const double m = 0.02 + 0.18 * unit(rng);
      op = {AugmentKind::TimeShift, unit(rng) < 0.5 ? -m : m};
      break;
    }
    case 1:
      op = {AugmentKind::AddNoise, 20.0 + 20.0 * unit(rng)};
      break;
    default:
      // Log-power images are relative to their maximum, so only gains that clip are visible.
      op = {AugmentKind::Gain, 1.0 + 5.0 * unit(rng)};
      break;
  }
  return op;
}

std::vector<LabeledImage> expand_sample(const LabeledClip& sample, int multiplier, std::uint64_t seed,
                                        const FeatureConfig& features, const SpectroImage* original) {
  require(multiplier >= 1, "multiplier must be at least 1");
  std::vector<LabeledImage> out;
  out.reserve(static_cast<std::size_t>(multiplier));
  out.push_back({sample.source_id, original ? *original : clip_to_image(sample.clip, features), sample.label, 0});
  for (int v = 1; v < multiplier; ++v) {
    const AugmentOp op = variant_op(seed, sample.source_id, v);
    const std::uint64_t noise_seed = mix_seed(seed ^ fnv1a(sample.source_id), 0x5EED0000ULL + v);
    out.push_back({sample.source_id, clip_to_image(apply_augment(sample.clip, op, noise_seed), features),
                   sample.label, v});
  }
  return out;
}

std::vector<LabeledImage> expand_training_set(std::span<const LabeledClip> samples, const BalancePlan& plan,
                                              std::uint64_t seed, const FeatureConfig& features) {
  std::map<std::string, int> seen;
  for (const auto& s : samples) {
    const std::string key(to_string(s.label));
    if (!plan.contains(key)) fail(ErrorKind::PlanMismatch, "plan has no entry for class " + key);
    ++seen[key];
  }
  for (const auto& [key, count] : seen)
    if (plan.at(key).original_count != count)
      fail(ErrorKind::PlanMismatch, "class " + key + " has " + std::to_string(count) + " samples, plan expects " +
                                        std::to_string(plan.at(key).original_count));

  std::vector<LabeledImage> out;
  for (const auto& s : samples) {
    auto images = expand_sample(s, plan.at(std::string(to_string(s.label))).multiplier, seed, features);
    std::move(images.begin(), images.end(), std::back_inserter(out));
  }
  return out;
}

}  // namespace qcs
