#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace qcs {

enum class Label : std::uint8_t { Covid = 0, Healthy = 1 };
enum class SoundKind : std::uint8_t { Cough = 0, Breath = 1 };

inline constexpr std::array<Label, 2> kLabels{Label::Covid, Label::Healthy};

std::string_view to_string(Label label) noexcept;
std::string_view to_string(SoundKind kind) noexcept;
std::optional<Label> parse_label(std::string_view text);

inline constexpr Label other(Label label) noexcept {
  return label == Label::Covid ? Label::Healthy : Label::Covid;
}

/// Class index used by every network output: 0 = COVID, 1 = HEALTHY.
inline constexpr int class_index(Label label) noexcept { return static_cast<int>(label); }
inline constexpr Label label_of(int index) noexcept {
  return index == 0 ? Label::Covid : Label::Healthy;
}

/// Two-class probability vector.
struct Probabilities {
  double covid = 0.5;
  double healthy = 0.5;

  double operator[](Label label) const noexcept { return label == Label::Covid ? covid : healthy; }
  double sum() const noexcept { return covid + healthy; }
  friend bool operator==(const Probabilities&, const Probabilities&) = default;
};

/// SplitMix64 finalizer. Derives independent stream seeds from (seed, index) pairs.
inline constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index = 0) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace qcs
