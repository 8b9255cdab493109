#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qcs/nn/network.hpp"
#include "qcs/spectrogram.hpp"
#include "qcs/types.hpp"

namespace qcs {

/// Anything that maps a spectrogram image to class probabilities.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual Probabilities predict(const SpectroImage& image) const = 0;
};

class NetworkClassifier final : public Classifier {
 public:
  explicit NetworkClassifier(nn::Network<float> net) : net_(std::move(net)) {}
  Probabilities predict(const SpectroImage& image) const override { return net_.forward(image); }
  const nn::Network<float>& network() const noexcept { return net_; }

 private:
  nn::Network<float> net_;
};

/// Six trained classifiers plus the ranking the cascade needs. Immutable once built.
///
/// Cough models separate COVID (any symptom status) from asymptomatic HEALTHY; breath models
/// separate symptomatic COVID from symptomatic HEALTHY.
struct ModelBundle {
  std::array<std::shared_ptr<const Classifier>, 3> cough_models;
  std::array<std::shared_ptr<const Classifier>, 3> breath_models;
  std::array<double, 3> cough_validation_accuracy{};
  std::array<double, 3> breath_validation_accuracy{};
  int best_cough_index = 0;

  /// Throws PreconditionViolation if any model is missing or the index is out of range.
  void validate() const;
};

/// Index of the highest score; the earliest wins ties.
int best_index(std::span<const double> scores);

struct Prediction {
  Label label = Label::Covid;
  Probabilities probabilities;
  std::vector<Probabilities> members;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

inline constexpr double kTieTolerance = 1e-9;

/// Unweighted mean of member probabilities; |p_covid - p_healthy| < 1e-9 resolves to COVID.
Prediction ensemble(std::span<const Probabilities> members);

/// Mean of the three cough models on the cough image.
Prediction classify_asymptomatic(const SpectroImage& cough_image, const ModelBundle& bundle);

/// Mean of the three breath models on the breath image and the best cough model on the cough image.
Prediction classify_symptomatic(const SpectroImage& breath_image, const SpectroImage& cough_image,
                                const ModelBundle& bundle);

enum class Verdict { CovidSuspected, Healthy };
enum class PipelineUsed { Symptomatic, Asymptomatic, SymptomaticThenAsymptomatic };

std::string_view to_string(Verdict v) noexcept;
std::string_view to_string(PipelineUsed p) noexcept;

inline constexpr std::string_view kSymptomaticStage = "symptomatic";
inline constexpr std::string_view kAsymptomaticStage = "asymptomatic";

struct Stage {
  std::string name;
  Prediction prediction;

  friend bool operator==(const Stage&, const Stage&) = default;
};

struct ScreeningResult {
  Verdict verdict = Verdict::Healthy;
  PipelineUsed pipeline_used = PipelineUsed::Asymptomatic;
  std::vector<Stage> stage_trace;

  friend bool operator==(const ScreeningResult&, const ScreeningResult&) = default;
};

/// Two-stage screening. Users without a cough go straight to the asymptomatic classifier.
/// Users with a cough get the symptomatic classifier; a HEALTHY result is final, a COVID
/// result is re-decided by the asymptomatic classifier. Throws MissingBreath when a
/// symptomatic user has no breath image.
ScreeningResult screen(bool symptomatic, const SpectroImage* breath_image, const SpectroImage& cough_image,
                       const ModelBundle& bundle);

}  // namespace qcs
