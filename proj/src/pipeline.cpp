#include "qcs/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "qcs/error.hpp"

namespace qcs {

void ModelBundle::validate() const {
  for (const auto& m : cough_models) require(m != nullptr, "bundle is missing a cough model");
  for (const auto& m : breath_models) require(m != nullptr, "bundle is missing a breath model");
  require(best_cough_index >= 0 && best_cough_index < 3, "best_cough_index out of range");
}

int best_index(std::span<const double> scores) {
  require(!scores.empty(), "no scores to rank");
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

Prediction ensemble(std::span<const Probabilities> members) {
  if (members.empty()) fail(ErrorKind::EmptyEnsemble, "ensemble needs at least one member");
  Prediction out;
  out.members.assign(members.begin(), members.end());
  double covid = 0.0, healthy = 0.0;
  for (const auto& p : members) {
    require(std::isfinite(p.covid) && std::isfinite(p.healthy) && std::abs(p.sum() - 1.0) <= 1e-6,
            "member probabilities must sum to 1");
    covid += p.covid;
    healthy += p.healthy;
  }
  const auto n = static_cast<double>(members.size());
  out.probabilities = {covid / n, healthy / n};
  const double gap = out.probabilities.covid - out.probabilities.healthy;
  out.label = (std::abs(gap) < kTieTolerance || gap > 0) ? Label::Covid : Label::Healthy;
  return out;
}

Prediction classify_asymptomatic(const SpectroImage& cough_image, const ModelBundle& bundle) {
  std::array<Probabilities, 3> members;
  for (std::size_t i = 0; i < 3; ++i) members[i] = bundle.cough_models[i]->predict(cough_image);
  return ensemble(members);
}

Prediction classify_symptomatic(const SpectroImage& breath_image, const SpectroImage& cough_image,
                                const ModelBundle& bundle) {
  std::array<Probabilities, 4> members;
  for (std::size_t i = 0; i < 3; ++i) members[i] = bundle.breath_models[i]->predict(breath_image);
  members[3] = bundle.cough_models[static_cast<std::size_t>(bundle.best_cough_index)]->predict(cough_image);
  return ensemble(members);
}

std::string_view to_string(Verdict v) noexcept {
  return v == Verdict::CovidSuspected ? "covid_suspected" : "healthy";
}

std::string_view to_string(PipelineUsed p) noexcept {
  switch (p) {
    case PipelineUsed::Symptomatic: return "symptomatic";
    case PipelineUsed::Asymptomatic: return "asymptomatic";
    case PipelineUsed::SymptomaticThenAsymptomatic: return "symptomatic_then_asymptomatic";
  }
  return "unknown";
}

ScreeningResult screen(bool symptomatic, const SpectroImage* breath_image, const SpectroImage& cough_image,
                       const ModelBundle& bundle) {
  ScreeningResult result;
  if (!symptomatic) {
    result.pipeline_used = PipelineUsed::Asymptomatic;
    result.stage_trace.push_back({std::string(kAsymptomaticStage), classify_asymptomatic(cough_image, bundle)});
  } else {
    if (breath_image == nullptr) fail(ErrorKind::MissingBreath, "symptomatic screening needs a breath recording");
    result.pipeline_used = PipelineUsed::Symptomatic;
    result.stage_trace.push_back(
        {std::string(kSymptomaticStage), classify_symptomatic(*breath_image, cough_image, bundle)});
    if (result.stage_trace.back().prediction.label == Label::Covid) {
      result.pipeline_used = PipelineUsed::SymptomaticThenAsymptomatic;
      result.stage_trace.push_back({std::string(kAsymptomaticStage), classify_asymptomatic(cough_image, bundle)});
    }
  }
  result.verdict =
      result.stage_trace.back().prediction.label == Label::Covid ? Verdict::CovidSuspected : Verdict::Healthy;
  return result;
}

}  // namespace qcs
