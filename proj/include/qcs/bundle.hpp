#pragma once

#include <array>
#include <filesystem>

#include "qcs/nn/network.hpp"
#include "qcs/pipeline.hpp"
#include "qcs/spectrogram.hpp"

namespace qcs {

/// Trained networks plus everything needed to reproduce their inputs.
/// Index i of `cough` and `breath` holds architecture kArchitectures[i].
struct StoredBundle {
  std::array<nn::Network<float>, 3> cough;
  std::array<nn::Network<float>, 3> breath;
  std::array<double, 3> cough_validation_accuracy{};
  std::array<double, 3> breath_validation_accuracy{};
  int best_cough_index = 0;
  FeatureConfig features;

  ModelBundle classifiers() const;
};

/// Directory layout: bundle.json, cough_{0,1,2}.qcsw, breath_{0,1,2}.qcsw.
void save_bundle(const std::filesystem::path& dir, const StoredBundle& bundle);

/// Loads and verifies all six networks. Throws NotFound, ConfigInvalid, or the weight-file errors.
StoredBundle load_bundle(const std::filesystem::path& dir);

}  // namespace qcs
