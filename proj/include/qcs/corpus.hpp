#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "qcs/audio.hpp"
#include "qcs/types.hpp"

namespace qcs {

struct SubjectRecord {
  std::string subject_id;
  Label label = Label::Healthy;
  bool symptomatic = false;
  std::filesystem::path cough_path;
  std::filesystem::path breath_path;

  friend bool operator==(const SubjectRecord&, const SubjectRecord&) = default;
};

enum class Provenance { Manifest, Synthetic };

/// Label x symptom-status cell. Folds are stratified over these four.
struct Stratum {
  Label label;
  bool symptomatic;

  int index() const noexcept { return 2 * class_index(label) + (symptomatic ? 1 : 0); }
  friend auto operator<=>(const Stratum&, const Stratum&) = default;
};

inline constexpr std::array<Stratum, 4> kStrata{
    Stratum{Label::Covid, false}, Stratum{Label::Covid, true},
    Stratum{Label::Healthy, false}, Stratum{Label::Healthy, true}};

std::string to_string(Stratum s);

struct Dataset {
  std::vector<SubjectRecord> records;
  Provenance provenance = Provenance::Manifest;

  const SubjectRecord& find(const std::string& subject_id) const;
  std::vector<std::string> ids() const;
  std::map<Stratum, std::vector<std::string>> strata() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// CSV with header `subject_id,label,symptomatic,cough_path,breath_path`.
/// Relative audio paths resolve against the manifest's directory.
Dataset load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Dataset& dataset);

struct FoldSplit {
  int fold_index = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> validation_ids;
  std::vector<std::string> test_ids;

  friend bool operator==(const FoldSplit&, const FoldSplit&) = default;
};

/// Stratified k-fold: per stratum, ids are sorted, shuffled with `seed`, then striped into k
/// test shares; validation is `validation_fraction` of the remainder, also per stratum.
std::vector<FoldSplit> stratified_kfold(const Dataset& dataset, int k, double validation_fraction,
                                        std::uint64_t seed);

/// Parameters of the synthetic stand-in corpus.
///
/// Class identity is carried by the centre frequency of each sound. Centres default to
/// `base_hz[kind] -/+ band_separation / 2` for COVID / HEALTHY; `with_separation` recentres.
struct SynthSpec {
  /// Indexed by Stratum::index().
  std::array<int, 4> subjects_per_stratum{50, 50, 50, 50};
  double clip_duration_s = 6.0;
  double sample_rate = 44100.0;
  /// [label][sound kind] centre frequency in Hz.
  std::array<std::array<double, 2>, 2> class_band_centers{};
  double band_separation = 2600.0;
  double noise_floor_db = -40.0;
  std::uint64_t seed = 7;

  SynthSpec();
  SynthSpec& with_separation(double separation_hz);
  double center(Label label, SoundKind kind) const {
    return class_band_centers[static_cast<std::size_t>(label)][static_cast<std::size_t>(kind)];
  }
  void validate() const;
};

/// Default per-kind midpoints between the two class centres.
inline constexpr std::array<double, 2> kSynthBaseHz{2000.0, 1800.0};

/// Deterministic clip for one subject (exposed so tests can inspect signals without disk IO).
AudioClip synthesize_clip(const SynthSpec& spec, Stratum stratum, SoundKind kind, int ordinal);

/// Writes `<out_dir>/audio/*.wav` plus `<out_dir>/manifest.csv`.
Dataset generate_synthetic_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace qcs
