#include "qcs/bundle.hpp"

#include <fstream>
#include <json.hpp>

#include "qcs/error.hpp"
#include "qcs/nn/weights_io.hpp"

namespace qcs {

namespace {

using nlohmann::ordered_json;
constexpr int kBundleVersion = 1;

std::string weight_name(std::string_view sound, std::size_t i) {
  return std::string(sound) + "_" + std::to_string(i) + ".qcsw";
}

ordered_json features_to_json(const FeatureConfig& f) {
  return {{"sample_rate", f.audio.sample_rate},
          {"duration_s", f.audio.duration_s},
          {"peak_target", f.audio.peak_target},
          {"n_fft", f.stft.n_fft},
          {"hop_length", f.stft.hop_length},
          {"win_length", f.stft.win_length},
          {"center", f.stft.center},
          {"floor_db", f.floor_db},
          {"image_height", f.image.height},
          {"image_width", f.image.width}};
}

FeatureConfig features_from_json(const ordered_json& j) {
  FeatureConfig f;
  f.audio.sample_rate = j.at("sample_rate").get<double>();
  f.audio.duration_s = j.at("duration_s").get<double>();
  f.audio.peak_target = j.at("peak_target").get<double>();
  f.stft.n_fft = j.at("n_fft").get<int>();
  f.stft.hop_length = j.at("hop_length").get<int>();
  f.stft.win_length = j.at("win_length").get<int>();
  f.stft.center = j.at("center").get<bool>();
  f.floor_db = j.at("floor_db").get<double>();
  f.image.height = j.at("image_height").get<int>();
  f.image.width = j.at("image_width").get<int>();
  f.stft.validate();
  return f;
}

}  // namespace

ModelBundle StoredBundle::classifiers() const {
  ModelBundle b;
  for (std::size_t i = 0; i < 3; ++i) {
    b.cough_models[i] = std::make_shared<NetworkClassifier>(cough[i]);
    b.breath_models[i] = std::make_shared<NetworkClassifier>(breath[i]);
  }
  b.cough_validation_accuracy = cough_validation_accuracy;
  b.breath_validation_accuracy = breath_validation_accuracy;
  b.best_cough_index = best_cough_index;
  b.validate();
  return b;
}

void save_bundle(const std::filesystem::path& dir, const StoredBundle& bundle) {
  std::filesystem::create_directories(dir);
  ordered_json doc;
  doc["format"] = "qcs-bundle";
  doc["version"] = kBundleVersion;
  doc["features"] = features_to_json(bundle.features);
  doc["best_cough_index"] = bundle.best_cough_index;
  for (std::string_view sound : {"cough", "breath"}) {
    const bool is_cough = sound == "cough";
    const auto& nets = is_cough ? bundle.cough : bundle.breath;
    const auto& acc = is_cough ? bundle.cough_validation_accuracy : bundle.breath_validation_accuracy;
    ordered_json members = ordered_json::array();
    for (std::size_t i = 0; i < 3; ++i) {
      require(nets[i].id() == nn::kArchitectures[i], "bundle networks must follow the architecture order");
      const std::string file = weight_name(sound, i);
      nn::save_weights_file(dir / file, nets[i]);
      members.push_back({{"file", file},
                         {"arch", nn::to_string(nets[i].id())},
                         {"validation_accuracy", acc[i]},
                         {"checksum", nn::weights_checksum(nets[i])}});
    }
    doc[std::string(sound)] = std::move(members);
  }
  std::ofstream out(dir / "bundle.json", std::ios::binary | std::ios::trunc);
  out << doc.dump(2) << '\n';
  if (!out) fail(ErrorKind::IoError, "cannot write " + (dir / "bundle.json").string());
}

StoredBundle load_bundle(const std::filesystem::path& dir) {
  const auto doc_path = dir / "bundle.json";
  std::ifstream in(doc_path, std::ios::binary);
  if (!in) fail(ErrorKind::NotFound, "no bundle at " + dir.string());
  StoredBundle bundle;
  try {
    const auto doc = ordered_json::parse(in);
    if (doc.at("format") != "qcs-bundle" || doc.at("version") != kBundleVersion)
      fail(ErrorKind::VersionMismatch, doc_path.string());
    bundle.features = features_from_json(doc.at("features"));
    bundle.best_cough_index = doc.at("best_cough_index").get<int>();
    for (std::string_view sound : {"cough", "breath"}) {
      const bool is_cough = sound == "cough";
      auto& nets = is_cough ? bundle.cough : bundle.breath;
      auto& acc = is_cough ? bundle.cough_validation_accuracy : bundle.breath_validation_accuracy;
      const auto& members = doc.at(std::string(sound));
      if (members.size() != 3) fail(ErrorKind::ConfigInvalid, "expected three " + std::string(sound) + " models");
      for (std::size_t i = 0; i < 3; ++i) {
        nets[i] = nn::load_weights_file(dir / members[i].at("file").get<std::string>(), nn::kArchitectures[i]);
        if (nets[i].architecture().input_size != bundle.features.image.height)
          fail(ErrorKind::ShapeMismatch, "network input size differs from the bundle image size");
        if (nn::weights_checksum(nets[i]) != members[i].at("checksum").get<std::uint32_t>())
          fail(ErrorKind::ChecksumFailure, "weights differ from bundle.json for " + std::string(sound));
        acc[i] = members[i].at("validation_accuracy").get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ConfigInvalid, doc_path.string() + ": " + e.what());
  }
  if (bundle.best_cough_index < 0 || bundle.best_cough_index > 2)
    fail(ErrorKind::ConfigInvalid, "best_cough_index out of range");
  return bundle;
}

}  // namespace qcs
