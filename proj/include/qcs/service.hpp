#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "qcs/audio.hpp"
#include "qcs/bundle.hpp"
#include "qcs/pipeline.hpp"

namespace qcs {

enum class Symptom { Cough, Fever, ShortnessOfBreath, None };

std::string_view to_string(Symptom s) noexcept;
std::optional<Symptom> parse_symptom(std::string_view text) noexcept;

/// Anonymous by construction: symptoms, timestamps, audio and result only.
struct Submission {
  std::string submission_id;
  std::string received_at;  // UTC, ISO 8601
  std::set<Symptom> symptoms;
  bool symptomatic = false;  // Cough in symptoms
  std::vector<std::uint8_t> cough_audio;
  std::vector<std::uint8_t> breath_audio;  // empty when not supplied
  std::optional<ScreeningResult> result;   // absent = pending

  friend bool operator==(const Submission&, const Submission&) = default;
};

/// 32 lowercase hex digits from 128 random bits.
std::string new_submission_id();
bool is_valid_submission_id(std::string_view id) noexcept;
std::string utc_timestamp();

/// Write-once store: `<root>/<id>/{cough.wav, breath.wav, submission.json}`. The document is
/// written last via rename, so an id without it does not exist.
class SubmissionStore {
 public:
  explicit SubmissionStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  /// Throws DuplicateId if the id was already used, IoError on write failure.
  void persist(const Submission& submission) const;
  /// Throws NotFound or CorruptRecord.
  Submission load(std::string_view submission_id) const;

 private:
  std::filesystem::path root_;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path bundle_path;
  std::filesystem::path storage_dir = "submissions";
  std::size_t max_upload_bytes = 10u << 20;  // per file
  SilenceGate silence_gate;
  int threads = 8;
};

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

/// Transport-independent request handlers. Safe to call concurrently.
class ScreeningService {
 public:
  /// Without a bundle every submission is answered with 503.
  ScreeningService(ServiceConfig config, std::optional<StoredBundle> bundle);

  bool bundle_loaded() const noexcept { return models_ != nullptr; }
  const ServiceConfig& config() const noexcept { return config_; }
  const SubmissionStore& store() const noexcept { return store_; }

  /// `parts` maps multipart part names ("metadata", "cough", "breath") to their bytes.
  HttpResponse handle_submit(const std::map<std::string, std::string>& parts) const;
  HttpResponse handle_get(std::string_view submission_id) const;
  HttpResponse handle_health() const;

 private:
  struct Models {
    ModelBundle bundle;
    FeatureConfig features;
  };

  ServiceConfig config_;
  SubmissionStore store_;
  std::shared_ptr<const Models> models_;
};

/// Response body for a stored submission, as returned by submit and get.
std::string result_json(const Submission& submission);

/// HTTP/1.1 front end for a ScreeningService.
class HttpServer {
 public:
  explicit HttpServer(const ScreeningService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds `host:port` (port 0 picks a free one) and returns the bound port. Throws IoError.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace qcs
