#include "qcs/service.hpp"

#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <httplib.h>
#include <json.hpp>
#include <random>

#include "qcs/error.hpp"
#include "qcs/nn/weights_io.hpp"

namespace qcs {

namespace {

using nlohmann::ordered_json;

constexpr std::string_view kDocument = "submission.json";
constexpr std::string_view kCoughFile = "cough.wav";
constexpr std::string_view kBreathFile = "breath.wav";

std::uint32_t crc_of(std::string_view text) {
  return nn::crc32({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::CorruptRecord, "missing " + path.filename().string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
}

std::string_view as_text(const std::vector<std::uint8_t>& bytes) {
  return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
}

Verdict parse_verdict(const std::string& s) {
  if (s == to_string(Verdict::CovidSuspected)) return Verdict::CovidSuspected;
  if (s == to_string(Verdict::Healthy)) return Verdict::Healthy;
  fail(ErrorKind::CorruptRecord, "unknown verdict " + s);
}

PipelineUsed parse_pipeline(const std::string& s) {
  for (auto p : {PipelineUsed::Symptomatic, PipelineUsed::Asymptomatic, PipelineUsed::SymptomaticThenAsymptomatic})
    if (s == to_string(p)) return p;
  fail(ErrorKind::CorruptRecord, "unknown pipeline " + s);
}

ordered_json result_to_json(const ScreeningResult& r) {
  ordered_json stages = ordered_json::array();
  for (const auto& st : r.stage_trace) {
    ordered_json members = ordered_json::array();
    for (const auto& m : st.prediction.members) members.push_back({m.covid, m.healthy});
    stages.push_back({{"name", st.name},
                      {"label", to_string(st.prediction.label)},
                      {"p_covid", st.prediction.probabilities.covid},
                      {"p_healthy", st.prediction.probabilities.healthy},
                      {"members", std::move(members)}});
  }
  return {{"verdict", to_string(r.verdict)}, {"pipeline_used", to_string(r.pipeline_used)}, {"stages", stages}};
}

ScreeningResult result_from_json(const ordered_json& j) {
  ScreeningResult r;
  r.verdict = parse_verdict(j.at("verdict").get<std::string>());
  r.pipeline_used = parse_pipeline(j.at("pipeline_used").get<std::string>());
  for (const auto& st : j.at("stages")) {
    Stage stage;
    stage.name = st.at("name").get<std::string>();
    const auto label = parse_label(st.at("label").get<std::string>());
    if (!label) fail(ErrorKind::CorruptRecord, "unknown label");
    stage.prediction.label = *label;
    stage.prediction.probabilities = {st.at("p_covid").get<double>(), st.at("p_healthy").get<double>()};
    for (const auto& m : st.at("members")) stage.prediction.members.push_back({m.at(0).get<double>(), m.at(1).get<double>()});
    r.stage_trace.push_back(std::move(stage));
  }
  return r;
}

ordered_json error_body(std::string_view error, std::string_view message) {
  return {{"error", error}, {"message", message}};
}

HttpResponse error_response(int status, std::string_view error, std::string_view message) {
  return {status, error_body(error, message).dump()};
}

}  // namespace

std::string_view to_string(Symptom s) noexcept {
  switch (s) {
    case Symptom::Cough: return "cough";
    case Symptom::Fever: return "fever";
    case Symptom::ShortnessOfBreath: return "shortness_of_breath";
    case Symptom::None: return "none";
  }
  return "unknown";
}

std::optional<Symptom> parse_symptom(std::string_view text) noexcept {
  for (auto s : {Symptom::Cough, Symptom::Fever, Symptom::ShortnessOfBreath, Symptom::None})
    if (text == to_string(s)) return s;
  return std::nullopt;
}

std::string new_submission_id() {
  thread_local std::mt19937_64 rng = [] {
    std::random_device rd;
    std::seed_seq seq{rd(), rd(), rd(), rd(), rd(), rd(), rd(), rd()};
    return std::mt19937_64(seq);
  }();
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng()),
                static_cast<unsigned long long>(rng()));
  return buf;
}

bool is_valid_submission_id(std::string_view id) noexcept {
  return id.size() == 32 &&
         std::all_of(id.begin(), id.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------------------------

SubmissionStore::SubmissionStore(std::filesystem::path root) : root_(std::move(root)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) fail(ErrorKind::IoError, "cannot create storage directory " + root_.string() + ": " + ec.message());
}

void SubmissionStore::persist(const Submission& s) const {
  require(is_valid_submission_id(s.submission_id), "invalid submission id");
  require(!s.cough_audio.empty(), "cough audio must be non-empty");
  const auto dir = root_ / s.submission_id;
  std::error_code ec;
  if (!std::filesystem::create_directory(dir, ec)) {
    if (ec) fail(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
    fail(ErrorKind::DuplicateId, s.submission_id);
  }

  ordered_json doc;
  doc["submission_id"] = s.submission_id;
  doc["received_at"] = s.received_at;
  ordered_json symptoms = ordered_json::array();
  for (Symptom sym : s.symptoms) symptoms.push_back(to_string(sym));
  doc["symptoms"] = std::move(symptoms);
  doc["symptomatic"] = s.symptomatic;
  ordered_json audio = ordered_json::object();
  write_bytes(dir / kCoughFile, as_text(s.cough_audio));
  audio["cough"] = {{"file", kCoughFile}, {"crc32", nn::crc32(s.cough_audio)}};
  if (!s.breath_audio.empty()) {
    write_bytes(dir / kBreathFile, as_text(s.breath_audio));
    audio["breath"] = {{"file", kBreathFile}, {"crc32", nn::crc32(s.breath_audio)}};
  }
  doc["audio"] = std::move(audio);
  doc["result"] = s.result ? result_to_json(*s.result) : ordered_json(nullptr);
  doc["checksum"] = crc_of(doc.dump());

  const auto tmp = dir / (std::string(kDocument) + ".tmp");
  write_bytes(tmp, doc.dump(2));
  std::filesystem::rename(tmp, dir / kDocument, ec);
  if (ec) fail(ErrorKind::IoError, "cannot publish " + s.submission_id + ": " + ec.message());
}

Submission SubmissionStore::load(std::string_view submission_id) const {
  if (!is_valid_submission_id(submission_id)) fail(ErrorKind::NotFound, std::string(submission_id));
  const auto dir = root_ / std::string(submission_id);
  std::ifstream in(dir / kDocument, std::ios::binary);
  if (!in) fail(ErrorKind::NotFound, std::string(submission_id));

  Submission s;
  try {
    ordered_json doc = ordered_json::parse(in);
    const auto checksum = doc.at("checksum").get<std::uint32_t>();
    doc.erase("checksum");
    if (crc_of(doc.dump()) != checksum) fail(ErrorKind::CorruptRecord, "document checksum mismatch");
    s.submission_id = doc.at("submission_id").get<std::string>();
    if (s.submission_id != submission_id) fail(ErrorKind::CorruptRecord, "document id mismatch");
    s.received_at = doc.at("received_at").get<std::string>();
    for (const auto& sym : doc.at("symptoms")) {
      const auto parsed = parse_symptom(sym.get<std::string>());
      if (!parsed) fail(ErrorKind::CorruptRecord, "unknown symptom");
      s.symptoms.insert(*parsed);
    }
    s.symptomatic = doc.at("symptomatic").get<bool>();
    const auto& audio = doc.at("audio");
    for (std::string_view kind : {"cough", "breath"}) {
      if (!audio.contains(kind)) continue;
      const auto& entry = audio.at(std::string(kind));
      auto bytes = read_bytes(dir / entry.at("file").get<std::string>());
      if (nn::crc32(bytes) != entry.at("crc32").get<std::uint32_t>())
        fail(ErrorKind::CorruptRecord, std::string(kind) + " audio checksum mismatch");
      (kind == "cough" ? s.cough_audio : s.breath_audio) = std::move(bytes);
    }
    if (!doc.at("result").is_null()) s.result = result_from_json(doc.at("result"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::CorruptRecord, e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------------------------

std::string result_json(const Submission& s) {
  ordered_json body;
  body["submission_id"] = s.submission_id;
  if (!s.result) {
    body["verdict"] = "pending";
    body["pipeline_used"] = nullptr;
    body["stages"] = ordered_json::array();
    return body.dump();
  }
  body["verdict"] = to_string(s.result->verdict);
  body["pipeline_used"] = to_string(s.result->pipeline_used);
  ordered_json stages = ordered_json::array();
  for (const auto& st : s.result->stage_trace)
    stages.push_back({{"name", st.name},
                      {"label", to_string(st.prediction.label)},
                      {"p_covid", st.prediction.probabilities.covid},
                      {"p_healthy", st.prediction.probabilities.healthy}});
  body["stages"] = std::move(stages);
  return body.dump();
}

ScreeningService::ScreeningService(ServiceConfig config, std::optional<StoredBundle> bundle)
    : config_(std::move(config)), store_(config_.storage_dir) {
  if (bundle) models_ = std::make_shared<const Models>(Models{bundle->classifiers(), bundle->features});
}

HttpResponse ScreeningService::handle_submit(const std::map<std::string, std::string>& parts) const {
  if (!models_) return error_response(503, "ModelNotLoaded", "no model bundle is loaded");

  for (const auto& [name, bytes] : parts)
    if (bytes.size() > config_.max_upload_bytes)
      return error_response(413, "PayloadTooLarge", "part '" + name + "' exceeds " +
                                                        std::to_string(config_.max_upload_bytes) + " bytes");

  Submission sub;
  const auto meta = parts.find("metadata");
  if (meta == parts.end()) return error_response(400, "MalformedMetadata", "missing 'metadata' part");
  try {
    const auto doc = nlohmann::json::parse(meta->second);
    if (!doc.is_object() || !doc.contains("symptoms") || !doc.at("symptoms").is_array())
      return error_response(400, "MalformedMetadata", "metadata must be an object with a 'symptoms' array");
    for (const auto& item : doc.at("symptoms")) {
      const auto sym = item.is_string() ? parse_symptom(item.get<std::string>()) : std::nullopt;
      if (!sym) return error_response(400, "MalformedMetadata", "unknown symptom " + item.dump());
      sub.symptoms.insert(*sym);
    }
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, "MalformedMetadata", e.what());
  }
  if (sub.symptoms.contains(Symptom::None) && sub.symptoms.size() > 1)
    return error_response(400, "MalformedMetadata", "'none' cannot be combined with other symptoms");
  sub.symptomatic = sub.symptoms.contains(Symptom::Cough);

  const auto cough = parts.find("cough");
  if (cough == parts.end() || cough->second.empty())
    return error_response(400, "MissingCough", "a cough recording is required");
  const auto breath = parts.find("breath");
  const bool has_breath = breath != parts.end() && !breath->second.empty();
  if (sub.symptomatic && !has_breath)
    return error_response(400, "MissingBreath", "a breath recording is required when cough is a symptom");

  auto decode = [](const std::string& bytes) {
    return decode_wav({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
  };
  AudioClip cough_clip, breath_clip;
  try {
    cough_clip = decode(cough->second);
    if (has_breath) breath_clip = decode(breath->second);
  } catch (const Error& e) {
    return error_response(422, "AudioRejected", e.what());
  }
  if (config_.silence_gate.rejects(cough_clip))
    return error_response(422, "AudioRejected", "cough recording is silent");

  const auto& models = *models_;
  const SpectroImage cough_image = audio_to_image(cough_clip, models.features);
  std::optional<SpectroImage> breath_image;
  if (sub.symptomatic) breath_image = audio_to_image(breath_clip, models.features);

  sub.result = screen(sub.symptomatic, breath_image ? &*breath_image : nullptr, cough_image, models.bundle);
  sub.received_at = utc_timestamp();
  sub.cough_audio.assign(cough->second.begin(), cough->second.end());
  if (has_breath) sub.breath_audio.assign(breath->second.begin(), breath->second.end());
  for (int attempt = 0;; ++attempt) {
    sub.submission_id = new_submission_id();
    try {
      store_.persist(sub);
      break;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DuplicateId || attempt >= 3) throw;
    }
  }
  return {200, result_json(sub)};
}

HttpResponse ScreeningService::handle_get(std::string_view submission_id) const {
  try {
    return {200, result_json(store_.load(submission_id))};
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::NotFound) return error_response(404, "NotFound", "unknown submission id");
    throw;
  }
}

HttpResponse ScreeningService::handle_health() const {
  return {200, ordered_json{{"status", "ok"}, {"bundle_loaded", bundle_loaded()}}.dump()};
}

// ---------------------------------------------------------------------------------------------

struct HttpServer::Impl {
  explicit Impl(const ScreeningService& s) : service(s) {}
  const ScreeningService& service;
  httplib::Server server;
};

namespace {

void send(httplib::Response& res, const HttpResponse& r) {
  res.status = r.status;
  res.set_content(r.body, "application/json");
}

}  // namespace

HttpServer::HttpServer(const ScreeningService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& svr = impl_->server;
  const auto& cfg = service.config();
  const int threads = std::max(1, cfg.threads);
  svr.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  // Room for three full-size parts plus multipart framing; per-part limits are enforced by the handler.
  svr.set_payload_max_length(3 * cfg.max_upload_bytes + (1u << 16));

  svr.Post("/api/v1/submissions", [this](const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data()) {
      send(res, error_response(400, "MalformedMetadata", "expected multipart/form-data"));
      return;
    }
    std::map<std::string, std::string> parts;
    for (const auto& [name, part] : req.files) parts.emplace(name, part.content);
    try {
      send(res, impl_->service.handle_submit(parts));
    } catch (const std::exception& e) {
      send(res, error_response(500, "InternalError", e.what()));
    }
  });
  svr.Get(R"(/api/v1/submissions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      send(res, impl_->service.handle_get(req.matches[1].str()));
    } catch (const std::exception& e) {
      send(res, error_response(500, "InternalError", e.what()));
    }
  });
  svr.Get("/api/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    send(res, impl_->service.handle_health());
  });
  svr.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const char* name = res.status == 413 ? "PayloadTooLarge" : res.status == 404 ? "NotFound" : "BadRequest";
    res.set_content(error_body(name, httplib::status_message(res.status)).dump(), "application/json");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  auto& svr = impl_->server;
  if (port == 0) {
    const int bound = svr.bind_to_any_port(host);
    if (bound < 0) fail(ErrorKind::IoError, "cannot bind " + host);
    return bound;
  }
  if (!svr.bind_to_port(host, port)) fail(ErrorKind::IoError, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace qcs
