// Command-line front end: corpus synthesis, training, evaluation, serving, spectrogram export.
#include <CLI11.hpp>
#include <csignal>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "qcs/cv.hpp"
#include "qcs/error.hpp"
#include "qcs/service.hpp"

namespace {

using nlohmann::json;

qcs::SynthSpec synth_spec_from_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) qcs::fail(qcs::ErrorKind::IoError, "cannot read " + path.string());
  const json j = json::parse(in);
  qcs::SynthSpec spec;
  if (j.contains("band_separation")) spec.with_separation(j.at("band_separation").get<double>());
  if (j.contains("subjects_per_stratum")) spec.subjects_per_stratum = j.at("subjects_per_stratum").get<std::array<int, 4>>();
  if (j.contains("clip_duration_s")) spec.clip_duration_s = j.at("clip_duration_s").get<double>();
  if (j.contains("sample_rate")) spec.sample_rate = j.at("sample_rate").get<double>();
  if (j.contains("class_band_centers"))
    spec.class_band_centers = j.at("class_band_centers").get<std::array<std::array<double, 2>, 2>>();
  if (j.contains("noise_floor_db")) spec.noise_floor_db = j.at("noise_floor_db").get<double>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  spec.validate();
  return spec;
}

struct TrainFlags {
  std::uint64_t seed = 1;
  double validation_fraction = 0.10;
  int threads = 0;
  std::optional<int> balance_target;
  std::vector<std::string> balance_overrides;
  qcs::nn::TrainingConfig training;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--seed", f.seed, "Root seed for splits, augmentation and initialization")->envname("QCS_SEED");
  cmd->add_option("--validation-fraction", f.validation_fraction, "Validation share of each training split")
      ->check(CLI::Range(0.0, 0.5));
  cmd->add_option("--threads", f.threads, "Worker threads (0 = all cores)")->envname("QCS_THREADS");
  cmd->add_option("--balance-target", f.balance_target, "Per-class target count after augmentation");
  cmd->add_option("--balance-override", f.balance_overrides, "Pin a class multiplier, e.g. healthy=3");
  cmd->add_option("--learning-rate", f.training.learning_rate, "Initial Adam learning rate");
  cmd->add_option("--batch-size", f.training.batch_size, "Mini-batch size");
  cmd->add_option("--epochs", f.training.max_epochs, "Maximum epochs");
}

std::map<std::string, int> parse_overrides(const std::vector<std::string>& items) {
  std::map<std::string, int> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--balance-override", "expected label=multiplier");
    const auto label = qcs::parse_label(item.substr(0, eq));
    if (!label) throw CLI::ValidationError("--balance-override", "unknown label " + item.substr(0, eq));
    out[std::string(qcs::to_string(*label))] = std::stoi(item.substr(eq + 1));
  }
  return out;
}

void log_stderr(const std::string& line) { std::cerr << line << std::endl; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) qcs::fail(qcs::ErrorKind::IoError, "cannot write " + path.string());
}

qcs::HttpServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Respiratory-sound COVID-19 pre-screening toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus (WAV files + manifest.csv)");
  std::filesystem::path synth_spec_path, synth_out;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--spec", synth_spec_path, "SynthSpec JSON (defaults apply to absent keys)")->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "Output directory")->required()->envname("QCS_CORPUS_DIR");
  synth->add_option("--seed", synth_seed, "Override the generator seed")->envname("QCS_SYNTH_SEED");

  // train
  auto* train = app.add_subcommand("train", "Train the six serving models into a bundle directory");
  std::filesystem::path train_manifest, train_bundle_dir;
  TrainFlags train_flags;
  train->add_option("--manifest", train_manifest, "Dataset manifest CSV")->required()->envname("QCS_MANIFEST");
  train->add_option("--bundle", train_bundle_dir, "Output bundle directory")->required()->envname("QCS_BUNDLE");
  add_train_flags(train, train_flags);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a bundle, or run k-fold cross-validation with --cv");
  std::filesystem::path eval_manifest, eval_bundle_dir, eval_report;
  bool eval_cv = false, eval_extended = false;
  int eval_folds = 5;
  TrainFlags eval_flags;
  evaluate->add_option("--manifest", eval_manifest, "Dataset manifest CSV")->required()->envname("QCS_MANIFEST");
  evaluate->add_option("--bundle", eval_bundle_dir, "Bundle to score")->envname("QCS_BUNDLE");
  evaluate->add_flag("--cv", eval_cv, "Train and score fresh models per fold");
  evaluate->add_option("--folds", eval_folds, "Number of folds for --cv")->check(CLI::Range(2, 100));
  evaluate->add_flag("--extended", eval_extended, "Also train cross-sound blocks (breath/asymptomatic, cough/symptomatic)");
  evaluate->add_option("--report", eval_report, "Write the JSON report here")->envname("QCS_REPORT");
  add_train_flags(evaluate, eval_flags);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the submission API");
  qcs::ServiceConfig service_cfg;
  serve->add_option("--host", service_cfg.host, "Listen address")->envname("QCS_HOST");
  serve->add_option("--port", service_cfg.port, "Listen port")->envname("QCS_PORT");
  serve->add_option("--bundle", service_cfg.bundle_path, "Model bundle directory")->required()->envname("QCS_BUNDLE");
  serve->add_option("--storage", service_cfg.storage_dir, "Submission storage directory")->envname("QCS_STORAGE");
  serve->add_option("--max-upload-bytes", service_cfg.max_upload_bytes, "Per-file upload limit")
      ->envname("QCS_MAX_UPLOAD_BYTES");
  serve->add_option("--threads", service_cfg.threads, "Request worker threads")->envname("QCS_THREADS");
  serve->add_option("--silence-threshold-db", service_cfg.silence_gate.threshold_db, "Silent-frame threshold");
  serve->add_option("--max-silence-fraction", service_cfg.silence_gate.max_silence_fraction,
                    "Reject recordings with a larger silent share");

  // spectrogram
  auto* spectro = app.add_subcommand("spectrogram", "Export the classifier input image of a WAV file as PGM");
  std::filesystem::path spectro_in, spectro_out;
  spectro->add_option("input", spectro_in, "WAV file")->required()->check(CLI::ExistingFile);
  spectro->add_option("output", spectro_out, "PGM file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      qcs::SynthSpec spec = synth_spec_path.empty() ? qcs::SynthSpec{} : synth_spec_from_json(synth_spec_path);
      if (synth_seed) spec.seed = *synth_seed;
      const auto ds = qcs::generate_synthetic_corpus(spec, synth_out);
      std::cout << "wrote " << ds.records.size() << " subjects to " << (synth_out / "manifest.csv").string() << '\n';
    } else if (*train) {
      qcs::BundleOptions opt;
      opt.seed = train_flags.seed;
      opt.validation_fraction = train_flags.validation_fraction;
      opt.training = train_flags.training;
      opt.balance_target = train_flags.balance_target;
      opt.balance_overrides = parse_overrides(train_flags.balance_overrides);
      opt.threads = train_flags.threads;
      opt.log = log_stderr;
      const auto bundle = qcs::train_bundle(qcs::load_manifest(train_manifest), opt);
      qcs::save_bundle(train_bundle_dir, bundle);
      std::cout << "bundle written to " << train_bundle_dir.string() << " (best cough model "
                << qcs::nn::to_string(qcs::nn::kArchitectures[static_cast<std::size_t>(bundle.best_cough_index)])
                << ")\n";
    } else if (*evaluate) {
      const auto dataset = qcs::load_manifest(eval_manifest);
      qcs::CvReport report;
      if (eval_cv) {
        qcs::CvOptions opt;
        opt.folds = eval_folds;
        opt.seed = eval_flags.seed;
        opt.validation_fraction = eval_flags.validation_fraction;
        opt.training = eval_flags.training;
        opt.balance_target = eval_flags.balance_target;
        opt.balance_overrides = parse_overrides(eval_flags.balance_overrides);
        opt.extended_blocks = eval_extended;
        opt.threads = eval_flags.threads;
        opt.log = log_stderr;
        report = qcs::run_cv(dataset, opt);
      } else {
        if (eval_bundle_dir.empty()) throw CLI::RequiredError("--bundle (or --cv)");
        report = qcs::evaluate_bundle(qcs::load_bundle(eval_bundle_dir), dataset, eval_flags.threads);
      }
      if (!eval_report.empty()) write_text(eval_report, qcs::to_json(report));
      std::cout << qcs::render_text(report);
    } else if (*serve) {
      // Refuse to start without a complete bundle.
      qcs::ScreeningService service(service_cfg, qcs::load_bundle(service_cfg.bundle_path));
      qcs::HttpServer server(service);
      const int port = server.bind(service_cfg.host, service_cfg.port);
      g_server = &server;
      std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
      std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
      std::cerr << "listening on " << service_cfg.host << ':' << port << std::endl;
      server.listen();
      g_server = nullptr;
    } else if (*spectro) {
      qcs::write_pgm(spectro_out, qcs::audio_to_image(qcs::read_wav(spectro_in)));
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const qcs::Error& e) {
    std::cerr << "error (" << qcs::to_string(e.kind()) << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
