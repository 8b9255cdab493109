#include "qcs/cv.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <random>
#include <sstream>

#include "qcs/error.hpp"
#include "qcs/parallel.hpp"
#include "qcs/pipeline.hpp"

namespace qcs {

std::string_view pipeline_name(Task t) noexcept {
  return (t == Task::AsymptomaticCough || t == Task::AsymptomaticBreath) ? "asymptomatic" : "symptomatic";
}

SoundKind sound_of(Task t) noexcept {
  return (t == Task::AsymptomaticCough || t == Task::SymptomaticCough) ? SoundKind::Cough : SoundKind::Breath;
}

std::optional<Label> task_label(Task t, const SubjectRecord& r) noexcept {
  if (pipeline_name(t) == "asymptomatic") {
    if (r.label == Label::Covid || !r.symptomatic) return r.label;
  } else if (r.symptomatic) {
    return r.label;
  }
  return std::nullopt;
}

namespace {

using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr std::array<Task, 2> kPrimaryTasks{Task::AsymptomaticCough, Task::SymptomaticBreath};
constexpr std::array<Task, 4> kAllTasks{Task::AsymptomaticCough, Task::AsymptomaticBreath, Task::SymptomaticBreath,
                                        Task::SymptomaticCough};

void log_line(const LogFn& log, const std::string& line) {
  if (log) log(line);
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct SubjectImages {
  SpectroImage cough;
  SpectroImage breath;

  const SpectroImage& of(SoundKind k) const { return k == SoundKind::Cough ? cough : breath; }
};

using ImageCache = std::map<std::string, SubjectImages>;

const std::filesystem::path& path_of(const SubjectRecord& r, SoundKind k) {
  return k == SoundKind::Cough ? r.cough_path : r.breath_path;
}

ImageCache compute_images(const Dataset& dataset, const FeatureConfig& features, int threads) {
  std::vector<SubjectImages> images(dataset.records.size());
  parallel_for(dataset.records.size(), threads, [&](std::size_t i) {
    const auto& r = dataset.records[i];
    images[i].cough = audio_to_image(read_wav(r.cough_path), features);
    images[i].breath = audio_to_image(read_wav(r.breath_path), features);
  });
  ImageCache cache;
  for (std::size_t i = 0; i < images.size(); ++i) cache.emplace(dataset.records[i].subject_id, std::move(images[i]));
  return cache;
}

struct TaskData {
  Task task{};
  std::vector<nn::Example<float>> train;
  std::vector<nn::Example<float>> validation;
};

/// Balanced, augmented training images and untouched validation images for one task.
/// Only classes with multiplier > 1 are re-read from disk.
TaskData prepare_task(Task task, const Dataset& dataset, const ImageCache& cache,
                      const std::vector<std::string>& train_ids, const std::vector<std::string>& validation_ids,
                      std::optional<int> balance_target, const std::map<std::string, int>& overrides,
                      const FeatureConfig& features, std::uint64_t augment_seed) {
  const SoundKind sound = sound_of(task);
  std::vector<const SubjectRecord*> members;
  std::map<std::string, int> counts;
  for (const auto& id : train_ids) {
    const auto& r = dataset.find(id);
    if (const auto label = task_label(task, r)) {
      members.push_back(&r);
      ++counts[std::string(to_string(*label))];
    }
  }
  int largest = 0;
  for (const auto& [_, n] : counts) largest = std::max(largest, n);
  const BalancePlan plan = compute_balance_plan(counts, balance_target.value_or(largest), overrides);

  std::vector<LabeledImage> images;
  for (const SubjectRecord* r : members) {
    const auto label = *task_label(task, *r);
    const int multiplier = plan.at(std::string(to_string(label))).multiplier;
    const SpectroImage& original = cache.at(r->subject_id).of(sound);
    if (multiplier == 1) {
      images.push_back({r->subject_id, original, label, 0});
      continue;
    }
    const LabeledClip clip{r->subject_id, standardize(read_wav(path_of(*r, sound)), features.audio), label};
    auto expanded = expand_sample(clip, multiplier, augment_seed, features, &original);
    std::move(expanded.begin(), expanded.end(), std::back_inserter(images));
  }

  TaskData data;
  data.task = task;
  data.train = nn::make_examples<float>(images);
  for (const auto& id : validation_ids) {
    const auto& r = dataset.find(id);
    if (const auto label = task_label(task, r))
      data.validation.push_back({nn::to_input<float>(cache.at(id).of(sound)), class_index(*label)});
  }
  return data;
}

int square_size(const FeatureConfig& f) {
  require(f.image.height == f.image.width, "networks need square images");
  return f.image.height;
}

struct TrainJob {
  const TaskData* data = nullptr;
  nn::ArchId arch{};
  std::uint64_t seed = 0;
  std::string tag;
};

std::vector<nn::TrainedModel<float>> run_training(const std::vector<TrainJob>& jobs, const nn::TrainingConfig& base,
                                                  int input_size, int threads, const LogFn& log) {
  std::vector<nn::TrainedModel<float>> models(jobs.size());
  std::mutex log_mutex;
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    const auto t0 = Clock::now();
    nn::TrainingConfig cfg = base;
    cfg.seed = jobs[i].seed;
    const auto& d = *jobs[i].data;
    models[i] = nn::train<float>(jobs[i].arch, d.train, d.validation, cfg, {}, input_size);
    if (log) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "%s %s: %zu images, best epoch %d of %zu, val acc %.4f, %.1f s",
                    jobs[i].tag.c_str(), std::string(nn::to_string(jobs[i].arch)).c_str(), d.train.size(),
                    models[i].epoch_of_best, models[i].history.size(), models[i].best_validation_accuracy,
                    seconds_since(t0));
      std::lock_guard lock(log_mutex);
      log(buf);
    }
  });
  return models;
}

ModelSummary summarize(Task task, const TaskData& data, const nn::TrainedModel<float>& m) {
  return {std::string(pipeline_name(task)),
          std::string(to_string(sound_of(task))),
          std::string(nn::to_string(m.network.id())),
          static_cast<int>(data.train.size()),
          static_cast<int>(data.validation.size()),
          static_cast<int>(m.history.size()),
          m.epoch_of_best,
          m.best_validation_accuracy,
          m.best_validation_loss};
}

ReportRow make_row(std::string model, const std::vector<Label>& predictions, const std::vector<Label>& truths) {
  ReportRow row;
  row.model = std::move(model);
  row.counts = confusion(predictions, truths, Label::Covid);
  row.metrics = class_metrics(row.counts);
  return row;
}

/// Network rows for `nets` plus the ensemble row. The primary tasks use the pipeline's own
/// classifiers for the ensemble so the report scores exactly what is served.
ReportBlock evaluate_block(Task task, const std::array<const Classifier*, 3>& nets, const ModelBundle* bundle,
                           const std::vector<const SubjectRecord*>& test, const ImageCache& cache) {
  const SoundKind sound = sound_of(task);
  std::vector<Label> truths;
  std::array<std::vector<Label>, 3> per_net;
  std::vector<Label> ens;
  for (const SubjectRecord* r : test) {
    const auto label = task_label(task, *r);
    if (!label) continue;
    truths.push_back(*label);
    const auto& imgs = cache.at(r->subject_id);
    std::array<Probabilities, 3> probs;
    for (std::size_t i = 0; i < 3; ++i) {
      probs[i] = nets[i]->predict(imgs.of(sound));
      per_net[i].push_back(ensemble(std::span(&probs[i], 1)).label);
    }
    if (bundle != nullptr && task == Task::AsymptomaticCough)
      ens.push_back(classify_asymptomatic(imgs.cough, *bundle).label);
    else if (bundle != nullptr && task == Task::SymptomaticBreath)
      ens.push_back(classify_symptomatic(imgs.breath, imgs.cough, *bundle).label);
    else
      ens.push_back(ensemble(probs).label);
  }
  require(!truths.empty(), "no test subjects for " + std::string(pipeline_name(task)) + " " +
                               std::string(to_string(sound)));
  ReportBlock block{std::string(pipeline_name(task)), std::string(to_string(sound)), {}};
  for (std::size_t i = 0; i < 3; ++i) block.rows.push_back(make_row(std::string(nn::to_string(nn::kArchitectures[i])), per_net[i], truths));
  block.rows.push_back(make_row("ensemble", ens, truths));
  return block;
}

void evaluate_screening(FoldReport& fold, const ModelBundle& bundle, const std::vector<const SubjectRecord*>& test,
                        const ImageCache& cache) {
  std::vector<Label> preds, truths;
  for (const SubjectRecord* r : test) {
    const auto& imgs = cache.at(r->subject_id);
    const ScreeningResult res = screen(r->symptomatic, &imgs.breath, imgs.cough, bundle);
    preds.push_back(res.verdict == Verdict::CovidSuspected ? Label::Covid : Label::Healthy);
    truths.push_back(r->label);
    ++fold.pipeline_counts[std::string(to_string(res.pipeline_used))];
  }
  fold.screening = make_row("cascade", preds, truths);
  fold.test_subjects = static_cast<int>(test.size());
}

std::array<const Classifier*, 3> raw(const std::array<std::shared_ptr<const Classifier>, 3>& models) {
  return {models[0].get(), models[1].get(), models[2].get()};
}

ReportRow mean_row(const std::vector<const ReportRow*>& rows) {
  ReportRow out;
  out.model = rows.front()->model;
  std::vector<MetricSet> covid, healthy, all;
  for (const ReportRow* r : rows) {
    out.counts += r->counts;
    covid.push_back(r->metrics.covid);
    healthy.push_back(r->metrics.healthy);
    all.push_back(r->metrics.overall);
  }
  out.metrics = {mean(covid), mean(healthy), mean(all)};
  return out;
}

void fill_means(CvReport& report) {
  report.mean_blocks.clear();
  if (report.per_fold.empty()) return;
  for (std::size_t b = 0; b < report.per_fold.front().blocks.size(); ++b) {
    ReportBlock block = report.per_fold.front().blocks[b];
    for (std::size_t r = 0; r < block.rows.size(); ++r) {
      std::vector<const ReportRow*> rows;
      for (const auto& f : report.per_fold) rows.push_back(&f.blocks.at(b).rows.at(r));
      block.rows[r] = mean_row(rows);
    }
    report.mean_blocks.push_back(std::move(block));
  }
  std::vector<const ReportRow*> rows;
  for (const auto& f : report.per_fold) rows.push_back(&f.screening);
  report.mean_screening = mean_row(rows);
}

}  // namespace

std::pair<std::vector<std::string>, std::vector<std::string>> stratified_holdout(const Dataset& dataset,
                                                                                 double fraction,
                                                                                 std::uint64_t seed) {
  require(fraction >= 0 && fraction < 1, "validation fraction must lie in [0, 1)");
  std::vector<std::string> train, validation;
  std::mt19937_64 rng(seed);
  for (auto& [stratum, ids] : dataset.strata()) {
    std::sort(ids.begin(), ids.end());
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ids.size())));
    validation.insert(validation.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
    train.insert(train.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(validation.begin(), validation.end());
  return {train, validation};
}

CvReport run_cv(const Dataset& dataset, const CvOptions& options) {
  options.training.validate();
  const auto t0 = Clock::now();
  const auto folds = stratified_kfold(dataset, options.folds, options.validation_fraction, options.seed);
  const ImageCache cache = compute_images(dataset, options.features, options.threads);
  log_line(options.log, "features for " + std::to_string(dataset.records.size()) + " subjects in " +
                            std::to_string(seconds_since(t0)) + " s");

  std::vector<Task> tasks(kPrimaryTasks.begin(), kPrimaryTasks.end());
  if (options.extended_blocks) tasks.assign(kAllTasks.begin(), kAllTasks.end());
  const std::size_t n_folds = folds.size(), n_tasks = tasks.size();

  std::vector<TaskData> data(n_folds * n_tasks);
  parallel_for(data.size(), options.threads, [&](std::size_t i) {
    const auto& fold = folds[i / n_tasks];
    const Task task = tasks[i % n_tasks];
    data[i] = prepare_task(task, dataset, cache, fold.train_ids, fold.validation_ids, options.balance_target,
                           options.balance_overrides, options.features,
                           mix_seed(options.seed, 0x1000 + 8 * (i / n_tasks) + static_cast<std::uint64_t>(task)));
  });

  std::vector<TrainJob> jobs;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t a = 0; a < 3; ++a) {
      const std::size_t f = i / n_tasks;
      const Task task = tasks[i % n_tasks];
      jobs.push_back({&data[i], nn::kArchitectures[a],
                      mix_seed(options.seed, 0x2000 + 32 * f + 4 * static_cast<std::uint64_t>(task) + a),
                      "fold " + std::to_string(f) + " " + std::string(pipeline_name(task)) + "/" +
                          std::string(to_string(sound_of(task)))});
    }
  const auto models = run_training(jobs, options.training, square_size(options.features), options.threads, options.log);

  CvReport report;
  report.folds = static_cast<int>(n_folds);
  report.seed = options.seed;
  for (std::size_t f = 0; f < n_folds; ++f) {
    FoldReport fold;
    fold.fold = folds[f].fold_index;
    std::map<Task, std::array<std::shared_ptr<const Classifier>, 3>> nets;
    std::map<Task, std::array<double, 3>> val_acc;
    for (std::size_t t = 0; t < n_tasks; ++t)
      for (std::size_t a = 0; a < 3; ++a) {
        const auto& m = models[(f * n_tasks + t) * 3 + a];
        nets[tasks[t]][a] = std::make_shared<NetworkClassifier>(m.network);
        val_acc[tasks[t]][a] = m.best_validation_accuracy;
        fold.models.push_back(summarize(tasks[t], data[f * n_tasks + t], m));
      }
    ModelBundle bundle;
    bundle.cough_models = nets.at(Task::AsymptomaticCough);
    bundle.breath_models = nets.at(Task::SymptomaticBreath);
    bundle.cough_validation_accuracy = val_acc.at(Task::AsymptomaticCough);
    bundle.breath_validation_accuracy = val_acc.at(Task::SymptomaticBreath);
    bundle.best_cough_index = best_index(bundle.cough_validation_accuracy);
    bundle.validate();

    std::vector<const SubjectRecord*> test;
    for (const auto& id : folds[f].test_ids) test.push_back(&dataset.find(id));
    for (Task task : tasks) fold.blocks.push_back(evaluate_block(task, raw(nets.at(task)), &bundle, test, cache));
    evaluate_screening(fold, bundle, test, cache);
    report.per_fold.push_back(std::move(fold));
  }
  fill_means(report);
  log_line(options.log, "cross-validation finished in " + std::to_string(seconds_since(t0)) + " s");
  return report;
}

StoredBundle train_bundle(const Dataset& dataset, const BundleOptions& options) {
  options.training.validate();
  const auto [train_ids, validation_ids] = stratified_holdout(dataset, options.validation_fraction, options.seed);
  log_line(options.log, "holdout: " + std::to_string(train_ids.size()) + " train / " + std::to_string(validation_ids.size()) +
                            " validation subjects");
  const ImageCache cache = compute_images(dataset, options.features, options.threads);

  std::vector<TaskData> data(kPrimaryTasks.size());
  parallel_for(data.size(), options.threads, [&](std::size_t t) {
    data[t] = prepare_task(kPrimaryTasks[t], dataset, cache, train_ids, validation_ids, options.balance_target,
                           options.balance_overrides, options.features, mix_seed(options.seed, 0x3000 + t));
  });
  std::vector<TrainJob> jobs;
  for (std::size_t t = 0; t < data.size(); ++t)
    for (std::size_t a = 0; a < 3; ++a)
      jobs.push_back({&data[t], nn::kArchitectures[a], mix_seed(options.seed, 0x4000 + 4 * t + a),
                      std::string(pipeline_name(kPrimaryTasks[t])) + "/" +
                          std::string(to_string(sound_of(kPrimaryTasks[t])))});
  auto models = run_training(jobs, options.training, square_size(options.features), options.threads, options.log);

  StoredBundle bundle;
  bundle.features = options.features;
  for (std::size_t a = 0; a < 3; ++a) {
    bundle.cough[a] = models[a].network;
    bundle.cough_validation_accuracy[a] = models[a].best_validation_accuracy;
    bundle.breath[a] = models[3 + a].network;
    bundle.breath_validation_accuracy[a] = models[3 + a].best_validation_accuracy;
  }
  bundle.best_cough_index = best_index(bundle.cough_validation_accuracy);
  return bundle;
}

CvReport evaluate_bundle(const StoredBundle& stored, const Dataset& dataset, int threads) {
  const ImageCache cache = compute_images(dataset, stored.features, threads);
  const ModelBundle bundle = stored.classifiers();
  std::vector<const SubjectRecord*> subjects;
  for (const auto& r : dataset.records) subjects.push_back(&r);
  FoldReport fold;
  fold.blocks.push_back(evaluate_block(Task::AsymptomaticCough, raw(bundle.cough_models), &bundle, subjects, cache));
  fold.blocks.push_back(evaluate_block(Task::SymptomaticBreath, raw(bundle.breath_models), &bundle, subjects, cache));
  evaluate_screening(fold, bundle, subjects, cache);
  CvReport report;
  report.folds = 1;
  report.per_fold.push_back(std::move(fold));
  fill_means(report);
  return report;
}

// ---------------------------------------------------------------------------------------------
// Serialization

namespace {

ordered_json metric_json(const MetricSet& m) {
  auto v = [](const std::optional<double>& x) { return x ? ordered_json(*x) : ordered_json(nullptr); };
  return {{"accuracy", v(m.accuracy)},
          {"precision", v(m.precision)},
          {"sensitivity", v(m.sensitivity)},
          {"f1", v(m.f1)},
          {"specificity", v(m.specificity)}};
}

ordered_json row_json(const ReportRow& r) {
  return {{"model", r.model},
          {"counts", {{"tp", r.counts.tp}, {"tn", r.counts.tn}, {"fp", r.counts.fp}, {"fn", r.counts.fn}}},
          {"covid", metric_json(r.metrics.covid)},
          {"healthy", metric_json(r.metrics.healthy)},
          {"overall", metric_json(r.metrics.overall)}};
}

ordered_json blocks_json(const std::vector<ReportBlock>& blocks) {
  ordered_json out = ordered_json::array();
  for (const auto& b : blocks) {
    ordered_json rows = ordered_json::array();
    for (const auto& r : b.rows) rows.push_back(row_json(r));
    out.push_back({{"pipeline", b.pipeline}, {"sound", b.sound}, {"rows", std::move(rows)}});
  }
  return out;
}

std::string pct(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * *v);
  return buf;
}

void render_row(std::ostringstream& os, const ReportRow& row) {
  const std::pair<const char*, const MetricSet*> lines[] = {
      {"covid", &row.metrics.covid}, {"healthy", &row.metrics.healthy}, {"overall", &row.metrics.overall}};
  bool first = true;
  for (const auto& [name, m] : lines) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "  %-10s %-8s %10s %10s %12s %10s %12s\n", first ? row.model.c_str() : "", name,
                  pct(m->accuracy).c_str(), pct(m->precision).c_str(), pct(m->sensitivity).c_str(),
                  pct(m->f1).c_str(), pct(m->specificity).c_str());
    os << buf;
    first = false;
  }
}

void render_header(std::ostringstream& os) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "  %-10s %-8s %10s %10s %12s %10s %12s\n", "model", "class", "accuracy",
                "precision", "sensitivity", "f1", "specificity");
  os << buf;
}

}  // namespace

std::string to_json(const CvReport& report) {
  ordered_json doc;
  doc["folds"] = report.folds;
  doc["seed"] = report.seed;
  doc["mean"] = {{"blocks", blocks_json(report.mean_blocks)}, {"screening", row_json(report.mean_screening)}};
  ordered_json folds = ordered_json::array();
  for (const auto& f : report.per_fold) {
    ordered_json models = ordered_json::array();
    for (const auto& m : f.models)
      models.push_back({{"pipeline", m.pipeline},
                        {"sound", m.sound},
                        {"arch", m.arch},
                        {"train_images", m.train_images},
                        {"validation_images", m.validation_images},
                        {"epochs_run", m.epochs_run},
                        {"epoch_of_best", m.epoch_of_best},
                        {"validation_accuracy", m.validation_accuracy},
                        {"validation_loss", m.validation_loss}});
    ordered_json counts = ordered_json::object();
    for (const auto& [k, v] : f.pipeline_counts) counts[k] = v;
    folds.push_back({{"fold", f.fold},
                     {"test_subjects", f.test_subjects},
                     {"models", std::move(models)},
                     {"blocks", blocks_json(f.blocks)},
                     {"screening", row_json(f.screening)},
                     {"pipeline_counts", std::move(counts)}});
  }
  doc["per_fold"] = std::move(folds);
  return doc.dump(2) + "\n";
}

std::string render_text(const CvReport& report) {
  std::ostringstream os;
  const std::string scope =
      report.folds > 1 ? "mean over " + std::to_string(report.folds) + " folds" : "single evaluation";
  for (const auto& b : report.mean_blocks) {
    const auto& ens = b.rows.back().counts;
    os << b.pipeline << " pipeline, " << b.sound << " (" << scope << "; " << ens.tp + ens.fn << " covid / "
       << ens.tn + ens.fp << " healthy test samples in total)\n";
    render_header(os);
    for (const auto& r : b.rows) render_row(os, r);
    os << '\n';
  }
  os << "cascade screening (" << scope << ")\n";
  render_header(os);
  render_row(os, report.mean_screening);
  return os.str();
}

}  // namespace qcs
