// Acceptance gate: one PASS/FAIL line per criterion; exit status 1 if any criterion fails.
// `acceptance 1 4 9` runs a subset.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qcs/augment.hpp"
#include "qcs/bundle.hpp"
#include "qcs/cv.hpp"
#include "qcs/eval.hpp"
#include "qcs/nn/adam.hpp"
#include "qcs/nn/schedule.hpp"
#include "qcs/pipeline.hpp"
#include "qcs/service.hpp"
#include "qcs/spectrogram.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "support/service_fixture.hpp"
#include "support/temp_dir.hpp"

#include <httplib.h>  // after Eigen: <resolv.h> defines `_res`

namespace {

using namespace qcs;
using Clock = std::chrono::steady_clock;
using nlohmann::json;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1 -------------------------------------------------------------------------------------------

Outcome stft_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> length(2048, 8192);
  std::normal_distribution<double> g(0.0, 0.3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int clip_index = 0; clip_index < 50; ++clip_index) {
    AudioClip clip;
    clip.sample_rate = 44100;
    clip.samples.resize(length(rng));
    const double f = 50 + 15000 * u(rng);
    for (Eigen::Index i = 0; i < clip.samples.size(); ++i)
      clip.samples[i] = 0.5 * std::sin(2 * M_PI * f * static_cast<double>(i) / 44100) + g(rng);
    const Eigen::MatrixXd fast = power_spectrogram(stft(clip));
    const std::vector<double> x(clip.samples.data(), clip.samples.data() + clip.samples.size());
    const auto slow = testing::naive_power_spectrogram(x, 2048, 512, 2048);
    if (fast.rows() != slow.bins || fast.cols() != slow.frames) return {false, "shape mismatch"};
    double diff = 0.0, peak = 0.0;
    for (int t = 0; t < slow.frames; ++t)
      for (int k = 0; k < slow.bins; ++k) {
        diff = std::max(diff, std::abs(fast(k, t) - slow.at(k, t)));
        peak = std::max(peak, std::abs(slow.at(k, t)));
      }
    worst = std::max(worst, diff / peak);
  }
  const double elapsed = seconds_since(t0);
  return {worst < 1e-9 && elapsed < 30.0,
          fmt("50 clips, max relative error %.2e (limit 1e-9), %.1f s (limit 30 s)", worst, elapsed)};
}

// 2 -------------------------------------------------------------------------------------------

Outcome metric_formulas() {
  long checked = 0, failures = 0;
  auto same = [](std::optional<double> a, std::optional<double> b) { return a == b; };
  for (long tp = 0; tp <= 20; ++tp)
    for (long tn = 0; tn <= 20; ++tn)
      for (long fp = 0; fp <= 20; ++fp)
        for (long fn = 0; fn <= 20; ++fn) {
          const ConfusionCounts c{tp, tn, fp, fn};
          if (c.total() == 0) continue;
          ++checked;
          const auto d = [](long num, long den) -> std::optional<double> {
            if (den == 0) return std::nullopt;
            return static_cast<double>(num) / static_cast<double>(den);
          };
          const auto acc = d(tp + tn, tp + tn + fp + fn), prec = d(tp, tp + fp), sens = d(tp, tp + fn),
                     spec = d(tn, tn + fp);
          std::optional<double> f1;
          if (prec && sens && *prec + *sens > 0) f1 = 2 * *prec * *sens / (*prec + *sens);
          const MetricSet m = metrics(c), s = metrics(c.swapped());
          const bool ok = same(m.accuracy, acc) && same(m.precision, prec) && same(m.sensitivity, sens) &&
                          same(m.specificity, spec) && same(m.f1, f1) && same(m.sensitivity, s.specificity) &&
                          same(m.specificity, s.sensitivity);
          failures += ok ? 0 : 1;
        }
  return {failures == 0, fmt("%ld count vectors in [0,20]^4, %ld mismatches", checked, failures)};
}

// 3 -------------------------------------------------------------------------------------------

Outcome augmentation_counts() {
  FeatureConfig tiny;
  tiny.audio = {8000, 0.1, 0.95};
  tiny.stft = {128, 32, 128, WindowKind::Hann, true};
  tiny.image = {8, 8};
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.2);
  auto clips = [&](const std::string& prefix, int n, Label label) {
    std::vector<LabeledClip> out;
    for (int i = 0; i < n; ++i) {
      AudioClip c;
      c.sample_rate = 8000;
      c.samples.resize(800);
      for (auto& x : c.samples) x = std::clamp(g(rng), -1.0, 1.0);
      out.push_back({prefix + std::to_string(i), c, label});
    }
    return out;
  };
  struct Row {
    int healthy, healthy_mult, covid, covid_mult, target;
    std::map<std::string, int> overrides;
  };
  std::string detail;
  bool pass = true;
  for (const Row& row : {Row{229, 11, 102, 25, 2500, {}}, Row{190, 13, 39, 62, 2450, {{"covid", 62}}}}) {
    auto samples = clips("h", row.healthy, Label::Healthy);
    const auto covid = clips("c", row.covid, Label::Covid);
    samples.insert(samples.end(), covid.begin(), covid.end());
    const BalancePlan plan = compute_balance_plan({{"healthy", row.healthy}, {"covid", row.covid}}, row.target,
                                                  row.overrides);
    const auto images = expand_training_set(samples, plan, 5, tiny);
    long h = 0, c = 0;
    for (const auto& img : images) (img.label == Label::Healthy ? h : c)++;
    const long want_h = static_cast<long>(row.healthy) * row.healthy_mult;
    const long want_c = static_cast<long>(row.covid) * row.covid_mult;
    pass = pass && h == want_h && c == want_c && plan.at("healthy").target_count == want_h &&
           plan.at("covid").target_count == want_c;
    detail += fmt("%dx%d=%ld, %dx%d=%ld; ", row.healthy, row.healthy_mult, h, row.covid, row.covid_mult, c);
  }
  return {pass, detail + "expected 2519, 2550, 2470, 2418"};
}

// 4 -------------------------------------------------------------------------------------------

Outcome overall_row() {
  MetricSet covid, healthy;
  covid.sensitivity = 0.9149;
  healthy.sensitivity = 0.9780;
  const double v = *overall({{Label::Covid, covid}, {Label::Healthy, healthy}},
                            {{Label::Covid, 141}, {Label::Healthy, 318}}).sensitivity;
  return {std::abs(v - 0.9586) <= 0.0005, fmt("support-weighted sensitivity %.5f (target 0.9586 +- 0.0005)", v)};
}

// 5 -------------------------------------------------------------------------------------------

Outcome gradients() {
  double layers = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    layers = std::max({layers, testing::conv_gradient_error(s), testing::relu_gradient_error(s),
                       testing::maxpool_gradient_error(s), testing::gap_gradient_error(s),
                       testing::dense_gradient_error(s), testing::softmax_ce_gradient_error(s)});
  }
  double nets = 0.0;
  int probed = 0, skipped = 0;
  for (nn::ArchId id : nn::kArchitectures)
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto r = testing::architecture_gradient_check(id, s, 32, 12);
      nets = std::max(nets, r.max_error);
      probed += r.probed;
      skipped += r.skipped;
    }
  return {layers < 1e-3 && nets < 1e-3 && skipped * 4 < probed,
          fmt("layers max rel err %.2e, architectures %.2e over %d entries (%d kink crossings skipped), 10 seeds",
              layers, nets, probed, skipped)};
}

// 6 -------------------------------------------------------------------------------------------

Outcome optimizer_and_schedule() {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  double adam_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    nn::TensorList<double> params{nn::Tensor<double>({4})};
    std::vector<testing::ScalarAdam> oracle(4);
    std::vector<double> theta(4);
    for (int i = 0; i < 4; ++i) theta[static_cast<std::size_t>(i)] = params[0].data[i] = g(rng);
    nn::AdamState<double> state;
    for (long t = 1; t <= 5; ++t) {
      nn::TensorList<double> grads{nn::Tensor<double>({4})};
      for (int i = 0; i < 4; ++i) grads[0].data[i] = g(rng);
      nn::adam_step(params, grads, state, nn::AdamParams{}, 1e-4, t);
      for (std::size_t i = 0; i < 4; ++i) {
        theta[i] = oracle[i].step(theta[i], grads[0].data[static_cast<Eigen::Index>(i)]);
        adam_err = std::max(adam_err, std::abs(theta[i] - params[0].data[static_cast<Eigen::Index>(i)]));
      }
    }
  }

  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> losses(40);
    double level = 1.0;
    for (auto& l : losses) {
      level *= 0.9 + 0.2 * u(rng);
      l = u(rng) < 0.15 ? level : level * (1 + 0.05 * u(rng));
    }
    const auto ref = testing::simulate_schedule(losses, 1e-4, 5, 3, 8, 1e-6, 40);
    nn::PlateauSchedule s(nn::ScheduleConfig{});
    std::vector<double> lr_used;
    std::vector<bool> improved;
    for (double l : losses) {
      lr_used.push_back(s.learning_rate());
      const auto d = s.observe(l);
      improved.push_back(d.improved);
      if (d.stop) break;
    }
    if (lr_used != ref.lr_used || improved != ref.improved || s.best_epoch() != ref.best_epoch) ++mismatches;
  }
  return {adam_err <= 1e-12 && mismatches == 0,
          fmt("Adam max deviation %.1e over 100x5 steps (limit 1e-12); schedule mismatches %d / 1000", adam_err,
              mismatches)};
}

// 7 -------------------------------------------------------------------------------------------

class Fixed final : public Classifier {
 public:
  explicit Fixed(Probabilities p) : p_(p) {}
  Probabilities predict(const SpectroImage&) const override {
    ++calls;
    return p_;
  }
  mutable std::atomic<int> calls{0};

 private:
  Probabilities p_;
};

Outcome cascade_truth_table() {
  SpectroImage img;
  img.pixels = Eigen::MatrixXd::Zero(128, 128);
  struct Case {
    bool symptomatic;
    Label first, second;  // symptomatic-classifier label, asymptomatic-classifier label
    Verdict verdict;
    PipelineUsed pipeline;
    std::size_t stages;
  };
  using L = Label;
  const Case cases[] = {
      {false, L::Covid, L::Covid, Verdict::CovidSuspected, PipelineUsed::Asymptomatic, 1},
      {false, L::Covid, L::Healthy, Verdict::Healthy, PipelineUsed::Asymptomatic, 1},
      {false, L::Healthy, L::Covid, Verdict::CovidSuspected, PipelineUsed::Asymptomatic, 1},
      {false, L::Healthy, L::Healthy, Verdict::Healthy, PipelineUsed::Asymptomatic, 1},
      {true, L::Healthy, L::Covid, Verdict::Healthy, PipelineUsed::Symptomatic, 1},
      {true, L::Healthy, L::Healthy, Verdict::Healthy, PipelineUsed::Symptomatic, 1},
      {true, L::Covid, L::Covid, Verdict::CovidSuspected, PipelineUsed::SymptomaticThenAsymptomatic, 2},
      {true, L::Covid, L::Healthy, Verdict::Healthy, PipelineUsed::SymptomaticThenAsymptomatic, 2},
  };
  int failures = 0;
  std::set<std::tuple<bool, int, int>> traces;
  for (const Case& c : cases) {
    auto probs = [](L l) { return l == L::Covid ? Probabilities{1, 0} : Probabilities{0, 1}; };
    ModelBundle b;
    std::array<std::shared_ptr<Fixed>, 3> breath;
    for (std::size_t i = 0; i < 3; ++i) {
      b.cough_models[i] = std::make_shared<Fixed>(probs(c.second));
      breath[i] = std::make_shared<Fixed>(probs(c.first));
      b.breath_models[i] = breath[i];
    }
    const ScreeningResult r = screen(c.symptomatic, &img, img, b);
    const int breath_calls = breath[0]->calls + breath[1]->calls + breath[2]->calls;
    bool ok = r.verdict == c.verdict && r.pipeline_used == c.pipeline && r.stage_trace.size() == c.stages;
    ok = ok && (r.stage_trace.back().prediction.label == L::Covid) == (c.verdict == Verdict::CovidSuspected);
    ok = ok && r.stage_trace.front().name == (c.symptomatic ? kSymptomaticStage : kAsymptomaticStage);
    if (c.stages == 2) ok = ok && r.stage_trace[1].name == kAsymptomaticStage;
    if (!c.symptomatic) ok = ok && breath_calls == 0;
    failures += ok ? 0 : 1;
    traces.emplace(c.symptomatic, static_cast<int>(r.stage_trace.front().prediction.label),
                   c.stages == 2 ? static_cast<int>(r.stage_trace[1].prediction.label) : -1);
  }
  return {failures == 0, fmt("%zu stub configurations, %zu distinct reachable traces, %d wrong", std::size(cases),
                             traces.size(), failures)};
}

// 8 -------------------------------------------------------------------------------------------

Outcome end_to_end() {
  testing::TempDir dir;
  const SynthSpec spec;
  const auto t0 = Clock::now();
  const Dataset dataset = generate_synthetic_corpus(spec, dir.path());
  CvOptions options;
  options.log = [](const std::string& line) { std::cerr << "  " << line << std::endl; };
  const CvReport first = run_cv(dataset, options);
  const double elapsed = seconds_since(t0);
  std::cout << render_text(first) << std::flush;

  std::string detail;
  bool pass = elapsed <= 20 * 60;
  for (const ReportBlock& block : first.mean_blocks) {
    const ReportRow& row = block.rows.back();
    const double acc = row.metrics.overall.accuracy.value_or(0);
    const double sc = row.metrics.covid.sensitivity.value_or(0), sh = row.metrics.healthy.sensitivity.value_or(0);
    pass = pass && acc >= 0.95 && sc >= 0.90 && sh >= 0.90;
    detail += fmt("%s/%s ensemble acc %.4f, sens covid %.4f healthy %.4f; ", block.pipeline.c_str(),
                  block.sound.c_str(), acc, sc, sh);
  }
  detail += fmt("%.0f s; ", elapsed);

  // Same seed, different worker count: report bytes must not change.
  CvOptions again = options;
  again.threads = 2;
  again.log = {};
  const bool identical = to_json(run_cv(dataset, again)) == to_json(first);
  return {pass && identical, detail + (identical ? "rerun byte-identical" : "rerun DIFFERS")};
}

// 9 -------------------------------------------------------------------------------------------

Outcome service_round_trip() {
  testing::TempDir dir;
  save_bundle(dir.path() / "bundle", testing::seeded_bundle(9));
  ServiceConfig cfg;
  cfg.storage_dir = dir.path() / "store";
  cfg.threads = 16;
  const ScreeningService service(cfg, load_bundle(dir.path() / "bundle"));
  ServiceConfig empty_cfg = cfg;
  empty_cfg.storage_dir = dir.path() / "store-empty";
  const ScreeningService unloaded(empty_cfg, std::nullopt);
  testing::RunningServer server(service), server_unloaded(unloaded);

  const std::string cough = testing::tone_wav(6.0, 1400.0), breath = testing::tone_wav(6.0, 600.0, 44100.0, 2);
  auto items = [&](const std::string& meta, std::optional<std::string> c, std::optional<std::string> b) {
    httplib::MultipartFormDataItems out{{"metadata", meta, "", "application/json"}};
    if (c) out.push_back({"cough", *c, "cough.wav", "audio/wav"});
    if (b) out.push_back({"breath", *b, "breath.wav", "audio/wav"});
    return out;
  };
  std::string detail;
  bool pass = true;

  httplib::Client client("127.0.0.1", server.port());
  client.set_read_timeout(60, 0);
  const auto t0 = Clock::now();
  auto post = client.Post("/api/v1/submissions", items(R"({"symptoms":["cough"]})", cough, breath));
  const double latency = seconds_since(t0);
  if (!post || post->status != 200) return {false, "valid submission not accepted"};
  const json body = json::parse(post->body);
  auto get = client.Get("/api/v1/submissions/" + body.at("submission_id").get<std::string>());
  const bool same = get && get->status == 200 && json::parse(get->body).at("verdict") == body.at("verdict");
  pass = pass && latency <= 3.0 && same;
  detail += fmt("POST 200 in %.2f s (limit 3 s), GET verdict %s; ", latency, same ? "identical" : "DIFFERS");

  std::vector<std::future<std::string>> futures;
  for (int i = 0; i < 100; ++i)
    futures.push_back(std::async(std::launch::async, [&, i] {
      httplib::Client c("127.0.0.1", server.port());
      c.set_read_timeout(300, 0);
      c.set_connection_timeout(60, 0);
      auto r = c.Post("/api/v1/submissions", items(R"({"symptoms":["none"]})", testing::tone_wav(3.0, 900.0 + i), {}));
      return r && r->status == 200 ? json::parse(r->body).at("submission_id").get<std::string>() : std::string();
    }));
  std::set<std::string> ids;
  int retrievable = 0;
  for (auto& f : futures) {
    const std::string id = f.get();
    if (id.empty()) continue;
    ids.insert(id);
    auto r = client.Get("/api/v1/submissions/" + id);
    retrievable += r && r->status == 200 ? 1 : 0;
  }
  pass = pass && ids.size() == 100 && retrievable == 100;
  detail += fmt("concurrent: %zu distinct ids, %d retrievable; ", ids.size(), retrievable);

  std::map<int, int> codes;
  auto status = [](const httplib::Result& r) { return r ? r->status : -1; };
  codes[400] = status(client.Post("/api/v1/submissions", items(R"({"symptoms":["cough"]})", cough, {})));
  codes[413] = status(client.Post("/api/v1/submissions",
                                  items(R"({"symptoms":[]})", std::string(cfg.max_upload_bytes + 1, 'a'), {})));
  codes[422] = status(client.Post("/api/v1/submissions", items(R"({"symptoms":[]})", testing::silent_wav(), {})));
  httplib::Client cold("127.0.0.1", server_unloaded.port());
  codes[503] = status(cold.Post("/api/v1/submissions", items(R"({"symptoms":[]})", cough, {})));
  for (const auto& [want, got] : codes) {
    pass = pass && want == got;
    detail += fmt("%d->%d ", want, got);
  }
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"STFT matches direct DFT oracle", stft_oracle},
      {"metric formulas and class-swap duality", metric_formulas},
      {"training-set expansion counts", augmentation_counts},
      {"support-weighted overall row", overall_row},
      {"analytic vs finite-difference gradients", gradients},
      {"Adam and plateau schedule conformance", optimizer_and_schedule},
      {"cascade truth table", cascade_truth_table},
      {"end-to-end synthetic cross-validation", end_to_end},
      {"service round trip over HTTP", service_round_trip},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.contains(number)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << "criterion " << number << ": " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << " ("
              << o.detail << ")" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
