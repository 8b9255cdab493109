#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "qcs/corpus.hpp"
#include "qcs/error.hpp"

namespace qcs {

namespace {

// Two-pole resonator driven by white noise, rescaled to unit RMS.
Eigen::VectorXd band_noise(Eigen::Index n, double center_hz, double bandwidth_hz, double rate,
                           std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double r = std::exp(-M_PI * bandwidth_hz / rate);
  const double a1 = 2.0 * r * std::cos(2.0 * M_PI * center_hz / rate);
  const double a2 = -r * r;
  Eigen::VectorXd y(n);
  double y1 = 0.0, y2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = gauss(rng) + a1 * y1 + a2 * y2;
    y[i] = v;
    y2 = y1;
    y1 = v;
  }
  const double rms = std::sqrt(y.squaredNorm() / static_cast<double>(n));
  if (rms > 0.0) y /= rms;
  return y;
}

// Low-passed white noise: the ambient "breath-like" floor shared by all recordings.
Eigen::VectorXd floor_noise(Eigen::Index n, double level_db, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd y(n);
  double state = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    state = 0.95 * state + gauss(rng);
    y[i] = state;
  }
  const double rms = std::sqrt(y.squaredNorm() / static_cast<double>(n));
  if (rms > 0.0) y *= std::pow(10.0, level_db / 20.0) / rms;
  return y;
}

Eigen::VectorXd cough_signal(const SynthSpec& spec, Stratum stratum, std::mt19937_64& rng) {
  const double rate = spec.sample_rate;
  const auto n = static_cast<Eigen::Index>(std::llround(spec.clip_duration_s * rate));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double f0 = spec.center(stratum.label, SoundKind::Cough) * (1.0 + 0.01 * (2.0 * unit(rng) - 1.0));

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  const int bursts = stratum.symptomatic ? 3 : 2;
  const double slot = spec.clip_duration_s / bursts;
  for (int b = 0; b < bursts; ++b) {
    const double length_s = 0.6 + 0.3 * unit(rng);
    const double onset_s = b * slot + (slot - length_s) * (0.1 + 0.8 * unit(rng));
    const auto start = static_cast<Eigen::Index>(onset_s * rate);
    const auto len = std::min<Eigen::Index>(static_cast<Eigen::Index>(length_s * rate), n - start);
    if (len <= 0) continue;

    Eigen::VectorXd burst = Eigen::VectorXd::Zero(len);
    for (int h = 1; h <= 3; ++h) {
      const double amp = std::pow(0.5, h - 1);
      const double fh = h * f0;
      const double phase = 2.0 * M_PI * unit(rng);
      const Eigen::VectorXd noise = band_noise(len, fh, 0.15 * fh, rate, rng);
      for (Eigen::Index i = 0; i < len; ++i)
        burst[i] += amp * (std::sin(2.0 * M_PI * fh * static_cast<double>(i) / rate + phase) + 0.6 * noise[i]);
    }
    // 10 ms attack, exponential decay.
    const double attack = 0.010 * rate;
    const double decay = 0.60 * static_cast<double>(len);
    for (Eigen::Index i = 0; i < len; ++i) {
      const double t = static_cast<double>(i);
      burst[i] *= std::min(1.0, t / attack) * std::exp(-t / decay);
    }
    x.segment(start, len) += burst;
  }
  return x;
}

Eigen::VectorXd breath_signal(const SynthSpec& spec, Stratum stratum, std::mt19937_64& rng) {
  const double rate = spec.sample_rate;
  const auto n = static_cast<Eigen::Index>(std::llround(spec.clip_duration_s * rate));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double fc = spec.center(stratum.label, SoundKind::Breath) * (1.0 + 0.01 * (2.0 * unit(rng) - 1.0));
  const double period_s = 1.5 + unit(rng);
  const double phase = 2.0 * M_PI * unit(rng);
  const double tone_phase = 2.0 * M_PI * unit(rng);

  const Eigen::VectorXd noise = band_noise(n, fc, 0.15 * fc, rate, rng);
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double envelope = 0.5 * (1.0 - std::cos(2.0 * M_PI * t / period_s + phase));
    x[i] = envelope * (0.7 * std::sin(2.0 * M_PI * fc * t + tone_phase) + 0.5 * noise[i]);
  }
  return x;
}

std::string subject_id(Stratum s, int ordinal) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s-%s-%03d", s.label == Label::Covid ? "covid" : "healthy",
                s.symptomatic ? "sym" : "asym", ordinal);
  return buf;
}

}  // namespace

SynthSpec::SynthSpec() { with_separation(band_separation); }

SynthSpec& SynthSpec::with_separation(double separation_hz) {
  band_separation = separation_hz;
  for (std::size_t kind = 0; kind < 2; ++kind) {
    class_band_centers[static_cast<std::size_t>(Label::Covid)][kind] = kSynthBaseHz[kind] - separation_hz / 2;
    class_band_centers[static_cast<std::size_t>(Label::Healthy)][kind] = kSynthBaseHz[kind] + separation_hz / 2;
  }
  return *this;
}

void SynthSpec::validate() const {
  require(band_separation > 0.0, "band_separation must be positive");
  require(clip_duration_s >= 3.0, "clip_duration_s must be at least 3 s");
  require(sample_rate >= 8000.0, "sample_rate must be at least 8 kHz");
  for (int count : subjects_per_stratum) require(count >= 1, "every stratum needs at least one subject");
  for (std::size_t kind = 0; kind < 2; ++kind) {
    const double covid = class_band_centers[0][kind];
    const double healthy = class_band_centers[1][kind];
    require(covid > 0.0 && healthy > 0.0, "band centres must be positive");
    require(3.0 * std::max(covid, healthy) < 0.45 * sample_rate, "band centres too close to Nyquist");
    require(std::abs(std::abs(healthy - covid) - band_separation) < 1e-6,
            "class_band_centers disagree with band_separation (use with_separation)");
  }
}

AudioClip synthesize_clip(const SynthSpec& spec, Stratum stratum, SoundKind kind, int ordinal) {
  spec.validate();
  const std::uint64_t stream =
      (static_cast<std::uint64_t>(stratum.index()) << 40) | (static_cast<std::uint64_t>(ordinal) << 1) |
      static_cast<std::uint64_t>(kind);
  std::mt19937_64 rng(mix_seed(spec.seed, stream));

  Eigen::VectorXd x = kind == SoundKind::Cough ? cough_signal(spec, stratum, rng) : breath_signal(spec, stratum, rng);
  const double peak = x.cwiseAbs().maxCoeff();
  if (peak > 0.0) x *= 0.8 / peak;
  x += floor_noise(x.size(), spec.noise_floor_db, rng);

  AudioClip clip;
  clip.sample_rate = spec.sample_rate;
  clip.samples = x.cwiseMax(-1.0).cwiseMin(1.0);
  return clip;
}

Dataset generate_synthetic_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "audio", ec);
  if (ec) fail(ErrorKind::IoError, "cannot create " + (out_dir / "audio").string() + ": " + ec.message());

  Dataset dataset;
  dataset.provenance = Provenance::Synthetic;
  for (const Stratum& s : kStrata) {
    for (int i = 0; i < spec.subjects_per_stratum[static_cast<std::size_t>(s.index())]; ++i) {
      SubjectRecord rec;
      rec.subject_id = subject_id(s, i);
      rec.label = s.label;
      rec.symptomatic = s.symptomatic;
      rec.cough_path = out_dir / "audio" / (rec.subject_id + "-cough.wav");
      rec.breath_path = out_dir / "audio" / (rec.subject_id + "-breath.wav");
      write_wav(rec.cough_path, synthesize_clip(spec, s, SoundKind::Cough, i));
      write_wav(rec.breath_path, synthesize_clip(spec, s, SoundKind::Breath, i));
      dataset.records.push_back(std::move(rec));
    }
  }
  write_manifest(out_dir / "manifest.csv", dataset);
  return dataset;
}

}  // namespace qcs
