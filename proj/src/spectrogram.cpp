#include "qcs/spectrogram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "qcs/error.hpp"

namespace qcs {

namespace {

// numpy "reflect" padding: mirror about the edge samples without repeating them.
Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n) {
  if (n == 1) return 0;
  const Eigen::Index period = 2 * (n - 1);
  Eigen::Index m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

}  // namespace

void SpectrogramConfig::validate() const {
  if (!(hop_length > 0 && hop_length <= win_length && win_length <= n_fft))
    fail(ErrorKind::ConfigInvalid, "require 0 < hop_length <= win_length <= n_fft");
  if (n_fft < 2) fail(ErrorKind::ConfigInvalid, "n_fft must be at least 2");
}

Eigen::VectorXd hann_window(int win_length, int n_fft) {
  Eigen::VectorXd window = Eigen::VectorXd::Zero(n_fft);
  const int offset = (n_fft - win_length) / 2;
  for (int n = 0; n < win_length; ++n)
    window[offset + n] = 0.5 - 0.5 * std::cos(2.0 * M_PI * n / static_cast<double>(win_length));
  return window;
}

Eigen::Index frame_count(Eigen::Index length, const SpectrogramConfig& cfg) {
  if (cfg.center) return length / cfg.hop_length + 1;
  if (length < cfg.n_fft) return 0;
  return (length - cfg.n_fft) / cfg.hop_length + 1;
}

ComplexFrames stft(const AudioClip& clip, const SpectrogramConfig& cfg) {
  cfg.validate();
  const Eigen::Index len = clip.samples.size();
  if (len == 0) fail(ErrorKind::ConfigInvalid, "empty signal");
  const Eigen::Index frames = frame_count(len, cfg);
  if (frames <= 0) fail(ErrorKind::ConfigInvalid, "signal shorter than n_fft without centering");

  const int n_fft = cfg.n_fft;
  const Eigen::VectorXd window = hann_window(cfg.win_length, n_fft);
  const Eigen::Index shift = cfg.center ? n_fft / 2 : 0;

  ComplexFrames out;
  out.values.resize(cfg.bins(), frames);
  out.bin_hz = clip.sample_rate / n_fft;
  out.frame_s = cfg.hop_length / clip.sample_rate;

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> segment(static_cast<std::size_t>(n_fft));
  std::vector<std::complex<double>> spectrum;
  for (Eigen::Index t = 0; t < frames; ++t) {
    const Eigen::Index start = t * cfg.hop_length - shift;
    for (int n = 0; n < n_fft; ++n) {
      const Eigen::Index i = start + n;
      const double x = (i >= 0 && i < len) ? clip.samples[i]
                       : cfg.center         ? clip.samples[reflect_index(i, len)]
                                            : 0.0;
      segment[static_cast<std::size_t>(n)] = x * window[n];
    }
    fft.fwd(spectrum, segment);
    for (int k = 0; k < cfg.bins(); ++k) out.values(k, t) = spectrum[static_cast<std::size_t>(k)];
  }
  return out;
}

Eigen::MatrixXd power_spectrogram(const ComplexFrames& frames) { return frames.values.cwiseAbs2(); }

Eigen::MatrixXd resize_bilinear(const Eigen::Ref<const Eigen::MatrixXd>& src, int rows, int cols) {
  require(rows > 0 && cols > 0 && src.size() > 0, "resize dimensions must be positive");
  if (src.rows() == rows && src.cols() == cols) return src;

  auto axis = [](Eigen::Index in, int out) {
    struct Tap {
      Eigen::Index lo, hi;
      double frac;
    };
    std::vector<Tap> taps(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int d = 0; d < out; ++d) {
      const double s = std::clamp((d + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
      const auto lo = static_cast<Eigen::Index>(std::floor(s));
      const Eigen::Index hi = std::min<Eigen::Index>(lo + 1, in - 1);
      taps[static_cast<std::size_t>(d)] = {lo, hi, s - static_cast<double>(lo)};
    }
    return taps;
  };
  const auto row_taps = axis(src.rows(), rows);
  const auto col_taps = axis(src.cols(), cols);

  Eigen::MatrixXd out(rows, cols);
  for (int c = 0; c < cols; ++c) {
    const auto& ct = col_taps[static_cast<std::size_t>(c)];
    for (int r = 0; r < rows; ++r) {
      const auto& rt = row_taps[static_cast<std::size_t>(r)];
      const double top = (1.0 - ct.frac) * src(rt.lo, ct.lo) + ct.frac * src(rt.lo, ct.hi);
      const double bottom = (1.0 - ct.frac) * src(rt.hi, ct.lo) + ct.frac * src(rt.hi, ct.hi);
      out(r, c) = (1.0 - rt.frac) * top + rt.frac * bottom;
    }
  }
  return out;
}

SpectroImage to_image(const Eigen::Ref<const Eigen::MatrixXd>& power, double floor_db, ImageSize size) {
  require(floor_db < 0.0, "floor_db must be negative");
  require((power.array() >= 0.0).all(), "power matrix must be nonnegative");

  const double peak = power.maxCoeff();
  Eigen::MatrixXd unit(power.rows(), power.cols());
  if (peak <= 0.0) {
    unit.setZero();
  } else {
    unit = power.unaryExpr([&](double p) {
      const double db = p > 0.0 ? 10.0 * std::log10(p / peak) : floor_db;
      return (std::clamp(db, floor_db, 0.0) - floor_db) / -floor_db;
    });
  }
  SpectroImage image;
  image.floor_db = floor_db;
  image.ceil_db = 0.0;
  image.pixels = resize_bilinear(unit, size.height, size.width).cwiseMax(0.0).cwiseMin(1.0);
  return image;
}

SpectroImage clip_to_image(const AudioClip& standardized, const FeatureConfig& cfg) {
  return to_image(power_spectrogram(stft(standardized, cfg.stft)), cfg.floor_db, cfg.image);
}

SpectroImage audio_to_image(const AudioClip& raw, const FeatureConfig& cfg) {
  return clip_to_image(standardize(raw, cfg.audio), cfg);
}

void write_pgm(const std::filesystem::path& path, const SpectroImage& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot open " + path.string());
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  for (Eigen::Index r = image.height() - 1; r >= 0; --r)
    for (Eigen::Index c = 0; c < image.width(); ++c)
      out.put(static_cast<char>(std::lround(std::clamp(image.pixels(r, c), 0.0, 1.0) * 255.0)));
  if (!out) fail(ErrorKind::IoError, "write failed for " + path.string());
}

}  // namespace qcs
