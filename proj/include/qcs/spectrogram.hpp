#pragma once

#include <complex>
#include <filesystem>

#include <Eigen/Core>

#include "qcs/audio.hpp"

namespace qcs {

enum class WindowKind { Hann };

struct SpectrogramConfig {
  int n_fft = 2048;
  int hop_length = 512;
  int win_length = 2048;
  WindowKind window = WindowKind::Hann;
  bool center = true;

  /// Throws ConfigInvalid unless 0 < hop_length <= win_length <= n_fft.
  void validate() const;
  int bins() const noexcept { return n_fft / 2 + 1; }
};

/// STFT output: rows are frequency bins 0..n_fft/2, columns are frames.
struct ComplexFrames {
  Eigen::MatrixXcd values;
  double bin_hz = 0.0;
  double frame_s = 0.0;

  Eigen::Index bins() const noexcept { return values.rows(); }
  Eigen::Index frames() const noexcept { return values.cols(); }
};

struct ImageSize {
  int height = 128;
  int width = 128;
};

/// Normalized log-power image; row 0 is the lowest frequency.
struct SpectroImage {
  Eigen::MatrixXd pixels;
  double floor_db = -80.0;
  double ceil_db = 0.0;

  Eigen::Index height() const noexcept { return pixels.rows(); }
  Eigen::Index width() const noexcept { return pixels.cols(); }
};

/// Periodic Hann window of `win_length`, zero-padded symmetrically to `n_fft`.
Eigen::VectorXd hann_window(int win_length, int n_fft);

/// Number of frames produced for a signal of `length` samples.
Eigen::Index frame_count(Eigen::Index length, const SpectrogramConfig& cfg);

ComplexFrames stft(const AudioClip& clip, const SpectrogramConfig& cfg = {});

/// Elementwise |z|^2.
Eigen::MatrixXd power_spectrogram(const ComplexFrames& frames);

/// Bilinear resampling with half-pixel centers; identity when the size is unchanged.
Eigen::MatrixXd resize_bilinear(const Eigen::Ref<const Eigen::MatrixXd>& src, int rows, int cols);

/// dB relative to the matrix maximum, clamped to [floor_db, 0], mapped to [0, 1], resized.
SpectroImage to_image(const Eigen::Ref<const Eigen::MatrixXd>& power, double floor_db = -80.0,
                      ImageSize size = {});

/// Everything that turns a standardized clip into a classifier input.
struct FeatureConfig {
  AudioStandard audio;
  SpectrogramConfig stft;
  double floor_db = -80.0;
  ImageSize image;
};

SpectroImage clip_to_image(const AudioClip& standardized, const FeatureConfig& cfg = {});

/// Decode-agnostic front end: standardize then image.
SpectroImage audio_to_image(const AudioClip& raw, const FeatureConfig& cfg = {});

/// Binary 8-bit portable graymap; high frequencies at the top.
void write_pgm(const std::filesystem::path& path, const SpectroImage& image);

}  // namespace qcs
