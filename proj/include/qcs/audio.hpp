#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace qcs {

/// Mono waveform with amplitudes in [-1, 1].
struct AudioClip {
  Eigen::VectorXd samples;
  double sample_rate = 44100.0;

  Eigen::Index size() const noexcept { return samples.size(); }
  double duration_s() const noexcept { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Fixed analysis format every recording is converted to before feature extraction.
struct AudioStandard {
  double sample_rate = 44100.0;
  double duration_s = 6.0;
  double peak_target = 0.95;

  Eigen::Index length() const;
};

/// Throws PreconditionViolation unless samples are non-empty, finite and within [-1, 1].
void validate(const AudioClip& clip);

/// Parses a RIFF/WAVE container: PCM 16-bit or IEEE float 32-bit, 1 or 2 channels, 8-192 kHz.
AudioClip decode_wav(std::span<const std::uint8_t> bytes);
AudioClip read_wav(const std::filesystem::path& path);

/// Little-endian RIFF, PCM 16-bit, mono, at the clip's sample rate.
std::vector<std::uint8_t> encode_wav(const AudioClip& clip);
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

/// Kaiser-windowed sinc polyphase resampler (64 taps).
AudioClip resample(const AudioClip& clip, double target_rate);

/// Resample, center crop / zero pad to the standard length, then peak-normalize.
AudioClip standardize(const AudioClip& clip, const AudioStandard& standard = {});

/// Fraction of non-overlapping frames whose RMS level is below `threshold_db` dBFS.
double silence_fraction(const AudioClip& clip, double frame_ms = 50.0, double threshold_db = -45.0);

struct SilenceGate {
  double frame_ms = 50.0;
  double threshold_db = -45.0;
  double max_silence_fraction = 0.9;

  bool rejects(const AudioClip& clip) const {
    return silence_fraction(clip, frame_ms, threshold_db) > max_silence_fraction;
  }
};

}  // namespace qcs
