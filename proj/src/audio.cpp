#include "qcs/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>
#include <array>
#include <string>

#include "qcs/error.hpp"

namespace qcs {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

struct WavFormat {
  std::uint16_t encoding = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

double bessel_i0(double x) {
  double sum = 1.0;
  double term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

constexpr int kResampleTaps = 64;
constexpr int kHalfTaps = kResampleTaps / 2;
constexpr double kKaiserBeta = 7.0;
constexpr double kRolloff = 0.94;

// Taps for one fractional phase; tap j multiplies input sample floor(t) + j - (kHalfTaps - 1).
std::array<double, kResampleTaps> sinc_phase(double frac, double cutoff) {
  std::array<double, kResampleTaps> taps{};
  const double norm = bessel_i0(kKaiserBeta);
  double sum = 0.0;
  for (int j = 0; j < kResampleTaps; ++j) {
    const double x = static_cast<double>(j - (kHalfTaps - 1)) - frac;
    const double arg = cutoff * x;
    const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(M_PI * arg) / (M_PI * arg);
    const double r = x / kHalfTaps;
    const double window = std::abs(r) >= 1.0 ? 0.0 : bessel_i0(kKaiserBeta * std::sqrt(1.0 - r * r)) / norm;
    taps[j] = cutoff * sinc * window;
    sum += taps[j];
  }
  if (sum != 0.0)
    for (double& t : taps) t /= sum;
  return taps;
}

}  // namespace

Eigen::Index AudioStandard::length() const {
  return static_cast<Eigen::Index>(std::llround(duration_s * sample_rate));
}

void validate(const AudioClip& clip) {
  require(clip.samples.size() > 0, "audio clip is empty");
  require(clip.sample_rate > 0.0, "sample rate must be positive");
  require(clip.samples.allFinite(), "audio clip contains non-finite samples");
  require(clip.samples.cwiseAbs().maxCoeff() <= 1.0, "audio samples exceed [-1, 1]");
}

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) fail(ErrorKind::TruncatedFile, "file shorter than RIFF header");
  if (!tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE"))
    fail(ErrorKind::UnsupportedEncoding, "not a RIFF/WAVE container");

  std::optional<WavFormat> format;
  std::span<const std::uint8_t> data;
  bool have_data = false;
  std::size_t at = 12;
  while (at + 8 <= bytes.size()) {
    const std::uint32_t chunk_size = read_u32(bytes, at + 4);
    const std::size_t body = at + 8;
    if (chunk_size > bytes.size() - body) {
      if (tag_is(bytes, at, "data"))
        fail(ErrorKind::TruncatedFile, "data chunk extends past end of file");
      fail(ErrorKind::TruncatedFile, "chunk extends past end of file");
    }
    if (tag_is(bytes, at, "fmt ")) {
      if (chunk_size < 16) fail(ErrorKind::TruncatedFile, "fmt chunk too short");
      WavFormat f;
      f.encoding = read_u16(bytes, body);
      f.channels = read_u16(bytes, body + 2);
      f.sample_rate = read_u32(bytes, body + 4);
      f.bits = read_u16(bytes, body + 14);
      if (f.encoding == kFormatExtensible) {
        if (chunk_size < 40) fail(ErrorKind::TruncatedFile, "extensible fmt chunk too short");
        f.encoding = read_u16(bytes, body + 24);
      }
      format = f;
    } else if (tag_is(bytes, at, "data")) {
      data = bytes.subspan(body, chunk_size);
      have_data = true;
      break;
    }
    at = body + chunk_size + (chunk_size & 1u);
  }
  if (!format) fail(ErrorKind::UnsupportedEncoding, "missing fmt chunk");
  if (!have_data) fail(ErrorKind::TruncatedFile, "missing data chunk");

  const WavFormat& f = *format;
  const bool pcm16 = f.encoding == kFormatPcm && f.bits == 16;
  const bool float32 = f.encoding == kFormatFloat && f.bits == 32;
  if (!pcm16 && !float32)
    fail(ErrorKind::UnsupportedEncoding,
         "encoding " + std::to_string(f.encoding) + " with " + std::to_string(f.bits) + " bits");
  if (f.channels < 1 || f.channels > 2)
    fail(ErrorKind::UnsupportedEncoding, std::to_string(f.channels) + " channels");
  if (f.sample_rate < 8000 || f.sample_rate > 192000)
    fail(ErrorKind::UnsupportedEncoding, "sample rate " + std::to_string(f.sample_rate));

  const std::size_t frame_bytes = static_cast<std::size_t>(f.bits / 8) * f.channels;
  const std::size_t frames = data.size() / frame_bytes;
  if (frames == 0) fail(ErrorKind::ZeroLengthAudio, "data chunk holds no complete frames");

  AudioClip clip;
  clip.sample_rate = f.sample_rate;
  clip.samples.resize(static_cast<Eigen::Index>(frames));
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < f.channels; ++c) {
      const std::size_t off = i * frame_bytes + c * (f.bits / 8);
      if (pcm16) {
        acc += static_cast<std::int16_t>(read_u16(data, off)) / 32768.0;
      } else {
        const std::uint32_t raw = read_u32(data, off);
        float value;
        std::memcpy(&value, &raw, sizeof value);
        if (!std::isfinite(value)) fail(ErrorKind::UnsupportedEncoding, "non-finite float sample");
        acc += std::clamp(static_cast<double>(value), -1.0, 1.0);
      }
    }
    clip.samples[static_cast<Eigen::Index>(i)] = acc / f.channels;
  }
  return clip;
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MissingFile, path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip) {
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  const auto rate = static_cast<std::uint32_t>(std::lround(clip.sample_rate));
  std::vector<std::uint8_t> out;
  out.reserve(44 + 2 * static_cast<std::size_t>(n));
  put_tag(out, "RIFF");
  put_u32(out, 36 + 2 * n);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, 2 * n);
  for (Eigen::Index i = 0; i < clip.samples.size(); ++i) {
    const double scaled = std::round(clip.samples[i] * 32768.0);
    const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(q));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  const auto bytes = encode_wav(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::IoError, "write failed for " + path.string());
}

AudioClip resample(const AudioClip& clip, double target_rate) {
  const long long src = std::llround(clip.sample_rate);
  const long long dst = std::llround(target_rate);
  require(src > 0 && dst > 0, "sample rates must be positive");
  if (src == dst) return clip;

  const long long g = std::gcd(src, dst);
  const long long up = dst / g;    // L
  const long long down = src / g;  // M
  const double cutoff = std::min(1.0, static_cast<double>(dst) / static_cast<double>(src)) * kRolloff;

  const long long n_in = clip.samples.size();
  const long long n_out = (n_in * up + down - 1) / down;

  // Phase tables are shared by every output sample with the same (n * M) mod L.
  constexpr long long kMaxTabulatedPhases = 1 << 14;
  std::vector<std::array<double, kResampleTaps>> table;
  if (up <= kMaxTabulatedPhases) {
    table.reserve(static_cast<std::size_t>(up));
    for (long long p = 0; p < up; ++p) table.push_back(sinc_phase(static_cast<double>(p) / up, cutoff));
  }

  AudioClip out;
  out.sample_rate = static_cast<double>(dst);
  out.samples.resize(n_out);
  for (long long n = 0; n < n_out; ++n) {
    const long long pos = n * down;
    const long long base = pos / up;
    const long long phase = pos % up;
    const auto taps = table.empty() ? sinc_phase(static_cast<double>(phase) / up, cutoff)
                                    : table[static_cast<std::size_t>(phase)];
    double acc = 0.0;
    for (int j = 0; j < kResampleTaps; ++j) {
      const long long idx = base + j - (kHalfTaps - 1);
      if (idx >= 0 && idx < n_in) acc += taps[j] * clip.samples[idx];
    }
    out.samples[n] = std::clamp(acc, -1.0, 1.0);
  }
  return out;
}

AudioClip standardize(const AudioClip& clip, const AudioStandard& standard) {
  validate(clip);
  require(standard.sample_rate > 0 && standard.duration_s > 0 && standard.peak_target > 0,
          "audio standard fields must be positive");

  AudioClip rated = std::llround(clip.sample_rate) == std::llround(standard.sample_rate)
                        ? clip
                        : resample(clip, standard.sample_rate);
  rated.sample_rate = standard.sample_rate;

  const Eigen::Index target = standard.length();
  const Eigen::Index len = rated.samples.size();
  AudioClip out;
  out.sample_rate = standard.sample_rate;
  if (len >= target) {
    out.samples = rated.samples.segment((len - target) / 2, target);
  } else {
    out.samples = Eigen::VectorXd::Zero(target);
    out.samples.segment((target - len) / 2, len) = rated.samples;
  }

  Eigen::Index peak_at = 0;
  const double peak = out.samples.cwiseAbs().maxCoeff(&peak_at);
  if (peak >= 1e-6) {
    const double target_peak = standard.peak_target;
    const double sign = out.samples[peak_at] < 0 ? -1.0 : 1.0;
    out.samples *= target_peak / peak;
    out.samples = out.samples.cwiseMax(-target_peak).cwiseMin(target_peak);
    out.samples[peak_at] = sign * target_peak;
  }
  return out;
}

double silence_fraction(const AudioClip& clip, double frame_ms, double threshold_db) {
  require(frame_ms > 0.0, "frame_ms must be positive");
  const Eigen::Index len = clip.samples.size();
  if (len == 0) return 1.0;
  const Eigen::Index frame =
      std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(frame_ms * clip.sample_rate / 1000.0)));
  const Eigen::Index frames = std::max<Eigen::Index>(1, len / frame);
  const Eigen::Index span = std::min(frame, len);

  Eigen::Index silent = 0;
  for (Eigen::Index f = 0; f < frames; ++f) {
    const double power = clip.samples.segment(f * frame, span).squaredNorm() / static_cast<double>(span);
    if (power <= 0.0 || 10.0 * std::log10(power) < threshold_db) ++silent;
  }
  return static_cast<double>(silent) / static_cast<double>(frames);
}

}  // namespace qcs
