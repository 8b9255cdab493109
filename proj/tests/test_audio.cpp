#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include "qcs/audio.hpp"
#include "qcs/error.hpp"
#include "qcs/spectrogram.hpp"

namespace qcs {
namespace {

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

/// Hand-built WAV so decoding is not checked against the module's own encoder.
std::vector<std::uint8_t> wav_bytes(std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
                                    std::uint16_t bits, const std::vector<std::uint8_t>& data) {
  std::vector<std::uint8_t> b{'R', 'I', 'F', 'F'};
  put_u32(b, static_cast<std::uint32_t>(36 + data.size()));
  for (char c : std::string("WAVEfmt ")) b.push_back(static_cast<std::uint8_t>(c));
  put_u32(b, 16);
  put_u16(b, format);
  put_u16(b, channels);
  put_u32(b, rate);
  put_u32(b, rate * channels * bits / 8);
  put_u16(b, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(b, bits);
  for (char c : std::string("data")) b.push_back(static_cast<std::uint8_t>(c));
  put_u32(b, static_cast<std::uint32_t>(data.size()));
  b.insert(b.end(), data.begin(), data.end());
  return b;
}

std::vector<std::uint8_t> pcm16(const std::vector<std::int16_t>& samples) {
  std::vector<std::uint8_t> d;
  for (auto s : samples) put_u16(d, static_cast<std::uint16_t>(s));
  return d;
}

std::vector<std::uint8_t> float32(const std::vector<float>& samples) {
  std::vector<std::uint8_t> d(samples.size() * 4);
  std::memcpy(d.data(), samples.data(), d.size());
  return d;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::PreconditionViolation;
}

AudioClip tone(double freq, double rate, Eigen::Index n, double amp = 0.5) {
  AudioClip c;
  c.sample_rate = rate;
  c.samples.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) c.samples[i] = amp * std::sin(2 * std::numbers::pi * freq * i / rate);
  return c;
}

TEST(DecodeWav, Pcm16ScalesByInverse32768) {
  const auto clip = decode_wav(wav_bytes(1, 1, 44100, 16, pcm16(std::vector<std::int16_t>(44100, 16384))));
  EXPECT_EQ(clip.sample_rate, 44100.0);
  ASSERT_EQ(clip.samples.size(), 44100);
  EXPECT_TRUE((clip.samples.array() == 0.5).all());
}

TEST(DecodeWav, StereoDownmixIsChannelMean) {
  std::vector<float> frames;
  for (int i = 0; i < 100; ++i) frames.insert(frames.end(), {0.5f, -0.5f});
  const auto clip = decode_wav(wav_bytes(3, 2, 22050, 32, float32(frames)));
  ASSERT_EQ(clip.samples.size(), 100);
  EXPECT_EQ(clip.samples.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(clip.sample_rate, 22050.0);
}

TEST(DecodeWav, Float32Passthrough) {
  const std::vector<float> s{0.25f, -1.0f, 0.75f};
  const auto clip = decode_wav(wav_bytes(3, 1, 8000, 32, float32(s)));
  for (int i = 0; i < 3; ++i) EXPECT_EQ(clip.samples[i], static_cast<double>(s[static_cast<std::size_t>(i)]));
}

TEST(DecodeWav, RoundTripWithinOneQuantizationStep) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  AudioClip c;
  c.sample_rate = 16000;
  c.samples.resize(5000);
  for (auto& x : c.samples) x = u(rng);
  c.samples[0] = 1.0;
  c.samples[1] = -1.0;
  const auto back = decode_wav(encode_wav(c));
  ASSERT_EQ(back.samples.size(), c.samples.size());
  EXPECT_EQ(back.sample_rate, 16000.0);
  EXPECT_LE((back.samples - c.samples).cwiseAbs().maxCoeff(), 1.0 / 32768.0);
}

TEST(DecodeWav, Errors) {
  const auto good = wav_bytes(1, 1, 44100, 16, pcm16({1, 2, 3, 4}));
  EXPECT_EQ(kind_of([&] { decode_wav(std::span(good.data(), 8)); }), ErrorKind::TruncatedFile);
  EXPECT_EQ(kind_of([&] { decode_wav(std::span(good.data(), good.size() - 3)); }), ErrorKind::TruncatedFile);
  auto not_riff = good;
  not_riff[0] = 'X';
  EXPECT_EQ(kind_of([&] { decode_wav(not_riff); }), ErrorKind::UnsupportedEncoding);
  EXPECT_EQ(kind_of([&] { decode_wav(wav_bytes(1, 1, 44100, 8, {1, 2, 3})); }), ErrorKind::UnsupportedEncoding);
  EXPECT_EQ(kind_of([&] { decode_wav(wav_bytes(1, 3, 44100, 16, pcm16({1, 2, 3}))); }), ErrorKind::UnsupportedEncoding);
  EXPECT_EQ(kind_of([&] { decode_wav(wav_bytes(1, 1, 4000, 16, pcm16({1, 2}))); }), ErrorKind::UnsupportedEncoding);
  EXPECT_EQ(kind_of([&] { decode_wav(wav_bytes(1, 1, 44100, 16, {})); }), ErrorKind::ZeroLengthAudio);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  EXPECT_EQ(kind_of([&] { decode_wav(wav_bytes(3, 1, 44100, 32, float32({0.1f, nan}))); }),
            ErrorKind::UnsupportedEncoding);
}

TEST(Standardize, PadsShortClipSymmetrically) {
  AudioClip c = tone(440, 44100, 3 * 44100);
  const auto out = standardize(c);
  ASSERT_EQ(out.samples.size(), 264600);
  EXPECT_EQ(out.samples.head(66150).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(out.samples.tail(66150).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NE(out.samples[66150 + 1], 0.0);
  EXPECT_DOUBLE_EQ(out.samples.cwiseAbs().maxCoeff(), 0.95);
}

TEST(Standardize, AllZeroStaysZero) {
  AudioClip c;
  c.samples = Eigen::VectorXd::Zero(1000);
  const auto out = standardize(c);
  EXPECT_EQ(out.samples.size(), 264600);
  EXPECT_EQ(out.samples.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Standardize, ExactLengthForManyInputLengths) {
  AudioStandard std_small{8000, 0.5, 0.95};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Eigen::Index n : {1, 2, 3, 17, 3999, 4000, 4001, 12345, 80000}) {
    for (double rate : {8000.0, 11025.0, 44100.0}) {
      AudioClip c;
      c.sample_rate = rate;
      c.samples.resize(n);
      for (auto& x : c.samples) x = u(rng);
      EXPECT_EQ(standardize(c, std_small).samples.size(), 4000) << n << " @ " << rate;
    }
  }
  AudioClip minute = tone(100, 44100, 60 * 44100);
  EXPECT_EQ(standardize(minute).samples.size(), 264600);
}

TEST(Standardize, BitIdempotent) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 0.2);
  for (double rate : {22050.0, 44100.0, 48000.0}) {
    AudioClip c;
    c.sample_rate = rate;
    c.samples.resize(static_cast<Eigen::Index>(rate * 7.3));
    for (auto& x : c.samples) x = std::clamp(g(rng), -1.0, 1.0);
    const auto once = standardize(c);
    const auto twice = standardize(once);
    EXPECT_EQ(once.sample_rate, twice.sample_rate);
    EXPECT_TRUE(once.samples == twice.samples) << rate;
  }
}

TEST(Standardize, ResampledSineKeepsItsFrequency) {
  const auto out = standardize(tone(1000.0, 22050.0, 22050 * 6));
  const auto power = power_spectrogram(stft(out));
  const double bin_hz = 44100.0 / 2048.0;
  const auto expected = static_cast<Eigen::Index>(std::lround(1000.0 / bin_hz));
  for (Eigen::Index t = 10; t < power.cols() - 10; t += 25) {
    Eigen::Index arg = 0;
    power.col(t).maxCoeff(&arg);
    EXPECT_LE(std::abs(arg - expected), 1) << "frame " << t;
  }
}

TEST(Resample, IdentityAtSameRate) {
  const auto c = tone(300, 16000, 999);
  EXPECT_TRUE(resample(c, 16000).samples == c.samples);
}

TEST(SilenceFraction, Examples) {
  AudioClip zero;
  zero.samples = Eigen::VectorXd::Zero(44100);
  EXPECT_EQ(silence_fraction(zero), 1.0);

  AudioClip square;
  square.samples.resize(44100);
  for (Eigen::Index i = 0; i < square.samples.size(); ++i) square.samples[i] = (i / 50) % 2 ? 1.0 : -1.0;
  EXPECT_EQ(silence_fraction(square, 50, -40), 0.0);

  // 50 ms at 44.1 kHz is 2205 samples; 20 frames silent then 20 frames of tone.
  AudioClip half = tone(1000, 44100, 2205 * 40, 0.9);
  half.samples.head(2205 * 20).setZero();
  EXPECT_DOUBLE_EQ(silence_fraction(half), 0.5);
}

TEST(SilenceGate, RejectsNearSilenceAcceptsQuietBreathing) {
  SilenceGate gate;
  AudioClip hiss;
  hiss.samples.resize(44100 * 3);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1e-4);
  for (auto& x : hiss.samples) x = g(rng);
  EXPECT_TRUE(gate.rejects(hiss));
  const AudioClip quiet = tone(500, 44100, 44100 * 3, 0.02);  // about -37 dBFS
  EXPECT_FALSE(gate.rejects(quiet));
}

}  // namespace
}  // namespace qcs
