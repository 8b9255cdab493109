#pragma once

// Independent reference implementations. None of these call into the library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

namespace qcs::testing {

/// Power spectrogram by direct DFT summation: reflection padding by n_fft/2, periodic Hann of
/// `win` centred in an `n_fft` frame, bins 0..n_fft/2. Result is bins x frames, column-major.
struct NaivePower {
  int bins = 0;
  int frames = 0;
  std::vector<double> values;

  double at(int bin, int frame) const { return values[static_cast<std::size_t>(frame) * bins + bin]; }
};

inline NaivePower naive_power_spectrogram(const std::vector<double>& x, int n_fft, int hop, int win) {
  const long n = static_cast<long>(x.size());
  const long pad = n_fft / 2;
  auto sample = [&](long i) {
    // numpy "reflect": the edge sample is not repeated.
    while (i < 0 || i >= n) {
      if (i < 0) i = -i;
      if (i >= n) i = 2 * (n - 1) - i;
    }
    return x[static_cast<std::size_t>(i)];
  };
  std::vector<double> window(static_cast<std::size_t>(n_fft), 0.0);
  const int left = (n_fft - win) / 2;
  for (int i = 0; i < win; ++i)
    window[static_cast<std::size_t>(left + i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win);

  std::vector<double> cos_table(static_cast<std::size_t>(n_fft)), sin_table(static_cast<std::size_t>(n_fft));
  for (int i = 0; i < n_fft; ++i) {
    cos_table[static_cast<std::size_t>(i)] = std::cos(2.0 * std::numbers::pi * i / n_fft);
    sin_table[static_cast<std::size_t>(i)] = std::sin(2.0 * std::numbers::pi * i / n_fft);
  }

  NaivePower out;
  out.bins = n_fft / 2 + 1;
  out.frames = static_cast<int>(n / hop + 1);
  out.values.assign(static_cast<std::size_t>(out.bins) * out.frames, 0.0);
  std::vector<double> frame(static_cast<std::size_t>(n_fft));
  for (int t = 0; t < out.frames; ++t) {
    for (int j = 0; j < n_fft; ++j)
      frame[static_cast<std::size_t>(j)] = sample(static_cast<long>(t) * hop - pad + j) * window[static_cast<std::size_t>(j)];
    for (int k = 0; k < out.bins; ++k) {
      double re = 0.0, im = 0.0;
      for (int j = 0; j < n_fft; ++j) {
        const auto phase = static_cast<std::size_t>((static_cast<long>(k) * j) % n_fft);
        re += frame[static_cast<std::size_t>(j)] * cos_table[phase];
        im -= frame[static_cast<std::size_t>(j)] * sin_table[phase];
      }
      out.values[static_cast<std::size_t>(t) * out.bins + k] = re * re + im * im;
    }
  }
  return out;
}

/// Confusion tally with the positive class as index 0 of a 2x2 table [truth][prediction].
struct Tally {
  long tp = 0, tn = 0, fp = 0, fn = 0;
};

inline Tally brute_force_tally(const std::vector<int>& predictions, const std::vector<int>& truths, int positive) {
  long table[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < predictions.size(); ++i)
    ++table[truths[i] == positive ? 0 : 1][predictions[i] == positive ? 0 : 1];
  return {table[0][0], table[1][1], table[1][0], table[0][1]};
}

/// Scalar Adam, transcribed term by term.
struct ScalarAdam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, lr = 1e-4;
  double m = 0.0, v = 0.0;
  int t = 0;

  double step(double theta, double g) {
    t += 1;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    const double m_hat = m / (1.0 - std::pow(beta1, t));
    const double v_hat = v / (1.0 - std::pow(beta2, t));
    return theta - lr * m_hat / (std::sqrt(v_hat) + eps);
  }
};

/// Plateau / early-stop rules restated in terms of epoch distances rather than counters:
/// the rate drops whenever `patience` epochs have passed since the later of the last
/// improvement and the last drop; training stops `early` epochs after the last improvement.
struct ScheduleTrace {
  std::vector<double> lr_used;  // learning rate in force during each epoch run
  std::vector<bool> improved;
  int epochs_run = 0;
  int best_epoch = 0;
};

inline ScheduleTrace simulate_schedule(const std::vector<double>& losses, double lr0, double factor, int patience,
                                       int early, double min_delta, int max_epochs) {
  ScheduleTrace out;
  double best = std::numeric_limits<double>::infinity();
  int last_improvement = 0, last_drop = 0;
  double lr = lr0;
  for (int epoch = 1; epoch <= max_epochs && epoch <= static_cast<int>(losses.size()); ++epoch) {
    out.lr_used.push_back(lr);
    out.epochs_run = epoch;
    const double loss = losses[static_cast<std::size_t>(epoch - 1)];
    const bool better = loss < best - min_delta;
    out.improved.push_back(better);
    if (better) {
      best = loss;
      last_improvement = epoch;
      out.best_epoch = epoch;
      continue;
    }
    if (epoch - std::max(last_improvement, last_drop) == patience) {
      lr /= factor;
      last_drop = epoch;
    }
    if (epoch - last_improvement >= early) break;
  }
  return out;
}

/// |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-7) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace qcs::testing
