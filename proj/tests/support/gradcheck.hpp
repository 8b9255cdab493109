#pragma once

// Central finite-difference checks (double precision, step 1e-4). Each function returns the
// maximum relative error between analytic and numeric derivatives over the entries it probes.

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>

#include "qcs/nn/layers.hpp"
#include "qcs/nn/network.hpp"
#include "support/oracles.hpp"

namespace qcs::testing {

inline constexpr double kFdStep = 1e-4;

using nn::FeatureMap;
using nn::MatrixRM;
using nn::Tensor;
using nn::VectorX;

/// d f / d x[i] by central differences, restoring x[i] afterwards.
inline double central_difference(double& x, const std::function<double()>& f) {
  const double saved = x;
  x = saved + kFdStep;
  const double plus = f();
  x = saved - kFdStep;
  const double minus = f();
  x = saved;
  return (plus - minus) / (2 * kFdStep);
}

inline FeatureMap<double> random_map(std::mt19937_64& rng, int channels, int h, int w) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FeatureMap<double> m{MatrixRM<double>(channels, h * w), h, w};
  for (auto& x : m.values.reshaped()) x = u(rng);
  return m;
}

inline Tensor<double> random_tensor(std::mt19937_64& rng, std::vector<int> shape, double scale = 0.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor<double> t(std::move(shape));
  for (auto& x : t.data) x = u(rng);
  return t;
}

/// Loss = sum(probe .* conv(x)) over several geometries, including stride 2 and no padding.
inline double conv_gradient_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (const nn::ConvGeometry g : {nn::ConvGeometry{2, 3, 3, 1, 1}, nn::ConvGeometry{2, 3, 5, 1, 2},
                                   nn::ConvGeometry{3, 2, 3, 2, 1}, nn::ConvGeometry{1, 2, 3, 2, 0}}) {
    FeatureMap<double> x = random_map(rng, g.in_channels, 7, 6);
    Tensor<double> w = random_tensor(rng, {g.out_channels, g.in_channels, g.kernel, g.kernel});
    Tensor<double> b = random_tensor(rng, {g.out_channels});
    MatrixRM<double> cols, scratch;
    const FeatureMap<double> probe_shape = nn::conv2d_forward(x, w, b, g, cols);
    const FeatureMap<double> probe = random_map(rng, probe_shape.channels(), probe_shape.height, probe_shape.width);
    auto loss = [&] {
      MatrixRM<double> c;
      return nn::conv2d_forward(x, w, b, g, c).values.cwiseProduct(probe.values).sum();
    };
    Tensor<double> gw(w.shape), gb(b.shape);
    FeatureMap<double> gx{MatrixRM<double>(x.values.rows(), x.values.cols()), x.height, x.width};
    nn::conv2d_backward(probe, cols, w, g, gw, gb, &gx, scratch);
    for (Eigen::Index i = 0; i < w.size(); ++i) worst = std::max(worst, relative_error(gw.data[i], central_difference(w.data[i], loss)));
    for (Eigen::Index i = 0; i < b.size(); ++i) worst = std::max(worst, relative_error(gb.data[i], central_difference(b.data[i], loss)));
    for (Eigen::Index i = 0; i < x.values.size(); ++i)
      worst = std::max(worst, relative_error(gx.values.data()[i], central_difference(x.values.data()[i], loss)));
  }
  return worst;
}

/// Inputs kept at least 0.05 away from the kink.
inline double relu_gradient_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FeatureMap<double> x = random_map(rng, 3, 5, 4);
  for (auto& v : x.values.reshaped()) v = v < 0 ? std::min(v, -0.05) : std::max(v, 0.05);
  const FeatureMap<double> probe = random_map(rng, 3, 5, 4);
  auto loss = [&] { return nn::relu_forward(x).values.cwiseProduct(probe.values).sum(); };
  const auto gx = nn::relu_backward(probe, nn::relu_forward(x));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.values.size(); ++i)
    worst = std::max(worst, relative_error(gx.values.data()[i], central_difference(x.values.data()[i], loss)));
  return worst;
}

/// Distinct inputs (gaps of at least 1e-2) so no window has a near tie; odd sizes exercise cropping.
inline double maxpool_gradient_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int c = 2, h = 7, w = 9;
  std::vector<double> values(static_cast<std::size_t>(c * h * w));
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = 0.01 * static_cast<double>(i);
  std::shuffle(values.begin(), values.end(), rng);
  FeatureMap<double> x{Eigen::Map<MatrixRM<double>>(values.data(), c, h * w), h, w};
  std::vector<int> argmax;
  const auto out = nn::maxpool2_forward(x, argmax);
  const FeatureMap<double> probe = random_map(rng, c, out.height, out.width);
  auto loss = [&] {
    std::vector<int> a;
    return nn::maxpool2_forward(x, a).values.cwiseProduct(probe.values).sum();
  };
  const auto gx = nn::maxpool2_backward(probe, argmax, h, w);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.values.size(); ++i)
    worst = std::max(worst, relative_error(gx.values.data()[i], central_difference(x.values.data()[i], loss)));
  return worst;
}

inline double gap_gradient_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FeatureMap<double> x = random_map(rng, 4, 3, 5);
  const FeatureMap<double> probe = random_map(rng, 4, 1, 1);
  auto loss = [&] { return nn::global_avg_pool_forward(x).values.cwiseProduct(probe.values).sum(); };
  const auto gx = nn::global_avg_pool_backward(probe, 3, 5);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.values.size(); ++i)
    worst = std::max(worst, relative_error(gx.values.data()[i], central_difference(x.values.data()[i], loss)));
  return worst;
}

inline double dense_gradient_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VectorX<double> x(6), probe(3);
  for (auto& v : x) v = u(rng);
  for (auto& v : probe) v = u(rng);
  Tensor<double> w = random_tensor(rng, {3, 6}), b = random_tensor(rng, {3});
  auto loss = [&] { return nn::dense_forward<double>(x, w, b).dot(probe); };
  Tensor<double> gw(w.shape), gb(b.shape);
  const VectorX<double> gx = nn::dense_backward<double>(probe, x, w, gw, gb);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) worst = std::max(worst, relative_error(gw.data[i], central_difference(w.data[i], loss)));
  for (Eigen::Index i = 0; i < b.size(); ++i) worst = std::max(worst, relative_error(gb.data[i], central_difference(b.data[i], loss)));
  for (Eigen::Index i = 0; i < x.size(); ++i) worst = std::max(worst, relative_error(gx[i], central_difference(x[i], loss)));
  return worst;
}

inline double softmax_ce_gradient_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  double worst = 0.0;
  for (int label : {0, 1}) {
    VectorX<double> z(2);
    z << u(rng), u(rng);
    auto loss = [&] { return nn::cross_entropy(z, label); };
    const VectorX<double> g = nn::cross_entropy_grad(z, label);
    for (Eigen::Index i = 0; i < 2; ++i) worst = std::max(worst, relative_error(g[i], central_difference(z[i], loss)));
  }
  return worst;
}

/// ReLU signs and max-pool winners of a forward pass, replayed through the public layer functions.
struct ActivationPattern {
  std::vector<bool> active;
  std::vector<int> winners;
  bool operator==(const ActivationPattern&) const = default;
};

inline ActivationPattern activation_pattern(const nn::Network<double>& net,
                                            const std::vector<nn::Example<double>>& batch) {
  ActivationPattern out;
  const auto& params = net.parameters();
  for (const auto& ex : batch) {
    FeatureMap<double> x = ex.input;
    for (const nn::LayerSpec& layer : net.architecture().layers) {
      switch (layer.kind) {
        case nn::LayerKind::Conv: {
          MatrixRM<double> cols;
          x = nn::conv2d_forward(x, params[static_cast<std::size_t>(layer.param)],
                                 params[static_cast<std::size_t>(layer.param) + 1], layer.conv, cols);
          break;
        }
        case nn::LayerKind::Relu:
          for (double v : x.values.reshaped()) out.active.push_back(v > 0);
          x = nn::relu_forward(x);
          break;
        case nn::LayerKind::MaxPool: {
          std::vector<int> argmax;
          x = nn::maxpool2_forward(x, argmax);
          out.winners.insert(out.winners.end(), argmax.begin(), argmax.end());
          break;
        }
        case nn::LayerKind::GlobalAvgPool:
        case nn::LayerKind::Dense: break;
      }
    }
  }
  return out;
}

struct GradCheck {
  double max_error = 0.0;
  int probed = 0;
  int skipped = 0;  // perturbation crossed a ReLU or max-pool switch; central differences undefined there
};

/// Whole network at a reduced input size (global pooling makes every architecture size-agnostic).
/// Biases are probed exhaustively, weights at up to `per_tensor` random entries.
inline GradCheck architecture_gradient_check(nn::ArchId arch, std::uint64_t seed, int input_size = 32,
                                             int per_tensor = 12) {
  std::mt19937_64 rng(seed);
  auto net = nn::Network<double>::initialized(arch, seed, input_size);
  // Non-zero biases so every code path carries gradient.
  for (auto& p : net.parameters())
    if (p.shape.size() == 1) p = random_tensor(rng, p.shape, 0.1);
  std::vector<nn::Example<double>> batch(2);
  for (int i = 0; i < 2; ++i) {
    auto& ex = batch[static_cast<std::size_t>(i)];
    ex.input = random_map(rng, 1, input_size, input_size);
    ex.input.values = ex.input.values.array().abs();
    ex.label = i;
  }
  nn::TensorList<double> grads;
  net.loss_and_gradients(batch, grads);
  const ActivationPattern base = activation_pattern(net, batch);
  auto loss = [&] { return net.loss(batch); };
  auto smooth_at = [&](double& x) {
    const double saved = x;
    x = saved + kFdStep;
    const bool up = activation_pattern(net, batch) == base;
    x = saved - kFdStep;
    const bool down = activation_pattern(net, batch) == base;
    x = saved;
    return up && down;
  };

  GradCheck out;
  for (std::size_t t = 0; t < net.parameters().size(); ++t) {
    auto& p = net.parameters()[t];
    std::vector<Eigen::Index> entries(static_cast<std::size_t>(p.size()));
    std::iota(entries.begin(), entries.end(), Eigen::Index{0});
    if (p.shape.size() > 1) std::shuffle(entries.begin(), entries.end(), rng);
    int taken = 0;
    for (Eigen::Index i : entries) {
      if (p.shape.size() > 1 && taken == per_tensor) break;
      if (!smooth_at(p.data[i])) {
        ++out.skipped;
        continue;
      }
      ++taken;
      ++out.probed;
      out.max_error = std::max(out.max_error, relative_error(grads[t].data[i], central_difference(p.data[i], loss)));
    }
  }
  return out;
}

}  // namespace qcs::testing
