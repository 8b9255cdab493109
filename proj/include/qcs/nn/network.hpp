#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qcs/nn/layers.hpp"
#include "qcs/spectrogram.hpp"
#include "qcs/types.hpp"

namespace qcs::nn {

enum class ArchId : std::uint16_t { NetA = 0, NetB = 1, NetC = 2 };

inline constexpr std::array<ArchId, 3> kArchitectures{ArchId::NetA, ArchId::NetB, ArchId::NetC};

std::string_view to_string(ArchId id) noexcept;

enum class LayerKind { Conv, Relu, MaxPool, GlobalAvgPool, Dense };

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  ConvGeometry conv{};    // Conv only
  int in_features = 0;    // Dense only
  int out_features = 0;   // Dense only
  int param = -1;         // index of the weight tensor; the bias follows it
};

struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  int fan_in = 0;
};

/// Layer stack of one of the three compact classifiers. Inputs are 1 x input_size x input_size;
/// outputs are 2 logits (COVID, HEALTHY).
///
///   NetA: 3 x (conv3x3 -> ReLU -> maxpool2), 8/16/32 channels, GAP, dense 2
///   NetB: 3 x (conv5x5 -> ReLU -> maxpool2), 16/32/64 channels, GAP, dense 2
///   NetC: 3 x (conv3x3 -> ReLU -> maxpool2), 8/16/32, then conv3x3 stride 2 -> ReLU, 64; GAP, dense 2
struct Architecture {
  ArchId id = ArchId::NetA;
  int input_size = 128;
  std::vector<LayerSpec> layers;
  std::vector<ParamSpec> params;

  static Architecture make(ArchId id, int input_size = 128);
};

inline Architecture Architecture::make(ArchId id, int input_size) {
  Architecture arch;
  arch.id = id;
  arch.input_size = input_size;

  int in_ch = 1;
  int conv_index = 0;
  auto add_conv = [&](int out_ch, int kernel, int stride) {
    ++conv_index;
    LayerSpec conv;
    conv.kind = LayerKind::Conv;
    conv.conv = ConvGeometry{in_ch, out_ch, kernel, stride, kernel / 2};
    conv.param = static_cast<int>(arch.params.size());
    const std::string name = "conv" + std::to_string(conv_index);
    arch.params.push_back({name + ".weight", {out_ch, in_ch, kernel, kernel}, in_ch * kernel * kernel});
    arch.params.push_back({name + ".bias", {out_ch}, in_ch * kernel * kernel});
    arch.layers.push_back(conv);
    arch.layers.push_back(LayerSpec{.kind = LayerKind::Relu});
    in_ch = out_ch;
  };
  auto add_pool = [&] { arch.layers.push_back(LayerSpec{.kind = LayerKind::MaxPool}); };

  switch (id) {
    case ArchId::NetA:
      for (int ch : {8, 16, 32}) {
        add_conv(ch, 3, 1);
        add_pool();
      }
      break;
    case ArchId::NetB:
      for (int ch : {16, 32, 64}) {
        add_conv(ch, 5, 1);
        add_pool();
      }
      break;
    case ArchId::NetC:
      for (int ch : {8, 16, 32}) {
        add_conv(ch, 3, 1);
        add_pool();
      }
      add_conv(64, 3, 2);
      break;
  }
  arch.layers.push_back(LayerSpec{.kind = LayerKind::GlobalAvgPool});

  LayerSpec dense;
  dense.kind = LayerKind::Dense;
  dense.in_features = in_ch;
  dense.out_features = 2;
  dense.param = static_cast<int>(arch.params.size());
  arch.params.push_back({"fc.weight", {2, in_ch}, in_ch});
  arch.params.push_back({"fc.bias", {2}, in_ch});
  arch.layers.push_back(dense);
  return arch;
}

template <typename Scalar>
struct Example {
  FeatureMap<Scalar> input;
  int label = 0;  // class_index(Label)
};

/// Single-channel feature map from a spectrogram image.
template <typename Scalar>
FeatureMap<Scalar> to_input(const SpectroImage& image) {
  const MatrixRM<double> rows = image.pixels;
  FeatureMap<Scalar> map;
  map.height = static_cast<int>(image.height());
  map.width = static_cast<int>(image.width());
  map.values = Eigen::Map<const MatrixRM<double>>(rows.data(), 1, rows.size()).template cast<Scalar>();
  return map;
}

template <typename Scalar>
class Network {
 public:
  explicit Network(Architecture arch = Architecture::make(ArchId::NetA)) : arch_(std::move(arch)) {
    for (const auto& p : arch_.params) params_.emplace_back(p.shape);
  }

  /// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  static Network initialized(ArchId id, std::uint64_t seed, int input_size = 128) {
    Network net(Architecture::make(id, input_size));
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(id)));
    for (std::size_t i = 0; i < net.params_.size(); ++i) {
      const auto& spec = net.arch_.params[i];
      if (spec.shape.size() == 1) continue;
      std::uniform_real_distribution<double> dist(-1.0, 1.0);
      const double bound = std::sqrt(6.0 / spec.fan_in);
      for (Eigen::Index j = 0; j < net.params_[i].size(); ++j)
        net.params_[i].data[j] = static_cast<Scalar>(bound * dist(rng));
    }
    return net;
  }

  const Architecture& architecture() const noexcept { return arch_; }
  ArchId id() const noexcept { return arch_.id; }
  TensorList<Scalar>& parameters() noexcept { return params_; }
  const TensorList<Scalar>& parameters() const noexcept { return params_; }

  template <typename Other>
  Network<Other> cast() const {
    Network<Other> out(arch_);
    for (std::size_t i = 0; i < params_.size(); ++i) out.parameters()[i] = params_[i].template cast<Other>();
    return out;
  }

  VectorX<Scalar> logits(const FeatureMap<Scalar>& input) const {
    thread_local Tape tape;
    return run_forward(input, tape);
  }

  Probabilities forward(const SpectroImage& image) const {
    if (image.height() != arch_.input_size || image.width() != arch_.input_size)
      fail(ErrorKind::ShapeMismatch, "network expects " + std::to_string(arch_.input_size) + "x" +
                                         std::to_string(arch_.input_size) + " input");
    const VectorX<Scalar> p = softmax(logits(to_input<Scalar>(image)));
    return {static_cast<double>(p(0)), static_cast<double>(p(1))};
  }

  /// Mean cross-entropy over `batch`; `grads` (same shapes as parameters) is overwritten.
  Scalar loss_and_gradients(std::span<const Example<Scalar>> data, std::span<const std::size_t> batch,
                            TensorList<Scalar>& grads) const {
    if (batch.empty()) fail(ErrorKind::PreconditionViolation, "empty batch");
    if (grads.size() != params_.size()) grads = zeros_like(params_);
    set_zero(grads);
    const Scalar scale = Scalar(1) / static_cast<Scalar>(batch.size());
    Scalar loss = 0;
    thread_local Tape tape;
    for (std::size_t index : batch) {
      const Example<Scalar>& ex = data[index];
      const VectorX<Scalar> z = run_forward(ex.input, tape);
      loss += cross_entropy(z, ex.label);
      run_backward(tape, (cross_entropy_grad(z, ex.label) * scale).eval(), grads);
    }
    return loss * scale;
  }

  Scalar loss_and_gradients(std::span<const Example<Scalar>> batch, TensorList<Scalar>& grads) const {
    std::vector<std::size_t> all(batch.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return loss_and_gradients(batch, all, grads);
  }

  Scalar loss(std::span<const Example<Scalar>> batch) const {
    Scalar total = 0;
    for (const auto& ex : batch) total += cross_entropy(logits(ex.input), ex.label);
    return batch.empty() ? Scalar(0) : total / static_cast<Scalar>(batch.size());
  }

 private:
  struct Tape {
    std::vector<FeatureMap<Scalar>> acts;  // acts[i] is the input of layer i
    std::vector<MatrixRM<Scalar>> cols;
    std::vector<std::vector<int>> argmax;
    std::vector<FeatureMap<Scalar>> grads;  // backward scratch, one per layer
    MatrixRM<Scalar> grad_cols;
  };

  VectorX<Scalar> run_forward(const FeatureMap<Scalar>& input, Tape& tape) const {
    if (input.channels() != 1 || input.height != arch_.input_size || input.width != arch_.input_size)
      fail(ErrorKind::ShapeMismatch, "network input must be 1 x " + std::to_string(arch_.input_size) + " x " +
                                         std::to_string(arch_.input_size));
    const std::size_t n = arch_.layers.size();
    tape.acts.resize(n + 1);
    tape.cols.resize(n);
    tape.argmax.resize(n);
    tape.acts[0] = input;
    for (std::size_t i = 0; i < n; ++i) {
      const LayerSpec& layer = arch_.layers[i];
      const FeatureMap<Scalar>& in = tape.acts[i];
      FeatureMap<Scalar>& out = tape.acts[i + 1];
      switch (layer.kind) {
        case LayerKind::Conv:
          out = conv2d_forward(in, params_[layer.param], params_[layer.param + 1], layer.conv, tape.cols[i]);
          break;
        case LayerKind::Relu: out = relu_forward(in); break;
        case LayerKind::MaxPool: out = maxpool2_forward(in, tape.argmax[i]); break;
        case LayerKind::GlobalAvgPool: out = global_avg_pool_forward(in); break;
        case LayerKind::Dense: {
          const Eigen::Map<const VectorX<Scalar>> x(in.values.data(), in.values.size());
          out = {dense_forward<Scalar>(x, params_[layer.param], params_[layer.param + 1]), 1, 1};
          break;
        }
      }
    }
    const auto& last = tape.acts[n].values;
    return Eigen::Map<const VectorX<Scalar>>(last.data(), last.size());
  }

  void run_backward(Tape& tape, const VectorX<Scalar>& grad_logits, TensorList<Scalar>& grads) const {
    const std::size_t n = arch_.layers.size();
    tape.grads.resize(n + 1);
    tape.grads[n] = {grad_logits, 1, 1};
    for (std::size_t i = n; i-- > 0;) {
      const LayerSpec& layer = arch_.layers[i];
      const FeatureMap<Scalar>& in = tape.acts[i];
      const FeatureMap<Scalar>& grad = tape.grads[i + 1];
      FeatureMap<Scalar>& grad_in = tape.grads[i];
      switch (layer.kind) {
        case LayerKind::Conv: {
          FeatureMap<Scalar>* target = nullptr;
          if (i > 0) {
            grad_in.values.resize(in.channels(), in.values.cols());
            grad_in.height = in.height;
            grad_in.width = in.width;
            target = &grad_in;
          }
          conv2d_backward<Scalar>(grad, tape.cols[i], params_[layer.param], layer.conv, grads[layer.param],
                                  grads[layer.param + 1], target, tape.grad_cols);
          break;
        }
        case LayerKind::Relu: grad_in = relu_backward(grad, tape.acts[i + 1]); break;
        case LayerKind::MaxPool: grad_in = maxpool2_backward(grad, tape.argmax[i], in.height, in.width); break;
        case LayerKind::GlobalAvgPool: grad_in = global_avg_pool_backward(grad, in.height, in.width); break;
        case LayerKind::Dense: {
          const Eigen::Map<const VectorX<Scalar>> x(in.values.data(), in.values.size());
          const Eigen::Map<const VectorX<Scalar>> g(grad.values.data(), grad.values.size());
          VectorX<Scalar> gx = dense_backward<Scalar>(g, x, params_[layer.param], grads[layer.param],
                                                      grads[layer.param + 1]);
          grad_in = {Eigen::Map<const MatrixRM<Scalar>>(gx.data(), in.channels(), in.values.cols()), in.height,
                     in.width};
          break;
        }
      }
    }
  }

  Architecture arch_;
  TensorList<Scalar> params_;
};

inline std::string_view to_string(ArchId id) noexcept {
  switch (id) {
    case ArchId::NetA: return "net_a";
    case ArchId::NetB: return "net_b";
    case ArchId::NetC: return "net_c";
  }
  return "unknown";
}

}  // namespace qcs::nn
