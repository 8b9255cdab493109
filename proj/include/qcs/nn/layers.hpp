#pragma once

// Forward and backward kernels for the fixed layer set. Backward functions accumulate
// parameter gradients (+=) so a mini-batch can be summed image by image.

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "qcs/nn/tensor.hpp"

namespace qcs::nn {

struct ConvGeometry {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  int out_size(int n) const noexcept { return (n + 2 * pad - kernel) / stride + 1; }
  int patch() const noexcept { return in_channels * kernel * kernel; }
};

// Output columns [lo, hi) whose input column ox * stride - pad + kx lies inside [0, width).
inline std::pair<int, int> valid_columns(int out_w, int width, int stride, int offset) {
  int lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  int hi = width - 1 - offset < 0 ? 0 : (width - 1 - offset) / stride + 1;
  lo = std::min(lo, out_w);
  hi = std::clamp(hi, lo, out_w);
  return {lo, hi};
}

template <typename Scalar>
void im2col(const FeatureMap<Scalar>& in, const ConvGeometry& g, int out_h, int out_w, MatrixRM<Scalar>& cols) {
  const int k = g.kernel;
  cols.resize(g.patch(), static_cast<Eigen::Index>(out_h) * out_w);
  for (int c = 0; c < g.in_channels; ++c) {
    const Scalar* plane = in.values.row(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        Scalar* dst = cols.row((c * k + ky) * k + kx).data();
        const int offset = kx - g.pad;
        const auto [lo, hi] = valid_columns(out_w, in.width, g.stride, offset);
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          Scalar* row_dst = dst + static_cast<Eigen::Index>(oy) * out_w;
          if (iy < 0 || iy >= in.height) {
            std::fill(row_dst, row_dst + out_w, Scalar(0));
            continue;
          }
          const Scalar* src = plane + static_cast<Eigen::Index>(iy) * in.width + offset;
          std::fill(row_dst, row_dst + lo, Scalar(0));
          if (g.stride == 1) {
            std::copy(src + lo, src + hi, row_dst + lo);
          } else {
            for (int ox = lo; ox < hi; ++ox) row_dst[ox] = src[ox * g.stride];
          }
          std::fill(row_dst + hi, row_dst + out_w, Scalar(0));
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const MatrixRM<Scalar>& cols, const ConvGeometry& g, int out_h, int out_w, FeatureMap<Scalar>& grad_in) {
  const int k = g.kernel;
  grad_in.values.setZero();
  for (int c = 0; c < g.in_channels; ++c) {
    Scalar* plane = grad_in.values.row(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Scalar* src = cols.row((c * k + ky) * k + kx).data();
        const int offset = kx - g.pad;
        const auto [lo, hi] = valid_columns(out_w, grad_in.width, g.stride, offset);
        if (lo >= hi) continue;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= grad_in.height) continue;
          Scalar* dst = plane + static_cast<Eigen::Index>(iy) * grad_in.width + offset;
          const Scalar* row_src = src + static_cast<Eigen::Index>(oy) * out_w;
          if (g.stride == 1) {
            Eigen::Map<VectorX<Scalar>>(dst + lo, hi - lo) += Eigen::Map<const VectorX<Scalar>>(row_src + lo, hi - lo);
          } else {
            for (int ox = lo; ox < hi; ++ox) dst[ox * g.stride] += row_src[ox];
          }
        }
      }
    }
  }
}

/// `weight` has shape (out, in, k, k); `cols` receives the unfolded input for backward.
template <typename Scalar>
FeatureMap<Scalar> conv2d_forward(const FeatureMap<Scalar>& in, const Tensor<Scalar>& weight,
                                  const Tensor<Scalar>& bias, const ConvGeometry& g, MatrixRM<Scalar>& cols) {
  if (in.channels() != g.in_channels) fail(ErrorKind::ShapeMismatch, "conv input channels");
  FeatureMap<Scalar> out;
  out.height = g.out_size(in.height);
  out.width = g.out_size(in.width);
  if (out.height <= 0 || out.width <= 0) fail(ErrorKind::ShapeMismatch, "conv input smaller than kernel");
  im2col(in, g, out.height, out.width, cols);
  out.values.noalias() = weight.matrix() * cols;
  out.values.colwise() += bias.data;
  return out;
}

/// `grad_cols` is scratch space, reused across calls to avoid reallocating.
template <typename Scalar>
void conv2d_backward(const FeatureMap<Scalar>& grad_out, const MatrixRM<Scalar>& cols, const Tensor<Scalar>& weight,
                     const ConvGeometry& g, Tensor<Scalar>& grad_weight, Tensor<Scalar>& grad_bias,
                     FeatureMap<Scalar>* grad_in, MatrixRM<Scalar>& grad_cols) {
  grad_weight.matrix().noalias() += grad_out.values * cols.transpose();
  grad_bias.data += grad_out.values.rowwise().sum();
  if (grad_in) {
    grad_cols.noalias() = weight.matrix().transpose() * grad_out.values;
    col2im(grad_cols, g, grad_out.height, grad_out.width, *grad_in);
  }
}

template <typename Scalar>
FeatureMap<Scalar> relu_forward(const FeatureMap<Scalar>& in) {
  return {in.values.cwiseMax(Scalar(0)), in.height, in.width};
}

/// Gradient of ReLU given its forward output.
template <typename Scalar>
FeatureMap<Scalar> relu_backward(const FeatureMap<Scalar>& grad_out, const FeatureMap<Scalar>& out) {
  return {(out.values.array() > Scalar(0)).select(grad_out.values, Scalar(0)), grad_out.height, grad_out.width};
}

/// 2x2 max pooling, stride 2 (odd trailing rows/columns dropped). `argmax` records the
/// winning input pixel per (channel, output pixel).
template <typename Scalar>
FeatureMap<Scalar> maxpool2_forward(const FeatureMap<Scalar>& in, std::vector<int>& argmax) {
  FeatureMap<Scalar> out;
  out.height = in.height / 2;
  out.width = in.width / 2;
  if (out.height == 0 || out.width == 0) fail(ErrorKind::ShapeMismatch, "pool input smaller than 2x2");
  const Eigen::Index pixels = static_cast<Eigen::Index>(out.height) * out.width;
  out.values.resize(in.channels(), pixels);
  argmax.resize(static_cast<std::size_t>(in.channels() * pixels));
  for (int c = 0; c < in.channels(); ++c) {
    const Scalar* plane = in.values.row(c).data();
    for (int oy = 0; oy < out.height; ++oy) {
      for (int ox = 0; ox < out.width; ++ox) {
        int best = (2 * oy) * in.width + 2 * ox;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int idx = (2 * oy + dy) * in.width + 2 * ox + dx;
            if (plane[idx] > plane[best]) best = idx;
          }
        const Eigen::Index o = static_cast<Eigen::Index>(oy) * out.width + ox;
        out.values(c, o) = plane[best];
        argmax[static_cast<std::size_t>(c * pixels + o)] = best;
      }
    }
  }
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> maxpool2_backward(const FeatureMap<Scalar>& grad_out, const std::vector<int>& argmax, int in_h,
                                     int in_w) {
  FeatureMap<Scalar> grad_in{MatrixRM<Scalar>::Zero(grad_out.channels(), static_cast<Eigen::Index>(in_h) * in_w),
                             in_h, in_w};
  const Eigen::Index pixels = grad_out.values.cols();
  for (int c = 0; c < grad_out.channels(); ++c)
    for (Eigen::Index o = 0; o < pixels; ++o)
      grad_in.values(c, argmax[static_cast<std::size_t>(c * pixels + o)]) += grad_out.values(c, o);
  return grad_in;
}

template <typename Scalar>
FeatureMap<Scalar> global_avg_pool_forward(const FeatureMap<Scalar>& in) {
  return {in.values.rowwise().mean(), 1, 1};
}

template <typename Scalar>
FeatureMap<Scalar> global_avg_pool_backward(const FeatureMap<Scalar>& grad_out, int in_h, int in_w) {
  const Eigen::Index pixels = static_cast<Eigen::Index>(in_h) * in_w;
  return {(grad_out.values.col(0) / static_cast<Scalar>(pixels)).replicate(1, pixels), in_h, in_w};
}

/// Fully connected layer over the flattened feature map; `weight` is (out, in).
template <typename Scalar>
VectorX<Scalar> dense_forward(const Eigen::Ref<const VectorX<Scalar>>& x, const Tensor<Scalar>& weight,
                              const Tensor<Scalar>& bias) {
  if (x.size() != weight.matrix().cols()) fail(ErrorKind::ShapeMismatch, "dense input width");
  return weight.matrix() * x + bias.data;
}

template <typename Scalar>
VectorX<Scalar> dense_backward(const Eigen::Ref<const VectorX<Scalar>>& grad_out,
                               const Eigen::Ref<const VectorX<Scalar>>& x, const Tensor<Scalar>& weight,
                               Tensor<Scalar>& grad_weight, Tensor<Scalar>& grad_bias) {
  grad_weight.matrix().noalias() += grad_out * x.transpose();
  grad_bias.data += grad_out;
  return weight.matrix().transpose() * grad_out;
}

/// Overflow-safe softmax.
template <typename Derived>
auto softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Scalar peak = logits.maxCoeff();
  VectorX<Scalar> e = (logits.array() - peak).exp().matrix();
  return VectorX<Scalar>(e / e.sum());
}

/// -log softmax(logits)[label], computed with log-sum-exp.
template <typename Derived>
typename Derived::Scalar cross_entropy(const Eigen::MatrixBase<Derived>& logits, int label) {
  using Scalar = typename Derived::Scalar;
  const Scalar peak = logits.maxCoeff();
  const Scalar lse = peak + std::log((logits.array() - peak).exp().sum());
  return lse - logits(label);
}

/// d cross_entropy / d logits = softmax - onehot.
template <typename Derived>
auto cross_entropy_grad(const Eigen::MatrixBase<Derived>& logits, int label) {
  auto g = softmax(logits);
  g(label) -= 1;
  return g;
}

}  // namespace qcs::nn
