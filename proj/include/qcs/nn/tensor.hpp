#pragma once

#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "qcs/error.hpp"

namespace qcs::nn {

template <typename Scalar>
using MatrixRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense row-major tensor: `data` holds the product of `shape` values.
template <typename Scalar>
struct Tensor {
  std::vector<int> shape;
  VectorX<Scalar> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims) : shape(std::move(dims)), data(VectorX<Scalar>::Zero(count(shape))) {}

  static Eigen::Index count(const std::vector<int>& dims) {
    return std::accumulate(dims.begin(), dims.end(), Eigen::Index{1}, std::multiplies<>());
  }

  Eigen::Index size() const noexcept { return data.size(); }

  /// First dimension as rows, the rest flattened as columns.
  Eigen::Map<MatrixRM<Scalar>> matrix() {
    return {data.data(), shape.empty() ? 1 : shape[0], shape.empty() ? 1 : size() / shape[0]};
  }
  Eigen::Map<const MatrixRM<Scalar>> matrix() const {
    return {data.data(), shape.empty() ? 1 : shape[0], shape.empty() ? 1 : size() / shape[0]};
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out;
    out.shape = shape;
    out.data = data.template cast<Other>();
    return out;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape == b.shape && a.data == b.data; }
};

template <typename Scalar>
using TensorList = std::vector<Tensor<Scalar>>;

template <typename Scalar>
TensorList<Scalar> zeros_like(const TensorList<Scalar>& list) {
  TensorList<Scalar> out;
  out.reserve(list.size());
  for (const auto& t : list) out.emplace_back(t.shape);
  return out;
}

template <typename Scalar>
void set_zero(TensorList<Scalar>& list) {
  for (auto& t : list) t.data.setZero();
}

/// Activations: one row per channel, one column per pixel (row-major pixel order).
template <typename Scalar>
struct FeatureMap {
  MatrixRM<Scalar> values;
  int height = 0;
  int width = 0;

  int channels() const noexcept { return static_cast<int>(values.rows()); }
};

}  // namespace qcs::nn
