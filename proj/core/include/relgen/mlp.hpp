#pragma once

#include <cstddef>
#include <vector>

#include "relgen/rng.hpp"
#include "relgen/tensor.hpp"

namespace relgen {

enum class Activation { relu, tanh, identity };

/// Fully connected network. weights[l] has shape (fan_in x fan_out); the
/// configured activation is applied between layers and the output layer stays
/// linear. Biases start at zero, weights Kaiming-uniform with bound
/// sqrt(6 / fan_in).
struct MlpParams {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Activation activation = Activation::relu;

  std::size_t layer_count() const { return weights.size(); }
  std::size_t input_dim() const { return weights.empty() ? 0 : weights.front().rows(); }
  std::size_t output_dim() const { return weights.empty() ? 0 : weights.back().cols(); }
};

/// Samples parameters for the given layer sizes (at least input and output).
/// Draw order is fixed (layer by layer, row-major), so one seed pins every
/// weight on every platform.
MlpParams mlp_init(const std::vector<std::size_t>& layer_dims, Activation activation,
                   Rng& rng);

/// Applies the network to x. Accumulates in f64, stores activations in f32.
/// Throws DimensionError if x does not match the first layer.
Vector mlp_forward(const MlpParams& params, const Vector& x);

/// Numerically stable softmax (max subtracted before exponentiation).
/// Probabilities are kept in f64 so the result sums to 1 within 1e-9 for any
/// finite scores, which f32 storage could not guarantee.
std::vector<double> softmax(const std::vector<double>& scores);

/// Draws an index from an explicit distribution. probs must be nonnegative
/// and sum to 1 within 1e-6; otherwise a contract error is thrown.
std::size_t sample_categorical(const std::vector<double>& probs, Rng& rng);

/// Standalone Kaiming-uniform matrix, bound sqrt(6 / fan_in), drawn row-major.
Matrix kaiming_matrix(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// y_j = sum_i x_i * w(i, j), accumulated in f64, stored f32.
Vector linear(const Matrix& w, const Vector& x);

/// Same product kept in f64; used for attention scores.
std::vector<double> linear_f64(const Matrix& w, const Vector& x);

}  // namespace relgen
