#include "relgen/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "relgen/errors.hpp"

namespace relgen {

MlpParams mlp_init(const std::vector<std::size_t>& layer_dims, Activation activation,
                   Rng& rng) {
  if (layer_dims.size() < 2) {
    throw DimensionError("mlp_init: need at least input and output dims");
  }
  for (std::size_t d : layer_dims) {
    if (d == 0) throw DimensionError("mlp_init: zero-width layer");
  }
  MlpParams p;
  p.activation = activation;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    std::size_t fan_in = layer_dims[l];
    std::size_t fan_out = layer_dims[l + 1];
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Matrix w(fan_in, fan_out);
    for (std::size_t i = 0; i < fan_in; ++i) {
      for (std::size_t j = 0; j < fan_out; ++j) {
        w(i, j) = static_cast<float>(rng.uniform(-bound, bound));
      }
    }
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(fan_out, 0.0f);
  }
  return p;
}

namespace {

double activate(double v, Activation a) {
  switch (a) {
    case Activation::relu:
      return v > 0.0 ? v : 0.0;
    case Activation::tanh:
      return std::tanh(v);
    case Activation::identity:
      return v;
  }
  return v;
}

}  // namespace

Vector mlp_forward(const MlpParams& params, const Vector& x) {
  if (params.weights.empty()) throw DimensionError("mlp_forward: empty network");
  if (x.size() != params.input_dim()) {
    throw DimensionError("mlp_forward: input size " + std::to_string(x.size()) +
                         " does not match fan_in " + std::to_string(params.input_dim()));
  }
  Vector cur = x;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const Matrix& w = params.weights[l];
    const Vector& b = params.biases[l];
    if (cur.size() != w.rows() || b.size() != w.cols()) {
      throw DimensionError("mlp_forward: layer " + std::to_string(l) + " shape mismatch");
    }
    Vector next(w.cols());
    bool last = (l + 1 == params.weights.size());
    for (std::size_t j = 0; j < w.cols(); ++j) {
      double acc = static_cast<double>(b[j]);
      for (std::size_t i = 0; i < w.rows(); ++i) {
        acc += static_cast<double>(cur[i]) * static_cast<double>(w(i, j));
      }
      next[j] = static_cast<float>(last ? acc : activate(acc, params.activation));
    }
    cur = std::move(next);
  }
  return cur;
}

std::vector<double> softmax(const std::vector<double>& scores) {
  if (scores.empty()) throw DimensionError("softmax: empty input");
  double m = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

Matrix kaiming_matrix(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in == 0 || fan_out == 0) throw DimensionError("kaiming_matrix: zero dimension");
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  Matrix w(fan_in, fan_out);
  for (std::size_t i = 0; i < fan_in; ++i) {
    for (std::size_t j = 0; j < fan_out; ++j) {
      w(i, j) = static_cast<float>(rng.uniform(-bound, bound));
    }
  }
  return w;
}

Vector linear(const Matrix& w, const Vector& x) {
  if (x.size() != w.rows()) throw DimensionError("linear: input does not match fan_in");
  Vector y(w.cols());
  for (std::size_t j = 0; j < w.cols(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < w.rows(); ++i) {
      acc += static_cast<double>(x[i]) * static_cast<double>(w(i, j));
    }
    y[j] = static_cast<float>(acc);
  }
  return y;
}

std::vector<double> linear_f64(const Matrix& w, const Vector& x) {
  if (x.size() != w.rows()) throw DimensionError("linear_f64: input does not match fan_in");
  std::vector<double> y(w.cols());
  for (std::size_t j = 0; j < w.cols(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < w.rows(); ++i) {
      acc += static_cast<double>(x[i]) * static_cast<double>(w(i, j));
    }
    y[j] = acc;
  }
  return y;
}

std::size_t sample_categorical(const std::vector<double>& probs, Rng& rng) {
  if (probs.empty()) throw ContractError("sample_categorical: empty distribution");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw ContractError("sample_categorical: negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw ContractError("sample_categorical: probabilities sum to " + std::to_string(sum));
  }
  double u = rng.uniform() * sum;
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding can push u past the last partial sum; return the last index with
  // positive mass.
  for (std::size_t i = probs.size(); i > 0; --i) {
    if (probs[i - 1] > 0.0) return i - 1;
  }
  return probs.size() - 1;
}

}  // namespace relgen
