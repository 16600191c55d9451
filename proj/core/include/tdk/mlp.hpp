#pragma once

// Dense feed-forward networks evaluated column-wise: an input batch is an
// (input_dim x batch) matrix and every column is one sample.

#include <string_view>
#include <vector>

#include "tdk/rng.hpp"
#include "tdk/types.hpp"

namespace tdk {

enum class Activation { Elu, Identity };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view s);

/// ELU(x) = x for x >= 0, exp(x) - 1 otherwise.
double elu(double x);

struct DenseLayer {
  Mat weight;  // out x in
  Vec bias;    // out
};

struct MlpWeights {
  std::vector<DenseLayer> layers;
  Activation hidden = Activation::Elu;
  Activation output = Activation::Identity;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t num_parameters() const;
  /// Throws DimensionError on broken chaining and Error on non-finite entries.
  void validate() const;
};

/// Gaussian init scaled by gain / sqrt(fan_in); zero biases. The last layer
/// uses `output_gain` so fresh policies start close to zero.
MlpWeights mlp_init(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t output_dim,
                    CounterRng& rng, double output_gain = 1.0);

struct MlpCache {
  std::vector<Mat> inputs;  // input of each layer
  std::vector<Mat> pre;     // pre-activation of each layer
};

/// Throws DimensionError when x.rows() != input_dim().
Mat mlp_forward(const MlpWeights& w, const Mat& x, MlpCache* cache = nullptr);
Vec mlp_forward(const MlpWeights& w, const Vec& x);

struct MlpGrads {
  std::vector<Mat> weight;
  std::vector<Vec> bias;
};

/// Gradients of sum over columns of <d_output, output> w.r.t. every parameter.
MlpGrads mlp_backward(const MlpWeights& w, const MlpCache& cache, const Mat& d_output);

/// Flat parameter views in layer order (weight column-major, then bias).
Vec flatten_parameters(const MlpWeights& w);
void assign_parameters(MlpWeights& w, const Vec& flat);
Vec flatten_gradients(const MlpGrads& g);

}  // namespace tdk
