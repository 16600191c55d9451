#include "tdk/mlp.hpp"

#include <cmath>
#include <string>

namespace tdk {

std::string_view to_string(Activation a) { return a == Activation::Elu ? "elu" : "identity"; }

Activation parse_activation(std::string_view s) {
  if (s == "elu") return Activation::Elu;
  if (s == "identity") return Activation::Identity;
  throw Error("unknown activation '" + std::string(s) + "'");
}

double elu(double x) { return x >= 0.0 ? x : std::expm1(x); }

namespace {

Mat activate(const Mat& z, Activation a) {
  if (a == Activation::Identity) return z;
  return z.unaryExpr([](double v) { return elu(v); });
}

// Derivative expressed through the pre-activation.
Mat activation_slope(const Mat& z, Activation a) {
  if (a == Activation::Identity) return Mat::Ones(z.rows(), z.cols());
  return z.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : std::exp(v); });
}

}  // namespace

std::size_t MlpWeights::input_dim() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.cols());
}

std::size_t MlpWeights::output_dim() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weight.rows());
}

std::size_t MlpWeights::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void MlpWeights::validate() const {
  if (layers.empty()) throw DimensionError("mlp: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.bias.size() != l.weight.rows())
      throw DimensionError("mlp: layer " + std::to_string(i) + " bias has " + std::to_string(l.bias.size()) +
                           " entries for " + std::to_string(l.weight.rows()) + " outputs");
    if (i > 0 && l.weight.cols() != layers[i - 1].weight.rows())
      throw DimensionError("mlp: layer " + std::to_string(i) + " expects " + std::to_string(l.weight.cols()) +
                           " inputs but the previous layer has " + std::to_string(layers[i - 1].weight.rows()) +
                           " outputs");
    if (!l.weight.allFinite() || !l.bias.allFinite())
      throw Error("mlp: layer " + std::to_string(i) + " has non-finite entries");
  }
}

MlpWeights mlp_init(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t output_dim,
                    CounterRng& rng, double output_gain) {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(output_dim);
  MlpWeights w;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const auto in = static_cast<Eigen::Index>(dims[i]);
    const auto out = static_cast<Eigen::Index>(dims[i + 1]);
    if (in == 0 || out == 0) throw DimensionError("mlp_init: layer sizes must be positive");
    const double gain = (i + 2 == dims.size() ? output_gain : 1.0) / std::sqrt(static_cast<double>(in));
    DenseLayer l{Mat(out, in), Vec::Zero(out)};
    for (Eigen::Index c = 0; c < in; ++c)
      for (Eigen::Index r = 0; r < out; ++r) l.weight(r, c) = gain * rng.normal();
    w.layers.push_back(std::move(l));
  }
  return w;
}

Mat mlp_forward(const MlpWeights& w, const Mat& x, MlpCache* cache) {
  if (w.layers.empty()) throw DimensionError("mlp_forward: no layers");
  if (x.rows() != static_cast<Eigen::Index>(w.input_dim()))
    throw DimensionError("mlp_forward: expected input dim " + std::to_string(w.input_dim()) + ", got " +
                         std::to_string(x.rows()));
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Mat a = x;
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    const auto& l = w.layers[i];
    Mat z = l.weight * a;
    z.colwise() += l.bias;
    const Activation act = i + 1 == w.layers.size() ? w.output : w.hidden;
    Mat next = activate(z, act);
    if (cache) {
      cache->inputs.push_back(std::move(a));
      cache->pre.push_back(std::move(z));
    }
    a = std::move(next);
  }
  return a;
}

Vec mlp_forward(const MlpWeights& w, const Vec& x) {
  const Mat in = x;
  return mlp_forward(w, in, nullptr).col(0);
}

MlpGrads mlp_backward(const MlpWeights& w, const MlpCache& cache, const Mat& d_output) {
  const std::size_t n = w.layers.size();
  if (cache.pre.size() != n || cache.inputs.size() != n)
    throw Error("mlp_backward: forward cache does not match the network");
  MlpGrads g;
  g.weight.resize(n);
  g.bias.resize(n);
  Mat delta = d_output;
  for (std::size_t k = n; k-- > 0;) {
    const Activation act = k + 1 == n ? w.output : w.hidden;
    if (delta.rows() != cache.pre[k].rows() || delta.cols() != cache.pre[k].cols())
      throw DimensionError("mlp_backward: gradient shape mismatch at layer " + std::to_string(k));
    const Mat dz = delta.cwiseProduct(activation_slope(cache.pre[k], act));
    g.weight[k] = dz * cache.inputs[k].transpose();
    g.bias[k] = dz.rowwise().sum();
    if (k > 0) delta = w.layers[k].weight.transpose() * dz;
  }
  return g;
}

Vec flatten_parameters(const MlpWeights& w) {
  Vec flat(static_cast<Eigen::Index>(w.num_parameters()));
  Eigen::Index at = 0;
  for (const auto& l : w.layers) {
    flat.segment(at, l.weight.size()) = l.weight.reshaped();
    at += l.weight.size();
    flat.segment(at, l.bias.size()) = l.bias;
    at += l.bias.size();
  }
  return flat;
}

void assign_parameters(MlpWeights& w, const Vec& flat) {
  if (flat.size() != static_cast<Eigen::Index>(w.num_parameters()))
    throw DimensionError("assign_parameters: size mismatch");
  Eigen::Index at = 0;
  for (auto& l : w.layers) {
    l.weight.reshaped() = flat.segment(at, l.weight.size());
    at += l.weight.size();
    l.bias = flat.segment(at, l.bias.size());
    at += l.bias.size();
  }
}

Vec flatten_gradients(const MlpGrads& g) {
  Eigen::Index n = 0;
  for (std::size_t i = 0; i < g.weight.size(); ++i) n += g.weight[i].size() + g.bias[i].size();
  Vec flat(n);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < g.weight.size(); ++i) {
    flat.segment(at, g.weight[i].size()) = g.weight[i].reshaped();
    at += g.weight[i].size();
    flat.segment(at, g.bias[i].size()) = g.bias[i];
    at += g.bias[i].size();
  }
  return flat;
}

}  // namespace tdk
