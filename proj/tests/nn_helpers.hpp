#pragma once

// Finite-difference gradient check shared by unit and acceptance tests.

#include <algorithm>
#include <array>

#include "oracles.hpp"
#include "pdeshard/neural.hpp"
#include "pdeshard/rng.hpp"

namespace helpers {

using namespace pdeshard;

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t parameters = 0;
};

/// A random small network, input and target (all spatial sizes <= 12):
/// random hidden widths, k in {3, 5}, random padding plan, nonzero biases.
struct Triple {
  nn::ConvNet net;
  std::array<nn::PadMode, nn::kNumLayers> plan;
  Tensor3 input;
  Tensor3 target;
};

inline Triple random_triple(std::uint64_t seed) {
  Rng rng(seed);
  Triple t;
  const int k = rng.below(2) == 0 ? 3 : 5;
  std::array<int, nn::kNumLayers + 1> ch = {4, 0, 0, 0, 4};
  for (int l = 1; l < nn::kNumLayers; ++l) ch[l] = 2 + static_cast<int>(rng.below(4));
  int shrink = 0;
  for (int l = 0; l < nn::kNumLayers; ++l) {
    // Keep enough room so the output is at least 1x1 for the sizes below.
    const bool valid = rng.below(2) == 0 && shrink + (k - 1) <= 12 - 2;
    t.plan[l] = valid ? nn::PadMode::Valid : nn::PadMode::ZeroSame;
    if (valid) shrink += k - 1;
    nn::ConvLayer layer(ch[l], ch[l + 1], k, t.plan[l]);
    const double b = 1.0 / std::sqrt(static_cast<double>(ch[l] * k * k));
    for (double& w : layer.weights) w = rng.uniform(-2 * b, 2 * b);
    for (double& w : layer.bias) w = rng.uniform(-0.2, 0.2);
    t.net.layers.push_back(std::move(layer));
  }
  const int lo = std::max(shrink + 1, 4);
  const int h = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(12 - lo + 1)));
  const int w = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(12 - lo + 1)));
  t.input = oracle::random_tensor(rng, 4, h, w);
  t.target = oracle::random_tensor(rng, 4, h - shrink, w - shrink);
  return t;
}

/// Compares the backprop gradient of the MAPE loss with central differences
/// (h = 1e-6) of an extended-precision reference for every weight and bias.
template <typename T = long double>
GradCheck check_gradients(const Triple& t, double h = 1e-6) {
  nn::ForwardCache cache;
  const Tensor3 pred = nn::net_forward(t.input, t.net, t.plan, &cache);
  const nn::LossResult loss = nn::mape_loss(pred, t.target);
  const nn::Gradients analytic = nn::net_backward(t.net, cache, loss.grad, t.plan);

  auto numeric = [&](int layer, bool bias, std::size_t index) {
    const T up = oracle::reference_mape<T>(t.net, t.plan, t.input, t.target, nn::kMapeDelta,
                                           {layer, bias, index, static_cast<long double>(h)});
    const T down = oracle::reference_mape<T>(t.net, t.plan, t.input, t.target, nn::kMapeDelta,
                                             {layer, bias, index, -static_cast<long double>(h)});
    return static_cast<double>((up - down) / (2 * static_cast<T>(h)));
  };
  GradCheck out;
  for (std::size_t l = 0; l < t.net.layers.size(); ++l) {
    const auto& layer = t.net.layers[l];
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
      const double n = numeric(static_cast<int>(l), false, i);
      out.max_rel_error = std::max(out.max_rel_error, oracle::relative_error(analytic.weights[l][i], n));
      ++out.parameters;
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      const double n = numeric(static_cast<int>(l), true, i);
      out.max_rel_error = std::max(out.max_rel_error, oracle::relative_error(analytic.bias[l][i], n));
      ++out.parameters;
    }
  }
  return out;
}

}  // namespace helpers
