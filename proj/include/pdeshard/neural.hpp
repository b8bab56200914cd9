#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "pdeshard/tensor.hpp"

namespace pdeshard::nn {

enum class PadMode {
  ZeroSame,  // (k-1)/2 zeros per side, spatial shape preserved
  Valid,     // no padding, each spatial dim shrinks by k-1
};

// How a subdomain network sees its halo.
//  ZeroInner: input carries a 2-cell overlap consumed by the first (Valid)
//             layer; layers 2-4 zero-pad.
//  ExactHalo: input carries an 8-cell halo of real neighbor data and every
//             layer is Valid.
enum class PaddingStrategy { ZeroInner, ExactHalo };

struct ConvLayer {
  int in_ch = 0;
  int out_ch = 0;
  int k = 0;
  std::vector<double> weights;  // out_ch x in_ch x k x k
  std::vector<double> bias;     // out_ch
  PadMode pad_mode = PadMode::Valid;

  ConvLayer() = default;
  ConvLayer(int in, int out, int kernel, PadMode mode = PadMode::Valid);

  double& weight(int o, int i, int ky, int kx) noexcept {
    return weights[((static_cast<std::size_t>(o) * in_ch + i) * k + ky) * k + kx];
  }
  double weight(int o, int i, int ky, int kx) const noexcept {
    return weights[((static_cast<std::size_t>(o) * in_ch + i) * k + ky) * k + kx];
  }
  int radius() const noexcept { return (k - 1) / 2; }

  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

// Channel plan of the four-layer network: 4 -> 6 -> 16 -> 6 -> 4, 5x5 kernels.
inline constexpr int kNumLayers = 4;
inline constexpr std::array<int, kNumLayers + 1> kLayerChannels = {4, 6, 16, 6, 4};
inline constexpr int kKernelSize = 5;
inline constexpr double kLeakySlope = 0.01;

/// Input cells a strategy needs beyond the core on each side.
constexpr int halo_width(PaddingStrategy s) noexcept {
  if (s == PaddingStrategy::ZeroInner) return (kKernelSize - 1) / 2;
  int total = 0;
  for (int l = 0; l < kNumLayers; ++l) total += (kKernelSize - 1) / 2;
  return total;
}

/// Leaky ReLU after every hidden layer, linear output layer.
struct ConvNet {
  std::vector<ConvLayer> layers;
  double leaky_slope = kLeakySlope;

  std::size_t parameter_count() const noexcept;
  friend bool operator==(const ConvNet&, const ConvNet&) = default;
};

/// Per-layer weight/bias gradients, shaped like the network parameters.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  static Gradients zeros_like(const ConvNet& net);
  void add(const Gradients& o);
  void scale(double s);
  bool all_finite() const noexcept;
};

struct AdamHyper {
  double eta = 0.01;
  double rho1 = 0.9;
  double rho2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

struct AdamState {
  AdamHyper hyper;
  std::uint64_t t = 0;
  Gradients m;
  Gradients v;

  static AdamState fresh(const ConvNet& net, const AdamHyper& hyper = {});
};

// ---- elementwise ---------------------------------------------------------

double leaky_relu(double x, double slope) noexcept;
/// Derivative; `slope` for x <= 0.
double leaky_relu_grad(double x, double slope) noexcept;

// ---- convolution ---------------------------------------------------------

/// Cross-correlation plus per-output-channel bias.
Tensor3 conv2d_forward(const Tensor3& x, const ConvLayer& layer, PadMode mode);
inline Tensor3 conv2d_forward(const Tensor3& x, const ConvLayer& layer) {
  return conv2d_forward(x, layer, layer.pad_mode);
}

struct ConvGrads {
  Tensor3 grad_x;
  std::vector<double> grad_w;
  std::vector<double> grad_b;
};

/// Gradients of conv2d_forward(x, layer, mode) contracted with grad_out.
ConvGrads conv2d_backward(const Tensor3& x, const ConvLayer& layer, const Tensor3& grad_out, PadMode mode);
inline ConvGrads conv2d_backward(const Tensor3& x, const ConvLayer& layer, const Tensor3& grad_out) {
  return conv2d_backward(x, layer, grad_out, layer.pad_mode);
}

// ---- network -------------------------------------------------------------

/// Per-layer padding for a strategy.
std::array<PadMode, kNumLayers> pad_plan(PaddingStrategy s) noexcept;
/// Spatial input extent needed to produce `core` cells under `s`.
int input_extent(int core, PaddingStrategy s) noexcept;

// Activations kept by the forward pass for backprop.
struct ForwardCache {
  std::vector<Tensor3> inputs;       // input to each layer
  std::vector<Tensor3> pre_act;      // raw conv output of each layer
};

/// Throws ShapeError if x is not 4 x (core + 2*halo) for some core >= 1.
Tensor3 net_forward(const Tensor3& x, const ConvNet& net, PaddingStrategy s, ForwardCache* cache = nullptr);
/// Forward with an explicit per-layer padding plan.
Tensor3 net_forward(const Tensor3& x, const ConvNet& net, const std::array<PadMode, kNumLayers>& plan,
                    ForwardCache* cache = nullptr);
Gradients net_backward(const ConvNet& net, const ForwardCache& cache, const Tensor3& grad_out,
                       const std::array<PadMode, kNumLayers>& plan);

// ---- loss / optimizer ----------------------------------------------------

inline constexpr double kMapeDelta = 1e-6;

struct LossResult {
  double loss = 0.0;  // percent
  Tensor3 grad;
};

/// (100/m) * sum |pred - target| / (|target| + delta) and its subgradient
/// (zero where pred == target).
LossResult mape_loss(const Tensor3& pred, const Tensor3& target, double delta = kMapeDelta);
double mape(const Tensor3& pred, const Tensor3& target, double delta = kMapeDelta);

/// One ADAM update on a flat parameter block at step t (already
/// incremented, so t >= 1):
///   m <- rho1 m + (1-rho1) g,  v <- rho2 v + (1-rho2) g*g
///   w <- w - eta * mhat / sqrt(vhat + eps)
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, const AdamHyper& hyper, std::uint64_t t);

/// Increments state.t and applies adam_update to every parameter block.
void adam_step(ConvNet& net, const Gradients& grads, AdamState& state);

/// Glorot-uniform weights, b = sqrt(6 / ((in_ch + out_ch) k^2)); zero biases.
ConvNet init_network(std::uint64_t seed);
double glorot_bound(const ConvLayer& layer) noexcept;

}  // namespace pdeshard::nn
