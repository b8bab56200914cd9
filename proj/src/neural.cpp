#include "pdeshard/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "pdeshard/error.hpp"
#include "pdeshard/rng.hpp"

namespace pdeshard::nn {

ConvLayer::ConvLayer(int in, int out, int kernel, PadMode mode)
    : in_ch(in),
      out_ch(out),
      k(kernel),
      weights(static_cast<std::size_t>(out) * in * kernel * kernel, 0.0),
      bias(static_cast<std::size_t>(out), 0.0),
      pad_mode(mode) {
  if (kernel < 1 || kernel % 2 == 0) throw ShapeError("ConvLayer: kernel size must be odd");
}

std::size_t ConvNet::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

Gradients Gradients::zeros_like(const ConvNet& net) {
  Gradients g;
  for (const auto& l : net.layers) {
    g.weights.emplace_back(l.weights.size(), 0.0);
    g.bias.emplace_back(l.bias.size(), 0.0);
  }
  return g;
}

void Gradients::add(const Gradients& o) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t j = 0; j < weights[l].size(); ++j) weights[l][j] += o.weights[l][j];
    for (std::size_t j = 0; j < bias[l].size(); ++j) bias[l][j] += o.bias[l][j];
  }
}

void Gradients::scale(double s) {
  for (auto& w : weights)
    for (double& x : w) x *= s;
  for (auto& b : bias)
    for (double& x : b) x *= s;
}

bool Gradients::all_finite() const noexcept {
  auto ok = [](const std::vector<std::vector<double>>& vs) {
    return std::all_of(vs.begin(), vs.end(), [](const auto& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    });
  };
  return ok(weights) && ok(bias);
}

AdamState AdamState::fresh(const ConvNet& net, const AdamHyper& hyper) {
  return AdamState{hyper, 0, Gradients::zeros_like(net), Gradients::zeros_like(net)};
}

double leaky_relu(double x, double slope) noexcept { return x >= 0 ? x : slope * x; }

double leaky_relu_grad(double x, double slope) noexcept { return x > 0 ? 1.0 : slope; }

namespace {

Tensor3 pad_zeros(const Tensor3& x, int p) {
  if (p == 0) return x;
  Tensor3 out(x.c(), x.h() + 2 * p, x.w() + 2 * p);
  place_region(out, x, p, p);
  return out;
}

void check_input(const Tensor3& x, const ConvLayer& layer, PadMode mode, const char* who) {
  if (x.c() != layer.in_ch)
    throw ShapeError(std::string(who) + ": input has " + std::to_string(x.c()) + " channels, layer expects " +
                     std::to_string(layer.in_ch));
  if (mode == PadMode::Valid && (x.h() < layer.k || x.w() < layer.k))
    throw ShapeError(std::string(who) + ": input smaller than kernel in Valid mode");
}

}  // namespace

namespace {

// out[o] += sum_i sum_ky sum_kx w[o][i][ky][kx] * x[i][r+ky][c+kx] over a
// pre-padded input. A whole kernel row is applied per output element so the
// output row is loaded and stored once per (i, ky) instead of per tap.
template <int K>
void correlate_fixed(const Tensor3& xp, const double* weights, int in_ch, int out_ch, Tensor3& out) {
  const int ho = out.h();
  const int wo = out.w();
  for (int o = 0; o < out_ch; ++o) {
    for (int i = 0; i < in_ch; ++i) {
      const double* wk = weights + (static_cast<std::size_t>(o) * in_ch + i) * K * K;
      for (int ky = 0; ky < K; ++ky) {
        double w[K];
        for (int kx = 0; kx < K; ++kx) w[kx] = wk[ky * K + kx];
        for (int r = 0; r < ho; ++r) {
          double* __restrict orow = out.row(o, r);
          const double* __restrict irow = xp.row(i, r + ky);
          for (int c = 0; c < wo; ++c) {
            double acc = orow[c];
            for (int kx = 0; kx < K; ++kx) acc += w[kx] * irow[c + kx];
            orow[c] = acc;
          }
        }
      }
    }
  }
}

void correlate_any(const Tensor3& xp, const double* weights, int in_ch, int out_ch, int k, Tensor3& out) {
  const int ho = out.h();
  const int wo = out.w();
  for (int o = 0; o < out_ch; ++o)
    for (int i = 0; i < in_ch; ++i)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const double wv = weights[((static_cast<std::size_t>(o) * in_ch + i) * k + ky) * k + kx];
          for (int r = 0; r < ho; ++r) {
            double* __restrict orow = out.row(o, r);
            const double* __restrict irow = xp.row(i, r + ky) + kx;
            for (int c = 0; c < wo; ++c) orow[c] += wv * irow[c];
          }
        }
}

void correlate(const Tensor3& xp, const double* weights, int in_ch, int out_ch, int k, Tensor3& out) {
  switch (k) {
    case 3: correlate_fixed<3>(xp, weights, in_ch, out_ch, out); break;
    case 5: correlate_fixed<5>(xp, weights, in_ch, out_ch, out); break;
    default: correlate_any(xp, weights, in_ch, out_ch, k, out); break;
  }
}

using Lanes = double __attribute__((vector_size(32)));

[[gnu::always_inline]] inline Lanes load_lanes(const double* p) noexcept {
  Lanes v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

// gw[o][i][ky][kx] = sum_{r,c} g[o][r][c] * xp[i][r+ky][c+kx]. The K
// horizontal taps of one kernel row share each load of g and accumulate in
// four fixed lanes, so the summation order does not depend on the compiler.
template <int K>
void weight_grads_fixed(const Tensor3& xp, const Tensor3& g, int in_ch, int out_ch, double* gw) {
  const int ho = g.h();
  const int wo = g.w();
  for (int o = 0; o < out_ch; ++o)
    for (int i = 0; i < in_ch; ++i)
      for (int ky = 0; ky < K; ++ky) {
        Lanes acc[K] = {};
        double tail[K] = {};
        for (int r = 0; r < ho; ++r) {
          const double* grow = g.row(o, r);
          const double* irow = xp.row(i, r + ky);
          int c = 0;
          for (; c + 4 <= wo; c += 4) {
            const Lanes gv = load_lanes(grow + c);
            for (int kx = 0; kx < K; ++kx) acc[kx] += gv * load_lanes(irow + c + kx);
          }
          for (; c < wo; ++c)
            for (int kx = 0; kx < K; ++kx) tail[kx] += grow[c] * irow[c + kx];
        }
        double* dst = gw + ((static_cast<std::size_t>(o) * in_ch + i) * K + ky) * K;
        for (int kx = 0; kx < K; ++kx) dst[kx] = ((acc[kx][0] + acc[kx][1]) + (acc[kx][2] + acc[kx][3])) + tail[kx];
      }
}

void weight_grads_any(const Tensor3& xp, const Tensor3& g, int in_ch, int out_ch, int k, double* gw) {
  const int ho = g.h();
  const int wo = g.w();
  for (int o = 0; o < out_ch; ++o)
    for (int i = 0; i < in_ch; ++i)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          double sum = 0.0;
          for (int r = 0; r < ho; ++r) {
            const double* grow = g.row(o, r);
            const double* irow = xp.row(i, r + ky) + kx;
            for (int c = 0; c < wo; ++c) sum += grow[c] * irow[c];
          }
          gw[((static_cast<std::size_t>(o) * in_ch + i) * k + ky) * k + kx] = sum;
        }
}

void weight_grads(const Tensor3& xp, const Tensor3& g, int in_ch, int out_ch, int k, double* gw) {
  switch (k) {
    case 3: weight_grads_fixed<3>(xp, g, in_ch, out_ch, gw); break;
    case 5: weight_grads_fixed<5>(xp, g, in_ch, out_ch, gw); break;
    default: weight_grads_any(xp, g, in_ch, out_ch, k, gw); break;
  }
}

}  // namespace

Tensor3 conv2d_forward(const Tensor3& x, const ConvLayer& layer, PadMode mode) {
  check_input(x, layer, mode, "conv2d_forward");
  const int k = layer.k;
  const Tensor3 xp = pad_zeros(x, mode == PadMode::ZeroSame ? layer.radius() : 0);
  Tensor3 out(layer.out_ch, xp.h() - k + 1, xp.w() - k + 1);
  for (int o = 0; o < layer.out_ch; ++o) std::fill(out.plane(o).begin(), out.plane(o).end(), layer.bias[o]);
  correlate(xp, layer.weights.data(), layer.in_ch, layer.out_ch, k, out);
  return out;
}

ConvGrads conv2d_backward(const Tensor3& x, const ConvLayer& layer, const Tensor3& grad_out, PadMode mode) {
  check_input(x, layer, mode, "conv2d_backward");
  const int k = layer.k;
  const int pad = mode == PadMode::ZeroSame ? layer.radius() : 0;
  const Tensor3 xp = pad_zeros(x, pad);
  const int ho = xp.h() - k + 1;
  const int wo = xp.w() - k + 1;
  if (grad_out.c() != layer.out_ch || grad_out.h() != ho || grad_out.w() != wo)
    throw ShapeError("conv2d_backward: grad_out shape does not match forward output");

  ConvGrads g;
  g.grad_w.assign(layer.weights.size(), 0.0);
  g.grad_b.assign(layer.bias.size(), 0.0);

  for (int o = 0; o < layer.out_ch; ++o) {
    double sb = 0.0;
    for (double v : grad_out.plane(o)) sb += v;
    g.grad_b[o] = sb;
  }
  weight_grads(xp, grad_out, layer.in_ch, layer.out_ch, k, g.grad_w.data());

  // dL/dxp is the full correlation of grad_out with the spatially flipped,
  // channel-transposed kernel.
  std::vector<double> flipped(layer.weights.size());
  for (int o = 0; o < layer.out_ch; ++o)
    for (int i = 0; i < layer.in_ch; ++i)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx)
          flipped[((static_cast<std::size_t>(i) * layer.out_ch + o) * k + (k - 1 - ky)) * k + (k - 1 - kx)] =
              layer.weight(o, i, ky, kx);
  const Tensor3 gpad = pad_zeros(grad_out, k - 1);
  Tensor3 gxp(xp.c(), xp.h(), xp.w());
  correlate(gpad, flipped.data(), layer.out_ch, layer.in_ch, k, gxp);

  g.grad_x = pad == 0 ? std::move(gxp) : slice_region(gxp, pad, pad, x.h(), x.w());
  return g;
}

std::array<PadMode, kNumLayers> pad_plan(PaddingStrategy s) noexcept {
  if (s == PaddingStrategy::ExactHalo) return {PadMode::Valid, PadMode::Valid, PadMode::Valid, PadMode::Valid};
  return {PadMode::Valid, PadMode::ZeroSame, PadMode::ZeroSame, PadMode::ZeroSame};
}

int input_extent(int core, PaddingStrategy s) noexcept { return core + 2 * halo_width(s); }

Tensor3 net_forward(const Tensor3& x, const ConvNet& net, PaddingStrategy s, ForwardCache* cache) {
  const int halo = halo_width(s);
  if (x.c() != kLayerChannels.front() || x.h() < 2 * halo + 1 || x.w() < 2 * halo + 1)
    throw ShapeError("net_forward: input " + std::to_string(x.c()) + "x" + std::to_string(x.h()) + "x" +
                     std::to_string(x.w()) + " needs 4 channels and a " + std::to_string(halo) +
                     "-cell halo around a core of at least 1x1");
  return net_forward(x, net, pad_plan(s), cache);
}

Tensor3 net_forward(const Tensor3& x, const ConvNet& net, const std::array<PadMode, kNumLayers>& plan,
                    ForwardCache* cache) {
  if (net.layers.size() != kNumLayers) throw ShapeError("net_forward: network must have 4 layers");
  if (cache) {
    cache->inputs.clear();
    cache->pre_act.clear();
  }
  Tensor3 a = x;
  for (int l = 0; l < kNumLayers; ++l) {
    Tensor3 z = conv2d_forward(a, net.layers[l], plan[l]);
    if (cache) {
      cache->inputs.push_back(std::move(a));
      cache->pre_act.push_back(z);
    }
    if (l + 1 < kNumLayers)
      for (double& v : z.data()) v = leaky_relu(v, net.leaky_slope);
    a = std::move(z);
  }
  return a;
}

Gradients net_backward(const ConvNet& net, const ForwardCache& cache, const Tensor3& grad_out,
                       const std::array<PadMode, kNumLayers>& plan) {
  if (cache.inputs.size() != kNumLayers) throw ShapeError("net_backward: forward cache incomplete");
  Gradients g = Gradients::zeros_like(net);
  Tensor3 grad = grad_out;
  for (int l = kNumLayers - 1; l >= 0; --l) {
    if (l + 1 < kNumLayers) {
      const auto z = cache.pre_act[l].data();
      auto gd = grad.data();
      for (std::size_t j = 0; j < gd.size(); ++j) gd[j] *= leaky_relu_grad(z[j], net.leaky_slope);
    }
    ConvGrads cg = conv2d_backward(cache.inputs[l], net.layers[l], grad, plan[l]);
    g.weights[l] = std::move(cg.grad_w);
    g.bias[l] = std::move(cg.grad_b);
    grad = std::move(cg.grad_x);
  }
  return g;
}

LossResult mape_loss(const Tensor3& pred, const Tensor3& target, double delta) {
  if (!pred.same_shape(target)) throw ShapeError("mape_loss: shape mismatch");
  if (!(delta > 0)) throw ConfigError("mape_loss: delta must be > 0");
  LossResult res{0.0, Tensor3(pred.c(), pred.h(), pred.w())};
  const double scale = 100.0 / static_cast<double>(pred.size());
  const auto p = pred.data();
  const auto t = target.data();
  auto g = res.grad.data();
  double sum = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double denom = std::abs(t[j]) + delta;
    const double diff = p[j] - t[j];
    sum += std::abs(diff) / denom;
    g[j] = diff > 0 ? scale / denom : diff < 0 ? -scale / denom : 0.0;
  }
  res.loss = scale * sum;
  return res;
}

double mape(const Tensor3& pred, const Tensor3& target, double delta) {
  if (!pred.same_shape(target)) throw ShapeError("mape: shape mismatch");
  const auto p = pred.data();
  const auto t = target.data();
  double sum = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) sum += std::abs(p[j] - t[j]) / (std::abs(t[j]) + delta);
  return p.empty() ? 0.0 : 100.0 * sum / static_cast<double>(p.size());
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, const AdamHyper& hyper, std::uint64_t t) {
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size())
    throw ShapeError("adam_update: parameter/gradient/moment sizes differ");
  const double c1 = 1.0 - std::pow(hyper.rho1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(hyper.rho2, static_cast<double>(t));
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double g = grads[j];
    m[j] = hyper.rho1 * m[j] + (1.0 - hyper.rho1) * g;
    v[j] = hyper.rho2 * v[j] + (1.0 - hyper.rho2) * g * g;
    const double mhat = m[j] / c1;
    const double vhat = v[j] / c2;
    params[j] -= hyper.eta * mhat / std::sqrt(vhat + hyper.eps);
  }
}

void adam_step(ConvNet& net, const Gradients& grads, AdamState& state) {
  if (state.t == UINT64_MAX) throw NumericError("adam_step: step counter overflow");
  if (grads.weights.size() != net.layers.size() || state.m.weights.size() != net.layers.size())
    throw ShapeError("adam_step: gradient/state layer count mismatch");
  ++state.t;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    adam_update(net.layers[l].weights, grads.weights[l], state.m.weights[l], state.v.weights[l], state.hyper,
                state.t);
    adam_update(net.layers[l].bias, grads.bias[l], state.m.bias[l], state.v.bias[l], state.hyper, state.t);
  }
}

double glorot_bound(const ConvLayer& layer) noexcept {
  const double k2 = static_cast<double>(layer.k) * layer.k;
  return std::sqrt(6.0 / (layer.in_ch * k2 + layer.out_ch * k2));
}

ConvNet init_network(std::uint64_t seed) {
  Rng rng(seed);
  ConvNet net;
  for (int l = 0; l < kNumLayers; ++l) {
    ConvLayer layer(kLayerChannels[l], kLayerChannels[l + 1], kKernelSize);
    const double b = glorot_bound(layer);
    for (double& w : layer.weights) w = rng.uniform(-b, b);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

}  // namespace pdeshard::nn
