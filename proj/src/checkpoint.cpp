#include "pdeshard/checkpoint.hpp"

#include "binary_io.hpp"
#include "pdeshard/error.hpp"

namespace pdeshard::nn {

namespace {
constexpr std::string_view kMagic = "PDSHCKPT";
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const ConvNet& net = ckpt.net;
  const AdamState& s = ckpt.adam;
  if (s.m.weights.size() != net.layers.size() || s.v.weights.size() != net.layers.size())
    throw ShapeError("write_checkpoint: optimizer state does not match network");
  detail::ByteWriter out;
  out.bytes(kMagic);
  out.u32(kCheckpointVersion);
  out.f64(net.leaky_slope);
  out.u32(static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& l : net.layers) {
    out.u32(static_cast<std::uint32_t>(l.in_ch));
    out.u32(static_cast<std::uint32_t>(l.out_ch));
    out.u32(static_cast<std::uint32_t>(l.k));
    out.u32(static_cast<std::uint32_t>(l.pad_mode));
  }
  for (const auto& l : net.layers) {
    out.f64s(l.weights);
    out.f64s(l.bias);
  }
  out.f64(s.hyper.eta);
  out.f64(s.hyper.rho1);
  out.f64(s.hyper.rho2);
  out.f64(s.hyper.eps);
  out.u64(s.t);
  for (const Gradients* g : {&s.m, &s.v})
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      out.f64s(g->weights[l]);
      out.f64s(g->bias[l]);
    }
  out.write_file(path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  auto in = detail::ByteReader::from_file(path);
  in.need(kMagic.size());
  if (in.bytes(kMagic.size()) != kMagic) throw FormatError(path.string() + ": not a checkpoint (bad magic)");
  const auto version = in.u32();
  if (version != kCheckpointVersion)
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.net.leaky_slope = in.f64();
  const auto count = in.u32();
  if (count > 64) throw FormatError(path.string() + ": implausible layer count");
  for (std::uint32_t l = 0; l < count; ++l) {
    const int in_ch = static_cast<int>(in.u32());
    const int out_ch = static_cast<int>(in.u32());
    const int k = static_cast<int>(in.u32());
    const auto mode = in.u32();
    if (mode > 1 || k < 1 || k % 2 == 0 || in_ch < 1 || out_ch < 1)
      throw FormatError(path.string() + ": bad layer header");
    ck.net.layers.emplace_back(in_ch, out_ch, k, static_cast<PadMode>(mode));
  }
  for (auto& l : ck.net.layers) {
    in.f64s(l.weights);
    in.f64s(l.bias);
  }
  ck.adam = AdamState::fresh(ck.net);
  ck.adam.hyper.eta = in.f64();
  ck.adam.hyper.rho1 = in.f64();
  ck.adam.hyper.rho2 = in.f64();
  ck.adam.hyper.eps = in.f64();
  ck.adam.t = in.u64();
  for (Gradients* g : {&ck.adam.m, &ck.adam.v})
    for (std::size_t l = 0; l < count; ++l) {
      in.f64s(g->weights[l]);
      in.f64s(g->bias[l]);
    }
  if (in.remaining() != 0) throw FormatError(path.string() + ": trailing bytes after checkpoint");
  return ck;
}

}  // namespace pdeshard::nn
