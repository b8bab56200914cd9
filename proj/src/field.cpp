#include "pdeshard/field.hpp"

#include <fstream>
#include <iterator>

#include "binary_io.hpp"
#include "pdeshard/error.hpp"

namespace pdeshard {

namespace detail {

void ByteWriter::write_file(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

ByteReader ByteReader::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ByteReader(std::move(buf), path.string());
}

}  // namespace detail

namespace {
constexpr std::string_view kDatasetMagic = "PDSHDATA";
}

Snapshot::Snapshot(int h, int w) : fields_(kNumChannels, h, w) {}

Snapshot::Snapshot(Tensor3 fields) : fields_(std::move(fields)) {
  if (fields_.c() != kNumChannels)
    throw ShapeError("Snapshot: expected 4 channels, got " + std::to_string(fields_.c()));
  if (!fields_.all_finite()) throw NumericError("Snapshot: non-finite value");
}

Tensor3 snapshot_to_tensor(const Snapshot& s) { return s.tensor(); }

Snapshot tensor_to_snapshot(Tensor3 t) { return Snapshot(std::move(t)); }

void Dataset::validate() const {
  if (frames.empty()) throw ShapeError("Dataset: no frames");
  for (const auto& f : frames)
    if (f.h() != h() || f.w() != w()) throw ShapeError("Dataset: frames differ in shape");
  if (stride == 0) throw ShapeError("Dataset: stride must be >= 1");
}

namespace {

void write_header(detail::ByteWriter& out, const Dataset& d) {
  out.bytes(kDatasetMagic);
  out.u32(kDatasetVersion);
  out.u32(static_cast<std::uint32_t>(d.frames.size()));
  out.u32(static_cast<std::uint32_t>(d.h()));
  out.u32(static_cast<std::uint32_t>(d.w()));
  out.f64(d.dt);
  out.u32(d.first_index);
  out.u32(d.stride);
  const SolverConfig& m = d.meta;
  out.u32(m.n);
  out.u32(m.t_steps);
  for (double v : {m.extent, m.gamma, m.rho_c, m.p_c, m.uc_x, m.uc_y, m.pulse_amp, m.pulse_hw, m.pulse_cx,
                   m.pulse_cy, m.cfl})
    out.f64(v);
}

std::vector<char> read_exact(std::istream& in, std::size_t n, const std::filesystem::path& path) {
  std::vector<char> buf(n);
  in.read(buf.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw TruncatedError(path.string() + ": truncated, wanted " + std::to_string(n) + " bytes, got " +
                         std::to_string(in.gcount()));
  return buf;
}

}  // namespace

void write_dataset(const Dataset& d, const std::filesystem::path& path) {
  d.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  detail::ByteWriter header;
  write_header(header, d);
  out.write(header.buffer().data(), static_cast<std::streamsize>(header.buffer().size()));
  // Frames are encoded one at a time so full-scale datasets need no second
  // in-memory copy.
  for (const auto& f : d.frames) {
    detail::ByteWriter frame;
    frame.f64s(f.tensor().data());
    out.write(frame.buffer().data(), static_cast<std::streamsize>(frame.buffer().size()));
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::error_code ec;
  const auto file_size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());

  std::vector<char> magic_buf(kDatasetMagic.size());
  in.read(magic_buf.data(), static_cast<std::streamsize>(magic_buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != magic_buf.size() ||
      std::string_view(magic_buf.data(), magic_buf.size()) != kDatasetMagic)
    throw FormatError(path.string() + ": not a dataset file (bad magic)");
  detail::ByteReader head(read_exact(in, kDatasetHeaderBytes - kDatasetMagic.size(), path), path.string());
  const auto version = head.u32();
  if (version != kDatasetVersion)
    throw FormatError(path.string() + ": unsupported dataset version " + std::to_string(version));
  Dataset d;
  const auto t = head.u32();
  const auto h = static_cast<int>(head.u32());
  const auto w = static_cast<int>(head.u32());
  d.dt = head.f64();
  d.first_index = head.u32();
  d.stride = head.u32();
  SolverConfig& m = d.meta;
  m.n = head.u32();
  m.t_steps = head.u32();
  for (double* v : {&m.extent, &m.gamma, &m.rho_c, &m.p_c, &m.uc_x, &m.uc_y, &m.pulse_amp, &m.pulse_hw,
                    &m.pulse_cx, &m.pulse_cy, &m.cfl})
    *v = head.f64();

  const std::size_t frame_bytes = static_cast<std::size_t>(kNumChannels) * h * w * 8;
  const std::uintmax_t expected = kDatasetHeaderBytes + static_cast<std::uintmax_t>(t) * frame_bytes;
  if (file_size < expected)
    throw TruncatedError(path.string() + ": truncated, header declares " + std::to_string(expected) +
                         " bytes, file has " + std::to_string(file_size));
  if (file_size > expected) throw FormatError(path.string() + ": trailing bytes after payload");

  d.frames.reserve(t);
  for (std::uint32_t i = 0; i < t; ++i) {
    detail::ByteReader frame(read_exact(in, frame_bytes, path), path.string());
    Tensor3 f(kNumChannels, h, w);
    frame.f64s(f.data());
    d.frames.emplace_back(std::move(f));
  }
  return d;
}

std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a(buf);
}

}  // namespace pdeshard
