#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "pdeshard/error.hpp"
#include "pdeshard/euler.hpp"
#include "pdeshard/field.hpp"
#include "pdeshard/rng.hpp"

using namespace pdeshard;
namespace fs = std::filesystem;

namespace {

bool g_full_scale = false;

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("pdeshard_test_field_" + name); }

Dataset random_dataset(Rng& rng, int frames, int h, int w) {
  Dataset d;
  d.dt = rng.uniform(0.001, 0.1);
  d.first_index = static_cast<std::uint32_t>(rng.below(100));
  d.stride = 1 + static_cast<std::uint32_t>(rng.below(4));
  d.meta.n = static_cast<std::uint32_t>(h);
  d.meta.t_steps = static_cast<std::uint32_t>(frames);
  d.meta.pulse_cx = rng.uniform(-1, 1);
  d.meta.gamma = rng.uniform(1.1, 1.7);
  for (int f = 0; f < frames; ++f) d.frames.emplace_back(oracle::random_tensor(rng, 4, h, w, -1e3, 1e3));
  return d;
}

std::uint64_t frame_hash(const Snapshot& s) {
  const auto data = s.tensor().data();
  return fnv1a({reinterpret_cast<const unsigned char*>(data.data()), data.size_bytes()});
}

}  // namespace

TEST_CASE("channel order is rho, ux, uy, p") {
  CHECK(kChannelNames[kRho] == "rho");
  CHECK(kChannelNames[kUx] == "ux");
  CHECK(kChannelNames[kUy] == "uy");
  CHECK(kChannelNames[kP] == "p");
}

TEST_CASE("snapshot_to_tensor") {
  SUBCASE("zero snapshot") {
    const Tensor3 t = snapshot_to_tensor(Snapshot(2, 2));
    CHECK(t.c() == 4);
    CHECK(t.h() == 2);
    CHECK(t.w() == 2);
    for (double v : t.data()) CHECK(v == 0.0);
  }
  SUBCASE("single element lands at flat index 0") {
    Tensor3 raw(4, 2, 2);
    raw(kRho, 0, 0) = 0.5;
    const Tensor3 t = snapshot_to_tensor(Snapshot(raw));
    CHECK(t.data()[0] == 0.5);
    for (std::size_t i = 1; i < t.size(); ++i) CHECK(t.data()[i] == 0.0);
  }
  SUBCASE("tensor -> snapshot -> tensor is the identity") {
    Rng rng(7);
    const Tensor3 t = oracle::random_tensor(rng, 4, 5, 3);
    CHECK(snapshot_to_tensor(tensor_to_snapshot(t)) == t);
  }
  SUBCASE("invariants enforced") {
    CHECK_THROWS_AS(Snapshot(Tensor3(3, 2, 2)), ShapeError);
    Tensor3 bad(4, 2, 2);
    bad(kP, 1, 1) = std::nan("");
    CHECK_THROWS_AS(Snapshot{bad}, NumericError);
  }
}

TEST_CASE("dataset file size is header plus float64 payload") {
  Dataset d;
  d.dt = 0.25;
  d.frames = {Snapshot(3, 3), Snapshot(3, 3)};
  const auto path = temp_file("size.bin");
  write_dataset(d, path);
  CHECK(fs::file_size(path) == kDatasetHeaderBytes + 2 * 4 * 9 * 8);

  std::ifstream in(path, std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  CHECK(std::string(magic, 8) == "PDSHDATA");
  fs::remove(path);
}

TEST_CASE("dataset round trip is bit exact (property over random datasets)") {
  Rng rng(2024);
  const auto path = temp_file("roundtrip.bin");
  for (int trial = 0; trial < 25; ++trial) {
    const Dataset d = random_dataset(rng, 1 + static_cast<int>(rng.below(5)), 1 + static_cast<int>(rng.below(7)),
                                     1 + static_cast<int>(rng.below(7)));
    write_dataset(d, path);
    const Dataset back = read_dataset(path);
    REQUIRE(back == d);
    // operator== on doubles would accept -0.0 == 0.0; compare bytes too.
    for (std::size_t f = 0; f < d.size(); ++f)
      CHECK(std::memcmp(back.frames[f].tensor().data().data(), d.frames[f].tensor().data().data(),
                        d.frames[f].tensor().data().size_bytes()) == 0);
  }
  fs::remove(path);
}

TEST_CASE("dataset read errors are distinct") {
  Dataset d;
  d.frames = {Snapshot(2, 2), Snapshot(2, 2)};
  const auto path = temp_file("errors.bin");

  SUBCASE("missing file") { CHECK_THROWS_AS(read_dataset(temp_file("does_not_exist.bin")), IoError); }
  SUBCASE("wrong magic") {
    write_dataset(d, path);
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("NOTADATA", 8);
    f.close();
    CHECK_THROWS_AS(read_dataset(path), FormatError);
  }
  SUBCASE("wrong version") {
    write_dataset(d, path);
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    const char v2[4] = {2, 0, 0, 0};
    f.write(v2, 4);
    f.close();
    CHECK_THROWS_AS(read_dataset(path), FormatError);
  }
  SUBCASE("truncated payload") {
    write_dataset(d, path);
    fs::resize_file(path, fs::file_size(path) - 8);
    CHECK_THROWS_AS(read_dataset(path), TruncatedError);
  }
  SUBCASE("truncated header") {
    write_dataset(d, path);
    fs::resize_file(path, 20);
    CHECK_THROWS_AS(read_dataset(path), TruncatedError);
  }
  fs::remove(path);
}

TEST_CASE("slice_region") {
  Tensor3 grid(1, 4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) grid(0, r, c) = 10 * r + c;

  SUBCASE("top-left block") {
    const Tensor3 s = slice_region(grid, 0, 0, 2, 2);
    CHECK(s(0, 0, 0) == 0);
    CHECK(s(0, 0, 1) == 1);
    CHECK(s(0, 1, 0) == 10);
    CHECK(s(0, 1, 1) == 11);
  }
  SUBCASE("zero-filled overhang") {
    const Tensor3 s = slice_region(grid, -2, -2, 4, 4, OutOfBoundsPolicy::ZeroFill);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) {
        const double expect = (r >= 2 && c >= 2) ? grid(0, r - 2, c - 2) : 0.0;
        CHECK(s(0, r, c) == expect);
      }
  }
  SUBCASE("strict policy rejects overhang") {
    CHECK_THROWS_AS(slice_region(grid, -1, 0, 2, 2), ShapeError);
    CHECK_THROWS_AS(slice_region(grid, 3, 3, 2, 2), ShapeError);
    CHECK_THROWS_AS(slice_region(grid, 0, 0, 0, 2), ShapeError);
  }
  SUBCASE("fully outside under ZeroFill is all zeros") {
    const Tensor3 s = slice_region(grid, 10, 10, 2, 3, OutOfBoundsPolicy::ZeroFill);
    for (double v : s.data()) CHECK(v == 0.0);
  }
}

TEST_CASE("10x10 grid splits into four 5x5 sections of 25 points") {
  Rng rng(3);
  const Tensor3 t = oracle::random_tensor(rng, 4, 10, 10);
  Tensor3 rebuilt(4, 10, 10);
  for (int by = 0; by < 2; ++by)
    for (int bx = 0; bx < 2; ++bx) {
      const Tensor3 q = slice_region(t, 5 * by, 5 * bx, 5, 5);
      CHECK(q.plane_size() == 25);
      place_region(rebuilt, q, 5 * by, 5 * bx);
    }
  CHECK(rebuilt == t);
}

TEST_CASE("slicing any tiling and reassembling is the identity") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int th = 1 + static_cast<int>(rng.below(4));
    const int tw = 1 + static_cast<int>(rng.below(4));
    const int bh = 1 + static_cast<int>(rng.below(4));
    const int bw = 1 + static_cast<int>(rng.below(4));
    const Tensor3 t = oracle::random_tensor(rng, 2, th * bh, tw * bw);
    Tensor3 rebuilt(2, t.h(), t.w());
    for (int i = 0; i < th; ++i)
      for (int j = 0; j < tw; ++j) place_region(rebuilt, slice_region(t, i * bh, j * bw, bh, bw), i * bh, j * bw);
    CHECK(rebuilt == t);
  }
}

TEST_CASE("full-scale dataset preserves frame 1000" * doctest::skip(true)) {
  // Enabled by --full-scale; see main().
  SolverConfig cfg;  // n = 256, 1500 frames
  REQUIRE(cfg.n == 256);
  REQUIRE(cfg.t_steps == 1500);
  const auto path = temp_file("full_scale.bin");
  std::uint64_t before = 0;
  {
    const Dataset d = euler::run(cfg);
    REQUIRE(d.size() == 1500);
    before = frame_hash(d.frames[1000]);
    write_dataset(d, path);
  }
  const Dataset back = read_dataset(path);
  CHECK(frame_hash(back.frames[1000]) == before);
  CHECK(back.dt == cfg.dt());
  CHECK(back.meta == cfg);
  fs::remove(path);
}

int main(int argc, char** argv) {
  doctest::Context ctx;
  std::vector<char*> args;
  for (int i = 0; i < argc; ++i) {
    if (std::strcmp(argv[i], "--full-scale") == 0)
      g_full_scale = true;
    else
      args.push_back(argv[i]);
  }
  ctx.applyCommandLine(static_cast<int>(args.size()), args.data());
  if (g_full_scale) {
    ctx.setOption("no-skip", true);
    ctx.addFilter("test-case", "full-scale*");
  }
  return ctx.run();
}
