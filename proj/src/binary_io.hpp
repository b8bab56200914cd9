#pragma once

// Little-endian encode/decode helpers shared by the dataset and checkpoint
// formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pdeshard/error.hpp"

namespace pdeshard::detail {

class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void f64s(std::span<const double> vs) {
    for (double v : vs) f64(v);
  }
  const std::vector<char>& buffer() const noexcept { return buf_; }
  void write_file(const std::filesystem::path& path) const;

 private:
  template <typename U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::vector<char> buf_;
};

class ByteReader {
 public:
  ByteReader(std::vector<char> buf, std::string what) : buf_(std::move(buf)), what_(std::move(what)) {}
  static ByteReader from_file(const std::filesystem::path& path);

  std::string bytes(std::size_t n) {
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  void f64s(std::span<double> out) {
    need(out.size() * 8);
    for (double& v : out) v = f64();
  }
  std::size_t remaining() const noexcept { return buf_.size() - pos_; }
  void need(std::size_t n) const {
    if (remaining() < n)
      throw TruncatedError(what_ + ": truncated, need " + std::to_string(n) + " more bytes at offset " +
                           std::to_string(pos_) + ", have " + std::to_string(remaining()));
  }

 private:
  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  std::vector<char> buf_;
  std::size_t pos_ = 0;
  std::string what_;
};

}  // namespace pdeshard::detail
