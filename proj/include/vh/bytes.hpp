#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vh {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

/// Appends little-endian fields to a growing buffer.
class ByteWriter {
 public:
  ByteWriter() = default;
  explicit ByteWriter(Bytes& out) : out_(&out) {}

  void u8(std::uint8_t v) { buf().push_back(v); }
  void u16(std::uint16_t v);
  void u24(std::uint32_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void bytes(ByteSpan data) { buf().insert(buf().end(), data.begin(), data.end()); }

  Bytes& buf() { return out_ != nullptr ? *out_ : own_; }
  Bytes take() { return std::move(own_); }

 private:
  Bytes own_;
  Bytes* out_ = nullptr;
};

/// Bounds-checked little-endian reader. Throws vh::Error(malformed) on underrun.
class ByteReader {
 public:
  explicit ByteReader(ByteSpan data) : data_(data) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u24();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  ByteSpan bytes(std::size_t n);

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const;

  ByteSpan data_;
  std::size_t pos_ = 0;
};

std::uint16_t load_u16(ByteSpan p);
std::uint32_t load_u32(ByteSpan p);
std::uint64_t load_u64(ByteSpan p);

std::string to_hex(ByteSpan data);
/// Accepts whitespace-separated or contiguous hex digits.
Bytes from_hex(std::string_view text);

Bytes read_file(const std::string& path);
void write_file(const std::string& path, ByteSpan data);

}  // namespace vh
