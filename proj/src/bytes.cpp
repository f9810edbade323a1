#include "vh/bytes.hpp"

#include <cctype>
#include <fstream>
#include <iterator>

#include "vh/error.hpp"

namespace vh {

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::validation:
    case Errc::invalid_item:
    case Errc::ack_regression:
    case Errc::overflow:
    case Errc::out_of_range:
      return 1;
    case Errc::io:
    case Errc::device_failed:
    case Errc::not_erased:
    case Errc::log_full:
      return 2;
    case Errc::corrupt_log:
    case Errc::malformed:
    case Errc::non_canonical:
      return 3;
  }
  return 3;
}

const char* to_string(Errc code) {
  switch (code) {
    case Errc::out_of_range: return "out-of-range";
    case Errc::device_failed: return "device-failed";
    case Errc::not_erased: return "not-erased";
    case Errc::log_full: return "log-full";
    case Errc::invalid_item: return "invalid-item";
    case Errc::corrupt_log: return "corrupt-log";
    case Errc::ack_regression: return "ack-regression";
    case Errc::malformed: return "malformed";
    case Errc::non_canonical: return "non-canonical";
    case Errc::overflow: return "overflow";
    case Errc::validation: return "validation";
    case Errc::io: return "io";
  }
  return "unknown";
}

void ByteWriter::u16(std::uint16_t v) {
  u8(static_cast<std::uint8_t>(v));
  u8(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u24(std::uint32_t v) {
  u8(static_cast<std::uint8_t>(v));
  u8(static_cast<std::uint8_t>(v >> 8));
  u8(static_cast<std::uint8_t>(v >> 16));
}

void ByteWriter::u32(std::uint32_t v) {
  u16(static_cast<std::uint16_t>(v));
  u16(static_cast<std::uint16_t>(v >> 16));
}

void ByteWriter::u64(std::uint64_t v) {
  u32(static_cast<std::uint32_t>(v));
  u32(static_cast<std::uint32_t>(v >> 32));
}

void ByteReader::need(std::size_t n) const {
  if (remaining() < n) {
    throw Error(Errc::malformed, "truncated field at offset " + std::to_string(pos_));
  }
}

std::uint8_t ByteReader::u8() {
  need(1);
  return data_[pos_++];
}

std::uint16_t ByteReader::u16() {
  need(2);
  auto v = load_u16(data_.subspan(pos_));
  pos_ += 2;
  return v;
}

std::uint32_t ByteReader::u24() {
  need(3);
  std::uint32_t v = data_[pos_] | (data_[pos_ + 1] << 8) | (std::uint32_t{data_[pos_ + 2]} << 16);
  pos_ += 3;
  return v;
}

std::uint32_t ByteReader::u32() {
  need(4);
  auto v = load_u32(data_.subspan(pos_));
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  auto v = load_u64(data_.subspan(pos_));
  pos_ += 8;
  return v;
}

ByteSpan ByteReader::bytes(std::size_t n) {
  need(n);
  auto s = data_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::uint16_t load_u16(ByteSpan p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t load_u32(ByteSpan p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

std::uint64_t load_u64(ByteSpan p) {
  return std::uint64_t{load_u32(p)} | (std::uint64_t{load_u32(p.subspan(4))} << 32);
}

std::string to_hex(ByteSpan data) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xF]);
  }
  return out;
}

Bytes from_hex(std::string_view text) {
  Bytes out;
  int hi = -1;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    int v;
    if (c >= '0' && c <= '9') v = c - '0';
    else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
    else throw Error(Errc::malformed, std::string("bad hex digit '") + c + "'");
    if (hi < 0) {
      hi = v;
    } else {
      out.push_back(static_cast<std::uint8_t>(hi << 4 | v));
      hi = -1;
    }
  }
  if (hi >= 0) throw Error(Errc::malformed, "odd number of hex digits");
  return out;
}

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, ByteSpan data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(Errc::io, "write failed: " + path);
}

}  // namespace vh
