#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vh/bytes.hpp"

namespace vh::wire {

inline constexpr std::size_t max_packet_payload = 255;

/// Data item type codes. Protocol-critical items use 0..7 so routine traffic
/// gets one-byte headers.
namespace type_code {
inline constexpr std::uint16_t tag_state = 0;
inline constexpr std::uint16_t tag_id = 1;
inline constexpr std::uint16_t ack = 2;
inline constexpr std::uint16_t clock = 3;
inline constexpr std::uint16_t wakeup = 4;
inline constexpr std::uint16_t addressed_to = 5;
inline constexpr std::uint16_t log_item_carrier = 6;
inline constexpr std::uint16_t log_state = 7;
}  // namespace type_code

// Header forms:
//   A (1 byte)  0TTTLLLL                      type <= 7, length <= 15
//   B (2 bytes) 10TTTTTT LLLLLLLL             type <= 63
//   C (4 bytes) 0xC0 LLLLLLLL TTTTTTTT TTTTTTTT (type big-endian)
// Only the shortest applicable form is accepted on decode.
Bytes encode_header(std::uint32_t type_code, std::uint32_t length);
std::size_t header_size(std::uint16_t type_code, std::uint8_t length);

struct DecodedHeader {
  std::uint16_t type_code = 0;
  std::uint8_t length = 0;
  std::size_t consumed = 0;
  bool operator==(const DecodedHeader&) const = default;
};
DecodedHeader decode_header(ByteSpan bytes);

struct TagStateItem {
  bool will_listen = false;
  bool has_data = false;
  std::uint8_t config_index = 0;
  bool operator==(const TagStateItem&) const = default;
};

struct TagIdItem {
  std::uint64_t tag_id = 0;
  bool operator==(const TagIdItem&) const = default;
};

struct AckItem {
  std::uint32_t acked_address = 0;
  bool operator==(const AckItem&) const = default;
};

struct ClockItem {
  std::uint64_t utc_seconds = 0;
  bool operator==(const ClockItem&) const = default;
};

struct WakeupItem {
  static constexpr std::uint8_t highest = 0xFF;
  std::uint8_t target = 0;

  bool is_highest() const { return target == highest; }
  bool operator==(const WakeupItem&) const = default;
};

struct AddressedTo {
  std::uint64_t tag_id = 0;
  bool operator==(const AddressedTo&) const = default;
};

struct LogItemCarrier {
  std::uint64_t creation_time = 0;
  std::uint32_t address = 0;
  std::uint8_t item_type = 0;
  Bytes payload;
  bool operator==(const LogItemCarrier&) const = default;
};

struct LogStateItem {
  std::uint32_t write_addr = 0;
  std::uint32_t ack_cursor = 0;
  std::uint64_t creation_time = 0;
  bool operator==(const LogStateItem&) const = default;
};

/// Unknown type codes survive parsing byte-exactly.
struct OpaqueItem {
  std::uint16_t type_code = 0;
  Bytes payload;
  bool operator==(const OpaqueItem&) const = default;
};

using DataItem = std::variant<TagStateItem, TagIdItem, AckItem, ClockItem, WakeupItem, AddressedTo,
                              LogItemCarrier, LogStateItem, OpaqueItem>;

std::uint16_t type_of(const DataItem& item);
Bytes encode_payload(const DataItem& item);
std::size_t encoded_size(const DataItem& item);
std::string describe(const DataItem& item);

enum class SourceKind { tag, base };

struct Packet {
  Bytes payload;
  SourceKind source = SourceKind::tag;
};

/// Tag packets must start with TagState and TagId; base replies must carry
/// AddressedTo. Throws Errc::overflow past 255 bytes.
Packet build_packet(const std::vector<DataItem>& items, SourceKind source);

/// Throws vh::Error(malformed / non_canonical) whose message names the failing
/// offset.
std::vector<DataItem> parse_packet(ByteSpan payload);

template <class T>
const T* find_item(const std::vector<DataItem>& items) {
  for (const auto& i : items) {
    if (auto p = std::get_if<T>(&i)) return p;
  }
  return nullptr;
}

}  // namespace vh::wire
