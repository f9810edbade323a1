#include "vh/wire.hpp"

#include <sstream>

#include "vh/error.hpp"

namespace vh::wire {

Bytes encode_header(std::uint32_t type_code, std::uint32_t length) {
  if (type_code > 0xFFFF || length > 0xFF) {
    throw Error(Errc::out_of_range, "header type " + std::to_string(type_code) + " / length " +
                                        std::to_string(length) + " out of range");
  }
  if (type_code <= 7 && length <= 15) {
    return {static_cast<std::uint8_t>(type_code << 4 | length)};
  }
  if (type_code <= 63) {
    return {static_cast<std::uint8_t>(0x80 | type_code), static_cast<std::uint8_t>(length)};
  }
  return {0xC0, static_cast<std::uint8_t>(length), static_cast<std::uint8_t>(type_code >> 8),
          static_cast<std::uint8_t>(type_code)};
}

std::size_t header_size(std::uint16_t type_code, std::uint8_t length) {
  if (type_code <= 7 && length <= 15) return 1;
  if (type_code <= 63) return 2;
  return 4;
}

DecodedHeader decode_header(ByteSpan bytes) {
  if (bytes.empty()) throw Error(Errc::malformed, "truncated header");
  const auto b0 = bytes[0];
  if ((b0 & 0x80) == 0) {
    return {static_cast<std::uint16_t>(b0 >> 4), static_cast<std::uint8_t>(b0 & 0x0F), 1};
  }
  if ((b0 & 0xC0) == 0x80) {
    if (bytes.size() < 2) throw Error(Errc::malformed, "truncated header");
    DecodedHeader h{static_cast<std::uint16_t>(b0 & 0x3F), bytes[1], 2};
    if (h.type_code <= 7 && h.length <= 15) {
      throw Error(Errc::non_canonical, "non-canonical header: fits the one-byte form");
    }
    return h;
  }
  if (b0 != 0xC0) throw Error(Errc::malformed, "reserved header prefix");
  if (bytes.size() < 4) throw Error(Errc::malformed, "truncated header");
  DecodedHeader h{static_cast<std::uint16_t>(bytes[2] << 8 | bytes[3]), bytes[1], 4};
  if (h.type_code <= 63) throw Error(Errc::non_canonical, "non-canonical header: fits a shorter form");
  return h;
}

namespace {

struct Encoder {
  Bytes operator()(const TagStateItem& s) const {
    if (s.config_index > 15) throw Error(Errc::out_of_range, "config index exceeds 4 bits");
    return {static_cast<std::uint8_t>((s.will_listen ? 0x80 : 0) | (s.has_data ? 0x40 : 0) | s.config_index)};
  }
  Bytes operator()(const TagIdItem& i) const {
    ByteWriter w;
    w.u64(i.tag_id);
    return w.take();
  }
  Bytes operator()(const AckItem& a) const {
    ByteWriter w;
    w.u32(a.acked_address);
    return w.take();
  }
  Bytes operator()(const ClockItem& c) const {
    ByteWriter w;
    w.u64(c.utc_seconds);
    return w.take();
  }
  Bytes operator()(const WakeupItem& wk) const { return {wk.target}; }
  Bytes operator()(const AddressedTo& a) const {
    ByteWriter w;
    w.u64(a.tag_id);
    return w.take();
  }
  Bytes operator()(const LogItemCarrier& c) const {
    ByteWriter w;
    w.u64(c.creation_time);
    w.u32(c.address);
    w.u8(c.item_type);
    w.bytes(c.payload);
    return w.take();
  }
  Bytes operator()(const LogStateItem& s) const {
    ByteWriter w;
    w.u32(s.write_addr);
    w.u32(s.ack_cursor);
    w.u64(s.creation_time);
    return w.take();
  }
  Bytes operator()(const OpaqueItem& o) const { return o.payload; }
};

struct TypeOf {
  std::uint16_t operator()(const TagStateItem&) const { return type_code::tag_state; }
  std::uint16_t operator()(const TagIdItem&) const { return type_code::tag_id; }
  std::uint16_t operator()(const AckItem&) const { return type_code::ack; }
  std::uint16_t operator()(const ClockItem&) const { return type_code::clock; }
  std::uint16_t operator()(const WakeupItem&) const { return type_code::wakeup; }
  std::uint16_t operator()(const AddressedTo&) const { return type_code::addressed_to; }
  std::uint16_t operator()(const LogItemCarrier&) const { return type_code::log_item_carrier; }
  std::uint16_t operator()(const LogStateItem&) const { return type_code::log_state; }
  std::uint16_t operator()(const OpaqueItem& o) const { return o.type_code; }
};

void expect_length(ByteSpan p, std::size_t n, const char* what) {
  if (p.size() != n) {
    throw Error(Errc::malformed, std::string(what) + " payload must be " + std::to_string(n) + " bytes");
  }
}

DataItem decode_item(std::uint16_t type, ByteSpan p) {
  ByteReader r(p);
  switch (type) {
    case type_code::tag_state: {
      expect_length(p, 1, "TagState");
      if (p[0] & 0x30) throw Error(Errc::malformed, "TagState reserved bits set");
      return TagStateItem{(p[0] & 0x80) != 0, (p[0] & 0x40) != 0, static_cast<std::uint8_t>(p[0] & 0x0F)};
    }
    case type_code::tag_id:
      expect_length(p, 8, "TagId");
      return TagIdItem{r.u64()};
    case type_code::ack:
      expect_length(p, 4, "Ack");
      return AckItem{r.u32()};
    case type_code::clock:
      expect_length(p, 8, "Clock");
      return ClockItem{r.u64()};
    case type_code::wakeup:
      expect_length(p, 1, "Wakeup");
      if (p[0] > 15 && p[0] != WakeupItem::highest) throw Error(Errc::malformed, "Wakeup target out of range");
      return WakeupItem{p[0]};
    case type_code::addressed_to:
      expect_length(p, 8, "AddressedTo");
      return AddressedTo{r.u64()};
    case type_code::log_item_carrier: {
      if (p.size() < 13) throw Error(Errc::malformed, "LogItemCarrier too short");
      LogItemCarrier c;
      c.creation_time = r.u64();
      c.address = r.u32();
      c.item_type = r.u8();
      auto rest = r.bytes(r.remaining());
      c.payload.assign(rest.begin(), rest.end());
      return c;
    }
    case type_code::log_state: {
      expect_length(p, 16, "LogState");
      LogStateItem s;
      s.write_addr = r.u32();
      s.ack_cursor = r.u32();
      s.creation_time = r.u64();
      return s;
    }
    default:
      return OpaqueItem{type, Bytes(p.begin(), p.end())};
  }
}

}  // namespace

std::uint16_t type_of(const DataItem& item) { return std::visit(TypeOf{}, item); }

Bytes encode_payload(const DataItem& item) { return std::visit(Encoder{}, item); }

std::size_t encoded_size(const DataItem& item) {
  const auto p = encode_payload(item);
  return header_size(type_of(item), static_cast<std::uint8_t>(std::min<std::size_t>(p.size(), 255))) + p.size();
}

std::string describe(const DataItem& item) {
  std::ostringstream os;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, TagStateItem>) {
          os << "TagState{listen=" << v.will_listen << ",data=" << v.has_data
             << ",config=" << int(v.config_index) << "}";
        } else if constexpr (std::is_same_v<T, TagIdItem>) {
          os << "TagId{" << v.tag_id << "}";
        } else if constexpr (std::is_same_v<T, AckItem>) {
          os << "Ack{" << v.acked_address << "}";
        } else if constexpr (std::is_same_v<T, ClockItem>) {
          os << "Clock{" << v.utc_seconds << "}";
        } else if constexpr (std::is_same_v<T, WakeupItem>) {
          if (v.is_highest()) os << "Wakeup{highest}";
          else os << "Wakeup{" << int(v.target) << "}";
        } else if constexpr (std::is_same_v<T, AddressedTo>) {
          os << "AddressedTo{" << v.tag_id << "}";
        } else if constexpr (std::is_same_v<T, LogItemCarrier>) {
          os << "LogItemCarrier{addr=" << v.address << ",type=" << int(v.item_type)
             << ",len=" << v.payload.size() << "}";
        } else if constexpr (std::is_same_v<T, LogStateItem>) {
          os << "LogState{write=" << v.write_addr << ",ack=" << v.ack_cursor << "}";
        } else {
          os << "Opaque{type=" << v.type_code << ",len=" << v.payload.size() << "}";
        }
      },
      item);
  return os.str();
}

Packet build_packet(const std::vector<DataItem>& items, SourceKind source) {
  if (source == SourceKind::tag) {
    if (items.size() < 2 || !std::holds_alternative<TagStateItem>(items[0]) ||
        !std::holds_alternative<TagIdItem>(items[1])) {
      throw Error(Errc::validation, "tag packets carry TagState and TagId first");
    }
  } else if (items.empty() || !std::holds_alternative<AddressedTo>(items[0])) {
    throw Error(Errc::validation, "replies start with AddressedTo");
  }
  Packet packet;
  packet.source = source;
  for (const auto& item : items) {
    auto payload = encode_payload(item);
    if (payload.size() > 255) throw Error(Errc::overflow, "data item longer than 255 bytes");
    auto header = encode_header(type_of(item), static_cast<std::uint32_t>(payload.size()));
    packet.payload.insert(packet.payload.end(), header.begin(), header.end());
    packet.payload.insert(packet.payload.end(), payload.begin(), payload.end());
    if (packet.payload.size() > max_packet_payload) {
      throw Error(Errc::overflow, "packet payload exceeds 255 bytes");
    }
  }
  return packet;
}

std::vector<DataItem> parse_packet(ByteSpan payload) {
  if (payload.size() > max_packet_payload) throw Error(Errc::overflow, "packet payload exceeds 255 bytes");
  std::vector<DataItem> items;
  std::size_t pos = 0;
  while (pos < payload.size()) {
    DecodedHeader h;
    try {
      h = decode_header(payload.subspan(pos));
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " at offset " + std::to_string(pos));
    }
    if (pos + h.consumed + h.length > payload.size()) {
      throw Error(Errc::malformed, "truncated item at offset " + std::to_string(pos));
    }
    try {
      items.push_back(decode_item(h.type_code, payload.subspan(pos + h.consumed, h.length)));
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " at offset " + std::to_string(pos));
    }
    pos += h.consumed + h.length;
  }
  return items;
}

}  // namespace vh::wire
