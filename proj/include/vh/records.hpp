#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "vh/bytes.hpp"
#include "vh/log.hpp"

namespace vh::records {

struct Key {
  std::uint64_t tag_id = 0;
  std::uint64_t creation_time = 0;
  std::uint32_t address = 0;

  auto operator<=>(const Key&) const = default;
};

struct ReceivedRecord {
  std::uint64_t tag_id = 0;
  std::uint64_t creation_time = 0;
  std::uint32_t address = 0;
  std::uint8_t item_type = 0;
  Bytes payload;
  std::int64_t rx_time_us = 0;
  std::uint32_t station_id = 0;

  Key key() const { return {tag_id, creation_time, address}; }
  bool operator==(const ReceivedRecord&) const = default;
};

// Record body (little-endian): tag u64, creation u64, address u32, type u8,
// rx_time_us i64, station u32, payload length u8, payload.
inline constexpr std::size_t record_fixed_size = 34;

void encode_record(ByteWriter& w, const ReceivedRecord& r);
ReceivedRecord decode_record(ByteReader& r);

/// Length-prefixed record stream: u16 body length, body.
void append_framed(Bytes& out, const ReceivedRecord& r);
std::vector<ReceivedRecord> decode_framed(ByteSpan data, std::size_t offset = 0);

/// Tethered-mode file: "VHRX", version byte, framed records.
inline constexpr std::uint8_t record_file_version = 1;
Bytes record_file_header();
std::vector<ReceivedRecord> decode_record_file(ByteSpan file);

// On the SD profile a record is two consecutive log items: the key
// (everything but the payload) then the payload itself.
Bytes key_item_payload(const ReceivedRecord& r);
/// Pairs key and payload items of a station log. Orphaned keys are skipped.
std::vector<ReceivedRecord> records_from_station_log(const log::Iteration& it);

/// Every item of a retrieved tag log as a record (rx time 0, station 0).
std::vector<ReceivedRecord> records_from_tag_log(const log::Iteration& it);

/// One line per record: tag, creation, address, type, rx time, station, hex payload.
std::string export_text(const std::vector<ReceivedRecord>& records);

}  // namespace vh::records
