#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vh/records.hpp"
#include "vh/tagdef.hpp"

namespace vh::pipeline {

struct IngestReport {
  std::size_t inserted = 0;
  std::size_t duplicates = 0;
  std::size_t conflicts = 0;
  std::vector<records::Key> conflict_keys;
};

/// Received items keyed by (tag, log creation time, address). Duplicate keys
/// must carry identical bytes; on a conflict the first record is kept. Among
/// byte-identical duplicates the earliest reception is kept, so the store does
/// not depend on ingestion order.
class ItemStore {
 public:
  IngestReport ingest(const std::vector<records::ReceivedRecord>& batch);

  const std::map<records::Key, records::ReceivedRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  /// Items of one log in address order.
  std::vector<records::ReceivedRecord> items_of(std::uint64_t tag_id, std::uint64_t creation_time) const;
  /// Creation times of the logs known for a tag.
  std::vector<std::uint64_t> logs_of(std::uint64_t tag_id) const;

  /// "VHST", version, framed records in key order.
  Bytes serialize() const;
  static ItemStore deserialize(ByteSpan data);
  void save(const std::string& path) const;
  static ItemStore load(const std::string& path);

 private:
  std::map<records::Key, records::ReceivedRecord> records_;
};

/// Loads records from a tethered record file, a station SD image, a tag log
/// image, or a store file, recognized by content.
std::vector<records::ReceivedRecord> load_records(const std::string& path);

struct Sample {
  std::int64_t t_us = 0;
  std::vector<std::int32_t> values;
  bool operator==(const Sample&) const = default;
};

struct Gap {
  /// Missing log bytes; empty when the gap is a missing burst fragment.
  std::uint32_t address_begin = 0;
  std::uint32_t address_end = 0;
  std::optional<std::uint8_t> fragment;
  /// Sample index range inside the burst, for fragment gaps.
  std::uint32_t first_sample = 0;
  std::uint32_t sample_count = 0;
  std::int64_t t_begin_us = 0;
  std::string reason;
  bool operator==(const Gap&) const = default;
};

struct SensorSeries {
  tagdef::SensorKind kind = tagdef::SensorKind::pressure_temperature;
  std::vector<Sample> samples;
  std::vector<Gap> gaps;
};

/// Reconstructs UTC-stamped samples of one sensor from one log. Suspect items
/// are excluded. `fallback` supplies schedules for sessions whose sensor
/// configuration items are missing.
SensorSeries extract_series(const ItemStore& store, std::uint64_t tag_id, std::uint64_t creation_time,
                            tagdef::SensorKind kind, const tagdef::TagDefinition* fallback = nullptr);

/// Comma-separated: t_us, values..., gap flag; gaps as "# gap" lines.
std::string export_series(const SensorSeries& series);

/// International standard atmosphere barometric formula.
inline constexpr double isa_scale_m = 44330.0;
inline constexpr double isa_exponent = 5.255;
double pressure_to_altitude(double p_pa, double p0_pa);

struct BootInfo {
  std::uint32_t address = 0;
  std::uint16_t boot_count = 0;
};

struct ClockEvent {
  std::uint32_t address = 0;
  std::int64_t old_local = 0;
  std::int64_t new_local = 0;
  bool was_set = false;
};

struct LogReport {
  std::uint64_t creation_time = 0;
  std::size_t items = 0;
  std::vector<BootInfo> boots;
  std::vector<Gap> gaps;
  std::vector<std::uint32_t> suspect;
  std::vector<ClockEvent> clock_sets;
  std::vector<std::string> flags;
};

struct SessionReport {
  std::uint64_t tag_id = 0;
  std::vector<LogReport> logs;
};

SessionReport session_report(const ItemStore& store, std::uint64_t tag_id);
std::string format_report(const SessionReport& r);

/// Missing address ranges between consecutive items, allowing for the unused
/// tail a sector keeps when the next item does not fit.
std::vector<Gap> coverage_gaps(const std::vector<records::ReceivedRecord>& items);

}  // namespace vh::pipeline
