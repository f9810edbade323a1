#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vh/bytes.hpp"
#include "vh/media.hpp"

namespace vh::log {

inline constexpr std::size_t max_payload = 224;
inline constexpr std::size_t item_header_size = 2;
inline constexpr std::size_t sector_header_size = 9;
inline constexpr std::size_t log_header_size = 26;
inline constexpr std::uint8_t format_version = 1;

/// Log item type registry (registry id 1).
namespace item_type {
inline constexpr std::uint8_t log_header = 0x01;
inline constexpr std::uint8_t sector_header = 0x02;
inline constexpr std::uint8_t boot_marker = 0x03;
inline constexpr std::uint8_t sensor_config = 0x04;
inline constexpr std::uint8_t clock_set = 0x05;
inline constexpr std::uint8_t padding = 0x06;
inline constexpr std::uint8_t pressure_temperature = 0x10;
inline constexpr std::uint8_t acceleration_burst = 0x11;
inline constexpr std::uint8_t received_key = 0x20;
inline constexpr std::uint8_t received_payload = 0x21;
inline constexpr std::uint8_t test_pattern = 0x30;
}  // namespace item_type

std::string type_name(std::uint8_t type);

/// Log and sector headers describe the structure; they are never suspect.
constexpr bool is_structural(std::uint8_t type) {
  return type == item_type::log_header || type == item_type::sector_header;
}

/// Types 0x00 and 0xFF are reserved: 0xFF is indistinguishable from erased
/// flash and 0x00 marks zeroed (torn) regions.
constexpr bool valid_item_header(std::uint8_t type, std::uint8_t length) {
  return type != 0x00 && type != 0xFF && length <= max_payload;
}

struct LogHeader {
  static constexpr std::uint8_t magic[4] = {'V', 'H', 'L', 'G'};
  std::uint8_t version = format_version;
  std::uint8_t registry_id = 1;
  std::uint8_t page_shift = 8;
  std::uint8_t sector_shift = 12;
  std::uint64_t tag_id = 0;
  std::uint64_t creation_time = 0;

  std::uint32_t page_size() const { return 1u << page_shift; }
  std::uint32_t sector_size() const { return 1u << sector_shift; }

  Bytes encode_payload() const;
  static std::optional<LogHeader> decode_payload(ByteSpan payload);

  bool operator==(const LogHeader&) const = default;
};

struct SectorHeader {
  std::uint32_t ack_cursor = 0;
  std::uint16_t sector_seq = 0;
  std::uint8_t flags = 0;

  Bytes encode_payload() const;
  static std::optional<SectorHeader> decode_payload(ByteSpan payload);
};

struct BootMarker {
  std::uint16_t boot_count = 0;
  std::uint16_t firmware_id = 0;

  Bytes encode_payload() const;
  static std::optional<BootMarker> decode_payload(ByteSpan payload);
};

struct LogCursor {
  std::uint32_t write_addr = 0;
  std::uint32_t ack_cursor = 0;

  bool operator==(const LogCursor&) const = default;
};

/// Page/sector arithmetic for one log.
struct Layout {
  std::uint32_t page_size = 256;
  std::uint32_t sector_size = 4096;
  std::uint64_t capacity = 0;

  static Layout of(const LogHeader& header, std::uint64_t capacity);

  std::uint64_t page_start(std::uint64_t a) const { return a - a % page_size; }
  std::uint64_t next_page(std::uint64_t a) const { return page_start(a) + page_size; }
  std::uint64_t sector_start(std::uint64_t a) const { return a - a % sector_size; }
  std::uint64_t next_sector(std::uint64_t a) const { return sector_start(a) + sector_size; }
  std::uint32_t sector_count() const { return static_cast<std::uint32_t>(capacity / sector_size); }
};

/// Random-access byte source the item scanner reads through.
class ByteSource {
 public:
  virtual ~ByteSource() = default;
  virtual std::uint8_t at(std::uint64_t address) const = 0;
};

class MediaSource final : public ByteSource {
 public:
  explicit MediaSource(const media::Media& m) : media_(m) {}
  std::uint8_t at(std::uint64_t address) const override { return media_.at(address); }

 private:
  const media::Media& media_;
};

struct RawItem {
  std::uint32_t address = 0;
  std::uint8_t type = 0;
  std::uint8_t length = 0;

  std::uint32_t end() const { return address + static_cast<std::uint32_t>(item_header_size) + length; }
  bool operator==(const RawItem&) const = default;
};

struct ByteRange {
  std::uint32_t begin = 0;
  std::uint32_t end = 0;
  bool operator==(const ByteRange&) const = default;
};

/// Walks item headers in address order. Erased bytes and unparsable bytes are
/// skipped to the next page boundary; a sector starting with an erased header
/// ends the log.
class ItemScanner {
 public:
  ItemScanner(const ByteSource& source, Layout layout, std::uint64_t from, std::uint64_t limit);

  std::optional<RawItem> next();
  std::uint64_t position() const { return pos_; }
  /// Non-erased regions that did not parse as items.
  const std::vector<ByteRange>& skipped() const { return skipped_; }

 private:
  void skip_to_next_page(bool record);

  const ByteSource& source_;
  Layout layout_;
  std::uint64_t pos_;
  std::uint64_t limit_;
  std::vector<ByteRange> skipped_;
};

enum class Validity { valid, suspect };

const char* to_string(Validity v);

/// Applies the partial-write rule to item types listed in address order: a
/// non-structural item is suspect iff it is the last non-structural item or
/// the next non-structural item is a boot marker.
std::vector<Validity> classify(const std::vector<std::uint8_t>& types_in_order);

struct LogItem {
  std::uint32_t address = 0;
  std::uint8_t type = 0;
  Bytes payload;
  Validity validity = Validity::valid;

  std::uint32_t end() const {
    return address + static_cast<std::uint32_t>(item_header_size + payload.size());
  }
};

struct Iteration {
  std::optional<LogHeader> header;
  std::vector<LogItem> items;
  std::vector<ByteRange> skipped;
  bool truncated = false;
  std::string truncation_reason;
};

Iteration iterate_items(const media::Media& media);
/// Same as above for a raw image; page and sector sizes come from the log header.
Iteration iterate_image(ByteSpan image);

/// Bytes in [begin, end) that must be cleared so torn data never parses.
struct Neutralization {
  ByteRange range;
  /// Clear every byte of the range, erased ones included (first page of a
  /// sector, so the sector does not look like the end of the log).
  bool whole_range = false;
};

struct ScanReport {
  std::uint32_t first_erased_sector = 0;
  std::uint32_t last_sector = 0;
  std::uint32_t suspect_page_start = 0;
  std::uint32_t sectors_probed = 0;
  std::optional<Neutralization> neutralize;
  bool dead_sector = false;
  bool torn = false;
};

struct Recovery {
  LogHeader header;
  LogCursor cursor;
  ScanReport report;
};

/// Read-only recovery: binary search for the first erased logical sector,
/// then an in-sector scan of the sector before it.
Recovery recover(const media::Media& media);

/// Formats a fully erased medium. The logical sector size defaults to the
/// medium's sector size.
LogCursor format_log(media::Media& media, std::uint64_t tag_id, std::uint64_t creation_time,
                     std::uint8_t registry_id = 1,
                     std::optional<std::uint32_t> logical_sector_size = std::nullopt);

/// Appending writer. Bytes reach the medium only through whole-page writes of
/// a RAM page buffer, which is flushed when full, on a sector skip, or on
/// flush(). Holds a non-owning reference to the medium.
class Log {
 public:
  static Log format(media::Media& media, std::uint64_t tag_id, std::uint64_t creation_time,
                    std::uint8_t registry_id = 1,
                    std::optional<std::uint32_t> logical_sector_size = std::nullopt);
  /// Runs recover() and clears the torn region it reports, ready to append.
  static Log open(media::Media& media);

  const LogHeader& header() const { return header_; }
  const LogCursor& cursor() const { return cursor_; }
  const Layout& layout() const { return layout_; }
  const std::optional<ScanReport>& recovery_report() const { return recovery_report_; }

  std::uint32_t append(std::uint8_t type, ByteSpan payload);
  std::uint32_t log_boot(std::uint16_t boot_count, std::uint16_t firmware_id = 0);
  void flush();

  /// Moves the acknowledged cursor forward. Persisted only by the next
  /// sector header.
  void set_ack_cursor(std::uint32_t address);

  /// Start of the most recently written page. Items whose successor header
  /// ends at or before this address can never be touched by recovery.
  std::uint32_t durable_boundary() const;

  std::uint8_t at(std::uint64_t address) const;
  Bytes read(std::uint32_t address, std::size_t length) const;

  /// Items from `from` up to the write address, buffered bytes included.
  std::vector<RawItem> scan(std::uint32_t from) const;

  /// First item at or after `from` (within written data) that has a durable
  /// successor.
  std::optional<RawItem> next_uploadable(std::uint32_t from) const;

  /// Appends padding items until every item written so far has a durable
  /// successor, so a drained uploader can finish the tail of the log.
  void seal();

  std::uint64_t bytes_wasted() const { return bytes_wasted_; }
  std::uint32_t sector_headers_written() const { return sector_headers_written_; }

 private:
  class Overlay;

  Log(media::Media& media, LogHeader header, Layout layout, LogCursor cursor);

  void write_bytes(ByteSpan data);
  void begin_sector_if_needed();
  void flush_buffer();
  void load_page(std::uint32_t page);

  media::Media* media_;
  LogHeader header_;
  Layout layout_;
  LogCursor cursor_;
  Bytes page_buf_;
  std::optional<std::uint32_t> buf_page_;
  bool buf_dirty_ = false;
  std::optional<std::uint32_t> last_written_page_;
  std::optional<ScanReport> recovery_report_;
  std::uint64_t bytes_wasted_ = 0;
  std::uint32_t sector_headers_written_ = 0;
};

}  // namespace vh::log
