#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "vh/bytes.hpp"

namespace vh::media {

struct MediaGeometry {
  std::uint32_t page_size = 256;
  std::uint32_t sector_size = 4096;
  std::uint32_t sector_count = 2048;

  std::uint64_t capacity() const { return std::uint64_t{sector_size} * sector_count; }
  std::uint32_t page_count() const {
    return static_cast<std::uint32_t>(capacity() / page_size);
  }

  /// Throws Errc::validation unless page and sector sizes are powers of two
  /// and a sector holds a whole number of pages.
  void validate() const;

  /// 8 MB NOR flash: 256-byte pages, 4 KB sectors.
  static MediaGeometry nor_8mb();
  /// Raw SD card: 512-byte pages, 64 KB logical sectors.
  static MediaGeometry sd(std::uint32_t sector_count = 64);

  bool operator==(const MediaGeometry&) const = default;
};

/// Power fails during the page write whose 1-based ordinal (counted over the
/// device's lifetime) equals `write_ordinal`.
struct FaultPlan {
  std::uint64_t write_ordinal = 0;
  std::uint64_t seed = 0;
};

struct FaultRecord {
  std::uint32_t page_index = 0;
  std::uint32_t committed_prefix = 0;
  std::uint64_t write_ordinal = 0;
};

/// Simulated page-write device. Never-written bytes read 0xFF; writes can only
/// clear bits.
class Media {
 public:
  explicit Media(MediaGeometry geometry);

  const MediaGeometry& geometry() const { return geometry_; }

  void page_write(std::uint32_t page_index, ByteSpan data);
  Bytes read(std::uint64_t offset, std::size_t length) const;
  ByteSpan view(std::uint64_t offset, std::size_t length) const;
  std::uint8_t at(std::uint64_t offset) const { return view(offset, 1)[0]; }

  bool is_sector_erased(std::uint32_t sector_index) const;
  /// Not used by the log (write-once); provided for completeness.
  void erase_sector(std::uint32_t sector_index);

  void set_fault_plan(std::optional<FaultPlan> plan) { fault_plan_ = plan; }
  const std::optional<FaultPlan>& fault_plan() const { return fault_plan_; }
  bool failed() const { return failed_; }
  const std::optional<FaultRecord>& last_fault() const { return last_fault_; }
  /// Restores power after a fault: clears the failed state and the plan.
  void power_cycle();

  std::uint64_t write_count() const { return write_count_; }
  const Bytes& image() const { return bytes_; }

  void save(const std::string& path) const;
  /// Loads a flat image; geometry.sector_count is derived from the file size.
  static Media load(const std::string& path, MediaGeometry geometry);
  static Media from_image(Bytes image, MediaGeometry geometry);

 private:
  MediaGeometry geometry_;
  Bytes bytes_;
  std::optional<FaultPlan> fault_plan_;
  std::optional<FaultRecord> last_fault_;
  std::uint64_t write_count_ = 0;
  bool failed_ = false;
};

}  // namespace vh::media
