#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vh/log.hpp"
#include "vh/media.hpp"
#include "vh/records.hpp"
#include "vh/wire.hpp"

namespace vh::station {

inline constexpr std::int64_t clock_tolerance_s = 2;

enum class IntentKind { adjust_clock, acknowledge, wakeup };

struct Intent {
  IntentKind kind = IntentKind::acknowledge;
  /// nullopt: every tag.
  std::optional<std::uint64_t> tag;
  /// Wakeup target; WakeupItem::highest for the upload configuration.
  std::uint8_t target = wire::WakeupItem::highest;

  bool applies_to(std::uint64_t tag_id) const { return !tag || *tag == tag_id; }
  bool operator==(const Intent&) const = default;
};

std::string describe(const Intent& i);

enum class StoreKind { tethered, sd };

struct StationOptions {
  std::uint32_t id = 1;
  bool valid_clock = true;
  std::uint64_t epoch_s = 0;
  /// Logging stations accept uploads and invite tags with data.
  bool logging = true;
  StoreKind store = StoreKind::tethered;
  std::uint32_t sd_sectors = 64;
  /// Tethered store capacity in records; nullopt is unbounded.
  std::optional<std::size_t> max_records;
};

struct PacketOutcome {
  std::optional<wire::Packet> reply;
  std::vector<wire::DataItem> reply_items;
  std::optional<records::ReceivedRecord> persisted;
  bool storage_full = false;
  std::vector<std::string> warnings;
};

struct TagSighting {
  wire::TagStateItem state;
  std::int64_t rx_time_us = 0;
  std::optional<std::uint64_t> advertised_clock;
};

class BaseStation {
 public:
  explicit BaseStation(StationOptions options);

  const StationOptions& options() const { return opts_; }
  std::uint32_t id() const { return opts_.id; }
  std::uint64_t utc_seconds(std::int64_t now_us) const {
    return opts_.epoch_s + static_cast<std::uint64_t>(now_us / 1000000);
  }

  /// Idempotent. Returns a warning when a wakeup intent overrides another one
  /// for the same scope (the last one added wins).
  std::optional<std::string> add_intent(const Intent& intent);
  bool remove_intent(const Intent& intent);
  const std::vector<Intent>& intents() const { return intents_; }

  PacketOutcome handle_packet(const std::vector<wire::DataItem>& items, std::int64_t rx_time_us);
  /// Parses first; unparsable packets get no reply.
  PacketOutcome handle_packet(const wire::Packet& packet, std::int64_t rx_time_us);

  /// Records accepted (and acknowledged when applicable) in this session.
  const std::vector<records::ReceivedRecord>& accepted() const { return accepted_; }
  const std::map<std::uint64_t, TagSighting>& sightings() const { return sightings_; }

  /// Flushes the SD log, if any.
  void flush();
  /// The persistent store: a record file (tethered) or the SD card image.
  Bytes store_bytes() const;
  const media::Media* sd_media() const { return sd_ ? &*sd_ : nullptr; }

 private:
  bool persist(const records::ReceivedRecord& rec);

  StationOptions opts_;
  std::vector<Intent> intents_;
  std::vector<records::ReceivedRecord> accepted_;
  Bytes tethered_;
  std::optional<media::Media> sd_;
  std::optional<log::Log> sd_log_;
  std::map<std::uint64_t, TagSighting> sightings_;
};

}  // namespace vh::station
