#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vh/log.hpp"
#include "vh/media.hpp"
#include "vh/rng.hpp"
#include "vh/sensors.hpp"
#include "vh/tagdef.hpp"
#include "vh/wire.hpp"

namespace vh::tag {

inline constexpr std::int64_t us_per_s = 1000000;
inline constexpr std::int64_t timer_interval_us = 60 * us_per_s;
/// Silence window used for upload gating when the current configuration has
/// no silence rule.
inline constexpr std::int64_t default_contact_window_us = 10 * us_per_s;

struct StallParams {
  /// Chance per slot wake that the cell sags below threshold.
  double probability = 0.0;
  /// Relaxation time constant of the recovery.
  double tau_s = 5.0;
  double open_circuit_v = 3.0;
  double sag_v = 1.6;
  double threshold_v = 1.8;
  double resume_v = 2.0;
};

/// Concentration-polarization model: after a sag the cell relaxes
/// exponentially back towards its open-circuit voltage.
struct BatteryState {
  StallParams params;
  bool stalled = false;
  std::int64_t sag_at_us = 0;

  double voltage_at(std::int64_t now_us) const;
  /// First 1 s voltage check at or above the resume level.
  std::int64_t resume_time() const;
};

/// Synthetic logging workload: `count` test-pattern items of `bytes` each,
/// one every `every_s` seconds (or all at first boot when every_s is 0).
struct PatternWorkload {
  std::uint32_t count = 0;
  std::uint32_t bytes = 64;
  std::uint32_t every_s = 0;
};

struct TagOptions {
  std::uint64_t seed = 0;
  std::uint64_t sensor_seed = 0;
  StallParams stall;
  PatternWorkload pattern;
  std::uint16_t firmware_id = 1;
  /// Unset: the clock counts from boot. Set: local = utc + error.
  std::optional<std::int64_t> initial_clock_error_s;
  std::uint64_t epoch_s = 0;
};

enum class SlotKind { idle, ping, transmit, stall };

struct SlotResult {
  SlotKind kind = SlotKind::idle;
  std::uint64_t slot = 0;
  std::string setup;
  tagdef::SetupKind setup_kind = tagdef::SetupKind::data_shortrange;
  tagdef::SlotMode mode = tagdef::SlotMode::tx_only;
  wire::Packet packet;
  std::vector<wire::DataItem> items;
  std::optional<std::uint32_t> carried_address;
  /// For stalls: when the scheduler restarts.
  std::int64_t resume_us = 0;
};

struct Transition {
  std::uint8_t from = 0;
  std::uint8_t to = 0;
  std::string cause;
};

struct ReplyEffects {
  bool ignored = false;
  std::optional<std::uint32_t> acked;
  bool ack_mismatch = false;
  std::optional<std::pair<std::int64_t, std::int64_t>> clock_set;  // old, new local
  std::optional<Transition> transition;
};

struct TagStats {
  std::uint32_t boots = 0;
  std::uint32_t stalls = 0;
  std::uint64_t items_logged = 0;
  std::uint64_t items_dropped = 0;
  std::uint64_t packets_sent = 0;
  std::uint64_t pings_sent = 0;
  std::uint64_t carriers_sent = 0;
  std::uint64_t acks_received = 0;
  std::uint64_t seals = 0;
};

/// The ATLAS ping bit sequence: a 16-bit Galois LFSR seeded by the tag id.
Bytes atlas_ping_sequence(std::uint64_t tag_id, std::uint32_t bits);

class TagRuntime {
 public:
  TagRuntime(tagdef::TagDefinition def, media::Media& media, TagOptions options);

  /// Opens (or formats, if erased) the log, writes the boot marker and the
  /// sensor configuration items, and restarts the schedule at `now_us`.
  void boot(std::int64_t now_us);
  /// Loses RAM state: page buffer, pending samples, timers. The medium keeps
  /// what was written.
  void power_loss();
  bool running() const { return log_.has_value(); }

  std::int64_t next_slot_time() const { return origin_us_ + static_cast<std::int64_t>(slot_) * period_us_; }
  SlotResult on_slot(std::int64_t now_us);
  /// Whole-second tick. Returns addresses of items appended.
  std::vector<std::uint32_t> on_second(std::int64_t now_us);
  ReplyEffects handle_reply(const std::vector<wire::DataItem>& items, std::int64_t now_us);

  /// When the active silence rule fires if nothing is heard, if any.
  std::optional<std::int64_t> silence_deadline() const;
  /// Applies the silence transition when `now_us` is the deadline.
  std::optional<Transition> on_silence_check(std::int64_t now_us);

  std::uint8_t current_config() const { return config_; }
  bool actuator_on() const { return actuator_on_; }
  bool clock_set() const { return clock_set_; }
  std::int64_t local_seconds(std::int64_t now_us) const { return now_us / us_per_s + clock_offset_s_; }
  const tagdef::TagDefinition& definition() const { return def_; }
  const log::Log& log() const { return *log_; }
  log::Log& log() { return *log_; }
  const TagStats& stats() const { return stats_; }
  std::uint64_t tag_id() const { return def_.tag_id; }
  std::uint16_t boot_count() const { return boot_count_; }
  std::uint64_t schedule_origin() const { return origin_us_; }
  /// The item the uploader would carry next, if any.
  std::optional<log::RawItem> pending_item() const;

 private:
  struct Accumulator {
    std::size_t sensor = 0;
    std::uint32_t start_ts = 0;
    std::uint32_t count = 0;
    Bytes samples;
  };

  std::uint32_t append(std::uint8_t type, ByteSpan payload);
  void flush_accumulators();
  void enter_config(std::uint8_t to);
  std::int64_t contact_window_us() const;
  std::optional<std::uint32_t> silence_rule() const;
  std::vector<wire::DataItem> build_items(tagdef::SlotMode mode, std::int64_t now_us,
                                          std::optional<std::uint32_t>& carried);
  void emit_pattern(std::vector<std::uint32_t>& out);

  tagdef::TagDefinition def_;
  media::Media* media_;
  TagOptions opts_;
  sensors::SensorSim sim_;
  Rng rng_;
  Bytes ping_;
  std::int64_t period_us_;

  std::optional<log::Log> log_;
  std::uint8_t config_ = 0;
  std::int64_t origin_us_ = 0;
  std::uint64_t slot_ = 0;
  std::int64_t boot_s_ = 0;
  std::uint16_t boot_count_ = 0;
  bool clock_set_ = false;
  std::int64_t clock_offset_s_ = 0;
  std::optional<std::int64_t> last_contact_us_;
  std::int64_t config_entered_us_ = 0;
  std::int64_t next_clock_item_us_ = 0;
  std::int64_t next_log_state_us_ = 0;
  bool actuator_on_ = false;
  BatteryState battery_;
  std::vector<Accumulator> accum_;
  std::uint32_t pattern_emitted_ = 0;
  std::int64_t last_progress_us_ = 0;
  std::uint32_t progress_write_addr_ = 0;
  TagStats stats_;
};

}  // namespace vh::tag
