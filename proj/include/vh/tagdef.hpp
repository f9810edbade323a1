#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vh/bytes.hpp"

namespace vh::tagdef {

inline constexpr std::uint8_t max_configurations = 16;
inline constexpr std::uint8_t config_block_version = 1;

enum class SetupKind : std::uint8_t { atlas_ping = 0, data_shortrange = 1, data_longrange = 2 };
enum class SlotMode : std::uint8_t { tx_only = 0, tx_then_rx = 1 };
enum class TriggerKind : std::uint8_t { wakeup = 0, silence = 1 };
enum class SensorKind : std::uint8_t { pressure_temperature = 0, acceleration = 1 };
enum class SensorMode : std::uint8_t { one_shot = 0, burst = 1 };

const char* to_string(SetupKind k);
const char* to_string(SlotMode m);
const char* to_string(SensorKind k);
const char* to_string(SensorMode m);
std::optional<SensorKind> sensor_kind_from(std::string_view s);

/// Bytes per sample as stored in log items.
std::uint32_t sample_size(SensorKind k);

struct RadioSetup {
  std::string name;
  SetupKind kind = SetupKind::data_shortrange;
  std::uint32_t bitrate = 500000;
  std::uint32_t ping_bits = 0;

  bool operator==(const RadioSetup&) const = default;
};

struct SlotAllocation {
  std::string setup;
  std::uint32_t every = 1;
  std::uint32_t from = 0;
  SlotMode mode = SlotMode::tx_only;

  bool operator==(const SlotAllocation&) const = default;
};

struct Configuration {
  std::uint8_t index = 0;
  std::uint32_t cycle_length = 1;
  std::vector<SlotAllocation> allocations;

  bool operator==(const Configuration&) const = default;
};

struct Transition {
  /// nullopt: applies from any configuration other than `to_config`.
  std::optional<std::uint8_t> from_config;
  TriggerKind trigger = TriggerKind::wakeup;
  /// Wakeup argument, or silence timeout in seconds.
  std::uint32_t value = 0;
  std::uint8_t to_config = 0;

  bool applies_from(std::uint8_t config) const {
    return from_config ? *from_config == config : config != to_config;
  }
  bool operator==(const Transition&) const = default;
};

struct SensorSchedule {
  SensorKind kind = SensorKind::pressure_temperature;
  std::uint32_t every_s = 1;
  SensorMode mode = SensorMode::one_shot;
  std::uint32_t rate_hz = 0;
  std::uint32_t duration_s = 0;
  /// Samples per accumulation item; 0 selects the most that fit.
  std::uint32_t per_item = 0;
  Bytes config_blob;

  std::uint32_t samples_per_item() const;
  std::uint32_t burst_samples() const { return rate_hz * duration_s; }
  bool operator==(const SensorSchedule&) const = default;
};

struct TagDefinition {
  std::uint64_t tag_id = 0;
  std::uint32_t period_ms = 500;
  std::uint8_t initial_config = 0;
  std::uint32_t upload_threshold = 4096;
  std::optional<std::uint8_t> actuator_config;
  std::vector<RadioSetup> setups;
  std::vector<Configuration> configurations;
  std::vector<Transition> transitions;
  std::vector<SensorSchedule> sensors;

  const Configuration* config(std::uint8_t index) const;
  const RadioSetup* setup(std::string_view name) const;
  std::uint8_t highest_config() const;
  std::uint64_t period_us() const { return std::uint64_t{period_ms} * 1000; }

  bool operator==(const TagDefinition&) const = default;
};

/// Throws vh::Error(validation) naming the offending element.
void validate(const TagDefinition& def);

/// Sorts configurations by index; everything else keeps declaration order.
void canonicalize(TagDefinition& def);

TagDefinition parse_tagdef(std::string_view text);
TagDefinition load_tagdef(const std::string& path);
std::string format_tagdef(const TagDefinition& def);

Bytes compile_config_block(const TagDefinition& def);
TagDefinition decompile_config_block(ByteSpan block);

struct SlotAction {
  bool idle = true;
  std::string setup;
  SlotMode mode = SlotMode::tx_only;

  bool operator==(const SlotAction&) const = default;
};

SlotAction slot_action(const Configuration& config, std::uint64_t absolute_slot);

}  // namespace vh::tagdef
