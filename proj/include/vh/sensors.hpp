#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vh/bytes.hpp"
#include "vh/tagdef.hpp"

namespace vh::sensors {

/// Pressure in quarter pascals (24 bits) and temperature in half degrees C.
struct PressureTemperature {
  std::uint32_t pressure_qpa = 0;
  std::int8_t temperature_half_c = 0;

  double pressure_pa() const { return pressure_qpa / 4.0; }
  bool operator==(const PressureTemperature&) const = default;
};

/// Raw accelerometer counts.
struct Acceleration {
  std::int16_t x = 0, y = 0, z = 0;
  bool operator==(const Acceleration&) const = default;
};

void encode(ByteWriter& w, const PressureTemperature& s);
void encode(ByteWriter& w, const Acceleration& s);
PressureTemperature decode_pressure(ByteReader& r);
Acceleration decode_acceleration(ByteReader& r);

/// Deterministic waveforms, integer arithmetic only so every platform agrees.
class SensorSim {
 public:
  explicit SensorSim(std::uint64_t seed) : seed_(seed) {}

  PressureTemperature pressure_at(std::int64_t sim_us) const;
  Acceleration acceleration_at(std::int64_t sim_us) const;
  /// Encoded sample of the given kind.
  Bytes sample(tagdef::SensorKind kind, std::int64_t sim_us) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

/// Offset of sample k of a burst from its whole-second start.
constexpr std::int64_t burst_offset_us(std::uint32_t k, std::uint32_t rate_hz) {
  return std::int64_t{k} * 1000000 / rate_hz;
}

/// Splits `n` samples into ceil(n / max_per) fragments of near-equal size.
std::vector<std::uint32_t> fragment_sizes(std::uint32_t n, std::uint32_t max_per);

/// Payload of a one-shot accumulation item: ts32 followed by samples.
Bytes accumulation_payload(std::uint32_t start_ts, ByteSpan samples);
/// Payload of a burst fragment: ts32, fragment index, samples.
Bytes fragment_payload(std::uint32_t start_ts, std::uint8_t index, ByteSpan samples);

/// Sensor-configuration log item written at boot: kind, mode, every, rate,
/// duration, per_item, config blob.
Bytes sensor_config_payload(const tagdef::SensorSchedule& s);
std::optional<tagdef::SensorSchedule> decode_sensor_config(ByteSpan payload);

/// Log item type carrying samples of the given sensor kind.
std::uint8_t item_type_for(tagdef::SensorKind kind);

}  // namespace vh::sensors
