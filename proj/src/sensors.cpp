#include "vh/sensors.hpp"

#include "vh/error.hpp"
#include "vh/log.hpp"
#include "vh/rng.hpp"

namespace vh::sensors {

namespace {

// Triangle wave with the given period (in the same unit as t), range [0, amp].
std::int64_t triangle(std::int64_t t, std::int64_t period, std::int64_t amp) {
  const std::int64_t ph = ((t % period) + period) % period;
  const std::int64_t half = period / 2;
  return ph < half ? ph * amp / half : (period - ph) * amp / half;
}

std::int64_t noise(std::uint64_t seed, std::uint64_t salt, std::int64_t t, std::int64_t span) {
  const auto h = mix_seed(seed ^ salt, static_cast<std::uint64_t>(t));
  return static_cast<std::int64_t>(h % static_cast<std::uint64_t>(2 * span + 1)) - span;
}

}  // namespace

void encode(ByteWriter& w, const PressureTemperature& s) {
  w.u24(s.pressure_qpa);
  w.u8(static_cast<std::uint8_t>(s.temperature_half_c));
}

void encode(ByteWriter& w, const Acceleration& s) {
  w.u16(static_cast<std::uint16_t>(s.x));
  w.u16(static_cast<std::uint16_t>(s.y));
  w.u16(static_cast<std::uint16_t>(s.z));
}

PressureTemperature decode_pressure(ByteReader& r) {
  PressureTemperature s;
  s.pressure_qpa = r.u24();
  s.temperature_half_c = static_cast<std::int8_t>(r.u8());
  return s;
}

Acceleration decode_acceleration(ByteReader& r) {
  Acceleration s;
  s.x = static_cast<std::int16_t>(r.u16());
  s.y = static_cast<std::int16_t>(r.u16());
  s.z = static_cast<std::int16_t>(r.u16());
  return s;
}

// A bird climbing and descending between roughly 0 and 1000 m over a
// 20-minute cycle, plus a little noise.
PressureTemperature SensorSim::pressure_at(std::int64_t sim_us) const {
  const std::int64_t s = sim_us / 1000000;
  const std::int64_t climb_qpa = triangle(s, 1200, 4 * 11450);
  PressureTemperature p;
  p.pressure_qpa = static_cast<std::uint32_t>(4 * 101325 - climb_qpa + noise(seed_, 1, s, 40));
  p.temperature_half_c = static_cast<std::int8_t>(40 - climb_qpa / (4 * 1700) + noise(seed_, 2, s, 1));
  return p;
}

// Wing beats: a 4 Hz triangle on z over gravity, noise on all axes.
Acceleration SensorSim::acceleration_at(std::int64_t sim_us) const {
  const std::int64_t ms = sim_us / 1000;
  Acceleration a;
  a.x = static_cast<std::int16_t>(noise(seed_, 3, ms, 300));
  a.y = static_cast<std::int16_t>(noise(seed_, 4, ms, 300));
  a.z = static_cast<std::int16_t>(16384 - 4000 + triangle(ms, 250, 8000) + noise(seed_, 5, ms, 200));
  return a;
}

Bytes SensorSim::sample(tagdef::SensorKind kind, std::int64_t sim_us) const {
  ByteWriter w;
  if (kind == tagdef::SensorKind::pressure_temperature) {
    encode(w, pressure_at(sim_us));
  } else {
    encode(w, acceleration_at(sim_us));
  }
  return w.take();
}

std::vector<std::uint32_t> fragment_sizes(std::uint32_t n, std::uint32_t max_per) {
  std::vector<std::uint32_t> out;
  if (n == 0) return out;
  if (max_per == 0) throw Error(Errc::validation, "fragment capacity is zero");
  const std::uint32_t frags = (n + max_per - 1) / max_per;
  const std::uint32_t base = n / frags;
  const std::uint32_t extra = n % frags;
  for (std::uint32_t i = 0; i < frags; ++i) out.push_back(base + (i < extra ? 1 : 0));
  return out;
}

Bytes accumulation_payload(std::uint32_t start_ts, ByteSpan samples) {
  ByteWriter w;
  w.u32(start_ts);
  w.bytes(samples);
  return w.take();
}

Bytes fragment_payload(std::uint32_t start_ts, std::uint8_t index, ByteSpan samples) {
  ByteWriter w;
  w.u32(start_ts);
  w.u8(index);
  w.bytes(samples);
  return w.take();
}

Bytes sensor_config_payload(const tagdef::SensorSchedule& s) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(s.kind));
  w.u8(static_cast<std::uint8_t>(s.mode));
  w.u32(s.every_s);
  w.u16(static_cast<std::uint16_t>(s.rate_hz));
  w.u16(static_cast<std::uint16_t>(s.duration_s));
  w.u8(static_cast<std::uint8_t>(s.per_item));
  w.bytes(s.config_blob);
  return w.take();
}

std::optional<tagdef::SensorSchedule> decode_sensor_config(ByteSpan payload) {
  try {
    ByteReader r(payload);
    tagdef::SensorSchedule s;
    const auto kind = r.u8();
    const auto mode = r.u8();
    if (kind > 1 || mode > 1) return std::nullopt;
    s.kind = static_cast<tagdef::SensorKind>(kind);
    s.mode = static_cast<tagdef::SensorMode>(mode);
    s.every_s = r.u32();
    s.rate_hz = r.u16();
    s.duration_s = r.u16();
    s.per_item = r.u8();
    auto blob = r.bytes(r.remaining());
    s.config_blob.assign(blob.begin(), blob.end());
    if (s.every_s == 0 || (s.mode == tagdef::SensorMode::burst && s.rate_hz == 0)) return std::nullopt;
    return s;
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::uint8_t item_type_for(tagdef::SensorKind kind) {
  return kind == tagdef::SensorKind::pressure_temperature ? log::item_type::pressure_temperature
                                                          : log::item_type::acceleration_burst;
}

}  // namespace vh::sensors
