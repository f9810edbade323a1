#include "vh/lifespan.hpp"

#include "vh/error.hpp"

namespace vh::lifespan {

const std::vector<Battery>& battery_catalog() {
  // SO337/SO317 rows are two cells in series.
  static const std::vector<Battery> catalog = {
      {"SO337", 8.3, 1.0},  {"SO317", 11.5, 1.0},  {"CR1025", 30.0, 1.0},   {"CR1620", 81.0, 1.0},
      {"CR2032", 235.0, 1.0}, {"CR2477", 1000.0, 1.0}, {"TL4920", 8500.0, 1.0},
  };
  return catalog;
}

std::optional<Battery> find_battery(std::string_view name) {
  for (const auto& b : battery_catalog()) {
    if (b.name == name) return b;
  }
  return std::nullopt;
}

CurrentBreakdown average_current(const tagdef::TagDefinition& def, const EnergyParams& p,
                                 std::optional<std::uint8_t> config) {
  CurrentBreakdown out;
  out.sleep_uA = p.sleep_uA;
  out.leakage_uA = p.leakage_uA;
  const auto* c = def.config(config.value_or(def.initial_config));
  if (c == nullptr) throw Error(Errc::validation, "configuration does not exist");
  const double period_s = def.period_ms / 1000.0;
  for (const auto& a : c->allocations) {
    const auto* s = def.setup(a.setup);
    if (s == nullptr) throw Error(Errc::validation, "unknown setup '" + a.setup + "'");
    double charge = s->kind == tagdef::SetupKind::atlas_ping ? p.atlas_ping_uC : p.data_tx_uC;
    if (a.mode == tagdef::SlotMode::tx_then_rx) charge += p.rx_window_uC;
    out.radio_uA += charge / (a.every * period_s);
  }
  for (const auto& s : def.sensors) {
    const double per_event = s.mode == tagdef::SensorMode::burst ? double(s.burst_samples()) : 1.0;
    out.sensing_uA += p.sensing_uC_per_sample * per_event / s.every_s;
  }
  return out;
}

double days_for(double usable_mAh, double average_uA) {
  if (usable_mAh <= 0) return 0.0;
  if (!(average_uA > 0)) throw Error(Errc::validation, "average current must be positive");
  return usable_mAh * 1000.0 / average_uA / 24.0;
}

double estimate_lifespan(const tagdef::TagDefinition& def, const Battery& battery, const EnergyParams& params) {
  return days_for(battery.capacity_mAh * battery.usable_fraction, average_current(def, params).total_uA());
}

const std::vector<ReferenceRow>& reference_rows() {
  static const std::vector<ReferenceRow> rows = {
      {"SO337", 8.3, 1.0 / 8, 10.4, false},   {"SO317", 11.5, 1.0 / 8, 13.1, false},
      {"CR1025", 30.0, 1.0 / 8, 32.0, false}, {"CR1025", 30.0, 1.0 / 8, 32.0, false},
      {"CR1620", 81.0, 1.0 / 8, 79.0, false}, {"CR2032", 235.0, 1.0 / 6, 226.0, false},
      {"CR2477", 1000.0, 1.0 / 8, 431.0, true},
  };
  return rows;
}

tagdef::TagDefinition pinger(std::uint32_t period_ms) {
  tagdef::TagDefinition d;
  d.tag_id = 1;
  d.period_ms = period_ms;
  d.setups.push_back({"ATLAS", tagdef::SetupKind::atlas_ping, 1000000, 8192});
  tagdef::Configuration c;
  c.index = 0;
  c.cycle_length = 1;
  c.allocations.push_back({"ATLAS", 1, 0, tagdef::SlotMode::tx_only});
  d.configurations.push_back(c);
  return d;
}

}  // namespace vh::lifespan
