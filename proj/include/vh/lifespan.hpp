#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vh/tagdef.hpp"

namespace vh::lifespan {

struct Battery {
  std::string name;
  double capacity_mAh = 0;
  double usable_fraction = 1.0;
};

/// Capacities to the cutoff voltage the tag tolerates.
const std::vector<Battery>& battery_catalog();
std::optional<Battery> find_battery(std::string_view name);

// Calibrated once by least squares against the published lifespans of the
// non-outlier coin-cell rows (average current = base + charge * ping rate),
// giving a 22.56 uA base and 124.57 uC per ATLAS ping. The base splits into
// MCU sleep and reservoir capacitor leakage.
struct EnergyParams {
  double sleep_uA = 1.0;
  double leakage_uA = 21.56;
  double atlas_ping_uC = 124.57;
  double data_tx_uC = 40.0;
  double rx_window_uC = 90.0;
  double sensing_uC_per_sample = 2.0;
};

struct CurrentBreakdown {
  double sleep_uA = 0;
  double leakage_uA = 0;
  double radio_uA = 0;
  double sensing_uA = 0;

  double total_uA() const { return sleep_uA + leakage_uA + radio_uA + sensing_uA; }
};

/// Steady-state drain in the given configuration (default: the initial one).
CurrentBreakdown average_current(const tagdef::TagDefinition& def, const EnergyParams& params = {},
                                 std::optional<std::uint8_t> config = std::nullopt);

/// days = usable capacity / average current. Zero capacity gives zero days;
/// a non-positive current throws Errc::validation.
double days_for(double usable_mAh, double average_uA);
double estimate_lifespan(const tagdef::TagDefinition& def, const Battery& battery,
                         const EnergyParams& params = {});

/// The published lifespan table rows: battery, ping rate, max lifespan.
struct ReferenceRow {
  std::string battery;
  double capacity_mAh;
  double ping_rate_hz;
  double lifespan_days;
  bool outlier;

  /// capacity / (lifespan * 24 h), in uA.
  double implied_current_uA() const { return capacity_mAh * 1000.0 / (lifespan_days * 24.0); }
};
const std::vector<ReferenceRow>& reference_rows();

/// A pinger definition: one ATLAS ping every `period_ms`, nothing else.
tagdef::TagDefinition pinger(std::uint32_t period_ms);

}  // namespace vh::lifespan
