#include <doctest.h>

#include <cmath>

#include "vh/error.hpp"
#include "vh/lifespan.hpp"

using namespace vh;
using namespace vh::lifespan;

TEST_SUITE("lifespan") {
  TEST_CASE("defaults equal an independent least-squares fit") {
    // Ordinary least squares of implied current on ping rate over the
    // non-outlier rows.
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& r : reference_rows()) {
      if (r.outlier) continue;
      const double x = r.ping_rate_hz, y = r.implied_current_uA();
      n += 1;
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    const EnergyParams p;
    CHECK(p.sleep_uA + p.leakage_uA == doctest::Approx(intercept).epsilon(1e-3));
    CHECK(p.atlas_ping_uC == doctest::Approx(slope).epsilon(1e-3));
  }

  TEST_CASE("pinger predictions for the anchor rows") {
    // 22.56 uA + 124.57 uC x rate: 38.131 uA at 1/8 Hz, 43.322 uA at 1/6 Hz.
    CHECK(average_current(pinger(8000)).total_uA() == doctest::Approx(38.13125));
    CHECK(average_current(pinger(6000)).total_uA() == doctest::Approx(43.32167).epsilon(1e-5));
    CHECK(estimate_lifespan(pinger(8000), *find_battery("CR1025")) == doctest::Approx(32.781).epsilon(1e-4));
    CHECK(estimate_lifespan(pinger(8000), *find_battery("CR1620")) == doctest::Approx(88.509).epsilon(1e-4));
    CHECK(estimate_lifespan(pinger(6000), *find_battery("CR2032")) == doctest::Approx(226.02).epsilon(1e-4));
  }

  TEST_CASE("implied currents of the published rows") {
    for (const auto& r : reference_rows()) {
      if (r.outlier) {
        CHECK(r.battery == "CR2477");
        CHECK(r.implied_current_uA() > 90.0);
      } else {
        CHECK(r.implied_current_uA() > 30.0);
        CHECK(r.implied_current_uA() < 50.0);
      }
    }
    CHECK(reference_rows().size() == 7);
  }

  TEST_CASE("more pinging drains faster") {
    double last = 1e9;
    for (std::uint32_t ms : {60000u, 8000u, 2000u, 500u, 100u}) {
      const double d = estimate_lifespan(pinger(ms), *find_battery("CR2032"));
      CHECK(d < last);
      last = d;
    }
  }

  TEST_CASE("lifespan scales with capacity") {
    const auto def = pinger(8000);
    const double a = estimate_lifespan(def, {"x", 100.0, 1.0});
    CHECK(estimate_lifespan(def, {"x", 200.0, 1.0}) == doctest::Approx(2 * a));
    CHECK(estimate_lifespan(def, {"x", 200.0, 0.5}) == doctest::Approx(a));
    CHECK(days_for(0.0, 40.0) == 0.0);
    CHECK_THROWS_AS(days_for(10.0, 0.0), Error);
  }

  TEST_CASE("breakdown covers listening and sensing") {
    tagdef::TagDefinition d = pinger(1000);
    d.setups.push_back({"D", tagdef::SetupKind::data_shortrange, 250000, 0});
    d.configurations[0].cycle_length = 2;
    d.configurations[0].allocations[0].every = 2;
    d.configurations[0].allocations.push_back({"D", 2, 1, tagdef::SlotMode::tx_then_rx});
    d.sensors.push_back({tagdef::SensorKind::acceleration, 4, tagdef::SensorMode::burst, 25, 2, 0, {}});
    const EnergyParams p;
    const auto b = average_current(d, p);
    CHECK(b.radio_uA == doctest::Approx((p.atlas_ping_uC + p.data_tx_uC + p.rx_window_uC) / 2.0));
    CHECK(b.sensing_uA == doctest::Approx(p.sensing_uC_per_sample * 50 / 4));
    CHECK(b.total_uA() == doctest::Approx(b.sleep_uA + b.leakage_uA + b.radio_uA + b.sensing_uA));
    CHECK_THROWS_AS(average_current(d, p, 5), Error);
  }

  TEST_CASE("catalog lookups") {
    CHECK(find_battery("CR2032")->capacity_mAh == 235.0);
    CHECK_FALSE(find_battery("AA").has_value());
  }
}
