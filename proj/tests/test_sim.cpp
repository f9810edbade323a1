#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "vh/error.hpp"
#include "vh/scenario.hpp"
#include "vh/sim.hpp"

using namespace vh;
using namespace vh::sim;

namespace {

std::string validation_message(const std::string& text) {
  try {
    parse_scenario(text, VH_TEST_DATA);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::validation);
    return e.what();
  }
  FAIL("accepted: " << text);
  return {};
}

std::size_t count_events(const std::string& trace, const std::string& kind) {
  std::istringstream in(trace);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += line.find(" ev=" + kind + " ") != std::string::npos ||
                                                       line.ends_with(" ev=" + kind);
  return n;
}

const std::string base = "[scenario]\nseed = 3\nduration = 30s\n[tag 1]\ndefinition = tracker.tagdef\n";

}  // namespace

TEST_SUITE("sim") {
  TEST_CASE("delivery obeys range and loss") {
    Rng rng(9);
    CHECK_FALSE(deliver({10.0, 0.0}, 10.5, rng));
    CHECK(deliver({10.0, 0.0}, 10.0, rng));
    for (int i = 0; i < 100; ++i) CHECK_FALSE(deliver({10.0, 1.0}, 1.0, rng));
    int ok = 0;
    for (int i = 0; i < 20000; ++i) ok += deliver({10.0, 0.3}, 1.0, rng);
    CHECK(ok > 13700);
    CHECK(ok < 14300);
  }

  TEST_CASE("paths interpolate and hold their ends") {
    const std::vector<Waypoint> p{{1000, 0, 0}, {3000, 10, -20}, {4000, 10, 0}};
    CHECK(position_at(p, 0) == std::pair{0.0, 0.0});
    CHECK(position_at(p, 2000) == std::pair{5.0, -10.0});
    CHECK(position_at(p, 3500) == std::pair{10.0, -10.0});
    CHECK(position_at(p, 9000) == std::pair{10.0, 0.0});
    CHECK(position_at({Waypoint{0, 3, 4}}, 77) == std::pair{3.0, 4.0});
  }

  TEST_CASE("scenario files load") {
    const auto s = load_scenario(oracle::data_path("wakeup.scenario"));
    CHECK(s.seed == 1);
    CHECK(s.duration_us == 60'000'000);
    REQUIRE(s.tags.size() == 1);
    REQUIRE(s.stations.size() == 1);
    CHECK(s.tags[0].definition.tag_id == 0x1001);
    CHECK(s.stations[0].x == 10.0);
    CHECK(s.stations[0].intents.size() == 3);
    CHECK(s.tags[0].options.seed == tag_seed(s, 1));
    CHECK(s.tags[0].options.sensor_seed == sensor_seed(s, 1));

    const auto l = load_scenario(oracle::data_path("upload_loss.scenario"));
    CHECK(l.channel.params(tagdef::SetupKind::data_shortrange).loss == 0.3);
    CHECK(l.tags[0].options.pattern.count == 500);
  }

  TEST_CASE("entity seeds are distinct and stable") {
    Scenario s;
    s.seed = 7;
    CHECK(tag_seed(s, 1) == tag_seed(s, 1));
    CHECK(tag_seed(s, 1) != tag_seed(s, 2));
    CHECK(tag_seed(s, 1) != sensor_seed(s, 1));
    Scenario t;
    t.seed = 8;
    CHECK(tag_seed(s, 1) != tag_seed(t, 1));
  }

  TEST_CASE("scenario errors name the line") {
    CHECK(validation_message(base + "colour = red\n").find("line 6") != std::string::npos);
    CHECK(validation_message("[scenario]\nduration = 0s\n").find("line 2") != std::string::npos);
    CHECK(validation_message(base + "waypoints = 5s 0 0, 2s 1 1\n").find("line 6") != std::string::npos);
    CHECK(validation_message("[tag 1]\nposition = 0 0\n").find("line 1") != std::string::npos);
    CHECK(validation_message(base + "[station 2]\nintent = wakeup all -> 16\n").find("line 7") != std::string::npos);
    CHECK(validation_message(base + "[channel data-shortrange]\nloss = 1.5\n").find("line 7") != std::string::npos);
    CHECK(validation_message(base + "[tag 0]\ndefinition = tracker.tagdef\n").find("line 6") != std::string::npos);
    CHECK(validation_message(base + "definition = missing.tagdef\n").find("line 6") != std::string::npos);
    CHECK(validation_message("seed = 1\n").find("line 1") != std::string::npos);
  }

  TEST_CASE("runs are reproducible") {
    const auto s = parse_scenario(base + "[station 100]\nposition = 5 0\ndefault_intents = yes\n", VH_TEST_DATA);
    const auto a = run(s), b = run(s);
    CHECK(a.trace == b.trace);
    CHECK(a.tags[0].image == b.tags[0].image);
    CHECK(a.events == b.events);
    CHECK(a.deliveries > 0);
    auto other = s;
    other.tags[0].options.seed ^= 1;
    other.tags[0].options.sensor_seed ^= 1;
    CHECK(run(other).tags[0].image != a.tags[0].image);
  }

  TEST_CASE("trace times never go backwards") {
    const auto r = run(load_scenario(oracle::data_path("wakeup.scenario")));
    std::istringstream in(r.trace);
    std::int64_t last = -1;
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line); ++lines) {
      REQUIRE(line.starts_with("t="));
      const auto t = std::stoll(line.substr(2));
      CHECK(t >= last);
      last = t;
    }
    CHECK(lines > 100);
    CHECK(count_events(r.trace, "boot") == 1);
    const auto compact = run(load_scenario(oracle::data_path("wakeup.scenario")), {.compact_trace = true});
    CHECK(count_events(compact.trace, "ping") == 0);
    CHECK(compact.tags[0].image == r.tags[0].image);
  }

  TEST_CASE("out of range stations hear nothing") {
    const auto r = run(parse_scenario(base + "[station 100]\nposition = 100000 0\ndefault_intents = yes\n", VH_TEST_DATA));
    CHECK(count_events(r.trace, "rx") == 0);
    CHECK(r.deliveries == 0);
    CHECK(r.drops > 0);
  }

  TEST_CASE("inactive stations hear nothing") {
    const auto r = run(parse_scenario(base + "[station 100]\nposition = 5 0\nactive = 40s 50s\n", VH_TEST_DATA));
    CHECK(count_events(r.trace, "rx") == 0);
  }

  TEST_CASE("reboots replay the boot sequence") {
    const auto r = run(parse_scenario(base + "reboot_at = 10s, 20s\n", VH_TEST_DATA));
    CHECK(count_events(r.trace, "power-loss") == 2);
    CHECK(count_events(r.trace, "boot") == 3);
    CHECK(r.tags[0].stats.boots == 3);
  }
}
