#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "vh/error.hpp"
#include "vh/log.hpp"
#include "vh/pipeline.hpp"
#include "vh/scenario.hpp"
#include "vh/sim.hpp"

using namespace vh;
using namespace vh::pipeline;
using records::ReceivedRecord;

namespace {

ReceivedRecord rec(std::uint32_t address, Bytes payload, std::int64_t rx = 0, std::uint32_t station = 1) {
  return {0x1001, 1700000000, address, 0x30, std::move(payload), rx, station};
}

/// A tag log written directly, 100-byte items across a few sectors.
std::vector<ReceivedRecord> written_log(std::size_t items) {
  media::Media m({256, 4096, 4});
  auto lg = log::Log::format(m, 0x1001, 1700000000);
  for (std::size_t i = 0; i < items; ++i) lg.append(log::item_type::test_pattern, Bytes(100, static_cast<std::uint8_t>(i)));
  lg.flush();
  return records::records_from_tag_log(log::iterate_items(m));
}

const sim::RunResult& rebooted_run() {
  static const sim::RunResult r = sim::run(sim::parse_scenario(
      "[scenario]\nseed = 4\nduration = 90s\n"
      "[tag 1]\ndefinition = tracker.tagdef\nclock_error_s = 30\nreboot_at = 40s\n"
      "[station 100]\nposition = 5 0\ndefault_intents = yes\n",
      VH_TEST_DATA));
  return r;
}

ItemStore store_of(const sim::RunResult& r) {
  ItemStore s;
  s.ingest(records::records_from_tag_log(log::iterate_image(r.tags[0].image)));
  return s;
}

std::filesystem::path temp_file(const std::string& name, ByteSpan data) {
  const auto p = std::filesystem::temp_directory_path() / ("vh_pipeline_" + name);
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(data.data()),
                                           static_cast<std::streamsize>(data.size()));
  return p;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("duplicates collapse and conflicts keep the first copy") {
    ItemStore s;
    auto r = s.ingest({rec(10, {1}), rec(10, {1}), rec(20, {2})});
    CHECK(r.inserted == 2);
    CHECK(r.duplicates == 1);
    r = s.ingest({rec(10, {9})});
    CHECK(r.conflicts == 1);
    REQUIRE(r.conflict_keys.size() == 1);
    CHECK(r.conflict_keys[0] == records::Key{0x1001, 1700000000, 10});
    CHECK(s.records().at(r.conflict_keys[0]).payload == Bytes{1});
    CHECK(s.size() == 2);
  }

  TEST_CASE("the earliest reception wins regardless of order") {
    const std::vector<ReceivedRecord> batch{rec(10, {1}, 500, 2), rec(10, {1}, 100, 3), rec(10, {1}, 300, 4)};
    auto reversed = batch;
    std::reverse(reversed.begin(), reversed.end());
    ItemStore a, b;
    a.ingest(batch);
    for (const auto& x : reversed) b.ingest({x});
    CHECK(a.serialize() == b.serialize());
    CHECK(a.records().begin()->second.rx_time_us == 100);
    CHECK(a.records().begin()->second.station_id == 3);
  }

  TEST_CASE("store files round-trip and reject damage") {
    ItemStore s;
    s.ingest(written_log(50));
    s.ingest({ReceivedRecord{0x2002, 5, 0, 0x01, {}, 0, 0}});
    const auto bytes = s.serialize();
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "VHST");
    CHECK(ItemStore::deserialize(bytes).serialize() == bytes);
    CHECK_THROWS_AS(ItemStore::deserialize(Bytes(bytes.begin(), bytes.end() - 3)), Error);
    CHECK(s.logs_of(0x1001) == std::vector<std::uint64_t>{1700000000});
    CHECK(s.logs_of(0x2002) == std::vector<std::uint64_t>{5});
    const auto items = s.items_of(0x1001, 1700000000);
    CHECK(std::is_sorted(items.begin(), items.end(),
                         [](const auto& x, const auto& y) { return x.address < y.address; }));
  }

  TEST_CASE("record sources are recognized by content") {
    const auto recs = written_log(10);
    Bytes file = records::record_file_header();
    for (const auto& r : recs) records::append_framed(file, r);
    ItemStore s;
    s.ingest(recs);
    const auto a = temp_file("records", file), b = temp_file("store", s.serialize());
    CHECK(load_records(a.string()) == recs);
    CHECK(load_records(b.string()) == recs);
    const auto junk = temp_file("junk", Bytes(64, 0x11));
    CHECK_THROWS_AS(load_records(junk.string()), Error);
    CHECK_THROWS_AS(load_records("/nonexistent/vh"), Error);
    for (const auto& p : {a, b, junk}) std::filesystem::remove(p);
  }

  TEST_CASE("a complete log has no coverage gaps") {
    const auto items = written_log(120);
    REQUIRE(items.back().address > 2 * 4096);
    CHECK(coverage_gaps(items).empty());
  }

  TEST_CASE("each missing item is one exact gap") {
    auto items = written_log(120);
    for (std::size_t k : {3u, 45u, 80u}) {
      auto cut = items;
      const auto lost = cut[k];
      cut.erase(cut.begin() + static_cast<std::ptrdiff_t>(k));
      const auto gaps = coverage_gaps(cut);
      REQUIRE(gaps.size() == 1);
      CHECK(gaps[0].address_begin == lost.address);
      CHECK(gaps[0].address_end == cut[k].address);
    }
    auto headless = items;
    headless.erase(headless.begin());
    const auto gaps = coverage_gaps(headless);
    REQUIRE(gaps.size() == 1);
    CHECK(gaps[0].address_begin == 0);
  }

  TEST_CASE("barometric altitude") {
    CHECK(pressure_to_altitude(101325, 101325) == doctest::Approx(0.0));
    CHECK(pressure_to_altitude(50662.5, 101325) == doctest::Approx(5478.0124).epsilon(1e-7));
    CHECK(pressure_to_altitude(90000, 101325) == doctest::Approx(988.64656).epsilon(1e-7));
  }

  TEST_CASE("series follow the sensor grid and lose only what is missing") {
    const auto& r = rebooted_run();
    const auto s = store_of(r);
    const auto log = s.logs_of(0x1001).at(0);
    const auto p = extract_series(s, 0x1001, log, tagdef::SensorKind::pressure_temperature);
    const auto a = extract_series(s, 0x1001, log, tagdef::SensorKind::acceleration);
    REQUIRE(p.samples.size() > 5);
    REQUIRE(a.samples.size() > 100);
    CHECK(p.gaps.empty());
    // Only the burst cut by the end of the run is incomplete.
    REQUIRE(a.gaps.size() == 1);
    CHECK(a.gaps[0].fragment.has_value());
    CHECK(a.gaps[0].sample_count > 0);
    CHECK(a.gaps[0].t_begin_us > a.samples.back().t_us - 10'000'000);
    for (const auto* series : {&p, &a}) {
      CHECK(std::is_sorted(series->samples.begin(), series->samples.end(),
                           [](const auto& x, const auto& y) { return x.t_us < y.t_us; }));
    }
    CHECK(p.samples[0].values.size() == 2);
    CHECK(a.samples[0].values.size() == 3);

    // Drop one pressure item.
    ItemStore cut;
    std::vector<ReceivedRecord> kept;
    bool dropped = false;
    std::uint32_t lost_at = 0;
    for (const auto& [k, rec] : s.records()) {
      if (!dropped && rec.item_type == sensors::item_type_for(tagdef::SensorKind::pressure_temperature)) {
        dropped = true;
        lost_at = rec.address;
        continue;
      }
      kept.push_back(rec);
    }
    cut.ingest(kept);
    const auto p2 = extract_series(cut, 0x1001, log, tagdef::SensorKind::pressure_temperature);
    CHECK(p2.samples.size() < p.samples.size());
    REQUIRE(p2.gaps.size() == 1);
    CHECK(p2.gaps[0].address_begin == lost_at);
    CHECK(std::includes(p.samples.begin(), p.samples.end(), p2.samples.begin(), p2.samples.end(),
                        [](const auto& x, const auto& y) { return x.t_us < y.t_us; }));
    CHECK(extract_series(cut, 0x1001, log, tagdef::SensorKind::acceleration).samples == a.samples);
  }

  TEST_CASE("exported series have one line per sample") {
    const auto& r = rebooted_run();
    const auto s = store_of(r);
    const auto series = extract_series(s, 0x1001, s.logs_of(0x1001).at(0), tagdef::SensorKind::pressure_temperature);
    const auto text = export_series(series);
    CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == series.samples.size() + 2);
    CHECK(text.rfind("# ", 0) == 0);
    SensorSeries g;
    g.gaps.push_back(Gap{100, 200, {}, 0, 0, 0, "missing items"});
    CHECK(export_series(g).find("# gap missing items addresses=100..200") != std::string::npos);
  }

  TEST_CASE("session reports list boots and clock settings") {
    const auto& r = rebooted_run();
    const auto rep = session_report(store_of(r), 0x1001);
    REQUIRE(rep.logs.size() == 1);
    const auto& l = rep.logs[0];
    REQUIRE(l.boots.size() == 2);
    CHECK(l.boots[1].boot_count == l.boots[0].boot_count + 1);
    REQUIRE(l.clock_sets.size() >= 1);
    CHECK(l.clock_sets[0].new_local - l.clock_sets[0].old_local == doctest::Approx(-30).epsilon(0.1));
    CHECK(l.gaps.empty());
    // The item torn by the power loss, and the unflushed tail of the run.
    REQUIRE(l.suspect.size() == 2);
    CHECK(l.suspect[0] < l.boots[1].address);
    CHECK(l.suspect[1] > l.boots[1].address);
    const auto text = format_report(rep);
    CHECK(text.find("boot count=") != std::string::npos);
    CHECK(text.find("clock-set") != std::string::npos);
    CHECK(format_report(session_report(ItemStore{}, 7)).find("no items") != std::string::npos);
  }

  TEST_CASE("reports flag a log that starts without a boot marker") {
    const auto& r = rebooted_run();
    auto recs = records::records_from_tag_log(log::iterate_image(r.tags[0].image));
    recs.erase(std::remove_if(recs.begin(), recs.end(),
                              [](const auto& x) { return x.item_type == log::item_type::boot_marker; }),
               recs.end());
    ItemStore s;
    s.ingest(recs);
    const auto rep = session_report(s, 0x1001);
    REQUIRE(rep.logs.size() == 1);
    CHECK_FALSE(rep.logs[0].flags.empty());
    CHECK_FALSE(rep.logs[0].gaps.empty());
  }
}
