#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "vh/error.hpp"
#include "vh/tag_runtime.hpp"

using namespace vh;
using namespace vh::tag;

namespace {

constexpr std::uint64_t tracker_id = 0x1001;

struct Rig {
  media::Media media{media::MediaGeometry{256, 4096, 64}};
  TagRuntime rt;

  explicit Rig(const std::string& def, TagOptions o = {})
      : rt(tagdef::load_tagdef(oracle::data_path(def)), media, o) {
    rt.boot(0);
  }

  SlotResult next() { return rt.on_slot(rt.next_slot_time()); }

  ReplyEffects reply(std::vector<wire::DataItem> items, std::int64_t t) {
    items.insert(items.begin(), wire::AddressedTo{rt.tag_id()});
    return rt.handle_reply(items, t);
  }
};

template <class T>
const T* find(const SlotResult& r) {
  return wire::find_item<T>(r.items);
}

}  // namespace

TEST_SUITE("tag_runtime") {
  TEST_CASE("boot logs a marker and the sensor configuration") {
    Rig g("tracker.tagdef");
    g.rt.log().flush();
    const auto it = log::iterate_items(g.media);
    std::vector<std::uint8_t> types;
    for (const auto& i : it.items) types.push_back(i.type);
    CHECK(types == std::vector<std::uint8_t>{log::item_type::log_header, log::item_type::boot_marker,
                                             log::item_type::sensor_config, log::item_type::sensor_config});
    CHECK(g.rt.boot_count() == 1);
    CHECK(g.rt.current_config() == 0);
  }

  TEST_CASE("boot count survives power loss and the log is reopened") {
    Rig g("tracker.tagdef");
    for (std::int64_t s = 0; s < 30; ++s) g.rt.on_second(s * us_per_s);
    const auto creation = g.rt.log().header().creation_time;
    g.rt.power_loss();
    CHECK_FALSE(g.rt.running());
    g.rt.boot(40 * us_per_s);
    CHECK(g.rt.boot_count() == 2);
    CHECK(g.rt.log().header().creation_time == creation);
    g.rt.log().flush();
    int markers = 0;
    for (const auto& i : log::iterate_items(g.media).items) markers += i.type == log::item_type::boot_marker;
    CHECK(markers == 2);
  }

  TEST_CASE("slot pattern in the initial configuration") {
    Rig g("tracker.tagdef");
    for (std::uint64_t slot = 0; slot < 48; ++slot) {
      CHECK(g.rt.next_slot_time() == static_cast<std::int64_t>(slot) * 500000);
      const auto r = g.next();
      if (slot % 16 == 15) {
        CHECK(r.kind == SlotKind::transmit);
        CHECK(r.mode == tagdef::SlotMode::tx_then_rx);
        CHECK(wire::parse_packet(r.packet.payload) == r.items);
      } else if (slot % 2 == 0) {
        CHECK(r.kind == SlotKind::ping);
      } else {
        CHECK(r.kind == SlotKind::idle);
      }
    }
    CHECK(g.rt.stats().pings_sent == 24);
  }

  TEST_CASE("first packet advertises clock and log state") {
    Rig g("tracker.tagdef");
    SlotResult r;
    while ((r = g.next()).kind != SlotKind::transmit) {
    }
    const auto* st = find<wire::TagStateItem>(r);
    REQUIRE(st != nullptr);
    CHECK(st->will_listen);
    CHECK_FALSE(st->has_data);
    CHECK(find<wire::TagIdItem>(r)->tag_id == tracker_id);
    CHECK(find<wire::ClockItem>(r) != nullptr);
    const auto* ls = find<wire::LogStateItem>(r);
    REQUIRE(ls != nullptr);
    CHECK(ls->write_addr == g.rt.log().cursor().write_addr);
    CHECK(find<wire::LogItemCarrier>(r) == nullptr);
    // Both advertisements wait a minute before repeating.
    g.next();
    while ((r = g.next()).kind != SlotKind::transmit) {
    }
    CHECK(find<wire::ClockItem>(r) == nullptr);
    CHECK(find<wire::LogStateItem>(r) == nullptr);
  }

  TEST_CASE("wakeup commands follow the transition table") {
    Rig g("tracker.tagdef");
    auto fx = g.reply({wire::WakeupItem{1}}, 7500000);
    REQUIRE(fx.transition.has_value());
    CHECK(fx.transition->from == 0);
    CHECK(fx.transition->to == 1);
    CHECK(g.rt.current_config() == 1);
    // Already there: nothing happens.
    CHECK_FALSE(g.reply({wire::WakeupItem{1}}, 8000000).transition.has_value());
    // Unknown argument: ignored.
    CHECK_FALSE(g.reply({wire::WakeupItem{9}}, 8000000).transition.has_value());
    fx = g.reply({wire::WakeupItem{0}}, 9000000);
    REQUIRE(fx.transition.has_value());
    CHECK(g.rt.current_config() == 0);
    fx = g.reply({wire::WakeupItem{wire::WakeupItem::highest}}, 9500000);
    REQUIRE(fx.transition.has_value());
    CHECK(fx.transition->cause == "wakeup-highest");
    CHECK(g.rt.current_config() == 1);
  }

  TEST_CASE("replies for another tag are ignored") {
    Rig g("tracker.tagdef");
    const auto fx = g.rt.handle_reply({wire::AddressedTo{tracker_id + 1}, wire::WakeupItem{1}}, 1000);
    CHECK(fx.ignored);
    CHECK(g.rt.current_config() == 0);
    CHECK(g.rt.handle_reply({wire::WakeupItem{1}}, 1000).ignored);
  }

  TEST_CASE("silence moves back after exactly the rule's timeout") {
    Rig g("tracker.tagdef");
    CHECK_FALSE(g.rt.silence_deadline().has_value());
    g.reply({wire::WakeupItem{1}}, 7500000);
    CHECK(g.rt.silence_deadline() == std::optional<std::int64_t>(17500000));
    g.reply({}, 11500000);
    CHECK(g.rt.silence_deadline() == std::optional<std::int64_t>(21500000));
    CHECK_FALSE(g.rt.on_silence_check(21499999).has_value());
    const auto tr = g.rt.on_silence_check(21500000);
    REQUIRE(tr.has_value());
    CHECK(tr->cause == "silence");
    CHECK(g.rt.current_config() == 0);
    CHECK_FALSE(g.rt.silence_deadline().has_value());
  }

  TEST_CASE("clock items set the clock and are logged") {
    TagOptions o;
    o.epoch_s = 1700000000;
    o.initial_clock_error_s = 5;
    Rig g("tracker.tagdef", o);
    CHECK(g.rt.local_seconds(10 * us_per_s) == 1700000015);
    const auto fx = g.reply({wire::ClockItem{1700000010}}, 10 * us_per_s);
    REQUIRE(fx.clock_set.has_value());
    CHECK(fx.clock_set->first == 1700000015);
    CHECK(fx.clock_set->second == 1700000010);
    CHECK(g.rt.local_seconds(20 * us_per_s) == 1700000020);
    CHECK(g.rt.clock_set());
    g.rt.log().flush();
    const auto items = log::iterate_items(g.media).items;
    const auto c = std::find_if(items.begin(), items.end(),
                                [](const log::LogItem& i) { return i.type == log::item_type::clock_set; });
    REQUIRE(c != items.end());
    CHECK(to_hex(c->payload) == "0ff15365" "0af15365" "01");
  }

  TEST_CASE("unset clocks count from boot") {
    Rig g("tracker.tagdef");
    CHECK_FALSE(g.rt.clock_set());
    CHECK(g.rt.local_seconds(42 * us_per_s) == 42);
  }

  TEST_CASE("log items are carried only after contact in the upload configuration") {
    TagOptions o;
    o.pattern = {100, 64, 0};
    Rig g("uploader.tagdef", o);
    auto r = g.next();
    REQUIRE(r.kind == SlotKind::transmit);
    CHECK(find<wire::TagStateItem>(r)->has_data);
    CHECK(find<wire::LogItemCarrier>(r) == nullptr);
    g.reply({}, r.slot * 500000);
    r = g.next();
    const auto* c = find<wire::LogItemCarrier>(r);
    REQUIRE(c != nullptr);
    CHECK(c->address == 0);
    CHECK(c->item_type == log::item_type::log_header);
    CHECK(r.carried_address == std::optional<std::uint32_t>(0));
    // An ack for the carried item advances the cursor; a stale one does not.
    auto fx = g.reply({wire::AckItem{0}}, 1000000);
    CHECK(fx.acked == std::optional<std::uint32_t>(0));
    CHECK(g.rt.log().cursor().ack_cursor == 26);
    fx = g.reply({wire::AckItem{0}}, 1000000);
    CHECK(fx.ack_mismatch);
    CHECK(g.rt.log().cursor().ack_cursor == 26);
    r = g.next();
    REQUIRE(find<wire::LogItemCarrier>(r) != nullptr);
    CHECK(find<wire::LogItemCarrier>(r)->address == 26);
    CHECK(find<wire::LogItemCarrier>(r)->item_type == log::item_type::boot_marker);
  }

  TEST_CASE("no carriers once contact lapses") {
    TagOptions o;
    o.pattern = {100, 64, 0};
    Rig g("uploader.tagdef", o);
    g.next();
    g.reply({}, 0);
    for (int i = 0; i < 19; ++i) g.next();
    // 10 s default window: slot 20 is at 10 s, slot 21 beyond it.
    CHECK(find<wire::LogItemCarrier>(g.next()) != nullptr);
    CHECK(find<wire::LogItemCarrier>(g.next()) == nullptr);
  }

  TEST_CASE("has_data follows the upload threshold") {
    TagOptions o;
    o.pattern = {50, 64, 0};
    Rig small("uploader.tagdef", o);
    CHECK_FALSE(find<wire::TagStateItem>(small.next())->has_data);
    o.pattern = {70, 64, 0};
    Rig big("uploader.tagdef", o);
    CHECK(find<wire::TagStateItem>(big.next())->has_data);
  }

  TEST_CASE("sensing produces one-shot accumulations and burst fragments") {
    Rig g("tracker.tagdef");
    std::vector<std::uint32_t> added;
    for (std::int64_t s = 0; s < 120; ++s) {
      auto a = g.rt.on_second(s * us_per_s);
      added.insert(added.end(), a.begin(), a.end());
    }
    g.rt.log().flush();
    int press = 0, frags = 0;
    for (const auto& i : log::iterate_items(g.media).items) {
      if (i.type == log::item_type::pressure_temperature) {
        ++press;
        CHECK(i.payload.size() == 4 + 55 * 4);
      }
      if (i.type == log::item_type::acceleration_burst) {
        ++frags;
        CHECK(i.payload.size() == 5 + 25 * 6);
        CHECK(i.payload[4] == (frags - 1) % 2);
      }
    }
    CHECK(press == 1);
    CHECK(frags == 60);
    CHECK(added.size() == 61);
  }

  TEST_CASE("battery stalls skip slots and restart the schedule") {
    TagOptions o;
    o.stall.probability = 1.0;
    Rig g("tracker.tagdef", o);
    const auto r = g.next();
    CHECK(r.kind == SlotKind::stall);
    CHECK(r.resume_us > 0);
    CHECK(g.rt.next_slot_time() == r.resume_us);
    CHECK(g.rt.stats().stalls == 1);
    CHECK(g.rt.on_second(0).empty());
  }

  TEST_CASE("battery voltage relaxes back above the resume level") {
    BatteryState b;
    b.stalled = true;
    b.sag_at_us = 0;
    CHECK(b.voltage_at(0) == doctest::Approx(b.params.sag_v));
    CHECK(b.voltage_at(1000000000) == doctest::Approx(b.params.open_circuit_v).epsilon(1e-3));
    const auto t = b.resume_time();
    CHECK(t % us_per_s == 0);
    CHECK(b.voltage_at(t) >= b.params.resume_v);
    CHECK(b.voltage_at(t - us_per_s) < b.params.resume_v);
  }

  TEST_CASE("ATLAS ping sequences identify the tag") {
    const auto a = atlas_ping_sequence(1, 8192);
    CHECK(a.size() == 1024);
    CHECK(a == atlas_ping_sequence(1, 8192));
    CHECK(a != atlas_ping_sequence(2, 8192));
    CHECK(atlas_ping_sequence(1, 12).size() == 2);
  }

  TEST_CASE("the actuator switches on in its configuration") {
    media::Media m(media::MediaGeometry{256, 4096, 16});
    TagRuntime rt(tagdef::load_tagdef(oracle::data_path("full.tagdef")), m, {});
    rt.boot(0);
    CHECK_FALSE(rt.actuator_on());
    rt.handle_reply({wire::AddressedTo{rt.tag_id()}, wire::WakeupItem{3}}, 1000);
    CHECK(rt.current_config() == 3);
    CHECK(rt.actuator_on());
    rt.handle_reply({wire::AddressedTo{rt.tag_id()}, wire::WakeupItem{2}}, 2000);
    CHECK(rt.actuator_on());
  }

  TEST_CASE("slots must fire on schedule") {
    Rig g("tracker.tagdef");
    CHECK_THROWS_AS(g.rt.on_slot(1), Error);
  }
}
