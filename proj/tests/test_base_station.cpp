#include <doctest.h>

#include "vh/base_station.hpp"
#include "vh/error.hpp"
#include "vh/log.hpp"
#include "vh/records.hpp"

using namespace vh;
using namespace vh::station;
using wire::DataItem;

namespace {

constexpr std::uint64_t tag = 0x1001;
constexpr std::uint64_t epoch = 1700000000;

StationOptions opts() {
  StationOptions o;
  o.id = 100;
  o.epoch_s = epoch;
  return o;
}

std::vector<DataItem> packet(bool listen, bool has_data = false, std::uint8_t config = 0) {
  return {wire::TagStateItem{listen, has_data, config}, wire::TagIdItem{tag}};
}

wire::LogItemCarrier carrier(std::uint32_t address, Bytes payload = {1, 2, 3}) {
  return {555, address, 0x30, std::move(payload)};
}

void defaults(BaseStation& bs) {
  bs.add_intent({IntentKind::adjust_clock, std::nullopt, 0});
  bs.add_intent({IntentKind::acknowledge, std::nullopt, 0});
}

template <class T>
const T* find(const PacketOutcome& o) {
  return wire::find_item<T>(o.reply_items);
}

}  // namespace

TEST_SUITE("base_station") {
  TEST_CASE("clock fixes only beyond two seconds") {
    BaseStation bs(opts());
    defaults(bs);
    const std::int64_t t = 10 * 1000000;
    auto p = packet(true);
    p.push_back(wire::ClockItem{epoch + 10 + 3});
    auto out = bs.handle_packet(p, t);
    REQUIRE(find<wire::ClockItem>(out) != nullptr);
    CHECK(find<wire::ClockItem>(out)->utc_seconds == epoch + 10);
    CHECK(std::holds_alternative<wire::AddressedTo>(out.reply_items.front()));
    for (std::int64_t err : {-2, -1, 0, 1, 2}) {
      p.back() = wire::ClockItem{static_cast<std::uint64_t>(static_cast<std::int64_t>(epoch) + 10 + err)};
      CHECK_FALSE(bs.handle_packet(p, t).reply.has_value());
    }
    p.back() = wire::ClockItem{epoch + 10 - 3};
    CHECK(find<wire::ClockItem>(bs.handle_packet(p, t)) != nullptr);
  }

  TEST_CASE("stations without a valid clock never correct") {
    auto o = opts();
    o.valid_clock = false;
    BaseStation bs(o);
    defaults(bs);
    auto p = packet(true);
    p.push_back(wire::ClockItem{1});
    CHECK_FALSE(bs.handle_packet(p, 0).reply.has_value());
  }

  TEST_CASE("carried items are stored and acknowledged") {
    BaseStation bs(opts());
    defaults(bs);
    auto p = packet(true, true, 0);
    p.push_back(carrier(26));
    const auto out = bs.handle_packet(p, 5000);
    REQUIRE(out.persisted.has_value());
    CHECK(out.persisted->address == 26);
    CHECK(out.persisted->rx_time_us == 5000);
    CHECK(out.persisted->station_id == 100);
    REQUIRE(find<wire::AckItem>(out) != nullptr);
    CHECK(find<wire::AckItem>(out)->acked_address == 26);
    CHECK(find<wire::WakeupItem>(out) == nullptr);
    REQUIRE(bs.accepted().size() == 1);
    CHECK(bs.accepted()[0].payload == Bytes{1, 2, 3});
  }

  TEST_CASE("items from a tag that will not listen are stored without a reply") {
    BaseStation bs(opts());
    defaults(bs);
    auto p = packet(false);
    p.push_back(carrier(26));
    const auto out = bs.handle_packet(p, 0);
    CHECK(out.persisted.has_value());
    CHECK_FALSE(out.reply.has_value());
  }

  TEST_CASE("no acknowledge intent, no ack") {
    BaseStation bs(opts());
    auto p = packet(true);
    p.push_back(carrier(26));
    const auto out = bs.handle_packet(p, 0);
    CHECK(out.persisted.has_value());
    CHECK_FALSE(out.reply.has_value());
  }

  TEST_CASE("tags with data are invited to upload") {
    BaseStation bs(opts());
    defaults(bs);
    auto out = bs.handle_packet(packet(true, true), 0);
    REQUIRE(find<wire::WakeupItem>(out) != nullptr);
    CHECK(find<wire::WakeupItem>(out)->is_highest());
    CHECK_FALSE(find<wire::WakeupItem>(bs.handle_packet(packet(true, false), 0)));

    auto o = opts();
    o.logging = false;
    BaseStation relay(o);
    defaults(relay);
    auto p = packet(true, true);
    p.push_back(carrier(26));
    out = relay.handle_packet(p, 0);
    CHECK_FALSE(out.persisted.has_value());
    CHECK_FALSE(out.reply.has_value());
  }

  TEST_CASE("wakeup intents repeat until the tag reports the target") {
    BaseStation bs(opts());
    bs.add_intent({IntentKind::wakeup, tag, 1});
    auto out = bs.handle_packet(packet(true, false, 0), 0);
    REQUIRE(find<wire::WakeupItem>(out) != nullptr);
    CHECK(find<wire::WakeupItem>(out)->target == 1);
    CHECK_FALSE(bs.handle_packet(packet(true, false, 1), 0).reply.has_value());
    // Other tags are not addressed.
    std::vector<DataItem> other{wire::TagStateItem{true, false, 0}, wire::TagIdItem{tag + 1}};
    CHECK_FALSE(bs.handle_packet(other, 0).reply.has_value());
  }

  TEST_CASE("a highest wakeup is satisfied once items arrive") {
    BaseStation bs(opts());
    bs.add_intent({IntentKind::wakeup, std::nullopt, wire::WakeupItem::highest});
    CHECK(find<wire::WakeupItem>(bs.handle_packet(packet(true), 0)) != nullptr);
    auto p = packet(true);
    p.push_back(carrier(26));
    CHECK(find<wire::WakeupItem>(bs.handle_packet(p, 0)) == nullptr);
  }

  TEST_CASE("intent bookkeeping") {
    BaseStation bs(opts());
    CHECK_FALSE(bs.add_intent({IntentKind::wakeup, tag, 1}).has_value());
    CHECK_FALSE(bs.add_intent({IntentKind::wakeup, tag, 1}).has_value());
    CHECK(bs.intents().size() == 1);
    const auto w = bs.add_intent({IntentKind::wakeup, tag, 0});
    REQUIRE(w.has_value());
    CHECK(w->find("overrides") != std::string::npos);
    // The last one added wins.
    auto out = bs.handle_packet(packet(true, false, 1), 0);
    REQUIRE(find<wire::WakeupItem>(out) != nullptr);
    CHECK(find<wire::WakeupItem>(out)->target == 0);
    CHECK(bs.remove_intent({IntentKind::wakeup, tag, 0}));
    CHECK_FALSE(bs.remove_intent({IntentKind::wakeup, tag, 0}));
    CHECK(bs.intents().size() == 1);
    CHECK_FALSE(describe(Intent{IntentKind::acknowledge, std::nullopt, 0}).empty());
  }

  TEST_CASE("sightings track the latest tag state") {
    BaseStation bs(opts());
    auto p = packet(false, true, 3);
    p.push_back(wire::ClockItem{42});
    bs.handle_packet(p, 777);
    REQUIRE(bs.sightings().count(tag) == 1);
    const auto& s = bs.sightings().at(tag);
    CHECK(s.rx_time_us == 777);
    CHECK(s.state.config_index == 3);
    CHECK(s.advertised_clock == std::optional<std::uint64_t>(42));
  }

  TEST_CASE("unparsable packets get no reply") {
    BaseStation bs(opts());
    defaults(bs);
    const auto out = bs.handle_packet(wire::Packet{Bytes{0x01, 0x30}, wire::SourceKind::tag}, 0);
    CHECK_FALSE(out.reply.has_value());
    CHECK_FALSE(out.persisted.has_value());
    // A well-formed packet goes through the same path as parsed items.
    auto p = packet(true, true);
    const auto bytes = wire::build_packet(p, wire::SourceKind::tag);
    CHECK(bs.handle_packet(bytes, 0).reply_items == bs.handle_packet(p, 0).reply_items);
  }

  TEST_CASE("tethered store is a record file") {
    BaseStation bs(opts());
    defaults(bs);
    for (std::uint32_t a : {26u, 40u, 60u}) {
      auto p = packet(true);
      p.push_back(carrier(a));
      bs.handle_packet(p, a * 1000);
    }
    const auto file = bs.store_bytes();
    CHECK(file.size() >= 5);
    CHECK(records::decode_record_file(file) == bs.accepted());
  }

  TEST_CASE("a full tethered store stops accepting") {
    auto o = opts();
    o.max_records = 2;
    BaseStation bs(o);
    defaults(bs);
    int full = 0;
    for (std::uint32_t a : {26u, 40u, 60u}) {
      auto p = packet(true);
      p.push_back(carrier(a));
      const auto out = bs.handle_packet(p, 0);
      full += out.storage_full;
      if (out.storage_full) CHECK(find<wire::AckItem>(out) == nullptr);
    }
    CHECK(full == 1);
    CHECK(bs.accepted().size() == 2);
  }

  TEST_CASE("SD store keeps records as key and payload items") {
    auto o = opts();
    o.store = StoreKind::sd;
    o.sd_sectors = 4;
    BaseStation bs(o);
    defaults(bs);
    for (std::uint32_t a = 0; a < 20; ++a) {
      auto p = packet(true);
      p.push_back(carrier(a * 10, Bytes(a, static_cast<std::uint8_t>(a))));
      bs.handle_packet(p, a);
    }
    bs.flush();
    REQUIRE(bs.sd_media() != nullptr);
    const auto recs = records::records_from_station_log(log::iterate_image(bs.store_bytes()));
    CHECK(recs == bs.accepted());
  }

  TEST_CASE("a full SD card stops accepting") {
    auto o = opts();
    o.store = StoreKind::sd;
    o.sd_sectors = 1;
    BaseStation bs(o);
    defaults(bs);
    bool full = false;
    for (std::uint32_t a = 0; a < 2000 && !full; ++a) {
      auto p = packet(true);
      p.push_back(carrier(a, Bytes(200, 1)));
      full = bs.handle_packet(p, 0).storage_full;
    }
    CHECK(full);
  }
}
