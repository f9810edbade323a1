#include <doctest.h>

#include "vh/error.hpp"
#include "vh/log.hpp"
#include "vh/records.hpp"
#include "vh/rng.hpp"

using namespace vh;
using namespace vh::records;

namespace {

ReceivedRecord sample(std::uint32_t address, Bytes payload = {0xAA, 0xBB}) {
  return {0x0102030405060708ULL, 1700000000, address, 0x30, std::move(payload), -5, 100};
}

}  // namespace

TEST_SUITE("records") {
  TEST_CASE("record body layout") {
    ByteWriter w;
    encode_record(w, sample(0x1234));
    const auto b = w.take();
    CHECK(b.size() == record_fixed_size + 2);
    CHECK(to_hex(b) == "0807060504030201" "00f1536500000000" "34120000" "30" "fbffffffffffffff" "64000000" "02" "aabb");
    ByteReader r(b);
    CHECK(decode_record(r) == sample(0x1234));
  }

  TEST_CASE("record files round-trip and reject damage") {
    Bytes file = record_file_header();
    CHECK(to_hex(file) == "5648525801");
    std::vector<ReceivedRecord> recs;
    Rng rng(1);
    for (std::uint32_t i = 0; i < 50; ++i) {
      Bytes p(rng.below(225));
      for (auto& x : p) x = static_cast<std::uint8_t>(rng.next());
      recs.push_back(sample(i * 7, p));
      append_framed(file, recs.back());
    }
    CHECK(decode_record_file(file) == recs);
    CHECK_THROWS_AS(decode_record_file(Bytes(file.begin(), file.end() - 1)), Error);
    auto bad = file;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_record_file(bad), Error);
    bad = file;
    bad[4] = 9;
    CHECK_THROWS_AS(decode_record_file(bad), Error);
  }

  TEST_CASE("keys order by tag, log and address") {
    CHECK(Key{1, 5, 9} < Key{2, 0, 0});
    CHECK(Key{1, 5, 9} < Key{1, 6, 0});
    CHECK(Key{1, 5, 9} < Key{1, 5, 10});
    CHECK(sample(3).key() == Key{0x0102030405060708ULL, 1700000000, 3});
  }

  TEST_CASE("station log pairing skips orphans") {
    media::Media m({512, 8192, 4});
    auto lg = log::Log::format(m, 100, 1);
    const auto a = sample(10), b = sample(20, {1}), c = sample(30, {});
    lg.append(log::item_type::received_key, key_item_payload(a));
    lg.append(log::item_type::received_payload, a.payload);
    lg.append(log::item_type::received_key, key_item_payload(b));  // orphan
    lg.append(log::item_type::received_key, key_item_payload(c));
    lg.append(log::item_type::received_payload, c.payload);
    lg.flush();
    CHECK(key_item_payload(a).size() == 33);
    CHECK(records_from_station_log(log::iterate_items(m)) == std::vector<ReceivedRecord>{a, c});
  }

  TEST_CASE("tag logs convert item by item") {
    media::Media m({256, 4096, 4});
    auto lg = log::Log::format(m, 77, 1234);
    const auto addr = lg.append(log::item_type::test_pattern, Bytes{5, 6});
    lg.flush();
    const auto recs = records_from_tag_log(log::iterate_items(m));
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].address == 0);
    CHECK(recs[0].item_type == log::item_type::log_header);
    CHECK(recs[1].address == addr);
    CHECK(recs[1].tag_id == 77);
    CHECK(recs[1].creation_time == 1234);
    CHECK(recs[1].payload == Bytes{5, 6});
    CHECK(recs[1].rx_time_us == 0);
    CHECK(recs[1].station_id == 0);
  }

  TEST_CASE("text export has a header and one line per record") {
    const auto t = export_text({sample(1), sample(2)});
    CHECK(std::count(t.begin(), t.end(), '\n') == 3);
    CHECK(t.rfind("# tag", 0) == 0);
    CHECK(export_text({sample(1, {})}).find(" -\n") != std::string::npos);
    CHECK(t.find("aabb") != std::string::npos);
  }
}
