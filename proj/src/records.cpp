#include "vh/records.hpp"

#include <cstring>
#include <sstream>

#include "vh/error.hpp"

namespace vh::records {

namespace {
constexpr char file_magic[4] = {'V', 'H', 'R', 'X'};
}

void encode_record(ByteWriter& w, const ReceivedRecord& r) {
  if (r.payload.size() > 255) throw Error(Errc::overflow, "record payload too long");
  w.u64(r.tag_id);
  w.u64(r.creation_time);
  w.u32(r.address);
  w.u8(r.item_type);
  w.i64(r.rx_time_us);
  w.u32(r.station_id);
  w.u8(static_cast<std::uint8_t>(r.payload.size()));
  w.bytes(r.payload);
}

ReceivedRecord decode_record(ByteReader& r) {
  ReceivedRecord rec;
  rec.tag_id = r.u64();
  rec.creation_time = r.u64();
  rec.address = r.u32();
  rec.item_type = r.u8();
  rec.rx_time_us = r.i64();
  rec.station_id = r.u32();
  const auto n = r.u8();
  auto p = r.bytes(n);
  rec.payload.assign(p.begin(), p.end());
  return rec;
}

void append_framed(Bytes& out, const ReceivedRecord& r) {
  ByteWriter body;
  encode_record(body, r);
  auto b = body.take();
  ByteWriter w(out);
  w.u16(static_cast<std::uint16_t>(b.size()));
  w.bytes(b);
}

std::vector<ReceivedRecord> decode_framed(ByteSpan data, std::size_t offset) {
  std::vector<ReceivedRecord> out;
  ByteReader r(data.subspan(offset));
  while (!r.done()) {
    const auto at = offset + r.position();
    const auto len = r.u16();
    if (r.remaining() < len) throw Error(Errc::malformed, "record truncated at offset " + std::to_string(at));
    ByteReader body(r.bytes(len));
    out.push_back(decode_record(body));
    if (!body.done()) throw Error(Errc::malformed, "record length mismatch at offset " + std::to_string(at));
  }
  return out;
}

Bytes record_file_header() {
  Bytes h(file_magic, file_magic + 4);
  h.push_back(record_file_version);
  return h;
}

std::vector<ReceivedRecord> decode_record_file(ByteSpan file) {
  if (file.size() < 5 || std::memcmp(file.data(), file_magic, 4) != 0) {
    throw Error(Errc::malformed, "not a record file");
  }
  if (file[4] != record_file_version) throw Error(Errc::malformed, "unsupported record file version");
  return decode_framed(file, 5);
}

Bytes key_item_payload(const ReceivedRecord& r) {
  ByteWriter w;
  w.u64(r.tag_id);
  w.u64(r.creation_time);
  w.u32(r.address);
  w.u8(r.item_type);
  w.i64(r.rx_time_us);
  w.u32(r.station_id);
  return w.take();
}

std::vector<ReceivedRecord> records_from_station_log(const log::Iteration& it) {
  std::vector<ReceivedRecord> out;
  for (std::size_t i = 0; i + 1 < it.items.size(); ++i) {
    const auto& k = it.items[i];
    const auto& p = it.items[i + 1];
    if (k.type != log::item_type::received_key || p.type != log::item_type::received_payload) continue;
    if (k.payload.size() != 33) continue;
    ByteReader r(k.payload);
    ReceivedRecord rec;
    rec.tag_id = r.u64();
    rec.creation_time = r.u64();
    rec.address = r.u32();
    rec.item_type = r.u8();
    rec.rx_time_us = r.i64();
    rec.station_id = r.u32();
    rec.payload = p.payload;
    out.push_back(std::move(rec));
    ++i;
  }
  return out;
}

std::vector<ReceivedRecord> records_from_tag_log(const log::Iteration& it) {
  std::vector<ReceivedRecord> out;
  if (!it.header) return out;
  for (const auto& item : it.items) {
    ReceivedRecord rec;
    rec.tag_id = it.header->tag_id;
    rec.creation_time = it.header->creation_time;
    rec.address = item.address;
    rec.item_type = item.type;
    rec.payload = item.payload;
    out.push_back(std::move(rec));
  }
  return out;
}

std::string export_text(const std::vector<ReceivedRecord>& records) {
  std::ostringstream o;
  o << "# tag creation address type rx_us station payload\n";
  for (const auto& r : records) {
    o << r.tag_id << ' ' << r.creation_time << ' ' << r.address << ' ' << log::type_name(r.item_type) << ' '
      << r.rx_time_us << ' ' << r.station_id << ' ' << (r.payload.empty() ? "-" : to_hex(r.payload)) << '\n';
  }
  return o.str();
}

}  // namespace vh::records
