#include "oracles.hpp"

#include <algorithm>

#include "vh/error.hpp"

namespace oracle {

using namespace vh;

namespace {

struct Item {
  std::uint64_t address;
  std::uint64_t end;
  std::uint8_t type;
};

// Item walk confined to one sector, with the same skipping rules as the log:
// an erased header or one that cannot be an item skips to the next page.
std::vector<Item> items_in_sector(const media::Media& m, std::uint64_t begin, std::uint64_t end,
                                  std::uint32_t page) {
  std::vector<Item> out;
  std::uint64_t a = begin;
  while (a + 2 <= end) {
    const std::uint8_t type = m.at(a);
    const std::uint8_t len = m.at(a + 1);
    const bool erased = type == 0xFF && len == 0xFF;
    const bool bad = type == 0x00 || type == 0xFF || len > log::max_payload || a + 2 + len > end;
    if (erased || bad) {
      a = (a / page + 1) * page;
      continue;
    }
    out.push_back({a, a + 2 + len, type});
    a += 2 + len;
  }
  return out;
}

}  // namespace

log::LogCursor linear_recover(const media::Media& m) {
  const auto& img = m.image();
  if (img.size() < log::log_header_size || img[0] != log::item_type::log_header) {
    throw Error(Errc::corrupt_log, "no log header");
  }
  const std::uint32_t page = 1u << img[8];
  const std::uint32_t sector = 1u << img[9];
  const std::uint64_t sectors = img.size() / sector;

  std::uint64_t last = 0;
  for (std::uint64_t s = 0; s < sectors; ++s) {
    const auto b = img.begin() + static_cast<std::ptrdiff_t>(s * sector);
    if (std::any_of(b, b + sector, [](std::uint8_t x) { return x != 0xFF; })) last = s;
  }
  const std::uint64_t lo = last * sector;
  const std::uint64_t hi = lo + sector;
  std::uint64_t last_byte = lo;
  for (std::uint64_t a = lo; a < hi; ++a) {
    if (img[a] != 0xFF) last_byte = a;
  }
  const std::uint64_t p = last_byte / page * page;

  const Item* straddler = nullptr;
  auto items = items_in_sector(m, lo, hi, page);
  for (const auto& it : items) {
    if (it.end > p) {
      straddler = &it;
      break;
    }
  }
  bool dead = false;
  std::uint64_t write;
  const bool trusted = straddler && (straddler->address < p || straddler->address == 0);
  if (trusted) {
    bool dirty_after = false;
    for (auto a = straddler->end; a < p + page; ++a) dirty_after |= img[a] != 0xFF;
    write = straddler->end < p + page && dirty_after ? p + page : straddler->end;
  } else if (p == lo && last > 0) {
    dead = true;
    write = hi;
  } else {
    write = p + page;
  }

  std::uint32_t ack = 0;
  for (std::uint64_t s = 1; s <= last; ++s) {
    if (dead && s == last) break;
    const auto base = s * sector;
    if (img[base] != log::item_type::sector_header || img[base + 1] != log::sector_header_size - 2) continue;
    const auto h = log::SectorHeader::decode_payload(ByteSpan(img).subspan(base + 2, log::sector_header_size - 2));
    if (h && h->ack_cursor <= base) ack = h->ack_cursor;
  }
  log::LogCursor c;
  c.write_addr = static_cast<std::uint32_t>(std::min<std::uint64_t>(write, img.size()));
  c.ack_cursor = std::min(ack, c.write_addr);
  return c;
}

std::size_t samples_in_valid_items(ByteSpan image, tagdef::SensorKind kind) {
  const auto it = log::iterate_image(image);
  const std::uint8_t type = kind == tagdef::SensorKind::pressure_temperature ? log::item_type::pressure_temperature
                                                                              : log::item_type::acceleration_burst;
  const std::size_t size = kind == tagdef::SensorKind::pressure_temperature ? 4 : 6;
  const std::size_t prefix = kind == tagdef::SensorKind::pressure_temperature ? 4 : 5;
  std::size_t n = 0;
  for (const auto& item : it.items) {
    if (item.type == type && item.validity == log::Validity::valid) n += (item.payload.size() - prefix) / size;
  }
  return n;
}

std::vector<std::int32_t> truth_values(const sensors::SensorSim& sim, tagdef::SensorKind kind, std::int64_t sim_us) {
  if (kind == tagdef::SensorKind::pressure_temperature) {
    const auto s = sim.pressure_at(sim_us);
    return {static_cast<std::int32_t>(s.pressure_qpa), s.temperature_half_c};
  }
  const auto s = sim.acceleration_at(sim_us);
  return {s.x, s.y, s.z};
}

std::string data_path(const std::string& name) { return std::string(VH_TEST_DATA) + "/" + name; }

}  // namespace oracle
