#include "vh/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <sstream>

#include "vh/error.hpp"
#include "vh/log.hpp"
#include "vh/sensors.hpp"

namespace vh::pipeline {

namespace {

constexpr char store_magic[4] = {'V', 'H', 'S', 'T'};
constexpr std::uint8_t store_version = 1;

std::uint32_t end_of(const records::ReceivedRecord& r) {
  return r.address + static_cast<std::uint32_t>(log::item_header_size + r.payload.size());
}

bool earlier(const records::ReceivedRecord& a, const records::ReceivedRecord& b) {
  return std::tie(a.rx_time_us, a.station_id) < std::tie(b.rx_time_us, b.station_id);
}

struct ClockSet {
  std::uint32_t address;
  std::int64_t old_local;
  std::int64_t new_local;
  bool was_set;
};

std::optional<ClockSet> decode_clock_set(const records::ReceivedRecord& r) {
  if (r.payload.size() != 9) return std::nullopt;
  ByteReader rd(r.payload);
  ClockSet c{r.address, rd.u32(), rd.u32(), false};
  c.was_set = rd.u8() != 0;
  return c;
}

// Items of one log split at boot markers, with each item's validity.
struct Session {
  std::optional<std::uint16_t> boot_count;
  std::uint32_t start_address = 0;
  std::vector<std::size_t> items;  // indices into the log's item list
  std::vector<ClockSet> clock_sets;
};

struct Analysis {
  std::vector<records::ReceivedRecord> items;
  std::vector<log::Validity> validity;
  std::vector<Session> sessions;
  std::vector<std::size_t> session_of;
};

Analysis analyze(const ItemStore& store, std::uint64_t tag_id, std::uint64_t creation) {
  Analysis a;
  a.items = store.items_of(tag_id, creation);
  std::vector<std::uint8_t> types;
  for (const auto& r : a.items) types.push_back(r.item_type);
  a.validity = log::classify(types);
  // A tag uploads an item only once its successor is durable, so an uploaded
  // last item is not torn; only a following boot marker would make it suspect.
  for (std::size_t i = a.items.size(); i-- > 0;) {
    if (log::is_structural(a.items[i].item_type)) continue;
    if (a.items[i].station_id != 0) a.validity[i] = log::Validity::valid;
    break;
  }
  a.sessions.emplace_back();
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    const auto& r = a.items[i];
    if (r.item_type == log::item_type::boot_marker) {
      Session s;
      s.start_address = r.address;
      if (auto b = log::BootMarker::decode_payload(r.payload)) s.boot_count = b->boot_count;
      a.sessions.push_back(std::move(s));
    }
    a.sessions.back().items.push_back(i);
    a.session_of.push_back(a.sessions.size() - 1);
    if (r.item_type == log::item_type::clock_set) {
      if (auto c = decode_clock_set(r)) a.sessions.back().clock_sets.push_back(*c);
    }
  }
  return a;
}

// Seconds to add to a timestamp logged at `address` to express it in the
// clock regime of the session's last clock setting.
std::int64_t rebase_offset(const Session& s, std::uint32_t address) {
  std::int64_t off = 0;
  for (const auto& c : s.clock_sets) {
    if (c.address > address) off += c.new_local - c.old_local;
  }
  return off;
}

std::vector<std::int32_t> decode_values(tagdef::SensorKind kind, ByteReader& r) {
  if (kind == tagdef::SensorKind::pressure_temperature) {
    auto s = sensors::decode_pressure(r);
    return {static_cast<std::int32_t>(s.pressure_qpa), s.temperature_half_c};
  }
  auto s = sensors::decode_acceleration(r);
  return {s.x, s.y, s.z};
}

}  // namespace

IngestReport ItemStore::ingest(const std::vector<records::ReceivedRecord>& batch) {
  IngestReport rep;
  for (const auto& r : batch) {
    auto [it, inserted] = records_.try_emplace(r.key(), r);
    if (inserted) {
      ++rep.inserted;
      continue;
    }
    auto& have = it->second;
    if (have.item_type != r.item_type || have.payload != r.payload) {
      ++rep.conflicts;
      rep.conflict_keys.push_back(r.key());
      continue;
    }
    ++rep.duplicates;
    if (earlier(r, have)) have = r;
  }
  return rep;
}

std::vector<records::ReceivedRecord> ItemStore::items_of(std::uint64_t tag_id, std::uint64_t creation_time) const {
  std::vector<records::ReceivedRecord> out;
  auto it = records_.lower_bound(records::Key{tag_id, creation_time, 0});
  for (; it != records_.end() && it->first.tag_id == tag_id && it->first.creation_time == creation_time; ++it) {
    out.push_back(it->second);
  }
  return out;
}

std::vector<std::uint64_t> ItemStore::logs_of(std::uint64_t tag_id) const {
  std::set<std::uint64_t> c;
  for (auto it = records_.lower_bound(records::Key{tag_id, 0, 0}); it != records_.end() && it->first.tag_id == tag_id;
       ++it) {
    c.insert(it->first.creation_time);
  }
  return {c.begin(), c.end()};
}

Bytes ItemStore::serialize() const {
  Bytes out(store_magic, store_magic + 4);
  out.push_back(store_version);
  for (const auto& [k, r] : records_) records::append_framed(out, r);
  return out;
}

ItemStore ItemStore::deserialize(ByteSpan data) {
  if (data.size() < 5 || std::memcmp(data.data(), store_magic, 4) != 0) {
    throw Error(Errc::malformed, "not a store file");
  }
  if (data[4] != store_version) throw Error(Errc::malformed, "unsupported store version");
  ItemStore s;
  auto rep = s.ingest(records::decode_framed(data, 5));
  if (rep.conflicts != 0 || rep.duplicates != 0) throw Error(Errc::corrupt_log, "store file has repeated keys");
  return s;
}

void ItemStore::save(const std::string& path) const { write_file(path, serialize()); }

ItemStore ItemStore::load(const std::string& path) { return deserialize(read_file(path)); }

std::vector<records::ReceivedRecord> load_records(const std::string& path) {
  const auto data = read_file(path);
  if (data.size() >= 4 && std::memcmp(data.data(), "VHRX", 4) == 0) return records::decode_record_file(data);
  if (data.size() >= 4 && std::memcmp(data.data(), store_magic, 4) == 0) {
    auto s = ItemStore::deserialize(data);
    std::vector<records::ReceivedRecord> out;
    for (const auto& [k, r] : s.records()) out.push_back(r);
    return out;
  }
  auto it = log::iterate_image(data);
  if (!it.header) throw Error(Errc::malformed, path + ": not a record file, store or log image");
  const bool station = std::any_of(it.items.begin(), it.items.end(),
                                   [](const log::LogItem& i) { return i.type == log::item_type::received_key; });
  return station ? records::records_from_station_log(it) : records::records_from_tag_log(it);
}

std::vector<Gap> coverage_gaps(const std::vector<records::ReceivedRecord>& items) {
  std::vector<Gap> gaps;
  if (items.empty()) return gaps;
  std::uint32_t sector = 0;
  if (items.front().address == 0 && items.front().item_type == log::item_type::log_header) {
    if (auto h = log::LogHeader::decode_payload(items.front().payload)) sector = h->sector_size();
  }
  if (sector == 0) {
    // Header lost: sector headers sit at multiples of the sector size.
    for (const auto& r : items) {
      if (r.item_type == log::item_type::sector_header && r.address != 0) sector = std::gcd(sector, r.address);
    }
  }
  if (items.front().address != 0) gaps.push_back(Gap{0, items.front().address, {}, 0, 0, 0, "missing items"});
  for (std::size_t i = 1; i < items.size(); ++i) {
    const auto prev_end = end_of(items[i - 1]);
    const auto next = items[i].address;
    if (next <= prev_end) continue;
    if (sector != 0 && next % sector == 0 && next / sector == prev_end / sector + 1 &&
        items[i].item_type == log::item_type::sector_header) {
      // Tail left unused because the first item of the new sector did not fit.
      std::uint32_t first_size = log::item_header_size + log::max_payload + 1;
      if (i + 1 < items.size() && items[i + 1].address == end_of(items[i])) {
        first_size = end_of(items[i + 1]) - items[i + 1].address;
      }
      if (next - prev_end < first_size) continue;
    }
    gaps.push_back(Gap{prev_end, next, {}, 0, 0, 0, "missing items"});
  }
  return gaps;
}

SensorSeries extract_series(const ItemStore& store, std::uint64_t tag_id, std::uint64_t creation_time,
                            tagdef::SensorKind kind, const tagdef::TagDefinition* fallback) {
  SensorSeries out;
  out.kind = kind;
  const auto a = analyze(store, tag_id, creation_time);
  if (a.items.empty()) return out;
  const auto want = sensors::item_type_for(kind);
  const auto ssize = tagdef::sample_size(kind);

  const auto schedule_for = [&](std::size_t item_index) -> tagdef::SensorSchedule {
    const auto& sess = a.sessions[a.session_of[item_index]];
    std::optional<tagdef::SensorSchedule> found;
    for (auto i : sess.items) {
      if (i >= item_index) break;
      if (a.items[i].item_type != log::item_type::sensor_config) continue;
      auto s = sensors::decode_sensor_config(a.items[i].payload);
      if (s && s->kind == kind) found = s;
    }
    if (found) return *found;
    if (fallback != nullptr) {
      for (const auto& s : fallback->sensors) {
        if (s.kind == kind) return s;
      }
    }
    throw Error(Errc::validation, "tag " + std::to_string(tag_id) + " log " + std::to_string(creation_time) +
                                      ": no sensor configuration for the session at address " +
                                      std::to_string(sess.start_address) + " and no definition given");
  };

  struct Burst {
    std::size_t first_item;
    std::int64_t t_s;
    std::map<std::uint8_t, const records::ReceivedRecord*> fragments;
  };
  std::map<std::pair<std::size_t, std::uint32_t>, Burst> bursts;

  for (std::size_t i = 0; i < a.items.size(); ++i) {
    const auto& r = a.items[i];
    if (r.item_type != want || a.validity[i] != log::Validity::valid) continue;
    const auto& sess = a.sessions[a.session_of[i]];
    const auto sch = schedule_for(i);
    if (sch.mode == tagdef::SensorMode::one_shot) {
      if (r.payload.size() < 4 || (r.payload.size() - 4) % ssize != 0) continue;
      ByteReader rd(r.payload);
      const std::int64_t t_s = rd.u32() + rebase_offset(sess, r.address);
      for (std::uint32_t k = 0; !rd.done(); ++k) {
        Sample s;
        s.t_us = (t_s + std::int64_t{k} * sch.every_s) * 1000000;
        s.values = decode_values(kind, rd);
        out.samples.push_back(std::move(s));
      }
    } else {
      if (r.payload.size() < 5 || (r.payload.size() - 5) % ssize != 0) continue;
      const std::uint32_t ts = load_u32(r.payload);
      auto& b = bursts[{a.session_of[i], ts}];
      if (b.fragments.empty()) {
        b.first_item = i;
        b.t_s = ts + rebase_offset(sess, r.address);
      }
      b.fragments[r.payload[4]] = &r;
    }
  }

  for (const auto& [key, b] : bursts) {
    const auto sch = schedule_for(b.first_item);
    const auto sizes = sensors::fragment_sizes(sch.burst_samples(), sch.samples_per_item());
    std::uint32_t offset = 0;
    for (std::size_t f = 0; f < sizes.size(); ++f) {
      const std::int64_t t0 = b.t_s * 1000000;
      auto it = b.fragments.find(static_cast<std::uint8_t>(f));
      if (it == b.fragments.end()) {
        Gap g;
        g.fragment = static_cast<std::uint8_t>(f);
        g.first_sample = offset;
        g.sample_count = sizes[f];
        g.t_begin_us = t0 + sensors::burst_offset_us(offset, sch.rate_hz);
        g.reason = "missing fragment";
        // Where the fragment would sit if it follows or precedes a neighbour
        // directly; an address gap of exactly that extent is this fragment.
        const auto item_len = static_cast<std::uint32_t>(log::item_header_size + 5 + sizes[f] * ssize);
        auto prev = f > 0 ? b.fragments.find(static_cast<std::uint8_t>(f - 1)) : b.fragments.end();
        auto next = b.fragments.find(static_cast<std::uint8_t>(f + 1));
        if (prev != b.fragments.end()) {
          g.address_begin = prev->second->address + static_cast<std::uint32_t>(log::item_header_size + prev->second->payload.size());
          g.address_end = g.address_begin + item_len;
        } else if (next != b.fragments.end() && next->second->address >= item_len) {
          g.address_end = next->second->address;
          g.address_begin = g.address_end - item_len;
        }
        out.gaps.push_back(g);
      } else {
        ByteReader rd(ByteSpan(it->second->payload).subspan(5));
        for (std::uint32_t k = offset; !rd.done(); ++k) {
          Sample s;
          s.t_us = t0 + sensors::burst_offset_us(k, sch.rate_hz);
          s.values = decode_values(kind, rd);
          out.samples.push_back(std::move(s));
        }
      }
      offset += sizes[f];
    }
  }

  std::stable_sort(out.samples.begin(), out.samples.end(),
                   [](const Sample& x, const Sample& y) { return x.t_us < y.t_us; });
  std::vector<Sample> kept;
  for (auto& s : out.samples) {
    if (!kept.empty() && s.t_us <= kept.back().t_us) {
      Gap g;
      g.t_begin_us = s.t_us;
      g.reason = "overlapping timestamp dropped";
      out.gaps.push_back(g);
      continue;
    }
    kept.push_back(std::move(s));
  }
  out.samples = std::move(kept);
  std::vector<Gap> unexplained;
  std::set<std::size_t> located;
  for (auto& c : coverage_gaps(a.items)) {
    auto g = std::find_if(out.gaps.begin(), out.gaps.end(), [&](const Gap& x) {
      return x.fragment && x.address_begin == c.address_begin && x.address_end == c.address_end;
    });
    if (g == out.gaps.end()) unexplained.push_back(c);
    else located.insert(static_cast<std::size_t>(g - out.gaps.begin()));
  }
  for (std::size_t i = 0; i < out.gaps.size(); ++i) {
    if (out.gaps[i].fragment && !located.count(i)) out.gaps[i].address_begin = out.gaps[i].address_end = 0;
  }
  for (auto& g : unexplained) out.gaps.push_back(g);
  return out;
}

std::string export_series(const SensorSeries& series) {
  std::ostringstream o;
  o << "# " << tagdef::to_string(series.kind) << "\n";
  o << (series.kind == tagdef::SensorKind::pressure_temperature ? "# t_us,pressure_qpa,temperature_half_c,gap\n"
                                                                 : "# t_us,x,y,z,gap\n");
  for (const auto& s : series.samples) {
    o << s.t_us;
    for (auto v : s.values) o << ',' << v;
    o << ",0\n";
  }
  for (const auto& g : series.gaps) {
    o << "# gap " << g.reason;
    if (g.fragment) {
      o << " fragment=" << int{*g.fragment} << " samples=" << g.first_sample << ".."
        << (g.first_sample + g.sample_count - 1) << " t_us=" << g.t_begin_us;
    } else if (g.address_end > g.address_begin) {
      o << " addresses=" << g.address_begin << ".." << g.address_end;
    } else {
      o << " t_us=" << g.t_begin_us;
    }
    o << "\n";
  }
  return o.str();
}

double pressure_to_altitude(double p_pa, double p0_pa) {
  if (!(p_pa > 0) || !(p0_pa > 0)) throw Error(Errc::validation, "pressure must be positive");
  return isa_scale_m * (1.0 - std::pow(p_pa / p0_pa, 1.0 / isa_exponent));
}

SessionReport session_report(const ItemStore& store, std::uint64_t tag_id) {
  SessionReport rep;
  rep.tag_id = tag_id;
  for (auto creation : store.logs_of(tag_id)) {
    const auto a = analyze(store, tag_id, creation);
    LogReport lr;
    lr.creation_time = creation;
    lr.items = a.items.size();
    lr.gaps = coverage_gaps(a.items);
    bool seen_data = false;
    bool after_boot = false;
    for (std::size_t i = 0; i < a.items.size(); ++i) {
      const auto& r = a.items[i];
      if (a.validity[i] == log::Validity::suspect) lr.suspect.push_back(r.address);
      if (log::is_structural(r.item_type)) continue;
      if (r.item_type == log::item_type::boot_marker) {
        auto b = log::BootMarker::decode_payload(r.payload);
        lr.boots.push_back(BootInfo{r.address, b ? b->boot_count : std::uint16_t{0}});
        after_boot = true;
        seen_data = true;
        continue;
      }
      if (!seen_data) {
        lr.flags.push_back("log starts without a boot marker (first item at " + std::to_string(r.address) + ")");
        seen_data = true;
      }
      if (r.item_type == log::item_type::sensor_config) {
        if (!after_boot) {
          lr.flags.push_back("sensor configuration at " + std::to_string(r.address) +
                             " not preceded by a boot marker (boot marker lost?)");
        }
        continue;
      }
      after_boot = false;
      if (r.item_type == log::item_type::clock_set) {
        if (auto c = decode_clock_set(r)) {
          lr.clock_sets.push_back(ClockEvent{c->address, c->old_local, c->new_local, c->was_set});
        }
      }
    }
    for (std::size_t s = 1; s < a.sessions.size(); ++s) {
      if (a.sessions[s].clock_sets.empty()) {
        lr.flags.push_back("session at " + std::to_string(a.sessions[s].start_address) +
                           " has no clock setting; its timestamps may be relative to boot");
      }
    }
    rep.logs.push_back(std::move(lr));
  }
  return rep;
}

std::string format_report(const SessionReport& r) {
  std::ostringstream o;
  o << "tag " << r.tag_id << "\n";
  if (r.logs.empty()) o << "  no items\n";
  for (const auto& l : r.logs) {
    o << "log creation=" << l.creation_time << " items=" << l.items << "\n";
    for (const auto& b : l.boots) o << "  boot count=" << b.boot_count << " address=" << b.address << "\n";
    for (const auto& c : l.clock_sets) {
      o << "  clock-set address=" << c.address << " old=" << c.old_local << " new=" << c.new_local
        << " was_set=" << (c.was_set ? 1 : 0) << "\n";
    }
    for (const auto& g : l.gaps) o << "  gap addresses=" << g.address_begin << ".." << g.address_end << "\n";
    for (auto s : l.suspect) o << "  suspect address=" << s << "\n";
    for (const auto& f : l.flags) o << "  flag " << f << "\n";
  }
  return o.str();
}

}  // namespace vh::pipeline
