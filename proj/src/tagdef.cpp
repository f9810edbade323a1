#include "vh/tagdef.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "vh/error.hpp"
#include "vh/log.hpp"
#include "vh/text.hpp"
#include "vh/wire.hpp"

namespace vh::tagdef {

namespace {

namespace section {
constexpr std::uint16_t tag = 0x10;
constexpr std::uint16_t setup = 0x11;
constexpr std::uint16_t config = 0x12;
constexpr std::uint16_t transition = 0x13;
constexpr std::uint16_t sensor = 0x14;
}  // namespace section

constexpr std::uint8_t no_config = 0xFF;

[[noreturn]] void invalid(const std::string& msg) { throw Error(Errc::validation, msg); }

std::optional<SetupKind> setup_kind_from(std::string_view s) {
  if (s == "atlas-ping") return SetupKind::atlas_ping;
  if (s == "data-shortrange") return SetupKind::data_shortrange;
  if (s == "data-longrange") return SetupKind::data_longrange;
  return std::nullopt;
}

std::uint32_t default_bitrate(SetupKind k) {
  switch (k) {
    case SetupKind::atlas_ping: return 1000000;
    case SetupKind::data_shortrange: return 500000;
    case SetupKind::data_longrange: return 31500;
  }
  return 0;
}

// Element -> source line, so validation can point into the text.
struct SourceMap {
  int tag = 0;
  std::vector<int> setups, configs, transitions, sensors;
  std::vector<std::vector<int>> allocations;
};

[[noreturn]] void report(const SourceMap* map, int line, const std::string& msg) {
  if (map != nullptr && line > 0) text::fail(line, 1, msg);
  invalid(msg);
}

int line_of(const std::vector<int>* v, std::size_t i) {
  return v != nullptr && i < v->size() ? (*v)[i] : 0;
}

void validate_impl(const TagDefinition& def, const SourceMap* map) {
  const int tag_line = map ? map->tag : 0;
  if (def.period_ms == 0) report(map, tag_line, "period_ms must be positive");
  if (def.configurations.empty()) report(map, tag_line, "at least one [config N] is required");

  std::set<std::string> names;
  for (std::size_t i = 0; i < def.setups.size(); ++i) {
    const auto& s = def.setups[i];
    const int ln = line_of(map ? &map->setups : nullptr, i);
    if (s.name.empty()) report(map, ln, "setup needs a name");
    if (!names.insert(s.name).second) report(map, ln, "duplicate setup '" + s.name + "'");
    if (s.bitrate == 0) report(map, ln, "setup '" + s.name + "': bitrate must be positive");
    if (s.kind == SetupKind::atlas_ping && s.ping_bits == 0) {
      report(map, ln, "setup '" + s.name + "': ATLAS setups need ping_bits");
    }
  }

  std::set<std::uint8_t> indices;
  for (std::size_t ci = 0; ci < def.configurations.size(); ++ci) {
    const auto& c = def.configurations[ci];
    const int ln = line_of(map ? &map->configs : nullptr, ci);
    const std::string where = "config " + std::to_string(c.index);
    if (c.index >= max_configurations) report(map, ln, where + ": index must be 0..15");
    if (!indices.insert(c.index).second) report(map, ln, "duplicate " + where);
    if (c.cycle_length == 0 || c.cycle_length > 0xFFFF) report(map, ln, where + ": cycle must be 1..65535");
    for (std::size_t ai = 0; ai < c.allocations.size(); ++ai) {
      const auto& a = c.allocations[ai];
      const int aln = map && ci < map->allocations.size() ? line_of(&map->allocations[ci], ai) : ln;
      if (def.setup(a.setup) == nullptr) report(map, aln, where + ": unknown setup '" + a.setup + "'");
      if (a.every == 0) report(map, aln, where + ": 'every' must be positive");
      if (a.from >= a.every) report(map, aln, where + ": 'from' must be less than 'every'");
      if (c.cycle_length % a.every != 0) {
        report(map, aln, where + ": cycle " + std::to_string(c.cycle_length) +
                             " is not a multiple of every " + std::to_string(a.every));
      }
      for (std::size_t bi = 0; bi < ai; ++bi) {
        const auto& b = c.allocations[bi];
        const std::uint32_t g = std::gcd(a.every, b.every);
        if (a.from % g == b.from % g) {
          report(map, aln, where + ": slot conflict between '" + b.setup + "' and '" + a.setup + "'");
        }
      }
    }
  }
  if (def.config(def.initial_config) == nullptr) {
    report(map, tag_line, "initial config " + std::to_string(def.initial_config) + " does not exist");
  }
  if (def.actuator_config && def.config(*def.actuator_config) == nullptr) {
    report(map, tag_line, "actuator config " + std::to_string(*def.actuator_config) + " does not exist");
  }

  for (std::size_t ti = 0; ti < def.transitions.size(); ++ti) {
    const auto& t = def.transitions[ti];
    const int ln = line_of(map ? &map->transitions : nullptr, ti);
    if (def.config(t.to_config) == nullptr) {
      report(map, ln, "transition to missing config " + std::to_string(t.to_config));
    }
    if (t.from_config && def.config(*t.from_config) == nullptr) {
      report(map, ln, "transition from missing config " + std::to_string(*t.from_config));
    }
    if (t.trigger == TriggerKind::silence && t.value == 0) report(map, ln, "silence timeout must be positive");
    if (t.trigger == TriggerKind::wakeup && t.value > 0xFE) report(map, ln, "wakeup argument must be 0..254");
    // Deterministic: for every source config, at most one wakeup rule per
    // argument and at most one silence rule.
    for (std::size_t ui = 0; ui < ti; ++ui) {
      const auto& u = def.transitions[ui];
      if (u.trigger != t.trigger) continue;
      if (t.trigger == TriggerKind::wakeup && u.value != t.value) continue;
      for (const auto& c : def.configurations) {
        if (t.applies_from(c.index) && u.applies_from(c.index)) {
          report(map, ln, "ambiguous transitions from config " + std::to_string(c.index));
        }
      }
    }
  }

  std::set<SensorKind> kinds;
  for (std::size_t si = 0; si < def.sensors.size(); ++si) {
    const auto& s = def.sensors[si];
    const int ln = line_of(map ? &map->sensors : nullptr, si);
    const std::string where = std::string("sensor ") + to_string(s.kind);
    if (!kinds.insert(s.kind).second) report(map, ln, "duplicate " + where);
    if (s.every_s == 0) report(map, ln, where + ": every must be at least 1 s");
    if (s.config_blob.size() > 200) report(map, ln, where + ": config blob too long");
    if (s.mode == SensorMode::burst) {
      if (s.rate_hz == 0 || s.duration_s == 0) report(map, ln, where + ": burst needs rate_hz and duration_s");
      if (s.rate_hz > 1000) report(map, ln, where + ": rate_hz above 1000");
      if (s.duration_s > s.every_s) report(map, ln, where + ": burst longer than its period");
      const std::uint32_t per_frag = s.samples_per_item();
      const std::uint64_t frags = (std::uint64_t{s.burst_samples()} + per_frag - 1) / per_frag;
      if (frags > 256) report(map, ln, where + ": burst exceeds the 256-fragment budget");
    } else {
      const std::uint32_t max = (log::max_payload - 4) / sample_size(s.kind);
      if (s.per_item > max) {
        report(map, ln, where + ": per_item above " + std::to_string(max));
      }
    }
  }
}

// --- text --------------------------------------------------------------

std::uint32_t to_u32(const text::Entry& e) {
  auto v = text::parse_uint(e.value, e.line, e.value_column);
  if (v > 0xFFFFFFFFu) text::fail(e.line, e.value_column, "value too large");
  return static_cast<std::uint32_t>(v);
}

std::uint8_t config_number(const std::string& s, int line, int col) {
  auto v = text::parse_uint(s, line, col);
  if (v >= max_configurations) text::fail(line, col, "configuration index must be 0..15");
  return static_cast<std::uint8_t>(v);
}

void unknown_key(const text::Section& s, const text::Entry& e) {
  text::fail(e.line, 1, "unknown key '" + e.key + "' in [" + s.kind + "]");
}

// "every E from F, tx|txrx"
SlotAllocation parse_slot(const std::string& setup, const text::Entry& e) {
  SlotAllocation a;
  a.setup = setup;
  auto comma = e.value.find(',');
  if (comma == std::string::npos) text::fail(e.line, e.value_column, "expected 'every E from F, tx|txrx'");
  auto words = text::split_ws(e.value.substr(0, comma));
  auto mode = text::trim(e.value.substr(comma + 1));
  if (words.size() != 4 || words[0] != "every" || words[2] != "from") {
    text::fail(e.line, e.value_column, "expected 'every E from F, tx|txrx'");
  }
  a.every = static_cast<std::uint32_t>(text::parse_uint(words[1], e.line, e.value_column));
  a.from = static_cast<std::uint32_t>(text::parse_uint(words[3], e.line, e.value_column));
  if (a.every > 0xFFFF) text::fail(e.line, e.value_column, "'every' must be at most 65535");
  if (mode == "tx") {
    a.mode = SlotMode::tx_only;
  } else if (mode == "txrx") {
    a.mode = SlotMode::tx_then_rx;
  } else {
    text::fail(e.line, e.value_column + static_cast<int>(comma) + 1, "slot mode must be tx or txrx");
  }
  return a;
}

Transition parse_transition(const text::RawLine& raw) {
  auto w = text::split_ws(raw.text);
  Transition t;
  std::size_t i = 0;
  const auto bad = [&] {
    text::fail(raw.line, 1, "expected '[from N] on wakeup K -> config M' or '[from N] on silence Ss -> config M'");
  };
  if (w.size() >= 2 && w[0] == "from") {
    t.from_config = config_number(w[1], raw.line, 1);
    i = 2;
  }
  if (w.size() != i + 6 || w[i] != "on" || w[i + 3] != "->" || w[i + 4] != "config") bad();
  if (w[i + 1] == "wakeup") {
    t.trigger = TriggerKind::wakeup;
    t.value = static_cast<std::uint32_t>(text::parse_uint(w[i + 2], raw.line, 1));
  } else if (w[i + 1] == "silence") {
    t.trigger = TriggerKind::silence;
    t.value = static_cast<std::uint32_t>(text::parse_whole_seconds(w[i + 2], raw.line, 1));
  } else {
    bad();
  }
  t.to_config = config_number(w[i + 5], raw.line, 1);
  return t;
}

// --- binary --------------------------------------------------------------

void put_section(Bytes& out, std::uint16_t type, const Bytes& payload) {
  if (payload.size() > 255) invalid("config block section too large");
  auto h = wire::encode_header(type, static_cast<std::uint32_t>(payload.size()));
  out.insert(out.end(), h.begin(), h.end());
  out.insert(out.end(), payload.begin(), payload.end());
}

std::string read_rest(ByteReader& r) {
  auto b = r.bytes(r.remaining());
  return std::string(b.begin(), b.end());
}

}  // namespace

const char* to_string(SetupKind k) {
  switch (k) {
    case SetupKind::atlas_ping: return "atlas-ping";
    case SetupKind::data_shortrange: return "data-shortrange";
    case SetupKind::data_longrange: return "data-longrange";
  }
  return "?";
}

const char* to_string(SlotMode m) { return m == SlotMode::tx_only ? "tx" : "txrx"; }

const char* to_string(SensorKind k) {
  return k == SensorKind::pressure_temperature ? "pressure-temperature" : "acceleration";
}

const char* to_string(SensorMode m) { return m == SensorMode::one_shot ? "one-shot" : "burst"; }

std::optional<SensorKind> sensor_kind_from(std::string_view s) {
  if (s == "pressure-temperature") return SensorKind::pressure_temperature;
  if (s == "acceleration") return SensorKind::acceleration;
  return std::nullopt;
}

std::uint32_t sample_size(SensorKind k) { return k == SensorKind::pressure_temperature ? 4 : 6; }

std::uint32_t SensorSchedule::samples_per_item() const {
  // One-shot items: ts32 + samples. Burst fragments: ts32 + index + samples.
  const std::uint32_t overhead = mode == SensorMode::burst ? 5 : 4;
  const std::uint32_t max = static_cast<std::uint32_t>((log::max_payload - overhead) / sample_size(kind));
  return per_item == 0 ? max : std::min(per_item, max);
}

const Configuration* TagDefinition::config(std::uint8_t index) const {
  for (const auto& c : configurations) {
    if (c.index == index) return &c;
  }
  return nullptr;
}

const RadioSetup* TagDefinition::setup(std::string_view name) const {
  for (const auto& s : setups) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::uint8_t TagDefinition::highest_config() const {
  std::uint8_t h = 0;
  for (const auto& c : configurations) h = std::max(h, c.index);
  return h;
}

void validate(const TagDefinition& def) { validate_impl(def, nullptr); }

void canonicalize(TagDefinition& def) {
  std::stable_sort(def.configurations.begin(), def.configurations.end(),
                   [](const Configuration& a, const Configuration& b) { return a.index < b.index; });
}

TagDefinition parse_tagdef(std::string_view source) {
  TagDefinition def;
  SourceMap map;
  bool have_tag = false;
  for (const auto& s : text::parse_sections(source)) {
    if (s.kind == "tag") {
      if (have_tag) text::fail(s.line, 1, "duplicate [tag] section");
      have_tag = true;
      map.tag = s.line;
      for (const auto& e : s.entries) {
        if (e.key == "id") {
          def.tag_id = text::parse_uint(e.value, e.line, e.value_column);
        } else if (e.key == "period_ms") {
          def.period_ms = to_u32(e);
        } else if (e.key == "initial") {
          def.initial_config = config_number(e.value, e.line, e.value_column);
        } else if (e.key == "upload_threshold") {
          def.upload_threshold = to_u32(e);
        } else if (e.key == "actuator") {
          def.actuator_config = config_number(e.value, e.line, e.value_column);
        } else {
          unknown_key(s, e);
        }
      }
    } else if (s.kind == "setup") {
      RadioSetup r;
      r.name = s.name;
      bool have_kind = false;
      std::optional<std::uint32_t> bitrate;
      for (const auto& e : s.entries) {
        if (e.key == "kind") {
          auto k = setup_kind_from(e.value);
          if (!k) text::fail(e.line, e.value_column, "unknown setup kind '" + e.value + "'");
          r.kind = *k;
          have_kind = true;
        } else if (e.key == "bitrate") {
          bitrate = to_u32(e);
        } else if (e.key == "ping_bits") {
          r.ping_bits = to_u32(e);
        } else {
          unknown_key(s, e);
        }
      }
      if (!have_kind) text::fail(s.line, 1, "[setup " + s.name + "] needs a kind");
      r.bitrate = bitrate.value_or(default_bitrate(r.kind));
      if (r.kind == SetupKind::atlas_ping && r.ping_bits == 0) r.ping_bits = 8192;
      def.setups.push_back(r);
      map.setups.push_back(s.line);
    } else if (s.kind == "config") {
      Configuration c;
      c.index = config_number(s.name, s.line, 1);
      std::vector<int> alloc_lines;
      bool have_cycle = false;
      for (const auto& e : s.entries) {
        if (e.key == "cycle") {
          c.cycle_length = to_u32(e);
          have_cycle = true;
        } else if (e.key.rfind("slot ", 0) == 0) {
          c.allocations.push_back(parse_slot(text::trim(e.key.substr(5)), e));
          alloc_lines.push_back(e.line);
        } else {
          unknown_key(s, e);
        }
      }
      if (!have_cycle) text::fail(s.line, 1, "[config " + s.name + "] needs a cycle");
      for (const auto& r : s.raw) text::fail(r.line, 1, "expected 'key = value'");
      def.configurations.push_back(std::move(c));
      map.configs.push_back(s.line);
      map.allocations.push_back(std::move(alloc_lines));
    } else if (s.kind == "transitions") {
      for (const auto& e : s.entries) text::fail(e.line, 1, "expected a transition rule");
      for (const auto& r : s.raw) {
        def.transitions.push_back(parse_transition(r));
        map.transitions.push_back(r.line);
      }
    } else if (s.kind == "sensor") {
      SensorSchedule ss;
      auto k = sensor_kind_from(s.name);
      if (!k) text::fail(s.line, 1, "unknown sensor kind '" + s.name + "'");
      ss.kind = *k;
      for (const auto& e : s.entries) {
        if (e.key == "every") {
          ss.every_s = static_cast<std::uint32_t>(text::parse_whole_seconds(e.value, e.line, e.value_column));
        } else if (e.key == "mode") {
          if (e.value == "one-shot") {
            ss.mode = SensorMode::one_shot;
          } else if (e.value == "burst") {
            ss.mode = SensorMode::burst;
          } else {
            text::fail(e.line, e.value_column, "mode must be one-shot or burst");
          }
        } else if (e.key == "rate_hz") {
          ss.rate_hz = to_u32(e);
        } else if (e.key == "duration_s") {
          ss.duration_s = static_cast<std::uint32_t>(text::parse_whole_seconds(e.value, e.line, e.value_column));
        } else if (e.key == "per_item") {
          ss.per_item = to_u32(e);
        } else if (e.key == "config") {
          try {
            ss.config_blob = from_hex(e.value);
          } catch (const Error&) {
            text::fail(e.line, e.value_column, "config must be hex bytes");
          }
        } else {
          unknown_key(s, e);
        }
      }
      def.sensors.push_back(std::move(ss));
      map.sensors.push_back(s.line);
    } else {
      text::fail(s.line, 1, "unknown section [" + s.kind + "]");
    }
    if (s.kind != "transitions" && s.kind != "config" && !s.raw.empty()) {
      text::fail(s.raw.front().line, 1, "expected 'key = value'");
    }
  }
  if (!have_tag) text::fail(1, 1, "missing [tag] section");
  validate_impl(def, &map);
  canonicalize(def);
  return def;
}

TagDefinition load_tagdef(const std::string& path) {
  auto b = read_file(path);
  return parse_tagdef(std::string_view(reinterpret_cast<const char*>(b.data()), b.size()));
}

std::string format_tagdef(const TagDefinition& def) {
  std::ostringstream o;
  o << "[tag]\n";
  o << "id = 0x" << std::hex << def.tag_id << std::dec << "\n";
  o << "period_ms = " << def.period_ms << "\n";
  o << "initial = " << int{def.initial_config} << "\n";
  o << "upload_threshold = " << def.upload_threshold << "\n";
  if (def.actuator_config) o << "actuator = " << int{*def.actuator_config} << "\n";
  for (const auto& s : def.setups) {
    o << "\n[setup " << s.name << "]\n";
    o << "kind = " << to_string(s.kind) << "\n";
    o << "bitrate = " << s.bitrate << "\n";
    if (s.ping_bits != 0) o << "ping_bits = " << s.ping_bits << "\n";
  }
  for (const auto& c : def.configurations) {
    o << "\n[config " << int{c.index} << "]\n";
    o << "cycle = " << c.cycle_length << "\n";
    for (const auto& a : c.allocations) {
      o << "slot " << a.setup << " = every " << a.every << " from " << a.from << ", " << to_string(a.mode)
        << "\n";
    }
  }
  if (!def.transitions.empty()) {
    o << "\n[transitions]\n";
    for (const auto& t : def.transitions) {
      if (t.from_config) o << "from " << int{*t.from_config} << " ";
      if (t.trigger == TriggerKind::wakeup) {
        o << "on wakeup " << t.value;
      } else {
        o << "on silence " << t.value << "s";
      }
      o << " -> config " << int{t.to_config} << "\n";
    }
  }
  for (const auto& s : def.sensors) {
    o << "\n[sensor " << to_string(s.kind) << "]\n";
    o << "every = " << s.every_s << "s\n";
    o << "mode = " << to_string(s.mode) << "\n";
    if (s.mode == SensorMode::burst) {
      o << "rate_hz = " << s.rate_hz << "\n";
      o << "duration_s = " << s.duration_s << "\n";
    }
    if (s.per_item != 0) o << "per_item = " << s.per_item << "\n";
    if (!s.config_blob.empty()) o << "config = " << to_hex(s.config_blob) << "\n";
  }
  return o.str();
}

// Block layout: version byte, then sections framed with the data-item header
// codec. Section payloads (little-endian):
//   0x10 tag        id u64, period_ms u32, initial u8, threshold u32, actuator u8 (0xFF none)
//   0x11 setup      kind u8, bitrate u32, ping_bits u32, name
//   0x12 config     index u8, cycle u16, then per slot: setup# u8, every u16, from u16, mode u8
//   0x13 transition from u8 (0xFF any), trigger u8, value u32, to u8
//   0x14 sensor     kind u8, every u32, mode u8, rate u16, duration u16, per_item u8, blob
Bytes compile_config_block(const TagDefinition& def) {
  validate(def);
  TagDefinition d = def;
  canonicalize(d);
  Bytes out{config_block_version};
  {
    ByteWriter w;
    w.u64(d.tag_id);
    w.u32(d.period_ms);
    w.u8(d.initial_config);
    w.u32(d.upload_threshold);
    w.u8(d.actuator_config.value_or(no_config));
    put_section(out, section::tag, w.take());
  }
  for (const auto& s : d.setups) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(s.kind));
    w.u32(s.bitrate);
    w.u32(s.ping_bits);
    w.bytes(ByteSpan(reinterpret_cast<const std::uint8_t*>(s.name.data()), s.name.size()));
    put_section(out, section::setup, w.take());
  }
  for (const auto& c : d.configurations) {
    ByteWriter w;
    w.u8(c.index);
    w.u16(static_cast<std::uint16_t>(c.cycle_length));
    for (const auto& a : c.allocations) {
      std::size_t idx = 0;
      while (d.setups[idx].name != a.setup) ++idx;
      w.u8(static_cast<std::uint8_t>(idx));
      w.u16(static_cast<std::uint16_t>(a.every));
      w.u16(static_cast<std::uint16_t>(a.from));
      w.u8(static_cast<std::uint8_t>(a.mode));
    }
    put_section(out, section::config, w.take());
  }
  for (const auto& t : d.transitions) {
    ByteWriter w;
    w.u8(t.from_config.value_or(no_config));
    w.u8(static_cast<std::uint8_t>(t.trigger));
    w.u32(t.value);
    w.u8(t.to_config);
    put_section(out, section::transition, w.take());
  }
  for (const auto& s : d.sensors) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(s.kind));
    w.u32(s.every_s);
    w.u8(static_cast<std::uint8_t>(s.mode));
    w.u16(static_cast<std::uint16_t>(s.rate_hz));
    w.u16(static_cast<std::uint16_t>(s.duration_s));
    w.u8(static_cast<std::uint8_t>(s.per_item));
    w.bytes(s.config_blob);
    put_section(out, section::sensor, w.take());
  }
  return out;
}

TagDefinition decompile_config_block(ByteSpan block) {
  if (block.empty()) throw Error(Errc::malformed, "config block is empty");
  if (block[0] != config_block_version) {
    throw Error(Errc::malformed, "config block version " + std::to_string(block[0]) + " is not supported");
  }
  TagDefinition d;
  bool have_tag = false;
  std::size_t pos = 1;
  while (pos < block.size()) {
    const auto h = wire::decode_header(block.subspan(pos));
    pos += h.consumed;
    if (block.size() - pos < h.length) {
      throw Error(Errc::malformed, "config block truncated at offset " + std::to_string(pos));
    }
    ByteReader r(block.subspan(pos, h.length));
    pos += h.length;
    switch (h.type_code) {
      case section::tag: {
        d.tag_id = r.u64();
        d.period_ms = r.u32();
        d.initial_config = r.u8();
        d.upload_threshold = r.u32();
        auto act = r.u8();
        if (act != no_config) d.actuator_config = act;
        have_tag = true;
        break;
      }
      case section::setup: {
        RadioSetup s;
        auto kind = r.u8();
        if (kind > 2) throw Error(Errc::malformed, "unknown setup kind in config block");
        s.kind = static_cast<SetupKind>(kind);
        s.bitrate = r.u32();
        s.ping_bits = r.u32();
        s.name = read_rest(r);
        d.setups.push_back(std::move(s));
        break;
      }
      case section::config: {
        Configuration c;
        c.index = r.u8();
        c.cycle_length = r.u16();
        while (!r.done()) {
          SlotAllocation a;
          auto idx = r.u8();
          if (idx >= d.setups.size()) throw Error(Errc::malformed, "slot references a missing setup");
          a.setup = d.setups[idx].name;
          a.every = r.u16();
          a.from = r.u16();
          auto mode = r.u8();
          if (mode > 1) throw Error(Errc::malformed, "unknown slot mode in config block");
          a.mode = static_cast<SlotMode>(mode);
          c.allocations.push_back(std::move(a));
        }
        d.configurations.push_back(std::move(c));
        break;
      }
      case section::transition: {
        Transition t;
        auto from = r.u8();
        if (from != no_config) t.from_config = from;
        auto trig = r.u8();
        if (trig > 1) throw Error(Errc::malformed, "unknown trigger in config block");
        t.trigger = static_cast<TriggerKind>(trig);
        t.value = r.u32();
        t.to_config = r.u8();
        d.transitions.push_back(t);
        break;
      }
      case section::sensor: {
        SensorSchedule s;
        auto kind = r.u8();
        if (kind > 1) throw Error(Errc::malformed, "unknown sensor kind in config block");
        s.kind = static_cast<SensorKind>(kind);
        s.every_s = r.u32();
        auto mode = r.u8();
        if (mode > 1) throw Error(Errc::malformed, "unknown sensor mode in config block");
        s.mode = static_cast<SensorMode>(mode);
        s.rate_hz = r.u16();
        s.duration_s = r.u16();
        s.per_item = r.u8();
        auto blob = r.bytes(r.remaining());
        s.config_blob.assign(blob.begin(), blob.end());
        d.sensors.push_back(std::move(s));
        break;
      }
      default:
        throw Error(Errc::malformed, "unknown config block section " + std::to_string(h.type_code));
    }
    if (!r.done()) throw Error(Errc::malformed, "trailing bytes in config block section");
  }
  if (!have_tag) throw Error(Errc::malformed, "config block has no tag section");
  validate(d);
  canonicalize(d);
  return d;
}

SlotAction slot_action(const Configuration& config, std::uint64_t absolute_slot) {
  for (const auto& a : config.allocations) {
    if (absolute_slot % a.every == a.from) return SlotAction{false, a.setup, a.mode};
  }
  return SlotAction{};
}

}  // namespace vh::tagdef
