#include "vh/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "vh/error.hpp"
#include "vh/text.hpp"

namespace vh::sim {

namespace {

std::int64_t seconds_us(const text::Entry& e) { return text::parse_whole_seconds(e.value, e.line, e.value_column) * tag::us_per_s; }

std::int64_t seconds_us(const std::string& s, int line, int col) {
  return text::parse_whole_seconds(s, line, col) * tag::us_per_s;
}

bool parse_bool(const text::Entry& e) {
  if (e.value == "yes" || e.value == "true" || e.value == "1") return true;
  if (e.value == "no" || e.value == "false" || e.value == "0") return false;
  text::fail(e.line, e.value_column, "expected yes or no");
}

double probability(const text::Entry& e) {
  double p = text::parse_double(e.value, e.line, e.value_column);
  if (!(p >= 0.0 && p <= 1.0)) text::fail(e.line, e.value_column, "probability must be within [0, 1]");
  return p;
}

std::pair<double, double> parse_xy(const std::string& s, int line, int col) {
  auto w = text::split_ws(s);
  if (w.size() != 2) text::fail(line, col, "expected 'x y' in meters");
  return {text::parse_double(w[0], line, col), text::parse_double(w[1], line, col)};
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t b = 0;
  while (b <= s.size()) {
    auto e = s.find(sep, b);
    if (e == std::string::npos) e = s.size();
    auto t = text::trim(std::string_view(s).substr(b, e - b));
    if (!t.empty()) out.push_back(t);
    b = e + 1;
  }
  return out;
}

// clock [all | tag ID]
// ack [all | tag ID]
// wakeup (all | tag ID) -> (N | highest)
station::Intent parse_intent(const std::string& value, int line, int col) {
  auto w = text::split_ws(value);
  station::Intent in;
  if (w.empty()) text::fail(line, col, "empty intent");
  std::size_t i = 1;
  const auto scope = [&] {
    if (i < w.size() && w[i] == "all") {
      ++i;
    } else if (i + 1 < w.size() && w[i] == "tag") {
      in.tag = text::parse_uint(w[i + 1], line, col);
      i += 2;
    }
  };
  if (w[0] == "clock" || w[0] == "ack") {
    in.kind = w[0] == "clock" ? station::IntentKind::adjust_clock : station::IntentKind::acknowledge;
    scope();
  } else if (w[0] == "wakeup") {
    in.kind = station::IntentKind::wakeup;
    scope();
    if (i + 2 != w.size() || w[i] != "->") text::fail(line, col, "expected 'wakeup (all | tag ID) -> (N | highest)'");
    if (w[i + 1] == "highest") {
      in.target = wire::WakeupItem::highest;
    } else {
      auto t = text::parse_uint(w[i + 1], line, col);
      if (t >= tagdef::max_configurations) text::fail(line, col, "wakeup target must be 0..15 or highest");
      in.target = static_cast<std::uint8_t>(t);
    }
  } else {
    text::fail(line, col, "unknown intent '" + w[0] + "'");
  }
  if (i != w.size() && in.kind != station::IntentKind::wakeup) text::fail(line, col, "unexpected text after intent");
  return in;
}

std::uint32_t entity_of(const text::Section& s) {
  auto v = text::parse_uint(s.name, s.line, 1);
  if (v == 0 || v > 0xFFFFFFFFu) text::fail(s.line, 1, "entity numbers must be 1..2^32-1");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

bool deliver(const ChannelParams& channel, double distance_m, Rng& rng) {
  if (distance_m > channel.range_m) return false;
  if (channel.loss <= 0.0) return true;
  return !rng.chance(channel.loss);
}

std::pair<double, double> position_at(const std::vector<Waypoint>& path, std::int64_t t) {
  if (path.empty()) return {0, 0};
  if (t <= path.front().t_us) return {path.front().x, path.front().y};
  for (std::size_t i = 1; i < path.size(); ++i) {
    const auto& a = path[i - 1];
    const auto& b = path[i];
    if (t <= b.t_us) {
      const double f = static_cast<double>(t - a.t_us) / static_cast<double>(b.t_us - a.t_us);
      return {a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f};
    }
  }
  return {path.back().x, path.back().y};
}

std::uint64_t tag_seed(const Scenario& s, std::uint32_t entity) { return mix_seed(s.seed, 0x100000000ULL + entity); }
std::uint64_t sensor_seed(const Scenario& s, std::uint32_t entity) {
  return mix_seed(s.seed, 0x200000000ULL + entity);
}

Scenario parse_scenario(const std::string& source, const std::string& base_dir) {
  Scenario sc;
  auto sections = text::parse_sections(source);
  std::vector<int> tag_lines;
  for (const auto& s : sections) {
    if (s.kind == "scenario") {
      for (const auto& e : s.entries) {
        if (e.key == "seed") {
          sc.seed = text::parse_uint(e.value, e.line, e.value_column);
        } else if (e.key == "duration") {
          sc.duration_us = seconds_us(e);
          if (sc.duration_us <= 0) text::fail(e.line, e.value_column, "duration must be positive");
        } else if (e.key == "epoch") {
          sc.epoch_s = text::parse_uint(e.value, e.line, e.value_column);
        } else {
          text::fail(e.line, 1, "unknown key '" + e.key + "' in [scenario]");
        }
      }
    } else if (s.kind == "channel") {
      tagdef::SetupKind kind;
      if (s.name == "data-shortrange") {
        kind = tagdef::SetupKind::data_shortrange;
      } else if (s.name == "data-longrange") {
        kind = tagdef::SetupKind::data_longrange;
      } else if (s.name == "atlas-ping") {
        kind = tagdef::SetupKind::atlas_ping;
      } else {
        text::fail(s.line, 1, "unknown channel kind '" + s.name + "'");
      }
      auto& p = sc.channel.per_kind[kind];
      for (const auto& e : s.entries) {
        if (e.key == "range_m") {
          p.range_m = text::parse_double(e.value, e.line, e.value_column);
          if (!(p.range_m >= 0)) text::fail(e.line, e.value_column, "range must be non-negative");
        } else if (e.key == "loss") {
          p.loss = probability(e);
        } else {
          text::fail(e.line, 1, "unknown key '" + e.key + "' in [channel]");
        }
      }
    }
  }
  for (const auto& s : sections) {
    if (s.kind == "tag") {
      TagSpec t;
      t.entity = entity_of(s);
      t.options.epoch_s = sc.epoch_s;
      t.options.seed = tag_seed(sc, t.entity);
      t.options.sensor_seed = sensor_seed(sc, t.entity);
      std::optional<std::uint64_t> id;
      bool have_def = false;
      std::optional<std::pair<double, double>> pos;
      for (const auto& e : s.entries) {
        if (e.key == "definition") {
          auto p = std::filesystem::path(e.value);
          if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
          try {
            t.definition = tagdef::load_tagdef(p.string());
          } catch (const Error& err) {
            text::fail(e.line, e.value_column, p.string() + ": " + err.what());
          }
          have_def = true;
        } else if (e.key == "id") {
          id = text::parse_uint(e.value, e.line, e.value_column);
        } else if (e.key == "position") {
          pos = parse_xy(e.value, e.line, e.value_column);
        } else if (e.key == "waypoints") {
          t.path.clear();
          for (const auto& wp : split_list(e.value, ',')) {
            auto w = text::split_ws(wp);
            if (w.size() != 3) text::fail(e.line, e.value_column, "waypoint must be 'Ts x y'");
            Waypoint p{seconds_us(w[0], e.line, e.value_column), text::parse_double(w[1], e.line, e.value_column),
                       text::parse_double(w[2], e.line, e.value_column)};
            if (!t.path.empty() && p.t_us <= t.path.back().t_us) {
              text::fail(e.line, e.value_column, "waypoint times must increase");
            }
            t.path.push_back(p);
          }
        } else if (e.key == "media") {
          if (e.value == "nor") {
            t.geometry = media::MediaGeometry::nor_8mb();
          } else if (e.value == "sd") {
            t.geometry = media::MediaGeometry::sd();
          } else {
            text::fail(e.line, e.value_column, "media must be nor or sd");
          }
        } else if (e.key == "sectors") {
          auto n = text::parse_uint(e.value, e.line, e.value_column);
          if (n < 2 || n > 65535) text::fail(e.line, e.value_column, "sectors must be 2..65535");
          t.geometry.sector_count = static_cast<std::uint32_t>(n);
        } else if (e.key == "clock_error_s") {
          t.options.initial_clock_error_s = text::parse_int(e.value, e.line, e.value_column);
        } else if (e.key == "boot_at") {
          t.boot_at_us = seconds_us(e);
        } else if (e.key == "reboot_at") {
          for (const auto& v : split_list(e.value, ',')) t.reboots_us.push_back(seconds_us(v, e.line, e.value_column));
          std::sort(t.reboots_us.begin(), t.reboots_us.end());
        } else if (e.key == "stall_probability") {
          t.options.stall.probability = probability(e);
        } else if (e.key == "stall_tau_s") {
          t.options.stall.tau_s = text::parse_double(e.value, e.line, e.value_column);
          if (!(t.options.stall.tau_s > 0)) text::fail(e.line, e.value_column, "stall_tau_s must be positive");
        } else if (e.key == "pattern_count") {
          t.options.pattern.count = static_cast<std::uint32_t>(text::parse_uint(e.value, e.line, e.value_column));
        } else if (e.key == "pattern_bytes") {
          auto n = text::parse_uint(e.value, e.line, e.value_column);
          if (n < 4 || n > log::max_payload) text::fail(e.line, e.value_column, "pattern_bytes must be 4..224");
          t.options.pattern.bytes = static_cast<std::uint32_t>(n);
        } else if (e.key == "pattern_every") {
          t.options.pattern.every_s = static_cast<std::uint32_t>(text::parse_whole_seconds(e.value, e.line, e.value_column));
        } else if (e.key == "sensor_seed") {
          t.options.sensor_seed = text::parse_uint(e.value, e.line, e.value_column);
        } else {
          text::fail(e.line, 1, "unknown key '" + e.key + "' in [tag]");
        }
      }
      if (!have_def) text::fail(s.line, 1, "[tag " + s.name + "] needs a definition");
      if (id) t.definition.tag_id = *id;
      if (pos) t.path = {Waypoint{0, pos->first, pos->second}};
      for (const auto& r : s.raw) text::fail(r.line, 1, "expected 'key = value'");
      sc.tags.push_back(std::move(t));
      tag_lines.push_back(s.line);
    } else if (s.kind == "station") {
      StationSpec st;
      st.entity = entity_of(s);
      st.options.id = st.entity;
      st.options.epoch_s = sc.epoch_s;
      bool default_intents = true;
      for (const auto& e : s.entries) {
        if (e.key == "position") {
          std::tie(st.x, st.y) = parse_xy(e.value, e.line, e.value_column);
        } else if (e.key == "clock") {
          if (e.value != "valid" && e.value != "invalid") text::fail(e.line, e.value_column, "clock must be valid or invalid");
          st.options.valid_clock = e.value == "valid";
        } else if (e.key == "logging") {
          st.options.logging = parse_bool(e);
        } else if (e.key == "store") {
          if (e.value == "tethered") {
            st.options.store = station::StoreKind::tethered;
          } else if (e.value == "sd") {
            st.options.store = station::StoreKind::sd;
          } else {
            text::fail(e.line, e.value_column, "store must be tethered or sd");
          }
        } else if (e.key == "sd_sectors") {
          auto n = text::parse_uint(e.value, e.line, e.value_column);
          if (n < 2 || n > 4096) text::fail(e.line, e.value_column, "sd_sectors must be 2..4096");
          st.options.sd_sectors = static_cast<std::uint32_t>(n);
        } else if (e.key == "max_records") {
          st.options.max_records = text::parse_uint(e.value, e.line, e.value_column);
        } else if (e.key == "active") {
          auto w = text::split_ws(e.value);
          if (w.empty() || w.size() > 2) text::fail(e.line, e.value_column, "expected 'FROMs [UNTILs]'");
          st.active_from_us = seconds_us(w[0], e.line, e.value_column);
          if (w.size() == 2) st.active_until_us = seconds_us(w[1], e.line, e.value_column);
        } else if (e.key == "default_intents") {
          default_intents = parse_bool(e);
        } else if (e.key == "intent") {
          st.intents.push_back(parse_intent(e.value, e.line, e.value_column));
        } else {
          text::fail(e.line, 1, "unknown key '" + e.key + "' in [station]");
        }
      }
      // Lines with "->" arrive as raw text.
      for (const auto& r : s.raw) {
        auto eq = r.text.find('=');
        if (eq == std::string::npos || text::trim(std::string_view(r.text).substr(0, eq)) != "intent") {
          text::fail(r.line, 1, "expected 'key = value'");
        }
        st.intents.push_back(parse_intent(text::trim(std::string_view(r.text).substr(eq + 1)), r.line, 1));
      }
      if (default_intents) {
        st.intents.insert(st.intents.begin(), {station::Intent{station::IntentKind::adjust_clock, std::nullopt, 0},
                                               station::Intent{station::IntentKind::acknowledge, std::nullopt, 0}});
      }
      sc.stations.push_back(std::move(st));
    } else if (s.kind != "scenario" && s.kind != "channel") {
      text::fail(s.line, 1, "unknown section [" + s.kind + "]");
    }
  }
  for (std::size_t i = 0; i < sc.tags.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (sc.tags[i].entity == sc.tags[j].entity) text::fail(tag_lines[i], 1, "duplicate tag entity");
      if (sc.tags[i].definition.tag_id == sc.tags[j].definition.tag_id) {
        text::fail(tag_lines[i], 1, "two tags share tag id " + std::to_string(sc.tags[i].definition.tag_id));
      }
    }
  }
  for (std::size_t i = 0; i < sc.stations.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (sc.stations[i].entity == sc.stations[j].entity) throw Error(Errc::validation, "duplicate station entity");
    }
  }
  if (sc.tags.empty()) throw Error(Errc::validation, "scenario has no tags");
  return sc;
}

Scenario load_scenario(const std::string& path) {
  auto b = read_file(path);
  auto dir = std::filesystem::path(path).parent_path().string();
  return parse_scenario(std::string(b.begin(), b.end()), dir.empty() ? "." : dir);
}

}  // namespace vh::sim
