#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vh/base_station.hpp"
#include "vh/media.hpp"
#include "vh/rng.hpp"
#include "vh/tag_runtime.hpp"
#include "vh/tagdef.hpp"

namespace vh::sim {

struct ChannelParams {
  double range_m = 50.0;
  double loss = 0.0;
};

/// Per radio-setup kind range limit and in-range loss probability. The same
/// draw rules apply to requests and replies.
struct ChannelModel {
  std::map<tagdef::SetupKind, ChannelParams> per_kind = {
      {tagdef::SetupKind::data_shortrange, {50.0, 0.0}},
      {tagdef::SetupKind::data_longrange, {5000.0, 0.0}},
      {tagdef::SetupKind::atlas_ping, {5000.0, 0.0}},
  };

  const ChannelParams& params(tagdef::SetupKind k) const { return per_kind.at(k); }
};

/// False beyond range, otherwise true with probability 1 - loss.
bool deliver(const ChannelParams& channel, double distance_m, Rng& rng);

struct Waypoint {
  std::int64_t t_us = 0;
  double x = 0;
  double y = 0;
};

/// Piecewise-linear path; holds the end positions outside its time span.
std::pair<double, double> position_at(const std::vector<Waypoint>& path, std::int64_t t_us);

struct TagSpec {
  std::uint32_t entity = 0;
  tagdef::TagDefinition definition;
  std::vector<Waypoint> path{Waypoint{}};
  media::MediaGeometry geometry = media::MediaGeometry::nor_8mb();
  tag::TagOptions options;
  std::int64_t boot_at_us = 0;
  std::vector<std::int64_t> reboots_us;
};

struct StationSpec {
  std::uint32_t entity = 0;
  station::StationOptions options;
  double x = 0;
  double y = 0;
  std::int64_t active_from_us = 0;
  std::optional<std::int64_t> active_until_us;
  std::vector<station::Intent> intents;

  bool active(std::int64_t t_us) const {
    return t_us >= active_from_us && (!active_until_us || t_us < *active_until_us);
  }
};

struct Scenario {
  std::uint64_t seed = 1;
  std::int64_t duration_us = 60 * tag::us_per_s;
  std::uint64_t epoch_s = 1700000000;
  ChannelModel channel;
  std::vector<TagSpec> tags;
  std::vector<StationSpec> stations;
};

/// Named-section scenario text. Tag definition paths are resolved against
/// `base_dir`. Throws vh::Error(validation) listing the offending line.
Scenario parse_scenario(const std::string& text, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

/// Seeds derived from the scenario seed for per-entity streams.
std::uint64_t tag_seed(const Scenario& s, std::uint32_t entity);
std::uint64_t sensor_seed(const Scenario& s, std::uint32_t entity);

}  // namespace vh::sim
