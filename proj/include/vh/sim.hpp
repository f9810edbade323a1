#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vh/base_station.hpp"
#include "vh/records.hpp"
#include "vh/scenario.hpp"
#include "vh/tag_runtime.hpp"

namespace vh::sim {

struct TagResult {
  std::uint32_t entity = 0;
  std::uint64_t tag_id = 0;
  tag::TagStats stats;
  media::MediaGeometry geometry;
  /// What is on the medium at the end of the run (RAM buffers not flushed).
  Bytes image;
  std::uint8_t final_config = 0;
  bool actuator_on = false;
  std::uint64_t sensor_seed = 0;
};

struct StationResult {
  std::uint32_t entity = 0;
  station::StoreKind store = station::StoreKind::tethered;
  std::vector<records::ReceivedRecord> accepted;
  /// Record file or SD image.
  Bytes store_bytes;
};

struct RunResult {
  /// One event per line: "t=<us> ev=<kind> ..." with a fixed field order.
  std::string trace;
  std::vector<TagResult> tags;
  std::vector<StationResult> stations;
  std::uint64_t events = 0;
  std::uint64_t deliveries = 0;
  std::uint64_t drops = 0;
};

struct RunOptions {
  /// Skip per-slot ping lines and log-item lines (long runs).
  bool compact_trace = false;
};

/// Events run in (time, entity, sequence) order; virtual time is integer
/// microseconds. Fully determined by the scenario.
RunResult run(const Scenario& scenario, const RunOptions& options = {});

}  // namespace vh::sim
