#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vh/log.hpp"
#include "vh/media.hpp"
#include "vh/pipeline.hpp"
#include "vh/sensors.hpp"

namespace oracle {

/// Reference recovery: walks every sector and every byte in order instead of
/// searching, and returns the cursor the log must resume from.
vh::log::LogCursor linear_recover(const vh::media::Media& media);

/// Samples physically present in the valid sample items of a log image.
std::size_t samples_in_valid_items(vh::ByteSpan image, vh::tagdef::SensorKind kind);

/// SensorSim values at a simulated time, in the order the pipeline reports them.
std::vector<std::int32_t> truth_values(const vh::sensors::SensorSim& sim, vh::tagdef::SensorKind kind,
                                       std::int64_t sim_us);

std::string data_path(const std::string& name);

}  // namespace oracle
