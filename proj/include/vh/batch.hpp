#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vh/log.hpp"
#include "vh/media.hpp"
#include "vh/sim.hpp"

namespace vh::batch {

/// Runs independent scenarios. jobs <= 1 runs serially on the calling thread;
/// otherwise an OpenMP loop with one scenario per iteration. Results are in
/// input order and identical for any job count.
std::vector<sim::RunResult> run_scenarios(const std::vector<sim::Scenario>& scenarios, int jobs,
                                          const sim::RunOptions& options = {});

struct Appended {
  std::uint32_t address = 0;
  std::uint8_t type = 0;
  Bytes payload;

  std::uint32_t end() const {
    return address + static_cast<std::uint32_t>(log::item_header_size + payload.size());
  }
};

/// A log written by a random workload, possibly interrupted by power loss.
/// Earlier boots may have crashed too; `appended` covers the final boot only,
/// `history` every boot.
struct FuzzCase {
  std::uint64_t seed = 0;
  media::Media media{media::MediaGeometry{256, 4096, 4}};
  std::vector<Appended> history;
  std::vector<Appended> appended;
  std::optional<media::FaultRecord> fault;
  /// Index into `appended` of the append or flush during which power failed.
  std::optional<std::size_t> final_item;
  std::uint32_t boots = 0;
};

struct FuzzParams {
  /// Upper bound on the number of append operations per boot.
  std::uint32_t max_ops = 160;
  /// Boots that crash before the final one.
  std::uint32_t max_prior_crashes = 2;
  /// Probability that the final boot is cut by a power failure.
  double fault_probability = 1.0;
};

FuzzCase make_fuzz_case(std::uint64_t seed, const FuzzParams& params = {});

struct IntegrityOutcome {
  bool faulted = false;
  /// Valid items whose bytes differ from what was appended at that address,
  /// or valid items at addresses never appended.
  std::uint32_t corrupt = 0;
  std::uint32_t lost = 0;
  /// Lost items other than the final item that do not reach into the page
  /// being written when power failed.
  std::uint32_t lost_out_of_bound = 0;

  bool operator==(const IntegrityOutcome&) const = default;
};

/// Power-cycles a copy of the case's medium, reopens the log and compares
/// every valid item with the append history.
IntegrityOutcome check_integrity(const FuzzCase& c);

struct IntegritySummary {
  std::uint64_t cases = 0;
  std::uint64_t faulted = 0;
  std::uint64_t corrupt = 0;
  std::uint64_t lost = 0;
  std::uint64_t lost_out_of_bound = 0;
  /// Seeds of the cases with corrupt or out-of-bound losses.
  std::vector<std::uint64_t> failing_seeds;

  bool operator==(const IntegritySummary&) const = default;
};

/// Cases seeded mix_seed(seed, i) for i in [0, count).
IntegritySummary integrity_campaign(std::uint64_t seed, std::uint64_t count, int jobs,
                                    const FuzzParams& params = {});

}  // namespace vh::batch
