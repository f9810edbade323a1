#include "vh/batch.hpp"

#include <map>

#include "vh/error.hpp"
#include "vh/rng.hpp"

namespace vh::batch {

std::vector<sim::RunResult> run_scenarios(const std::vector<sim::Scenario>& scenarios, int jobs,
                                          const sim::RunOptions& options) {
  std::vector<sim::RunResult> out(scenarios.size());
  const auto n = static_cast<std::int64_t>(scenarios.size());
  if (jobs <= 1) {
    for (std::int64_t i = 0; i < n; ++i) out[i] = sim::run(scenarios[i], options);
    return out;
  }
  std::vector<std::exception_ptr> errors(scenarios.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      out[i] = sim::run(scenarios[i], options);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

namespace {

struct Shape {
  media::MediaGeometry geometry;
  std::uint32_t logical_sector;
};

constexpr Shape shapes[] = {
    {{256, 4096, 8}, 4096},
    {{256, 4096, 8}, 1024},
    {{512, 8192, 4}, 8192},
    {{512, 8192, 4}, 2048},
};

std::uint8_t random_type(Rng& rng) {
  static constexpr std::uint8_t common[] = {
      log::item_type::sensor_config, log::item_type::clock_set,
      log::item_type::pressure_temperature, log::item_type::acceleration_burst,
      log::item_type::test_pattern};
  if (rng.chance(0.7)) return common[rng.below(std::size(common))];
  // Anything but the reserved, structural and boot marker types.
  return static_cast<std::uint8_t>(0x04 + rng.below(0xFE - 0x04));
}

std::size_t random_length(Rng& rng) {
  switch (rng.below(4)) {
    case 0: return rng.below(8);
    case 1: return rng.below(log::max_payload + 1);
    case 2: return log::max_payload - rng.below(4);
    default: return 16 + rng.below(64);
  }
}

// Runs one boot's workload until it ends or power fails. Returns true if the
// medium failed during this boot.
bool run_boot(log::Log& lg, media::Media& m, Rng& rng, const FuzzParams& params,
              std::vector<Appended>& appended, std::optional<std::size_t>& final_item) {
  const auto ops = 1 + rng.below(params.max_ops);
  for (std::uint64_t op = 0; op < ops; ++op) {
    const auto roll = rng.below(100);
    try {
      if (roll < 85) {
        Appended a;
        a.type = random_type(rng);
        a.payload.resize(random_length(rng));
        for (auto& b : a.payload) b = static_cast<std::uint8_t>(rng.next());
        a.address = lg.cursor().write_addr;
        const auto addr = lg.append(a.type, a.payload);
        a.address = addr;
        appended.push_back(std::move(a));
      } else if (roll < 95) {
        lg.flush();
      } else if (!appended.empty()) {
        const auto& pick = appended[rng.below(appended.size())];
        if (pick.end() <= lg.cursor().write_addr && pick.end() >= lg.cursor().ack_cursor) {
          lg.set_ack_cursor(pick.end());
        }
      }
    } catch (const Error& e) {
      if (e.code() == Errc::log_full) return m.failed();
      if (e.code() != Errc::device_failed) throw;
    }
    if (m.failed()) {
      final_item = appended.size() - 1;
      return true;
    }
  }
  final_item = appended.size() - 1;
  return false;
}

}  // namespace

FuzzCase make_fuzz_case(std::uint64_t seed, const FuzzParams& params) {
  Rng rng(seed);
  const auto& shape = shapes[rng.below(std::size(shapes))];
  FuzzCase c;
  c.seed = seed;
  c.media = media::Media(shape.geometry);
  log::Log::format(c.media, rng.next(), rng.below(1u << 31), 1, shape.logical_sector);

  const auto prior = rng.below(params.max_prior_crashes + 1);
  for (std::uint64_t boot = 0; boot <= prior; ++boot) {
    const bool final_boot = boot == prior;
    if (!final_boot || rng.chance(params.fault_probability)) {
      c.media.set_fault_plan(media::FaultPlan{c.media.write_count() + 1 + rng.below(64), rng.next()});
    }
    std::vector<Appended> appended;
    std::optional<std::size_t> final_item;
    bool failed = false;
    try {
      auto lg = log::Log::open(c.media);
      const auto boot_addr = lg.log_boot(static_cast<std::uint16_t>(c.boots));
      appended.push_back({boot_addr, log::item_type::boot_marker,
                          log::BootMarker{static_cast<std::uint16_t>(c.boots), 0}.encode_payload()});
      if (c.media.failed()) {
        final_item = 0;
        failed = true;
      } else {
        failed = run_boot(lg, c.media, rng, params, appended, final_item);
      }
    } catch (const Error& e) {
      if (e.code() != Errc::device_failed && e.code() != Errc::log_full) throw;
      failed = c.media.failed();
    }
    ++c.boots;
    c.history.insert(c.history.end(), appended.begin(), appended.end());
    if (final_boot) {
      c.appended = std::move(appended);
      c.final_item = final_item;
      if (failed) c.fault = c.media.last_fault();
    }
    // Power goes away either way; RAM contents are lost.
    c.media.power_cycle();
  }
  return c;
}

IntegrityOutcome check_integrity(const FuzzCase& c) {
  IntegrityOutcome out;
  out.faulted = c.fault.has_value();
  media::Media m = c.media;
  m.power_cycle();
  log::Log::open(m);
  const auto it = log::iterate_items(m);

  std::map<std::uint32_t, const Appended*> by_address;
  for (const auto& a : c.history) by_address[a.address] = &a;

  std::map<std::uint32_t, const log::LogItem*> valid;
  std::map<std::uint32_t, const log::LogItem*> suspect;
  for (const auto& item : it.items) {
    if (log::is_structural(item.type)) continue;
    if (item.validity != log::Validity::valid) {
      suspect[item.address] = &item;
      continue;
    }
    valid[item.address] = &item;
    auto found = by_address.find(item.address);
    if (found == by_address.end() || found->second->type != item.type ||
        found->second->payload != item.payload) {
      ++out.corrupt;
    }
  }

  // Loss bound: apart from the final item and the item the partial-write rule
  // marks suspect, every lost item overlaps one page, the last page that held
  // buffered data.
  const auto page_size = c.media.geometry().page_size;
  std::vector<const Appended*> lost;
  bool suspect_excused = false;
  for (std::size_t i = 0; i < c.appended.size(); ++i) {
    const auto& a = c.appended[i];
    auto found = valid.find(a.address);
    if (found != valid.end() && found->second->type == a.type && found->second->payload == a.payload) {
      continue;
    }
    ++out.lost;
    if (c.final_item && *c.final_item == i) continue;
    if (auto sus = suspect.find(a.address);
        !suspect_excused && sus != suspect.end() && sus->second->payload == a.payload) {
      suspect_excused = true;
      continue;
    }
    lost.push_back(&a);
  }
  if (!lost.empty()) {
    const auto last_page = lost.back()->address - lost.back()->address % page_size;
    for (const auto* a : lost) {
      if (a->end() <= last_page) ++out.lost_out_of_bound;
    }
  }
  return out;
}

IntegritySummary integrity_campaign(std::uint64_t seed, std::uint64_t count, int jobs,
                                    const FuzzParams& params) {
  std::vector<IntegrityOutcome> outcomes(count);
  const auto n = static_cast<std::int64_t>(count);
  if (jobs <= 1) {
    for (std::int64_t i = 0; i < n; ++i) {
      outcomes[i] = check_integrity(make_fuzz_case(mix_seed(seed, i), params));
    }
  } else {
#pragma omp parallel for schedule(dynamic, 16) num_threads(jobs)
    for (std::int64_t i = 0; i < n; ++i) {
      outcomes[i] = check_integrity(make_fuzz_case(mix_seed(seed, i), params));
    }
  }
  IntegritySummary s;
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& o = outcomes[i];
    ++s.cases;
    s.faulted += o.faulted;
    s.corrupt += o.corrupt;
    s.lost += o.lost;
    s.lost_out_of_bound += o.lost_out_of_bound;
    if (o.corrupt || o.lost_out_of_bound) s.failing_seeds.push_back(mix_seed(seed, i));
  }
  return s;
}

}  // namespace vh::batch
