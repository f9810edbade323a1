// vh: compile tag definitions, run scenarios, decode logs and process uploads.
// Exit codes: 0 success, 1 validation, 2 I/O, 3 format or corruption.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "vh/batch.hpp"
#include "vh/error.hpp"
#include "vh/lifespan.hpp"
#include "vh/log.hpp"
#include "vh/pipeline.hpp"
#include "vh/records.hpp"
#include "vh/scenario.hpp"
#include "vh/sim.hpp"
#include "vh/tagdef.hpp"

namespace fs = std::filesystem;
using namespace vh;

namespace {

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(Errc::io, "cannot write " + path);
}

std::uint64_t parse_id(const std::string& s) {
  try {
    std::size_t used = 0;
    auto v = std::stoull(s, &used, 0);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::validation, "not a number: '" + s + "'");
  }
}

int cmd_compile(const std::string& in, const std::string& out) {
  auto def = tagdef::load_tagdef(in);
  write_file(out, compile_config_block(def));
  return 0;
}

int cmd_decompile(const std::string& in, const std::string& out) {
  write_text(out, tagdef::format_tagdef(tagdef::decompile_config_block(read_file(in))));
  return 0;
}

struct SimulateArgs {
  std::vector<std::string> scenarios;
  std::string out_dir;
  std::string trace;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool compact = false;
};

int cmd_simulate(const SimulateArgs& a) {
  std::vector<sim::Scenario> scs;
  for (const auto& p : a.scenarios) {
    auto sc = sim::load_scenario(p);
    if (a.seed) {
      // Re-derive per-entity seeds from the override.
      sc.seed = *a.seed;
      for (auto& t : sc.tags) {
        t.options.seed = sim::tag_seed(sc, t.entity);
        t.options.sensor_seed = sim::sensor_seed(sc, t.entity);
      }
    }
    scs.push_back(std::move(sc));
  }
  sim::RunOptions opts;
  opts.compact_trace = a.compact;
  auto results = batch::run_scenarios(scs, a.jobs, opts);

  if (a.out_dir.empty()) {
    for (const auto& r : results) write_text(a.trace, r.trace);
    return 0;
  }
  fs::create_directories(a.out_dir);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const auto stem = (fs::path(a.out_dir) / fs::path(a.scenarios[i]).stem()).string();
    write_text(stem + ".trace", r.trace);
    for (const auto& t : r.tags) write_file(stem + ".tag" + std::to_string(t.entity) + ".img", t.image);
    for (const auto& s : r.stations) {
      const char* ext = s.store == station::StoreKind::sd ? ".img" : ".vhrx";
      write_file(stem + ".station" + std::to_string(s.entity) + ext, s.store_bytes);
    }
    std::cerr << a.scenarios[i] << ": " << r.events << " events, " << r.deliveries << " deliveries, "
              << r.drops << " drops\n";
  }
  return 0;
}

int cmd_decode_log(const std::string& in, const std::string& out) {
  const auto image = read_file(in);
  const auto it = log::iterate_image(image);
  std::ostringstream o;
  if (!it.header) throw Error(Errc::corrupt_log, in + ": " + it.truncation_reason);
  const auto& h = *it.header;
  o << "log tag=0x" << std::hex << h.tag_id << std::dec << " creation=" << h.creation_time
    << " page=" << h.page_size() << " sector=" << h.sector_size() << " registry=" << int{h.registry_id}
    << "\n";
  for (const auto& item : it.items) {
    o << std::setw(8) << item.address << "  " << std::left << std::setw(22) << log::type_name(item.type)
      << std::right << " len=" << std::setw(3) << item.payload.size() << "  " << log::to_string(item.validity)
      << "  " << to_hex(item.payload) << "\n";
  }
  for (const auto& r : it.skipped) o << "skipped " << r.begin << ".." << r.end << "\n";
  if (it.truncated) o << "truncated: " << it.truncation_reason << "\n";
  write_text(out, o.str());
  return 0;
}

int cmd_ingest(const std::string& store_path, const std::vector<std::string>& inputs) {
  pipeline::ItemStore store;
  if (fs::exists(store_path)) store = pipeline::ItemStore::load(store_path);
  int rc = 0;
  for (const auto& in : inputs) {
    auto rep = store.ingest(pipeline::load_records(in));
    std::cout << in << ": inserted " << rep.inserted << ", duplicates " << rep.duplicates << ", conflicts "
              << rep.conflicts << "\n";
    for (const auto& k : rep.conflict_keys) {
      std::cout << "  conflict tag=0x" << std::hex << k.tag_id << std::dec << " creation=" << k.creation_time
                << " address=" << k.address << "\n";
    }
    if (rep.conflicts) rc = exit_code_for(Errc::corrupt_log);
  }
  store.save(store_path);
  return rc;
}

std::uint64_t pick_log(const pipeline::ItemStore& store, std::uint64_t tag, std::optional<std::uint64_t> creation) {
  if (creation) return *creation;
  auto logs = store.logs_of(tag);
  if (logs.empty()) throw Error(Errc::validation, "no items for that tag in the store");
  if (logs.size() > 1) throw Error(Errc::validation, "tag has several logs; pass --creation");
  return logs.front();
}

int cmd_extract(const std::string& store_path, const std::string& tag, std::optional<std::uint64_t> creation,
                const std::string& sensor, const std::string& tagdef_path, const std::string& out) {
  auto store = pipeline::ItemStore::load(store_path);
  const auto kind = tagdef::sensor_kind_from(sensor);
  if (!kind) throw Error(Errc::validation, "unknown sensor '" + sensor + "'");
  std::optional<tagdef::TagDefinition> def;
  if (!tagdef_path.empty()) def = tagdef::load_tagdef(tagdef_path);
  const auto id = parse_id(tag);
  auto series = pipeline::extract_series(store, id, pick_log(store, id, creation), *kind, def ? &*def : nullptr);
  write_text(out, pipeline::export_series(series));
  return 0;
}

int cmd_report(const std::string& store_path, const std::string& tag, const std::string& out) {
  auto store = pipeline::ItemStore::load(store_path);
  write_text(out, pipeline::format_report(pipeline::session_report(store, parse_id(tag))));
  return 0;
}

int cmd_export(const std::string& in, const std::string& out) {
  write_text(out, records::export_text(pipeline::load_records(in)));
  return 0;
}

int cmd_lifespan(const std::string& def_path, const std::string& battery, std::optional<double> capacity,
                 std::optional<int> config) {
  auto def = tagdef::load_tagdef(def_path);
  lifespan::Battery b;
  if (capacity) {
    if (!(*capacity >= 0)) throw Error(Errc::validation, "capacity must be non-negative");
    b = {"custom", *capacity, 1.0};
  } else {
    auto found = lifespan::find_battery(battery);
    if (!found) throw Error(Errc::validation, "unknown battery '" + battery + "'");
    b = *found;
  }
  std::optional<std::uint8_t> cfg;
  if (config) cfg = static_cast<std::uint8_t>(*config);
  const auto cur = lifespan::average_current(def, {}, cfg);
  const double days = lifespan::days_for(b.capacity_mAh * b.usable_fraction, cur.total_uA());
  std::cout << std::fixed << std::setprecision(2) << "battery " << b.name << " " << b.capacity_mAh << " mAh\n"
            << "current " << cur.total_uA() << " uA (sleep " << cur.sleep_uA << ", leakage " << cur.leakage_uA
            << ", radio " << cur.radio_uA << ", sensing " << cur.sensing_uA << ")\n"
            << "days " << days << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tag definition, simulation and log processing tool"};
  app.require_subcommand(1);

  std::string in, out;
  auto* compile = app.add_subcommand("compile", "Compile a tag definition into a configuration block");
  compile->add_option("tagdef", in, "Tag definition file")->required();
  compile->add_option("-o,--out", out, "Output block file")->required();

  std::string dec_in, dec_out = "-";
  auto* decompile = app.add_subcommand("decompile", "Print a configuration block as a tag definition");
  decompile->add_option("block", dec_in, "Configuration block file")->required();
  decompile->add_option("-o,--out", dec_out, "Output file (default stdout)");

  SimulateArgs sim_args;
  std::uint64_t seed = 0;
  auto* simulate = app.add_subcommand("simulate", "Run scenarios");
  simulate->add_option("scenarios", sim_args.scenarios, "Scenario files")->required();
  simulate->add_option("-o,--out", sim_args.out_dir, "Directory for traces, tag images and station stores");
  simulate->add_option("--trace", sim_args.trace, "Trace file when no output directory is given");
  auto* seed_opt = simulate->add_option("--seed", seed, "Override the scenario seed");
  simulate->add_option("-j,--jobs", sim_args.jobs, "Scenarios run in parallel")->check(CLI::PositiveNumber);
  simulate->add_flag("--compact", sim_args.compact, "Omit ping and log-item trace lines");

  std::string log_in, log_out = "-";
  auto* decode = app.add_subcommand("decode-log", "List the items of a log image");
  decode->add_option("image", log_in, "Tag or station log image")->required();
  decode->add_option("-o,--out", log_out, "Output file (default stdout)");

  std::string store_path;
  std::vector<std::string> inputs;
  auto* ingest = app.add_subcommand("ingest", "Add records to an item store");
  ingest->add_option("--store", store_path, "Store file (created if missing)")->required();
  ingest->add_option("inputs", inputs, "Record files, station SD images or tag images")->required();

  std::string tag, sensor, fallback, ex_out = "-";
  std::uint64_t creation = 0;
  auto* extract = app.add_subcommand("extract", "Reconstruct a sensor series");
  extract->add_option("--store", store_path, "Store file")->required();
  extract->add_option("--tag", tag, "Tag id")->required();
  auto* creation_opt = extract->add_option("--creation", creation, "Log creation time");
  extract->add_option("--sensor", sensor, "pressure-temperature or acceleration")->required();
  extract->add_option("--tagdef", fallback, "Definition used when sensor configuration items are missing");
  extract->add_option("-o,--out", ex_out, "Output file (default stdout)");

  std::string rep_out = "-";
  auto* report = app.add_subcommand("report", "Summarize the logs of a tag");
  report->add_option("--store", store_path, "Store file")->required();
  report->add_option("--tag", tag, "Tag id")->required();
  report->add_option("-o,--out", rep_out, "Output file (default stdout)");

  std::string exp_in, exp_out = "-";
  auto* exp = app.add_subcommand("export", "Print records one per line");
  exp->add_option("input", exp_in, "Record file, store, SD image or tag image")->required();
  exp->add_option("-o,--out", exp_out, "Output file (default stdout)");

  std::string def_path, battery;
  double capacity = 0;
  int config = 0;
  auto* life = app.add_subcommand("lifespan", "Estimate battery lifespan");
  life->add_option("tagdef", def_path, "Tag definition")->required();
  auto* bat_opt = life->add_option("--battery", battery, "Battery name");
  auto* cap_opt = life->add_option("--capacity", capacity, "Capacity in mAh");
  auto* cfg_opt = life->add_option("--config", config, "Configuration (default: initial)");
  bat_opt->excludes(cap_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*compile) return cmd_compile(in, out);
    if (*decompile) return cmd_decompile(dec_in, dec_out);
    if (*simulate) {
      if (*seed_opt) sim_args.seed = seed;
      return cmd_simulate(sim_args);
    }
    if (*decode) return cmd_decode_log(log_in, log_out);
    if (*ingest) return cmd_ingest(store_path, inputs);
    if (*extract) {
      std::optional<std::uint64_t> c;
      if (*creation_opt) c = creation;
      return cmd_extract(store_path, tag, c, sensor, fallback, ex_out);
    }
    if (*report) return cmd_report(store_path, tag, rep_out);
    if (*exp) return cmd_export(exp_in, exp_out);
    if (*life) {
      if (!*bat_opt && !*cap_opt) throw Error(Errc::validation, "give --battery or --capacity");
      std::optional<double> cap;
      if (*cap_opt) cap = capacity;
      std::optional<int> cfg;
      if (*cfg_opt) cfg = config;
      return cmd_lifespan(def_path, battery, cap, cfg);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(Errc::io);
  }
  return 0;
}
