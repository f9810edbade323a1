#include "vh/tag_runtime.hpp"

#include <algorithm>
#include <cmath>

#include "vh/error.hpp"

namespace vh::tag {

namespace {

// Sealing wastes the rest of a page, so only do it once logging and uploads
// have both been idle this long. It must stay well inside the contact window
// or the station is no longer heard when the padded tail becomes uploadable.
constexpr std::int64_t seal_after_us = 5 * us_per_s;

Bytes pattern_payload(std::uint64_t tag_id, std::uint32_t seq, std::uint32_t bytes) {
  ByteWriter w;
  w.u32(seq);
  std::uint64_t x = mix_seed(tag_id, seq);
  while (w.buf().size() < bytes) {
    x = splitmix64(x);
    w.u8(static_cast<std::uint8_t>(x >> 56));
  }
  Bytes out = w.take();
  out.resize(bytes);
  return out;
}

}  // namespace

double BatteryState::voltage_at(std::int64_t now_us) const {
  if (!stalled) return params.open_circuit_v;
  const double dt = static_cast<double>(now_us - sag_at_us) / us_per_s;
  if (dt < 0) return params.sag_v;
  const double v = params.open_circuit_v - (params.open_circuit_v - params.sag_v) * std::exp(-dt / params.tau_s);
  return std::clamp(v, 0.0, 3.8);
}

std::int64_t BatteryState::resume_time() const {
  for (std::int64_t k = 1;; ++k) {
    const std::int64_t t = sag_at_us + k * us_per_s;
    if (voltage_at(t) >= params.resume_v || k > 1000000) return t;
  }
}

Bytes atlas_ping_sequence(std::uint64_t tag_id, std::uint32_t bits) {
  std::uint16_t lfsr = static_cast<std::uint16_t>(tag_id ^ (tag_id >> 16) ^ (tag_id >> 32) ^ (tag_id >> 48));
  if (lfsr == 0) lfsr = 0xACE1;
  Bytes out((bits + 7) / 8, 0);
  for (std::uint32_t i = 0; i < bits; ++i) {
    const unsigned bit = lfsr & 1u;
    lfsr = static_cast<std::uint16_t>(lfsr >> 1);
    if (bit != 0) lfsr ^= 0xB400;
    out[i / 8] = static_cast<std::uint8_t>(out[i / 8] | (bit << (7 - i % 8)));
  }
  return out;
}

TagRuntime::TagRuntime(tagdef::TagDefinition def, media::Media& media, TagOptions options)
    : def_(std::move(def)),
      media_(&media),
      opts_(options),
      sim_(options.sensor_seed),
      rng_(mix_seed(options.seed, 0x7A6)),
      period_us_(static_cast<std::int64_t>(def_.period_us())) {
  tagdef::validate(def_);
  for (const auto& s : def_.setups) {
    if (s.kind == tagdef::SetupKind::atlas_ping) {
      ping_ = atlas_ping_sequence(def_.tag_id, s.ping_bits);
      break;
    }
  }
  battery_.params = opts_.stall;
}

void TagRuntime::boot(std::int64_t now_us) {
  const bool first = boot_count_ == 0;
  if (media_->is_sector_erased(0)) {
    log_.emplace(log::Log::format(*media_, def_.tag_id, opts_.epoch_s + static_cast<std::uint64_t>(now_us / us_per_s)));
  } else {
    log_.emplace(log::Log::open(*media_));
  }
  ++boot_count_;
  ++stats_.boots;
  boot_s_ = (now_us + us_per_s - 1) / us_per_s;
  if (first && opts_.initial_clock_error_s) {
    clock_set_ = true;
    clock_offset_s_ = static_cast<std::int64_t>(opts_.epoch_s) + *opts_.initial_clock_error_s;
  } else {
    clock_set_ = false;
    clock_offset_s_ = -(now_us / us_per_s);
  }
  origin_us_ = now_us;
  slot_ = 0;
  next_clock_item_us_ = now_us;
  next_log_state_us_ = now_us;
  last_contact_us_.reset();
  last_progress_us_ = now_us;
  battery_ = BatteryState{};
  battery_.params = opts_.stall;
  accum_.clear();
  config_ = def_.initial_config;
  config_entered_us_ = now_us;
  if (def_.actuator_config && *def_.actuator_config == config_) actuator_on_ = true;

  append(log::item_type::boot_marker, log::BootMarker{boot_count_, opts_.firmware_id}.encode_payload());
  for (const auto& s : def_.sensors) append(log::item_type::sensor_config, sensors::sensor_config_payload(s));
  if (first && opts_.pattern.every_s == 0) {
    std::vector<std::uint32_t> ignored;
    while (pattern_emitted_ < opts_.pattern.count) emit_pattern(ignored);
  }
}

void TagRuntime::power_loss() {
  log_.reset();
  accum_.clear();
  clock_set_ = false;
  last_contact_us_.reset();
  battery_.stalled = false;
}

std::uint32_t TagRuntime::append(std::uint8_t type, ByteSpan payload) {
  try {
    const auto a = log_->append(type, payload);
    ++stats_.items_logged;
    return a;
  } catch (const Error& e) {
    if (e.code() != Errc::log_full) throw;
    ++stats_.items_dropped;
    return 0xFFFFFFFFu;
  }
}

void TagRuntime::emit_pattern(std::vector<std::uint32_t>& out) {
  auto a = append(log::item_type::test_pattern, pattern_payload(def_.tag_id, pattern_emitted_, opts_.pattern.bytes));
  ++pattern_emitted_;
  if (a != 0xFFFFFFFFu) out.push_back(a);
}

void TagRuntime::flush_accumulators() {
  for (auto& acc : accum_) {
    if (acc.count == 0) continue;
    append(sensors::item_type_for(def_.sensors[acc.sensor].kind), sensors::accumulation_payload(acc.start_ts, acc.samples));
    acc.count = 0;
    acc.samples.clear();
  }
}

std::optional<std::uint32_t> TagRuntime::silence_rule() const {
  for (std::size_t i = 0; i < def_.transitions.size(); ++i) {
    const auto& t = def_.transitions[i];
    if (t.trigger == tagdef::TriggerKind::silence && t.applies_from(config_)) return static_cast<std::uint32_t>(i);
  }
  return std::nullopt;
}

std::int64_t TagRuntime::contact_window_us() const {
  if (auto r = silence_rule()) return std::int64_t{def_.transitions[*r].value} * us_per_s;
  return default_contact_window_us;
}

std::optional<std::int64_t> TagRuntime::silence_deadline() const {
  if (!running()) return std::nullopt;
  auto r = silence_rule();
  if (!r) return std::nullopt;
  const std::int64_t base = std::max(last_contact_us_.value_or(config_entered_us_), config_entered_us_);
  return base + std::int64_t{def_.transitions[*r].value} * us_per_s;
}

std::optional<Transition> TagRuntime::on_silence_check(std::int64_t now_us) {
  auto d = silence_deadline();
  if (!d || *d != now_us) return std::nullopt;
  const auto& t = def_.transitions[*silence_rule()];
  Transition out{config_, t.to_config, "silence"};
  enter_config(t.to_config);
  config_entered_us_ = now_us;
  return out;
}

void TagRuntime::enter_config(std::uint8_t to) {
  config_ = to;
  if (def_.actuator_config && *def_.actuator_config == to) actuator_on_ = true;
}

std::optional<log::RawItem> TagRuntime::pending_item() const {
  if (!running()) return std::nullopt;
  return log_->next_uploadable(log_->cursor().ack_cursor);
}

std::vector<wire::DataItem> TagRuntime::build_items(tagdef::SlotMode mode, std::int64_t now_us,
                                                    std::optional<std::uint32_t>& carried) {
  const auto& cur = log_->cursor();
  wire::TagStateItem st;
  st.will_listen = mode == tagdef::SlotMode::tx_then_rx;
  st.has_data = cur.write_addr - cur.ack_cursor >= def_.upload_threshold;
  st.config_index = config_;

  std::optional<wire::DataItem> clock, state, carrier;
  if (now_us >= next_clock_item_us_) {
    clock = wire::ClockItem{static_cast<std::uint64_t>(local_seconds(now_us))};
  }
  if (now_us >= next_log_state_us_) {
    log_->flush();
    state = wire::LogStateItem{cur.write_addr, cur.ack_cursor, log_->header().creation_time};
  }
  const bool heard = last_contact_us_ && now_us - *last_contact_us_ <= contact_window_us();
  if (config_ == def_.highest_config() && heard) {
    if (auto p = pending_item()) {
      wire::LogItemCarrier c;
      c.creation_time = log_->header().creation_time;
      c.address = p->address;
      c.item_type = p->type;
      c.payload = log_->read(p->address + static_cast<std::uint32_t>(log::item_header_size), p->length);
      carrier = std::move(c);
    }
  }

  const auto size_of = [](const std::optional<wire::DataItem>& i) { return i ? wire::encoded_size(*i) : 0; };
  const std::size_t fixed = wire::encoded_size(st) + wire::encoded_size(wire::TagIdItem{def_.tag_id});
  for (auto* drop : {&clock, &state, &carrier}) {
    if (fixed + size_of(clock) + size_of(state) + size_of(carrier) <= wire::max_packet_payload) break;
    drop->reset();
  }

  std::vector<wire::DataItem> items{st, wire::TagIdItem{def_.tag_id}};
  if (clock) {
    items.push_back(*clock);
    next_clock_item_us_ = now_us + timer_interval_us;
  }
  if (state) {
    items.push_back(*state);
    next_log_state_us_ = now_us + timer_interval_us;
  }
  if (carrier) {
    carried = std::get<wire::LogItemCarrier>(*carrier).address;
    items.push_back(std::move(*carrier));
  }
  return items;
}

SlotResult TagRuntime::on_slot(std::int64_t now_us) {
  SlotResult r;
  if (!running()) return r;
  if (now_us != next_slot_time()) throw Error(Errc::validation, "slot fired off schedule");
  battery_.stalled = false;
  if (battery_.params.probability > 0 && rng_.chance(battery_.params.probability)) {
    battery_.stalled = true;
    battery_.sag_at_us = now_us;
    r.kind = SlotKind::stall;
    r.resume_us = battery_.resume_time();
    origin_us_ = r.resume_us;
    slot_ = 0;
    ++stats_.stalls;
    return r;
  }
  r.slot = slot_;
  const auto action = tagdef::slot_action(*def_.config(config_), slot_);
  ++slot_;
  if (action.idle) return r;
  const auto* setup = def_.setup(action.setup);
  r.setup = action.setup;
  r.setup_kind = setup->kind;
  r.mode = action.mode;
  if (setup->kind == tagdef::SetupKind::atlas_ping) {
    r.kind = SlotKind::ping;
    ++stats_.pings_sent;
    return r;
  }

  if (log_->cursor().write_addr != progress_write_addr_) {
    progress_write_addr_ = log_->cursor().write_addr;
    last_progress_us_ = now_us;
  }
  const bool heard = last_contact_us_ && now_us - *last_contact_us_ <= contact_window_us();
  if (config_ == def_.highest_config() && heard && now_us - last_progress_us_ >= seal_after_us &&
      !pending_item()) {
    // Everything durable is acknowledged. If real items remain in the
    // possibly-torn last page, pad past it so they can be uploaded.
    bool tail_has_data = false;
    for (const auto& it : log_->scan(log_->cursor().ack_cursor)) {
      if (it.type != log::item_type::padding && !log::is_structural(it.type)) tail_has_data = true;
    }
    if (tail_has_data) {
      log_->seal();
      ++stats_.seals;
    }
    last_progress_us_ = now_us;
    progress_write_addr_ = log_->cursor().write_addr;
  }

  r.kind = SlotKind::transmit;
  std::optional<std::uint32_t> carried;
  r.items = build_items(action.mode, now_us, carried);
  r.packet = wire::build_packet(r.items, wire::SourceKind::tag);
  r.carried_address = carried;
  ++stats_.packets_sent;
  if (carried) ++stats_.carriers_sent;
  return r;
}

std::vector<std::uint32_t> TagRuntime::on_second(std::int64_t now_us) {
  std::vector<std::uint32_t> out;
  if (!running() || battery_.stalled) return out;
  const std::int64_t s = now_us / us_per_s;
  if (s < boot_s_) return out;
  const auto local = static_cast<std::uint32_t>(local_seconds(now_us));
  for (std::size_t i = 0; i < def_.sensors.size(); ++i) {
    const auto& sch = def_.sensors[i];
    if ((s - boot_s_) % sch.every_s != 0) continue;
    if (sch.mode == tagdef::SensorMode::one_shot) {
      auto it = std::find_if(accum_.begin(), accum_.end(), [&](const Accumulator& a) { return a.sensor == i; });
      if (it == accum_.end()) {
        accum_.push_back(Accumulator{i, 0, 0, {}});
        it = accum_.end() - 1;
      }
      if (it->count == 0) it->start_ts = local;
      auto sample = sim_.sample(sch.kind, now_us);
      it->samples.insert(it->samples.end(), sample.begin(), sample.end());
      if (++it->count == sch.samples_per_item()) {
        auto a = append(sensors::item_type_for(sch.kind), sensors::accumulation_payload(it->start_ts, it->samples));
        if (a != 0xFFFFFFFFu) out.push_back(a);
        it->count = 0;
        it->samples.clear();
      }
    } else {
      const auto sizes = sensors::fragment_sizes(sch.burst_samples(), sch.samples_per_item());
      std::uint32_t k = 0;
      for (std::size_t f = 0; f < sizes.size(); ++f) {
        Bytes samples;
        for (std::uint32_t j = 0; j < sizes[f]; ++j, ++k) {
          auto b = sim_.sample(sch.kind, now_us + sensors::burst_offset_us(k, sch.rate_hz));
          samples.insert(samples.end(), b.begin(), b.end());
        }
        auto a = append(sensors::item_type_for(sch.kind),
                        sensors::fragment_payload(local, static_cast<std::uint8_t>(f), samples));
        if (a != 0xFFFFFFFFu) out.push_back(a);
      }
    }
  }
  if (opts_.pattern.every_s > 0 && pattern_emitted_ < opts_.pattern.count && s > boot_s_ &&
      (s - boot_s_) % opts_.pattern.every_s == 0) {
    emit_pattern(out);
  }
  return out;
}

ReplyEffects TagRuntime::handle_reply(const std::vector<wire::DataItem>& items, std::int64_t now_us) {
  ReplyEffects fx;
  const auto* to = wire::find_item<wire::AddressedTo>(items);
  if (!running() || to == nullptr || to->tag_id != def_.tag_id) {
    fx.ignored = true;
    return fx;
  }
  last_contact_us_ = now_us;
  for (const auto& item : items) {
    if (const auto* ack = std::get_if<wire::AckItem>(&item)) {
      auto p = pending_item();
      if (p && p->address == ack->acked_address) {
        log_->set_ack_cursor(p->end());
        fx.acked = p->address;
        ++stats_.acks_received;
        last_progress_us_ = now_us;
      } else {
        fx.ack_mismatch = true;
      }
    } else if (const auto* clk = std::get_if<wire::ClockItem>(&item)) {
      const std::int64_t old_local = local_seconds(now_us);
      const auto new_local = static_cast<std::int64_t>(clk->utc_seconds);
      flush_accumulators();
      ByteWriter w;
      w.u32(static_cast<std::uint32_t>(old_local));
      w.u32(static_cast<std::uint32_t>(new_local));
      w.u8(clock_set_ ? 1 : 0);
      clock_offset_s_ = new_local - now_us / us_per_s;
      clock_set_ = true;
      append(log::item_type::clock_set, w.take());
      fx.clock_set = std::make_pair(old_local, new_local);
    } else if (const auto* wk = std::get_if<wire::WakeupItem>(&item)) {
      std::optional<std::uint8_t> target;
      if (wk->is_highest()) {
        target = def_.highest_config();
      } else {
        for (const auto& t : def_.transitions) {
          if (t.trigger == tagdef::TriggerKind::wakeup && t.value == wk->target && t.applies_from(config_)) {
            target = t.to_config;
            break;
          }
        }
      }
      if (target && *target != config_) {
        fx.transition = Transition{config_, *target, wk->is_highest() ? "wakeup-highest" : "wakeup"};
        enter_config(*target);
        config_entered_us_ = now_us;
      }
    }
  }
  return fx;
}

}  // namespace vh::tag
