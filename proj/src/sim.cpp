#include "vh/sim.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <queue>
#include <sstream>

#include "vh/error.hpp"

namespace vh::sim {

namespace {

enum class EvKind { boot, power_loss, slot, second, silence };

struct Event {
  std::int64_t t = 0;
  std::uint32_t entity = 0;
  std::uint64_t seq = 0;
  EvKind kind = EvKind::slot;
  std::size_t tag = 0;
  std::uint64_t epoch = 0;

  bool operator>(const Event& o) const {
    if (t != o.t) return t > o.t;
    if (entity != o.entity) return entity > o.entity;
    return seq > o.seq;
  }
};

struct TagCtx {
  const TagSpec* spec = nullptr;
  std::unique_ptr<media::Media> media;
  std::unique_ptr<tag::TagRuntime> rt;
  // Bumped on power loss so stale slot/second events are discarded.
  std::uint64_t epoch = 0;
  std::optional<std::int64_t> silence_scheduled;
};

struct StationCtx {
  const StationSpec* spec = nullptr;
  std::unique_ptr<station::BaseStation> bs;
};

std::string item_list(const std::vector<wire::DataItem>& items) {
  std::string s;
  for (const auto& i : items) {
    if (!s.empty()) s += ',';
    switch (wire::type_of(i)) {
      case wire::type_code::tag_state: s += "state"; break;
      case wire::type_code::tag_id: s += "id"; break;
      case wire::type_code::ack: s += "ack:" + std::to_string(std::get<wire::AckItem>(i).acked_address); break;
      case wire::type_code::clock: s += "clock:" + std::to_string(std::get<wire::ClockItem>(i).utc_seconds); break;
      case wire::type_code::wakeup: {
        const auto& w = std::get<wire::WakeupItem>(i);
        s += "wakeup:" + (w.is_highest() ? std::string("highest") : std::to_string(w.target));
        break;
      }
      case wire::type_code::addressed_to: s += "to"; break;
      case wire::type_code::log_item_carrier:
        s += "carrier:" + std::to_string(std::get<wire::LogItemCarrier>(i).address);
        break;
      case wire::type_code::log_state: s += "logstate"; break;
      default: s += "opaque:" + std::to_string(wire::type_of(i));
    }
  }
  return s;
}

class Engine {
 public:
  Engine(const Scenario& sc, const RunOptions& opts) : sc_(sc), opts_(opts), rng_(mix_seed(sc.seed, 0xC4A77E1)) {
    for (const auto& t : sc_.tags) {
      TagCtx c;
      c.spec = &t;
      c.media = std::make_unique<media::Media>(t.geometry);
      c.rt = std::make_unique<tag::TagRuntime>(t.definition, *c.media, t.options);
      tags_.push_back(std::move(c));
    }
    for (const auto& s : sc_.stations) {
      StationCtx c;
      c.spec = &s;
      c.bs = std::make_unique<station::BaseStation>(s.options);
      for (const auto& i : s.intents) {
        if (auto w = c.bs->add_intent(i)) line(0) << "ev=warning station=" << s.entity << " msg=\"" << *w << "\"\n";
      }
      stations_.push_back(std::move(c));
    }
    std::sort(stations_.begin(), stations_.end(),
              [](const StationCtx& a, const StationCtx& b) { return a.spec->entity < b.spec->entity; });
  }

  RunResult run() {
    for (std::size_t i = 0; i < tags_.size(); ++i) {
      push(tags_[i].spec->boot_at_us, i, EvKind::boot);
      for (auto r : tags_[i].spec->reboots_us) push(r, i, EvKind::power_loss);
    }
    while (!queue_.empty()) {
      Event e = queue_.top();
      if (e.t >= sc_.duration_us) break;
      queue_.pop();
      ++result_.events;
      dispatch(e);
    }
    for (auto& s : stations_) s.bs->flush();
    result_.trace = trace_.str();
    for (auto& t : tags_) {
      TagResult r;
      r.entity = t.spec->entity;
      r.tag_id = t.rt->tag_id();
      r.stats = t.rt->stats();
      r.geometry = t.media->geometry();
      r.image = t.media->image();
      r.final_config = t.rt->current_config();
      r.actuator_on = t.rt->actuator_on();
      r.sensor_seed = t.spec->options.sensor_seed;
      result_.tags.push_back(std::move(r));
    }
    for (auto& s : stations_) {
      StationResult r;
      r.entity = s.spec->entity;
      r.store = s.spec->options.store;
      r.accepted = s.bs->accepted();
      r.store_bytes = s.bs->store_bytes();
      result_.stations.push_back(std::move(r));
    }
    return std::move(result_);
  }

 private:
  void push(std::int64_t t, std::size_t tag, EvKind kind) {
    queue_.push(Event{t, tags_[tag].spec->entity, seq_++, kind, tag, tags_[tag].epoch});
  }

  std::ostringstream& line(std::int64_t t) {
    trace_ << "t=" << t << ' ';
    return trace_;
  }

  void reschedule_silence(std::size_t i) {
    auto& c = tags_[i];
    auto d = c.rt->silence_deadline();
    if (d && d != c.silence_scheduled) push(*d, i, EvKind::silence);
    c.silence_scheduled = d;
  }

  void dispatch(const Event& e) {
    auto& c = tags_[e.tag];
    const auto ent = c.spec->entity;
    switch (e.kind) {
      case EvKind::boot: {
        c.rt->boot(e.t);
        ++c.epoch;
        line(e.t) << "ev=boot tag=" << ent << " count=" << c.rt->boot_count() << " config=" << int{c.rt->current_config()}
                  << " write=" << c.rt->log().cursor().write_addr << " ack=" << c.rt->log().cursor().ack_cursor << '\n';
        push(c.rt->next_slot_time(), e.tag, EvKind::slot);
        push((e.t + tag::us_per_s - 1) / tag::us_per_s * tag::us_per_s, e.tag, EvKind::second);
        reschedule_silence(e.tag);
        break;
      }
      case EvKind::power_loss: {
        if (!c.rt->running()) break;
        c.rt->power_loss();
        ++c.epoch;
        c.silence_scheduled.reset();
        line(e.t) << "ev=power-loss tag=" << ent << '\n';
        push(e.t, e.tag, EvKind::boot);
        break;
      }
      case EvKind::second: {
        if (e.epoch != c.epoch) break;
        auto added = c.rt->on_second(e.t);
        if (!opts_.compact_trace) {
          for (auto a : added) {
            line(e.t) << "ev=log tag=" << ent << " addr=" << a << " type=" << log::type_name(c.rt->log().at(a)) << '\n';
          }
        }
        push(e.t + tag::us_per_s, e.tag, EvKind::second);
        break;
      }
      case EvKind::silence: {
        if (!c.rt->running() || c.silence_scheduled != e.t) break;
        c.silence_scheduled.reset();
        if (auto tr = c.rt->on_silence_check(e.t)) {
          line(e.t) << "ev=transition tag=" << ent << " from=" << int{tr->from} << " to=" << int{tr->to}
                    << " cause=" << tr->cause << '\n';
        }
        reschedule_silence(e.tag);
        break;
      }
      case EvKind::slot: {
        if (e.epoch != c.epoch) break;
        on_slot(e);
        push(c.rt->next_slot_time(), e.tag, EvKind::slot);
        break;
      }
    }
  }

  void on_slot(const Event& e) {
    auto& c = tags_[e.tag];
    const auto ent = c.spec->entity;
    auto r = c.rt->on_slot(e.t);
    switch (r.kind) {
      case tag::SlotKind::idle: return;
      case tag::SlotKind::stall:
        line(e.t) << "ev=stall tag=" << ent << " resume=" << r.resume_us << '\n';
        return;
      case tag::SlotKind::ping:
        if (!opts_.compact_trace) {
          line(e.t) << "ev=ping tag=" << ent << " slot=" << r.slot << " setup=" << r.setup
                    << " config=" << int{c.rt->current_config()} << '\n';
        }
        return;
      case tag::SlotKind::transmit: break;
    }
    line(e.t) << "ev=tx tag=" << ent << " slot=" << r.slot << " setup=" << r.setup
              << " mode=" << tagdef::to_string(r.mode) << " config=" << int{c.rt->current_config()}
              << " bytes=" << r.packet.payload.size() << " items=" << item_list(r.items) << '\n';
    const auto& ch = sc_.channel.params(r.setup_kind);
    const auto [tx, ty] = position_at(c.spec->path, e.t);
    for (auto& s : stations_) {
      const auto sid = s.spec->entity;
      if (!s.spec->active(e.t)) continue;
      const double dist = std::hypot(tx - s.spec->x, ty - s.spec->y);
      if (dist > ch.range_m) {
        ++result_.drops;
        line(e.t) << "ev=drop tag=" << ent << " station=" << sid << " reason=range\n";
        continue;
      }
      if (!deliver(ch, dist, rng_)) {
        ++result_.drops;
        line(e.t) << "ev=drop tag=" << ent << " station=" << sid << " reason=loss\n";
        continue;
      }
      ++result_.deliveries;
      line(e.t) << "ev=rx tag=" << ent << " station=" << sid << '\n';
      auto out = s.bs->handle_packet(r.items, e.t);
      for (const auto& w : out.warnings) line(e.t) << "ev=warning station=" << sid << " msg=\"" << w << "\"\n";
      if (out.persisted) {
        line(e.t) << "ev=store station=" << sid << " tag=" << ent << " addr=" << out.persisted->address << '\n';
      }
      if (out.storage_full) line(e.t) << "ev=storage-full station=" << sid << " tag=" << ent << '\n';
      if (!out.reply) continue;
      line(e.t) << "ev=reply station=" << sid << " tag=" << ent << " items=" << item_list(out.reply_items) << '\n';
      if (r.mode != tagdef::SlotMode::tx_then_rx) continue;
      if (!deliver(ch, dist, rng_)) {
        ++result_.drops;
        line(e.t) << "ev=reply-drop station=" << sid << " tag=" << ent << " reason=loss\n";
        continue;
      }
      ++result_.deliveries;
      auto fx = c.rt->handle_reply(out.reply_items, e.t);
      if (fx.ignored) continue;
      line(e.t) << "ev=reply-rx station=" << sid << " tag=" << ent << '\n';
      if (fx.acked) line(e.t) << "ev=ack tag=" << ent << " addr=" << *fx.acked << '\n';
      if (fx.ack_mismatch) line(e.t) << "ev=ack-ignored tag=" << ent << '\n';
      if (fx.clock_set) {
        line(e.t) << "ev=clock-set tag=" << ent << " old=" << fx.clock_set->first << " new=" << fx.clock_set->second
                  << '\n';
      }
      if (fx.transition) {
        line(e.t) << "ev=transition tag=" << ent << " from=" << int{fx.transition->from}
                  << " to=" << int{fx.transition->to} << " cause=" << fx.transition->cause << '\n';
      }
    }
    reschedule_silence(e.tag);
  }

  const Scenario& sc_;
  RunOptions opts_;
  Rng rng_;
  std::vector<TagCtx> tags_;
  std::vector<StationCtx> stations_;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  std::uint64_t seq_ = 0;
  std::ostringstream trace_;
  RunResult result_;
};

}  // namespace

RunResult run(const Scenario& scenario, const RunOptions& options) {
  return Engine(scenario, options).run();
}

}  // namespace vh::sim
