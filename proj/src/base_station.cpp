#include "vh/base_station.hpp"

#include <algorithm>

#include "vh/error.hpp"

namespace vh::station {

std::string describe(const Intent& i) {
  std::string scope = i.tag ? "tag " + std::to_string(*i.tag) : "all";
  switch (i.kind) {
    case IntentKind::adjust_clock: return "clock " + scope;
    case IntentKind::acknowledge: return "ack " + scope;
    case IntentKind::wakeup:
      return "wakeup " + scope + " -> " +
             (i.target == wire::WakeupItem::highest ? std::string("highest") : std::to_string(i.target));
  }
  return "?";
}

BaseStation::BaseStation(StationOptions options) : opts_(options) {
  if (opts_.store == StoreKind::sd) {
    sd_.emplace(media::MediaGeometry::sd(opts_.sd_sectors));
    sd_log_.emplace(log::Log::format(*sd_, opts_.id, opts_.epoch_s));
  } else {
    tethered_ = records::record_file_header();
  }
}

std::optional<std::string> BaseStation::add_intent(const Intent& intent) {
  if (std::find(intents_.begin(), intents_.end(), intent) != intents_.end()) return std::nullopt;
  std::optional<std::string> warning;
  if (intent.kind == IntentKind::wakeup) {
    for (const auto& i : intents_) {
      if (i.kind == IntentKind::wakeup && i.tag == intent.tag) {
        warning = "station " + std::to_string(opts_.id) + ": '" + describe(intent) + "' overrides '" + describe(i) + "'";
      }
    }
  }
  intents_.push_back(intent);
  return warning;
}

bool BaseStation::remove_intent(const Intent& intent) {
  auto it = std::find(intents_.begin(), intents_.end(), intent);
  if (it == intents_.end()) return false;
  intents_.erase(it);
  return true;
}

bool BaseStation::persist(const records::ReceivedRecord& rec) {
  if (sd_log_) {
    try {
      sd_log_->append(log::item_type::received_key, records::key_item_payload(rec));
      sd_log_->append(log::item_type::received_payload, rec.payload);
    } catch (const Error& e) {
      if (e.code() == Errc::log_full) return false;
      throw;
    }
  } else {
    if (opts_.max_records && accepted_.size() >= *opts_.max_records) return false;
    records::append_framed(tethered_, rec);
  }
  accepted_.push_back(rec);
  return true;
}

PacketOutcome BaseStation::handle_packet(const wire::Packet& packet, std::int64_t rx_time_us) {
  try {
    return handle_packet(wire::parse_packet(packet.payload), rx_time_us);
  } catch (const Error& e) {
    PacketOutcome out;
    out.warnings.push_back(std::string("unparsable packet: ") + e.what());
    return out;
  }
}

PacketOutcome BaseStation::handle_packet(const std::vector<wire::DataItem>& items, std::int64_t rx_time_us) {
  PacketOutcome out;
  const auto* st = wire::find_item<wire::TagStateItem>(items);
  const auto* id = wire::find_item<wire::TagIdItem>(items);
  if (st == nullptr || id == nullptr) return out;
  const std::uint64_t tag = id->tag_id;
  const auto* clk = wire::find_item<wire::ClockItem>(items);
  const auto* carrier = wire::find_item<wire::LogItemCarrier>(items);

  auto& seen = sightings_[tag];
  seen.state = *st;
  seen.rx_time_us = rx_time_us;
  if (clk) seen.advertised_clock = clk->utc_seconds;

  const auto has = [&](IntentKind k) {
    return std::any_of(intents_.begin(), intents_.end(),
                       [&](const Intent& i) { return i.kind == k && i.applies_to(tag); });
  };

  std::optional<wire::AckItem> ack;
  if (carrier && opts_.logging) {
    records::ReceivedRecord rec{tag,           carrier->creation_time, carrier->address, carrier->item_type,
                                carrier->payload, rx_time_us,          opts_.id};
    if (persist(rec)) {
      out.persisted = rec;
      if (has(IntentKind::acknowledge)) ack = wire::AckItem{carrier->address};
    } else {
      out.storage_full = true;
    }
  }
  if (!st->will_listen) return out;

  std::vector<wire::DataItem> reply;
  if (clk && opts_.valid_clock && has(IntentKind::adjust_clock)) {
    const auto now = static_cast<std::int64_t>(utc_seconds(rx_time_us));
    const auto adv = static_cast<std::int64_t>(clk->utc_seconds);
    if (std::llabs(adv - now) > clock_tolerance_s) reply.push_back(wire::ClockItem{static_cast<std::uint64_t>(now)});
  }
  if (ack) reply.push_back(*ack);

  // Last-added matching wakeup intent wins. A "highest" target is only known
  // to be reached once the tag carries log items.
  std::optional<std::uint8_t> wake;
  for (const auto& i : intents_) {
    if (i.kind == IntentKind::wakeup && i.applies_to(tag)) wake = i.target;
  }
  if (wake) {
    const bool reached = *wake == wire::WakeupItem::highest ? carrier != nullptr : st->config_index == *wake;
    if (reached) wake.reset();
  }
  if (!wake && st->has_data && carrier == nullptr && opts_.logging) wake = wire::WakeupItem::highest;
  if (wake) reply.push_back(wire::WakeupItem{*wake});

  if (reply.empty()) return out;
  reply.insert(reply.begin(), wire::AddressedTo{tag});
  out.reply = wire::build_packet(reply, wire::SourceKind::base);
  out.reply_items = std::move(reply);
  return out;
}

void BaseStation::flush() {
  if (sd_log_) sd_log_->flush();
}

Bytes BaseStation::store_bytes() const {
  if (sd_) return sd_->image();
  return tethered_;
}

}  // namespace vh::station
