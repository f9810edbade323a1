#include "vh/log.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "vh/error.hpp"

namespace vh::log {

std::string type_name(std::uint8_t type) {
  switch (type) {
    case item_type::log_header: return "log-header";
    case item_type::sector_header: return "sector-header";
    case item_type::boot_marker: return "boot-marker";
    case item_type::sensor_config: return "sensor-config";
    case item_type::clock_set: return "clock-set";
    case item_type::padding: return "padding";
    case item_type::pressure_temperature: return "pressure-temperature";
    case item_type::acceleration_burst: return "acceleration-burst";
    case item_type::received_key: return "received-key";
    case item_type::received_payload: return "received-payload";
    case item_type::test_pattern: return "test-pattern";
    default: return "type-" + std::to_string(type);
  }
}

const char* to_string(Validity v) { return v == Validity::valid ? "valid" : "suspect"; }

Bytes LogHeader::encode_payload() const {
  ByteWriter w;
  w.bytes(magic);
  w.u8(version);
  w.u8(registry_id);
  w.u8(page_shift);
  w.u8(sector_shift);
  w.u64(tag_id);
  w.u64(creation_time);
  return w.take();
}

std::optional<LogHeader> LogHeader::decode_payload(ByteSpan payload) {
  if (payload.size() != log_header_size - item_header_size) return std::nullopt;
  if (!std::equal(std::begin(magic), std::end(magic), payload.begin())) return std::nullopt;
  ByteReader r(payload.subspan(4));
  LogHeader h;
  h.version = r.u8();
  h.registry_id = r.u8();
  h.page_shift = r.u8();
  h.sector_shift = r.u8();
  h.tag_id = r.u64();
  h.creation_time = r.u64();
  if (h.version != format_version) return std::nullopt;
  if (h.page_shift < 4 || h.page_shift > 16 || h.sector_shift < h.page_shift || h.sector_shift > 24) {
    return std::nullopt;
  }
  return h;
}

Bytes SectorHeader::encode_payload() const {
  ByteWriter w;
  w.u32(ack_cursor);
  w.u16(sector_seq);
  w.u8(flags);
  return w.take();
}

std::optional<SectorHeader> SectorHeader::decode_payload(ByteSpan payload) {
  if (payload.size() != sector_header_size - item_header_size) return std::nullopt;
  ByteReader r(payload);
  SectorHeader h;
  h.ack_cursor = r.u32();
  h.sector_seq = r.u16();
  h.flags = r.u8();
  return h;
}

Bytes BootMarker::encode_payload() const {
  ByteWriter w;
  w.u16(boot_count);
  w.u16(firmware_id);
  return w.take();
}

std::optional<BootMarker> BootMarker::decode_payload(ByteSpan payload) {
  if (payload.size() != 4) return std::nullopt;
  ByteReader r(payload);
  BootMarker b;
  b.boot_count = r.u16();
  b.firmware_id = r.u16();
  return b;
}

Layout Layout::of(const LogHeader& header, std::uint64_t capacity) {
  Layout l;
  l.page_size = header.page_size();
  l.sector_size = header.sector_size();
  l.capacity = capacity - capacity % l.sector_size;
  return l;
}

// ---------------------------------------------------------------------------
// Scanner

ItemScanner::ItemScanner(const ByteSource& source, Layout layout, std::uint64_t from,
                         std::uint64_t limit)
    : source_(source), layout_(layout), pos_(from), limit_(std::min(limit, layout.capacity)) {}

void ItemScanner::skip_to_next_page(bool record) {
  const auto next = layout_.next_page(pos_);
  if (record) {
    const auto b = static_cast<std::uint32_t>(pos_);
    const auto e = static_cast<std::uint32_t>(next);
    if (!skipped_.empty() && skipped_.back().end == b) {
      skipped_.back().end = e;
    } else {
      skipped_.push_back({b, e});
    }
  }
  pos_ = next;
}

std::optional<RawItem> ItemScanner::next() {
  while (pos_ < limit_) {
    const auto offset = pos_ % layout_.sector_size;
    if (offset == 0 && pos_ != 0) {
      if (source_.at(pos_) == 0xFF && source_.at(pos_ + 1) == 0xFF) {
        pos_ = limit_;
        return std::nullopt;
      }
    }
    if (layout_.sector_size - offset < item_header_size) {
      pos_ = layout_.next_sector(pos_);
      continue;
    }
    const auto type = source_.at(pos_);
    const auto length = source_.at(pos_ + 1);
    if (type == 0xFF && length == 0xFF) {
      skip_to_next_page(false);
      continue;
    }
    if (!valid_item_header(type, length) ||
        offset + item_header_size + length > layout_.sector_size) {
      skip_to_next_page(true);
      continue;
    }
    RawItem item{static_cast<std::uint32_t>(pos_), type, length};
    pos_ = item.end();
    return item;
  }
  return std::nullopt;
}

std::vector<Validity> classify(const std::vector<std::uint8_t>& types) {
  std::vector<Validity> out(types.size(), Validity::valid);
  // Walk backwards remembering the next non-structural type.
  std::optional<std::uint8_t> following;
  for (std::size_t i = types.size(); i-- > 0;) {
    if (is_structural(types[i])) continue;
    if (!following || *following == item_type::boot_marker) out[i] = Validity::suspect;
    following = types[i];
  }
  return out;
}

namespace {

class SpanSource final : public ByteSource {
 public:
  explicit SpanSource(ByteSpan s) : s_(s) {}
  std::uint8_t at(std::uint64_t a) const override { return a < s_.size() ? s_[a] : 0xFF; }

 private:
  ByteSpan s_;
};

std::optional<LogHeader> read_log_header(const ByteSource& src, std::uint64_t capacity) {
  if (capacity < log_header_size) return std::nullopt;
  if (src.at(0) != item_type::log_header || src.at(1) != log_header_size - item_header_size) {
    return std::nullopt;
  }
  Bytes payload(log_header_size - item_header_size);
  for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = src.at(item_header_size + i);
  return LogHeader::decode_payload(payload);
}

Iteration iterate_source(const ByteSource& src, std::uint64_t capacity) {
  Iteration it;
  it.header = read_log_header(src, capacity);
  if (!it.header) {
    it.truncated = true;
    it.truncation_reason = "missing or corrupt log header";
    return it;
  }
  const auto layout = Layout::of(*it.header, capacity);
  if (layout.capacity == 0) {
    it.truncated = true;
    it.truncation_reason = "medium smaller than one logical sector";
    return it;
  }
  ItemScanner scanner(src, layout, 0, layout.capacity);
  std::vector<std::uint8_t> types;
  while (auto raw = scanner.next()) {
    LogItem item;
    item.address = raw->address;
    item.type = raw->type;
    item.payload.resize(raw->length);
    for (std::size_t i = 0; i < raw->length; ++i) {
      item.payload[i] = src.at(raw->address + item_header_size + i);
    }
    types.push_back(raw->type);
    it.items.push_back(std::move(item));
  }
  it.skipped = scanner.skipped();
  const auto validity = classify(types);
  for (std::size_t i = 0; i < it.items.size(); ++i) it.items[i].validity = validity[i];
  return it;
}

}  // namespace

Iteration iterate_items(const media::Media& media) {
  MediaSource src(media);
  return iterate_source(src, media.geometry().capacity());
}

Iteration iterate_image(ByteSpan image) {
  SpanSource src(image);
  return iterate_source(src, image.size());
}

// ---------------------------------------------------------------------------
// Recovery

namespace {

bool is_trusted_sector_header(const media::Media& m, const Layout& layout, std::uint32_t sector,
                              std::optional<SectorHeader>* out) {
  const std::uint64_t base = std::uint64_t{sector} * layout.sector_size;
  if (m.at(base) != item_type::sector_header || m.at(base + 1) != sector_header_size - item_header_size) {
    return false;
  }
  auto h = SectorHeader::decode_payload(m.view(base + item_header_size, sector_header_size - item_header_size));
  if (!h || h->ack_cursor > base) return false;
  *out = h;
  return true;
}

}  // namespace

Recovery recover(const media::Media& media) {
  MediaSource src(media);
  const auto capacity = media.geometry().capacity();
  auto header = read_log_header(src, capacity);
  if (!header) throw Error(Errc::corrupt_log, "missing or corrupt log header");
  const auto layout = Layout::of(*header, capacity);
  const auto n = layout.sector_count();
  if (n == 0) throw Error(Errc::corrupt_log, "medium smaller than one logical sector");

  Recovery rec;
  rec.header = *header;
  auto& report = rec.report;

  auto erased = [&](std::uint32_t s) {
    ++report.sectors_probed;
    const auto base = std::uint64_t{s} * layout.sector_size;
    auto v = media.view(base, layout.sector_size);
    return std::all_of(v.begin(), v.end(), [](std::uint8_t b) { return b == 0xFF; });
  };

  // Sectors fill monotonically, so "erased" is a step function of the index.
  std::uint32_t lo = 1;
  std::uint32_t hi = n;
  while (lo < hi) {
    const auto mid = lo + (hi - lo) / 2;
    if (erased(mid)) hi = mid;
    else lo = mid + 1;
  }
  report.first_erased_sector = lo;
  const std::uint32_t last = lo - 1;
  report.last_sector = last;

  const std::uint64_t sec_start = std::uint64_t{last} * layout.sector_size;
  const std::uint64_t sec_end = sec_start + layout.sector_size;

  std::uint64_t last_nonff = sec_start;
  for (std::uint64_t a = sec_end; a-- > sec_start;) {
    if (media.at(a) != 0xFF) {
      last_nonff = a;
      break;
    }
  }
  const std::uint64_t page = layout.page_start(last_nonff);
  const std::uint64_t page_end = page + layout.page_size;
  report.suspect_page_start = static_cast<std::uint32_t>(page);

  ItemScanner scanner(src, layout, sec_start, sec_end);
  std::optional<RawItem> straddling;
  while (auto item = scanner.next()) {
    if (item->end() > page) {
      straddling = item;
      break;
    }
  }

  auto has_nonff = [&](std::uint64_t b, std::uint64_t e) {
    for (auto a = b; a < e; ++a) {
      if (media.at(a) != 0xFF) return true;
    }
    return false;
  };

  std::uint64_t write_addr;
  const bool trusted = straddling && (straddling->address < page ||
                                      (straddling->address == 0 && straddling->type == item_type::log_header));
  if (trusted) {
    if (straddling->end() < page_end && has_nonff(straddling->end(), page_end)) {
      report.neutralize = Neutralization{{straddling->end(), static_cast<std::uint32_t>(page_end)}, false};
      report.torn = true;
      write_addr = page_end;
    } else {
      write_addr = straddling->end();
    }
  } else {
    report.torn = true;
    if (page == sec_start && last > 0) {
      report.dead_sector = true;
      report.neutralize = Neutralization{{static_cast<std::uint32_t>(page), static_cast<std::uint32_t>(page_end)}, true};
      write_addr = sec_end;
    } else {
      report.neutralize = Neutralization{{static_cast<std::uint32_t>(page), static_cast<std::uint32_t>(page_end)}, false};
      write_addr = page_end;
    }
  }

  std::uint32_t ack = 0;
  for (std::uint32_t s = last; s >= 1; --s) {
    if (s == last && report.dead_sector) continue;
    std::optional<SectorHeader> sh;
    if (is_trusted_sector_header(media, layout, s, &sh)) {
      ack = sh->ack_cursor;
      break;
    }
  }

  rec.cursor.write_addr = static_cast<std::uint32_t>(std::min<std::uint64_t>(write_addr, layout.capacity));
  rec.cursor.ack_cursor = std::min(ack, rec.cursor.write_addr);
  return rec;
}

// ---------------------------------------------------------------------------
// Writer

class Log::Overlay final : public ByteSource {
 public:
  explicit Overlay(const Log& log) : log_(log) {}
  std::uint8_t at(std::uint64_t a) const override { return log_.at(a); }

 private:
  const Log& log_;
};

LogCursor format_log(media::Media& media, std::uint64_t tag_id, std::uint64_t creation_time,
                     std::uint8_t registry_id, std::optional<std::uint32_t> logical_sector_size) {
  return Log::format(media, tag_id, creation_time, registry_id, logical_sector_size).cursor();
}

Log::Log(media::Media& media, LogHeader header, Layout layout, LogCursor cursor)
    : media_(&media), header_(header), layout_(layout), cursor_(cursor) {}

Log Log::format(media::Media& media, std::uint64_t tag_id, std::uint64_t creation_time,
                std::uint8_t registry_id, std::optional<std::uint32_t> logical_sector_size) {
  const auto& geo = media.geometry();
  const std::uint32_t sector = logical_sector_size.value_or(geo.sector_size);
  if (!std::has_single_bit(sector) || sector < geo.page_size || geo.capacity() % sector != 0) {
    throw Error(Errc::validation, "logical sector size must be a power of two multiple of the page size");
  }
  if (sector < log_header_size + max_payload + item_header_size) {
    throw Error(Errc::validation, "logical sector too small for a maximal item");
  }
  const auto& img = media.image();
  if (!std::all_of(img.begin(), img.end(), [](std::uint8_t b) { return b == 0xFF; })) {
    throw Error(Errc::not_erased, "format requires a fully erased medium");
  }
  LogHeader h;
  h.registry_id = registry_id;
  h.page_shift = static_cast<std::uint8_t>(std::countr_zero(geo.page_size));
  h.sector_shift = static_cast<std::uint8_t>(std::countr_zero(sector));
  h.tag_id = tag_id;
  h.creation_time = creation_time;

  Log log(media, h, Layout::of(h, geo.capacity()), LogCursor{0, 0});
  Bytes item{item_type::log_header, static_cast<std::uint8_t>(log_header_size - item_header_size)};
  auto payload = h.encode_payload();
  item.insert(item.end(), payload.begin(), payload.end());
  log.write_bytes(item);
  log.cursor_.write_addr = static_cast<std::uint32_t>(log_header_size);
  log.flush();
  return log;
}

Log Log::open(media::Media& media) {
  auto rec = recover(media);
  Log log(media, rec.header, Layout::of(rec.header, media.geometry().capacity()), rec.cursor);
  if (rec.report.neutralize) {
    const auto& n = *rec.report.neutralize;
    const auto p = static_cast<std::uint32_t>(n.range.begin / log.layout_.page_size);
    const auto page_base = std::uint64_t{p} * log.layout_.page_size;
    Bytes data(log.layout_.page_size, 0xFF);
    for (std::uint64_t a = n.range.begin; a < n.range.end; ++a) {
      if (n.whole_range || media.at(a) != 0xFF) data[a - page_base] = 0x00;
    }
    media.page_write(p, data);
  }
  log.last_written_page_ = rec.report.suspect_page_start / log.layout_.page_size;
  log.recovery_report_ = rec.report;
  return log;
}

std::uint8_t Log::at(std::uint64_t a) const {
  if (buf_page_ && a / layout_.page_size == *buf_page_) return page_buf_[a % layout_.page_size];
  return media_->at(a);
}

Bytes Log::read(std::uint32_t address, std::size_t length) const {
  Bytes out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = at(address + i);
  return out;
}

void Log::load_page(std::uint32_t page) {
  auto v = media_->view(std::uint64_t{page} * layout_.page_size, layout_.page_size);
  page_buf_.assign(v.begin(), v.end());
  buf_page_ = page;
  buf_dirty_ = false;
}

void Log::flush_buffer() {
  if (buf_page_ && buf_dirty_) {
    media_->page_write(*buf_page_, page_buf_);
    last_written_page_ = *buf_page_;
    buf_dirty_ = false;
  }
}

void Log::flush() { flush_buffer(); }

void Log::write_bytes(ByteSpan data) {
  std::uint64_t a = cursor_.write_addr;
  for (auto b : data) {
    const auto page = static_cast<std::uint32_t>(a / layout_.page_size);
    if (!buf_page_ || *buf_page_ != page) {
      flush_buffer();
      load_page(page);
    }
    page_buf_[a % layout_.page_size] = b;
    buf_dirty_ = true;
    if (a % layout_.page_size == layout_.page_size - 1) {
      flush_buffer();
      buf_page_.reset();
    }
    ++a;
  }
}

void Log::begin_sector_if_needed() {
  if (cursor_.write_addr >= layout_.capacity) throw Error(Errc::log_full, "log full");
  if (cursor_.write_addr % layout_.sector_size != 0 || cursor_.write_addr == 0) return;
  SectorHeader sh;
  sh.ack_cursor = cursor_.ack_cursor;
  sh.sector_seq = static_cast<std::uint16_t>(cursor_.write_addr / layout_.sector_size);
  Bytes item{item_type::sector_header, static_cast<std::uint8_t>(sector_header_size - item_header_size)};
  auto payload = sh.encode_payload();
  item.insert(item.end(), payload.begin(), payload.end());
  write_bytes(item);
  cursor_.write_addr += static_cast<std::uint32_t>(sector_header_size);
  ++sector_headers_written_;
}

std::uint32_t Log::append(std::uint8_t type, ByteSpan payload) {
  if (!valid_item_header(type, static_cast<std::uint8_t>(std::min<std::size_t>(payload.size(), 0xFF))) ||
      payload.size() > max_payload || is_structural(type)) {
    throw Error(Errc::invalid_item, "invalid item type " + std::to_string(type) + " or length " +
                                        std::to_string(payload.size()));
  }
  if (media_->failed()) throw Error(Errc::device_failed, "append on failed device");
  const auto need = static_cast<std::uint32_t>(item_header_size + payload.size());
  begin_sector_if_needed();
  const auto offset = cursor_.write_addr % layout_.sector_size;
  if (offset + need > layout_.sector_size) {
    flush_buffer();
    bytes_wasted_ += layout_.sector_size - offset;
    cursor_.write_addr = static_cast<std::uint32_t>(layout_.next_sector(cursor_.write_addr));
    begin_sector_if_needed();
  }
  Bytes item{type, static_cast<std::uint8_t>(payload.size())};
  item.insert(item.end(), payload.begin(), payload.end());
  const auto addr = cursor_.write_addr;
  write_bytes(item);
  cursor_.write_addr += need;
  // A page reaches the medium as soon as it holds data, so the last written
  // page is always the buffered one and a crash costs at most that page.
  if (buf_dirty_ && buf_page_ != last_written_page_) flush_buffer();
  return addr;
}

std::uint32_t Log::log_boot(std::uint16_t boot_count, std::uint16_t firmware_id) {
  return append(item_type::boot_marker, BootMarker{boot_count, firmware_id}.encode_payload());
}

void Log::set_ack_cursor(std::uint32_t address) {
  if (address < cursor_.ack_cursor) {
    throw Error(Errc::ack_regression, "ack cursor may not move backwards");
  }
  if (address > cursor_.write_addr) {
    throw Error(Errc::out_of_range, "ack cursor beyond write address");
  }
  cursor_.ack_cursor = address;
}

void Log::seal() {
  const std::uint32_t end = cursor_.write_addr;
  for (int round = 0; round < 16; ++round) {
    flush_buffer();
    Overlay src(*this);
    ItemScanner scanner(src, layout_, end, cursor_.write_addr);
    if (auto succ = scanner.next(); succ && succ->address + item_header_size <= durable_boundary()) return;
    // Reach one byte into the next page so that page gets written.
    const auto w = cursor_.write_addr;
    const auto target = layout_.next_page(w);
    const auto len = std::min<std::uint64_t>(max_payload, target - w > 1 ? target - w - 1 : 0);
    append(item_type::padding, Bytes(len, 0x00));
  }
  throw Error(Errc::corrupt_log, "seal did not converge");
}

std::uint32_t Log::durable_boundary() const {
  if (!last_written_page_) return 0;
  return *last_written_page_ * layout_.page_size;
}

std::vector<RawItem> Log::scan(std::uint32_t from) const {
  Overlay src(*this);
  ItemScanner scanner(src, layout_, from, cursor_.write_addr);
  std::vector<RawItem> out;
  while (auto it = scanner.next()) out.push_back(*it);
  return out;
}

std::optional<RawItem> Log::next_uploadable(std::uint32_t from) const {
  Overlay src(*this);
  ItemScanner scanner(src, layout_, from, cursor_.write_addr);
  auto item = scanner.next();
  if (!item) return std::nullopt;
  auto successor = scanner.next();
  if (!successor) return std::nullopt;
  if (successor->address + item_header_size > durable_boundary()) return std::nullopt;
  return item;
}

}  // namespace vh::log
