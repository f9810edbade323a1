#include "vh/media.hpp"

#include <algorithm>
#include <bit>

#include "vh/error.hpp"
#include "vh/rng.hpp"

namespace vh::media {

void MediaGeometry::validate() const {
  if (!std::has_single_bit(page_size) || !std::has_single_bit(sector_size)) {
    throw Error(Errc::validation, "page and sector sizes must be powers of two");
  }
  if (sector_size < page_size || sector_size % page_size != 0) {
    throw Error(Errc::validation, "sector size must be a multiple of the page size");
  }
  if (sector_count == 0) throw Error(Errc::validation, "sector count must be positive");
  if (capacity() > 0xFFFFFFFFULL) throw Error(Errc::validation, "capacity exceeds 32-bit addressing");
}

MediaGeometry MediaGeometry::nor_8mb() { return {256, 4096, 2048}; }

MediaGeometry MediaGeometry::sd(std::uint32_t sector_count) { return {512, 65536, sector_count}; }

Media::Media(MediaGeometry geometry) : geometry_(geometry) {
  geometry_.validate();
  bytes_.assign(geometry_.capacity(), 0xFF);
}

void Media::page_write(std::uint32_t page_index, ByteSpan data) {
  if (failed_) throw Error(Errc::device_failed, "write to failed device");
  if (page_index >= geometry_.page_count()) {
    throw Error(Errc::out_of_range, "page index " + std::to_string(page_index) + " out of range");
  }
  if (data.size() != geometry_.page_size) {
    throw Error(Errc::out_of_range, "page write length must equal the page size");
  }
  ++write_count_;
  std::uint8_t* page = bytes_.data() + std::uint64_t{page_index} * geometry_.page_size;

  if (fault_plan_ && fault_plan_->write_ordinal == write_count_) {
    Rng rng(mix_seed(fault_plan_->seed, write_count_));
    const auto prefix = static_cast<std::uint32_t>(rng.below(geometry_.page_size));
    for (std::uint32_t i = 0; i < prefix; ++i) page[i] &= data[i];
    // Tail bits are cleared only partially; bits the write did not intend to
    // clear stay as they were.
    for (std::uint32_t i = prefix; i < geometry_.page_size; ++i) {
      page[i] &= static_cast<std::uint8_t>(data[i] | rng.next());
    }
    last_fault_ = FaultRecord{page_index, prefix, write_count_};
    failed_ = true;
    return;
  }
  for (std::uint32_t i = 0; i < geometry_.page_size; ++i) page[i] &= data[i];
}

ByteSpan Media::view(std::uint64_t offset, std::size_t length) const {
  if (offset > bytes_.size() || length > bytes_.size() - offset) {
    throw Error(Errc::out_of_range, "read beyond media capacity");
  }
  return ByteSpan(bytes_).subspan(offset, length);
}

Bytes Media::read(std::uint64_t offset, std::size_t length) const {
  auto v = view(offset, length);
  return Bytes(v.begin(), v.end());
}

bool Media::is_sector_erased(std::uint32_t sector_index) const {
  if (sector_index >= geometry_.sector_count) {
    throw Error(Errc::out_of_range, "sector index out of range");
  }
  auto s = view(std::uint64_t{sector_index} * geometry_.sector_size, geometry_.sector_size);
  return std::all_of(s.begin(), s.end(), [](std::uint8_t b) { return b == 0xFF; });
}

void Media::erase_sector(std::uint32_t sector_index) {
  if (failed_) throw Error(Errc::device_failed, "erase on failed device");
  if (sector_index >= geometry_.sector_count) {
    throw Error(Errc::out_of_range, "sector index out of range");
  }
  auto begin = bytes_.begin() + std::int64_t{sector_index} * geometry_.sector_size;
  std::fill(begin, begin + geometry_.sector_size, 0xFF);
}

void Media::power_cycle() {
  failed_ = false;
  fault_plan_.reset();
}

void Media::save(const std::string& path) const { write_file(path, bytes_); }

Media Media::load(const std::string& path, MediaGeometry geometry) {
  return from_image(read_file(path), geometry);
}

Media Media::from_image(Bytes image, MediaGeometry geometry) {
  if (image.empty() || image.size() % geometry.sector_size != 0) {
    throw Error(Errc::malformed, "image size is not a whole number of sectors");
  }
  geometry.sector_count = static_cast<std::uint32_t>(image.size() / geometry.sector_size);
  Media m(geometry);
  m.bytes_ = std::move(image);
  return m;
}

}  // namespace vh::media
