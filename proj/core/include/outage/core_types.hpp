#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "outage/error.hpp"

namespace outage {

enum class Family : std::uint8_t { V4, V6 };

const char* to_string(Family family);

// "v4" / "v6", case-insensitive. Throws Error(invalid_argument).
Family parse_family(std::string_view text);

// An IPv4 or IPv6 host address held in network byte order. IPv4 uses the
// first four octets; the rest stay zero so comparisons are well defined.
class Address {
 public:
  Address() = default;  // 0.0.0.0
  static Address v4(const std::array<std::uint8_t, 4>& octets);
  static Address v6(const std::array<std::uint8_t, 16>& octets);

  Family family() const noexcept { return family_; }
  std::size_t size() const noexcept { return family_ == Family::V4 ? 4 : 16; }
  std::span<const std::uint8_t> bytes() const noexcept { return {bytes_.data(), size()}; }

  friend auto operator<=>(const Address&, const Address&) = default;

 private:
  Address(Family family, const std::array<std::uint8_t, 16>& bytes)
      : family_(family), bytes_(bytes) {}

  Family family_ = Family::V4;
  std::array<std::uint8_t, 16> bytes_{};
};

// Parses dotted-quad IPv4 or RFC 4291 IPv6 text. IPv4-mapped IPv6
// (::ffff:a.b.c.d) normalizes to a V4 address.
// Throws Error(malformed) naming the offending input.
Address parse_address(std::string_view text);

std::string to_string(const Address& addr);

// Aggregation key. A detection block is a /24 (V4) or /48 (V6); an aggregate
// key is the coarser /16 or /32 that groups sibling blocks. Host bits past
// the prefix are always zero.
class BlockId {
 public:
  static constexpr int kV4BlockBits = 24;
  static constexpr int kV6BlockBits = 48;
  static constexpr int kV4AggregateBits = 16;
  static constexpr int kV6AggregateBits = 32;

  // Zero-length placeholder; only useful as a default member value.
  BlockId() = default;

  Family family() const noexcept { return family_; }
  int prefix_len() const noexcept { return prefix_len_; }
  bool is_aggregate() const noexcept {
    return prefix_len_ == (family_ == Family::V4 ? kV4AggregateBits : kV6AggregateBits);
  }
  std::span<const std::uint8_t> prefix_bytes() const noexcept {
    return {bytes_.data(), static_cast<std::size_t>(prefix_len_ / 8)};
  }

  // Ordering: family, then prefix bytes lexicographically, then length.
  friend auto operator<=>(const BlockId&, const BlockId&) = default;

 private:
  friend BlockId block_of(const Address&);
  friend BlockId superblock_of(const BlockId&);
  friend BlockId parse_block(std::string_view);

  BlockId(Family family, const std::array<std::uint8_t, 16>& bytes, int prefix_len);

  Family family_ = Family::V4;
  std::array<std::uint8_t, 16> bytes_{};
  std::uint8_t prefix_len_ = 0;
};

BlockId block_of(const Address& addr);

// /24 -> /16, /48 -> /32. Throws Error(already_aggregated) on an aggregate key.
BlockId superblock_of(const BlockId& block);

// Parses "192.0.2.0/24" style text. Only /24, /16, /48 and /32 are accepted
// and host bits must be zero.
BlockId parse_block(std::string_view text);

std::string to_string(const BlockId& block);

// Address inside `block` whose host part is taken from the low bits of
// `host_bits`. Only meaningful for detection blocks.
Address address_in_block(const BlockId& block, std::uint64_t host_bits);

// Half-open [start, end) in seconds since the epoch. start == end is the
// empty interval; operations that need positive length check for it.
class TimeInterval {
 public:
  TimeInterval() = default;
  // Throws Error(invalid_argument) unless both ends are finite and start <= end.
  TimeInterval(double start, double end);

  double start() const noexcept { return start_; }
  double end() const noexcept { return end_; }
  double measure() const noexcept { return end_ - start_; }
  bool empty() const noexcept { return !(start_ < end_); }
  bool contains(double t) const noexcept { return start_ <= t && t < end_; }
  bool overlaps(const TimeInterval& other) const noexcept {
    return start_ < other.end_ && other.start_ < end_;
  }

  friend bool operator==(const TimeInterval&, const TimeInterval&) = default;

 private:
  double start_ = 0.0;
  double end_ = 0.0;
};

std::optional<TimeInterval> intersect(const TimeInterval& a, const TimeInterval& b);

// Sorts and unions overlapping or touching intervals; empty ones are dropped.
std::vector<TimeInterval> merge_intervals(std::vector<TimeInterval> intervals);

// Total measure of the union.
double union_measure(std::vector<TimeInterval> intervals);

// Parses "start:end" epoch-second ranges.
TimeInterval parse_window(std::string_view text);

std::string to_string(const TimeInterval& interval);

}  // namespace outage

template <>
struct std::hash<outage::BlockId> {
  std::size_t operator()(const outage::BlockId& block) const noexcept;
};
