#include "outage/core_types.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>

namespace outage {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::malformed: return "malformed";
    case Errc::already_aggregated: return "already_aggregated";
    case Errc::zero_length_window: return "zero_length_window";
    case Errc::unsorted: return "unsorted";
    case Errc::not_measurable: return "not_measurable";
    case Errc::insufficient_signal: return "insufficient_signal";
    case Errc::inconsistent_truth: return "inconsistent_truth";
    case Errc::bad_tolerance: return "bad_tolerance";
    case Errc::bad_spec: return "bad_spec";
    case Errc::no_blocks: return "no_blocks";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::io: return "io";
  }
  return "unknown";
}

const char* to_string(Family family) { return family == Family::V4 ? "v4" : "v6"; }

Family parse_family(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "v4" || lower == "ipv4" || lower == "4") return Family::V4;
  if (lower == "v6" || lower == "ipv6" || lower == "6") return Family::V6;
  throw Error(Errc::invalid_argument, "unknown address family '" + std::string(text) + "'");
}

Address Address::v4(const std::array<std::uint8_t, 4>& octets) {
  std::array<std::uint8_t, 16> bytes{};
  std::copy(octets.begin(), octets.end(), bytes.begin());
  return Address(Family::V4, bytes);
}

Address Address::v6(const std::array<std::uint8_t, 16>& octets) {
  return Address(Family::V6, octets);
}

Address parse_address(std::string_view text) {
  // inet_pton needs a terminated buffer; anything longer than a full IPv6
  // literal with an embedded quad is rejected up front.
  char buf[INET6_ADDRSTRLEN + 1];
  if (text.empty() || text.size() >= sizeof(buf)) {
    throw Error(Errc::malformed, "malformed address '" + std::string(text) + "'");
  }
  std::memcpy(buf, text.data(), text.size());
  buf[text.size()] = '\0';

  std::array<std::uint8_t, 4> v4{};
  if (inet_pton(AF_INET, buf, v4.data()) == 1) return Address::v4(v4);

  std::array<std::uint8_t, 16> v6{};
  if (inet_pton(AF_INET6, buf, v6.data()) == 1) {
    static constexpr std::array<std::uint8_t, 12> kMappedPrefix{0, 0, 0, 0, 0,    0,
                                                                0, 0, 0, 0, 0xff, 0xff};
    if (std::equal(kMappedPrefix.begin(), kMappedPrefix.end(), v6.begin())) {
      return Address::v4({v6[12], v6[13], v6[14], v6[15]});
    }
    return Address::v6(v6);
  }
  throw Error(Errc::malformed, "malformed address '" + std::string(text) + "'");
}

std::string to_string(const Address& addr) {
  char buf[INET6_ADDRSTRLEN];
  const int af = addr.family() == Family::V4 ? AF_INET : AF_INET6;
  inet_ntop(af, addr.bytes().data(), buf, sizeof(buf));
  return buf;
}

BlockId::BlockId(Family family, const std::array<std::uint8_t, 16>& bytes, int prefix_len)
    : family_(family), prefix_len_(static_cast<std::uint8_t>(prefix_len)) {
  std::copy_n(bytes.begin(), prefix_len / 8, bytes_.begin());
}

BlockId block_of(const Address& addr) {
  std::array<std::uint8_t, 16> bytes{};
  std::copy(addr.bytes().begin(), addr.bytes().end(), bytes.begin());
  const int len = addr.family() == Family::V4 ? BlockId::kV4BlockBits : BlockId::kV6BlockBits;
  return BlockId(addr.family(), bytes, len);
}

BlockId superblock_of(const BlockId& block) {
  if (block.is_aggregate()) {
    throw Error(Errc::already_aggregated, "block " + to_string(block) + " is already aggregated");
  }
  const int len =
      block.family() == Family::V4 ? BlockId::kV4AggregateBits : BlockId::kV6AggregateBits;
  return BlockId(block.family(), block.bytes_, len);
}

BlockId parse_block(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) {
    throw Error(Errc::malformed, "block '" + std::string(text) + "' has no prefix length");
  }
  int len = 0;
  const auto len_text = text.substr(slash + 1);
  const auto [ptr, ec] = std::from_chars(len_text.data(), len_text.data() + len_text.size(), len);
  if (ec != std::errc() || ptr != len_text.data() + len_text.size()) {
    throw Error(Errc::malformed, "block '" + std::string(text) + "' has a bad prefix length");
  }
  const Address addr = parse_address(text.substr(0, slash));
  const bool ok = addr.family() == Family::V4
                      ? (len == BlockId::kV4BlockBits || len == BlockId::kV4AggregateBits)
                      : (len == BlockId::kV6BlockBits || len == BlockId::kV6AggregateBits);
  if (!ok) {
    throw Error(Errc::malformed,
                "block '" + std::string(text) + "' must be /24 or /16 (IPv4), /48 or /32 (IPv6)");
  }
  const auto bytes = addr.bytes();
  if (std::any_of(bytes.begin() + len / 8, bytes.end(), [](std::uint8_t b) { return b != 0; })) {
    throw Error(Errc::malformed, "block '" + std::string(text) + "' has host bits set");
  }
  std::array<std::uint8_t, 16> raw{};
  std::copy(bytes.begin(), bytes.end(), raw.begin());
  return BlockId(addr.family(), raw, len);
}

std::string to_string(const BlockId& block) {
  std::array<std::uint8_t, 16> bytes{};
  const auto prefix = block.prefix_bytes();
  std::copy(prefix.begin(), prefix.end(), bytes.begin());
  const Address base = block.family() == Family::V4
                           ? Address::v4({bytes[0], bytes[1], bytes[2], bytes[3]})
                           : Address::v6(bytes);
  return to_string(base) + "/" + std::to_string(block.prefix_len());
}

Address address_in_block(const BlockId& block, std::uint64_t host_bits) {
  std::array<std::uint8_t, 16> bytes{};
  const auto prefix = block.prefix_bytes();
  std::copy(prefix.begin(), prefix.end(), bytes.begin());
  const std::size_t total = block.family() == Family::V4 ? 4 : 16;
  // Fill host octets from the least significant end.
  for (std::size_t i = total; i > prefix.size(); --i) {
    bytes[i - 1] = static_cast<std::uint8_t>(host_bits & 0xff);
    host_bits >>= 8;
  }
  if (block.family() == Family::V4) return Address::v4({bytes[0], bytes[1], bytes[2], bytes[3]});
  return Address::v6(bytes);
}

TimeInterval::TimeInterval(double start, double end) : start_(start), end_(end) {
  if (!std::isfinite(start) || !std::isfinite(end) || start > end) {
    throw Error(Errc::invalid_argument,
                "invalid interval [" + std::to_string(start) + ", " + std::to_string(end) + ")");
  }
}

std::optional<TimeInterval> intersect(const TimeInterval& a, const TimeInterval& b) {
  const double s = std::max(a.start(), b.start());
  const double e = std::min(a.end(), b.end());
  if (!(s < e)) return std::nullopt;
  return TimeInterval(s, e);
}

std::vector<TimeInterval> merge_intervals(std::vector<TimeInterval> intervals) {
  std::erase_if(intervals, [](const TimeInterval& i) { return i.empty(); });
  std::sort(intervals.begin(), intervals.end(), [](const TimeInterval& a, const TimeInterval& b) {
    return a.start() < b.start() || (a.start() == b.start() && a.end() < b.end());
  });
  std::vector<TimeInterval> out;
  for (const auto& iv : intervals) {
    if (!out.empty() && iv.start() <= out.back().end()) {
      out.back() = TimeInterval(out.back().start(), std::max(out.back().end(), iv.end()));
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

double union_measure(std::vector<TimeInterval> intervals) {
  double total = 0.0;
  for (const auto& iv : merge_intervals(std::move(intervals))) total += iv.measure();
  return total;
}

TimeInterval parse_window(std::string_view text) {
  const auto colon = text.find(':');
  auto parse = [&](std::string_view part) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || ec != std::errc() || ptr != part.data() + part.size() || !std::isfinite(v)) {
      throw Error(Errc::malformed, "bad window '" + std::string(text) + "', expected start:end");
    }
    return v;
  };
  if (colon == std::string_view::npos) {
    throw Error(Errc::malformed, "bad window '" + std::string(text) + "', expected start:end");
  }
  const double start = parse(text.substr(0, colon));
  const double end = parse(text.substr(colon + 1));
  if (!(start < end)) {
    throw Error(Errc::malformed, "window '" + std::string(text) + "' must have start < end");
  }
  return TimeInterval(start, end);
}

std::string to_string(const TimeInterval& interval) {
  return "[" + std::to_string(interval.start()) + ", " + std::to_string(interval.end()) + ")";
}

}  // namespace outage

std::size_t std::hash<outage::BlockId>::operator()(const outage::BlockId& block) const noexcept {
  std::size_t h = static_cast<std::size_t>(block.family()) * 31 + block.prefix_len();
  for (const auto b : block.prefix_bytes()) h = h * 131 + b;
  return h;
}
