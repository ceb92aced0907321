#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "outage/core_types.hpp"

namespace outage {

// One passively observed packet.
struct Observation {
  double timestamp = 0.0;
  Address source;

  friend bool operator==(const Observation&, const Observation&) = default;
};

enum class FamilyFilter { V4, V6, Both };

FamilyFilter parse_family_filter(std::string_view text);
bool accepts(FamilyFilter filter, Family family);

struct FamilyCounts {
  std::uint64_t v4 = 0;
  std::uint64_t v6 = 0;
};

struct TraceMeta {
  TimeInterval horizon;
  FamilyCounts counts;  // kept observations, per family
  std::uint64_t parsed_lines = 0;
  std::uint64_t malformed_lines = 0;
  std::uint64_t dropped_out_of_horizon = 0;
  std::uint64_t dropped_by_family = 0;
};

struct StreamOptions {
  bool strict = false;  // abort on the first malformed line instead of counting it
  bool sort = false;    // accept unsorted input and sort per block
  FamilyFilter family = FamilyFilter::Both;
};

using BlockSequences = std::map<BlockId, std::vector<Observation>>;

struct BlockStreams {
  BlockSequences blocks;
  TraceMeta meta;
};

// Parses "<unix_seconds[.frac]>\t<address>[\t...]". Columns after the second
// are ignored. Throws LineError(malformed) carrying `line_no`.
Observation parse_observation_line(std::string_view line, std::size_t line_no = 1);

// Sequential line reader over a plain or gzip-compressed file, or an
// already-open stream. Lines are returned without the terminator.
class LineReader {
 public:
  explicit LineReader(std::istream& in);
  // ".gz" suffix selects zlib decompression. Throws Error(io) if unreadable.
  explicit LineReader(const std::filesystem::path& path);
  ~LineReader();
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  bool next(std::string& line);
  std::size_t line_number() const noexcept { return line_no_; }

  class Impl;

 private:
  std::unique_ptr<Impl> impl_;
  std::size_t line_no_ = 0;
};

// Groups observations by block, keeping per-block time order. Input must be
// globally nondecreasing in time unless options.sort is set. Observations
// outside `horizon` are dropped and counted.
BlockStreams stream_blocks(LineReader& reader, const TimeInterval& horizon,
                           const StreamOptions& options = {});
BlockStreams stream_blocks(std::istream& in, const TimeInterval& horizon,
                           const StreamOptions& options = {});
BlockStreams stream_blocks(const std::filesystem::path& path, const TimeInterval& horizon,
                           const StreamOptions& options = {});

// Writes the observation log format, microsecond timestamps.
void write_observations(std::ostream& out, std::span<const Observation> observations);
std::string format_observation(const Observation& obs);

}  // namespace outage
