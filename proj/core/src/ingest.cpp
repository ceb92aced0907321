#include "outage/ingest.hpp"

#include <fmt/format.h>
#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace outage {

FamilyFilter parse_family_filter(std::string_view text) {
  if (text == "both" || text == "all") return FamilyFilter::Both;
  return parse_family(text) == Family::V4 ? FamilyFilter::V4 : FamilyFilter::V6;
}

bool accepts(FamilyFilter filter, Family family) {
  switch (filter) {
    case FamilyFilter::V4: return family == Family::V4;
    case FamilyFilter::V6: return family == Family::V6;
    case FamilyFilter::Both: return true;
  }
  return true;
}

Observation parse_observation_line(std::string_view line, std::size_t line_no) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto tab = line.find('\t');
  if (tab == std::string_view::npos) {
    throw LineError(Errc::malformed, line_no, "expected <timestamp>\\t<address>");
  }
  const auto ts_text = line.substr(0, tab);
  auto rest = line.substr(tab + 1);
  const auto addr_text = rest.substr(0, rest.find('\t'));

  double ts = 0.0;
  const auto [ptr, ec] = std::from_chars(ts_text.data(), ts_text.data() + ts_text.size(), ts);
  if (ts_text.empty() || ec != std::errc() || ptr != ts_text.data() + ts_text.size() ||
      !std::isfinite(ts) || ts < 0.0) {
    throw LineError(Errc::malformed, line_no, "bad timestamp '" + std::string(ts_text) + "'");
  }
  try {
    return Observation{ts, parse_address(addr_text)};
  } catch (const Error& e) {
    throw LineError(Errc::malformed, line_no, e.what());
  }
}

class LineReader::Impl {
 public:
  virtual ~Impl() = default;
  virtual bool next(std::string& line) = 0;
};

namespace {

class StreamImpl final : public LineReader::Impl {
 public:
  explicit StreamImpl(std::istream& in) : in_(&in) {}
  bool next(std::string& line) override { return static_cast<bool>(std::getline(*in_, line)); }

 private:
  std::istream* in_;
};

class FileImpl final : public LineReader::Impl {
 public:
  explicit FileImpl(const std::filesystem::path& path) : file_(path) {
    if (!file_) throw Error(Errc::io, "cannot open " + path.string());
  }
  bool next(std::string& line) override { return static_cast<bool>(std::getline(file_, line)); }

 private:
  std::ifstream file_;
};

class GzipImpl final : public LineReader::Impl {
 public:
  explicit GzipImpl(const std::filesystem::path& path)
      : path_(path.string()), file_(gzopen(path_.c_str(), "rb")) {
    if (file_ == nullptr) throw Error(Errc::io, "cannot open " + path_);
    gzbuffer(file_, 1 << 16);
  }
  ~GzipImpl() override { gzclose(file_); }
  GzipImpl(const GzipImpl&) = delete;
  GzipImpl& operator=(const GzipImpl&) = delete;

  bool next(std::string& line) override {
    line.clear();
    char buf[4096];
    while (gzgets(file_, buf, sizeof(buf)) != nullptr) {
      line.append(buf);
      if (!line.empty() && line.back() == '\n') {
        line.pop_back();
        return true;
      }
    }
    int err = Z_OK;
    const char* msg = gzerror(file_, &err);
    if (err != Z_OK && err != Z_STREAM_END) throw Error(Errc::io, path_ + ": " + msg);
    return !line.empty();
  }

 private:
  std::string path_;
  gzFile file_;
};

}  // namespace

LineReader::LineReader(std::istream& in) : impl_(std::make_unique<StreamImpl>(in)) {}

LineReader::LineReader(const std::filesystem::path& path) {
  if (path.extension() == ".gz") {
    impl_ = std::make_unique<GzipImpl>(path);
  } else {
    impl_ = std::make_unique<FileImpl>(path);
  }
}

LineReader::~LineReader() = default;

bool LineReader::next(std::string& line) {
  if (!impl_->next(line)) return false;
  ++line_no_;
  return true;
}

BlockStreams stream_blocks(LineReader& reader, const TimeInterval& horizon,
                           const StreamOptions& options) {
  BlockStreams result;
  result.meta.horizon = horizon;
  auto& meta = result.meta;

  std::string line;
  double previous = -1.0;
  while (reader.next(line)) {
    if (line.empty() || line == "\r") continue;
    Observation obs;
    try {
      obs = parse_observation_line(line, reader.line_number());
    } catch (const LineError&) {
      if (options.strict) throw;
      ++meta.malformed_lines;
      continue;
    }
    ++meta.parsed_lines;
    if (!options.sort && obs.timestamp < previous) {
      throw LineError(Errc::unsorted, reader.line_number(),
                      fmt::format("unsorted input: {:.6f} follows {:.6f}", obs.timestamp, previous));
    }
    previous = std::max(previous, obs.timestamp);

    if (!accepts(options.family, obs.source.family())) {
      ++meta.dropped_by_family;
      continue;
    }
    if (!horizon.contains(obs.timestamp)) {
      ++meta.dropped_out_of_horizon;
      continue;
    }
    (obs.source.family() == Family::V4 ? meta.counts.v4 : meta.counts.v6) += 1;
    result.blocks[block_of(obs.source)].push_back(obs);
  }

  if (options.sort) {
    for (auto& [block, seq] : result.blocks) {
      std::stable_sort(seq.begin(), seq.end(), [](const Observation& a, const Observation& b) {
        return a.timestamp < b.timestamp;
      });
    }
  }
  return result;
}

BlockStreams stream_blocks(std::istream& in, const TimeInterval& horizon,
                           const StreamOptions& options) {
  LineReader reader(in);
  return stream_blocks(reader, horizon, options);
}

BlockStreams stream_blocks(const std::filesystem::path& path, const TimeInterval& horizon,
                           const StreamOptions& options) {
  LineReader reader(path);
  return stream_blocks(reader, horizon, options);
}

std::string format_observation(const Observation& obs) {
  return fmt::format("{:.6f}\t{}", obs.timestamp, to_string(obs.source));
}

void write_observations(std::ostream& out, std::span<const Observation> observations) {
  fmt::memory_buffer buf;
  for (const auto& obs : observations) {
    fmt::format_to(std::back_inserter(buf), "{:.6f}\t{}\n", obs.timestamp, to_string(obs.source));
    if (buf.size() > (1 << 20)) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

}  // namespace outage
