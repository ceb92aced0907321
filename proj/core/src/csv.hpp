#pragma once

// Minimal comma-separated reader for the tool's own CSV formats. Fields never
// contain commas or quotes, so no quoting rules are implemented.

#include <charconv>
#include <cmath>
#include <initializer_list>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "outage/error.hpp"

namespace outage::detail {

inline std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = text.find(sep, pos);
    out.push_back(text.substr(pos, next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

inline double parse_number(std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw Error(Errc::malformed, "bad number '" + std::string(text) + "'");
  }
  return v;
}

class CsvReader {
 public:
  CsvReader(std::istream& in, std::initializer_list<const char*> required) : in_(in) {
    std::string header;
    if (!std::getline(in_, header)) throw LineError(Errc::malformed, 1, "missing CSV header");
    line_no_ = 1;
    strip(header);
    const auto names = split(header, ',');
    for (std::size_t i = 0; i < names.size(); ++i) columns_[std::string(names[i])] = i;
    for (const char* name : required) {
      if (!columns_.count(name)) {
        throw LineError(Errc::malformed, 1, std::string("missing CSV column '") + name + "'");
      }
    }
  }

  bool next() {
    while (std::getline(in_, line_)) {
      ++line_no_;
      strip(line_);
      if (line_.empty()) continue;
      fields_ = split(line_, ',');
      if (fields_.size() < columns_.size()) {
        throw LineError(Errc::malformed, line_no_, "expected " + std::to_string(columns_.size()) +
                                                       " fields, got " +
                                                       std::to_string(fields_.size()));
      }
      return true;
    }
    return false;
  }

  bool has(const std::string& name) const { return columns_.count(name) != 0; }
  std::string_view field(const std::string& name) const { return fields_[columns_.at(name)]; }
  double number(const std::string& name) const {
    return wrap([&] { return parse_number(field(name)); });
  }
  bool flag(const std::string& name) const {
    const auto f = field(name);
    if (f == "1" || f == "true") return true;
    if (f == "0" || f == "false" || f.empty()) return false;
    throw LineError(Errc::malformed, line_no_, "bad flag '" + std::string(f) + "'");
  }
  std::size_t line_number() const { return line_no_; }

  // Re-throws library errors raised while converting a field as LineErrors.
  template <class Fn>
  auto wrap(Fn&& fn) const -> decltype(fn()) {
    try {
      return fn();
    } catch (const LineError&) {
      throw;
    } catch (const Error& e) {
      throw LineError(e.code(), line_no_, e.what());
    }
  }

 private:
  static void strip(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }

  std::istream& in_;
  std::map<std::string, std::size_t> columns_;
  std::string line_;
  std::vector<std::string_view> fields_;
  std::size_t line_no_ = 0;
};

}  // namespace outage::detail
