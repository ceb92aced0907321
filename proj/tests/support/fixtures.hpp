#pragma once

#include <string_view>
#include <vector>

#include "outage/core_types.hpp"
#include "outage/detector.hpp"
#include "outage/evaluator.hpp"
#include "outage/ingest.hpp"
#include "outage/modeler.hpp"

namespace outage::testing {

inline Observation obs(double t, std::string_view addr = "192.0.2.1") {
  return {t, parse_address(addr)};
}

// One packet every `step` seconds in [start, end), offset by half a step so
// no packet sits on a bin edge.
inline std::vector<Observation> steady(double start, double end, double step = 1.0,
                                       std::string_view addr = "192.0.2.1") {
  std::vector<Observation> out;
  for (double t = start + step / 2; t < end; t += step) out.push_back(obs(t, addr));
  return out;
}

inline std::vector<Observation> without(std::vector<Observation> v, const TimeInterval& gap) {
  std::erase_if(v, [&](const Observation& o) { return gap.contains(o.timestamp); });
  return v;
}

inline BlockModel model(double lambda, std::string_view block = "192.0.2.0/24",
                        const ParameterLadder& ladder = {}) {
  return model_from_rate(parse_block(block), TimeInterval(0, 86400),
                         static_cast<std::uint64_t>(lambda * 86400), lambda, ladder);
}

inline GroundTruthRecord truth(std::string_view block, TruthState state, double s, double e) {
  return {parse_block(block), state, TimeInterval(s, e)};
}

}  // namespace outage::testing

#include <optional>

#include "outage/error.hpp"

namespace outage::testing {

// Code of the outage::Error thrown by fn, or nullopt if it returned.
template <class Fn>
std::optional<Errc> error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace outage::testing
