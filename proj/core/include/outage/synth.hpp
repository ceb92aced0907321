#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "outage/core_types.hpp"
#include "outage/evaluator.hpp"
#include "outage/ingest.hpp"
#include "outage/modeler.hpp"

namespace outage {

inline constexpr std::uint64_t kDefaultSeed = 1;

struct SynthBlock {
  BlockId block;
  double lambda = 0.0;  // packets per second while up
};

struct InjectedOutage {
  BlockId block;
  TimeInterval interval;
};

struct SynthSpec {
  std::vector<SynthBlock> blocks;
  TimeInterval horizon;
  std::vector<InjectedOutage> outages;
  double epsilon_gen = 0.0;  // traffic fraction that survives an outage
  std::uint64_t seed = kDefaultSeed;

  // Throws Error(bad_spec) on duplicate blocks, negative rates, outages
  // outside the horizon or overlapping within a block.
  void validate() const;
};

// Random block population with a log-uniform rate mix and outages injected
// into a fraction of the measurable blocks.
struct PopulationSpec {
  std::size_t count = 500;
  Family family = Family::V4;
  double lambda_min = 1e-3;
  double lambda_max = 10.0;
  TimeInterval horizon{0.0, 172800.0};
  TimeInterval outage_window{86400.0, 172800.0};
  double outage_fraction = 0.2;
  bool dense_only = false;  // only dense blocks receive outages
  // Outage length in units of the block's selected bin, drawn uniformly from
  // [min_bins, max_bins], unless outage_seconds fixes it.
  double min_bins = 2.0;
  double max_bins = 4.0;
  std::optional<double> outage_seconds;
  ParameterLadder ladder;
  double epsilon_gen = 0.0;
  std::uint64_t seed = kDefaultSeed;
};

// The i-th synthetic block key: 10.x.y.0/24 or 2001:db8:xxxx::/48.
BlockId synthetic_block(Family family, std::size_t index);

SynthSpec make_population(const PopulationSpec& population);

// Observations for spec.blocks[index], time-ordered, microsecond timestamps.
// Depends only on (spec, index), so blocks can be generated in any order.
std::vector<Observation> gen_block(const SynthSpec& spec, std::size_t index);

// UP everywhere in the horizon except the injected outages, per block.
std::vector<GroundTruthRecord> ground_truth(const SynthSpec& spec);

struct SynthTrace {
  std::vector<Observation> observations;  // merged, time-ordered
  std::vector<GroundTruthRecord> truth;
};

SynthTrace gen_trace(const SynthSpec& spec, unsigned jobs = 1);

// Keeps only blocks (and their outages) of the requested family.
SynthSpec filter_family(SynthSpec spec, FamilyFilter filter);

// JSON form: {"horizon":[s,e], "seed":n, "epsilon_gen":x,
//   "blocks":[{"block":"192.0.2.0/24","lambda":1.0}],
//   "outages":[{"block":"...","start":s,"end":e}]}
// or {"population":{...PopulationSpec fields...}}; explicit "blocks" and
// "outages" are appended to a population. Throws Error(bad_spec).
SynthSpec parse_synth_spec(std::string_view json_text);
SynthSpec read_synth_spec(std::istream& in);

}  // namespace outage
