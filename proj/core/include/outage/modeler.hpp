#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "outage/core_types.hpp"
#include "outage/ingest.hpp"

namespace outage {

// Candidate bin widths, finest first, and the number of packets a bin must be
// expected to hold before its silence counts as evidence.
struct ParameterLadder {
  std::vector<double> bins{300, 600, 1200, 3600, 7200, 14400, 86400};
  double c_min = 5.0;

  // Throws Error(invalid_argument) unless bins are positive and strictly
  // ascending and c_min > 0.
  void validate() const;
};

// "300,600,1200" -> bins.
std::vector<double> parse_ladder(std::string_view text);

struct BinChoice {
  std::optional<double> bin;
  bool dense = false;

  bool measurable() const noexcept { return bin.has_value(); }
};

// Per-block history: homogeneous Poisson rate over the training window and
// the detection parameters chosen from it.
struct BlockModel {
  BlockId block;
  TimeInterval train_window;
  std::uint64_t n_train = 0;
  double lambda = 0.0;  // packets per second
  std::optional<double> bin;
  bool measurable = false;
  bool dense = false;
  double p_quiet_up = 1.0;  // exp(-lambda * bin); 1 when unmeasurable
};

std::uint64_t count_in_window(std::span<const Observation> obs, const TimeInterval& window);

// Throws Error(zero_length_window) for an empty window.
double estimate_rate(std::span<const Observation> obs, const TimeInterval& train_window);

// Smallest ladder bin whose expected count reaches c_min.
BinChoice select_bin(double lambda, const ParameterLadder& ladder);

BlockModel model_from_rate(const BlockId& block, const TimeInterval& train_window,
                           std::uint64_t n_train, double lambda, const ParameterLadder& ladder);

BlockModel build_model(const BlockId& block, std::span<const Observation> obs,
                       const TimeInterval& train_window, const ParameterLadder& ladder);

using ModelMap = std::map<BlockId, BlockModel>;

// One model per block; unmeasurable blocks are kept with measurable = false.
ModelMap build_models(const BlockSequences& blocks, const TimeInterval& train_window,
                      const ParameterLadder& ladder, unsigned jobs = 1);

struct CoverageRow {
  double bin_seconds = 0.0;
  double measurable_fraction = 0.0;
};

// Fraction of blocks measurable at each ladder bin. Throws Error(no_blocks)
// on an empty map.
std::vector<CoverageRow> coverage_curve(const ModelMap& models, const ParameterLadder& ladder);

// "block,family,lambda,bin,measurable,dense,n_train"
void write_model_csv(std::ostream& out, const ModelMap& models);
// Reads the model CSV back. Train window and p_quiet_up are not stored and
// come back defaulted.
ModelMap read_model_csv(std::istream& in);

// "bin_seconds,measurable_fraction"
void write_coverage_csv(std::ostream& out, std::span<const CoverageRow> rows);

}  // namespace outage
