#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "outage/core_types.hpp"
#include "outage/ingest.hpp"
#include "outage/modeler.hpp"

namespace outage {

// Tunables for belief tracking. The likelihood model is Poisson(k; lambda*bin)
// while up and Poisson(k; epsilon*lambda*bin) while down.
struct DetectorParams {
  double epsilon = 0.01;  // residual traffic fraction while down
  double b_floor = 0.01;
  double b_ceil = 0.99;
  double t_down = 0.1;
  double t_up = 0.9;
  double prior_up = 0.9;

  // Boundary refinement places the start this far after the last packet:
  // the guard_quantile point of the up-state inter-arrival distribution,
  // capped at one bin.
  double guard_quantile = 0.99;

  // Exact-timestamp silence detection. A silence of length g is an outage
  // when the posterior odds of an outage onset inside it, with onsets a
  // Poisson process of outage_prior_rate per second, pass the t_down
  // threshold and g >= min_silence.
  bool exact_silences = true;
  double min_silence = 300.0;
  double outage_prior_rate = 1e-7;

  // Throws Error(invalid_argument) on inconsistent values.
  void validate() const;
};

enum class Status { Unknown, Up, Down };

const char* to_string(Status status);

struct BeliefState {
  double belief = 0.9;  // P(up | evidence so far)
  Status status = Status::Unknown;
  std::optional<double> last_packet;
};

BeliefState initial_belief(const DetectorParams& params);

// Unclamped Bayes posterior P(up | k) with Poisson likelihoods of means
// mu_up and mu_down, computed in log space. nullopt when both likelihoods
// are exactly zero.
std::optional<double> posterior_up(double belief, std::uint64_t k, double mu_up, double mu_down);

// One bin of evidence: k packets in `delta` seconds at rate `lambda`. The
// result is clamped to [b_floor, b_ceil]. With lambda == 0, or when neither
// hypothesis can produce k, the belief is returned unchanged.
double belief_update(double belief, std::uint64_t k, double lambda, double delta,
                     const DetectorParams& params);

// belief_update plus the hysteresis state machine.
void advance(BeliefState& state, std::uint64_t k, double lambda, double delta,
             const DetectorParams& params);

enum class Granularity { Block, Aggregate };

const char* to_string(Granularity granularity);

struct OutageEvent {
  BlockId block;
  TimeInterval interval;
  double confidence = 1.0;  // 1 - belief when the outage was declared
  int corroboration = 0;    // sibling blocks with an overlapping outage
  bool open_ended = false;  // trace ended while down
  Granularity granularity = Granularity::Block;
};

// Bin-granular detection over `horizon`, bins anchored at horizon.start() and
// a trailing partial bin evaluated at its own width. `obs` must be
// time-ordered. Throws Error(not_measurable) for an unmeasurable model.
std::vector<OutageEvent> detect_block(std::span<const Observation> obs, const BlockModel& model,
                                      const DetectorParams& params, const TimeInterval& horizon);

// Outages found from exact inter-arrival silences. Each event starts where
// the silence became decisive and ends at the next packet.
std::vector<OutageEvent> detect_silences(std::span<const Observation> obs,
                                         const BlockModel& model, const DetectorParams& params,
                                         const TimeInterval& horizon);

// Snaps an event to the longest packet-free gap spanning it: the start moves
// to t_last + guard (never past the bin-granular start when the gap began
// before it, never before horizon.start()) and the end to the first packet
// after the gap, or horizon.end() when there is none.
OutageEvent refine_boundaries(const OutageEvent& event, std::span<const Observation> obs,
                              const BlockModel& model, const DetectorParams& params,
                              const TimeInterval& horizon);

// Unions overlapping or touching events of the same block.
std::vector<OutageEvent> merge_events(std::vector<OutageEvent> events);

// Full per-block pass: bins, silences, merge, refine.
std::vector<OutageEvent> detect_block_outages(std::span<const Observation> obs,
                                              const BlockModel& model,
                                              const DetectorParams& params,
                                              const TimeInterval& horizon);

// Sets corroboration on block-granular events to the number of distinct
// sibling blocks (same superblock, same family) with an overlapping event.
void corroborate(std::span<OutageEvent> events);

struct AggregateMember {
  const BlockModel* model = nullptr;
  std::span<const Observation> obs;
};

// Pools member blocks under their shared superblock key: merged traffic,
// summed rate, bin chosen from the ladder. Throws Error(insufficient_signal)
// if the pool is still unmeasurable.
std::vector<OutageEvent> detect_aggregate(std::span<const AggregateMember> members,
                                          const ParameterLadder& ladder,
                                          const DetectorParams& params,
                                          const TimeInterval& horizon);

struct DetectionConfig {
  TimeInterval train;
  TimeInterval detect;
  ParameterLadder ladder;
  DetectorParams params;
  bool aggregate = false;  // fall back to superblocks for unmeasurable blocks
  unsigned jobs = 1;
};

struct DetectionResult {
  ModelMap models;
  std::vector<OutageEvent> events;  // sorted by (block, start)
  std::size_t blocks_scanned = 0;
  std::size_t aggregates_scanned = 0;
  std::size_t aggregates_insufficient = 0;
};

DetectionResult run_detection(const BlockSequences& blocks, const DetectionConfig& config);

// "block,family,start,end,confidence,corroboration,open_ended,granularity"
void write_events_csv(std::ostream& out, std::span<const OutageEvent> events);
// One JSON object per line with the same fields.
void write_events_jsonl(std::ostream& out, std::span<const OutageEvent> events);
std::vector<OutageEvent> read_events_csv(std::istream& in);

}  // namespace outage
