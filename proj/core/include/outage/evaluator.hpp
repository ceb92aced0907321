#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "outage/core_types.hpp"
#include "outage/detector.hpp"
#include "outage/ingest.hpp"

namespace outage {

enum class TruthState { Up, Down };

struct GroundTruthRecord {
  BlockId block;
  TruthState state = TruthState::Up;
  TimeInterval interval;
};

// Accumulators named after the ground-truth comparison:
//   ta  predicted up,   truly up
//   fa  predicted up,   truly down  (false availability)
//   fo  predicted down, truly up    (false outage)
//   to  predicted down, truly down
// Seconds in time mode, counts in event mode.
struct ConfusionMatrix {
  double ta = 0.0;
  double fa = 0.0;
  double fo = 0.0;
  double to = 0.0;

  double total() const noexcept { return ta + fa + fo + to; }
  ConfusionMatrix& operator+=(const ConfusionMatrix& other) noexcept;
  friend ConfusionMatrix operator+(ConfusionMatrix a, const ConfusionMatrix& b) noexcept {
    return a += b;
  }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// Availability-oriented metrics with TP = ta, FP = fa, FN = fo, TN = to.
// A metric with a zero denominator is nullopt.
struct Metrics {
  std::optional<double> precision;  // ta / (ta + fa)
  std::optional<double> recall;     // ta / (ta + fo)
  std::optional<double> tnr;        // to / (to + fa)
};

Metrics metrics(const ConfusionMatrix& m);

// The same matrix read from the outage side.
struct OutageMetrics {
  std::optional<double> precision;  // to / (to + fo): reported outages that are real
  std::optional<double> recall;     // to / (to + fa): real outages that were reported
};

OutageMetrics outage_metrics(const ConfusionMatrix& m);

// Predicted DOWN intervals per monitored block. A key with an empty vector
// is a block that was watched and never went down.
using Predictions = std::map<BlockId, std::vector<TimeInterval>>;

// Truth records grouped by block, each list sorted by start. Throws
// Error(inconsistent_truth) on overlapping records within one block.
using TruthIndex = std::map<BlockId, std::vector<GroundTruthRecord>>;
TruthIndex index_truth(std::span<const GroundTruthRecord> truth);

// Time-weighted confusion over blocks present in both inputs, exact to the
// interval arithmetic. Truth gaps are unobserved and not scored.
ConfusionMatrix time_confusion(const Predictions& pred, std::span<const GroundTruthRecord> truth,
                               const TimeInterval& horizon);

struct EventMatch {
  BlockId block;
  TimeInterval predicted;
  TimeInterval truth;
};

// Greedy one-to-one matching in time order. A pair matches when the
// intervals overlap or both boundary gaps are within tau.
std::vector<EventMatch> match_events(const Predictions& pred, const Predictions& truth_events,
                                     double tau);

struct EventOptions {
  double tau = 180.0;
  // Width of the quiet bins counted into ta; defaults to tau.
  std::optional<double> quiet_bin;
};

// Event-count confusion: matched pairs -> to, unmatched predictions -> fo,
// unmatched truth outages -> fa, and ta counts jointly observed quiet bins
// (fully observed, no event on either side). Throws Error(bad_tolerance)
// if tau <= 0.
ConfusionMatrix event_confusion(const Predictions& pred, std::span<const GroundTruthRecord> truth,
                                const TimeInterval& horizon, const EventOptions& options = {});

struct OutageShare {
  std::optional<double> duration_share;  // short-band seconds / long seconds
  double block_fraction = 0.0;           // blocks with a short-band event / all blocks
  double short_seconds = 0.0;
  double long_seconds = 0.0;
};

// How much outage time events in [short_threshold, long_threshold) add on
// top of those at or above long_threshold.
OutageShare added_outage_share(std::span<const OutageEvent> events, std::size_t total_blocks,
                               double short_threshold = 300.0, double long_threshold = 660.0);

// Block-granular events to predictions. `monitored` blocks get an entry even
// without events.
Predictions predictions_from_events(std::span<const OutageEvent> events,
                                    std::span<const BlockId> monitored = {});

// DOWN records to per-block outage intervals.
Predictions truth_outages(std::span<const GroundTruthRecord> truth);

// "block,state,start,end"
void write_truth_csv(std::ostream& out, std::span<const GroundTruthRecord> truth);
std::vector<GroundTruthRecord> read_truth_csv(std::istream& in);

enum class EvalMode { Time, Events };

struct EvalReport {
  EvalMode mode = EvalMode::Time;
  ConfusionMatrix matrix;
  TimeInterval horizon;
  std::size_t blocks_scored = 0;
  double tau = 0.0;
};

std::string report_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace outage
