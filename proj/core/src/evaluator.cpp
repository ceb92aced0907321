#include "outage/evaluator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <set>

#include "csv.hpp"

namespace outage {

namespace {

std::optional<double> ratio(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}

bool starts_before(const TimeInterval& a, const TimeInterval& b) {
  return a.start() < b.start() || (a.start() == b.start() && a.end() < b.end());
}

std::vector<TimeInterval> clipped(const std::vector<TimeInterval>& intervals,
                                  const TimeInterval& horizon) {
  std::vector<TimeInterval> out;
  for (const auto& iv : intervals) {
    if (auto c = intersect(iv, horizon)) out.push_back(*c);
  }
  return out;
}

// Measure of `window` covered by `merged` (sorted, disjoint).
double covered(const TimeInterval& window, const std::vector<TimeInterval>& merged) {
  const auto first = std::lower_bound(
      merged.begin(), merged.end(), window.start(),
      [](const TimeInterval& iv, double t) { return iv.end() <= t; });
  double total = 0.0;
  for (auto it = first; it != merged.end() && it->start() < window.end(); ++it) {
    if (auto c = intersect(*it, window)) total += c->measure();
  }
  return total;
}

bool events_match(const TimeInterval& p, const TimeInterval& t, double tau) {
  if (p.overlaps(t)) return true;
  return std::abs(p.start() - t.start()) <= tau && std::abs(p.end() - t.end()) <= tau;
}

nlohmann::ordered_json count_json(double v) {
  if (v == std::floor(v) && std::abs(v) < 9.0e15) return static_cast<std::int64_t>(v);
  return v;
}

nlohmann::ordered_json metric_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

std::string metric_text(const std::optional<double>& v) {
  return v ? fmt::format("{:.5f}", *v) : std::string("n/a");
}

}  // namespace

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) noexcept {
  ta += other.ta;
  fa += other.fa;
  fo += other.fo;
  to += other.to;
  return *this;
}

Metrics metrics(const ConfusionMatrix& m) {
  return {ratio(m.ta, m.ta + m.fa), ratio(m.ta, m.ta + m.fo), ratio(m.to, m.to + m.fa)};
}

OutageMetrics outage_metrics(const ConfusionMatrix& m) {
  return {ratio(m.to, m.to + m.fo), ratio(m.to, m.to + m.fa)};
}

TruthIndex index_truth(std::span<const GroundTruthRecord> truth) {
  TruthIndex index;
  for (const auto& rec : truth) index[rec.block].push_back(rec);
  for (auto& [block, recs] : index) {
    std::sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) {
      return starts_before(a.interval, b.interval);
    });
    for (std::size_t i = 1; i < recs.size(); ++i) {
      if (recs[i].interval.start() < recs[i - 1].interval.end()) {
        throw Error(Errc::inconsistent_truth,
                    "inconsistent ground truth: overlapping records for " + to_string(block) +
                        " at " + to_string(recs[i].interval));
      }
    }
  }
  return index;
}

ConfusionMatrix time_confusion(const Predictions& pred, std::span<const GroundTruthRecord> truth,
                               const TimeInterval& horizon) {
  ConfusionMatrix m;
  for (const auto& [block, records] : index_truth(truth)) {
    const auto p = pred.find(block);
    if (p == pred.end()) continue;
    const auto down = merge_intervals(clipped(p->second, horizon));
    for (const auto& rec : records) {
      const auto window = intersect(rec.interval, horizon);
      if (!window) continue;
      const double len = window->measure();
      const double pred_down = covered(*window, down);
      if (rec.state == TruthState::Up) {
        m.fo += pred_down;
        m.ta += len - pred_down;
      } else {
        m.to += pred_down;
        m.fa += len - pred_down;
      }
    }
  }
  return m;
}

std::vector<EventMatch> match_events(const Predictions& pred, const Predictions& truth_events,
                                     double tau) {
  if (!(tau > 0.0)) throw Error(Errc::bad_tolerance, "matching tolerance must be positive");
  std::vector<EventMatch> matches;
  for (const auto& [block, predicted] : pred) {
    const auto t = truth_events.find(block);
    if (t == truth_events.end()) continue;
    auto p_sorted = predicted;
    auto t_sorted = t->second;
    std::sort(p_sorted.begin(), p_sorted.end(), starts_before);
    std::sort(t_sorted.begin(), t_sorted.end(), starts_before);
    std::vector<char> used(t_sorted.size(), 0);
    for (const auto& p : p_sorted) {
      for (std::size_t j = 0; j < t_sorted.size(); ++j) {
        if (used[j] || !events_match(p, t_sorted[j], tau)) continue;
        used[j] = 1;
        matches.push_back({block, p, t_sorted[j]});
        break;
      }
    }
  }
  return matches;
}

ConfusionMatrix event_confusion(const Predictions& pred, std::span<const GroundTruthRecord> truth,
                                const TimeInterval& horizon, const EventOptions& options) {
  if (!(options.tau > 0.0)) throw Error(Errc::bad_tolerance, "matching tolerance must be positive");
  const double quiet_bin = options.quiet_bin.value_or(options.tau);
  if (!(quiet_bin > 0.0)) throw Error(Errc::bad_tolerance, "quiet bin width must be positive");

  const auto index = index_truth(truth);
  Predictions scored_pred;
  Predictions scored_truth;
  std::map<BlockId, std::vector<TimeInterval>> coverage;
  for (const auto& [block, records] : index) {
    const auto p = pred.find(block);
    if (p == pred.end()) continue;
    scored_pred[block] = clipped(p->second, horizon);
    auto& downs = scored_truth[block];
    auto& cover = coverage[block];
    for (const auto& rec : records) {
      const auto window = intersect(rec.interval, horizon);
      if (!window) continue;
      cover.push_back(*window);
      if (rec.state == TruthState::Down) downs.push_back(*window);
    }
  }

  ConfusionMatrix m;
  const auto matches = match_events(scored_pred, scored_truth, options.tau);
  m.to = static_cast<double>(matches.size());
  std::size_t n_pred = 0;
  std::size_t n_truth = 0;
  for (const auto& [block, ivs] : scored_pred) n_pred += ivs.size();
  for (const auto& [block, ivs] : scored_truth) n_truth += ivs.size();
  m.fo = static_cast<double>(n_pred) - m.to;
  m.fa = static_cast<double>(n_truth) - m.to;

  for (const auto& [block, cover_raw] : coverage) {
    const auto cover = merge_intervals(cover_raw);
    auto busy_raw = scored_pred[block];
    const auto& downs = scored_truth[block];
    busy_raw.insert(busy_raw.end(), downs.begin(), downs.end());
    const auto busy = merge_intervals(std::move(busy_raw));
    for (std::uint64_t i = 0;; ++i) {
      const double s = horizon.start() + static_cast<double>(i) * quiet_bin;
      const double e = s + quiet_bin;
      if (e > horizon.end()) break;
      const TimeInterval bin(s, e);
      if (covered(bin, cover) >= bin.measure() && covered(bin, busy) == 0.0) m.ta += 1.0;
    }
  }
  return m;
}

OutageShare added_outage_share(std::span<const OutageEvent> events, std::size_t total_blocks,
                               double short_threshold, double long_threshold) {
  OutageShare share;
  std::set<BlockId> short_blocks;
  for (const auto& ev : events) {
    const double d = ev.interval.measure();
    if (d >= long_threshold) {
      share.long_seconds += d;
    } else if (d >= short_threshold) {
      share.short_seconds += d;
      short_blocks.insert(ev.block);
    }
  }
  if (share.long_seconds > 0.0) share.duration_share = share.short_seconds / share.long_seconds;
  if (total_blocks > 0) {
    share.block_fraction =
        static_cast<double>(short_blocks.size()) / static_cast<double>(total_blocks);
  }
  return share;
}

Predictions predictions_from_events(std::span<const OutageEvent> events,
                                    std::span<const BlockId> monitored) {
  Predictions pred;
  for (const auto& block : monitored) pred[block];
  for (const auto& ev : events) pred[ev.block].push_back(ev.interval);
  return pred;
}

Predictions truth_outages(std::span<const GroundTruthRecord> truth) {
  Predictions out;
  for (const auto& rec : truth) {
    if (rec.state == TruthState::Down) out[rec.block].push_back(rec.interval);
  }
  return out;
}

void write_truth_csv(std::ostream& out, std::span<const GroundTruthRecord> truth) {
  out << "block,state,start,end\n";
  for (const auto& rec : truth) {
    out << fmt::format("{},{},{:.6f},{:.6f}\n", to_string(rec.block),
                       rec.state == TruthState::Up ? "up" : "down", rec.interval.start(),
                       rec.interval.end());
  }
}

std::vector<GroundTruthRecord> read_truth_csv(std::istream& in) {
  detail::CsvReader csv(in, {"block", "state", "start", "end"});
  std::vector<GroundTruthRecord> records;
  while (csv.next()) {
    GroundTruthRecord rec;
    rec.block = csv.wrap([&] { return parse_block(csv.field("block")); });
    const auto state = csv.field("state");
    if (state == "up") {
      rec.state = TruthState::Up;
    } else if (state == "down") {
      rec.state = TruthState::Down;
    } else {
      throw LineError(Errc::malformed, csv.line_number(),
                      "bad state '" + std::string(state) + "', expected up or down");
    }
    const double start = csv.number("start");
    const double end = csv.number("end");
    rec.interval = csv.wrap([&] { return TimeInterval(start, end); });
    records.push_back(rec);
  }
  return records;
}

std::string report_json(const EvalReport& report) {
  const auto& m = report.matrix;
  const auto avail = metrics(m);
  const auto out = outage_metrics(m);
  nlohmann::ordered_json j;
  j["mode"] = report.mode == EvalMode::Time ? "time" : "events";
  j["horizon"] = {report.horizon.start(), report.horizon.end()};
  j["blocks_scored"] = report.blocks_scored;
  if (report.mode == EvalMode::Events) j["tau"] = report.tau;
  j["matrix"] = {{"ta", count_json(m.ta)},
                 {"fa", count_json(m.fa)},
                 {"fo", count_json(m.fo)},
                 {"to", count_json(m.to)}};
  j["metrics"] = {{"precision", metric_json(avail.precision)},
                  {"recall", metric_json(avail.recall)},
                  {"tnr", metric_json(avail.tnr)}};
  j["outage_metrics"] = {{"precision", metric_json(out.precision)},
                         {"recall", metric_json(out.recall)}};
  return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& report) {
  const auto& m = report.matrix;
  const auto avail = metrics(m);
  const auto unit = report.mode == EvalMode::Time ? "s" : "events";
  std::string s;
  s += fmt::format("{:<14}| {:>20} | {:>20} |\n", "predicted", fmt::format("truth up ({})", unit),
                   fmt::format("truth down ({})", unit));
  s += fmt::format("{:-<14}+{:-<22}+{:-<22}+\n", "", "", "");
  s += fmt::format("{:<14}| {:>20} | {:>20} | precision {}\n", "up", fmt::format("ta={:.0f}", m.ta),
                   fmt::format("fa={:.0f}", m.fa), metric_text(avail.precision));
  s += fmt::format("{:<14}| {:>20} | {:>20} |\n", "down", fmt::format("fo={:.0f}", m.fo),
                   fmt::format("to={:.0f}", m.to));
  s += fmt::format("{:-<14}+{:-<22}+{:-<22}+\n", "", "", "");
  s += fmt::format("{:<14}| {:>20} | {:>20} |\n", "", "recall " + metric_text(avail.recall),
                   "TNR " + metric_text(avail.tnr));
  return s;
}

}  // namespace outage
