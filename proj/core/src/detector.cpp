#include "outage/detector.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <string>

#include "csv.hpp"
#include "outage/parallel.hpp"

namespace outage {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log P(k | Poisson(mu)) without the log(k!) term, which cancels in every
// ratio taken here.
double poisson_log_kernel(std::uint64_t k, double mu) {
  if (mu <= 0.0) return k == 0 ? 0.0 : kNegInf;
  return static_cast<double>(k) * std::log(mu) - mu;
}

std::span<const Observation> within(std::span<const Observation> obs, const TimeInterval& window) {
  auto by_time = [](const Observation& o, double t) { return o.timestamp < t; };
  const auto first = std::lower_bound(obs.begin(), obs.end(), window.start(), by_time);
  const auto last = std::lower_bound(first, obs.end(), window.end(), by_time);
  return {first, last};
}

void require_sorted(std::span<const Observation> obs) {
  const auto it = std::is_sorted_until(
      obs.begin(), obs.end(),
      [](const Observation& a, const Observation& b) { return a.timestamp < b.timestamp; });
  if (it != obs.end()) {
    throw Error(Errc::unsorted,
                fmt::format("observations out of time order at index {}", it - obs.begin()));
  }
}

double guard_seconds(const BlockModel& model, const DetectorParams& params) {
  const double cap = model.bin.value_or(std::numeric_limits<double>::infinity());
  if (model.lambda <= 0.0) return cap;
  return std::min(-std::log1p(-params.guard_quantile) / model.lambda, cap);
}

bool event_order(const OutageEvent& a, const OutageEvent& b) {
  if (a.block != b.block) return a.block < b.block;
  if (a.interval.start() != b.interval.start()) return a.interval.start() < b.interval.start();
  return a.granularity < b.granularity;
}

}  // namespace

void DetectorParams::validate() const {
  auto fail = [](const char* what) { throw Error(Errc::invalid_argument, what); };
  if (!(epsilon >= 0.0 && epsilon < 1.0)) fail("epsilon must be in [0, 1)");
  if (!(0.0 < b_floor && b_floor < t_down && t_down < t_up && t_up < b_ceil && b_ceil < 1.0)) {
    fail("need 0 < b_floor < t_down < t_up < b_ceil < 1");
  }
  if (!(prior_up >= b_floor && prior_up <= b_ceil)) fail("prior_up must lie in [b_floor, b_ceil]");
  if (!(guard_quantile > 0.0 && guard_quantile < 1.0)) fail("guard_quantile must be in (0, 1)");
  if (!(min_silence >= 0.0)) fail("min_silence must be >= 0");
  if (!(outage_prior_rate > 0.0)) fail("outage_prior_rate must be positive");
}

const char* to_string(Status status) {
  switch (status) {
    case Status::Unknown: return "unknown";
    case Status::Up: return "up";
    case Status::Down: return "down";
  }
  return "unknown";
}

const char* to_string(Granularity granularity) {
  return granularity == Granularity::Block ? "block" : "aggregate";
}

BeliefState initial_belief(const DetectorParams& params) {
  return BeliefState{params.prior_up, Status::Unknown, std::nullopt};
}

std::optional<double> posterior_up(double belief, std::uint64_t k, double mu_up, double mu_down) {
  const double ll_up = poisson_log_kernel(k, mu_up);
  const double ll_down = poisson_log_kernel(k, mu_down);
  if (ll_up == kNegInf && ll_down == kNegInf) return std::nullopt;
  if (ll_down == kNegInf) return belief > 0.0 ? 1.0 : 0.0;
  if (ll_up == kNegInf) return belief < 1.0 ? 0.0 : 1.0;
  if (belief <= 0.0 || belief >= 1.0) return belief;
  double log_ratio = 0.0;
  if (k > 0) log_ratio = static_cast<double>(k) * (std::log(mu_up) - std::log(mu_down));
  log_ratio -= mu_up - mu_down;
  const double log_odds = std::log(belief) - std::log1p(-belief) + log_ratio;
  return 1.0 / (1.0 + std::exp(-log_odds));
}

double belief_update(double belief, std::uint64_t k, double lambda, double delta,
                     const DetectorParams& params) {
  const double mu_up = lambda * delta;
  if (!(mu_up > 0.0)) return belief;
  const auto post = posterior_up(belief, k, mu_up, params.epsilon * mu_up);
  if (!post) return belief;
  return std::clamp(*post, params.b_floor, params.b_ceil);
}

void advance(BeliefState& state, std::uint64_t k, double lambda, double delta,
             const DetectorParams& params) {
  state.belief = belief_update(state.belief, k, lambda, delta, params);
  switch (state.status) {
    case Status::Unknown:
      state.status = state.belief < params.t_down ? Status::Down : Status::Up;
      break;
    case Status::Up:
      if (state.belief < params.t_down) state.status = Status::Down;
      break;
    case Status::Down:
      if (state.belief > params.t_up) state.status = Status::Up;
      break;
  }
}

std::vector<OutageEvent> detect_block(std::span<const Observation> obs, const BlockModel& model,
                                      const DetectorParams& params, const TimeInterval& horizon) {
  if (!model.measurable || !model.bin) {
    throw Error(Errc::not_measurable, "block " + to_string(model.block) +
                                          " not measurable; aggregate or widen bin");
  }
  params.validate();
  if (horizon.empty()) throw Error(Errc::invalid_argument, "empty detection horizon");
  require_sorted(obs);
  const auto in_horizon = within(obs, horizon);

  const double bin = *model.bin;
  std::vector<OutageEvent> events;
  BeliefState state = initial_belief(params);
  std::optional<OutageEvent> open;
  auto next = in_horizon.begin();

  for (std::uint64_t i = 0;; ++i) {
    const double start = horizon.start() + static_cast<double>(i) * bin;
    if (!(start < horizon.end())) break;
    const double end = std::min(start + bin, horizon.end());

    std::uint64_t k = 0;
    while (next != in_horizon.end() && next->timestamp < end) {
      state.last_packet = next->timestamp;
      ++k;
      ++next;
    }
    const Status before = state.status;
    advance(state, k, model.lambda, end - start, params);

    if (state.status == Status::Down && before != Status::Down) {
      OutageEvent ev;
      ev.block = model.block;
      ev.interval = TimeInterval(start, end);
      ev.confidence = 1.0 - state.belief;
      open = ev;
    } else if (state.status == Status::Up && before == Status::Down) {
      open->interval = TimeInterval(open->interval.start(), start);
      events.push_back(*open);
      open.reset();
    }
  }
  if (open) {
    open->interval = TimeInterval(open->interval.start(), horizon.end());
    open->open_ended = true;
    events.push_back(*open);
  }
  return events;
}

std::vector<OutageEvent> detect_silences(std::span<const Observation> obs,
                                         const BlockModel& model, const DetectorParams& params,
                                         const TimeInterval& horizon) {
  params.validate();
  if (!params.exact_silences || !(model.lambda > 0.0) || horizon.empty()) return {};
  require_sorted(obs);
  const auto in_horizon = within(obs, horizon);

  // Posterior odds of "down" after a silence of length g:
  //   prior_odds * exp((1 - epsilon) * lambda * g)
  // where prior_odds is the chance an onset beat the next packet.
  const double decay = (1.0 - params.epsilon) * model.lambda;
  const double onset_odds = params.outage_prior_rate / decay;
  const double initial_odds = (1.0 - params.prior_up) / params.prior_up + onset_odds;
  const double log_target = std::log((1.0 - params.t_down) / params.t_down);

  std::vector<OutageEvent> events;
  auto consider = [&](double from, double to, double prior_odds, bool open_ended) {
    const double g = to - from;
    const double needed = std::max(params.min_silence, (log_target - std::log(prior_odds)) / decay);
    if (!(g > needed)) return;
    const double log_odds = std::log(prior_odds) + decay * g;
    const double p_up = 1.0 / (1.0 + std::exp(log_odds));
    OutageEvent ev;
    ev.block = model.block;
    ev.interval = TimeInterval(std::max(from + needed, horizon.start()), to);
    ev.confidence = 1.0 - std::max(p_up, params.b_floor);
    ev.open_ended = open_ended;
    events.push_back(ev);
  };

  // A packet before the horizon (training traffic, usually) anchors the
  // first silence; without one the horizon start and prior_up stand in.
  double previous = horizon.start();
  double odds = initial_odds;
  if (in_horizon.begin() != obs.begin()) {
    previous = std::prev(in_horizon.begin())->timestamp;
    odds = onset_odds;
  }
  for (const auto& o : in_horizon) {
    consider(previous, o.timestamp, odds, false);
    previous = o.timestamp;
    odds = onset_odds;
  }
  consider(previous, horizon.end(), odds, true);
  return events;
}

OutageEvent refine_boundaries(const OutageEvent& event, std::span<const Observation> obs,
                              const BlockModel& model, const DetectorParams& params,
                              const TimeInterval& horizon) {
  require_sorted(obs);
  const auto in_horizon = within(obs, horizon);
  const double s = event.interval.start();
  const double e = event.interval.end();
  auto by_time = [](const Observation& o, double t) { return o.timestamp < t; };
  const auto first_inside = std::lower_bound(in_horizon.begin(), in_horizon.end(), s, by_time);
  const auto first_after = std::lower_bound(first_inside, in_horizon.end(), e, by_time);

  // Candidate gap endpoints: the last packet before the event, every packet
  // inside it, and the first packet at or after its end. Missing neighbours
  // fall back to the horizon edges.
  std::vector<double> points;
  points.reserve(static_cast<std::size_t>(first_after - first_inside) + 2);
  const auto before = std::lower_bound(obs.begin(), obs.end(), s, by_time);
  points.push_back(before == obs.begin() ? horizon.start() : std::prev(before)->timestamp);
  for (auto it = first_inside; it != first_after; ++it) points.push_back(it->timestamp);
  const bool has_next = first_after != in_horizon.end();
  points.push_back(has_next ? first_after->timestamp : horizon.end());

  std::size_t best = 0;
  for (std::size_t i = 1; i + 1 < points.size(); ++i) {
    if (points[i + 1] - points[i] > points[best + 1] - points[best]) best = i;
  }
  const double t_last = points[best];
  const double t_first = points[best + 1];
  if (!(t_last < t_first)) return event;

  double start = t_last + guard_seconds(model, params);
  if (t_last < s) start = std::min(start, s);
  if (!(start < t_first)) start = t_last;
  start = std::max(start, horizon.start());

  OutageEvent refined = event;
  refined.interval = TimeInterval(start, t_first);
  refined.open_ended = !has_next && best + 2 == points.size();
  if (refined.interval.start() < std::max(t_last, horizon.start()) || refined.interval.end() > t_first) {
    throw Error(Errc::invalid_argument, "refinement widened the event past its silent gap");
  }
  return refined;
}

std::vector<OutageEvent> merge_events(std::vector<OutageEvent> events) {
  std::sort(events.begin(), events.end(), event_order);
  std::vector<OutageEvent> out;
  for (auto& ev : events) {
    if (!out.empty() && out.back().block == ev.block && out.back().granularity == ev.granularity &&
        ev.interval.start() <= out.back().interval.end()) {
      auto& last = out.back();
      const double end = std::max(last.interval.end(), ev.interval.end());
      last.open_ended = (last.open_ended && last.interval.end() == end) ||
                        (ev.open_ended && ev.interval.end() == end);
      last.interval = TimeInterval(last.interval.start(), end);
      last.confidence = std::max(last.confidence, ev.confidence);
    } else {
      out.push_back(std::move(ev));
    }
  }
  return out;
}

std::vector<OutageEvent> detect_block_outages(std::span<const Observation> obs,
                                              const BlockModel& model,
                                              const DetectorParams& params,
                                              const TimeInterval& horizon) {
  auto raw = detect_block(obs, model, params, horizon);
  auto silences = detect_silences(obs, model, params, horizon);
  raw.insert(raw.end(), silences.begin(), silences.end());
  auto merged = merge_events(std::move(raw));
  for (auto& ev : merged) ev = refine_boundaries(ev, obs, model, params, horizon);
  // Two events can snap onto the same gap.
  return merge_events(std::move(merged));
}

void corroborate(std::span<OutageEvent> events) {
  std::map<BlockId, std::vector<OutageEvent*>> groups;
  for (auto& ev : events) {
    ev.corroboration = 0;
    if (ev.granularity == Granularity::Block && !ev.block.is_aggregate()) {
      groups[superblock_of(ev.block)].push_back(&ev);
    }
  }
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(), [](const OutageEvent* a, const OutageEvent* b) {
      return a->interval.start() < b->interval.start();
    });
    for (std::size_t i = 0; i < members.size(); ++i) {
      std::set<BlockId> siblings;
      for (std::size_t j = 0; j < members.size(); ++j) {
        // Sorted by start: nothing past here can overlap member i.
        if (members[j]->interval.start() >= members[i]->interval.end()) break;
        if (members[j]->block != members[i]->block &&
            members[j]->interval.overlaps(members[i]->interval)) {
          siblings.insert(members[j]->block);
        }
      }
      members[i]->corroboration = static_cast<int>(siblings.size());
    }
  }
}

std::vector<OutageEvent> detect_aggregate(std::span<const AggregateMember> members,
                                          const ParameterLadder& ladder,
                                          const DetectorParams& params,
                                          const TimeInterval& horizon) {
  if (members.empty()) throw Error(Errc::invalid_argument, "aggregate has no members");
  const BlockId key = superblock_of(members.front().model->block);
  double lambda = 0.0;
  std::uint64_t n_train = 0;
  std::vector<Observation> merged;
  for (const auto& m : members) {
    if (superblock_of(m.model->block) != key) {
      throw Error(Errc::invalid_argument, "aggregate members span several superblocks");
    }
    lambda += m.model->lambda;
    n_train += m.model->n_train;
    merged.insert(merged.end(), m.obs.begin(), m.obs.end());
  }
  std::stable_sort(merged.begin(), merged.end(), [](const Observation& a, const Observation& b) {
    return a.timestamp < b.timestamp;
  });

  const BlockModel model =
      model_from_rate(key, members.front().model->train_window, n_train, lambda, ladder);
  if (!model.measurable) {
    throw Error(Errc::insufficient_signal,
                fmt::format("aggregate {} has insufficient signal at any scale (lambda {:.3g}/s)",
                            to_string(key), lambda));
  }
  auto events = detect_block_outages(merged, model, params, horizon);
  for (auto& ev : events) ev.granularity = Granularity::Aggregate;
  return events;
}

DetectionResult run_detection(const BlockSequences& blocks, const DetectionConfig& config) {
  config.params.validate();
  config.ladder.validate();
  if (config.detect.empty()) throw Error(Errc::invalid_argument, "empty detection window");

  DetectionResult result;
  result.models = build_models(blocks, config.train, config.ladder, config.jobs);

  std::vector<const BlockSequences::value_type*> measurable;
  std::map<BlockId, std::vector<AggregateMember>> pools;
  for (const auto& entry : blocks) {
    const BlockModel& model = result.models.at(entry.first);
    if (model.measurable) {
      measurable.push_back(&entry);
    } else if (config.aggregate) {
      pools[superblock_of(entry.first)].push_back({&model, entry.second});
    }
  }

  std::vector<std::vector<OutageEvent>> per_block(measurable.size());
  parallel_for(measurable.size(), config.jobs, [&](std::size_t i) {
    per_block[i] = detect_block_outages(measurable[i]->second,
                                        result.models.at(measurable[i]->first), config.params,
                                        config.detect);
  });
  result.blocks_scanned = measurable.size();

  std::vector<const std::vector<AggregateMember>*> pool_list;
  for (const auto& [key, members] : pools) pool_list.push_back(&members);
  std::vector<std::vector<OutageEvent>> per_pool(pool_list.size());
  std::vector<char> insufficient(pool_list.size(), 0);
  parallel_for(pool_list.size(), config.jobs, [&](std::size_t i) {
    try {
      per_pool[i] = detect_aggregate(*pool_list[i], config.ladder, config.params, config.detect);
    } catch (const Error& e) {
      if (e.code() != Errc::insufficient_signal) throw;
      insufficient[i] = 1;
    }
  });
  result.aggregates_scanned = pool_list.size();
  result.aggregates_insufficient =
      static_cast<std::size_t>(std::count(insufficient.begin(), insufficient.end(), 1));

  for (auto& evs : per_block) result.events.insert(result.events.end(), evs.begin(), evs.end());
  for (auto& evs : per_pool) result.events.insert(result.events.end(), evs.begin(), evs.end());
  std::sort(result.events.begin(), result.events.end(), event_order);
  corroborate(result.events);
  return result;
}

void write_events_csv(std::ostream& out, std::span<const OutageEvent> events) {
  out << "block,family,start,end,confidence,corroboration,open_ended,granularity\n";
  for (const auto& ev : events) {
    out << fmt::format("{},{},{:.6f},{:.6f},{:.6f},{},{},{}\n", to_string(ev.block),
                       to_string(ev.block.family()), ev.interval.start(), ev.interval.end(),
                       ev.confidence, ev.corroboration, ev.open_ended ? 1 : 0,
                       to_string(ev.granularity));
  }
}

void write_events_jsonl(std::ostream& out, std::span<const OutageEvent> events) {
  for (const auto& ev : events) {
    out << fmt::format(
        "{{\"block\":\"{}\",\"family\":\"{}\",\"start\":{:.6f},\"end\":{:.6f},"
        "\"confidence\":{:.6f},\"corroboration\":{},\"open_ended\":{},\"granularity\":\"{}\"}}\n",
        to_string(ev.block), to_string(ev.block.family()), ev.interval.start(),
        ev.interval.end(), ev.confidence, ev.corroboration, ev.open_ended ? "true" : "false",
        to_string(ev.granularity));
  }
}

std::vector<OutageEvent> read_events_csv(std::istream& in) {
  detail::CsvReader csv(in, {"block", "start", "end"});
  std::vector<OutageEvent> events;
  while (csv.next()) {
    OutageEvent ev;
    ev.block = csv.wrap([&] { return parse_block(csv.field("block")); });
    const double start = csv.number("start");
    const double end = csv.number("end");
    ev.interval = csv.wrap([&] { return TimeInterval(start, end); });
    if (csv.has("confidence")) ev.confidence = csv.number("confidence");
    if (csv.has("corroboration")) ev.corroboration = static_cast<int>(csv.number("corroboration"));
    if (csv.has("open_ended")) ev.open_ended = csv.flag("open_ended");
    if (csv.has("granularity")) {
      const auto g = csv.field("granularity");
      if (g == "aggregate") {
        ev.granularity = Granularity::Aggregate;
      } else if (g != "block") {
        throw LineError(Errc::malformed, csv.line_number(),
                        "bad granularity '" + std::string(g) + "'");
      }
    }
    events.push_back(ev);
  }
  return events;
}

}  // namespace outage
