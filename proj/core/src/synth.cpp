#include "outage/synth.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <iterator>
#include <json.hpp>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "outage/parallel.hpp"

namespace outage {

namespace {

// SplitMix64 finalizer; derives independent per-block seeds from one seed.
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream)));
}

// std::uniform_real_distribution is implementation-defined; this is not.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double to_microseconds(double t) { return std::floor(t * 1e6) / 1e6; }

constexpr std::uint64_t kPopulationStream = 0x706f70756c617469ULL;

}  // namespace

void SynthSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::bad_spec, "bad spec: " + what); };
  if (horizon.empty()) fail("empty horizon");
  if (!(epsilon_gen >= 0.0 && epsilon_gen <= 1.0)) fail("epsilon_gen must be in [0, 1]");
  std::set<BlockId> seen;
  for (const auto& b : blocks) {
    if (b.block.is_aggregate() || b.block.prefix_len() == 0) {
      fail(to_string(b.block) + " is not a /24 or /48 block");
    }
    if (!seen.insert(b.block).second) fail("duplicate block " + to_string(b.block));
    if (!(b.lambda >= 0.0) || !std::isfinite(b.lambda)) fail("negative rate for " + to_string(b.block));
  }
  std::map<BlockId, std::vector<TimeInterval>> per_block;
  for (const auto& o : outages) {
    if (!seen.count(o.block)) fail("outage for unknown block " + to_string(o.block));
    if (o.interval.empty()) fail("empty outage for " + to_string(o.block));
    if (o.interval.start() < horizon.start() || o.interval.end() > horizon.end()) {
      fail("outage " + to_string(o.interval) + " outside horizon");
    }
    per_block[o.block].push_back(o.interval);
  }
  for (auto& [block, ivs] : per_block) {
    std::sort(ivs.begin(), ivs.end(),
              [](const auto& a, const auto& b) { return a.start() < b.start(); });
    for (std::size_t i = 1; i < ivs.size(); ++i) {
      if (ivs[i].start() < ivs[i - 1].end()) fail("overlapping outages for " + to_string(block));
    }
  }
}

BlockId synthetic_block(Family family, std::size_t index) {
  const auto hi = static_cast<std::uint8_t>((index >> 8) & 0xff);
  const auto lo = static_cast<std::uint8_t>(index & 0xff);
  if (family == Family::V4) return block_of(Address::v4({10, hi, lo, 0}));
  return block_of(Address::v6({0x20, 0x01, 0x0d, 0xb8, hi, lo, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}));
}

SynthSpec make_population(const PopulationSpec& p) {
  p.ladder.validate();
  if (p.count > 65536) throw Error(Errc::bad_spec, "bad spec: at most 65536 synthetic blocks");
  if (!(p.lambda_min > 0.0 && p.lambda_min <= p.lambda_max)) {
    throw Error(Errc::bad_spec, "bad spec: need 0 < lambda_min <= lambda_max");
  }
  if (!(p.outage_fraction >= 0.0 && p.outage_fraction <= 1.0)) {
    throw Error(Errc::bad_spec, "bad spec: outage_fraction must be in [0, 1]");
  }
  if (!(p.min_bins > 0.0 && p.min_bins <= p.max_bins)) {
    throw Error(Errc::bad_spec, "bad spec: need 0 < min_bins <= max_bins");
  }

  SynthSpec spec;
  spec.horizon = p.horizon;
  spec.epsilon_gen = p.epsilon_gen;
  spec.seed = p.seed;
  auto rng = substream(p.seed, kPopulationStream);

  const double log_lo = std::log(p.lambda_min);
  const double log_hi = std::log(p.lambda_max);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < p.count; ++i) {
    const double lambda = std::exp(log_lo + (log_hi - log_lo) * uniform01(rng));
    spec.blocks.push_back({synthetic_block(p.family, i), lambda});
    const auto choice = select_bin(lambda, p.ladder);
    if (choice.measurable() && (!p.dense_only || choice.dense)) candidates.push_back(i);
  }

  // Deterministic Fisher-Yates; std::shuffle's use of the engine is unspecified.
  for (std::size_t i = candidates.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(candidates[i - 1], candidates[j]);
  }
  const auto n_out = static_cast<std::size_t>(
      std::llround(p.outage_fraction * static_cast<double>(candidates.size())));
  candidates.resize(n_out);
  std::sort(candidates.begin(), candidates.end());

  for (const auto i : candidates) {
    const auto& b = spec.blocks[i];
    const double bin = *select_bin(b.lambda, p.ladder).bin;
    const double length =
        p.outage_seconds.value_or(bin * (p.min_bins + (p.max_bins - p.min_bins) * uniform01(rng)));
    // Leave one bin of normal traffic on each side inside the window.
    const double lo = p.outage_window.start() + bin;
    const double hi = p.outage_window.end() - bin - length;
    if (!(lo <= hi)) continue;
    const double start = to_microseconds(lo + (hi - lo) * uniform01(rng));
    const double end = to_microseconds(start + length);
    spec.outages.push_back({b.block, TimeInterval(start, end)});
  }
  spec.validate();
  return spec;
}

std::vector<Observation> gen_block(const SynthSpec& spec, std::size_t index) {
  const auto& b = spec.blocks.at(index);
  auto rng = substream(spec.seed, index);

  std::vector<TimeInterval> outages;
  for (const auto& o : spec.outages) {
    if (o.block == b.block) outages.push_back(o.interval);
  }
  std::sort(outages.begin(), outages.end(),
            [](const auto& x, const auto& y) { return x.start() < y.start(); });

  // Piecewise-constant rate: lambda while up, epsilon_gen * lambda inside
  // outages. Memorylessness lets each piece restart at its own start.
  std::vector<std::pair<TimeInterval, double>> pieces;
  double cursor = spec.horizon.start();
  for (const auto& o : outages) {
    if (cursor < o.start()) pieces.push_back({TimeInterval(cursor, o.start()), b.lambda});
    pieces.push_back({o, spec.epsilon_gen * b.lambda});
    cursor = o.end();
  }
  if (cursor < spec.horizon.end()) {
    pieces.push_back({TimeInterval(cursor, spec.horizon.end()), b.lambda});
  }

  std::vector<Observation> obs;
  obs.reserve(static_cast<std::size_t>(b.lambda * spec.horizon.measure() * 1.01) + 16);
  for (const auto& [piece, rate] : pieces) {
    if (!(rate > 0.0)) continue;
    double t = piece.start();
    while (true) {
      t += -std::log1p(-uniform01(rng)) / rate;  // inverse-CDF exponential gap
      if (!(t < piece.end())) break;
      const std::uint64_t host = rng();
      const double ts = to_microseconds(t);
      if (ts < piece.start() || ts >= piece.end()) continue;
      obs.push_back({ts, address_in_block(b.block, host)});
    }
  }
  return obs;
}

std::vector<GroundTruthRecord> ground_truth(const SynthSpec& spec) {
  std::vector<GroundTruthRecord> truth;
  for (const auto& b : spec.blocks) {
    std::vector<TimeInterval> outages;
    for (const auto& o : spec.outages) {
      if (o.block == b.block) outages.push_back(o.interval);
    }
    std::sort(outages.begin(), outages.end(),
              [](const auto& x, const auto& y) { return x.start() < y.start(); });
    double cursor = spec.horizon.start();
    for (const auto& o : outages) {
      if (cursor < o.start()) {
        truth.push_back({b.block, TruthState::Up, TimeInterval(cursor, o.start())});
      }
      truth.push_back({b.block, TruthState::Down, o});
      cursor = o.end();
    }
    if (cursor < spec.horizon.end()) {
      truth.push_back({b.block, TruthState::Up, TimeInterval(cursor, spec.horizon.end())});
    }
  }
  return truth;
}

SynthTrace gen_trace(const SynthSpec& spec, unsigned jobs) {
  spec.validate();
  std::vector<std::vector<Observation>> per_block(spec.blocks.size());
  parallel_for(spec.blocks.size(), jobs, [&](std::size_t i) { per_block[i] = gen_block(spec, i); });

  SynthTrace trace;
  std::size_t total = 0;
  for (const auto& v : per_block) total += v.size();
  trace.observations.reserve(total);

  // k-way merge; ties broken by block index.
  using Head = std::pair<double, std::size_t>;
  std::priority_queue<Head, std::vector<Head>, std::greater<>> heap;
  std::vector<std::size_t> pos(per_block.size(), 0);
  for (std::size_t i = 0; i < per_block.size(); ++i) {
    if (!per_block[i].empty()) heap.push({per_block[i][0].timestamp, i});
  }
  while (!heap.empty()) {
    const auto [ts, i] = heap.top();
    heap.pop();
    trace.observations.push_back(per_block[i][pos[i]++]);
    if (pos[i] < per_block[i].size()) heap.push({per_block[i][pos[i]].timestamp, i});
  }
  trace.truth = ground_truth(spec);
  return trace;
}

SynthSpec filter_family(SynthSpec spec, FamilyFilter filter) {
  std::erase_if(spec.blocks, [&](const SynthBlock& b) { return !accepts(filter, b.block.family()); });
  std::erase_if(spec.outages,
                [&](const InjectedOutage& o) { return !accepts(filter, o.block.family()); });
  return spec;
}

namespace {

TimeInterval interval_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(Errc::bad_spec, "bad spec: expected [start, end]");
  return TimeInterval(j[0].get<double>(), j[1].get<double>());
}

PopulationSpec population_from_json(const nlohmann::json& j) {
  PopulationSpec p;
  p.count = j.value("count", p.count);
  if (j.contains("family")) p.family = parse_family(j["family"].get<std::string>());
  p.lambda_min = j.value("lambda_min", p.lambda_min);
  p.lambda_max = j.value("lambda_max", p.lambda_max);
  if (j.contains("horizon")) p.horizon = interval_from_json(j["horizon"]);
  if (j.contains("outage_window")) p.outage_window = interval_from_json(j["outage_window"]);
  p.outage_fraction = j.value("outage_fraction", p.outage_fraction);
  p.dense_only = j.value("dense_only", p.dense_only);
  p.min_bins = j.value("min_bins", p.min_bins);
  p.max_bins = j.value("max_bins", p.max_bins);
  if (j.contains("outage_seconds")) p.outage_seconds = j["outage_seconds"].get<double>();
  if (j.contains("ladder")) p.ladder.bins = j["ladder"].get<std::vector<double>>();
  p.ladder.c_min = j.value("c_min", p.ladder.c_min);
  p.epsilon_gen = j.value("epsilon_gen", p.epsilon_gen);
  p.seed = j.value("seed", p.seed);
  return p;
}

}  // namespace

SynthSpec parse_synth_spec(std::string_view json_text) {
  try {
    const auto j = nlohmann::json::parse(json_text);
    SynthSpec spec;
    if (j.contains("population")) {
      auto pop_json = j["population"];
      // Top-level seed/epsilon/horizon apply to the population too.
      for (const char* key : {"seed", "epsilon_gen", "horizon"}) {
        if (j.contains(key) && !pop_json.contains(key)) pop_json[key] = j[key];
      }
      spec = make_population(population_from_json(pop_json));
    } else {
      if (!j.contains("horizon")) throw Error(Errc::bad_spec, "bad spec: missing horizon");
      spec.horizon = interval_from_json(j["horizon"]);
      spec.epsilon_gen = j.value("epsilon_gen", 0.0);
      spec.seed = j.value("seed", kDefaultSeed);
    }
    for (const auto& b : j.value("blocks", nlohmann::json::array())) {
      spec.blocks.push_back({parse_block(b.at("block").get<std::string>()), b.at("lambda").get<double>()});
    }
    for (const auto& o : j.value("outages", nlohmann::json::array())) {
      spec.outages.push_back({parse_block(o.at("block").get<std::string>()),
                              TimeInterval(o.at("start").get<double>(), o.at("end").get<double>())});
    }
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_spec, std::string("bad spec: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::bad_spec) throw;
    throw Error(Errc::bad_spec, std::string("bad spec: ") + e.what());
  }
}

SynthSpec read_synth_spec(std::istream& in) {
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_synth_spec(buf.str());
}

}  // namespace outage
