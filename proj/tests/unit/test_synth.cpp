#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "outage/synth.hpp"

using namespace outage;
using namespace outage::testing;

namespace {

SynthSpec one_block(double lambda, double horizon_end) {
  SynthSpec spec;
  spec.blocks = {{parse_block("192.0.2.0/24"), lambda}};
  spec.horizon = TimeInterval(0, horizon_end);
  return spec;
}

std::string bytes_of(const SynthTrace& t) {
  std::ostringstream out;
  write_observations(out, t.observations);
  write_truth_csv(out, t.truth);
  return out.str();
}

}  // namespace

TEST_CASE("golden packet count for the default seed") {
  const auto obs = gen_block(one_block(1.0, 1e5), 0);
  // Pinned from the first run; 3 sigma of a Poisson(1e5) is about 949.
  CHECK(obs.size() == 100171u);
  CHECK(std::abs(static_cast<double>(obs.size()) - 1e5) <= 3 * std::sqrt(1e5));
}

TEST_CASE("no traffic inside injected outages when epsilon_gen is zero") {
  auto spec = one_block(5.0, 20000);
  spec.outages = {{spec.blocks[0].block, TimeInterval(1000, 1600)},
                  {spec.blocks[0].block, TimeInterval(9000, 9300)}};
  const auto obs = gen_block(spec, 0);
  for (const auto& o : obs) {
    for (const auto& out : spec.outages) CHECK_FALSE(out.interval.contains(o.timestamp));
  }
  const auto t = ground_truth(spec);
  REQUIRE(t.size() == 5);
  CHECK(t[1].state == TruthState::Down);
  CHECK(t[1].interval == TimeInterval(1000, 1600));
}

TEST_CASE("residual traffic during outages follows epsilon_gen") {
  auto spec = one_block(10.0, 200000);
  spec.epsilon_gen = 0.1;
  spec.outages = {{spec.blocks[0].block, TimeInterval(0, 100000)}};
  const auto obs = gen_block(spec, 0);
  const auto inside = count_in_window(obs, TimeInterval(0, 100000));
  const auto outside = count_in_window(obs, TimeInterval(100000, 200000));
  CHECK(std::abs(static_cast<double>(inside) - 1e5) < 5 * std::sqrt(1e5));
  CHECK(std::abs(static_cast<double>(outside) - 1e6) < 5 * std::sqrt(1e6));
}

TEST_CASE("property: estimated rate tracks the generated rate") {
  for (double lambda : {0.01, 0.3, 2.0, 7.5}) {
    auto spec = one_block(lambda, 86400);
    spec.seed = 1234;
    const auto obs = gen_block(spec, 0);
    const double mean = lambda * 86400;
    CHECK(std::abs(static_cast<double>(obs.size()) - mean) < 5 * std::sqrt(mean));
    for (const auto& o : obs) CHECK(block_of(o.source) == spec.blocks[0].block);
  }
}

TEST_CASE("same seed, same bytes; different seed, different bytes") {
  PopulationSpec pop;
  pop.count = 30;
  pop.lambda_max = 0.5;
  const auto spec = make_population(pop);
  const auto a = bytes_of(gen_trace(spec, 1));
  const auto b = bytes_of(gen_trace(spec, 3));
  CHECK(a == b);
  pop.seed = 2;
  CHECK(bytes_of(gen_trace(make_population(pop), 1)) != a);
}

TEST_CASE("gen_trace output is globally time-ordered") {
  PopulationSpec pop;
  pop.count = 20;
  pop.lambda_max = 0.2;
  const auto t = gen_trace(make_population(pop), 2);
  for (std::size_t i = 1; i < t.observations.size(); ++i) {
    CHECK(t.observations[i - 1].timestamp <= t.observations[i].timestamp);
  }
}

TEST_CASE("make_population injects outages into the requested share") {
  PopulationSpec pop;
  pop.count = 200;
  const auto spec = make_population(pop);
  CHECK(spec.blocks.size() == 200);
  std::size_t measurable = 0;
  for (const auto& b : spec.blocks) measurable += select_bin(b.lambda, pop.ladder).measurable();
  CHECK(spec.outages.size() == static_cast<std::size_t>(std::llround(0.2 * measurable)));
  for (const auto& o : spec.outages) {
    CHECK(o.interval.start() >= pop.outage_window.start());
    CHECK(o.interval.end() <= pop.outage_window.end());
    const auto it = std::find_if(spec.blocks.begin(), spec.blocks.end(),
                                 [&](const SynthBlock& b) { return b.block == o.block; });
    const auto bin = select_bin(it->lambda, pop.ladder).bin;
    REQUIRE(bin);
    CHECK(o.interval.measure() >= 2 * *bin - 1e-6);
    CHECK(o.interval.measure() <= 4 * *bin + 1e-6);
  }
}

TEST_CASE("IPv6 populations use /48 keys") {
  PopulationSpec pop;
  pop.family = Family::V6;
  pop.count = 5;
  pop.lambda_max = 0.1;
  const auto t = gen_trace(make_population(pop));
  for (const auto& o : t.observations) CHECK(o.source.family() == Family::V6);
  CHECK(to_string(synthetic_block(Family::V6, 258)) == "2001:db8:102::/48");
  CHECK(to_string(synthetic_block(Family::V4, 258)) == "10.1.2.0/24");
}

TEST_CASE("spec validation") {
  auto spec = one_block(1.0, 1000);
  spec.outages = {{spec.blocks[0].block, TimeInterval(100, 300)},
                  {spec.blocks[0].block, TimeInterval(200, 400)}};
  CHECK(error_of([&] { spec.validate(); }) == Errc::bad_spec);
  spec.outages = {{spec.blocks[0].block, TimeInterval(900, 1100)}};
  CHECK(error_of([&] { spec.validate(); }) == Errc::bad_spec);
  spec.outages = {};
  spec.blocks[0].lambda = -1;
  CHECK(error_of([&] { spec.validate(); }) == Errc::bad_spec);
}

TEST_CASE("JSON spec parsing") {
  const auto spec = parse_synth_spec(R"({
    "horizon": [0, 3600], "seed": 9, "epsilon_gen": 0.05,
    "blocks": [{"block": "192.0.2.0/24", "lambda": 1.5}],
    "outages": [{"block": "192.0.2.0/24", "start": 100, "end": 400}]})");
  CHECK(spec.seed == 9);
  CHECK(spec.epsilon_gen == 0.05);
  REQUIRE(spec.blocks.size() == 1);
  CHECK(spec.blocks[0].lambda == 1.5);
  REQUIRE(spec.outages.size() == 1);

  const auto pop = parse_synth_spec(R"({"seed": 4, "population": {"count": 12, "family": "v6"}})");
  CHECK(pop.blocks.size() == 12);
  CHECK(pop.seed == 4);
  CHECK(pop.blocks[0].block.family() == Family::V6);

  CHECK(error_of([] { parse_synth_spec("{"); }) == Errc::bad_spec);
  CHECK(error_of([] { parse_synth_spec(R"({"blocks": [{"block": "x", "lambda": 1}]})"); }) ==
        Errc::bad_spec);
}
