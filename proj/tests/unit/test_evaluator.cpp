#include <doctest.h>

#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "outage/evaluator.hpp"

using namespace outage;
using namespace outage::testing;

namespace {

constexpr const char* kBlock = "192.0.2.0/24";

Predictions pred_of(std::vector<TimeInterval> downs, std::string_view block = kBlock) {
  return {{parse_block(block), std::move(downs)}};
}

}  // namespace

TEST_CASE("time_confusion worked examples") {
  const std::vector<GroundTruthRecord> t{truth(kBlock, TruthState::Up, 0, 150),
                                         truth(kBlock, TruthState::Down, 150, 250),
                                         truth(kBlock, TruthState::Up, 250, 1000)};
  const TimeInterval h(0, 1000);
  CHECK(time_confusion(pred_of({{100, 200}}), t, h) == ConfusionMatrix{850, 50, 50, 50});
  const auto same = time_confusion(pred_of({{150, 250}}), t, h);
  CHECK(same.fa == 0);
  CHECK(same.fo == 0);

  const std::vector<GroundTruthRecord> t2{truth(kBlock, TruthState::Down, 0, 100),
                                          truth(kBlock, TruthState::Up, 100, 1000)};
  CHECK(time_confusion(pred_of({}), t2, h) == ConfusionMatrix{900, 100, 0, 0});
}

TEST_CASE("time_confusion scores only blocks in both inputs and clips to the horizon") {
  const std::vector<GroundTruthRecord> t{truth(kBlock, TruthState::Up, 0, 1000),
                                         truth("198.51.100.0/24", TruthState::Down, 0, 1000)};
  const auto m = time_confusion(pred_of({{900, 2000}}), t, TimeInterval(500, 1000));
  CHECK(m == ConfusionMatrix{400, 0, 100, 0});
}

TEST_CASE("overlapping truth is rejected") {
  const std::vector<GroundTruthRecord> t{truth(kBlock, TruthState::Up, 0, 150),
                                         truth(kBlock, TruthState::Down, 100, 250)};
  CHECK(error_of([&] { time_confusion(pred_of({}), t, TimeInterval(0, 300)); }) ==
        Errc::inconsistent_truth);
}

TEST_CASE("property: swapping truth and prediction swaps fa and fo") {
  std::mt19937_64 rng(21);
  const TimeInterval h(0, 5000);
  for (int trial = 0; trial < 200; ++trial) {
    auto random_downs = [&] {
      std::vector<TimeInterval> v;
      double t = 0;
      while (true) {
        t += static_cast<double>(rng() % 800);
        const double e = t + 1 + static_cast<double>(rng() % 400);
        if (e > h.end()) break;
        v.emplace_back(t, e);
        t = e + 1;
      }
      return v;
    };
    auto as_truth = [&](const std::vector<TimeInterval>& downs) {
      std::vector<GroundTruthRecord> recs;
      double cursor = 0;
      for (const auto& d : downs) {
        if (d.start() > cursor) recs.push_back(truth(kBlock, TruthState::Up, cursor, d.start()));
        recs.push_back(truth(kBlock, TruthState::Down, d.start(), d.end()));
        cursor = d.end();
      }
      if (cursor < h.end()) recs.push_back(truth(kBlock, TruthState::Up, cursor, h.end()));
      return recs;
    };
    const auto a = random_downs();
    const auto b = random_downs();
    const auto ab = time_confusion(pred_of(a), as_truth(b), h);
    const auto ba = time_confusion(pred_of(b), as_truth(a), h);
    CHECK(ab.ta == ba.ta);
    CHECK(ab.to == ba.to);
    CHECK(ab.fa == ba.fo);
    CHECK(ab.fo == ba.fa);
    CHECK(ab.total() == h.measure());
  }
}

TEST_CASE("event_confusion worked examples") {
  const TimeInterval h(0, 3600);
  const std::vector<GroundTruthRecord> overlap{truth(kBlock, TruthState::Up, 0, 650),
                                               truth(kBlock, TruthState::Down, 650, 950),
                                               truth(kBlock, TruthState::Up, 950, 3600)};
  const auto m = event_confusion(pred_of({{600, 900}}), overlap, h);
  CHECK(m.to == 1);
  CHECK(m.fo == 0);
  CHECK(m.fa == 0);

  const std::vector<GroundTruthRecord> far{truth(kBlock, TruthState::Up, 0, 1100),
                                           truth(kBlock, TruthState::Down, 1100, 1400),
                                           truth(kBlock, TruthState::Up, 1400, 3600)};
  const auto n = event_confusion(pred_of({{600, 900}}), far, h);
  CHECK(n.to == 0);
  CHECK(n.fo == 1);
  CHECK(n.fa == 1);
  // 180 s quiet bins: 20 in the hour, minus those touched by [600,900) and
  // [1100,1400): bins 3, 4, 6 and 7.
  CHECK(n.ta == 20 - 4);

  CHECK(error_of([&] { event_confusion(pred_of({}), far, h, {0.0, std::nullopt}); }) ==
        Errc::bad_tolerance);
}

TEST_CASE("match_events is one-to-one") {
  const auto pred = pred_of({{0, 100}, {50, 150}, {120, 300}});
  const auto tru = pred_of({{60, 130}});
  const auto m = match_events(pred, tru, 180);
  CHECK(m.size() == 1);
  CHECK(m[0].predicted == TimeInterval(0, 100));

  // Near miss: both boundaries within tau without overlap.
  CHECK(match_events(pred_of({{0, 100}}), pred_of({{150, 250}}), 180).size() == 1);
  CHECK(match_events(pred_of({{0, 100}}), pred_of({{150, 400}}), 180).empty());
}

TEST_CASE("property: every event lands in exactly one cell") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<TimeInterval> p, t;
    std::vector<GroundTruthRecord> recs;
    double cursor = 0;
    for (int i = 0; i < 5; ++i) {
      const double s = cursor + 1 + static_cast<double>(rng() % 1500);
      const double e = s + 10 + static_cast<double>(rng() % 300);
      recs.push_back(truth(kBlock, TruthState::Up, cursor, s));
      recs.push_back(truth(kBlock, TruthState::Down, s, e));
      t.emplace_back(s, e);
      cursor = e;
    }
    recs.push_back(truth(kBlock, TruthState::Up, cursor, cursor + 100));
    const TimeInterval h(0, cursor + 100);
    for (int i = 0; i < 6; ++i) {
      const double s = static_cast<double>(rng() % static_cast<std::uint64_t>(cursor));
      p.emplace_back(s, std::min(h.end(), s + 10 + static_cast<double>(rng() % 300)));
    }
    const auto m = event_confusion(pred_of(p), recs, h);
    CHECK(m.to + m.fo == static_cast<double>(p.size()));
    CHECK(m.to + m.fa == static_cast<double>(t.size()));
    CHECK(m.to <= static_cast<double>(std::min(p.size(), t.size())));
  }
}

TEST_CASE("metrics on published confusion counts") {
  const auto t1 = metrics({52525765695.0, 2471178.0, 78163261.0, 13147965.0});
  CHECK(*t1.precision == doctest::Approx(0.99995).epsilon(1e-5));
  CHECK(*t1.recall == doctest::Approx(0.99851).epsilon(1e-5));
  CHECK(*t1.tnr == doctest::Approx(0.84178).epsilon(1e-5));

  const auto t3 = metrics({4445, 105, 257, 290});
  CHECK(*t3.precision == doctest::Approx(0.97692).epsilon(1e-5));
  CHECK(*t3.recall == doctest::Approx(0.94534).epsilon(1e-5));
  CHECK(*t3.tnr == doctest::Approx(0.73418).epsilon(1e-5));

  const auto none = metrics({});
  CHECK_FALSE(none.precision);
  CHECK_FALSE(none.recall);
  CHECK_FALSE(none.tnr);

  const auto om = outage_metrics({0, 10, 30, 90});
  CHECK(*om.precision == doctest::Approx(0.75));
  CHECK(*om.recall == doctest::Approx(0.9));
}

TEST_CASE("added_outage_share") {
  std::vector<OutageEvent> evs;
  auto add = [&](std::string_view block, double len) {
    OutageEvent e;
    e.block = parse_block(block);
    e.interval = TimeInterval(0, len);
    evs.push_back(e);
  };
  add("10.0.0.0/24", 1000);
  add("10.0.1.0/24", 400);
  add("10.0.1.0/24", 30);  // below the short band
  const auto s = added_outage_share(evs, 10);
  CHECK(s.duration_share == doctest::Approx(0.4));

  std::vector<OutageEvent> long_only(evs.begin(), evs.begin() + 1);
  CHECK(added_outage_share(long_only, 10).duration_share == 0.0);
  CHECK_FALSE(added_outage_share({}, 10).duration_share);

  std::vector<OutageEvent> band;
  for (int i = 0; i < 5; ++i) {
    OutageEvent e;
    e.block = parse_block("10.0." + std::to_string(i) + ".0/24");
    e.interval = TimeInterval(0, 300);
    band.push_back(e);
  }
  CHECK(added_outage_share(band, 100).block_fraction == doctest::Approx(0.05));
}

TEST_CASE("truth CSV round trip and errors") {
  std::vector<GroundTruthRecord> t{truth(kBlock, TruthState::Up, 0, 10.5),
                                   truth("2001:db8::/48", TruthState::Down, 3, 4)};
  std::stringstream s;
  write_truth_csv(s, t);
  const auto back = read_truth_csv(s);
  REQUIRE(back.size() == 2);
  CHECK(back[1].state == TruthState::Down);
  CHECK(back[0].interval == TimeInterval(0, 10.5));

  std::istringstream bad("block,state,start,end\n192.0.2.0/24,sideways,0,1\n");
  try {
    read_truth_csv(bad);
    FAIL("expected an error");
  } catch (const LineError& e) {
    CHECK(e.line() == 2);
  }
  std::istringstream missing("block,start,end\n");
  CHECK(error_of([&] { read_truth_csv(missing); }) == Errc::malformed);
}

TEST_CASE("report JSON carries the matrix and metrics") {
  EvalReport r;
  r.matrix = {850, 50, 50, 50};
  r.horizon = TimeInterval(0, 1000);
  r.blocks_scored = 1;
  const auto j = report_json(r);
  CHECK(j.find("\"ta\": 850") != std::string::npos);
  CHECK(j.find("\"tnr\": 0.5") != std::string::npos);
  CHECK(report_table(r).find("precision") != std::string::npos);
}
