#include <doctest.h>

#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "outage/modeler.hpp"

using namespace outage;
using namespace outage::testing;

TEST_CASE("estimate_rate") {
  CHECK(estimate_rate(steady(0, 3600), TimeInterval(0, 3600)) == 1.0);
  CHECK(estimate_rate({}, TimeInterval(0, 3600)) == 0.0);
  // 18 / 86400 worked by hand: 2.0833...e-4.
  CHECK(estimate_rate(steady(0, 86400, 4800), TimeInterval(0, 86400)) ==
        doctest::Approx(2.0833333333333333e-4).epsilon(1e-15));
  CHECK(error_of([] { estimate_rate({}, TimeInterval(5, 5)); }) == Errc::zero_length_window);
}

TEST_CASE("select_bin walks the ladder") {
  const ParameterLadder ladder;
  auto a = select_bin(0.02, ladder);  // 0.02 * 300 = 6 >= 5
  CHECK(a.bin == 300.0);
  CHECK(a.dense);
  auto b = select_bin(0.001, ladder);  // 3600 gives 3.6, 7200 gives 7.2
  CHECK(b.bin == 7200.0);
  CHECK_FALSE(b.dense);
  auto c = select_bin(1e-6, ladder);  // 0.0864 per day
  CHECK_FALSE(c.measurable());
  CHECK(select_bin(0.0, ladder).bin == std::nullopt);
}

TEST_CASE("property: select_bin returns the minimal qualifying bin") {
  const ParameterLadder ladder;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> log_rate(-7, 2);
  for (int i = 0; i < 5000; ++i) {
    const double lambda = std::pow(10.0, log_rate(rng));
    const auto choice = select_bin(lambda, ladder);
    if (choice.bin) {
      CHECK(lambda * *choice.bin >= ladder.c_min);
      for (double smaller : ladder.bins) {
        if (smaller < *choice.bin) CHECK(lambda * smaller < ladder.c_min);
      }
    } else {
      CHECK(lambda * ladder.bins.back() < ladder.c_min);
    }
  }
}

TEST_CASE("ladder validation") {
  ParameterLadder l;
  l.bins = {600, 300};
  CHECK(error_of([&] { l.validate(); }) == Errc::invalid_argument);
  l.bins = {};
  CHECK(error_of([&] { l.validate(); }) == Errc::invalid_argument);
  l.bins = {300};
  l.c_min = 0;
  CHECK(error_of([&] { l.validate(); }) == Errc::invalid_argument);
  CHECK(parse_ladder("300, 600,1200") == std::vector<double>{300, 600, 1200});
  CHECK(error_of([] { parse_ladder("300,x"); }).has_value());
}

TEST_CASE("build_models") {
  BlockSequences blocks;
  blocks[parse_block("192.0.2.0/24")] = steady(0, 86400, 1.0, "192.0.2.1");
  blocks[parse_block("198.51.100.0/24")] = {};
  const auto models = build_models(blocks, TimeInterval(0, 86400), {});
  REQUIRE(models.size() == 2);
  const auto& up = models.at(parse_block("192.0.2.0/24"));
  CHECK(up.lambda == 1.0);
  CHECK(up.bin == 300.0);
  CHECK(up.measurable);
  CHECK(up.p_quiet_up == doctest::Approx(std::exp(-300.0)));
  CHECK_FALSE(models.at(parse_block("198.51.100.0/24")).measurable);

  CHECK(build_models({}, TimeInterval(0, 86400), {}).empty());

  // Packets after the training window are not counted.
  BlockSequences straddle;
  straddle[parse_block("192.0.2.0/24")] = steady(0, 7200, 1.0);
  const auto m = build_models(straddle, TimeInterval(0, 3600), {});
  CHECK(m.begin()->second.n_train == 3600);
}

TEST_CASE("build_models is pure and job-count invariant") {
  BlockSequences blocks;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 40; ++i) {
    const std::string addr = "10.0." + std::to_string(i) + ".1";
    blocks[block_of(parse_address(addr))] = steady(0, 86400, 1.0 + static_cast<double>(rng() % 5000), addr);
  }
  std::ostringstream a, b;
  write_model_csv(a, build_models(blocks, TimeInterval(0, 86400), {}, 1));
  write_model_csv(b, build_models(blocks, TimeInterval(0, 86400), {}, 4));
  CHECK(a.str() == b.str());
}

TEST_CASE("coverage_curve") {
  ModelMap all_dense;
  all_dense[parse_block("10.0.0.0/24")] = model(1.0, "10.0.0.0/24");
  for (const auto& row : coverage_curve(all_dense, {})) CHECK(row.measurable_fraction == 1.0);

  ModelMap mix;
  mix[parse_block("10.0.0.0/24")] = model(1.0, "10.0.0.0/24");
  mix[parse_block("10.0.1.0/24")] = model(0.01, "10.0.1.0/24");
  mix[parse_block("10.0.2.0/24")] = model(1e-4, "10.0.2.0/24");
  const auto rows = coverage_curve(mix, {});
  REQUIRE(rows.size() == 7);
  CHECK(rows[0].bin_seconds == 300);
  CHECK(rows[0].measurable_fraction == doctest::Approx(1.0 / 3));
  CHECK(rows[1].measurable_fraction == doctest::Approx(2.0 / 3));
  CHECK(rows[6].measurable_fraction == 1.0);

  CHECK(error_of([] { coverage_curve({}, {}); }) == Errc::no_blocks);
}

TEST_CASE("property: coverage is nondecreasing in bin width") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> log_rate(-7, 1);
  for (int trial = 0; trial < 50; ++trial) {
    ModelMap models;
    const int n = 1 + static_cast<int>(rng() % 60);
    for (int i = 0; i < n; ++i) {
      const auto key = "10." + std::to_string(trial) + "." + std::to_string(i) + ".0/24";
      models[parse_block(key)] = model(std::pow(10.0, log_rate(rng)), key);
    }
    const auto rows = coverage_curve(models, {});
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(rows[i].measurable_fraction >= rows[i - 1].measurable_fraction);
    }
  }
}

TEST_CASE("model CSV round trip") {
  ModelMap models;
  models[parse_block("10.0.0.0/24")] = model(0.123456789, "10.0.0.0/24");
  models[parse_block("2001:db8::/48")] = model(1e-6, "2001:db8::/48");
  std::stringstream s;
  write_model_csv(s, models);
  const auto back = read_model_csv(s);
  REQUIRE(back.size() == 2);
  const auto& a = back.at(parse_block("10.0.0.0/24"));
  CHECK(a.lambda == 0.123456789);
  CHECK(a.bin == 300.0);
  CHECK(a.dense);
  CHECK_FALSE(back.at(parse_block("2001:db8::/48")).measurable);
}
