#include <benchmark/benchmark.h>

#include <sstream>

#include "outage/detector.hpp"
#include "outage/evaluator.hpp"
#include "outage/ingest.hpp"
#include "outage/synth.hpp"

using namespace outage;

namespace {

SynthSpec single_block(double lambda) {
  SynthSpec spec;
  const auto block = parse_block("192.0.2.0/24");
  spec.blocks = {{block, lambda}};
  spec.horizon = TimeInterval(0, 172800);
  spec.outages = {{block, TimeInterval(120000, 121800)}};
  return spec;
}

void BM_BeliefUpdate(benchmark::State& state) {
  const DetectorParams params;
  double b = 0.9;
  std::uint64_t k = 0;
  for (auto _ : state) {
    b = belief_update(b, k, 0.05, 300, params);
    k = (k + 7) % 31;
    benchmark::DoNotOptimize(b);
  }
}
BENCHMARK(BM_BeliefUpdate);

void BM_DetectBlockOutages(benchmark::State& state) {
  const double lambda = static_cast<double>(state.range(0)) / 100.0;
  const auto spec = single_block(lambda);
  const auto obs = gen_block(spec, 0);
  const auto model = build_model(spec.blocks[0].block, obs, TimeInterval(0, 86400), {});
  for (auto _ : state) {
    auto events = detect_block_outages(obs, model, {}, TimeInterval(86400, 172800));
    benchmark::DoNotOptimize(events);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(obs.size()));
}
BENCHMARK(BM_DetectBlockOutages)->Arg(5)->Arg(100)->Arg(1000);

void BM_TimeConfusion(benchmark::State& state) {
  PopulationSpec pop;
  pop.count = static_cast<std::size_t>(state.range(0));
  const auto spec = make_population(pop);
  const auto truth = ground_truth(spec);
  Predictions pred;
  for (const auto& b : spec.blocks) pred[b.block];
  for (const auto& o : spec.outages) {
    pred[o.block].emplace_back(o.interval.start() + 30, o.interval.end() + 30);
  }
  for (auto _ : state) {
    auto m = time_confusion(pred, truth, spec.horizon);
    benchmark::DoNotOptimize(m);
  }
}
BENCHMARK(BM_TimeConfusion)->Arg(500)->Arg(5000);

void BM_ParseObservations(benchmark::State& state) {
  const auto obs = gen_block(single_block(1.0), 0);
  std::ostringstream text;
  write_observations(text, obs);
  const std::string data = text.str();
  for (auto _ : state) {
    std::istringstream in(data);
    auto streams = stream_blocks(in, TimeInterval(0, 172800));
    benchmark::DoNotOptimize(streams);
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_ParseObservations);

}  // namespace

BENCHMARK_MAIN();
