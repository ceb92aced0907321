#include "outage/modeler.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "outage/parallel.hpp"
#include "csv.hpp"

namespace outage {

void ParameterLadder::validate() const {
  if (bins.empty()) throw Error(Errc::invalid_argument, "bin ladder is empty");
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (!(bins[i] > 0.0) || !std::isfinite(bins[i])) {
      throw Error(Errc::invalid_argument, "bin widths must be positive");
    }
    if (i > 0 && !(bins[i - 1] < bins[i])) {
      throw Error(Errc::invalid_argument, "bin ladder must be strictly ascending");
    }
  }
  if (!(c_min > 0.0)) throw Error(Errc::invalid_argument, "c_min must be positive");
}

std::vector<double> parse_ladder(std::string_view text) {
  std::vector<double> bins;
  for (auto field : detail::split(text, ',')) {
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
      throw Error(Errc::invalid_argument, "bad bin ladder '" + std::string(text) + "'");
    }
    bins.push_back(v);
  }
  return bins;
}

std::uint64_t count_in_window(std::span<const Observation> obs, const TimeInterval& window) {
  return static_cast<std::uint64_t>(std::count_if(
      obs.begin(), obs.end(), [&](const Observation& o) { return window.contains(o.timestamp); }));
}

double estimate_rate(std::span<const Observation> obs, const TimeInterval& train_window) {
  if (train_window.empty()) {
    throw Error(Errc::zero_length_window, "zero-length training window");
  }
  return static_cast<double>(count_in_window(obs, train_window)) / train_window.measure();
}

BinChoice select_bin(double lambda, const ParameterLadder& ladder) {
  for (std::size_t i = 0; i < ladder.bins.size(); ++i) {
    if (lambda * ladder.bins[i] >= ladder.c_min) return {ladder.bins[i], i == 0};
  }
  return {};
}

BlockModel model_from_rate(const BlockId& block, const TimeInterval& train_window,
                           std::uint64_t n_train, double lambda, const ParameterLadder& ladder) {
  BlockModel model;
  model.block = block;
  model.train_window = train_window;
  model.n_train = n_train;
  model.lambda = lambda;
  const BinChoice choice = select_bin(lambda, ladder);
  model.bin = choice.bin;
  model.measurable = choice.measurable();
  model.dense = choice.dense;
  model.p_quiet_up = model.measurable ? std::exp(-lambda * *choice.bin) : 1.0;
  return model;
}

BlockModel build_model(const BlockId& block, std::span<const Observation> obs,
                       const TimeInterval& train_window, const ParameterLadder& ladder) {
  const double lambda = estimate_rate(obs, train_window);
  return model_from_rate(block, train_window, count_in_window(obs, train_window), lambda, ladder);
}

ModelMap build_models(const BlockSequences& blocks, const TimeInterval& train_window,
                      const ParameterLadder& ladder, unsigned jobs) {
  ladder.validate();
  if (train_window.empty()) {
    throw Error(Errc::zero_length_window, "zero-length training window");
  }
  std::vector<const BlockSequences::value_type*> entries;
  entries.reserve(blocks.size());
  for (const auto& entry : blocks) entries.push_back(&entry);

  std::vector<std::optional<BlockModel>> built(entries.size());
  parallel_for(entries.size(), jobs, [&](std::size_t i) {
    built[i] = build_model(entries[i]->first, entries[i]->second, train_window, ladder);
  });

  ModelMap models;
  for (auto& m : built) {
    auto block = m->block;
    models.emplace(block, std::move(*m));
  }
  return models;
}

std::vector<CoverageRow> coverage_curve(const ModelMap& models, const ParameterLadder& ladder) {
  ladder.validate();
  if (models.empty()) throw Error(Errc::no_blocks, "no blocks to compute coverage over");
  std::vector<CoverageRow> rows;
  rows.reserve(ladder.bins.size());
  for (const double bin : ladder.bins) {
    const auto n = std::count_if(models.begin(), models.end(), [&](const auto& entry) {
      return entry.second.lambda * bin >= ladder.c_min;
    });
    rows.push_back({bin, static_cast<double>(n) / static_cast<double>(models.size())});
  }
  return rows;
}

void write_model_csv(std::ostream& out, const ModelMap& models) {
  out << "block,family,lambda,bin,measurable,dense,n_train\n";
  for (const auto& [block, m] : models) {
    out << fmt::format("{},{},{:.9g},{},{},{},{}\n", to_string(block), to_string(block.family()),
                       m.lambda, m.bin ? fmt::format("{:g}", *m.bin) : std::string(),
                       m.measurable ? 1 : 0, m.dense ? 1 : 0, m.n_train);
  }
}

ModelMap read_model_csv(std::istream& in) {
  detail::CsvReader csv(in, {"block", "lambda", "bin", "measurable", "dense", "n_train"});
  ModelMap models;
  while (csv.next()) {
    BlockModel m;
    m.block = csv.wrap([&] { return parse_block(csv.field("block")); });
    m.lambda = csv.number("lambda");
    if (!csv.field("bin").empty()) m.bin = csv.number("bin");
    m.measurable = csv.flag("measurable");
    m.dense = csv.flag("dense");
    m.n_train = static_cast<std::uint64_t>(csv.number("n_train"));
    m.p_quiet_up = m.bin ? std::exp(-m.lambda * *m.bin) : 1.0;
    models.emplace(m.block, m);
  }
  return models;
}

void write_coverage_csv(std::ostream& out, std::span<const CoverageRow> rows) {
  out << "bin_seconds,measurable_fraction\n";
  for (const auto& row : rows) {
    out << fmt::format("{:g},{:.6f}\n", row.bin_seconds, row.measurable_fraction);
  }
}

}  // namespace outage
