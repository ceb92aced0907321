#include "cli.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <set>
#include <sstream>

#include "outage/core_types.hpp"
#include "outage/detector.hpp"
#include "outage/error.hpp"
#include "outage/evaluator.hpp"
#include "outage/ingest.hpp"
#include "outage/modeler.hpp"
#include "outage/synth.hpp"

namespace outage::cli {

namespace {

namespace fs = std::filesystem;

// Input problems surface as exit code 2 with file (and line) context.
struct DataError {
  std::string message;
};

// Bad flag values found after CLI11 parsing; exit code 1.
struct UsageError {
  std::string message;
};

template <class Fn>
auto with_file(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const LineError& e) {
    throw DataError{path + ":" + std::to_string(e.line()) + ": " + e.what()};
  } catch (const Error& e) {
    throw DataError{path + ": " + e.what()};
  }
}

template <class Fn>
auto validated(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw UsageError{e.what()};
  }
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError{path + ": cannot open for reading"};
  return in;
}

// "-" is standard output.
void write_output(const std::string& path, std::ostream& stdout_stream,
                  const std::function<void(std::ostream&)>& writer) {
  if (path == "-") {
    writer(stdout_stream);
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError{path + ": cannot open for writing"};
  writer(file);
  if (!file) throw DataError{path + ": write failed"};
}

struct CommonOptions {
  std::string family = "both";
  unsigned jobs = 1;
};

struct StreamFlags {
  bool sort = false;
  bool strict = false;
};

struct LadderFlags {
  std::string ladder = "300,600,1200,3600,7200,14400,86400";
  double c_min = 5.0;

  ParameterLadder build() const {
    ParameterLadder l;
    l.bins = parse_ladder(ladder);
    l.c_min = c_min;
    l.validate();
    return l;
  }
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--family", o.family, "Address family to keep: v4, v6 or both")
      ->check(CLI::IsMember({"v4", "v6", "both"}));
  app->add_option("--jobs", o.jobs, "Worker threads for per-block work")
      ->check(CLI::PositiveNumber);
}

void add_stream(CLI::App* app, StreamFlags& s) {
  app->add_flag("--sort", s.sort, "Accept unsorted input and sort it per block");
  app->add_flag("--strict", s.strict, "Abort on malformed lines instead of skipping them");
}

void add_ladder(CLI::App* app, LadderFlags& l) {
  app->add_option("--ladder", l.ladder, "Candidate bin widths in seconds, ascending");
  app->add_option("--c-min", l.c_min, "Expected packets per bin required for measurability");
}

StreamOptions stream_options(const StreamFlags& s, const CommonOptions& c) {
  StreamOptions o;
  o.sort = s.sort;
  o.strict = s.strict;
  o.family = parse_family_filter(c.family);
  return o;
}

BlockStreams load_trace(const std::string& path, const TimeInterval& horizon,
                        const StreamOptions& opts, std::ostream& err) {
  auto streams = with_file(path, [&] { return stream_blocks(fs::path(path), horizon, opts); });
  const auto& m = streams.meta;
  if (m.malformed_lines > 0) {
    err << fmt::format("warning: {}: skipped {} malformed line(s)\n", path, m.malformed_lines);
  }
  return streams;
}

// Appends flags from a JSON config file unless already given on the command
// line, so explicit flags always win.
std::vector<std::string> apply_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!path) return args;

  std::ifstream in(*path);
  if (!in) throw UsageError{*path + ": cannot open config file"};
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError{*path + ": " + e.what()};
  }
  if (!j.is_object()) throw UsageError{*path + ": config must be a JSON object"};

  auto given = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  for (const auto& [key, value] : j.items()) {
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
    } else if (value.is_string()) {
      args.push_back(flag);
      args.push_back(value.get<std::string>());
    } else if (value.is_number()) {
      args.push_back(flag);
      args.push_back(value.dump());
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) {
        if (!joined.empty()) joined += ",";
        joined += v.is_string() ? v.get<std::string>() : v.dump();
      }
      args.push_back(flag);
      args.push_back(joined);
    } else {
      throw UsageError{*path + ": unsupported value for '" + key + "'"};
    }
  }
  return args;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Passive Internet outage detection for /24 IPv4 and /48 IPv6 blocks"};
  app.name("outage");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  app.footer("Options may also be pre-seeded from a JSON object with --config FILE;\n"
             "keys are long flag names without dashes and explicit flags win.");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic trace and its ground truth");
  CommonOptions synth_common;
  std::string spec_path, trace_out, truth_out;
  std::optional<std::uint64_t> seed;
  synth->add_option("--spec", spec_path, "Synthetic trace specification (JSON)")->required();
  synth->add_option("--trace", trace_out, "Output observation log (TSV)")->required();
  synth->add_option("--truth", truth_out, "Output ground truth (CSV)")->required();
  synth->add_option("--seed", seed, "Override the spec's seed");
  add_common(synth, synth_common);

  // model
  auto* model = app.add_subcommand("model", "Fit per-block rate models and dump them as CSV");
  CommonOptions model_common;
  StreamFlags model_stream;
  LadderFlags model_ladder;
  std::string model_in, model_train, model_out = "-";
  model->add_option("--in", model_in, "Observation log (.tsv or .tsv.gz)")->required();
  model->add_option("--train", model_train, "Training window start:end (epoch seconds)")
      ->required();
  model->add_option("--out", model_out, "Model CSV output, - for stdout");
  add_ladder(model, model_ladder);
  add_stream(model, model_stream);
  add_common(model, model_common);

  // detect
  auto* detect = app.add_subcommand("detect", "Detect outages in a trace");
  CommonOptions detect_common;
  StreamFlags detect_stream;
  LadderFlags detect_ladder;
  DetectorParams params;
  std::string detect_in, detect_window, detect_train, detect_out = "-", detect_format = "csv";
  std::string models_out;
  bool aggregate = false;
  bool no_silences = false;
  detect->add_option("--in", detect_in, "Observation log (.tsv or .tsv.gz)")->required();
  detect->add_option("--detect", detect_window, "Detection window start:end")->required();
  detect->add_option("--train", detect_train,
                     "Training window start:end; defaults to the 24 h before --detect");
  detect->add_option("--out", detect_out, "Outage output, - for stdout");
  detect->add_option("--format", detect_format, "Output format")
      ->check(CLI::IsMember({"csv", "jsonl"}));
  detect->add_option("--models-out", models_out, "Also write the fitted model CSV here");
  detect->add_flag("--aggregate", aggregate,
                   "Pool unmeasurable blocks by /16 or /32 and detect at that scale");
  detect->add_option("--epsilon", params.epsilon, "Residual traffic fraction while down");
  detect->add_option("--b-floor", params.b_floor, "Lower belief clamp");
  detect->add_option("--b-ceil", params.b_ceil, "Upper belief clamp");
  detect->add_option("--t-down", params.t_down, "Belief below which a block goes down");
  detect->add_option("--t-up", params.t_up, "Belief above which a block comes back up");
  detect->add_option("--prior-up", params.prior_up, "Belief at the start of the window");
  detect->add_option("--guard-quantile", params.guard_quantile,
                     "Inter-arrival quantile used to place refined outage starts");
  detect->add_option("--min-silence", params.min_silence,
                     "Shortest exact-timestamp silence reported as an outage (s)");
  detect->add_option("--outage-prior-rate", params.outage_prior_rate,
                     "Prior outage onsets per second for silence detection");
  detect->add_flag("--no-silences", no_silences, "Disable exact-timestamp silence detection");
  add_ladder(detect, detect_ladder);
  add_stream(detect, detect_stream);
  add_common(detect, detect_common);

  // eval
  auto* eval = app.add_subcommand("eval", "Score predicted outages against ground truth");
  CommonOptions eval_common;
  std::string eval_mode = "time", pred_path, truth_path, eval_horizon, eval_models, eval_out;
  double tau = 180.0;
  std::optional<double> quiet_bin;
  eval->add_option("--mode", eval_mode, "time (seconds) or events (counts)")
      ->check(CLI::IsMember({"time", "events"}));
  eval->add_option("--pred", pred_path, "Outage CSV from detect")->required();
  eval->add_option("--truth", truth_path, "Ground truth CSV")->required();
  eval->add_option("--tau", tau, "Event matching tolerance (s)");
  eval->add_option("--quiet-bin", quiet_bin, "Width of availability bins in event mode (s); default tau");
  eval->add_option("--horizon", eval_horizon,
                   "Scoring window start:end; defaults to the extent of the ground truth");
  eval->add_option("--models", eval_models,
                   "Model CSV; only its measurable blocks count as monitored");
  eval->add_option("--out", eval_out, "Write the JSON report here and print the table");
  add_common(eval, eval_common);

  // coverage
  auto* coverage = app.add_subcommand("coverage", "Measurable fraction of blocks per bin width");
  CommonOptions cov_common;
  StreamFlags cov_stream;
  LadderFlags cov_ladder;
  std::string cov_in, cov_train, cov_out = "-";
  coverage->add_option("--in", cov_in, "Observation log (.tsv or .tsv.gz)")->required();
  coverage->add_option("--train", cov_train, "Window the rates are estimated over")->required();
  coverage->add_option("--out", cov_out, "Coverage CSV output, - for stdout");
  add_ladder(coverage, cov_ladder);
  add_stream(coverage, cov_stream);
  add_common(coverage, cov_common);

  try {
    auto args = apply_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.message << "\n";
    return kExitUsage;
  }

  try {
    if (synth->parsed()) {
      const auto filter = validated([&] { return parse_family_filter(synth_common.family); });
      auto in = open_in(spec_path);
      auto spec = with_file(spec_path, [&] { return read_synth_spec(in); });
      if (seed) spec.seed = *seed;
      spec = filter_family(std::move(spec), filter);
      const auto trace = gen_trace(spec, synth_common.jobs);
      write_output(trace_out, out, [&](std::ostream& o) { write_observations(o, trace.observations); });
      write_output(truth_out, out, [&](std::ostream& o) { write_truth_csv(o, trace.truth); });
      err << fmt::format("synth: {} blocks, {} observations, {} injected outages\n",
                         spec.blocks.size(), trace.observations.size(), spec.outages.size());
    } else if (model->parsed()) {
      const auto ladder = validated([&] { return model_ladder.build(); });
      const auto train = validated([&] { return parse_window(model_train); });
      const auto opts = validated([&] { return stream_options(model_stream, model_common); });
      const auto streams = load_trace(model_in, train, opts, err);
      const auto models =
          with_file(model_in, [&] { return build_models(streams.blocks, train, ladder, model_common.jobs); });
      write_output(model_out, out, [&](std::ostream& o) { write_model_csv(o, models); });
    } else if (detect->parsed()) {
      DetectionConfig config;
      config.ladder = validated([&] { return detect_ladder.build(); });
      config.detect = validated([&] { return parse_window(detect_window); });
      config.train = detect_train.empty()
                         ? TimeInterval(config.detect.start() - 86400.0, config.detect.start())
                         : validated([&] { return parse_window(detect_train); });
      if (config.train.start() > config.detect.start()) {
        throw UsageError{"--train must not start after --detect"};
      }
      params.exact_silences = !no_silences;
      validated([&] { params.validate(); });
      config.params = params;
      config.aggregate = aggregate;
      config.jobs = detect_common.jobs;
      const auto opts = validated([&] { return stream_options(detect_stream, detect_common); });

      const TimeInterval span(std::min(config.train.start(), config.detect.start()),
                              std::max(config.train.end(), config.detect.end()));
      const auto streams = load_trace(detect_in, span, opts, err);
      const auto result = with_file(detect_in, [&] { return run_detection(streams.blocks, config); });
      write_output(detect_out, out, [&](std::ostream& o) {
        if (detect_format == "jsonl") {
          write_events_jsonl(o, result.events);
        } else {
          write_events_csv(o, result.events);
        }
      });
      if (!models_out.empty()) {
        write_output(models_out, out, [&](std::ostream& o) { write_model_csv(o, result.models); });
      }
      err << fmt::format("detect: {} blocks, {} measurable, {} aggregates ({} insufficient), {} events\n",
                         result.models.size(), result.blocks_scanned, result.aggregates_scanned,
                         result.aggregates_insufficient, result.events.size());
    } else if (eval->parsed()) {
      const auto filter = validated([&] { return parse_family_filter(eval_common.family); });
      if (!(tau > 0.0)) throw UsageError{"--tau must be positive"};
      if (quiet_bin && !(*quiet_bin > 0.0)) throw UsageError{"--quiet-bin must be positive"};
      std::optional<TimeInterval> horizon;
      if (!eval_horizon.empty()) horizon = validated([&] { return parse_window(eval_horizon); });

      auto pred_in = open_in(pred_path);
      auto events = with_file(pred_path, [&] { return read_events_csv(pred_in); });
      auto truth_in = open_in(truth_path);
      auto truth = with_file(truth_path, [&] { return read_truth_csv(truth_in); });
      std::erase_if(events, [&](const OutageEvent& e) {
        return e.granularity != Granularity::Block || !accepts(filter, e.block.family());
      });
      std::erase_if(truth, [&](const GroundTruthRecord& r) { return !accepts(filter, r.block.family()); });

      std::vector<BlockId> monitored;
      if (!eval_models.empty()) {
        auto models_in = open_in(eval_models);
        const auto models = with_file(eval_models, [&] { return read_model_csv(models_in); });
        std::set<BlockId> keep;
        for (const auto& [block, m] : models) {
          if (m.measurable && accepts(filter, block.family())) keep.insert(block);
        }
        monitored.assign(keep.begin(), keep.end());
        std::erase_if(events, [&](const OutageEvent& e) { return !keep.count(e.block); });
      } else {
        std::set<BlockId> keep;
        for (const auto& r : truth) keep.insert(r.block);
        monitored.assign(keep.begin(), keep.end());
      }
      const auto pred = predictions_from_events(events, monitored);

      if (!horizon) {
        if (truth.empty()) throw DataError{truth_path + ": no ground truth records"};
        double lo = truth.front().interval.start();
        double hi = truth.front().interval.end();
        for (const auto& r : truth) {
          lo = std::min(lo, r.interval.start());
          hi = std::max(hi, r.interval.end());
        }
        horizon = TimeInterval(lo, hi);
      }

      EvalReport report;
      report.horizon = *horizon;
      report.tau = tau;
      {
        std::set<BlockId> truth_blocks;
        for (const auto& r : truth) truth_blocks.insert(r.block);
        report.blocks_scored = static_cast<std::size_t>(std::count_if(
            pred.begin(), pred.end(), [&](const auto& p) { return truth_blocks.count(p.first) > 0; }));
      }
      if (eval_mode == "time") {
        report.mode = EvalMode::Time;
        report.matrix = with_file(truth_path, [&] { return time_confusion(pred, truth, *horizon); });
      } else {
        report.mode = EvalMode::Events;
        EventOptions opts;
        opts.tau = tau;
        opts.quiet_bin = quiet_bin;
        report.matrix =
            with_file(truth_path, [&] { return event_confusion(pred, truth, *horizon, opts); });
      }
      const auto json = report_json(report);
      if (eval_out.empty()) {
        out << json;
      } else {
        write_output(eval_out, out, [&](std::ostream& o) { o << json; });
        out << report_table(report);
      }
    } else if (coverage->parsed()) {
      const auto ladder = validated([&] { return cov_ladder.build(); });
      const auto train = validated([&] { return parse_window(cov_train); });
      const auto opts = validated([&] { return stream_options(cov_stream, cov_common); });
      const auto streams = load_trace(cov_in, train, opts, err);
      const auto models =
          with_file(cov_in, [&] { return build_models(streams.blocks, train, ladder, cov_common.jobs); });
      const auto rows = with_file(cov_in, [&] { return coverage_curve(models, ladder); });
      write_output(cov_out, out, [&](std::ostream& o) { write_coverage_csv(o, rows); });
    }
  } catch (const UsageError& e) {
    err << "error: " << e.message << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.message << "\n";
    return kExitData;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace outage::cli
