#include "commands.hpp"

#include <nashverify/equilibrium.hpp>
#include <nashverify/errors.hpp>
#include <nashverify/trace_io.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>

namespace nashverify::cli {
namespace {

using ojson = nlohmann::ordered_json;

struct RunFlags {
  std::optional<std::string> config;
  std::optional<std::string> mode;
  std::optional<std::string> instances;
  std::optional<std::string> judge_scores;
  std::optional<std::string> strategy;
  std::optional<std::string> base_url;
  std::optional<std::uint64_t> seed;
  std::optional<double> tau;
  std::optional<double> epsilon;
  std::optional<std::size_t> candidates;
  std::optional<std::size_t> max_steps;
  bool concurrent_judges = false;
  std::size_t threads = 0;
};

void add_run_flags(CLI::App& cmd, RunFlags& f) {
  cmd.add_option("-c,--config", f.config, "JSON run configuration");
  cmd.add_option("--mode", f.mode, "Backend mode")
      ->check(CLI::IsMember({"scripted", "synthetic", "remote"}));
  cmd.add_option("--instances", f.instances, "Instance fixture (JSON Lines)");
  cmd.add_option("--judge-scores", f.judge_scores, "Scripted judge scores (JSON Lines)");
  cmd.add_option("--strategy", f.strategy, "Selection strategy")
      ->check(CLI::IsMember({"full_nash", "no_rejection", "no_selection", "raw_average", "random"}));
  cmd.add_option("--base-url", f.base_url, "Endpoint base URL for remote mode");
  cmd.add_option("--seed", f.seed, "Random seed");
  cmd.add_option("--tau", f.tau, "Mean threshold");
  cmd.add_option("--epsilon", f.epsilon, "Dispersion tolerance");
  cmd.add_option("-k,--candidates", f.candidates, "Candidates per step");
  cmd.add_option("--max-steps", f.max_steps, "Step cap per instance");
  cmd.add_flag("--concurrent-judges", f.concurrent_judges, "Issue judge queries concurrently");
  cmd.add_option("-j,--threads", f.threads, "Instance-level threads (0 = all cores)");
}

RunConfig resolve_config(const RunFlags& f) {
  RunConfig config = default_config();
  if (f.config) {
    try {
      config = load_config(*f.config);
    } catch (const FileError& e) {
      throw ConfigError("config", e.what());
    }
  }
  if (f.mode) config.mode = parse_run_mode(*f.mode);
  if (f.instances) config.instances_path = *f.instances;
  if (f.judge_scores) config.judge_scores_path = *f.judge_scores;
  if (f.strategy) config.strategy = parse_strategy(*f.strategy);
  if (f.seed) config.seed = *f.seed;
  if (f.tau) config.policy.tau = *f.tau;
  if (f.epsilon) config.policy.epsilon = *f.epsilon;
  if (f.candidates) config.generator.config.num_candidates = *f.candidates;
  if (f.max_steps) config.generator.config.max_steps = *f.max_steps;
  if (f.concurrent_judges) config.concurrent_judges = true;
  apply_endpoint_overrides(config, f.base_url);
  config.validate();
  return config;
}

std::string fmt6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument(std::string(what) + ": '" + item + "' is not a number");
    }
  }
  return out;
}

int cmd_solve(const std::string& scores_text, const std::optional<std::string>& lambdas_text,
              std::ostream& out) {
  const RawScoreVector raw(parse_list(scores_text, "--scores"));
  std::vector<double> lambda_values;
  if (lambdas_text) {
    lambda_values = parse_list(*lambdas_text, "--lambdas");
  } else if (raw.size() == 3) {
    const auto defaults = default_config().lambdas();
    lambda_values.assign(defaults.values().begin(), defaults.values().end());
  } else {
    throw InvalidArgument("--lambdas is required unless there are exactly three scores");
  }
  const EquilibriumSolution solution = solve_equilibrium(raw, StubbornnessVector(lambda_values));
  ojson doc;
  doc["scores"] = solution.scores;
  doc["mean"] = solution.mean;
  doc["dispersion"] = solution.dispersion;
  doc["status"] = to_string(solution.status);
  out << doc.dump() << '\n';
  return kExitOk;
}

int cmd_run(const RunFlags& flags, const std::optional<std::string>& out_dir, std::ostream& out,
            std::ostream& err) {
  RunConfig config = resolve_config(flags);
  if (out_dir) config.output_dir = *out_dir;
  const Pipeline pipeline = build_pipeline(config, flags.threads);
  const auto traces = run_pipeline(pipeline);
  bool aborted = false;
  for (const auto& trace : traces) {
    write_trace(trace, config.output_dir);
    if (trace.termination == Termination::Aborted) {
      aborted = true;
      err << "instance " << trace.instance_id
          << " aborted: " << trace.abort_reason.value_or("unknown reason") << '\n';
    }
  }
  out << summary_line(traces) << '\n';
  return aborted ? kExitDataFailure : kExitOk;
}

int cmd_ablate(const RunFlags& flags, const std::string& kind,
               const std::optional<std::string>& out_path, bool want_json,
               const std::optional<std::vector<double>>& grid_flag,
               const std::optional<std::size_t>& sample_size, std::ostream& out) {
  RunConfig config = resolve_config(flags);
  Pipeline pipeline = build_pipeline(config, flags.threads);
  const std::size_t sample = sample_size ? *sample_size : config.sweep.sample_size.value_or(0);
  if (sample > 0) pipeline.instances = sample_instances(pipeline.instances, sample, config.seed);

  const bool synthetic = config.mode == RunMode::Synthetic;
  const std::string label = synthetic ? "synthetic" : std::string(to_string(config.mode));
  const std::filesystem::path csv_path =
      out_path ? std::filesystem::path(*out_path)
               : config.output_dir / ("ablation_" + kind + (synthetic ? ".synthetic" : "") + ".csv");

  std::string json_text;
  if (kind == "strategy") {
    const auto rows = run_decomposition(config.sweep.strategies, pipeline, config.seed);
    write_report(rows, csv_path);
    json_text = decomposition_to_json(rows, label);
  } else {
    SweepConfig sweep;
    sweep.parameter = parse_sweep_parameter(kind);
    const auto& configured =
        sweep.parameter == SweepParameter::Tau ? config.sweep.tau_grid : config.sweep.epsilon_grid;
    sweep.grid = grid_flag ? *grid_flag : configured.value_or(default_grid(sweep.parameter));
    sweep.fixed_other =
        sweep.parameter == SweepParameter::Tau ? config.policy.epsilon : config.policy.tau;
    sweep.strategy = config.strategy;
    sweep.seed = config.seed;
    sweep.validate();
    const auto rows = run_sweep(sweep, pipeline);
    write_report(rows, csv_path);
    json_text = metrics_to_json(rows, label);
  }
  out << csv_path.string() << '\n';
  if (want_json) {
    auto json_path = csv_path;
    json_path.replace_extension(".json");
    write_text_file(json_path, json_text);
    out << json_path.string() << '\n';
  }
  return kExitOk;
}

int cmd_report(const std::string& dir, std::ostream& out) {
  const std::filesystem::path root(dir);
  if (!std::filesystem::is_directory(root)) throw FileError(dir, "not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.ends_with(".trace.json")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<TraceRecord> traces;
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError(path.string(), "cannot open");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
      traces.push_back(trace_from_json(text));
    } catch (const FixtureError& e) {
      throw FixtureError(path.string() + ": " + e.what());
    }
  }
  for (const auto& t : traces) {
    std::size_t fallback = 0;
    for (const auto& s : t.steps) fallback += s.selection.mode == SelectionMode::Fallback ? 1 : 0;
    out << t.instance_id << " termination=" << to_string(t.termination)
        << " steps=" << t.steps.size() << " fallback_steps=" << fallback
        << " answer=" << t.extracted_answer.value_or("-")
        << " gold=" << t.gold_answer.value_or("-");
    if (t.gold_answer) {
      const bool ok = t.extracted_answer && answers_match(*t.extracted_answer, *t.gold_answer);
      out << (ok ? " correct" : " wrong");
    }
    out << '\n';
  }
  out << summary_line(traces) << '\n';
  return kExitOk;
}

}  // namespace

Pipeline build_pipeline(RunConfig& config, std::size_t threads) {
  Pipeline pipeline;
  const JudgeKind kind = config.mode == RunMode::Scripted    ? JudgeKind::Scripted
                         : config.mode == RunMode::Synthetic ? JudgeKind::Synthetic
                                                             : JudgeKind::Remote;
  for (auto& spec : config.judges) {
    spec.kind = kind;
    if (kind == JudgeKind::Remote && !spec.backend) spec.backend = config.endpoint;
  }

  JudgeResources resources;
  resources.seed = config.seed;
  switch (config.mode) {
    case RunMode::Scripted:
      if (!config.instances_path) throw ConfigError("instances", "scripted mode needs an instance fixture");
      if (!config.judge_scores_path) {
        throw ConfigError("judge_scores", "scripted mode needs a judge score fixture");
      }
      pipeline.instances = load_instances(*config.instances_path);
      resources.fixture = std::make_shared<const ScoreFixture>(ScoreFixture::load(*config.judge_scores_path));
      pipeline.generator = std::make_shared<const ScriptedGenerator>();
      break;
    case RunMode::Synthetic:
      pipeline.instances =
          config.instances_path
              ? load_instances(*config.instances_path)
              : make_synthetic_instances(config.synthetic.instances, config.synthetic.steps,
                                         config.generator.config.num_candidates, config.seed);
      pipeline.generator = std::make_shared<const ScriptedGenerator>();
      break;
    case RunMode::Remote: {
      if (!config.instances_path) throw ConfigError("instances", "remote mode needs an instance fixture");
      pipeline.instances = load_instances(*config.instances_path);
      EndpointConfig endpoint = config.endpoint;
      const std::string model = config.generator.model.empty() ? endpoint.model : config.generator.model;
      pipeline.generator = std::make_shared<const RemoteGenerator>(
          std::make_shared<const HttpChatTransport>(endpoint), model, config.generator.config,
          config.generator.prompt_template, config.generator.sample_initial_step,
          config.generator.retry_budget);
      break;
    }
  }
  for (const auto& spec : config.judges) {
    spec.validate();
    pipeline.judges.push_back(make_judge(spec, resources));
  }
  pipeline.lambdas = config.lambdas();
  pipeline.options.policy = config.policy;
  pipeline.options.generator = config.generator.config;
  pipeline.options.strategy = config.strategy;
  pipeline.options.seed = config.seed;
  pipeline.options.answer_pattern = AnswerPattern(config.answer_pattern);
  pipeline.options.terminal.answer_pattern = pipeline.options.answer_pattern;
  pipeline.options.concurrent_judges = config.concurrent_judges;
  pipeline.options.config_snapshot = config.snapshot_json();
  pipeline.threads = threads;
  return pipeline;
}

std::string summary_line(const std::vector<TraceRecord>& traces) {
  std::size_t aborted = 0;
  bool labelled = false;
  for (const auto& t : traces) {
    aborted += t.termination == Termination::Aborted ? 1 : 0;
    labelled = labelled || t.gold_answer.has_value();
  }
  const MetricsRow metrics = compute_metrics(traces, 0.0);
  std::string line = "instances=" + std::to_string(traces.size()) +
                     " aborted=" + std::to_string(aborted) +
                     " accuracy=" + (labelled ? fmt6(metrics.accuracy) : std::string("n/a")) +
                     " mean_fallback_rate=" + fmt6(metrics.fallback_pct);
  return line;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Game-theoretic step verification: solve, run, ablate, report", "nashverify"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "nashverify 0.1.0");

  auto* solve = app.add_subcommand("solve", "Solve the agreement equilibrium for one score vector");
  std::string scores_text;
  std::optional<std::string> lambdas_text;
  solve->add_option("--scores", scores_text, "Comma-separated raw scores in [0,1]")->required();
  solve->add_option("--lambdas", lambdas_text, "Comma-separated stubbornness values (> 0)");

  auto* run = app.add_subcommand("run", "Run verified traces and write one JSON file per instance");
  RunFlags run_flags;
  std::optional<std::string> run_out;
  add_run_flags(*run, run_flags);
  run->add_option("-o,--out", run_out, "Output directory for trace files");

  auto* ablate = app.add_subcommand("ablate", "Threshold sweeps and strategy decomposition");
  RunFlags ablate_flags;
  std::string kind;
  std::optional<std::string> ablate_out;
  bool ablate_json = false;
  std::optional<std::vector<double>> grid;
  std::optional<std::size_t> sample_size;
  add_run_flags(*ablate, ablate_flags);
  ablate->add_option("--kind", kind, "Sweep kind")
      ->required()
      ->check(CLI::IsMember({"tau", "epsilon", "strategy"}));
  ablate->add_option("-o,--out", ablate_out, "CSV report path");
  ablate->add_flag("--json", ablate_json, "Also write a JSON summary next to the CSV");
  ablate->add_option("--grid", grid, "Sweep grid (comma-separated, strictly increasing)")
      ->delimiter(',');
  ablate->add_option("--sample-size", sample_size, "Use a seeded subset of the instances");

  auto* report = app.add_subcommand("report", "Summarize existing trace files");
  std::string traces_dir;
  report->add_option("--traces", traces_dir, "Directory of *.trace.json files")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (solve->parsed()) return cmd_solve(scores_text, lambdas_text, out);
    if (run->parsed()) return cmd_run(run_flags, run_out, out, err);
    if (ablate->parsed()) {
      return cmd_ablate(ablate_flags, kind, ablate_out, ablate_json, grid, sample_size, out);
    }
    if (report->parsed()) return cmd_report(traces_dir, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kExitUsage;
  } catch (const TemplateError& e) {
    err << "template error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataFailure;
  }
  return kExitUsage;
}

}  // namespace nashverify::cli
