#include "nashverify/harness.hpp"

#include "nashverify/errors.hpp"
#include "nashverify/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace nashverify {
namespace {

using ojson = nlohmann::ordered_json;

std::string fmt6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

double fraction(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_aborts(const std::vector<TraceRecord>& traces) {
  for (const auto& trace : traces) {
    if (trace.termination == Termination::Aborted) {
      throw FixtureError("instance '" + trace.instance_id +
                         "' aborted: " + trace.abort_reason.value_or("unknown reason"));
    }
  }
}

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::vector<std::string>> parse_csv_body(std::string_view csv, std::string_view header) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < csv.size()) {
    auto end = csv.find('\n', start);
    if (end == std::string_view::npos) end = csv.size();
    std::string_view line = csv.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  if (lines.empty() || lines.front() != header) {
    throw FixtureError("CSV header mismatch, expected: " + std::string(header));
  }
  const std::size_t columns = split_fields(header).size();
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto fields = split_fields(lines[i]);
    if (fields.size() != columns) {
      throw FixtureError("CSV line " + std::to_string(i + 1) + " has " +
                         std::to_string(fields.size()) + " fields");
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

double to_double(const std::string& field) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw FixtureError("not a number in CSV: '" + field + "'");
  }
}

}  // namespace

std::vector<TraceRecord> run_pipeline(const Pipeline& pipeline) {
  if (!pipeline.generator) throw InvalidArgument("pipeline has no generator");
  const auto& instances = pipeline.instances;
  std::vector<TraceRecord> traces(instances.size());

  std::size_t threads = pipeline.threads == 0 ? std::thread::hardware_concurrency() : pipeline.threads;
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(instances.size(), 1));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < instances.size(); i = next++) {
      try {
        traces[i] = run_trace(*pipeline.generator, pipeline.judges, pipeline.lambdas, instances[i],
                              pipeline.options);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return traces;
}

double accuracy(const std::vector<TraceRecord>& traces) {
  std::size_t labelled = 0;
  std::size_t correct = 0;
  for (const auto& trace : traces) {
    if (!trace.gold_answer) continue;
    ++labelled;
    if (trace.extracted_answer && answers_match(*trace.extracted_answer, *trace.gold_answer)) {
      ++correct;
    }
  }
  return fraction(correct, labelled);
}

MetricsRow compute_metrics(const std::vector<TraceRecord>& traces, double sweep_value) {
  std::size_t candidates = 0;
  std::size_t accepted = 0;
  std::size_t steps = 0;
  std::size_t fallback = 0;
  double score_sum = 0.0;
  double dispersion_sum = 0.0;
  for (const auto& trace : traces) {
    for (const auto& step : trace.steps) {
      ++steps;
      if (step.selection.mode == SelectionMode::Fallback) ++fallback;
      for (const auto& a : step.selection.assessments) {
        ++candidates;
        if (a.accepted) ++accepted;
        score_sum += a.equilibrium.mean;
        dispersion_sum += a.equilibrium.dispersion;
      }
    }
  }
  MetricsRow row;
  row.sweep_value = sweep_value;
  row.accuracy = accuracy(traces);
  row.accept_rate = fraction(accepted, candidates);
  row.mean_eq_score = candidates == 0 ? 0.0 : score_sum / static_cast<double>(candidates);
  row.mean_dispersion = candidates == 0 ? 0.0 : dispersion_sum / static_cast<double>(candidates);
  row.fallback_pct = fraction(fallback, steps);
  row.normal_mode_pct = steps == 0 ? 0.0 : 1.0 - row.fallback_pct;
  return row;
}

DecompositionRow compute_decomposition(const std::vector<TraceRecord>& traces, Strategy strategy) {
  std::size_t steps = 0;
  std::size_t accepted = 0;
  std::size_t all_rejected = 0;
  for (const auto& trace : traces) {
    for (const auto& step : trace.steps) {
      ++steps;
      const std::size_t n = step.selection.accepted_count();
      accepted += n;
      if (n == 0) ++all_rejected;
    }
  }
  return DecompositionRow{
      .strategy = strategy,
      .avg_accepted_per_step = fraction(accepted, steps),
      .all_rejected_pct = fraction(all_rejected, steps),
      .accuracy = accuracy(traces),
  };
}

std::string_view to_string(SweepParameter parameter) {
  return parameter == SweepParameter::Tau ? "tau" : "epsilon";
}

SweepParameter parse_sweep_parameter(std::string_view name) {
  if (name == "tau") return SweepParameter::Tau;
  if (name == "epsilon") return SweepParameter::Epsilon;
  throw InvalidArgument("unknown sweep parameter '" + std::string(name) + "'");
}

std::vector<double> default_grid(SweepParameter parameter) {
  if (parameter == SweepParameter::Tau) return {1e-4, 1e-3, 1e-2, 0.1, 0.6, 1.0, 10.0};
  return {0.001, 0.05, 0.1, 0.5, 1.0, 2.5, 3.0};
}

void SweepConfig::validate() const {
  if (grid.empty()) throw ConfigError("grid", "must not be empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) throw ConfigError("grid", "values must be finite");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw ConfigError("grid", "must be strictly increasing");
  }
  const bool epsilon_swept = parameter == SweepParameter::Epsilon;
  if (epsilon_swept && grid.front() < 0.0) throw ConfigError("grid", "epsilon must be >= 0");
  if (!std::isfinite(fixed_other)) throw ConfigError("fixed_other", "must be finite");
  if (!epsilon_swept && fixed_other < 0.0) throw ConfigError("fixed_other", "epsilon must be >= 0");
}

std::vector<MetricsRow> run_sweep(const SweepConfig& config, const Pipeline& pipeline) {
  config.validate();
  std::vector<MetricsRow> rows;
  rows.reserve(config.grid.size());
  for (double value : config.grid) {
    Pipeline point = pipeline;
    point.options.strategy = config.strategy;
    point.options.seed = config.seed;
    if (config.parameter == SweepParameter::Tau) {
      point.options.policy = AcceptancePolicy{.tau = value, .epsilon = config.fixed_other};
    } else {
      point.options.policy = AcceptancePolicy{.tau = config.fixed_other, .epsilon = value};
    }
    const auto traces = run_pipeline(point);
    check_aborts(traces);
    rows.push_back(compute_metrics(traces, value));
  }
  return rows;
}

std::vector<DecompositionRow> run_decomposition(std::span<const Strategy> strategies,
                                                const Pipeline& pipeline, std::uint64_t seed) {
  std::vector<DecompositionRow> rows;
  rows.reserve(strategies.size());
  for (Strategy strategy : strategies) {
    Pipeline run = pipeline;
    run.options.strategy = strategy;
    run.options.seed = seed;
    const auto traces = run_pipeline(run);
    check_aborts(traces);
    rows.push_back(compute_decomposition(traces, strategy));
  }
  return rows;
}

double overhead_ratio(std::size_t candidates, std::size_t judges, double alpha) {
  if (candidates < 1) throw InvalidArgument("overhead_ratio: candidates must be >= 1");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw InvalidArgument("overhead_ratio: alpha must be finite and >= 0");
  }
  const double k = static_cast<double>(candidates);
  return k + k * static_cast<double>(judges) * alpha;
}

std::vector<InstanceFixture> make_synthetic_instances(std::size_t count, std::size_t steps,
                                                      std::size_t k, std::uint64_t seed) {
  if (steps < 1 || k < 1) throw InvalidArgument("synthetic instances need steps >= 1 and k >= 1");
  static constexpr std::string_view kLetters = "ABCD";
  std::vector<InstanceFixture> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    RandomEngine rng = keyed_engine(seed, {stable_hash("synthetic-instance"), i});
    char id[32];
    std::snprintf(id, sizeof id, "synthetic-%04zu", i);

    InstanceFixture inst;
    inst.instance_id = id;
    inst.question = "Synthetic multiple-choice question " + std::to_string(i) + ".";
    const std::size_t gold = uniform_index(rng, kLetters.size());
    inst.gold_answer = std::string(1, kLetters[gold]);

    for (std::size_t s = 0; s < steps; ++s) {
      const std::size_t correct = uniform_index(rng, k);
      const bool last = s + 1 == steps;
      std::vector<CandidateStep> candidates;
      candidates.reserve(k);
      for (std::size_t c = 0; c < k; ++c) {
        const bool ok = c == correct;
        std::string text;
        if (last) {
          // Wrong candidates name a different letter.
          const std::size_t wrong = (gold + 1 + c % (kLetters.size() - 1)) % kLetters.size();
          text = "Therefore the answer is (" + std::string(1, kLetters[ok ? gold : wrong]) + "). <eos>";
        } else {
          text = "Step " + std::to_string(s + 1) + ", option " + std::to_string(c + 1) + ": " +
                 (ok ? "sound deduction." : "flawed deduction.");
        }
        candidates.push_back(CandidateStep{std::move(text), ok});
      }
      inst.steps.push_back(std::move(candidates));
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<InstanceFixture> sample_instances(const std::vector<InstanceFixture>& instances,
                                              std::size_t count, std::uint64_t seed) {
  if (count >= instances.size()) return instances;
  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  RandomEngine rng = keyed_engine(seed, {stable_hash("sample-instances")});
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(count);
  std::sort(order.begin(), order.end());
  std::vector<InstanceFixture> out;
  out.reserve(count);
  for (std::size_t i : order) out.push_back(instances[i]);
  return out;
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::string out(kMetricsCsvHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += fmt6(r.sweep_value) + ',' + fmt6(r.accuracy) + ',' + fmt6(r.accept_rate) + ',' +
           fmt6(r.mean_eq_score) + ',' + fmt6(r.mean_dispersion) + ',' + fmt6(r.fallback_pct) + ',' +
           fmt6(r.normal_mode_pct) + '\n';
  }
  return out;
}

std::string decomposition_to_csv(const std::vector<DecompositionRow>& rows) {
  std::string out(kDecompositionCsvHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += std::string(to_string(r.strategy)) + ',' + fmt6(r.avg_accepted_per_step) + ',' +
           fmt6(r.all_rejected_pct) + ',' + fmt6(r.accuracy) + '\n';
  }
  return out;
}

void write_text_file(const std::filesystem::path& destination, std::string_view text) {
  if (destination.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(destination.parent_path(), ec);
  }
  std::ofstream out(destination, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError(destination.string(), "cannot open for writing");
  out << text;
  out.flush();
  if (!out) throw FileError(destination.string(), "write failed");
}

void write_report(const std::vector<MetricsRow>& rows, const std::filesystem::path& destination) {
  write_text_file(destination, metrics_to_csv(rows));
}

void write_report(const std::vector<DecompositionRow>& rows,
                  const std::filesystem::path& destination) {
  write_text_file(destination, decomposition_to_csv(rows));
}

std::vector<MetricsRow> parse_metrics_csv(std::string_view csv) {
  std::vector<MetricsRow> rows;
  for (const auto& f : parse_csv_body(csv, kMetricsCsvHeader)) {
    rows.push_back(MetricsRow{to_double(f[0]), to_double(f[1]), to_double(f[2]), to_double(f[3]),
                              to_double(f[4]), to_double(f[5]), to_double(f[6])});
  }
  return rows;
}

std::vector<DecompositionRow> parse_decomposition_csv(std::string_view csv) {
  std::vector<DecompositionRow> rows;
  for (const auto& f : parse_csv_body(csv, kDecompositionCsvHeader)) {
    Strategy strategy;
    try {
      strategy = parse_strategy(f[0]);
    } catch (const InvalidArgument& e) {
      throw FixtureError(e.what());
    }
    rows.push_back(DecompositionRow{strategy, to_double(f[1]), to_double(f[2]), to_double(f[3])});
  }
  return rows;
}

std::string metrics_to_json(const std::vector<MetricsRow>& rows, std::string_view label) {
  ojson doc;
  doc["label"] = label;
  doc["rows"] = ojson::array();
  for (const auto& r : rows) {
    doc["rows"].push_back({{"sweep_value", r.sweep_value},
                           {"accuracy", r.accuracy},
                           {"accept_rate", r.accept_rate},
                           {"mean_eq_score", r.mean_eq_score},
                           {"mean_dispersion", r.mean_dispersion},
                           {"fallback_pct", r.fallback_pct},
                           {"normal_mode_pct", r.normal_mode_pct}});
  }
  return doc.dump(2) + "\n";
}

std::string decomposition_to_json(const std::vector<DecompositionRow>& rows,
                                  std::string_view label) {
  ojson doc;
  doc["label"] = label;
  doc["rows"] = ojson::array();
  for (const auto& r : rows) {
    doc["rows"].push_back({{"strategy", to_string(r.strategy)},
                           {"avg_accepted_per_step", r.avg_accepted_per_step},
                           {"all_rejected_pct", r.all_rejected_pct},
                           {"accuracy", r.accuracy}});
  }
  return doc.dump(2) + "\n";
}

}  // namespace nashverify
