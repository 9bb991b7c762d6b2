#pragma once

// Ablation sweeps over the acceptance thresholds, the five-strategy
// decomposition, and the cost model. Reports are CSV (6 significant digits)
// with an optional JSON summary.

#include "nashverify/orchestrator.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace nashverify {

/// Everything needed to run the orchestrator over a fixture set. Generator
/// and judges must be safe to call from several threads.
struct Pipeline {
  std::vector<InstanceFixture> instances;
  std::shared_ptr<const Generator> generator;
  std::vector<std::shared_ptr<const Judge>> judges;
  StubbornnessVector lambdas{std::vector<double>{1.5, 1.0, 0.8}};
  TraceOptions options;
  /// Instance-level parallelism; 0 means one thread per hardware core.
  std::size_t threads = 1;
};

/// Traces in instance order, whatever the thread count.
std::vector<TraceRecord> run_pipeline(const Pipeline& pipeline);

struct MetricsRow {
  double sweep_value = 0.0;
  double accuracy = 0.0;
  double accept_rate = 0.0;
  double mean_eq_score = 0.0;
  double mean_dispersion = 0.0;
  double fallback_pct = 0.0;
  double normal_mode_pct = 0.0;
};

struct DecompositionRow {
  Strategy strategy = Strategy::FullNash;
  double avg_accepted_per_step = 0.0;
  double all_rejected_pct = 0.0;
  double accuracy = 0.0;
};

/// Fraction of gold-labelled instances whose extracted answer matches; 0 when
/// no instance carries a gold answer.
double accuracy(const std::vector<TraceRecord>& traces);

/// accept_rate, mean_eq_score and mean_dispersion are taken over every
/// candidate of every step; the mode percentages over steps.
MetricsRow compute_metrics(const std::vector<TraceRecord>& traces, double sweep_value);
DecompositionRow compute_decomposition(const std::vector<TraceRecord>& traces, Strategy strategy);

enum class SweepParameter { Tau, Epsilon };

std::string_view to_string(SweepParameter parameter);
SweepParameter parse_sweep_parameter(std::string_view name);

std::vector<double> default_grid(SweepParameter parameter);

struct SweepConfig {
  SweepParameter parameter = SweepParameter::Tau;
  std::vector<double> grid = default_grid(SweepParameter::Tau);
  /// The non-swept threshold (epsilon for a tau sweep and vice versa).
  double fixed_other = 0.1;
  Strategy strategy = Strategy::FullNash;
  std::uint64_t seed = 0;

  /// Throws ConfigError: empty or non-increasing grid, negative epsilon.
  void validate() const;
};

/// One row per grid value. Every grid point reuses the pipeline's fixtures and
/// seed; only the swept threshold changes. Throws FixtureError naming the
/// instance when any trace aborts.
std::vector<MetricsRow> run_sweep(const SweepConfig& config, const Pipeline& pipeline);

/// One row per strategy, same fixtures and seed for all.
std::vector<DecompositionRow> run_decomposition(std::span<const Strategy> strategies,
                                                const Pipeline& pipeline, std::uint64_t seed);

/// Forward passes per step relative to a single unverified sample:
/// k + k * m * alpha.
double overhead_ratio(std::size_t candidates, std::size_t judges, double alpha);

/// `count` instances of `steps` steps with k candidates each. Exactly one
/// candidate per step is correct; final-step candidates state an answer and
/// end with "<eos>". The gold answer is one of A-D.
std::vector<InstanceFixture> make_synthetic_instances(std::size_t count, std::size_t steps,
                                                      std::size_t k, std::uint64_t seed);

/// Deterministic subset of `count` instances (original order kept). Returns
/// everything when count >= instances.size().
std::vector<InstanceFixture> sample_instances(const std::vector<InstanceFixture>& instances,
                                              std::size_t count, std::uint64_t seed);

inline constexpr std::string_view kMetricsCsvHeader =
    "sweep_value,accuracy,accept_rate,mean_eq_score,mean_dispersion,fallback_pct,normal_mode_pct";
inline constexpr std::string_view kDecompositionCsvHeader =
    "strategy,avg_accepted_per_step,all_rejected_pct,accuracy";

std::string metrics_to_csv(const std::vector<MetricsRow>& rows);
std::string decomposition_to_csv(const std::vector<DecompositionRow>& rows);

/// Writes the CSV text; throws FileError with the path on I/O failure.
void write_report(const std::vector<MetricsRow>& rows, const std::filesystem::path& destination);
void write_report(const std::vector<DecompositionRow>& rows,
                  const std::filesystem::path& destination);

/// Parsers for the CSV text above. Throw FixtureError on malformed input.
std::vector<MetricsRow> parse_metrics_csv(std::string_view csv);
std::vector<DecompositionRow> parse_decomposition_csv(std::string_view csv);

/// JSON summary: {"label": ..., "rows": [...]} with the CSV column names.
std::string metrics_to_json(const std::vector<MetricsRow>& rows, std::string_view label);
std::string decomposition_to_json(const std::vector<DecompositionRow>& rows,
                                  std::string_view label);

/// Writes `text` to `destination`, creating parent directories.
void write_text_file(const std::filesystem::path& destination, std::string_view text);

}  // namespace nashverify
