#pragma once

#include <nashverify/chat_client.hpp>
#include <nashverify/judges.hpp>
#include <nashverify/orchestrator.hpp>
#include <nashverify/policy.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nashverify::cli {

enum class RunMode { Scripted, Synthetic, Remote };

std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view name);

inline constexpr const char* kBaseUrlEnv = "NASHVERIFY_BASE_URL";
inline constexpr const char* kApiKeyEnv = "NASHVERIFY_API_KEY";

struct GeneratorSettings {
  GeneratorConfig config;
  std::string model;
  std::string prompt_template{builtin_prompt("generator")};
  bool sample_initial_step = true;
  std::size_t retry_budget = 2;
};

struct SyntheticSettings {
  std::size_t instances = 200;
  std::size_t steps = 3;
};

struct SweepSettings {
  std::optional<std::vector<double>> tau_grid;
  std::optional<std::vector<double>> epsilon_grid;
  std::vector<Strategy> strategies{kAllStrategies.begin(), kAllStrategies.end()};
  std::optional<std::size_t> sample_size;
};

struct RunConfig {
  RunMode mode = RunMode::Scripted;
  std::vector<JudgeSpec> judges;
  AcceptancePolicy policy;
  GeneratorSettings generator;
  EndpointConfig endpoint;  // shared backend; per-judge "endpoint" objects override fields
  Strategy strategy = Strategy::FullNash;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> instances_path;
  std::optional<std::filesystem::path> judge_scores_path;
  std::filesystem::path output_dir = "nashverify-out";
  std::string answer_pattern{kDefaultAnswerPattern};
  bool concurrent_judges = false;
  SyntheticSettings synthetic;
  SweepSettings sweep;

  StubbornnessVector lambdas() const;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  /// Resolved settings that influence trace content, as JSON text. Output
  /// location and thread count are left out so traces do not depend on them.
  std::string snapshot_json() const;
};

/// Built-in defaults: visual/logical/contextual judges with stubbornness
/// 1.5/1.0/0.8, tau 0.6, epsilon 0.1, three candidates per step.
RunConfig default_config();

/// Overlays a JSON document onto `config`. Unknown keys are rejected.
/// Relative paths resolve against `base_dir`. Throws ConfigError.
void apply_config_json(RunConfig& config, std::string_view json_text,
                       const std::filesystem::path& base_dir);

/// default_config() overlaid with the file. Throws ConfigError or FileError.
RunConfig load_config(const std::filesystem::path& path);

/// Applies NASHVERIFY_BASE_URL (unless `base_url_flag` is set) and
/// NASHVERIFY_API_KEY, then the flag, to the shared and per-judge endpoints.
void apply_endpoint_overrides(RunConfig& config, const std::optional<std::string>& base_url_flag);

}  // namespace nashverify::cli
