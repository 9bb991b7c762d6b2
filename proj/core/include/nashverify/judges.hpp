#pragma once

// Judge backends: scripted fixtures, seeded synthetic judges and remote
// chat-completion models. A judge only ever sees the question, the accepted
// prior steps and the candidate; there is no channel to other judges' scores.

#include "nashverify/chat_client.hpp"
#include "nashverify/random.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace nashverify {

struct JudgeContext {
  std::string question;
  std::optional<std::string> image_reference;
  std::vector<std::string> prior_steps;
  std::string candidate_step;
};

/// Identifies one judge query inside a run.
struct QueryKey {
  std::string instance_id;
  std::size_t step_index = 0;
  std::size_t candidate_index = 0;
  std::string judge_name;

  auto tie() const { return std::tie(instance_id, step_index, candidate_index, judge_name); }
  friend bool operator<(const QueryKey& a, const QueryKey& b) { return a.tie() < b.tie(); }
  friend bool operator==(const QueryKey& a, const QueryKey& b) { return a.tie() == b.tie(); }
};

struct JudgeQuery {
  QueryKey key;
  JudgeContext context;
  /// Ground truth label; only synthetic judges read it.
  std::optional<bool> step_is_correct;
};

enum class JudgeKind { Scripted, Synthetic, Remote };

std::string_view to_string(JudgeKind kind);
JudgeKind parse_judge_kind(std::string_view name);

struct SyntheticJudgeParams {
  double mu_correct = 0.85;
  double mu_incorrect = 0.30;
  double sigma = 0.08;  // 0 gives the degenerate (noise-free) judge
  double detect_probability = 0.6;

  void validate() const;
};

struct JudgeSpec {
  std::string name;
  JudgeKind kind = JudgeKind::Scripted;
  double stubbornness = 1.0;
  std::string prompt_template;  // template text (see render_prompt)
  std::optional<std::filesystem::path> prompt_template_path;
  std::optional<EndpointConfig> backend;
  SyntheticJudgeParams synthetic;
  std::size_t retry_budget = 2;
  int max_tokens = 16;
  double temperature = 0.0;
  double top_p = 1.0;

  /// Throws ConfigError when the spec is incomplete for its kind.
  void validate() const;
};

/// Prompt-template text for the bundled roles: "visual", "logical",
/// "contextual" and "generator".
std::string_view builtin_prompt(std::string_view role);

/// Line "---" separates the system part from the user part; without it the
/// whole template is the user part and the system text is empty. Placeholders
/// {question}, {prior_steps} and {candidate_step} are substituted; prior steps
/// render as numbered lines, or "(none)" when empty. Output is always
/// (system, user[, image]).
std::vector<ChatMessage> render_prompt(std::string_view template_text, const JudgeContext& ctx);

/// First decimal number in the text, clamped to [0,1]. Locale independent.
double parse_score(std::string_view model_output);

double synthetic_sample(const SyntheticJudgeParams& params, bool step_is_correct, RandomEngine& rng);

/// Scripted judge scores keyed by (instance, step, candidate, judge).
class ScoreFixture {
 public:
  static ScoreFixture load(const std::filesystem::path& path);
  static ScoreFixture parse(std::string_view jsonl, std::string_view source_name = "<memory>");

  void insert(QueryKey key, double score);
  std::optional<double> find(const QueryKey& key) const;
  std::size_t size() const noexcept { return scores_.size(); }

 private:
  std::map<QueryKey, double> scores_;
};

class Judge {
 public:
  explicit Judge(JudgeSpec spec) : spec_(std::move(spec)) {}
  virtual ~Judge() = default;

  /// Always in [0,1]. Safe to call concurrently.
  virtual double score(const JudgeQuery& query) const = 0;

  const JudgeSpec& spec() const noexcept { return spec_; }

 private:
  JudgeSpec spec_;
};

struct JudgeResources {
  std::shared_ptr<const ScoreFixture> fixture;     // Scripted
  std::uint64_t seed = 0;                          // Synthetic
  std::shared_ptr<const ChatTransport> transport;  // Remote; built from spec.backend if null
};

std::unique_ptr<Judge> make_judge(const JudgeSpec& spec, const JudgeResources& resources);

/// Render, send, parse. Transport failures, retryable HTTP statuses and
/// unparseable replies are retried up to `retry_budget` extra times.
double remote_score(const JudgeSpec& spec, const JudgeContext& ctx, std::size_t retry_budget,
                    const ChatTransport& transport);

}  // namespace nashverify
