#pragma once

// Step-wise verified decoding: generate k candidates, score each with m
// independent judges, solve one equilibrium per candidate, select, append,
// and repeat until a terminal step or the step cap.

#include "nashverify/chat_client.hpp"
#include "nashverify/equilibrium.hpp"
#include "nashverify/judges.hpp"
#include "nashverify/policy.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nashverify {

struct CandidateStep {
  std::string text;
  std::optional<bool> is_correct;

  friend bool operator==(const CandidateStep&, const CandidateStep&) = default;
};

/// One record of the instance fixture (JSON Lines).
struct InstanceFixture {
  std::string instance_id;
  std::string question;
  std::optional<std::string> image_path;
  std::optional<std::string> gold_answer;
  /// Unverified opening step; appended before the verified loop starts.
  std::optional<std::string> initial_step;
  std::vector<std::vector<CandidateStep>> steps;
};

std::vector<InstanceFixture> parse_instances(std::string_view jsonl,
                                             std::string_view source_name = "<memory>");
std::vector<InstanceFixture> load_instances(const std::filesystem::path& path);

struct GeneratorConfig {
  std::size_t num_candidates = 3;
  double temperature = 0.8;
  double top_p = 0.6;
  std::size_t max_new_tokens = 1000;
  std::size_t max_steps = 20;

  void validate() const;
};

inline constexpr std::string_view kDefaultAnswerPattern =
    R"(answer is:?\s*\(?([A-Za-z0-9]+)\)?)";

/// Case-insensitive ECMAScript pattern with exactly one capture group.
class AnswerPattern {
 public:
  AnswerPattern() : AnswerPattern(std::string(kDefaultAnswerPattern)) {}
  /// Throws ConfigError for invalid expressions or a capture count != 1.
  explicit AnswerPattern(std::string pattern);

  /// Capture of the last match in `text`, if any.
  std::optional<std::string> last_capture(std::string_view text) const;
  bool matches(std::string_view text) const;
  const std::string& source() const noexcept { return source_; }

 private:
  std::string source_;
  std::shared_ptr<const std::regex> regex_;
};

struct TerminalRule {
  std::vector<std::string> markers = {"<eos>", "</s>", "<|endoftext|>", "<|im_end|>", "<|eot_id|>"};
  AnswerPattern answer_pattern;
};

/// True iff the step contains a terminal marker or a line matching the
/// answer pattern. Empty text is never terminal.
bool is_terminal(std::string_view step_text, const TerminalRule& rule = {});

struct GenerationState {
  const InstanceFixture& instance;
  std::size_t step_index = 0;
  std::span<const std::string> accepted_steps;
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::optional<std::string> initial_step(const InstanceFixture& instance) const = 0;
  virtual std::vector<CandidateStep> generate_candidates(const GenerationState& state,
                                                         std::size_t k) const = 0;
};

/// Replays the fixture's candidates verbatim, in fixture order.
class ScriptedGenerator final : public Generator {
 public:
  std::optional<std::string> initial_step(const InstanceFixture& instance) const override;
  std::vector<CandidateStep> generate_candidates(const GenerationState& state,
                                                 std::size_t k) const override;
};

/// Samples each candidate from a chat-completions endpoint. One request per
/// candidate; the reply is cut at its first non-empty line.
class RemoteGenerator final : public Generator {
 public:
  RemoteGenerator(std::shared_ptr<const ChatTransport> transport, std::string model,
                  GeneratorConfig config, std::string prompt_template,
                  bool sample_initial_step = true, std::size_t retry_budget = 2);

  std::optional<std::string> initial_step(const InstanceFixture& instance) const override;
  std::vector<CandidateStep> generate_candidates(const GenerationState& state,
                                                 std::size_t k) const override;

 private:
  std::string sample(const InstanceFixture& instance,
                     std::span<const std::string> accepted_steps) const;

  std::shared_ptr<const ChatTransport> transport_;
  std::string model_;
  GeneratorConfig config_;
  std::string prompt_template_;
  bool sample_initial_step_;
  std::size_t retry_budget_;
};

enum class Termination { EndToken, MaxSteps, Aborted };

std::string_view to_string(Termination termination);
Termination parse_termination(std::string_view name);

struct StepRecord {
  std::size_t step_index = 0;
  std::vector<CandidateStep> candidates;
  SelectionOutcome selection;
  std::string selected_text;
};

struct TraceRecord {
  std::string instance_id;
  std::string question;
  std::optional<std::string> image_reference;
  std::optional<std::string> gold_answer;
  std::optional<std::string> initial_step;
  std::vector<std::string> judge_names;
  Strategy strategy = Strategy::FullNash;
  std::vector<StepRecord> steps;
  Termination termination = Termination::MaxSteps;
  std::optional<std::string> abort_reason;
  std::optional<std::string> extracted_answer;
  std::string config_snapshot = "{}";  // JSON text, embedded verbatim

  /// Selected texts in order, including the unverified opening step.
  std::vector<std::string> selected_steps() const;
};

struct TraceOptions {
  AcceptancePolicy policy;
  GeneratorConfig generator;
  Strategy strategy = Strategy::FullNash;
  std::uint64_t seed = 0;
  TerminalRule terminal;
  AnswerPattern answer_pattern;
  /// Issue the k*m judge queries of a step concurrently.
  bool concurrent_judges = false;
  std::string config_snapshot = "{}";
};

/// Runs one instance. Generator or judge failures end the run with
/// Termination::Aborted and an abort reason; they are never dropped.
/// Throws InvalidArgument when judges and lambdas disagree in length.
TraceRecord run_trace(const Generator& generator,
                      std::span<const std::shared_ptr<const Judge>> judges,
                      const StubbornnessVector& lambdas, const InstanceFixture& instance,
                      const TraceOptions& options);

/// Capture from the last matching line across the selected steps.
std::optional<std::string> extract_answer(const TraceRecord& trace, const AnswerPattern& pattern);
std::optional<std::string> extract_answer(const TraceRecord& trace, std::string_view pattern);

/// Case-insensitive comparison after trimming whitespace.
bool answers_match(std::string_view extracted, std::string_view gold);

}  // namespace nashverify
