#include "nashverify/orchestrator.hpp"

#include "nashverify/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <future>
#include <sstream>

namespace nashverify {
namespace {

using json = nlohmann::json;

std::string_view trim(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) {
    text.remove_prefix(1);
  }
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) {
    text.remove_suffix(1);
  }
  return text;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::optional<std::string> optional_string(const json& record, const char* field) {
  auto it = record.find(field);
  if (it == record.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

InstanceFixture parse_instance(const json& record) {
  InstanceFixture inst;
  inst.instance_id = record.at("instance_id").get<std::string>();
  inst.question = record.at("question").get<std::string>();
  inst.image_path = optional_string(record, "image_path");
  inst.gold_answer = optional_string(record, "gold_answer");
  inst.initial_step = optional_string(record, "initial_step");
  for (const json& step : record.at("steps")) {
    std::vector<CandidateStep> candidates;
    for (const json& c : step.at("candidates")) {
      CandidateStep candidate{c.at("text").get<std::string>(), std::nullopt};
      if (auto it = c.find("is_correct"); it != c.end() && !it->is_null()) {
        candidate.is_correct = it->get<bool>();
      }
      candidates.push_back(std::move(candidate));
    }
    inst.steps.push_back(std::move(candidates));
  }
  return inst;
}

std::string first_line(std::string_view content) {
  for (std::string_view line : split_lines(content)) {
    if (auto t = trim(line); !t.empty()) return std::string(t);
  }
  return {};
}

}  // namespace

std::vector<InstanceFixture> parse_instances(std::string_view jsonl, std::string_view source_name) {
  std::vector<InstanceFixture> out;
  const auto lines = split_lines(jsonl);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::string where = std::string(source_name) + ":" + std::to_string(i + 1);
    json record = json::parse(lines[i], nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      throw FixtureError(where + ": not a JSON object");
    }
    try {
      out.push_back(parse_instance(record));
    } catch (const json::exception& e) {
      throw FixtureError(where + ": " + e.what());
    }
  }
  return out;
}

std::vector<InstanceFixture> load_instances(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError(path.string(), "cannot open instance fixture");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_instances(buffer.str(), path.string());
}

void GeneratorConfig::validate() const {
  if (num_candidates < 1) throw ConfigError("generator.num_candidates", "must be >= 1");
  if (max_steps < 1) throw ConfigError("generator.max_steps", "must be >= 1");
  if (max_new_tokens < 1) throw ConfigError("generator.max_new_tokens", "must be >= 1");
  if (!(temperature >= 0.0)) throw ConfigError("generator.temperature", "must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("generator.top_p", "must lie in (0,1]");
}

AnswerPattern::AnswerPattern(std::string pattern) : source_(std::move(pattern)) {
  try {
    auto re = std::make_shared<std::regex>(source_, std::regex::ECMAScript | std::regex::icase);
    if (re->mark_count() != 1) {
      throw ConfigError("answer_pattern", "pattern must have exactly one capture group");
    }
    regex_ = std::move(re);
  } catch (const std::regex_error& e) {
    throw ConfigError("answer_pattern", std::string("invalid pattern: ") + e.what());
  }
}

std::optional<std::string> AnswerPattern::last_capture(std::string_view text) const {
  std::optional<std::string> found;
  using It = std::string_view::const_iterator;
  for (std::regex_iterator<It> it(text.begin(), text.end(), *regex_), end; it != end; ++it) {
    found = (*it)[1].str();
  }
  return found;
}

bool AnswerPattern::matches(std::string_view text) const {
  return std::regex_search(text.begin(), text.end(), *regex_);
}

bool is_terminal(std::string_view step_text, const TerminalRule& rule) {
  if (step_text.empty()) return false;
  for (const auto& marker : rule.markers) {
    if (!marker.empty() && step_text.find(marker) != std::string_view::npos) return true;
  }
  for (std::string_view line : split_lines(step_text)) {
    if (rule.answer_pattern.matches(line)) return true;
  }
  return false;
}

std::optional<std::string> ScriptedGenerator::initial_step(const InstanceFixture& instance) const {
  return instance.initial_step;
}

std::vector<CandidateStep> ScriptedGenerator::generate_candidates(const GenerationState& state,
                                                                  std::size_t k) const {
  const auto& inst = state.instance;
  if (state.step_index >= inst.steps.size()) {
    throw FixtureError("instance '" + inst.instance_id + "': fixture exhausted at step " +
                       std::to_string(state.step_index) + " before a terminal step");
  }
  const auto& available = inst.steps[state.step_index];
  if (k > available.size()) {
    throw FixtureError("instance '" + inst.instance_id + "' step " +
                       std::to_string(state.step_index) + ": " + std::to_string(k) +
                       " candidates requested, fixture has " + std::to_string(available.size()));
  }
  std::vector<CandidateStep> out(available.begin(),
                                 available.begin() + static_cast<std::ptrdiff_t>(k));
  for (const auto& c : out) {
    if (c.text.empty()) {
      throw FixtureError("instance '" + inst.instance_id + "' step " +
                         std::to_string(state.step_index) + ": empty candidate text");
    }
  }
  return out;
}

RemoteGenerator::RemoteGenerator(std::shared_ptr<const ChatTransport> transport, std::string model,
                                 GeneratorConfig config, std::string prompt_template,
                                 bool sample_initial_step, std::size_t retry_budget)
    : transport_(std::move(transport)),
      model_(std::move(model)),
      config_(config),
      prompt_template_(std::move(prompt_template)),
      sample_initial_step_(sample_initial_step),
      retry_budget_(retry_budget) {
  if (!transport_) throw InvalidArgument("remote generator needs a transport");
  config_.validate();
}

std::string RemoteGenerator::sample(const InstanceFixture& instance,
                                    std::span<const std::string> accepted_steps) const {
  JudgeContext ctx;
  ctx.question = instance.question;
  ctx.image_reference = instance.image_path;
  ctx.prior_steps.assign(accepted_steps.begin(), accepted_steps.end());

  ChatRequest request;
  request.model = model_;
  request.messages = render_prompt(prompt_template_, ctx);
  request.temperature = config_.temperature;
  request.top_p = config_.top_p;
  request.max_tokens = static_cast<int>(config_.max_new_tokens);
  request.stop = {"\n"};

  std::string last_failure;
  for (std::size_t attempt = 0; attempt <= retry_budget_; ++attempt) {
    try {
      std::string step = first_line(transport_->send(request).content);
      if (!step.empty()) return step;
      last_failure = "empty completion";
    } catch (const BackendError& e) {
      if (!e.retryable()) throw;
      last_failure = e.what();
    }
  }
  throw BackendError("generator failed after " + std::to_string(retry_budget_ + 1) +
                         " attempts: " + last_failure,
                     std::nullopt, false);
}

std::optional<std::string> RemoteGenerator::initial_step(const InstanceFixture& instance) const {
  if (!sample_initial_step_) return std::nullopt;
  return sample(instance, {});
}

std::vector<CandidateStep> RemoteGenerator::generate_candidates(const GenerationState& state,
                                                                std::size_t k) const {
  std::vector<CandidateStep> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back({sample(state.instance, state.accepted_steps), std::nullopt});
  }
  return out;
}

std::string_view to_string(Termination termination) {
  switch (termination) {
    case Termination::EndToken:
      return "end_token";
    case Termination::MaxSteps:
      return "max_steps";
    case Termination::Aborted:
      return "aborted";
  }
  return "unknown";
}

Termination parse_termination(std::string_view name) {
  for (Termination t : {Termination::EndToken, Termination::MaxSteps, Termination::Aborted}) {
    if (to_string(t) == name) return t;
  }
  throw InvalidArgument("unknown termination '" + std::string(name) + "'");
}

std::vector<std::string> TraceRecord::selected_steps() const {
  std::vector<std::string> out;
  if (initial_step) out.push_back(*initial_step);
  for (const auto& step : steps) out.push_back(step.selected_text);
  return out;
}

TraceRecord run_trace(const Generator& generator,
                      std::span<const std::shared_ptr<const Judge>> judges,
                      const StubbornnessVector& lambdas, const InstanceFixture& instance,
                      const TraceOptions& options) {
  if (judges.size() != lambdas.size()) {
    throw InvalidArgument("judge count (" + std::to_string(judges.size()) +
                          ") differs from stubbornness count (" + std::to_string(lambdas.size()) +
                          ")");
  }
  options.policy.validate();
  options.generator.validate();

  TraceRecord trace;
  trace.instance_id = instance.instance_id;
  trace.question = instance.question;
  trace.image_reference = instance.image_path;
  trace.gold_answer = instance.gold_answer;
  trace.strategy = options.strategy;
  trace.config_snapshot = options.config_snapshot;
  for (const auto& judge : judges) trace.judge_names.push_back(judge->spec().name);

  const std::size_t k = options.generator.num_candidates;
  const std::size_t m = judges.size();
  std::vector<std::string> accepted;
  bool done = false;

  try {
    if (auto opening = generator.initial_step(instance)) {
      trace.initial_step = *opening;
      accepted.push_back(*opening);
      if (is_terminal(*opening, options.terminal)) {
        trace.termination = Termination::EndToken;
        done = true;
      }
    }

    for (std::size_t step = 0; !done; ++step) {
      auto candidates = generator.generate_candidates({instance, step, accepted}, k);
      if (candidates.size() != k) {
        throw FixtureError("generator returned " + std::to_string(candidates.size()) +
                           " candidates, expected " + std::to_string(k));
      }

      std::vector<JudgeQuery> queries;
      queries.reserve(k * m);
      for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t j = 0; j < m; ++j) {
          JudgeQuery q;
          q.key = {instance.instance_id, step, c, judges[j]->spec().name};
          q.context = {instance.question, instance.image_path, accepted, candidates[c].text};
          q.step_is_correct = candidates[c].is_correct;
          queries.push_back(std::move(q));
        }
      }

      // Results are addressed by (candidate, judge), never by completion order.
      std::vector<double> scores(k * m);
      if (options.concurrent_judges) {
        std::vector<std::future<double>> pending;
        pending.reserve(queries.size());
        for (std::size_t q = 0; q < queries.size(); ++q) {
          pending.push_back(std::async(std::launch::async, [&, q] {
            return judges[q % m]->score(queries[q]);
          }));
        }
        std::exception_ptr first_error;
        for (std::size_t q = 0; q < pending.size(); ++q) {
          try {
            scores[q] = pending[q].get();
          } catch (...) {
            if (!first_error) first_error = std::current_exception();
          }
        }
        if (first_error) std::rethrow_exception(first_error);
      } else {
        for (std::size_t q = 0; q < queries.size(); ++q) {
          scores[q] = judges[q % m]->score(queries[q]);
        }
      }

      std::vector<RawScoreVector> raw_matrix;
      raw_matrix.reserve(k);
      for (std::size_t c = 0; c < k; ++c) {
        raw_matrix.emplace_back(std::vector<double>(scores.begin() + static_cast<std::ptrdiff_t>(c * m),
                                                    scores.begin() + static_cast<std::ptrdiff_t>((c + 1) * m)));
      }

      auto rng = keyed_engine(options.seed,
                              {stable_hash(instance.instance_id), step, stable_hash("selection")});
      auto selection =
          select_with_strategy(options.strategy, raw_matrix, lambdas, options.policy, &rng);

      StepRecord record;
      record.step_index = step;
      record.selected_text = candidates[selection.chosen_index].text;
      record.candidates = std::move(candidates);
      record.selection = std::move(selection);
      accepted.push_back(record.selected_text);
      trace.steps.push_back(std::move(record));

      if (is_terminal(accepted.back(), options.terminal)) {
        trace.termination = Termination::EndToken;
        done = true;
      } else if (trace.steps.size() >= options.generator.max_steps) {
        trace.termination = Termination::MaxSteps;
        done = true;
      }
    }
  } catch (const Error& e) {
    trace.termination = Termination::Aborted;
    trace.abort_reason = e.what();
  }

  if (trace.termination != Termination::Aborted) {
    trace.extracted_answer = extract_answer(trace, options.answer_pattern);
  }
  return trace;
}

std::optional<std::string> extract_answer(const TraceRecord& trace, const AnswerPattern& pattern) {
  std::optional<std::string> answer;
  for (const auto& step : trace.selected_steps()) {
    for (std::string_view line : split_lines(step)) {
      if (auto capture = pattern.last_capture(line)) answer = std::move(capture);
    }
  }
  return answer;
}

std::optional<std::string> extract_answer(const TraceRecord& trace, std::string_view pattern) {
  return extract_answer(trace, AnswerPattern(std::string(pattern)));
}

bool answers_match(std::string_view extracted, std::string_view gold) {
  extracted = trim(extracted);
  gold = trim(gold);
  return extracted.size() == gold.size() &&
         std::equal(extracted.begin(), extracted.end(), gold.begin(), [](char a, char b) {
           return std::tolower(static_cast<unsigned char>(a)) ==
                  std::tolower(static_cast<unsigned char>(b));
         });
}

}  // namespace nashverify
