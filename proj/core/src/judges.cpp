#include "nashverify/judges.hpp"

#include "nashverify/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace nashverify {
namespace {

using json = nlohmann::json;

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident(char c) { return is_alnum(c) || c == '_'; }

std::string trim_newlines(std::string_view text) {
  while (!text.empty() && (text.front() == '\n' || text.front() == '\r')) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) {
    text.remove_suffix(1);
  }
  return std::string(text);
}

std::string format_prior_steps(const std::vector<std::string>& steps) {
  if (steps.empty()) return "(none)";
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1) + ". " + steps[i];
  }
  return out;
}

std::string substitute(std::string_view text, const JudgeContext& ctx, const std::string& prior) {
  std::string out;
  out.reserve(text.size() + ctx.candidate_step.size() + prior.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{' && i + 1 < text.size() && is_ident_start(text[i + 1])) {
      std::size_t end = i + 1;
      while (end < text.size() && is_ident(text[end])) ++end;
      if (end < text.size() && text[end] == '}') {
        const std::string_view name = text.substr(i + 1, end - i - 1);
        if (name == "question") {
          out += ctx.question;
        } else if (name == "prior_steps") {
          out += prior;
        } else if (name == "candidate_step") {
          out += ctx.candidate_step;
        } else {
          throw TemplateError(std::string(name));
        }
        i = end + 1;
        continue;
      }
    }
    out += text[i++];
  }
  return out;
}

double clamp_unit(double v) { return std::clamp(v, 0.0, 1.0); }

double noisy(double mu, double sigma, RandomEngine& rng) {
  if (sigma == 0.0) return clamp_unit(mu);
  std::normal_distribution<double> dist(mu, sigma);
  return clamp_unit(dist(rng));
}

std::string describe(const QueryKey& key) {
  std::ostringstream os;
  os << "instance '" << key.instance_id << "' step " << key.step_index << " candidate "
     << key.candidate_index << " judge '" << key.judge_name << "'";
  return os.str();
}

class ScriptedJudge final : public Judge {
 public:
  ScriptedJudge(JudgeSpec spec, std::shared_ptr<const ScoreFixture> fixture)
      : Judge(std::move(spec)), fixture_(std::move(fixture)) {}

  double score(const JudgeQuery& query) const override {
    QueryKey key = query.key;
    key.judge_name = spec().name;
    if (auto found = fixture_->find(key)) return clamp_unit(*found);
    throw FixtureError("no scripted score for " + describe(key));
  }

 private:
  std::shared_ptr<const ScoreFixture> fixture_;
};

class SyntheticJudge final : public Judge {
 public:
  SyntheticJudge(JudgeSpec spec, std::uint64_t seed) : Judge(std::move(spec)), seed_(seed) {}

  double score(const JudgeQuery& query) const override {
    if (!query.step_is_correct) {
      throw FixtureError("synthetic judge needs an is_correct label for " + describe(query.key));
    }
    auto rng = keyed_engine(seed_, {stable_hash(query.key.instance_id), query.key.step_index,
                                    query.key.candidate_index, stable_hash(spec().name)});
    return synthetic_sample(spec().synthetic, *query.step_is_correct, rng);
  }

 private:
  std::uint64_t seed_;
};

class RemoteJudge final : public Judge {
 public:
  RemoteJudge(JudgeSpec spec, std::shared_ptr<const ChatTransport> transport)
      : Judge(std::move(spec)), transport_(std::move(transport)) {}

  double score(const JudgeQuery& query) const override {
    return remote_score(spec(), query.context, spec().retry_budget, *transport_);
  }

 private:
  std::shared_ptr<const ChatTransport> transport_;
};

}  // namespace

std::string_view to_string(JudgeKind kind) {
  switch (kind) {
    case JudgeKind::Scripted:
      return "scripted";
    case JudgeKind::Synthetic:
      return "synthetic";
    case JudgeKind::Remote:
      return "remote";
  }
  return "unknown";
}

JudgeKind parse_judge_kind(std::string_view name) {
  for (JudgeKind k : {JudgeKind::Scripted, JudgeKind::Synthetic, JudgeKind::Remote}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown judge kind '" + std::string(name) + "'");
}

void SyntheticJudgeParams::validate() const {
  auto unit = [](double v, const char* field) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw ConfigError(field, "must lie in [0,1]");
    }
  };
  unit(mu_correct, "mu_correct");
  unit(mu_incorrect, "mu_incorrect");
  unit(detect_probability, "detect_probability");
  if (!std::isfinite(sigma) || sigma < 0.0) throw ConfigError("sigma", "must be >= 0");
}

void JudgeSpec::validate() const {
  if (name.empty()) throw ConfigError("name", "judge name must not be empty");
  if (!std::isfinite(stubbornness) || stubbornness <= 0.0) {
    throw ConfigError("judges." + name + ".stubbornness", "must be > 0");
  }
  switch (kind) {
    case JudgeKind::Scripted:
      break;
    case JudgeKind::Synthetic:
      synthetic.validate();
      break;
    case JudgeKind::Remote:
      if (prompt_template.empty()) {
        throw ConfigError("judges." + name + ".prompt_template", "remote judges need a template");
      }
      if (!backend) {
        throw ConfigError("judges." + name + ".backend", "remote judges need an endpoint");
      }
      break;
  }
}

std::vector<ChatMessage> render_prompt(std::string_view template_text, const JudgeContext& ctx) {
  std::string_view system_part;
  std::string_view user_part = template_text;
  std::size_t line_start = 0;
  while (line_start <= template_text.size()) {
    std::size_t line_end = template_text.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = template_text.size();
    std::string_view line = template_text.substr(line_start, line_end - line_start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line == "---") {
      system_part = template_text.substr(0, line_start);
      user_part = line_end < template_text.size() ? template_text.substr(line_end + 1) : "";
      break;
    }
    if (line_end == template_text.size()) break;
    line_start = line_end + 1;
  }

  const std::string prior = format_prior_steps(ctx.prior_steps);
  std::vector<ChatMessage> out;
  out.push_back({ChatMessage::Role::System, ChatMessage::Kind::Text,
                 trim_newlines(substitute(system_part, ctx, prior))});
  out.push_back({ChatMessage::Role::User, ChatMessage::Kind::Text,
                 trim_newlines(substitute(user_part, ctx, prior))});
  if (ctx.image_reference) {
    out.push_back({ChatMessage::Role::User, ChatMessage::Kind::Image, *ctx.image_reference});
  }
  return out;
}

double parse_score(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    const bool starts_number =
        is_digit(text[i]) || (text[i] == '.' && i + 1 < text.size() && is_digit(text[i + 1]));
    if (!starts_number) continue;

    std::size_t start = i;
    if (start > 0 && text[start - 1] == '-' && (start == 1 || !is_alnum(text[start - 2]))) {
      --start;
    }
    std::size_t end = i;
    while (end < text.size() && is_digit(text[end])) ++end;
    if (end < text.size() && text[end] == '.') {
      ++end;
      while (end < text.size() && is_digit(text[end])) ++end;
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data() + start, text.data() + end, value);
    if (ec != std::errc() && ec != std::errc::result_out_of_range) break;
    (void)ptr;
    if (!std::isfinite(value)) value = value > 0 ? 1.0 : 0.0;
    return clamp_unit(value);
  }
  throw ParseError(std::string(text));
}

double synthetic_sample(const SyntheticJudgeParams& params, bool step_is_correct,
                        RandomEngine& rng) {
  if (step_is_correct) return noisy(params.mu_correct, params.sigma, rng);
  std::bernoulli_distribution detects(params.detect_probability);
  const double mu = detects(rng) ? params.mu_incorrect : params.mu_correct;
  return noisy(mu, params.sigma, rng);
}

ScoreFixture ScoreFixture::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError(path.string(), "cannot open judge score fixture");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

ScoreFixture ScoreFixture::parse(std::string_view jsonl, std::string_view source_name) {
  ScoreFixture fixture;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    const std::string_view line = jsonl.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == jsonl.size()) break;
      continue;
    }
    const std::string where = std::string(source_name) + ":" + std::to_string(line_no);
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      throw FixtureError(where + ": not a JSON object");
    }
    try {
      QueryKey key{record.at("instance_id").get<std::string>(),
                   record.at("step_index").get<std::size_t>(),
                   record.at("candidate_index").get<std::size_t>(),
                   record.at("judge_name").get<std::string>()};
      const double score = record.at("score").get<double>();
      if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
        throw FixtureError(where + ": score out of [0,1]");
      }
      if (fixture.find(key)) throw FixtureError(where + ": duplicate entry for " + describe(key));
      fixture.insert(std::move(key), score);
    } catch (const json::exception& e) {
      throw FixtureError(where + ": " + e.what());
    }
    if (end == jsonl.size()) break;
  }
  return fixture;
}

void ScoreFixture::insert(QueryKey key, double score) { scores_[std::move(key)] = score; }

std::optional<double> ScoreFixture::find(const QueryKey& key) const {
  if (auto it = scores_.find(key); it != scores_.end()) return it->second;
  return std::nullopt;
}

std::unique_ptr<Judge> make_judge(const JudgeSpec& spec, const JudgeResources& resources) {
  spec.validate();
  switch (spec.kind) {
    case JudgeKind::Scripted:
      if (!resources.fixture) {
        throw ConfigError("judge_scores", "scripted judge '" + spec.name + "' needs a score fixture");
      }
      return std::make_unique<ScriptedJudge>(spec, resources.fixture);
    case JudgeKind::Synthetic:
      return std::make_unique<SyntheticJudge>(spec, resources.seed);
    case JudgeKind::Remote: {
      auto transport = resources.transport
                           ? resources.transport
                           : std::make_shared<const HttpChatTransport>(*spec.backend);
      return std::make_unique<RemoteJudge>(spec, std::move(transport));
    }
  }
  throw ConfigError("kind", "unknown judge kind");
}

double remote_score(const JudgeSpec& spec, const JudgeContext& ctx, std::size_t retry_budget,
                    const ChatTransport& transport) {
  ChatRequest request;
  request.model = spec.backend ? spec.backend->model : std::string();
  request.messages = render_prompt(spec.prompt_template, ctx);
  request.temperature = spec.temperature;
  request.top_p = spec.top_p;
  request.max_tokens = spec.max_tokens;

  const auto backoff = spec.backend ? spec.backend->retry_backoff : std::chrono::milliseconds(0);
  std::string last_failure;
  std::optional<int> last_status;
  const std::size_t attempts = retry_budget + 1;
  for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0 && backoff.count() > 0) {
      std::this_thread::sleep_for(backoff * (1LL << std::min<std::size_t>(attempt - 1, 6)));
    }
    try {
      return parse_score(transport.send(request).content);
    } catch (const ParseError& e) {
      last_failure = e.what();
      last_status.reset();
    } catch (const BackendError& e) {
      if (!e.retryable()) {
        throw BackendError("judge '" + spec.name + "': " + e.what(), e.status(), false);
      }
      last_failure = e.what();
      last_status = e.status();
    }
  }
  throw BackendError("judge '" + spec.name + "' failed after " + std::to_string(attempts) +
                         " attempts: " + last_failure,
                     last_status, false);
}

}  // namespace nashverify
