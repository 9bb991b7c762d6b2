#include "config.hpp"

#include <nashverify/errors.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <limits>

namespace nashverify::cli {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(where, "must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) {
      throw ConfigError(where.empty() ? key : where + "." + key, "unknown key");
    }
  }
}

std::string field(const std::string& where, std::string_view key) {
  return where.empty() ? std::string(key) : where + "." + std::string(key);
}

double get_real(const json& obj, const std::string& where, std::string_view key, double current) {
  const auto it = obj.find(key);
  if (it == obj.end()) return current;
  if (!it->is_number()) throw ConfigError(field(where, key), "must be a number");
  return it->get<double>();
}

std::size_t get_count(const json& obj, const std::string& where, std::string_view key,
                      std::size_t current) {
  const auto it = obj.find(key);
  if (it == obj.end()) return current;
  if (!it->is_number_integer() || it->get<long long>() < 0) {
    throw ConfigError(field(where, key), "must be a non-negative integer");
  }
  return it->get<std::size_t>();
}

std::string get_string(const json& obj, const std::string& where, std::string_view key,
                       const std::string& current) {
  const auto it = obj.find(key);
  if (it == obj.end()) return current;
  if (!it->is_string()) throw ConfigError(field(where, key), "must be a string");
  return it->get<std::string>();
}

bool get_bool(const json& obj, const std::string& where, std::string_view key, bool current) {
  const auto it = obj.find(key);
  if (it == obj.end()) return current;
  if (!it->is_boolean()) throw ConfigError(field(where, key), "must be true or false");
  return it->get<bool>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path.string(), "cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void apply_endpoint(EndpointConfig& endpoint, const json& obj, const std::string& where) {
  reject_unknown(obj, where, {"base_url", "path", "model", "timeout_ms", "retry_backoff_ms"});
  endpoint.base_url = get_string(obj, where, "base_url", endpoint.base_url);
  endpoint.path = get_string(obj, where, "path", endpoint.path);
  endpoint.model = get_string(obj, where, "model", endpoint.model);
  endpoint.timeout = std::chrono::milliseconds(
      get_count(obj, where, "timeout_ms", static_cast<std::size_t>(endpoint.timeout.count())));
  endpoint.retry_backoff = std::chrono::milliseconds(get_count(
      obj, where, "retry_backoff_ms", static_cast<std::size_t>(endpoint.retry_backoff.count())));
}

std::string load_template(const json& obj, const std::string& where,
                          const std::filesystem::path& base, const std::string& current) {
  const bool has_builtin = obj.contains("prompt");
  const bool has_file = obj.contains("prompt_file");
  if (has_builtin && has_file) {
    throw ConfigError(field(where, "prompt"), "give either prompt or prompt_file, not both");
  }
  if (has_builtin) {
    const std::string role = get_string(obj, where, "prompt", "");
    try {
      return std::string(builtin_prompt(role));
    } catch (const InvalidArgument&) {
      throw ConfigError(field(where, "prompt"), "no built-in prompt named '" + role + "'");
    }
  }
  if (has_file) {
    const auto path = resolve(base, get_string(obj, where, "prompt_file", ""));
    try {
      return read_file(path);
    } catch (const FileError& e) {
      throw ConfigError(field(where, "prompt_file"), e.what());
    }
  }
  return current;
}

std::string default_template_for(const std::string& name) {
  try {
    return std::string(builtin_prompt(name));
  } catch (const InvalidArgument&) {
    return {};
  }
}

JudgeSpec parse_judge(const json& obj, const std::string& where, const EndpointConfig& shared,
                      const std::filesystem::path& base) {
  reject_unknown(obj, where,
                 {"name", "stubbornness", "prompt", "prompt_file", "endpoint", "synthetic",
                  "retry_budget", "max_tokens", "temperature", "top_p"});
  JudgeSpec spec;
  spec.name = get_string(obj, where, "name", "");
  if (spec.name.empty()) throw ConfigError(field(where, "name"), "required");
  spec.stubbornness = get_real(obj, where, "stubbornness", spec.stubbornness);
  spec.prompt_template = load_template(obj, where, base, default_template_for(spec.name));
  if (auto it = obj.find("endpoint"); it != obj.end()) {
    EndpointConfig endpoint = shared;
    apply_endpoint(endpoint, *it, field(where, "endpoint"));
    spec.backend = endpoint;
  }
  if (auto it = obj.find("synthetic"); it != obj.end()) {
    const std::string w = field(where, "synthetic");
    reject_unknown(*it, w, {"mu_correct", "mu_incorrect", "sigma", "detect_probability"});
    auto& s = spec.synthetic;
    s.mu_correct = get_real(*it, w, "mu_correct", s.mu_correct);
    s.mu_incorrect = get_real(*it, w, "mu_incorrect", s.mu_incorrect);
    s.sigma = get_real(*it, w, "sigma", s.sigma);
    s.detect_probability = get_real(*it, w, "detect_probability", s.detect_probability);
  }
  spec.retry_budget = get_count(obj, where, "retry_budget", spec.retry_budget);
  spec.max_tokens = static_cast<int>(get_count(obj, where, "max_tokens",
                                               static_cast<std::size_t>(spec.max_tokens)));
  spec.temperature = get_real(obj, where, "temperature", spec.temperature);
  spec.top_p = get_real(obj, where, "top_p", spec.top_p);
  return spec;
}

std::vector<double> parse_grid(const json& value, const std::string& where) {
  if (!value.is_array()) throw ConfigError(where, "must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : value) {
    if (!v.is_number()) throw ConfigError(where, "must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

JudgeSpec default_judge(std::string name, double stubbornness) {
  JudgeSpec spec;
  spec.prompt_template = std::string(builtin_prompt(name));
  spec.name = std::move(name);
  spec.stubbornness = stubbornness;
  return spec;
}

ojson endpoint_snapshot(const EndpointConfig& e) {
  // The API key is deliberately never written out.
  return {{"base_url", e.base_url}, {"path", e.path}, {"model", e.model}};
}

}  // namespace

std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Scripted:
      return "scripted";
    case RunMode::Synthetic:
      return "synthetic";
    case RunMode::Remote:
      return "remote";
  }
  return "scripted";
}

RunMode parse_run_mode(std::string_view name) {
  if (name == "scripted") return RunMode::Scripted;
  if (name == "synthetic") return RunMode::Synthetic;
  if (name == "remote") return RunMode::Remote;
  throw ConfigError("mode", "expected scripted, synthetic or remote, got '" + std::string(name) + "'");
}

StubbornnessVector RunConfig::lambdas() const {
  std::vector<double> values;
  values.reserve(judges.size());
  for (const auto& j : judges) values.push_back(j.stubbornness);
  return StubbornnessVector(std::move(values));
}

void RunConfig::validate() const {
  if (judges.size() < 2) throw ConfigError("judges", "at least two judges are required");
  for (std::size_t i = 0; i < judges.size(); ++i) {
    const std::string where = "judges[" + std::to_string(i) + "]";
    const auto& j = judges[i];
    if (!std::isfinite(j.stubbornness) || j.stubbornness <= 0.0) {
      throw ConfigError(where + ".stubbornness", "must be > 0");
    }
    for (std::size_t k = 0; k < i; ++k) {
      if (judges[k].name == j.name) throw ConfigError(where + ".name", "duplicate judge name");
    }
    if (j.retry_budget > 100) throw ConfigError(where + ".retry_budget", "must be <= 100");
    try {
      j.synthetic.validate();
    } catch (const ConfigError& e) {
      const std::string message = std::string(e.what()).substr(e.field().size() + 2);
      throw ConfigError(where + ".synthetic." + e.field(), message);
    }
    if (mode == RunMode::Remote && j.prompt_template.empty()) {
      throw ConfigError(where + ".prompt", "remote judges need a prompt or prompt_file");
    }
  }
  if (!std::isfinite(policy.tau)) throw ConfigError("policy.tau", "must be finite");
  if (!std::isfinite(policy.epsilon) || policy.epsilon < 0.0) {
    throw ConfigError("policy.epsilon", "must be >= 0");
  }
  const auto& g = generator.config;
  if (g.num_candidates < 1) throw ConfigError("generator.num_candidates", "must be >= 1");
  if (g.max_steps < 1) throw ConfigError("generator.max_steps", "must be >= 1");
  if (g.max_new_tokens < 1) throw ConfigError("generator.max_new_tokens", "must be >= 1");
  if (!(g.temperature >= 0.0)) throw ConfigError("generator.temperature", "must be >= 0");
  if (!(g.top_p > 0.0 && g.top_p <= 1.0)) throw ConfigError("generator.top_p", "must be in (0,1]");
  if (synthetic.steps < 1) throw ConfigError("synthetic.steps", "must be >= 1");
  if (sweep.strategies.empty()) throw ConfigError("sweep.strategies", "must not be empty");
  AnswerPattern{answer_pattern};  // throws ConfigError when malformed
}

std::string RunConfig::snapshot_json() const {
  ojson doc;
  doc["mode"] = to_string(mode);
  doc["seed"] = seed;
  doc["strategy"] = to_string(strategy);
  doc["policy"] = {{"tau", policy.tau}, {"epsilon", policy.epsilon}};
  const auto& g = generator.config;
  doc["generator"] = {{"num_candidates", g.num_candidates}, {"temperature", g.temperature},
                      {"top_p", g.top_p},   {"max_new_tokens", g.max_new_tokens},
                      {"max_steps", g.max_steps}, {"model", generator.model}};
  ojson judges_json = ojson::array();
  for (const auto& j : judges) {
    ojson entry = {{"name", j.name}, {"kind", to_string(j.kind)}, {"stubbornness", j.stubbornness}};
    if (j.kind == JudgeKind::Synthetic) {
      entry["synthetic"] = {{"mu_correct", j.synthetic.mu_correct},
                            {"mu_incorrect", j.synthetic.mu_incorrect},
                            {"sigma", j.synthetic.sigma},
                            {"detect_probability", j.synthetic.detect_probability}};
    }
    if (j.kind == JudgeKind::Remote && j.backend) entry["endpoint"] = endpoint_snapshot(*j.backend);
    judges_json.push_back(std::move(entry));
  }
  doc["judges"] = std::move(judges_json);
  doc["answer_pattern"] = answer_pattern;
  if (mode == RunMode::Remote) doc["endpoint"] = endpoint_snapshot(endpoint);
  return doc.dump();
}

RunConfig default_config() {
  RunConfig config;
  config.judges = {default_judge("visual", 1.5), default_judge("logical", 1.0),
                   default_judge("contextual", 0.8)};
  return config;
}

void apply_config_json(RunConfig& config, std::string_view json_text,
                       const std::filesystem::path& base_dir) {
  const json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("<document>", "not valid JSON");
  reject_unknown(doc, "",
                 {"mode", "judges", "policy", "generator", "endpoint", "strategy", "seed",
                  "instances", "judge_scores", "output_dir", "answer_pattern",
                  "concurrent_judges", "synthetic", "sweep"});

  if (doc.contains("mode")) config.mode = parse_run_mode(get_string(doc, "", "mode", ""));
  if (auto it = doc.find("endpoint"); it != doc.end()) apply_endpoint(config.endpoint, *it, "endpoint");
  if (auto it = doc.find("judges"); it != doc.end()) {
    if (!it->is_array()) throw ConfigError("judges", "must be an array");
    config.judges.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
      config.judges.push_back(
          parse_judge((*it)[i], "judges[" + std::to_string(i) + "]", config.endpoint, base_dir));
    }
  }
  if (auto it = doc.find("policy"); it != doc.end()) {
    reject_unknown(*it, "policy", {"tau", "epsilon"});
    config.policy.tau = get_real(*it, "policy", "tau", config.policy.tau);
    config.policy.epsilon = get_real(*it, "policy", "epsilon", config.policy.epsilon);
  }
  if (auto it = doc.find("generator"); it != doc.end()) {
    reject_unknown(*it, "generator",
                   {"num_candidates", "temperature", "top_p", "max_new_tokens", "max_steps",
                    "model", "prompt", "prompt_file", "sample_initial_step", "retry_budget"});
    auto& g = config.generator;
    g.config.num_candidates = get_count(*it, "generator", "num_candidates", g.config.num_candidates);
    g.config.temperature = get_real(*it, "generator", "temperature", g.config.temperature);
    g.config.top_p = get_real(*it, "generator", "top_p", g.config.top_p);
    g.config.max_new_tokens = get_count(*it, "generator", "max_new_tokens", g.config.max_new_tokens);
    g.config.max_steps = get_count(*it, "generator", "max_steps", g.config.max_steps);
    g.model = get_string(*it, "generator", "model", g.model);
    g.prompt_template = load_template(*it, "generator", base_dir, g.prompt_template);
    g.sample_initial_step = get_bool(*it, "generator", "sample_initial_step", g.sample_initial_step);
    g.retry_budget = get_count(*it, "generator", "retry_budget", g.retry_budget);
  }
  if (doc.contains("strategy")) {
    const std::string name = get_string(doc, "", "strategy", "");
    try {
      config.strategy = parse_strategy(name);
    } catch (const InvalidArgument&) {
      throw ConfigError("strategy", "unknown strategy '" + name + "'");
    }
  }
  if (auto it = doc.find("seed"); it != doc.end()) {
    if (!it->is_number_unsigned()) throw ConfigError("seed", "must be a non-negative integer");
    config.seed = it->get<std::uint64_t>();
  }
  if (doc.contains("instances")) {
    config.instances_path = resolve(base_dir, get_string(doc, "", "instances", ""));
  }
  if (doc.contains("judge_scores")) {
    config.judge_scores_path = resolve(base_dir, get_string(doc, "", "judge_scores", ""));
  }
  if (doc.contains("output_dir")) {
    config.output_dir = resolve(base_dir, get_string(doc, "", "output_dir", ""));
  }
  config.answer_pattern = get_string(doc, "", "answer_pattern", config.answer_pattern);
  config.concurrent_judges = get_bool(doc, "", "concurrent_judges", config.concurrent_judges);
  if (auto it = doc.find("synthetic"); it != doc.end()) {
    reject_unknown(*it, "synthetic", {"instances", "steps"});
    config.synthetic.instances = get_count(*it, "synthetic", "instances", config.synthetic.instances);
    config.synthetic.steps = get_count(*it, "synthetic", "steps", config.synthetic.steps);
  }
  if (auto it = doc.find("sweep"); it != doc.end()) {
    reject_unknown(*it, "sweep", {"tau_grid", "epsilon_grid", "strategies", "sample_size"});
    if (it->contains("tau_grid")) config.sweep.tau_grid = parse_grid(it->at("tau_grid"), "sweep.tau_grid");
    if (it->contains("epsilon_grid")) {
      config.sweep.epsilon_grid = parse_grid(it->at("epsilon_grid"), "sweep.epsilon_grid");
    }
    if (auto s = it->find("strategies"); s != it->end()) {
      if (!s->is_array()) throw ConfigError("sweep.strategies", "must be an array of names");
      config.sweep.strategies.clear();
      for (const auto& name : *s) {
        if (!name.is_string()) throw ConfigError("sweep.strategies", "must be an array of names");
        try {
          config.sweep.strategies.push_back(parse_strategy(name.get<std::string>()));
        } catch (const InvalidArgument&) {
          throw ConfigError("sweep.strategies", "unknown strategy '" + name.get<std::string>() + "'");
        }
      }
    }
    if (it->contains("sample_size")) {
      config.sweep.sample_size = get_count(*it, "sweep", "sample_size", 0);
    }
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  RunConfig config = default_config();
  apply_config_json(config, read_file(path), path.parent_path());
  return config;
}

void apply_endpoint_overrides(RunConfig& config, const std::optional<std::string>& base_url_flag) {
  std::optional<std::string> base_url = base_url_flag;
  if (!base_url) {
    if (const char* env = std::getenv(kBaseUrlEnv); env != nullptr && *env != '\0') base_url = env;
  }
  std::string api_key;
  if (const char* env = std::getenv(kApiKeyEnv); env != nullptr) api_key = env;

  auto patch = [&](EndpointConfig& e) {
    if (base_url) e.base_url = *base_url;
    if (!api_key.empty()) e.api_key = api_key;
  };
  patch(config.endpoint);
  for (auto& j : config.judges) {
    if (j.backend) patch(*j.backend);
  }
}

}  // namespace nashverify::cli
