#include "support.hpp"

#include "cli/commands.hpp"
#include "cli/config.hpp"

#include <nashverify/errors.hpp>
#include <nashverify/harness.hpp>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <sstream>

using namespace nashverify;
using namespace nashverify::cli;
using nlohmann::json;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

/// Restores an environment variable on scope exit.
class EnvGuard {
 public:
  explicit EnvGuard(const char* name) : name_(name) {
    if (const char* v = std::getenv(name)) old_ = v;
  }
  ~EnvGuard() {
    if (old_) {
      ::setenv(name_, old_->c_str(), 1);
    } else {
      ::unsetenv(name_);
    }
  }

 private:
  const char* name_;
  std::optional<std::string> old_;
};

json first_trace(const std::filesystem::path& dir) {
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().string().ends_with(".trace.json")) return json::parse(nvtest::read_file(e.path()));
  }
  return {};
}

std::size_t csv_rows(const std::filesystem::path& path) {
  const std::string text = nvtest::read_file(path);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) - 1;
}

}  // namespace

TEST(CliSolve, PrintsEquilibriumJson) {
  const auto r = invoke({"solve", "--scores", "0.9,0.2,0.9", "--lambdas", "1,1,1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_NEAR(doc["scores"][0].get<double>(), 0.76, 1e-12);
  EXPECT_NEAR(doc["scores"][1].get<double>(), 0.48, 1e-12);
  EXPECT_NEAR(doc["scores"][2].get<double>(), 0.76, 1e-12);
  EXPECT_EQ(doc["status"], "exact");
}

TEST(CliSolve, ConsensusInputIsAFixedPoint) {
  const auto doc = json::parse(invoke({"solve", "--scores", "0.8,0.8,0.8", "--lambdas", "1.5,1.0,0.8"}).out);
  for (const auto& s : doc["scores"]) EXPECT_NEAR(s.get<double>(), 0.8, 1e-12);
}

TEST(CliSolve, DefaultsToBuiltInStubbornnessForThreeScores) {
  const auto doc = json::parse(invoke({"solve", "--scores", "0.9,0.2,0.9"}).out);
  EXPECT_NEAR(doc["dispersion"].get<double>(), 26.0 / 205.0, 1e-12);
}

TEST(CliSolve, ValidationFailuresExitTwo) {
  auto r = invoke({"solve", "--scores", "0.9,0.2", "--lambdas", "1,1,1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(invoke({"solve", "--scores", "0.9,1.2"}).code, 2);
  EXPECT_EQ(invoke({"solve", "--scores", "0.9,abc,0.1"}).code, 2);
  EXPECT_EQ(invoke({"solve", "--scores", "0.5,0.5", "--lambdas", "1,0"}).code, 2);
  EXPECT_EQ(invoke({"solve", "--scores", "0.5,0.5,0.5,0.5"}).code, 2);  // no default for m = 4
  EXPECT_EQ(invoke({"solve"}).code, 2);
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST(CliConfig, EmptyConfigEqualsBuiltInDefaults) {
  nvtest::TempDir dir;
  nvtest::write_file(dir / "empty.json", "{}");
  const RunConfig config = load_config(dir / "empty.json");
  ASSERT_EQ(config.judges.size(), 3u);
  EXPECT_EQ(config.judges[0].name, "visual");
  EXPECT_EQ(config.judges[1].name, "logical");
  EXPECT_EQ(config.judges[2].name, "contextual");
  EXPECT_DOUBLE_EQ(config.judges[0].stubbornness, 1.5);
  EXPECT_DOUBLE_EQ(config.judges[1].stubbornness, 1.0);
  EXPECT_DOUBLE_EQ(config.judges[2].stubbornness, 0.8);
  EXPECT_DOUBLE_EQ(config.policy.tau, 0.6);
  EXPECT_DOUBLE_EQ(config.policy.epsilon, 0.1);
  EXPECT_EQ(config.generator.config.num_candidates, 3u);
  EXPECT_DOUBLE_EQ(config.generator.config.temperature, 0.8);
  EXPECT_DOUBLE_EQ(config.generator.config.top_p, 0.6);
  EXPECT_EQ(config.generator.config.max_new_tokens, 1000u);
  EXPECT_EQ(config.generator.config.max_steps, 20u);
  EXPECT_EQ(config.strategy, Strategy::FullNash);
  EXPECT_NO_THROW(config.validate());
}

TEST(CliConfig, UnknownKeysAreRejectedWithTheirPath) {
  RunConfig config = default_config();
  try {
    apply_config_json(config, R"({"policy":{"tau":0.5,"epsilson":0.1}})", {});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "policy.epsilson");
  }
  try {
    apply_config_json(config, R"({"judges":[{"name":"a"},{"name":"b","colour":"red"}]})", {});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "judges[1].colour");
  }
  EXPECT_THROW(apply_config_json(config, "{not json", {}), ConfigError);
  EXPECT_THROW(apply_config_json(config, R"({"policy":{"tau":"high"}})", {}), ConfigError);
}

TEST(CliConfig, InvariantViolationsNameTheField) {
  auto field_of = [](const std::string& text) {
    RunConfig config = default_config();
    apply_config_json(config, text, {});
    try {
      config.validate();
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<valid>");
  };
  EXPECT_EQ(field_of(R"({"judges":[{"name":"a","stubbornness":1},{"name":"b","stubbornness":0}]})"),
            "judges[1].stubbornness");
  EXPECT_EQ(field_of(R"({"judges":[{"name":"a","stubbornness":-1},{"name":"b"}]})"),
            "judges[0].stubbornness");
  EXPECT_EQ(field_of(R"({"policy":{"epsilon":-0.01}})"), "policy.epsilon");
  EXPECT_EQ(field_of(R"({"generator":{"num_candidates":0}})"), "generator.num_candidates");
  EXPECT_EQ(field_of(R"({"judges":[{"name":"a"}]})"), "judges");
  EXPECT_EQ(field_of(R"({"judges":[{"name":"a"},{"name":"a"}]})"), "judges[1].name");
  EXPECT_EQ(field_of(R"({"judges":[{"name":"a","synthetic":{"sigma":-1}},{"name":"b"}]})"),
            "judges[0].synthetic.sigma");
  EXPECT_EQ(field_of(R"({"answer_pattern":"no group"})"), "answer_pattern");
  EXPECT_EQ(field_of(R"({"policy":{"tau":0.7}})"), "<valid>");
}

TEST(CliConfig, RelativePathsResolveAgainstConfigFile) {
  RunConfig config = default_config();
  apply_config_json(config, R"({"instances":"a.jsonl","judge_scores":"/abs/b.jsonl"})", "/base/dir");
  EXPECT_EQ(*config.instances_path, std::filesystem::path("/base/dir/a.jsonl"));
  EXPECT_EQ(*config.judge_scores_path, std::filesystem::path("/abs/b.jsonl"));
}

TEST(CliPrecedence, FlagsOverrideConfigOverrideDefaults) {
  nvtest::TempDir dir;
  nvtest::write_file(dir / "config.json",
                     R"({"mode":"synthetic","policy":{"tau":0.7},"seed":5,"synthetic":{"instances":2,"steps":2}})");
  // Layer 1: built-in default.
  ASSERT_EQ(invoke({"run", "--mode", "synthetic", "--out", (dir / "d").string()}).code, 0);
  EXPECT_DOUBLE_EQ(first_trace(dir / "d")["config"]["policy"]["tau"].get<double>(), 0.6);
  // Layer 2: config file.
  ASSERT_EQ(invoke({"run", "-c", (dir / "config.json").string(), "--out", (dir / "c").string()}).code, 0);
  auto doc = first_trace(dir / "c");
  EXPECT_DOUBLE_EQ(doc["config"]["policy"]["tau"].get<double>(), 0.7);
  EXPECT_EQ(doc["config"]["seed"], 5);
  // Layer 3: flag.
  ASSERT_EQ(invoke({"run", "-c", (dir / "config.json").string(), "--tau", "0.8", "--seed", "9", "--out",
                 (dir / "f").string()})
                .code,
            0);
  doc = first_trace(dir / "f");
  EXPECT_DOUBLE_EQ(doc["config"]["policy"]["tau"].get<double>(), 0.8);
  EXPECT_EQ(doc["config"]["seed"], 9);
  EXPECT_DOUBLE_EQ(doc["config"]["policy"]["epsilon"].get<double>(), 0.1);
}

TEST(CliPrecedence, BaseUrlFlagBeatsEnvironmentBeatsConfig) {
  EnvGuard base(kBaseUrlEnv);
  EnvGuard key(kApiKeyEnv);
  nvtest::TempDir dir;
  nvtest::write_file(dir / "one.jsonl", R"({"instance_id":"r1","question":"Q","steps":[]})");
  nvtest::write_file(dir / "remote.json",
                     R"({"mode":"remote","instances":"one.jsonl","endpoint":{"base_url":"http://127.0.0.1:2/v1"}})");
  const auto url_in = [&](const std::string& out) {
    return first_trace(dir / out)["config"]["endpoint"]["base_url"].get<std::string>();
  };
  ::unsetenv(kBaseUrlEnv);
  ::setenv(kApiKeyEnv, "do-not-log", 1);
  auto r = invoke({"run", "-c", (dir / "remote.json").string(), "--out", (dir / "a").string()});
  EXPECT_EQ(r.code, 1);  // unreachable endpoint aborts the instance
  EXPECT_EQ(url_in("a"), "http://127.0.0.1:2/v1");
  EXPECT_EQ(nvtest::read_file(dir / "a" / "r1.trace.json").find("do-not-log"), std::string::npos);
  EXPECT_EQ(first_trace(dir / "a")["termination"], "aborted");
  EXPECT_FALSE(first_trace(dir / "a")["abort_reason"].is_null());

  ::setenv(kBaseUrlEnv, "http://127.0.0.1:1/v1", 1);
  EXPECT_EQ(invoke({"run", "-c", (dir / "remote.json").string(), "--out", (dir / "b").string()}).code, 1);
  EXPECT_EQ(url_in("b"), "http://127.0.0.1:1/v1");

  EXPECT_EQ(invoke({"run", "-c", (dir / "remote.json").string(), "--base-url", "http://127.0.0.1:3/v1",
                 "--out", (dir / "c").string()})
                .code,
            1);
  EXPECT_EQ(url_in("c"), "http://127.0.0.1:3/v1");
}

TEST(CliRun, ConfigErrorsExitTwo) {
  nvtest::TempDir dir;
  nvtest::write_file(dir / "bad.json", R"({"policy":{"epsilon":-1}})");
  auto r = invoke({"run", "-c", (dir / "bad.json").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("policy.epsilon"), std::string::npos);
  EXPECT_EQ(invoke({"run", "-c", (dir / "missing.json").string()}).code, 2);
  EXPECT_EQ(invoke({"run", "--mode", "scripted", "--out", (dir / "o").string()}).code, 2);  // no fixtures
  EXPECT_EQ(invoke({"run", "--mode", "telepathic"}).code, 2);
  EXPECT_EQ(invoke({"run", "--mode", "synthetic", "-k", "0"}).code, 2);
}

TEST(CliRun, ScriptedDemoIsByteStable) {
  nvtest::TempDir dir;
  const auto config = (nvtest::demo_dir() / "config.json").string();
  const auto a = invoke({"run", "-c", config, "--out", (dir / "a").string(), "-j", "1"});
  const auto b = invoke({"run", "-c", config, "--out", (dir / "b").string(), "-j", "3"});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("instances=3 aborted=0"), std::string::npos);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "a")) {
    ++files;
    EXPECT_EQ(nvtest::read_file(e.path()), nvtest::read_file(dir / "b" / e.path().filename()));
  }
  EXPECT_EQ(files, 3u);

  const auto report = invoke({"report", "--traces", (dir / "a").string()});
  EXPECT_EQ(report.code, 0);
  EXPECT_NE(report.out.find(a.out), std::string::npos);  // same summary line
  EXPECT_EQ(invoke({"report", "--traces", (dir / "nope").string()}).code, 1);
}

TEST(CliRun, SyntheticSummaryIsSeedStable) {
  nvtest::TempDir dir;
  const std::vector<std::string> args = {"run", "--mode", "synthetic", "--seed", "4", "--out",
                                         (dir / "s").string()};
  const auto a = invoke(args);
  const auto b = invoke(args);
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("instances=200"), std::string::npos);
}

TEST(CliAblate, RowCountsAndSyntheticLabel) {
  nvtest::TempDir dir;
  const auto config = (nvtest::demo_dir() / "config.json").string();
  auto r = invoke({"ablate", "--kind", "tau", "-c", config, "--out", (dir / "tau.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, (dir / "tau.csv").string() + "\n");
  EXPECT_EQ(csv_rows(dir / "tau.csv"), 7u);
  r = invoke({"ablate", "--kind", "epsilon", "-c", config, "--out", (dir / "eps.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(csv_rows(dir / "eps.csv"), 7u);
  r = invoke({"ablate", "--kind", "strategy", "-c", config, "--out", (dir / "s.csv").string(), "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(csv_rows(dir / "s.csv"), 5u);
  EXPECT_EQ(json::parse(nvtest::read_file(dir / "s.json"))["label"], "scripted");
  const auto rows = parse_decomposition_csv(nvtest::read_file(dir / "s.csv"));
  EXPECT_EQ(rows[1].strategy, Strategy::NoRejection);
  EXPECT_DOUBLE_EQ(rows[1].avg_accepted_per_step, 3.0);

  nvtest::write_file(dir / "syn.json",
                     "{\"mode\":\"synthetic\",\"output_dir\":\"" + (dir / "out").string() +
                         "\",\"synthetic\":{\"instances\":10}}");
  r = invoke({"ablate", "--kind", "tau", "-c", (dir / "syn.json").string(), "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("ablation_tau.synthetic.csv"), std::string::npos);
  EXPECT_EQ(json::parse(nvtest::read_file(dir / "out" / "ablation_tau.synthetic.json"))["label"],
            "synthetic");

  r = invoke({"ablate", "--kind", "tau", "-c", config, "--grid", "0.9,0.1", "--out",
           (dir / "x.csv").string()});
  EXPECT_EQ(r.code, 2);
  r = invoke({"ablate", "--kind", "tau", "-c", config, "--grid", "0.1,0.9", "--out",
           (dir / "g.csv").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(csv_rows(dir / "g.csv"), 2u);
}
