#include "support.hpp"

#include <nashverify/errors.hpp>
#include <nashverify/harness.hpp>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

using namespace nashverify;

namespace {

Pipeline synthetic_pipeline(std::size_t instances, std::uint64_t seed, std::size_t threads = 1) {
  Pipeline p;
  p.instances = make_synthetic_instances(instances, 3, 3, seed);
  p.generator = std::make_shared<ScriptedGenerator>();
  for (const char* name : {"visual", "logical", "contextual"}) {
    JudgeSpec spec;
    spec.name = name;
    spec.kind = JudgeKind::Synthetic;
    p.judges.push_back(make_judge(spec, JudgeResources{.seed = seed}));
  }
  p.options.seed = seed;
  p.threads = threads;
  return p;
}

void expect_fractions(const MetricsRow& r) {
  for (double v : {r.accuracy, r.accept_rate, r.fallback_pct, r.normal_mode_pct}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_NEAR(r.fallback_pct + r.normal_mode_pct, 1.0, 1e-12);
}

}  // namespace

TEST(Overhead, ClosedForm) {
  EXPECT_NEAR(overhead_ratio(3, 3, 1.0 / 33.0), 3.2727272727, 1e-9);
  EXPECT_DOUBLE_EQ(overhead_ratio(3, 3, 0.0), 3.0);
  EXPECT_DOUBLE_EQ(overhead_ratio(1, 0, 7.5), 1.0);
  EXPECT_DOUBLE_EQ(overhead_ratio(5, 4, 0.5), 15.0);
  EXPECT_THROW(overhead_ratio(0, 3, 0.1), InvalidArgument);
  EXPECT_THROW(overhead_ratio(3, 3, -0.1), InvalidArgument);
}

TEST(SyntheticInstances, ExactlyOneCorrectCandidatePerStep) {
  const auto list = make_synthetic_instances(50, 4, 3, 1);
  ASSERT_EQ(list.size(), 50u);
  for (const auto& inst : list) {
    ASSERT_EQ(inst.steps.size(), 4u);
    ASSERT_TRUE(inst.gold_answer.has_value());
    for (std::size_t s = 0; s < inst.steps.size(); ++s) {
      int correct = 0;
      for (const auto& c : inst.steps[s]) {
        correct += c.is_correct.value() ? 1 : 0;
        EXPECT_EQ(is_terminal(c.text), s + 1 == inst.steps.size()) << c.text;
        if (s + 1 == inst.steps.size()) {
          const auto answer = AnswerPattern().last_capture(c.text);
          EXPECT_EQ(answers_match(*answer, *inst.gold_answer), c.is_correct.value());
        }
      }
      EXPECT_EQ(correct, 1);
    }
  }
  const auto again = make_synthetic_instances(50, 4, 3, 1);
  for (std::size_t i = 0; i < list.size(); ++i) {
    EXPECT_EQ(again[i].gold_answer, list[i].gold_answer);
    EXPECT_EQ(again[i].steps, list[i].steps);
  }
}

TEST(SampleInstances, SubsetIsSeededAndOrdered) {
  const auto all = make_synthetic_instances(20, 1, 2, 0);
  const auto a = sample_instances(all, 5, 11);
  const auto b = sample_instances(all, 5, 11);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].instance_id, b[i].instance_id);
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_LT(a[i - 1].instance_id, a[i].instance_id);
  EXPECT_EQ(sample_instances(all, 50, 11).size(), 20u);
}

TEST(Pipeline, ThreadCountDoesNotChangeResults) {
  const auto serial = run_pipeline(synthetic_pipeline(12, 3, 1));
  const auto parallel = run_pipeline(synthetic_pipeline(12, 3, 4));
  ASSERT_EQ(serial.size(), parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].instance_id, parallel[i].instance_id);
    EXPECT_EQ(serial[i].extracted_answer, parallel[i].extracted_answer);
  }
}

TEST(Sweep, TauAboveOneIsAllFallback) {
  SweepConfig config;
  config.parameter = SweepParameter::Tau;
  config.grid = {10.0};
  const auto rows = run_sweep(config, synthetic_pipeline(10, 1));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_DOUBLE_EQ(rows[0].accept_rate, 0.0);
  EXPECT_DOUBLE_EQ(rows[0].fallback_pct, 1.0);
  expect_fractions(rows[0]);
}

TEST(Sweep, LargeEpsilonLeavesOnlyTheMeanTest) {
  SweepConfig config;
  config.parameter = SweepParameter::Epsilon;
  config.grid = {0.5, 1.0};
  config.fixed_other = 0.0;  // tau = 0: every positive mean passes
  const auto rows = run_sweep(config, synthetic_pipeline(10, 2));
  for (const auto& r : rows) {
    EXPECT_DOUBLE_EQ(r.accept_rate, 1.0);
    EXPECT_DOUBLE_EQ(r.fallback_pct, 0.0);
  }
}

TEST(Sweep, DefaultGridsHaveSevenPoints) {
  EXPECT_EQ(default_grid(SweepParameter::Tau).size(), 7u);
  EXPECT_EQ(default_grid(SweepParameter::Epsilon).size(), 7u);
  const auto rows = run_sweep(SweepConfig{}, synthetic_pipeline(5, 0));
  ASSERT_EQ(rows.size(), 7u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_DOUBLE_EQ(rows[i].sweep_value, default_grid(SweepParameter::Tau)[i]);
    expect_fractions(rows[i]);
  }
  // Raising tau can only shrink the accepted set.
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i].accept_rate, rows[i - 1].accept_rate);
}

TEST(Sweep, JudgeScoresDoNotDependOnTheGridPoint) {
  // Mean equilibrium score and dispersion are policy-independent under FullNash.
  SweepConfig config;
  config.grid = {0.1, 0.6, 0.9};
  const auto rows = run_sweep(config, synthetic_pipeline(8, 5));
  for (const auto& r : rows) {
    EXPECT_DOUBLE_EQ(r.mean_eq_score, rows[0].mean_eq_score);
    EXPECT_DOUBLE_EQ(r.mean_dispersion, rows[0].mean_dispersion);
  }
}

TEST(Sweep, GridValidation) {
  SweepConfig config;
  config.grid = {};
  EXPECT_THROW(config.validate(), ConfigError);
  config.grid = {0.1, 0.1};
  EXPECT_THROW(config.validate(), ConfigError);
  config.grid = {0.5, 0.2};
  EXPECT_THROW(config.validate(), ConfigError);
  config.parameter = SweepParameter::Epsilon;
  config.grid = {-0.1, 0.2};
  EXPECT_THROW(config.validate(), ConfigError);
  EXPECT_EQ(parse_sweep_parameter("epsilon"), SweepParameter::Epsilon);
  EXPECT_THROW(parse_sweep_parameter("lambda"), InvalidArgument);
}

TEST(Sweep, AbortedInstanceIsNamed) {
  auto p = synthetic_pipeline(3, 0);
  p.instances[1].steps[0][0].is_correct.reset();  // synthetic judges need labels
  SweepConfig config;
  config.grid = {0.6};
  try {
    run_sweep(config, p);
    FAIL() << "expected FixtureError";
  } catch (const FixtureError& e) {
    EXPECT_NE(std::string(e.what()).find("synthetic-0001"), std::string::npos);
  }
}

TEST(Decomposition, StructuralIdentities) {
  const auto rows = run_decomposition(kAllStrategies, synthetic_pipeline(30, 7), 7);
  ASSERT_EQ(rows.size(), 5u);
  const auto& full = rows[0];
  const auto& norej = rows[1];
  const auto& nosel = rows[2];
  const auto& rnd = rows[4];
  EXPECT_DOUBLE_EQ(norej.avg_accepted_per_step, 3.0);
  EXPECT_DOUBLE_EQ(norej.all_rejected_pct, 0.0);
  EXPECT_DOUBLE_EQ(rnd.avg_accepted_per_step, 3.0);
  EXPECT_DOUBLE_EQ(rnd.all_rejected_pct, 0.0);
  EXPECT_DOUBLE_EQ(full.avg_accepted_per_step, nosel.avg_accepted_per_step);
  EXPECT_DOUBLE_EQ(full.all_rejected_pct, nosel.all_rejected_pct);
  for (const auto& r : rows) {
    EXPECT_GE(r.avg_accepted_per_step, 0.0);
    EXPECT_LE(r.avg_accepted_per_step, 3.0);
    EXPECT_GE(r.accuracy, 0.0);
    EXPECT_LE(r.accuracy, 1.0);
  }
}

TEST(Decomposition, DominantCorrectCandidateGivesPerfectAccuracy) {
  auto p = synthetic_pipeline(20, 8);
  p.judges.clear();
  for (const char* name : {"visual", "logical", "contextual"}) {
    JudgeSpec spec;
    spec.name = name;
    spec.kind = JudgeKind::Synthetic;
    spec.synthetic = {.mu_correct = 0.9, .mu_incorrect = 0.2, .sigma = 0.0, .detect_probability = 1.0};
    p.judges.push_back(make_judge(spec, JudgeResources{.seed = 8}));
  }
  const Strategy full[] = {Strategy::FullNash};
  EXPECT_DOUBLE_EQ(run_decomposition(full, p, 8).at(0).accuracy, 1.0);
}

TEST(Metrics, AccuracyCountsOnlyLabelledInstances) {
  TraceRecord labelled;
  labelled.gold_answer = "A";
  labelled.extracted_answer = "a";
  TraceRecord wrong = labelled;
  wrong.extracted_answer = "B";
  TraceRecord unlabelled;
  unlabelled.extracted_answer = "A";
  EXPECT_DOUBLE_EQ(accuracy({labelled, wrong, unlabelled}), 0.5);
  EXPECT_DOUBLE_EQ(accuracy({unlabelled}), 0.0);
  const auto empty = compute_metrics({}, 1.0);
  EXPECT_DOUBLE_EQ(empty.accept_rate, 0.0);
  EXPECT_DOUBLE_EQ(empty.fallback_pct, 0.0);
}

TEST(Reports, CsvHeadersAndRoundTrip) {
  const std::vector<MetricsRow> rows = {{0.0001, 0.5, 0.25, 0.6789012345, 0.0123456789, 0.125, 0.875},
                                        {10.0, 0.0, 0.0, 0.333333333, 0.1, 1.0, 0.0}};
  const std::string csv = metrics_to_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "sweep_value,accuracy,accept_rate,mean_eq_score,mean_dispersion,fallback_pct,normal_mode_pct");
  EXPECT_NE(csv.find("0.0001,0.5,0.25,0.678901,0.0123457,0.125,0.875"), std::string::npos);
  const auto back = parse_metrics_csv(csv);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    // Six significant digits keep the relative error below 1e-6.
    EXPECT_NEAR(back[i].mean_eq_score, rows[i].mean_eq_score, 1e-6);
    EXPECT_NEAR(back[i].mean_dispersion, rows[i].mean_dispersion, 1e-6);
    EXPECT_NEAR(back[i].sweep_value, rows[i].sweep_value, 1e-6 * rows[i].sweep_value);
  }
  EXPECT_EQ(metrics_to_csv({}), std::string(kMetricsCsvHeader) + "\n");
  EXPECT_THROW(parse_metrics_csv("bad,header\n"), FixtureError);
  EXPECT_THROW(parse_metrics_csv(std::string(kMetricsCsvHeader) + "\n1,2\n"), FixtureError);
}

TEST(Reports, DecompositionCsvAndJson) {
  const std::vector<DecompositionRow> rows = {{Strategy::FullNash, 1.23456789, 0.1, 0.9},
                                              {Strategy::Random, 3.0, 0.0, 0.4}};
  const std::string csv = decomposition_to_csv(rows);
  EXPECT_EQ(csv, "strategy,avg_accepted_per_step,all_rejected_pct,accuracy\n"
                 "full_nash,1.23457,0.1,0.9\nrandom,3,0,0.4\n");
  const auto back = parse_decomposition_csv(csv);
  EXPECT_EQ(back[1].strategy, Strategy::Random);
  EXPECT_NEAR(back[0].avg_accepted_per_step, 1.23456789, 1e-5);
  const auto doc = nlohmann::json::parse(decomposition_to_json(rows, "synthetic"));
  EXPECT_EQ(doc["label"], "synthetic");
  EXPECT_EQ(doc["rows"][1]["strategy"], "random");
}

TEST(Reports, WriteFailureNamesPath) {
  nvtest::TempDir dir;
  nvtest::write_file(dir / "file", "x");
  const auto bad = dir / "file" / "report.csv";  // parent is a regular file
  try {
    write_report(std::vector<MetricsRow>{}, bad);
    FAIL() << "expected FileError";
  } catch (const FileError& e) {
    EXPECT_EQ(e.path(), bad.string());
  }
  write_report(std::vector<MetricsRow>{}, dir / "ok.csv");
  EXPECT_EQ(nvtest::read_file(dir / "ok.csv"), std::string(kMetricsCsvHeader) + "\n");
}
