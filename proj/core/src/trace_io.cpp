#include "nashverify/trace_io.hpp"

#include "nashverify/errors.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace nashverify {
namespace {

using ojson = nlohmann::ordered_json;

template <typename T>
ojson nullable(const std::optional<T>& value) {
  return value ? ojson(*value) : ojson(nullptr);
}

std::optional<std::string> opt_string(const ojson& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<std::string>();
}

SolveStatus parse_status(std::string_view name) {
  for (SolveStatus s : {SolveStatus::Exact, SolveStatus::FallbackRaw, SolveStatus::RawStatistics}) {
    if (to_string(s) == name) return s;
  }
  throw FixtureError("unknown solve status '" + std::string(name) + "'");
}

ojson candidate_json(const CandidateStep& candidate, const CandidateAssessment& a) {
  ojson out;
  out["index"] = a.candidate_index;
  out["text"] = candidate.text;
  out["is_correct"] = nullable(candidate.is_correct);
  out["raw"] = std::vector<double>(a.raw.values().begin(), a.raw.values().end());
  ojson eq;
  eq["scores"] = a.equilibrium.scores;
  eq["mean"] = a.equilibrium.mean;
  eq["dispersion"] = a.equilibrium.dispersion;
  eq["status"] = to_string(a.equilibrium.status);
  out["equilibrium"] = std::move(eq);
  out["accepted"] = a.accepted;
  out["rank_score"] = a.rank_score;
  return out;
}

}  // namespace

std::string trace_to_json(const TraceRecord& trace) {
  ojson doc;
  doc["instance_id"] = trace.instance_id;
  doc["question"] = trace.question;
  doc["image_reference"] = nullable(trace.image_reference);
  doc["gold_answer"] = nullable(trace.gold_answer);
  doc["judges"] = trace.judge_names;
  doc["strategy"] = to_string(trace.strategy);
  doc["initial_step"] = nullable(trace.initial_step);

  ojson steps = ojson::array();
  for (const auto& step : trace.steps) {
    ojson s;
    s["step_index"] = step.step_index;
    ojson candidates = ojson::array();
    for (std::size_t i = 0; i < step.candidates.size(); ++i) {
      candidates.push_back(candidate_json(step.candidates[i], step.selection.assessments.at(i)));
    }
    s["candidates"] = std::move(candidates);
    s["selection"] = {{"chosen_index", step.selection.chosen_index},
                      {"mode", to_string(step.selection.mode)},
                      {"accepted_count", step.selection.accepted_count()}};
    s["selected_text"] = step.selected_text;
    steps.push_back(std::move(s));
  }
  doc["steps"] = std::move(steps);
  doc["termination"] = to_string(trace.termination);
  doc["abort_reason"] = nullable(trace.abort_reason);
  doc["extracted_answer"] = nullable(trace.extracted_answer);

  ojson config = ojson::parse(trace.config_snapshot, nullptr, false);
  doc["config"] = config.is_discarded() ? ojson(trace.config_snapshot) : std::move(config);
  return doc.dump(2) + "\n";
}

TraceRecord trace_from_json(std::string_view document) {
  const ojson doc = ojson::parse(document, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw FixtureError("trace is not a JSON object");
  try {
    TraceRecord trace;
    trace.instance_id = doc.at("instance_id").get<std::string>();
    trace.question = doc.at("question").get<std::string>();
    trace.image_reference = opt_string(doc, "image_reference");
    trace.gold_answer = opt_string(doc, "gold_answer");
    trace.judge_names = doc.at("judges").get<std::vector<std::string>>();
    trace.strategy = parse_strategy(doc.at("strategy").get<std::string>());
    trace.initial_step = opt_string(doc, "initial_step");
    for (const auto& s : doc.at("steps")) {
      StepRecord step;
      step.step_index = s.at("step_index").get<std::size_t>();
      for (const auto& c : s.at("candidates")) {
        CandidateStep candidate{c.at("text").get<std::string>(), std::nullopt};
        if (!c.at("is_correct").is_null()) candidate.is_correct = c.at("is_correct").get<bool>();
        step.candidates.push_back(std::move(candidate));

        const auto& eq = c.at("equilibrium");
        EquilibriumSolution solution;
        solution.scores = eq.at("scores").get<std::vector<double>>();
        solution.mean = eq.at("mean").get<double>();
        solution.dispersion = eq.at("dispersion").get<double>();
        solution.status = parse_status(eq.at("status").get<std::string>());
        step.selection.assessments.push_back(CandidateAssessment{
            .candidate_index = c.at("index").get<std::size_t>(),
            .raw = RawScoreVector(c.at("raw").get<std::vector<double>>()),
            .equilibrium = std::move(solution),
            .accepted = c.at("accepted").get<bool>(),
            .rank_score = c.at("rank_score").get<double>(),
        });
      }
      const auto& sel = s.at("selection");
      step.selection.chosen_index = sel.at("chosen_index").get<std::size_t>();
      step.selection.mode = sel.at("mode").get<std::string>() == "normal" ? SelectionMode::Normal
                                                                          : SelectionMode::Fallback;
      step.selected_text = s.at("selected_text").get<std::string>();
      trace.steps.push_back(std::move(step));
    }
    trace.termination = parse_termination(doc.at("termination").get<std::string>());
    trace.abort_reason = opt_string(doc, "abort_reason");
    trace.extracted_answer = opt_string(doc, "extracted_answer");
    trace.config_snapshot = doc.at("config").dump();
    return trace;
  } catch (const nlohmann::json::exception& e) {
    throw FixtureError(std::string("malformed trace: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FixtureError(std::string("malformed trace: ") + e.what());
  }
}

std::string trace_file_name(std::string_view instance_id) {
  std::string name;
  name.reserve(instance_id.size() + 11);
  for (char c : instance_id) {
    const bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                      c == '-' || c == '_' || c == '.';
    name += safe ? c : '_';
  }
  if (name.empty() || name.front() == '.') name.insert(name.begin(), '_');
  return name + ".trace.json";
}

std::filesystem::path write_trace(const TraceRecord& trace, const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  const auto path = directory / trace_file_name(trace.instance_id);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError(path.string(), "cannot write trace");
  out << trace_to_json(trace);
  if (!out) throw FileError(path.string(), "failed writing trace");
  return path;
}

}  // namespace nashverify
