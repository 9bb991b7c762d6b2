#include "nashverify/policy.hpp"

#include "nashverify/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nashverify {
namespace {

// argmax over the candidates passing `eligible`, lowest index on ties.
template <typename Eligible, typename Key>
std::size_t argmax_position(const std::vector<CandidateAssessment>& items, Eligible eligible,
                            Key key) {
  std::size_t best = items.size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!eligible(items[i])) continue;
    if (best == items.size() || key(items[i]) > key(items[best]) ||
        (key(items[i]) == key(items[best]) &&
         items[i].candidate_index < items[best].candidate_index)) {
      best = i;
    }
  }
  return best;
}

std::vector<CandidateAssessment> assess_all(std::span<const RawScoreVector> raw_matrix,
                                            const StubbornnessVector& lambdas,
                                            const AcceptancePolicy& policy) {
  std::vector<CandidateAssessment> out;
  out.reserve(raw_matrix.size());
  for (std::size_t i = 0; i < raw_matrix.size(); ++i) {
    out.push_back(assess(solve_equilibrium(raw_matrix[i], lambdas), raw_matrix[i], i, policy));
  }
  return out;
}

EquilibriumSolution raw_statistics(const RawScoreVector& raw) {
  EquilibriumSolution s;
  s.scores.assign(raw.values().begin(), raw.values().end());
  const auto summary = summarize(s.scores);
  s.mean = summary.mean;
  s.dispersion = summary.dispersion;
  s.status = SolveStatus::RawStatistics;
  return s;
}

SelectionOutcome accept_all(std::vector<CandidateAssessment> assessments) {
  for (auto& a : assessments) a.accepted = true;
  SelectionOutcome out;
  out.mode = SelectionMode::Normal;
  out.assessments = std::move(assessments);
  return out;
}

}  // namespace

void AcceptancePolicy::validate() const {
  if (!std::isfinite(tau)) throw InvalidArgument("tau must be finite");
  if (!std::isfinite(epsilon) || epsilon < 0.0) {
    throw InvalidArgument("epsilon must be finite and >= 0");
  }
}

std::string_view to_string(SelectionMode mode) {
  return mode == SelectionMode::Normal ? "normal" : "fallback";
}

std::size_t SelectionOutcome::accepted_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(
      assessments.begin(), assessments.end(), [](const auto& a) { return a.accepted; }));
}

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::FullNash:
      return "full_nash";
    case Strategy::NoRejection:
      return "no_rejection";
    case Strategy::NoSelection:
      return "no_selection";
    case Strategy::RawAverage:
      return "raw_average";
    case Strategy::Random:
      return "random";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  for (Strategy s : kAllStrategies) {
    if (to_string(s) == name) return s;
  }
  throw InvalidArgument("unknown strategy '" + std::string(name) + "'");
}

bool is_randomized(Strategy strategy) noexcept {
  return strategy == Strategy::NoSelection || strategy == Strategy::Random;
}

CandidateAssessment assess(const EquilibriumSolution& equilibrium, const RawScoreVector& raw,
                           std::size_t index, const AcceptancePolicy& policy) {
  return CandidateAssessment{
      .candidate_index = index,
      .raw = raw,
      .equilibrium = equilibrium,
      .accepted = equilibrium.dispersion < policy.epsilon && equilibrium.mean > policy.tau,
      .rank_score = equilibrium.mean - equilibrium.dispersion,
  };
}

SelectionOutcome select(std::vector<CandidateAssessment> assessments) {
  if (assessments.empty()) {
    throw InvalidArgument("cannot select from an empty candidate list");
  }
  SelectionOutcome out;
  const auto by_mean = [](const CandidateAssessment& a) { return a.equilibrium.mean; };
  const auto by_rank = [](const CandidateAssessment& a) { return a.rank_score; };
  std::size_t pos = argmax_position(
      assessments, [](const CandidateAssessment& a) { return a.accepted; }, by_mean);
  if (pos < assessments.size()) {
    out.mode = SelectionMode::Normal;
  } else {
    out.mode = SelectionMode::Fallback;
    pos = argmax_position(assessments, [](const CandidateAssessment&) { return true; }, by_rank);
  }
  out.chosen_index = assessments[pos].candidate_index;
  out.assessments = std::move(assessments);
  return out;
}

SelectionOutcome select_with_strategy(Strategy strategy, std::span<const RawScoreVector> raw_matrix,
                                      const StubbornnessVector& lambdas,
                                      const AcceptancePolicy& policy, RandomEngine* rng) {
  if (raw_matrix.empty()) {
    throw InvalidArgument("cannot select from an empty candidate list");
  }
  if (is_randomized(strategy) && rng == nullptr) {
    throw InvalidArgument(std::string("strategy ") + std::string(to_string(strategy)) +
                          " requires a random source");
  }

  switch (strategy) {
    case Strategy::FullNash:
      return select(assess_all(raw_matrix, lambdas, policy));

    case Strategy::NoRejection: {
      auto out = accept_all(assess_all(raw_matrix, lambdas, policy));
      const std::size_t pos = argmax_position(
          out.assessments, [](const CandidateAssessment&) { return true; },
          [](const CandidateAssessment& a) { return a.rank_score; });
      out.chosen_index = out.assessments[pos].candidate_index;
      return out;
    }

    case Strategy::NoSelection: {
      auto out = select(assess_all(raw_matrix, lambdas, policy));
      if (out.mode == SelectionMode::Normal) {
        std::vector<std::size_t> accepted;
        for (const auto& a : out.assessments) {
          if (a.accepted) accepted.push_back(a.candidate_index);
        }
        out.chosen_index = accepted[uniform_index(*rng, accepted.size())];
      }
      return out;
    }

    case Strategy::RawAverage: {
      std::vector<CandidateAssessment> assessments;
      assessments.reserve(raw_matrix.size());
      for (std::size_t i = 0; i < raw_matrix.size(); ++i) {
        assessments.push_back(assess(raw_statistics(raw_matrix[i]), raw_matrix[i], i, policy));
      }
      return select(std::move(assessments));
    }

    case Strategy::Random: {
      auto out = accept_all(assess_all(raw_matrix, lambdas, policy));
      out.chosen_index = uniform_index(*rng, out.assessments.size());
      return out;
    }
  }
  throw InvalidArgument("unknown strategy");
}

}  // namespace nashverify
