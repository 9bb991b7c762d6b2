#pragma once

#include "nashverify/equilibrium.hpp"
#include "nashverify/random.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace nashverify {

/// Accept iff dispersion < epsilon and mean > tau (both strict).
/// tau may exceed 1, which rejects everything.
struct AcceptancePolicy {
  double tau = 0.6;
  double epsilon = 0.1;

  void validate() const;
};

struct CandidateAssessment {
  std::size_t candidate_index = 0;
  RawScoreVector raw;
  EquilibriumSolution equilibrium;
  bool accepted = false;
  double rank_score = 0.0;  // equilibrium.mean - equilibrium.dispersion
};

enum class SelectionMode { Normal, Fallback };

std::string_view to_string(SelectionMode mode);

struct SelectionOutcome {
  std::size_t chosen_index = 0;
  SelectionMode mode = SelectionMode::Normal;
  std::vector<CandidateAssessment> assessments;

  std::size_t accepted_count() const noexcept;
};

enum class Strategy { FullNash, NoRejection, NoSelection, RawAverage, Random };

inline constexpr std::array<Strategy, 5> kAllStrategies = {
    Strategy::FullNash, Strategy::NoRejection, Strategy::NoSelection, Strategy::RawAverage,
    Strategy::Random};

std::string_view to_string(Strategy strategy);
/// Accepts the names produced by to_string ("full_nash", ...).
Strategy parse_strategy(std::string_view name);

/// Whether the strategy consumes a random source.
bool is_randomized(Strategy strategy) noexcept;

CandidateAssessment assess(const EquilibriumSolution& equilibrium, const RawScoreVector& raw,
                           std::size_t index, const AcceptancePolicy& policy);

/// Normal mode: highest mean among accepted candidates. Fallback mode (none
/// accepted): highest mean - dispersion among all. Ties go to the lowest
/// candidate index.
SelectionOutcome select(std::vector<CandidateAssessment> assessments);

/// One step of candidate selection under an ablation strategy. `rng` is
/// required only for NoSelection and Random.
SelectionOutcome select_with_strategy(Strategy strategy, std::span<const RawScoreVector> raw_matrix,
                                      const StubbornnessVector& lambdas,
                                      const AcceptancePolicy& policy, RandomEngine* rng);

}  // namespace nashverify
