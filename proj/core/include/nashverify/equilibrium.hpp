#pragma once

// Agreement game between m independent judges.
//
// Judge i reports s_i and receives
//
//   u_i = -(s_i - mean_{j != i} s_j)^2 - lambda_i * (s_i - raw_i)^2
//
// The unique equilibrium solves the linear system
//
//   (1 + lambda_i) s_i - 1/(m-1) * sum_{j != i} s_j = lambda_i * raw_i
//
// whose matrix is strictly diagonally dominant for every lambda_i > 0.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace nashverify {

/// Per-judge raw confidences, each in [0,1]; at least two judges.
class RawScoreVector {
 public:
  explicit RawScoreVector(std::vector<double> scores);

  std::span<const double> values() const noexcept { return scores_; }
  std::size_t size() const noexcept { return scores_.size(); }
  double operator[](std::size_t i) const { return scores_[i]; }

  friend bool operator==(const RawScoreVector&, const RawScoreVector&) = default;

 private:
  std::vector<double> scores_;
};

/// Per-judge self-consistency weights lambda_i, each finite and > 0.
class StubbornnessVector {
 public:
  explicit StubbornnessVector(std::vector<double> lambdas);

  std::span<const double> values() const noexcept { return lambdas_; }
  std::size_t size() const noexcept { return lambdas_.size(); }
  double operator[](std::size_t i) const { return lambdas_[i]; }

  friend bool operator==(const StubbornnessVector&, const StubbornnessVector&) = default;

 private:
  std::vector<double> lambdas_;
};

enum class SolveStatus {
  Exact,
  FallbackRaw,    // linear solve failed, scores are the raw inputs
  RawStatistics,  // no solve attempted; raw scores stand in (raw-average ablation)
};

std::string_view to_string(SolveStatus status);

struct EquilibriumSolution {
  std::vector<double> scores;
  double mean = 0.0;
  double dispersion = 0.0;
  SolveStatus status = SolveStatus::Exact;
};

struct ScoreSummary {
  double mean = 0.0;
  double dispersion = 0.0;  // mean absolute deviation about `mean`
};

double payoff(double own_score, double others_mean, double own_raw, double stubbornness);

/// argmax of payoff over own_score: (others_mean + lambda*own_raw) / (1 + lambda).
double best_response(double others_mean, double own_raw, double stubbornness);

/// Direct dense solve of the equilibrium system. Never throws on numerical
/// failure: the result then carries SolveStatus::FallbackRaw.
EquilibriumSolution solve_equilibrium(const RawScoreVector& raw, const StubbornnessVector& lambdas);

struct IterationResult {
  EquilibriumSolution solution;
  std::size_t iterations = 0;
};

/// Simultaneous best-response dynamics started from `start` (raw scores when
/// empty). Independent of the direct solve; used as its oracle.
///
/// The update map contracts in the max-norm with factor q = 1/(1 + min lambda),
/// so iteration stops once the a-posteriori error bound q/(1-q)*|step| drops
/// below `tolerance`. Throws NonConvergence after `max_iterations`.
IterationResult iterate_equilibrium(const RawScoreVector& raw, const StubbornnessVector& lambdas,
                                    double tolerance, std::size_t max_iterations,
                                    std::span<const double> start = {});

/// max_i |(1+lambda_i) s_i - 1/(m-1) sum_{j!=i} s_j - lambda_i raw_i|
double residual(const RawScoreVector& raw, const StubbornnessVector& lambdas,
                std::span<const double> candidate_scores);

ScoreSummary summarize(std::span<const double> scores);

namespace detail {

/// Gaussian elimination with partial pivoting on a dense row-major n x n
/// matrix. Returns nullopt for singular or non-finite systems.
std::optional<std::vector<double>> solve_dense(std::vector<double> matrix, std::vector<double> rhs);

}  // namespace detail

}  // namespace nashverify
