#include "nashverify/equilibrium.hpp"

#include "nashverify/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace nashverify {
namespace {

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) {
    throw InvalidArgument(std::string(what) + " must be finite");
  }
}

void require_stubbornness(double lambda) {
  require_finite(lambda, "stubbornness");
  if (lambda <= 0.0) {
    throw InvalidArgument("stubbornness must be > 0, got " + std::to_string(lambda));
  }
}

void require_same_size(std::size_t raw, std::size_t lambdas) {
  if (raw != lambdas) {
    throw InvalidArgument("raw scores and stubbornness vectors differ in length (" +
                          std::to_string(raw) + " vs " + std::to_string(lambdas) + ")");
  }
}

constexpr double kPivotFloor = 1e-13;

}  // namespace

RawScoreVector::RawScoreVector(std::vector<double> scores) : scores_(std::move(scores)) {
  if (scores_.size() < 2) {
    throw InvalidArgument("at least two judge scores are required");
  }
  for (double s : scores_) {
    require_finite(s, "raw score");
    if (s < 0.0 || s > 1.0) {
      throw InvalidArgument("raw score out of [0,1]: " + std::to_string(s));
    }
  }
}

StubbornnessVector::StubbornnessVector(std::vector<double> lambdas) : lambdas_(std::move(lambdas)) {
  if (lambdas_.size() < 2) {
    throw InvalidArgument("at least two stubbornness values are required");
  }
  for (double l : lambdas_) require_stubbornness(l);
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Exact:
      return "exact";
    case SolveStatus::FallbackRaw:
      return "fallback_raw";
    case SolveStatus::RawStatistics:
      return "raw_statistics";
  }
  return "unknown";
}

double payoff(double own_score, double others_mean, double own_raw, double stubbornness) {
  require_finite(own_score, "own score");
  require_finite(others_mean, "others mean");
  require_finite(own_raw, "own raw score");
  require_stubbornness(stubbornness);
  const double consensus_gap = own_score - others_mean;
  const double belief_gap = own_score - own_raw;
  return -consensus_gap * consensus_gap - stubbornness * belief_gap * belief_gap;
}

double best_response(double others_mean, double own_raw, double stubbornness) {
  require_finite(others_mean, "others mean");
  require_finite(own_raw, "own raw score");
  require_stubbornness(stubbornness);
  return (others_mean + stubbornness * own_raw) / (1.0 + stubbornness);
}

namespace detail {

std::optional<std::vector<double>> solve_dense(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  if (a.size() != n * n || n == 0) return std::nullopt;

  double scale = 0.0;
  for (double v : a) {
    if (!std::isfinite(v)) return std::nullopt;
    scale = std::max(scale, std::abs(v));
  }
  if (scale == 0.0) return std::nullopt;

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t row = col + 1; row < n; ++row) {
      if (std::abs(a[row * n + col]) > std::abs(a[pivot * n + col])) pivot = row;
    }
    if (std::abs(a[pivot * n + col]) <= kPivotFloor * scale) return std::nullopt;
    if (pivot != col) {
      std::swap_ranges(a.begin() + static_cast<std::ptrdiff_t>(col * n),
                       a.begin() + static_cast<std::ptrdiff_t>((col + 1) * n),
                       a.begin() + static_cast<std::ptrdiff_t>(pivot * n));
      std::swap(b[col], b[pivot]);
    }
    for (std::size_t row = col + 1; row < n; ++row) {
      const double factor = a[row * n + col] / a[col * n + col];
      if (factor == 0.0) continue;
      for (std::size_t k = col; k < n; ++k) a[row * n + k] -= factor * a[col * n + k];
      b[row] -= factor * b[col];
    }
  }

  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t k = i + 1; k < n; ++k) acc -= a[i * n + k] * x[k];
    x[i] = acc / a[i * n + i];
    if (!std::isfinite(x[i])) return std::nullopt;
  }
  return x;
}

}  // namespace detail

ScoreSummary summarize(std::span<const double> scores) {
  if (scores.empty()) {
    throw InvalidArgument("cannot summarize an empty score list");
  }
  const double m = static_cast<double>(scores.size());
  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / m;
  double deviation = 0.0;
  for (double s : scores) deviation += std::abs(s - mean);
  return {mean, deviation / m};
}

EquilibriumSolution solve_equilibrium(const RawScoreVector& raw, const StubbornnessVector& lambdas) {
  require_same_size(raw.size(), lambdas.size());
  const std::size_t m = raw.size();
  const double peer_weight = 1.0 / static_cast<double>(m - 1);

  std::vector<double> matrix(m * m, -peer_weight);
  std::vector<double> rhs(m);
  for (std::size_t i = 0; i < m; ++i) {
    matrix[i * m + i] = 1.0 + lambdas[i];
    rhs[i] = lambdas[i] * raw[i];
  }

  EquilibriumSolution out;
  if (auto solved = detail::solve_dense(std::move(matrix), std::move(rhs))) {
    out.scores = std::move(*solved);
    for (double& s : out.scores) s = std::clamp(s, 0.0, 1.0);
    out.status = SolveStatus::Exact;
  } else {
    out.scores.assign(raw.values().begin(), raw.values().end());
    out.status = SolveStatus::FallbackRaw;
  }
  const auto summary = summarize(out.scores);
  out.mean = summary.mean;
  out.dispersion = summary.dispersion;
  return out;
}

IterationResult iterate_equilibrium(const RawScoreVector& raw, const StubbornnessVector& lambdas,
                                    double tolerance, std::size_t max_iterations,
                                    std::span<const double> start) {
  require_same_size(raw.size(), lambdas.size());
  if (!(tolerance > 0.0) || !std::isfinite(tolerance)) {
    throw InvalidArgument("tolerance must be a positive finite number");
  }
  if (max_iterations < 1) {
    throw InvalidArgument("max_iterations must be >= 1");
  }
  const std::size_t m = raw.size();
  if (!start.empty() && start.size() != m) {
    throw InvalidArgument("initial point has wrong length");
  }

  const double min_lambda = *std::min_element(lambdas.values().begin(), lambdas.values().end());
  const double contraction = 1.0 / (1.0 + min_lambda);
  const double error_per_step = contraction / (1.0 - contraction);

  std::vector<double> current = start.empty()
                                    ? std::vector<double>(raw.values().begin(), raw.values().end())
                                    : std::vector<double>(start.begin(), start.end());
  std::vector<double> next(m);

  for (std::size_t iteration = 1; iteration <= max_iterations; ++iteration) {
    const double total = std::accumulate(current.begin(), current.end(), 0.0);
    double change = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double others_mean = (total - current[i]) / static_cast<double>(m - 1);
      next[i] = best_response(others_mean, raw[i], lambdas[i]);
      change = std::max(change, std::abs(next[i] - current[i]));
    }
    current.swap(next);
    if (change * error_per_step < tolerance) {
      IterationResult result;
      result.iterations = iteration;
      result.solution.scores = current;
      result.solution.status = SolveStatus::Exact;
      const auto summary = summarize(current);
      result.solution.mean = summary.mean;
      result.solution.dispersion = summary.dispersion;
      return result;
    }
  }
  throw NonConvergence("best-response iteration did not converge in " +
                           std::to_string(max_iterations) + " iterations",
                       current, max_iterations);
}

double residual(const RawScoreVector& raw, const StubbornnessVector& lambdas,
                std::span<const double> candidate_scores) {
  require_same_size(raw.size(), lambdas.size());
  if (candidate_scores.size() != raw.size()) {
    throw InvalidArgument("candidate scores differ in length from raw scores");
  }
  const std::size_t m = raw.size();
  const double total = std::accumulate(candidate_scores.begin(), candidate_scores.end(), 0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double peers = (total - candidate_scores[i]) / static_cast<double>(m - 1);
    const double r = (1.0 + lambdas[i]) * candidate_scores[i] - peers - lambdas[i] * raw[i];
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

}  // namespace nashverify
