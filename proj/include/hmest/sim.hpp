#pragma once

// Monte Carlo replication studies for the estimators in this library.
//
// Replicate r draws from a std::mt19937_64 seeded with
// std::seed_seq{seed_lo, seed_hi, r_lo, r_hi, stream}, so every replicate is
// reproducible in isolation. Replicates are grouped into fixed chunks of
// kChunkSize; each chunk is summed in replicate order and chunk sums are
// added in chunk order, which makes reports bit-identical for any thread
// count.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "hmest/dataset.hpp"
#include "hmest/estimator.hpp"
#include "hmest/pattern.hpp"

namespace hmest::sim {

inline constexpr Index kChunkSize = 256;

struct Population {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int dimension() const { return static_cast<int>(mean.size()); }
};

struct PatternWeight {
  MissingPattern pattern;
  double probability = 0;
};

/// Missing completely at random: each row independently takes one of the
/// listed patterns.
struct Mcar {
  std::vector<PatternWeight> patterns;
};

/// Step k (k = 0..Q-2) drops component Q-1-k with probability step_probs[k],
/// given that every later component was already dropped. Component 0 is
/// always observed. A single probability applies to every step.
struct MonotoneDropout {
  std::vector<double> step_probs;
};

/// Like Mcar, but every observed component of an incomplete row is shifted
/// by `delta` (a non-ignorable mechanism).
struct DeltaShift {
  std::vector<PatternWeight> patterns;
  double delta = 0;
};

using Mechanism = std::variant<Mcar, MonotoneDropout, DeltaShift>;

enum class EstimatorKind {
  CompleteCase,
  AvailableCase,
  HierarchicalKnown,
  HierarchicalPlugIn,
  ClosedForm,       // bivariate: mean-vector / change-score delta
  IncompletePairs,  // bivariate: x211 - x222
  ShiftAdjusted,    // bivariate: pooled shift-invariant delta
};

const char* to_string(EstimatorKind k);
EstimatorKind estimator_from_string(const std::string& name);

struct Tolerances {
  /// |bias| must not exceed this many Monte Carlo standard errors.
  double mean_se = 4.0;
  /// |empirical variance / theoretical - 1| bound.
  double variance_rel = 0.02;
};

struct StudySpec {
  Population population;
  Mechanism mechanism;
  Index n = 0;
  Index replicates = 0;
  std::vector<EstimatorKind> estimators;
  std::uint64_t seed = 0;
  Tolerances tolerances;
  bool monotone = false;
  /// 0 = hardware concurrency.
  unsigned threads = 0;
};

/// Throws InvalidSpec / InvalidPopulation on a bad spec.
void validate(const StudySpec& spec);

/// Draws replicate `replicate` of the study: N rows with missing cells
/// applied per the mechanism.
Dataset<double> generate(const StudySpec& spec, std::uint64_t replicate);

struct TargetSummary {
  std::string name;
  double truth = 0;
  double mean = 0;
  double bias = 0;
  double variance = 0;
  double mean_se = 0;
  double variance_se = 0;
  /// Average over replicates of the formula variance at the realised sizes.
  std::optional<double> theoretical_variance;
  bool mean_ok = true;
  std::optional<bool> variance_ok;
};

struct EstimatorSummary {
  EstimatorKind kind;
  Index used = 0;      // replicates that produced an estimate
  Index failures = 0;  // replicates where the estimator was not computable
  Index fallbacks = 0; // hierarchical nodes that hit the singular-K* fallback
  Index correlated_donor_replicates = 0;
  std::vector<TargetSummary> targets;
  Eigen::MatrixXd covariance;  // empirical, over targets
};

struct ReplicateFailure {
  std::uint64_t replicate = 0;
  EstimatorKind estimator;
  std::string message;
};

struct StudyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct StudyReport {
  Index n = 0;
  Index replicates = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<MissingPattern, double>> mean_pattern_counts;
  double mean_dropped = 0;
  std::vector<EstimatorSummary> estimators;
  std::vector<StudyCheck> checks;
  /// First few failures, in replicate order.
  std::vector<ReplicateFailure> failure_log;

  bool all_passed() const;
  const EstimatorSummary* find(EstimatorKind k) const;
};

StudyReport run_study(const StudySpec& spec);

struct ConvergenceRow {
  Index n = 0;
  double gain_error = 0;    // mean Frobenius norm of plug-in minus known gain
  Index gain_compared = 0;  // replicates where both gains existed with equal shape
  double variance_ratio = 0;  // trace(plug-in cov) / trace(known cov), empirical
  double known_trace = 0;
  double plugin_trace = 0;
};

/// Frobenius norm of the difference between two root gains, or nullopt when
/// either is empty or they act on different gain columns.
std::optional<double> gain_difference(const UpdatedEstimate<double>& a, const UpdatedEstimate<double>& b);

/// Runs the known-covariance and plug-in hierarchical estimators side by side
/// at each sample size. Throws LadderTooShort for fewer than three sizes.
std::vector<ConvergenceRow> convergence_probe(const StudySpec& base, const std::vector<Index>& ladder);

/// Passes when the gain error strictly decreases along the ladder and the
/// variance ratio moves monotonically towards 1.
StudyCheck convergence_check(const std::vector<ConvergenceRow>& rows);

}  // namespace hmest::sim
