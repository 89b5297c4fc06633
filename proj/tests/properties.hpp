#pragma once

// Randomised invariant checks shared by the unit tests and the acceptance
// suite. Each returns how many cases ran and how many broke the invariant.

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "hmest/estimator.hpp"
#include "hmest/km.hpp"

namespace hmest::properties {

struct Tally {
  int cases = 0;
  int failures = 0;
  double worst = 0;  // largest violation seen, as a fraction of the tolerance where one is scaled
  std::string first_failure;

  bool ok() const { return cases > 0 && failures == 0; }
  void record(bool pass, double violation, const std::string& what) {
    ++cases;
    worst = std::max(worst, violation);
    if (!pass && failures++ == 0) first_failure = what;
  }
};

inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, int q) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd a(q, q);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) a(i, j) = z(rng);
  return a * a.transpose() + 0.2 * Eigen::MatrixXd::Identity(q, q);
}

/// N rows from N(0, sigma) with each row complete with probability 1/2 and
/// otherwise given a random non-empty pattern.
inline Dataset<double> random_dataset(std::mt19937_64& rng, int q, Index n, const Eigen::MatrixXd& sigma) {
  std::normal_distribution<double> z;
  std::uniform_int_distribution<std::uint64_t> bits(1, (std::uint64_t{1} << q) - 1);
  const Eigen::MatrixXd lower = sigma.llt().matrixL();
  Eigen::MatrixXd x(n, q);
  for (Index r = 0; r < n; ++r) {
    Eigen::VectorXd e(q);
    for (int c = 0; c < q; ++c) e(c) = z(rng);
    x.row(r) = (lower * e).transpose();
  }
  auto d = Dataset<double>::from_matrix(x);
  std::bernoulli_distribution complete(0.5);
  for (Index r = 0; r < n; ++r) {
    if (complete(rng)) continue;
    const auto mask = bits(rng);
    for (int c = 0; c < q; ++c)
      if (!((mask >> c) & 1U)) d.set_missing(r, c);
  }
  return d;
}

/// Largest K* condition number over the corrected nodes; round-off in the
/// inputs can be amplified by this much.
inline double worst_condition(const HierarchicalResult<double>& r) {
  double worst = 1;
  for (const auto& n : r.nodes)
    if (n.estimate) worst = std::max(worst, n.estimate->provenance.k_star_condition);
  return worst;
}

constexpr double kRoundoff = 1e-13;

inline double min_eig(const Eigen::MatrixXd& m) { return min_eigenvalue(symmetrized(m)); }

/// Cov(theta_hat) - Cov(theta_tilde) is PSD at the root.
inline Tally dispersion_reduction(std::uint64_t seed, int cases) {
  std::mt19937_64 rng(seed);
  Tally t;
  while (t.cases < cases) {
    const int q = 2 + static_cast<int>(rng() % 3);
    const Eigen::MatrixXd sigma = random_spd(rng, q);
    const auto data = random_dataset(rng, q, 20 + static_cast<Index>(rng() % 40), sigma);
    const auto params = component_means<double>(q);
    const bool known = rng() % 2 == 0;
    CovarianceMode<double> mode = PlugIn{};
    if (known) mode = KnownMoments<double>{sigma};
    std::optional<HierarchicalResult<double>> res;
    try {
      res = hierarchical_estimate<double>(data, params, mode, {});
    } catch (const Error&) {
      continue;
    }
    const Eigen::MatrixXd diff = res->root_raw.cov_hat - res->root.cov_tilde;
    const double scale = std::max(res->root_raw.cov_hat.trace(), 1e-300);
    const double e = min_eig(diff) / scale;
    t.record(e >= -1e-12, std::max(0.0, -e), "case " + std::to_string(t.cases));
  }
  return t;
}

/// A zero residual (every child agrees with the parent on the shared
/// parameters) leaves theta_hat unchanged bit for bit.
inline Tally zero_residual(std::uint64_t seed, int cases) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Tally t;
  for (int k = 0; k < cases; ++k) {
    const int q = 2 + static_cast<int>(rng() % 3);
    const auto params = component_means<double>(q);
    SubsampleEstimate<double> parent;
    parent.pattern = MissingPattern::complete(q);
    parent.param_ids = estimable(parent.pattern, params);
    parent.theta_hat.resize(q);
    for (int c = 0; c < q; ++c) parent.theta_hat(c) = z(rng);
    parent.cov_hat = random_spd(rng, q) / 50.0;
    parent.J = 50;
    std::vector<UpdatedEstimate<double>> kids;
    for (const auto& p : children(parent.pattern)) {
      if (rng() % 3 == 0) continue;
      UpdatedEstimate<double> kid;
      kid.pattern = p;
      kid.param_ids = estimable(p, params);
      kid.theta_tilde.resize(static_cast<Index>(kid.param_ids.size()));
      for (std::size_t i = 0; i < kid.param_ids.size(); ++i) {
        kid.theta_tilde(static_cast<Index>(i)) = parent.theta_hat(kid.param_ids[i]);
      }
      kid.cov_tilde = random_spd(rng, static_cast<int>(kid.param_ids.size())) / 20.0;
      kid.J = 20;
      kids.push_back(std::move(kid));
    }
    const auto blocks = assemble_blocks<double>(parent, kids);
    const auto est = blocks ? update(parent, *blocks, gain_system(parent, *blocks)) : uncorrected(parent);
    const double dev = (est.theta_tilde - parent.theta_hat).cwiseAbs().maxCoeff();
    t.record(dev == 0.0, dev, "case " + std::to_string(k));
  }
  return t;
}

/// x -> a x + b maps theta to a theta + b and the covariance to a^2 cov
/// (plug-in mode, where the gain is scale free), up to round-off times the
/// worst K* condition number.
inline Tally scale_equivariance(std::uint64_t seed, int cases) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> la(-3, 3), lb(-5, 5);
  Tally t;
  while (t.cases < cases) {
    const int q = 2 + static_cast<int>(rng() % 3);
    const auto data = random_dataset(rng, q, 20 + static_cast<Index>(rng() % 40), random_spd(rng, q));
    const double a = std::exp(la(rng)) * (rng() % 2 ? 1 : -1), b = lb(rng);
    auto scaled = data;
    scaled.values = (data.values.array() * a + b).matrix();
    const auto params = component_means<double>(q);
    std::optional<HierarchicalResult<double>> r0, r1;
    try {
      r0 = hierarchical_estimate<double>(data, params, PlugIn{}, {});
      r1 = hierarchical_estimate<double>(scaled, params, PlugIn{}, {});
    } catch (const Error&) {
      continue;
    }
    const Eigen::VectorXd expect = (r0->root.theta_tilde.array() * a + b).matrix();
    const double th = (r1->root.theta_tilde - expect).cwiseAbs().maxCoeff() / (1.0 + expect.cwiseAbs().maxCoeff());
    // Scaled by the complete-case covariance: with tiny plug-in subsamples
    // the corrected covariance can collapse to round-off level.
    const Eigen::MatrixXd cov = r0->root.cov_tilde * (a * a);
    const double cv = (r1->root.cov_tilde - cov).cwiseAbs().maxCoeff() /
                      (r0->root_raw.cov_hat.cwiseAbs().maxCoeff() * a * a);
    const double tol = kRoundoff * std::max(worst_condition(*r0), worst_condition(*r1));
    t.record(th <= tol && cv <= tol, std::max(th, cv) / tol, "case " + std::to_string(t.cases));
  }
  return t;
}

/// Shuffling rows changes nothing beyond summation round-off, amplified at
/// most by the worst K* condition number.
inline Tally permutation_invariance(std::uint64_t seed, int cases) {
  std::mt19937_64 rng(seed);
  Tally t;
  while (t.cases < cases) {
    const int q = 2 + static_cast<int>(rng() % 3);
    const Index n = 20 + static_cast<Index>(rng() % 40);
    const auto data = random_dataset(rng, q, n, random_spd(rng, q));
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto shuffled = data;
    for (Index r = 0; r < n; ++r) {
      shuffled.values.row(r) = data.values.row(perm[static_cast<std::size_t>(r)]);
      shuffled.observed.row(r) = data.observed.row(perm[static_cast<std::size_t>(r)]);
    }
    const auto params = component_means<double>(q);
    std::optional<HierarchicalResult<double>> r0, r1;
    try {
      r0 = hierarchical_estimate<double>(data, params, PlugIn{}, {});
      r1 = hierarchical_estimate<double>(shuffled, params, PlugIn{}, {});
    } catch (const Error&) {
      continue;
    }
    const double th = (r1->root.theta_tilde - r0->root.theta_tilde).cwiseAbs().maxCoeff() /
                      (1.0 + r0->root.theta_tilde.cwiseAbs().maxCoeff());
    const double cv = (r1->root.cov_tilde - r0->root.cov_tilde).cwiseAbs().maxCoeff() /
                      r0->root_raw.cov_hat.cwiseAbs().maxCoeff();
    bool same_counts = r0->partition.groups.size() == r1->partition.groups.size();
    for (const auto& [p, rows] : r0->partition.groups) same_counts &= r1->partition.size_of(p) == static_cast<Index>(rows.size());
    const double tol = kRoundoff * std::max(worst_condition(*r0), worst_condition(*r1));
    t.record(same_counts && th <= tol && cv <= tol, std::max(th, cv) / tol, "case " + std::to_string(t.cases));
  }
  return t;
}

/// 1 / combined = 1 / var_a + 1 / var_b.
inline Tally fisher_additivity(std::uint64_t seed, int cases) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> lv(-8, 8);
  Tally t;
  for (int k = 0; k < cases; ++k) {
    const double va = std::exp(lv(rng)), vb = std::exp(lv(rng));
    const auto r = pooled_variance_combine(va, vb);
    const double lhs = 1.0 / r.variance, rhs = 1.0 / va + 1.0 / vb;
    const double rel = std::abs(lhs - rhs) / rhs;
    t.record(rel <= 1e-12 && std::abs(r.weight_a + r.weight_b - 1.0) <= 1e-15, rel, "case " + std::to_string(k));
  }
  return t;
}

}  // namespace hmest::properties
