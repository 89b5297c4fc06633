#pragma once

// Closed-form estimators for two components observed under the patterns
// (1,1), (1,0) and (0,1), with subsample sizes J11, J21, J22.

#include <cmath>
#include <limits>

#include <Eigen/Core>
#include <Eigen/LU>

#include "hmest/dataset.hpp"
#include "hmest/error.hpp"
#include "hmest/linalg.hpp"

namespace hmest {

/// Sizes are scalars so that +inf can stand for "known exactly".
template <typename Scalar>
struct BivariateConfig {
  Scalar sigma11 = 1;  // Var(X1)
  Scalar sigma22 = 1;  // Var(X2)
  Scalar sigma12 = 0;  // Cov(X1, X2)
  Scalar J11 = 1;
  Scalar J21 = 0;
  Scalar J22 = 0;

  Eigen::Matrix<Scalar, 2, 2> sigma() const {
    Eigen::Matrix<Scalar, 2, 2> s;
    s << sigma11, sigma12, sigma12, sigma22;
    return s;
  }
};

/// Subsample means: complete rows (x111, x112), (1,0) rows x211, (0,1) rows x222.
template <typename Scalar>
struct BivariateMeans {
  Scalar x111 = 0;
  Scalar x112 = 0;
  Scalar x211 = 0;
  Scalar x222 = 0;
};

template <typename Scalar>
struct MeanVectorEstimate {
  Eigen::Matrix<Scalar, 2, 1> mu;
  Eigen::Matrix<Scalar, 2, 2> cov;
};

template <typename Scalar>
struct DeltaEstimate {
  Scalar delta;
  Scalar variance;
  Scalar gain;
};

namespace detail {

template <typename Scalar>
void require_pd(const BivariateConfig<Scalar>& cfg) {
  const bool ok = cfg.sigma11 > 0 && cfg.sigma22 > 0 &&
                  cfg.sigma11 * cfg.sigma22 - cfg.sigma12 * cfg.sigma12 > 0;
  if (!ok) throw Error(ErrorKind::SingularSystem, "singular system: covariance is not positive definite");
}

template <typename Scalar>
void require_size(Scalar j, const char* name) {
  if (!(j >= Scalar(1))) {
    throw Error(ErrorKind::InvalidSpec, std::string(name) + " must be >= 1");
  }
}

}  // namespace detail

/// Lambda0 = Sigma * [Sigma + diag(J11 s11 / J21, J11 s22 / J22)]^-1, the
/// gain K (K*)^-1 of the general recursion for this configuration.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> lambda0(const BivariateConfig<Scalar>& cfg) {
  detail::require_pd(cfg);
  detail::require_size(cfg.J11, "J11");
  detail::require_size(cfg.J21, "J21");
  detail::require_size(cfg.J22, "J22");
  const Eigen::Matrix<Scalar, 2, 2> s = cfg.sigma();
  Eigen::Matrix<Scalar, 2, 2> bracket = s;
  bracket(0, 0) += cfg.J11 * cfg.sigma11 / cfg.J21;
  bracket(1, 1) += cfg.J11 * cfg.sigma22 / cfg.J22;
  const Scalar det = bracket.determinant();
  if (!(std::abs(det) > std::numeric_limits<Scalar>::epsilon() * bracket.squaredNorm())) {
    throw Error(ErrorKind::SingularSystem, "singular system");
  }
  return s * bracket.inverse();
}

/// Mean vector using all three subsamples, with its covariance.
template <typename Scalar>
MeanVectorEstimate<Scalar> mean_vector(const BivariateMeans<Scalar>& m,
                                       const BivariateConfig<Scalar>& cfg) {
  const Eigen::Matrix<Scalar, 2, 2> lam = lambda0(cfg);
  const Eigen::Matrix<Scalar, 2, 1> complete(m.x111, m.x112);
  const Eigen::Matrix<Scalar, 2, 1> residual(m.x111 - m.x211, m.x112 - m.x222);
  const Eigen::Matrix<Scalar, 2, 2> cov_hat = cfg.sigma() / cfg.J11;
  MeanVectorEstimate<Scalar> out;
  out.mu = complete - lam * residual;
  out.cov = symmetrized(cov_hat - lam * cov_hat);
  return out;
}

/// Change score mu1 - mu2 under monotone dropout (no (0,1) rows). J22 and
/// x222 are ignored.
template <typename Scalar>
DeltaEstimate<Scalar> change_score(const BivariateMeans<Scalar>& m,
                                   const BivariateConfig<Scalar>& cfg) {
  if (!(cfg.sigma11 > Scalar(0))) throw Error(ErrorKind::DegenerateVariance, "degenerate variance");
  detail::require_size(cfg.J11, "J11");
  if (!(cfg.J21 >= Scalar(0))) throw Error(ErrorKind::InvalidSpec, "J21 must be >= 0");
  const Scalar share = cfg.J21 / (cfg.J11 + cfg.J21);
  const Scalar slope = Scalar(1) - cfg.sigma12 / cfg.sigma11;
  DeltaEstimate<Scalar> out;
  out.gain = share * slope;
  out.delta = (m.x111 - m.x112) - out.gain * (m.x111 - m.x211);
  const Scalar d = cfg.sigma11 - cfg.sigma12;
  out.variance = (cfg.sigma11 - Scalar(2) * cfg.sigma12 + cfg.sigma22 - share * d * d / cfg.sigma11) / cfg.J11;
  return out;
}

/// Change score under compound symmetry Sigma = sigma^2 [[1, rho], [rho, 1]].
template <typename Scalar>
DeltaEstimate<Scalar> change_score_cs(const BivariateMeans<Scalar>& m, Scalar sigma, Scalar rho,
                                      Scalar J11, Scalar J21) {
  if (!(std::abs(rho) <= Scalar(1))) throw Error(ErrorKind::InvalidCorrelation, "invalid correlation");
  if (!(sigma > Scalar(0))) throw Error(ErrorKind::DegenerateVariance, "degenerate variance");
  const Scalar s2 = sigma * sigma;
  BivariateConfig<Scalar> cfg{s2, s2, rho * s2, J11, J21, Scalar(0)};
  return change_score(m, cfg);
}

template <typename Scalar>
struct ShiftVariances {
  Scalar complete_pairs;    // Var(x111 - x112)
  Scalar incomplete_pairs;  // Var(x211 - x222)
};

template <typename Scalar>
ShiftVariances<Scalar> shift_variances(const BivariateConfig<Scalar>& cfg) {
  detail::require_size(cfg.J11, "J11");
  detail::require_size(cfg.J21, "J21");
  detail::require_size(cfg.J22, "J22");
  return {(cfg.sigma11 - Scalar(2) * cfg.sigma12 + cfg.sigma22) / cfg.J11,
          cfg.sigma11 / cfg.J21 + cfg.sigma22 / cfg.J22};
}

/// Change score that stays unbiased when incomplete rows carry a common
/// shift: pools the complete-pair difference with x211 - x222, in which the
/// shift cancels.
template <typename Scalar>
DeltaEstimate<Scalar> nonignorable_shift(const BivariateMeans<Scalar>& m,
                                         const BivariateConfig<Scalar>& cfg) {
  const auto v = shift_variances(cfg);
  if (!(v.complete_pairs > Scalar(0)) || !(v.incomplete_pairs >= Scalar(0)) ||
      !(v.complete_pairs + v.incomplete_pairs > Scalar(0))) {
    throw Error(ErrorKind::DegenerateVariance, "degenerate variance");
  }
  const Scalar total = v.complete_pairs + v.incomplete_pairs;
  const Scalar d_hat = m.x111 - m.x112;
  const Scalar d_tilde = m.x211 - m.x222;
  DeltaEstimate<Scalar> out;
  out.gain = v.complete_pairs / total;
  out.delta = d_hat - out.gain * (d_hat - d_tilde);
  out.variance = v.complete_pairs - v.complete_pairs * v.complete_pairs / total;
  return out;
}

/// Subsample means, sizes and complete-case sample covariance of a
/// two-column dataset.
template <typename Scalar>
struct BivariateSummary {
  BivariateMeans<Scalar> means;
  Index J11 = 0, J21 = 0, J22 = 0, dropped = 0;
  /// Complete-case sample covariance; NaN when J11 < 2.
  Eigen::Matrix<Scalar, 2, 2> complete_cov;
};

template <typename Scalar>
BivariateSummary<Scalar> summarize_bivariate(const Dataset<Scalar>& data) {
  if (data.dimension() != 2) {
    throw Error(ErrorKind::InvalidSpec, "bivariate estimators need exactly 2 columns");
  }
  if (data.rows() == 0) throw Error(ErrorKind::NoData, "no data");
  BivariateSummary<Scalar> s;
  Scalar s111 = 0, s112 = 0, s211 = 0, s222 = 0;
  for (Index n = 0; n < data.rows(); ++n) {
    const bool a = data.observed(n, 0), b = data.observed(n, 1);
    if (a && b) {
      ++s.J11;
      s111 += data.values(n, 0);
      s112 += data.values(n, 1);
    } else if (a) {
      ++s.J21;
      s211 += data.values(n, 0);
    } else if (b) {
      ++s.J22;
      s222 += data.values(n, 1);
    } else {
      ++s.dropped;
    }
  }
  const Scalar nan = std::numeric_limits<Scalar>::quiet_NaN();
  s.means.x111 = s.J11 ? s111 / static_cast<Scalar>(s.J11) : nan;
  s.means.x112 = s.J11 ? s112 / static_cast<Scalar>(s.J11) : nan;
  s.means.x211 = s.J21 ? s211 / static_cast<Scalar>(s.J21) : nan;
  s.means.x222 = s.J22 ? s222 / static_cast<Scalar>(s.J22) : nan;
  s.complete_cov.setConstant(nan);
  if (s.J11 >= 2) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 2> cc(s.J11, 2);
    Index k = 0;
    for (Index n = 0; n < data.rows(); ++n) {
      if (data.observed(n, 0) && data.observed(n, 1)) cc.row(k++) = data.values.row(n);
    }
    s.complete_cov = sample_covariance(cc);
  }
  return s;
}

}  // namespace hmest
