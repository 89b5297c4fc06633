#pragma once

// Right-censored CDF estimation. recursive_cdf builds the curve one event
// time at a time: the survival at t_s is the survival at t_{s-1} scaled by a
// ratio of empirical survivals, each computed on the rows still eligible at
// step s (events at any time plus rows censored no earlier than t_s). The
// product-limit estimator is kept as an independent reference.

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <vector>

#include "hmest/error.hpp"

namespace hmest {

template <typename Scalar>
struct CensoredObservation {
  Scalar time;
  /// true: the value itself was seen; false: censored at `time`.
  bool event;
};

template <typename Scalar>
using CensoredSample = std::vector<CensoredObservation<Scalar>>;

template <typename Scalar>
struct StepCdf {
  std::vector<Scalar> knots;
  std::vector<Scalar> cdf;

  std::size_t size() const noexcept { return knots.size(); }
  Scalar survival(std::size_t s) const { return Scalar(1) - cdf[s]; }
};

namespace detail {

template <typename Scalar>
void validate_sample(const CensoredSample<Scalar>& sample) {
  bool any_event = false;
  for (std::size_t n = 0; n < sample.size(); ++n) {
    const Scalar t = sample[n].time;
    if (!std::isfinite(t) || !(t > Scalar(0))) {
      throw Error(ErrorKind::BadCell,
                  "bad cell: time at row " + std::to_string(n) + " must be finite and > 0");
    }
    any_event |= sample[n].event;
  }
  if (!any_event) throw Error(ErrorKind::NoEstimableCdf, "no estimable CDF");
}

template <typename Scalar>
std::vector<Scalar> event_times(const CensoredSample<Scalar>& sample) {
  std::vector<Scalar> out;
  for (const auto& o : sample)
    if (o.event) out.push_back(o.time);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

template <typename Scalar>
Scalar clamp01(Scalar v) {
  return std::clamp(v, Scalar(0), Scalar(1));
}

}  // namespace detail

/// Recursive information-absorbing CDF estimate at every distinct event time.
template <typename Scalar>
StepCdf<Scalar> recursive_cdf(const CensoredSample<Scalar>& sample) {
  detail::validate_sample(sample);
  StepCdf<Scalar> out;
  out.knots = detail::event_times(sample);

  // Empirical CDF at t over the step subsample {events} U {censored at >= cut}.
  const auto empirical = [&sample](Scalar cut, Scalar t) {
    std::size_t size = 0, below = 0;
    for (const auto& o : sample) {
      if (o.event) {
        ++size;
        if (o.time <= t) ++below;
      } else if (o.time >= cut) {
        ++size;
      }
    }
    return std::make_pair(static_cast<Scalar>(below), static_cast<Scalar>(size));
  };

  Scalar surv = Scalar(1);
  for (std::size_t s = 0; s < out.knots.size(); ++s) {
    const Scalar ts = out.knots[s];
    if (s == 0) {
      const auto [below, size] = empirical(ts, ts);
      surv = Scalar(1) - below / size;
    } else {
      const auto [below_now, size] = empirical(ts, ts);
      const auto [below_prev, size_prev] = empirical(ts, out.knots[s - 1]);
      (void)size_prev;
      const Scalar denom = size - below_prev;
      // 0/0: nobody left at risk, survival already reached 0.
      if (denom > Scalar(0)) surv *= (size - below_now) / denom;
    }
    out.cdf.push_back(detail::clamp01(Scalar(1) - surv));
  }
  return out;
}

/// Product-limit (Kaplan-Meier) estimator. Censorings tied with an event time
/// count as at risk for that event; tied events aggregate.
template <typename Scalar>
StepCdf<Scalar> product_limit(const CensoredSample<Scalar>& sample) {
  detail::validate_sample(sample);
  StepCdf<Scalar> out;
  out.knots = detail::event_times(sample);
  Scalar surv = Scalar(1);
  for (const Scalar t : out.knots) {
    std::size_t at_risk = 0, deaths = 0;
    for (const auto& o : sample) {
      if (o.time >= t) ++at_risk;
      if (o.event && o.time == t) ++deaths;
    }
    surv *= Scalar(1) - static_cast<Scalar>(deaths) / static_cast<Scalar>(at_risk);
    out.cdf.push_back(detail::clamp01(Scalar(1) - surv));
  }
  return out;
}

template <typename Scalar>
struct PooledVariance {
  Scalar weight_a;
  Scalar weight_b;
  Scalar variance;
};

/// Inverse-variance combination of two independent unbiased estimators:
/// weights var_b/(var_a+var_b), var_a/(var_a+var_b); combined variance
/// var_a var_b/(var_a+var_b), so 1/combined = 1/var_a + 1/var_b.
template <typename Scalar>
PooledVariance<Scalar> pooled_variance_combine(Scalar var_a, Scalar var_b) {
  if (!(var_a > Scalar(0)) || !(var_b > Scalar(0)) || !std::isfinite(var_a) ||
      !std::isfinite(var_b)) {
    throw Error(ErrorKind::InvalidVariance, "invalid variance");
  }
  const Scalar total = var_a + var_b;
  return {var_b / total, var_a / total, var_a * var_b / total};
}

/// Largest absolute knot-wise difference; throws if the knots differ.
template <typename Scalar>
Scalar max_deviation(const StepCdf<Scalar>& a, const StepCdf<Scalar>& b) {
  if (a.knots != b.knots) throw Error(ErrorKind::InvalidSpec, "step functions have different knots");
  Scalar worst = Scalar(0);
  for (std::size_t s = 0; s < a.size(); ++s) worst = std::max(worst, std::abs(a.cdf[s] - b.cdf[s]));
  return worst;
}

}  // namespace hmest
