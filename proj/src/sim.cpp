#include "hmest/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <random>
#include <thread>

#include <Eigen/Cholesky>

#include "hmest/bivariate.hpp"
#include "hmest/error.hpp"
#include "hmest/estimator.hpp"

namespace hmest::sim {

namespace {

constexpr std::size_t kFailureLogLimit = 20;
constexpr std::uint32_t kDataStream = 0x68'6d'65'73;  // "hmes"

const char* const kEstimatorNames[] = {
    "complete_case", "available_case", "hierarchical_known", "hierarchical_plugin",
    "closed_form",   "incomplete_pairs", "shift_adjusted",
};

bool is_bivariate_only(EstimatorKind k) {
  return k == EstimatorKind::ClosedForm || k == EstimatorKind::IncompletePairs ||
         k == EstimatorKind::ShiftAdjusted;
}

bool is_ignorable(const Mechanism& m) { return !std::holds_alternative<DeltaShift>(m); }

std::vector<std::string> target_names(EstimatorKind k, int q) {
  if (is_bivariate_only(k)) return {"delta"};
  std::vector<std::string> out;
  for (int c = 0; c < q; ++c) out.push_back("mu" + std::to_string(c + 1));
  if (q >= 2) out.push_back("delta");
  return out;
}

Eigen::VectorXd target_truth(EstimatorKind k, const Population& pop) {
  const int q = pop.dimension();
  if (is_bivariate_only(k)) return Eigen::VectorXd::Constant(1, pop.mean(0) - pop.mean(1));
  Eigen::VectorXd out(q >= 2 ? q + 1 : q);
  out.head(q) = pop.mean;
  if (q >= 2) out(q) = pop.mean(0) - pop.mean(1);
  return out;
}

std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate),
                    static_cast<std::uint32_t>(replicate >> 32), kDataStream};
  return std::mt19937_64(seq);
}

void check_weights(const std::vector<PatternWeight>& patterns, int q) {
  if (patterns.empty()) throw Error(ErrorKind::InvalidSpec, "mechanism lists no patterns");
  double total = 0;
  for (const auto& w : patterns) {
    if (w.pattern.dimension() != q) {
      throw Error(ErrorKind::InvalidSpec, "pattern " + w.pattern.to_string() + " has wrong dimension");
    }
    if (!(w.probability >= 0 && w.probability <= 1)) {
      throw Error(ErrorKind::InvalidSpec, "pattern probabilities must lie in [0, 1]");
    }
    total += w.probability;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidSpec, "pattern probabilities must sum to 1");
  }
}

struct ReplicateValue {
  Eigen::VectorXd values;
  std::optional<Eigen::VectorXd> theoretical;
  Index fallbacks = 0;
  bool correlated = false;
};

struct Accumulator {
  Index count = 0;
  Eigen::VectorXd s1, s3, s4, theo;
  Eigen::MatrixXd s2;
  Index theo_count = 0;
  Index failures = 0;
  Index fallbacks = 0;
  Index correlated = 0;

  explicit Accumulator(Index t = 0)
      : s1(Eigen::VectorXd::Zero(t)), s3(Eigen::VectorXd::Zero(t)), s4(Eigen::VectorXd::Zero(t)),
        theo(Eigen::VectorXd::Zero(t)), s2(Eigen::MatrixXd::Zero(t, t)) {}

  void add(const ReplicateValue& v, const Eigen::VectorXd& truth) {
    const Eigen::VectorXd y = v.values - truth;
    ++count;
    s1 += y;
    s2.noalias() += y * y.transpose();
    const Eigen::ArrayXd y2 = y.array().square();
    s3.array() += y2 * y.array();
    s4.array() += y2 * y2;
    if (v.theoretical) {
      theo += *v.theoretical;
      ++theo_count;
    }
    fallbacks += v.fallbacks;
    correlated += v.correlated ? 1 : 0;
  }

  void merge(const Accumulator& o) {
    count += o.count;
    s1 += o.s1;
    s2 += o.s2;
    s3 += o.s3;
    s4 += o.s4;
    theo += o.theo;
    theo_count += o.theo_count;
    failures += o.failures;
    fallbacks += o.fallbacks;
    correlated += o.correlated;
  }
};

struct ProbeChunk {
  Accumulator known, plugin;
  double gain_error = 0;
  Index compared = 0;

  explicit ProbeChunk(Index q) : known(q), plugin(q) {}
};

struct ChunkResult {
  std::vector<Accumulator> acc;
  std::map<MissingPattern, Index> pattern_counts;
  Index dropped = 0;
  std::vector<ReplicateFailure> failures;
};

struct Means1 {
  Eigen::VectorXd mean;
  Index n = 0;
};

Means1 complete_case_means(const Dataset<double>& d) {
  Means1 out{Eigen::VectorXd::Zero(d.dimension()), 0};
  for (Index r = 0; r < d.rows(); ++r) {
    if (d.observed.row(r).all()) {
      out.mean += d.values.row(r).transpose();
      ++out.n;
    }
  }
  if (out.n == 0) throw Error(ErrorKind::NoCompleteCases, "no complete cases");
  out.mean /= static_cast<double>(out.n);
  return out;
}

Eigen::VectorXd with_delta(const Eigen::VectorXd& mu) {
  if (mu.size() < 2) return mu;
  Eigen::VectorXd out(mu.size() + 1);
  out.head(mu.size()) = mu;
  out(mu.size()) = mu(0) - mu(1);
  return out;
}

Eigen::VectorXd with_delta_variance(const Eigen::MatrixXd& cov) {
  const Index q = cov.rows();
  Eigen::VectorXd out(q >= 2 ? q + 1 : q);
  out.head(q) = cov.diagonal();
  if (q >= 2) out(q) = cov(0, 0) + cov(1, 1) - 2 * cov(0, 1);
  return out;
}

BivariateConfig<double> bivariate_config(const Population& pop, const BivariateSummary<double>& s) {
  return {pop.cov(0, 0), pop.cov(1, 1), pop.cov(0, 1), static_cast<double>(s.J11),
          static_cast<double>(s.J21), static_cast<double>(s.J22)};
}

ReplicateValue closed_form(const Population& pop, const BivariateSummary<double>& s) {
  if (s.J11 < 1) throw Error(ErrorKind::NoCompleteCases, "no complete cases");
  auto cfg = bivariate_config(pop, s);
  ReplicateValue v;
  if (s.J21 >= 1 && s.J22 >= 1) {
    const auto est = mean_vector(s.means, cfg);
    v.values = Eigen::VectorXd::Constant(1, est.mu(0) - est.mu(1));
    v.theoretical = Eigen::VectorXd::Constant(1, est.cov(0, 0) + est.cov(1, 1) - 2 * est.cov(0, 1));
  } else if (s.J22 == 0) {
    const auto est = change_score(s.means, cfg);
    v.values = Eigen::VectorXd::Constant(1, est.delta);
    v.theoretical = Eigen::VectorXd::Constant(1, est.variance);
  } else {
    // Only (0,1) rows besides the complete ones: mirror the components.
    BivariateConfig<double> mirrored{cfg.sigma22, cfg.sigma11, cfg.sigma12, cfg.J11, cfg.J22, 0};
    const BivariateMeans<double> m{s.means.x112, s.means.x111, s.means.x222, 0};
    const auto est = change_score(m, mirrored);
    v.values = Eigen::VectorXd::Constant(1, -est.delta);
    v.theoretical = Eigen::VectorXd::Constant(1, est.variance);
  }
  return v;
}

ReplicateValue evaluate(EstimatorKind kind, const StudySpec& spec, const Dataset<double>& data,
                        const std::optional<BivariateSummary<double>>& biv) {
  const Population& pop = spec.population;
  const int q = pop.dimension();
  ReplicateValue v;
  switch (kind) {
    case EstimatorKind::CompleteCase: {
      const auto cc = complete_case_means(data);
      v.values = with_delta(cc.mean);
      v.theoretical = with_delta_variance(pop.cov / static_cast<double>(cc.n));
      return v;
    }
    case EstimatorKind::AvailableCase: {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(q);
      Eigen::VectorXi n = Eigen::VectorXi::Zero(q);
      Eigen::MatrixXi joint = Eigen::MatrixXi::Zero(q, q);
      for (Index r = 0; r < data.rows(); ++r) {
        for (int c = 0; c < q; ++c) {
          if (!data.observed(r, c)) continue;
          sum(c) += data.values(r, c);
          ++n(c);
          for (int c2 = 0; c2 < q; ++c2) joint(c, c2) += data.observed(r, c2) ? 1 : 0;
        }
      }
      if ((n.array() == 0).any()) throw Error(ErrorKind::NoData, "a component is never observed");
      v.values = with_delta(sum.array() / n.cast<double>().array());
      // Cov(mean_a, mean_b) = sigma_ab * n_ab / (n_a n_b) given the pattern counts.
      Eigen::MatrixXd cov(q, q);
      for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b)
          cov(a, b) = pop.cov(a, b) * joint(a, b) / (static_cast<double>(n(a)) * n(b));
      v.theoretical = with_delta_variance(cov);
      return v;
    }
    case EstimatorKind::HierarchicalKnown:
    case EstimatorKind::HierarchicalPlugIn: {
      const auto params = component_means<double>(q);
      CovarianceMode<double> mode = PlugIn{};
      if (kind == EstimatorKind::HierarchicalKnown) mode = KnownMoments<double>{pop.cov};
      HierarchyOptions opts;
      opts.monotone = spec.monotone;
      const auto res = hierarchical_estimate<double>(data, params, mode, opts);
      v.values = with_delta(res.root.theta_tilde);
      if (kind == EstimatorKind::HierarchicalKnown) v.theoretical = with_delta_variance(res.root.cov_tilde);
      for (const auto& node : res.nodes) {
        if (node.estimate && node.estimate->provenance.outcome == Outcome::SingularFallback) ++v.fallbacks;
      }
      v.correlated = res.root.provenance.correlated_donors;
      return v;
    }
    case EstimatorKind::ClosedForm:
      return closed_form(pop, *biv);
    case EstimatorKind::IncompletePairs: {
      const auto& s = *biv;
      if (s.J21 < 1 || s.J22 < 1) throw Error(ErrorKind::NoData, "needs (1,0) and (0,1) rows");
      v.values = Eigen::VectorXd::Constant(1, s.means.x211 - s.means.x222);
      v.theoretical = Eigen::VectorXd::Constant(
          1, pop.cov(0, 0) / static_cast<double>(s.J21) + pop.cov(1, 1) / static_cast<double>(s.J22));
      return v;
    }
    case EstimatorKind::ShiftAdjusted: {
      const auto& s = *biv;
      if (s.J11 < 1 || s.J21 < 1 || s.J22 < 1) {
        throw Error(ErrorKind::NoData, "needs rows in all three patterns");
      }
      const auto est = nonignorable_shift(s.means, bivariate_config(pop, s));
      v.values = Eigen::VectorXd::Constant(1, est.delta);
      v.theoretical = Eigen::VectorXd::Constant(1, est.variance);
      return v;
    }
  }
  throw Error(ErrorKind::InvalidSpec, "unknown estimator");
}

// Runs fn(chunk_index) for every chunk on a small thread pool.
template <typename Fn>
void for_each_chunk(Index chunks, unsigned threads, Fn fn) {
  unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<Index>(workers, std::max<Index>(chunks, 1)));
  std::atomic<Index> next{0};
  auto loop = [&] {
    for (Index c = next++; c < chunks; c = next++) fn(c);
  };
  if (workers <= 1) {
    loop();
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(loop);
}

double central_fourth(double m1, double m2, double m3, double m4) {
  return m4 - 4 * m1 * m3 + 6 * m1 * m1 * m2 - 3 * m1 * m1 * m1 * m1;
}

}  // namespace

const char* to_string(EstimatorKind k) { return kEstimatorNames[static_cast<int>(k)]; }

EstimatorKind estimator_from_string(const std::string& name) {
  for (int k = 0; k < 7; ++k) {
    if (name == kEstimatorNames[k]) return static_cast<EstimatorKind>(k);
  }
  throw Error(ErrorKind::InvalidSpec, "unknown estimator '" + name + "'");
}

void validate(const StudySpec& spec) {
  const int q = spec.population.dimension();
  if (q < 1 || spec.population.cov.rows() != q || spec.population.cov.cols() != q) {
    throw Error(ErrorKind::InvalidPopulation, "invalid population: mean and covariance sizes disagree");
  }
  if (!spec.population.cov.isApprox(spec.population.cov.transpose(), 1e-12)) {
    throw Error(ErrorKind::InvalidPopulation, "invalid population: covariance is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(spec.population.cov);
  if (llt.info() != Eigen::Success || !passes_pd_gate(spec.population.cov)) {
    throw Error(ErrorKind::InvalidPopulation, "invalid population: covariance is not positive definite");
  }
  if (spec.n < 2) throw Error(ErrorKind::InvalidSpec, "N must be >= 2");
  if (spec.replicates < 1) throw Error(ErrorKind::InvalidSpec, "replicate count must be >= 1");
  if (spec.estimators.empty()) throw Error(ErrorKind::InvalidSpec, "no estimators requested");
  for (auto k : spec.estimators) {
    if (is_bivariate_only(k) && q != 2) {
      throw Error(ErrorKind::InvalidSpec, std::string(to_string(k)) + " needs a bivariate population");
    }
  }
  std::visit(
      [q](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, MonotoneDropout>) {
          if (m.step_probs.empty() || (m.step_probs.size() != 1 && static_cast<int>(m.step_probs.size()) != q - 1)) {
            throw Error(ErrorKind::InvalidSpec, "monotone dropout needs 1 or Q-1 step probabilities");
          }
          for (double p : m.step_probs)
            if (!(p >= 0 && p <= 1)) throw Error(ErrorKind::InvalidSpec, "dropout probability outside [0, 1]");
        } else {
          check_weights(m.patterns, q);
          if constexpr (std::is_same_v<M, DeltaShift>) {
            if (!std::isfinite(m.delta)) throw Error(ErrorKind::InvalidSpec, "delta must be finite");
          }
        }
      },
      spec.mechanism);
}

Dataset<double> generate(const StudySpec& spec, std::uint64_t replicate) {
  const auto& pop = spec.population;
  const int q = pop.dimension();
  Eigen::LLT<Eigen::MatrixXd> llt(pop.cov);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::InvalidPopulation, "invalid population: covariance is not positive definite");
  }
  const Eigen::MatrixXd lower = llt.matrixL();

  auto rng = replicate_rng(spec.seed, replicate);
  std::normal_distribution<double> z;
  Eigen::MatrixXd draws(spec.n, q);
  for (Index r = 0; r < spec.n; ++r)
    for (int c = 0; c < q; ++c) draws(r, c) = z(rng);
  Eigen::MatrixXd x = (draws * lower.transpose()).rowwise() + pop.mean.transpose();

  auto data = Dataset<double>::from_matrix(x);
  const auto apply_pattern = [&](Index r, const MissingPattern& p, double shift) {
    const bool incomplete = !p.is_complete();
    for (int c = 0; c < q; ++c) {
      if (!p.observed(c)) {
        data.set_missing(r, c);
      } else if (incomplete) {
        data.values(r, c) += shift;
      }
    }
  };
  const auto draw_patterns = [&](const std::vector<PatternWeight>& weights, double shift) {
    std::vector<double> probs;
    for (const auto& w : weights) probs.push_back(w.probability);
    std::discrete_distribution<std::size_t> pick(probs.begin(), probs.end());
    for (Index r = 0; r < spec.n; ++r) apply_pattern(r, weights[pick(rng)].pattern, shift);
  };

  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Mcar>) {
          draw_patterns(m.patterns, 0.0);
        } else if constexpr (std::is_same_v<M, DeltaShift>) {
          draw_patterns(m.patterns, m.delta);
        } else {
          std::uniform_real_distribution<double> u(0.0, 1.0);
          for (Index r = 0; r < spec.n; ++r) {
            for (int k = 0; k + 1 < q; ++k) {
              const double p = m.step_probs.size() == 1 ? m.step_probs[0] : m.step_probs[k];
              if (!(u(rng) < p)) break;
              data.set_missing(r, q - 1 - k);
            }
          }
        }
      },
      spec.mechanism);
  return data;
}

bool StudyReport::all_passed() const {
  for (const auto& e : estimators) {
    for (const auto& t : e.targets) {
      if (!t.mean_ok) return false;
      if (t.variance_ok && !*t.variance_ok) return false;
    }
  }
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

const EstimatorSummary* StudyReport::find(EstimatorKind k) const {
  for (const auto& e : estimators)
    if (e.kind == k) return &e;
  return nullptr;
}

StudyReport run_study(const StudySpec& spec) {
  validate(spec);
  const int q = spec.population.dimension();
  const auto n_est = spec.estimators.size();
  std::vector<Eigen::VectorXd> truths;
  for (auto k : spec.estimators) truths.push_back(target_truth(k, spec.population));
  const bool need_biv = std::any_of(spec.estimators.begin(), spec.estimators.end(), is_bivariate_only);

  const Index chunks = (spec.replicates + kChunkSize - 1) / kChunkSize;
  std::vector<ChunkResult> results(static_cast<std::size_t>(chunks));
  for_each_chunk(chunks, spec.threads, [&](Index c) {
    ChunkResult out;
    for (std::size_t e = 0; e < n_est; ++e) out.acc.emplace_back(truths[e].size());
    const Index end = std::min(spec.replicates, (c + 1) * kChunkSize);
    for (Index r = c * kChunkSize; r < end; ++r) {
      const auto data = generate(spec, static_cast<std::uint64_t>(r));
      const auto part = partition(data);
      for (const auto& [p, rows] : part.groups) out.pattern_counts[p] += static_cast<Index>(rows.size());
      out.dropped += part.dropped;
      std::optional<BivariateSummary<double>> biv;
      if (need_biv) biv = summarize_bivariate(data);
      for (std::size_t e = 0; e < n_est; ++e) {
        try {
          out.acc[e].add(evaluate(spec.estimators[e], spec, data, biv), truths[e]);
        } catch (const Error& err) {
          ++out.acc[e].failures;
          if (out.failures.size() < kFailureLogLimit) {
            out.failures.push_back({static_cast<std::uint64_t>(r), spec.estimators[e], err.what()});
          }
        }
      }
    }
    results[static_cast<std::size_t>(c)] = std::move(out);
  });

  std::vector<Accumulator> total;
  for (std::size_t e = 0; e < n_est; ++e) total.emplace_back(truths[e].size());
  std::map<MissingPattern, Index> pattern_counts;
  Index dropped = 0;
  StudyReport report;
  for (const auto& chunk : results) {
    for (std::size_t e = 0; e < n_est; ++e) total[e].merge(chunk.acc[e]);
    for (const auto& [p, n] : chunk.pattern_counts) pattern_counts[p] += n;
    dropped += chunk.dropped;
    for (const auto& f : chunk.failures)
      if (report.failure_log.size() < kFailureLogLimit) report.failure_log.push_back(f);
  }

  report.n = spec.n;
  report.replicates = spec.replicates;
  report.seed = spec.seed;
  const double reps = static_cast<double>(spec.replicates);
  for (const auto& [p, n] : pattern_counts) report.mean_pattern_counts.emplace_back(p, n / reps);
  report.mean_dropped = dropped / reps;

  for (std::size_t e = 0; e < n_est; ++e) {
    const auto& a = total[e];
    EstimatorSummary s;
    s.kind = spec.estimators[e];
    s.used = a.count;
    s.failures = a.failures;
    s.fallbacks = a.fallbacks;
    s.correlated_donor_replicates = a.correlated;
    const auto names = target_names(s.kind, q);
    const Index t = truths[e].size();
    s.covariance = Eigen::MatrixXd::Zero(t, t);
    if (a.count >= 2) {
      const double n = static_cast<double>(a.count);
      const Eigen::VectorXd m1 = a.s1 / n;
      s.covariance = (a.s2 - n * m1 * m1.transpose()) / (n - 1);
    }
    for (Index i = 0; i < t; ++i) {
      TargetSummary ts;
      ts.name = names[static_cast<std::size_t>(i)];
      ts.truth = truths[e](i);
      if (a.count == 0) {
        ts.mean_ok = false;
        s.targets.push_back(ts);
        continue;
      }
      const double n = static_cast<double>(a.count);
      const double m1 = a.s1(i) / n, m2 = a.s2(i, i) / n, m3 = a.s3(i) / n, m4 = a.s4(i) / n;
      ts.bias = m1;
      ts.mean = ts.truth + m1;
      ts.variance = s.covariance(i, i);
      ts.mean_se = std::sqrt(std::max(ts.variance, 0.0) / n);
      const double mu4 = central_fourth(m1, m2, m3, m4);
      const double pop_var = m2 - m1 * m1;
      ts.variance_se = std::sqrt(std::max(mu4 - pop_var * pop_var, 0.0) / n);
      ts.mean_ok = std::abs(ts.bias) <= spec.tolerances.mean_se * ts.mean_se;
      // A non-ignorable mechanism only promises unbiasedness for the
      // shift-invariant estimators.
      if (!is_ignorable(spec.mechanism) &&
          !(s.kind == EstimatorKind::ShiftAdjusted || s.kind == EstimatorKind::IncompletePairs ||
            (s.kind == EstimatorKind::CompleteCase && ts.name == "delta"))) {
        ts.mean_ok = true;
      }
      if (a.theo_count == a.count) {
        ts.theoretical_variance = a.theo(i) / n;
        if (a.correlated == 0) {
          ts.variance_ok = std::abs(ts.variance / *ts.theoretical_variance - 1.0) <= spec.tolerances.variance_rel;
        }
      }
      s.targets.push_back(ts);
    }
    report.estimators.push_back(std::move(s));
  }

  // Corrected estimators must not be noisier than complete-case analysis.
  if (is_ignorable(spec.mechanism)) {
    if (const auto* cc = report.find(EstimatorKind::CompleteCase)) {
      for (auto k : {EstimatorKind::HierarchicalKnown, EstimatorKind::HierarchicalPlugIn}) {
        const auto* h = report.find(k);
        if (!h) continue;
        StudyCheck check{std::string("variance_ordering:") + to_string(k), true, {}};
        for (std::size_t i = 0; i < h->targets.size() && i < cc->targets.size(); ++i) {
          const auto& a = h->targets[i];
          const auto& b = cc->targets[i];
          const double slack = 3.0 * std::hypot(a.variance_se, b.variance_se);
          if (a.variance > b.variance + slack) {
            check.passed = false;
            check.detail += a.name + " ";
          }
        }
        report.checks.push_back(std::move(check));
      }
    }
  }
  return report;
}

std::optional<double> gain_difference(const UpdatedEstimate<double>& a, const UpdatedEstimate<double>& b) {
  if (a.gain.size() == 0 || b.gain.size() == 0 || a.gain_columns != b.gain_columns) return std::nullopt;
  if (a.gain.rows() != b.gain.rows() || a.gain.cols() != b.gain.cols()) return std::nullopt;
  return (a.gain - b.gain).norm();
}

std::vector<ConvergenceRow> convergence_probe(const StudySpec& base, const std::vector<Index>& ladder) {
  if (ladder.size() < 3) throw Error(ErrorKind::LadderTooShort, "ladder too short");
  const int q = base.population.dimension();
  const auto params = component_means<double>(q);
  HierarchyOptions opts;
  opts.monotone = base.monotone;

  std::vector<ConvergenceRow> rows;
  for (Index n : ladder) {
    StudySpec spec = base;
    spec.n = n;
    spec.estimators = {EstimatorKind::HierarchicalKnown};
    validate(spec);

    const Index chunks = (spec.replicates + kChunkSize - 1) / kChunkSize;
    std::vector<ProbeChunk> results(static_cast<std::size_t>(chunks), ProbeChunk(q));
    const Eigen::VectorXd truth = spec.population.mean;
    for_each_chunk(chunks, spec.threads, [&](Index c) {
      ProbeChunk out(q);
      const Index end = std::min(spec.replicates, (c + 1) * kChunkSize);
      for (Index r = c * kChunkSize; r < end; ++r) {
        const auto data = generate(spec, static_cast<std::uint64_t>(r));
        std::optional<HierarchicalResult<double>> known, plugin;
        try {
          known = hierarchical_estimate<double>(data, params, KnownMoments<double>{spec.population.cov}, opts);
          plugin = hierarchical_estimate<double>(data, params, PlugIn{}, opts);
        } catch (const Error&) {
          continue;
        }
        out.known.add({known->root.theta_tilde, std::nullopt, 0, false}, truth);
        out.plugin.add({plugin->root.theta_tilde, std::nullopt, 0, false}, truth);
        if (const auto err = gain_difference(plugin->root, known->root)) {
          out.gain_error += *err;
          ++out.compared;
        }
      }
      results[static_cast<std::size_t>(c)] = std::move(out);
    });

    ProbeChunk total(q);
    for (const auto& c : results) {
      total.known.merge(c.known);
      total.plugin.merge(c.plugin);
      total.gain_error += c.gain_error;
      total.compared += c.compared;
    }
    const auto trace_cov = [](const Accumulator& a) {
      const double m = static_cast<double>(a.count);
      const Eigen::VectorXd mean = a.s1 / m;
      return ((a.s2 - m * mean * mean.transpose()) / (m - 1)).trace();
    };
    ConvergenceRow row;
    row.n = n;
    row.gain_compared = total.compared;
    row.gain_error = total.compared ? total.gain_error / static_cast<double>(total.compared) : 0.0;
    if (total.known.count >= 2) {
      row.known_trace = trace_cov(total.known);
      row.plugin_trace = trace_cov(total.plugin);
      row.variance_ratio = row.plugin_trace / row.known_trace;
    }
    rows.push_back(row);
  }
  return rows;
}

StudyCheck convergence_check(const std::vector<ConvergenceRow>& rows) {
  StudyCheck check{"convergence", true, {}};
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].gain_error < rows[i - 1].gain_error)) {
      check.passed = false;
      check.detail += "gain error not decreasing at N=" + std::to_string(rows[i].n) + " ";
    }
    if (std::abs(rows[i].variance_ratio - 1.0) > std::abs(rows[i - 1].variance_ratio - 1.0)) {
      check.passed = false;
      check.detail += "variance ratio moved away from 1 at N=" + std::to_string(rows[i].n) + " ";
    }
  }
  return check;
}

}  // namespace hmest::sim
