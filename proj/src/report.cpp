#include "hmest/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hmest/error.hpp"

namespace hmest::report {

namespace {

const char* to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::Estimated: return "estimated";
    case NodeStatus::NoEstimableParameters: return "no estimable parameters";
    case NodeStatus::CovarianceInestimable: return "covariance inestimable";
  }
  return "unknown";
}

Json vector_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Json patterns_json(const std::vector<MissingPattern>& ps) {
  Json out = Json::array();
  for (const auto& p : ps) out.push_back(p.to_string());
  return out;
}

std::string bits(const MissingPattern& p) {
  std::string s;
  for (int q = 0; q < p.dimension(); ++q) s += p.observed(q) ? '1' : '0';
  return s;
}

std::string csv_line(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    const auto& c = cells[i];
    if (c.find_first_of(",\"\n") != std::string::npos) {
      out += '"';
      for (char ch : c) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      out += '"';
    } else {
      out += c;
    }
  }
  return out + "\n";
}

std::string fixed(double v, int width = 12) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%*.6g", width, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

Json node_json(const NodeReport<double>& node, const EstimateInfo& info) {
  Json n;
  n["pattern"] = node.pattern.to_string();
  n["J"] = node.J;
  n["status"] = to_string(node.status);
  n["reaches_root"] = node.reaches_root;
  if (node.estimate) {
    const auto& e = *node.estimate;
    Json labels = Json::array();
    for (int id : e.param_ids) labels.push_back(info.labels[static_cast<std::size_t>(id)]);
    n["parameters"] = labels;
    n["theta"] = vector_json(e.theta_tilde);
    n["covariance"] = matrix_json(e.cov_tilde);
    n["outcome"] = to_string(e.provenance.outcome);
    n["contributors"] = patterns_json(e.provenance.contributors);
    n["absorbed"] = patterns_json(e.provenance.absorbed);
    n["correlated_donors"] = e.provenance.correlated_donors;
    if (e.provenance.outcome == Outcome::Corrected) n["k_star_condition"] = e.provenance.k_star_condition;
  }
  return n;
}

}  // namespace

Format format_from_string(const std::string& s) {
  if (s == "json") return Format::Json;
  if (s == "csv") return Format::Csv;
  if (s == "table") return Format::Table;
  throw Error(ErrorKind::InvalidSpec, "unknown format '" + s + "'");
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

Json estimate_json(const HierarchicalResult<double>& res, const EstimateInfo& info) {
  Json j;
  j["mode"] = info.mode;
  j["parameters"] = info.labels;
  j["theta"] = vector_json(res.root.theta_tilde);
  j["covariance"] = matrix_json(res.root.cov_tilde);
  j["complete_case"] = {{"theta", vector_json(res.root_raw.theta_hat)},
                        {"covariance", matrix_json(res.root_raw.cov_hat)}};
  j["outcome"] = to_string(res.root.provenance.outcome);
  j["correlated_donors"] = res.root.provenance.correlated_donors;
  Json counts = Json::array();
  for (const auto& [p, rows] : res.partition.groups) {
    counts.push_back({{"pattern", p.to_string()}, {"J", rows.size()}});
  }
  j["pattern_counts"] = counts;
  j["dropped"] = res.partition.dropped;
  Json nodes = Json::array();
  for (const auto& n : res.nodes) nodes.push_back(node_json(n, info));
  j["nodes"] = nodes;
  return j;
}

std::string render_estimate(const HierarchicalResult<double>& res, const EstimateInfo& info, Format f) {
  const auto& th = res.root.theta_tilde;
  const auto& cov = res.root.cov_tilde;
  if (f == Format::Json) return dump(estimate_json(res, info));
  if (f == Format::Csv) {
    std::vector<std::string> head, row;
    for (Index i = 0; i < th.size(); ++i) {
      head.push_back("theta[" + std::to_string(i) + "]");
      row.push_back(format_number(th(i)));
    }
    for (Index r = 0; r < cov.rows(); ++r)
      for (Index c = 0; c < cov.cols(); ++c) {
        head.push_back("cov[" + std::to_string(r) + "][" + std::to_string(c) + "]");
        row.push_back(format_number(cov(r, c)));
      }
    for (const auto& [p, rows] : res.partition.groups) {
      head.push_back("J[" + bits(p) + "]");
      row.push_back(std::to_string(rows.size()));
    }
    head.push_back("dropped");
    row.push_back(std::to_string(res.partition.dropped));
    return csv_line(head) + csv_line(row);
  }
  std::ostringstream out;
  out << "Pattern counts\n";
  for (const auto& [p, rows] : res.partition.groups) out << "  " << pad(p.to_string(), 16) << rows.size() << "\n";
  out << "  " << pad("dropped", 16) << res.partition.dropped << "\n\n";
  out << "Estimates (" << info.mode << ", root " << to_string(res.root.provenance.outcome) << ")\n";
  out << "  " << pad("parameter", 24) << pad("theta", 14) << "se\n";
  for (Index i = 0; i < th.size(); ++i) {
    out << "  " << pad(info.labels[static_cast<std::size_t>(i)], 24) << pad(fixed(th(i), 0), 14)
        << fixed(std::sqrt(std::max(cov(i, i), 0.0)), 0) << "\n";
  }
  out << "\nNodes\n";
  for (const auto& n : res.nodes) {
    out << "  " << pad(n.pattern.to_string(), 16) << "J=" << pad(std::to_string(n.J), 8);
    if (n.estimate) {
      out << to_string(n.estimate->provenance.outcome);
    } else {
      out << to_string(n.status);
    }
    out << (n.reaches_root ? "" : " (unused)") << "\n";
  }
  if (res.root.provenance.correlated_donors) {
    out << "\nnote: children share deeper donors; reported covariance treats them as independent\n";
  }
  return out.str();
}

Json km_json(const StepCdf<double>& cdf, const std::optional<StepCdf<double>>& oracle) {
  Json j;
  Json steps = Json::array();
  for (std::size_t s = 0; s < cdf.size(); ++s) {
    steps.push_back({{"knot", cdf.knots[s]}, {"cdf", cdf.cdf[s]}, {"survival", cdf.survival(s)}});
  }
  j["steps"] = steps;
  if (oracle) {
    j["oracle"] = {{"method", "product_limit"}, {"max_deviation", max_deviation(cdf, *oracle)}};
  }
  return j;
}

std::string render_km(const StepCdf<double>& cdf, const std::optional<StepCdf<double>>& oracle, Format f) {
  if (f == Format::Json) return dump(km_json(cdf, oracle));
  if (f == Format::Csv) {
    std::vector<std::string> head{"knot", "cdf", "survival"};
    if (oracle) head.push_back("product_limit_cdf");
    std::string out = csv_line(head);
    for (std::size_t s = 0; s < cdf.size(); ++s) {
      std::vector<std::string> row{format_number(cdf.knots[s]), format_number(cdf.cdf[s]),
                                   format_number(cdf.survival(s))};
      if (oracle) row.push_back(format_number(oracle->cdf[s]));
      out += csv_line(row);
    }
    return out;
  }
  std::ostringstream out;
  out << pad("knot", 14) << pad("cdf", 14) << "survival\n";
  for (std::size_t s = 0; s < cdf.size(); ++s) {
    out << pad(fixed(cdf.knots[s], 0), 14) << pad(fixed(cdf.cdf[s], 0), 14) << fixed(cdf.survival(s), 0) << "\n";
  }
  if (oracle) out << "\nmax deviation from product-limit: " << format_number(max_deviation(cdf, *oracle)) << "\n";
  return out.str();
}

Json bivariate_json(const BivariateResult& r) {
  Json j;
  j["variant"] = r.variant;
  j["means"] = {{"x111", r.means.x111}, {"x112", r.means.x112}, {"x211", r.means.x211}, {"x222", r.means.x222}};
  j["sizes"] = {{"J11", r.config.J11}, {"J21", r.config.J21}, {"J22", r.config.J22}};
  j["sigma"] = matrix_json(r.config.sigma());
  if (r.mean_vector) {
    j["mu"] = vector_json(r.mean_vector->mu);
    j["covariance"] = matrix_json(r.mean_vector->cov);
  }
  if (r.delta) {
    j["delta"] = r.delta->delta;
    j["variance"] = r.delta->variance;
    j["gain"] = r.delta->gain;
  }
  return j;
}

std::string render_bivariate(const BivariateResult& r, Format f) {
  if (f == Format::Json) return dump(bivariate_json(r));
  std::vector<std::pair<std::string, double>> cells;
  if (r.mean_vector) {
    for (Index i = 0; i < 2; ++i) cells.emplace_back("mu[" + std::to_string(i) + "]", r.mean_vector->mu(i));
    for (Index a = 0; a < 2; ++a)
      for (Index b = 0; b < 2; ++b)
        cells.emplace_back("cov[" + std::to_string(a) + "][" + std::to_string(b) + "]", r.mean_vector->cov(a, b));
  }
  if (r.delta) {
    cells.emplace_back("delta", r.delta->delta);
    cells.emplace_back("variance", r.delta->variance);
    cells.emplace_back("gain", r.delta->gain);
  }
  if (f == Format::Csv) {
    std::vector<std::string> head, row;
    for (const auto& [k, v] : cells) {
      head.push_back(k);
      row.push_back(format_number(v));
    }
    return csv_line(head) + csv_line(row);
  }
  std::ostringstream out;
  out << "Pattern counts\n";
  out << "  " << pad("(1,1)", 16) << format_number(r.config.J11) << "\n";
  out << "  " << pad("(1,0)", 16) << format_number(r.config.J21) << "\n";
  out << "  " << pad("(0,1)", 16) << format_number(r.config.J22) << "\n\n";
  out << r.variant << "\n";
  for (const auto& [k, v] : cells) out << "  " << pad(k, 16) << fixed(v, 0) << "\n";
  return out.str();
}

Json study_json(const sim::StudyReport& r, const std::vector<sim::ConvergenceRow>& ladder) {
  Json j;
  j["n"] = r.n;
  j["replicates"] = r.replicates;
  j["seed"] = r.seed;
  Json counts = Json::array();
  for (const auto& [p, m] : r.mean_pattern_counts) counts.push_back({{"pattern", p.to_string()}, {"mean_J", m}});
  j["pattern_counts"] = counts;
  j["mean_dropped"] = r.mean_dropped;
  Json ests = Json::array();
  for (const auto& e : r.estimators) {
    Json ej;
    ej["estimator"] = sim::to_string(e.kind);
    ej["used"] = e.used;
    ej["failures"] = e.failures;
    ej["fallbacks"] = e.fallbacks;
    ej["correlated_donor_replicates"] = e.correlated_donor_replicates;
    ej["covariance"] = matrix_json(e.covariance);
    Json ts = Json::array();
    for (const auto& t : e.targets) {
      Json tj{{"target", t.name},           {"truth", t.truth},     {"mean", t.mean},
              {"bias", t.bias},             {"variance", t.variance}, {"mean_se", t.mean_se},
              {"variance_se", t.variance_se}, {"mean_ok", t.mean_ok}};
      tj["theoretical_variance"] = t.theoretical_variance ? Json(*t.theoretical_variance) : Json();
      tj["variance_ok"] = t.variance_ok ? Json(*t.variance_ok) : Json();
      ts.push_back(std::move(tj));
    }
    ej["targets"] = ts;
    ests.push_back(std::move(ej));
  }
  j["estimators"] = ests;
  Json checks = Json::array();
  for (const auto& c : r.checks) checks.push_back({{"check", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  j["checks"] = checks;
  Json fails = Json::array();
  for (const auto& f : r.failure_log) {
    fails.push_back({{"replicate", f.replicate}, {"estimator", sim::to_string(f.estimator)}, {"message", f.message}});
  }
  j["failure_log"] = fails;
  Json conv = Json::array();
  for (const auto& c : ladder) {
    conv.push_back({{"n", c.n},
                    {"gain_error", c.gain_error},
                    {"gain_compared", c.gain_compared},
                    {"variance_ratio", c.variance_ratio},
                    {"known_trace", c.known_trace},
                    {"plugin_trace", c.plugin_trace}});
  }
  j["convergence"] = conv;
  j["passed"] = r.all_passed();
  return j;
}

std::string render_study(const sim::StudyReport& r, const std::vector<sim::ConvergenceRow>& ladder, Format f) {
  if (f == Format::Json) return dump(study_json(r, ladder));
  if (f == Format::Csv) {
    std::string out = csv_line({"estimator", "target", "truth", "mean", "bias", "variance", "mean_se", "variance_se",
                                "theoretical_variance", "mean_ok", "variance_ok"});
    for (const auto& e : r.estimators) {
      for (const auto& t : e.targets) {
        out += csv_line({sim::to_string(e.kind), t.name, format_number(t.truth), format_number(t.mean),
                         format_number(t.bias), format_number(t.variance), format_number(t.mean_se),
                         format_number(t.variance_se),
                         t.theoretical_variance ? format_number(*t.theoretical_variance) : "",
                         t.mean_ok ? "1" : "0", t.variance_ok ? (*t.variance_ok ? "1" : "0") : ""});
      }
    }
    return out;
  }
  std::ostringstream out;
  out << "Study: N=" << r.n << " R=" << r.replicates << " seed=" << r.seed << "\n\n";
  out << "Pattern counts (mean per replicate)\n";
  for (const auto& [p, m] : r.mean_pattern_counts) out << "  " << pad(p.to_string(), 16) << fixed(m, 0) << "\n";
  out << "  " << pad("dropped", 16) << fixed(r.mean_dropped, 0) << "\n\n";
  out << pad("estimator", 22) << pad("target", 8) << pad("bias", 13) << pad("bias/se", 10) << pad("variance", 13)
      << pad("theory", 13) << "verdict\n";
  for (const auto& e : r.estimators) {
    for (const auto& t : e.targets) {
      const double z = t.mean_se > 0 ? t.bias / t.mean_se : 0.0;
      std::string verdict = t.mean_ok ? "mean ok" : "MEAN FAIL";
      if (t.variance_ok) verdict += *t.variance_ok ? ", var ok" : ", VAR FAIL";
      out << pad(sim::to_string(e.kind), 22) << pad(t.name, 8) << pad(fixed(t.bias, 0), 13) << pad(fixed(z, 0), 10)
          << pad(fixed(t.variance, 0), 13)
          << pad(t.theoretical_variance ? fixed(*t.theoretical_variance, 0) : std::string("-"), 13) << verdict << "\n";
    }
    if (e.failures || e.fallbacks || e.correlated_donor_replicates) {
      out << "  (" << e.failures << " failed replicates, " << e.fallbacks << " fallbacks, "
          << e.correlated_donor_replicates << " with correlated donors)\n";
    }
  }
  if (!r.checks.empty()) {
    out << "\nChecks\n";
    for (const auto& c : r.checks) {
      out << "  " << pad(c.name, 40) << (c.passed ? "pass" : "FAIL") << (c.detail.empty() ? "" : " " + c.detail) << "\n";
    }
  }
  if (!ladder.empty()) {
    out << "\nConvergence\n  " << pad("N", 8) << pad("gain error", 14) << "variance ratio\n";
    for (const auto& c : ladder) {
      out << "  " << pad(std::to_string(c.n), 8) << pad(fixed(c.gain_error, 0), 14) << fixed(c.variance_ratio, 0) << "\n";
    }
  }
  return out.str();
}

}  // namespace hmest::report
