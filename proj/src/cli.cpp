#include "hmest/cli.hpp"

#include <fstream>
#include <ostream>

#include <CLI11.hpp>

#include "hmest/config.hpp"
#include "hmest/csv.hpp"
#include "hmest/error.hpp"
#include "hmest/report.hpp"

namespace hmest::cli {

namespace {

struct Options {
  std::string input;
  std::string config;
  std::string missing_token;
  std::string mode;
  bool monotone = false;
  std::string format = "json";
  std::string output;
  std::optional<std::uint64_t> seed;
  bool oracle = false;
  std::string variant = "mean-vector";
};

struct OutputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::NoData:
    case ErrorKind::MalformedRow:
    case ErrorKind::BadCell:
    case ErrorKind::BadParameter:
    case ErrorKind::InvalidSpec:
    case ErrorKind::InvalidPopulation:
    case ErrorKind::InvalidCorrelation:
    case ErrorKind::LadderTooShort:
    case ErrorKind::Io:
      return kBadInput;
    case ErrorKind::NoCompleteCases:
    case ErrorKind::NoEstimableCdf:
      return kNoEstimate;
    default:
      return kFailure;
  }
}

void emit(const Options& o, const std::string& text, std::ostream& out) {
  if (o.output.empty()) {
    out << text;
    return;
  }
  std::ofstream f(o.output, std::ios::binary | std::ios::trunc);
  if (f) f << text;
  if (!f) throw OutputError("cannot write '" + o.output + "'");
}

config::Json load_config(const Options& o) {
  return o.config.empty() ? config::Json::object() : config::parse_json(csv::read_file(o.config));
}

int estimate(const Options& o, std::ostream& out) {
  const auto cfg = config::parse_estimate(load_config(o));
  const std::string token = !o.missing_token.empty() ? o.missing_token : cfg.missing_token.value_or("NA");
  const auto data = csv::read_dataset(csv::read_file(o.input), token);
  const auto params = config::estimate_parameters(cfg, data.names);
  const std::string mode = !o.mode.empty() ? o.mode : cfg.mode.value_or("plugin");

  CovarianceMode<double> cm = PlugIn{};
  if (mode == "known") {
    if (!cfg.known_covariance) {
      throw Error(ErrorKind::InvalidSpec, "invalid config: known mode needs 'known_covariance'");
    }
    cm = KnownMoments<double>{*cfg.known_covariance};
  }
  HierarchyOptions opts;
  opts.monotone = o.monotone || cfg.monotone;
  const auto res = hierarchical_estimate<double>(data, params, cm, opts);

  report::EstimateInfo info{{}, mode};
  for (const auto& p : params) info.labels.push_back(p.label());
  emit(o, report::render_estimate(res, info, report::format_from_string(o.format)), out);
  return kOk;
}

int km(const Options& o, std::ostream& out) {
  const auto sample = csv::read_censored(csv::read_file(o.input));
  const auto cdf = recursive_cdf(sample);
  std::optional<StepCdf<double>> oracle;
  if (o.oracle) oracle = product_limit(sample);
  emit(o, report::render_km(cdf, oracle, report::format_from_string(o.format)), out);
  return kOk;
}

int bivariate(const Options& o, std::ostream& out) {
  const auto in = config::parse_bivariate(load_config(o));
  report::BivariateResult r;
  r.variant = o.variant;

  std::optional<Eigen::Matrix2d> sigma = in.sigma;
  if (!sigma && in.sd && in.rho) {
    const double s2 = *in.sd * *in.sd;
    Eigen::Matrix2d cs;
    cs << s2, *in.rho * s2, *in.rho * s2, s2;
    sigma = cs;
  }
  if (!o.input.empty()) {
    const std::string token = !o.missing_token.empty() ? o.missing_token : in.missing_token.value_or("NA");
    const auto s = summarize_bivariate(csv::read_dataset(csv::read_file(o.input), token));
    if (s.J11 == 0) throw Error(ErrorKind::NoCompleteCases, "no complete cases");
    r.means = s.means;
    r.config.J11 = static_cast<double>(s.J11);
    r.config.J21 = static_cast<double>(s.J21);
    r.config.J22 = static_cast<double>(s.J22);
    if (!sigma) {
      if (s.J11 < 2) throw Error(ErrorKind::CovarianceInestimable, "covariance inestimable: fewer than 2 complete rows");
      sigma = s.complete_cov;
    }
  } else {
    if (!in.means || !in.sizes) {
      throw Error(ErrorKind::InvalidSpec, "invalid config: give --input or 'means' and 'sizes'");
    }
    r.means = *in.means;
    r.config.J11 = (*in.sizes)[0];
    r.config.J21 = (*in.sizes)[1];
    r.config.J22 = (*in.sizes)[2];
  }
  if (!sigma) throw Error(ErrorKind::InvalidSpec, "invalid config: missing 'sigma' (or 'sd' and 'rho')");
  const Eigen::Matrix2d sig = *sigma;
  r.config.sigma11 = sig(0, 0);
  r.config.sigma22 = sig(1, 1);
  r.config.sigma12 = sig(0, 1);

  if (o.variant == "mean-vector") {
    r.mean_vector = mean_vector(r.means, r.config);
  } else if (o.variant == "change-score") {
    r.delta = change_score(r.means, r.config);
  } else if (o.variant == "compound-symmetry") {
    if (!in.sd || !in.rho) throw Error(ErrorKind::InvalidSpec, "invalid config: compound-symmetry needs 'sd' and 'rho'");
    r.delta = change_score_cs(r.means, *in.sd, *in.rho, r.config.J11, r.config.J21);
  } else {
    r.delta = nonignorable_shift(r.means, r.config);
  }
  emit(o, report::render_bivariate(r, report::format_from_string(o.format)), out);
  return kOk;
}

int study(const Options& o, bool validating, std::ostream& out) {
  auto cfg = config::parse_study(load_config(o));
  cfg.spec.seed = *o.seed;
  if (o.monotone) cfg.spec.monotone = true;
  const auto format = report::format_from_string(o.format);

  auto rep = sim::run_study(cfg.spec);
  std::vector<sim::ConvergenceRow> ladder;
  if (!cfg.ladder.empty()) {
    ladder = sim::convergence_probe(cfg.spec, cfg.ladder);
    rep.checks.push_back(sim::convergence_check(ladder));
  }
  emit(o, report::render_study(rep, ladder, format), out);
  if (!o.output.empty() && format != report::Format::Table) out << report::render_study(rep, ladder, report::Format::Table);
  if (validating && !rep.all_passed()) return kValidationFailed;
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical estimation of location parameters under missing data", "hmest"};
  app.require_subcommand(1);
  Options o;

  const auto add_format = [&o](CLI::App* sub) {
    sub->add_option("--format", o.format, "json, csv or table")
        ->check(CLI::IsMember({"json", "csv", "table"}))
        ->capture_default_str();
    sub->add_option("--output", o.output, "write the report here instead of stdout");
  };
  const std::vector<std::string> modes{"known", "plugin"};

  auto* est = app.add_subcommand("estimate", "hierarchical estimate from a CSV file");
  est->add_option("--input", o.input, "CSV with a header row")->required()->check(CLI::ExistingFile);
  est->add_option("--config", o.config, "JSON parameter config")->check(CLI::ExistingFile);
  est->add_option("--missing-token", o.missing_token, "missing cell marker (default NA)");
  est->add_option("--mode", o.mode, "covariance mode")->check(CLI::IsMember(modes));
  est->add_flag("--monotone", o.monotone, "use only the monotone chain of children");
  add_format(est);

  auto* kmc = app.add_subcommand("km", "recursive CDF estimate from censored data");
  kmc->add_option("--input", o.input, "CSV: time,event")->required()->check(CLI::ExistingFile);
  kmc->add_flag("--oracle", o.oracle, "also run product-limit and report the max deviation");
  add_format(kmc);

  auto* biv = app.add_subcommand("bivariate", "closed-form bivariate estimators");
  biv->add_option("--input", o.input, "two-column CSV")->check(CLI::ExistingFile);
  biv->add_option("--config", o.config, "JSON with means, sizes, sigma / sd, rho")->check(CLI::ExistingFile);
  biv->add_option("--missing-token", o.missing_token, "missing cell marker (default NA)");
  biv->add_option("--variant", o.variant, "estimator")
      ->check(CLI::IsMember({"mean-vector", "change-score", "compound-symmetry", "shift"}))
      ->capture_default_str();
  add_format(biv);

  CLI::App* sims[2];
  const char* names[2] = {"simulate", "validate"};
  const char* help[2] = {"run a Monte Carlo study", "run a study and fail on any verdict"};
  for (int i = 0; i < 2; ++i) {
    sims[i] = app.add_subcommand(names[i], help[i]);
    sims[i]->add_option("--config", o.config, "JSON study spec")->required()->check(CLI::ExistingFile);
    sims[i]->add_option("--seed", o.seed, "master seed")->required();
    sims[i]->add_flag("--monotone", o.monotone, "use only the monotone chain of children");
    add_format(sims[i]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (est->parsed()) return estimate(o, out);
    if (kmc->parsed()) return km(o, out);
    if (biv->parsed()) return bivariate(o, out);
    return study(o, sims[1]->parsed(), out);
  } catch (const OutputError& e) {
    err << "error: " << e.what() << "\n";
    return kUnwritableOutput;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace hmest::cli
