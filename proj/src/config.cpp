#include "hmest/config.hpp"

#include <algorithm>
#include <cmath>

#include "hmest/error.hpp"

namespace hmest::config {

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorKind::InvalidSpec, "invalid config: " + msg); }

template <typename T>
T get(const Json& j, const char* key) {
  if (!j.contains(key)) bad(std::string("missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    bad(std::string("'") + key + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> get_opt(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return get<T>(j, key);
}

int resolve_column(const Json& ref, const std::vector<std::string>& columns) {
  if (ref.is_number_integer()) {
    const auto i = ref.get<long long>();
    if (i < 1 || i > static_cast<long long>(columns.size())) {
      throw Error(ErrorKind::BadParameter, "bad parameter definition: column " + std::to_string(i) +
                                               " outside 1.." + std::to_string(columns.size()));
    }
    return static_cast<int>(i - 1);
  }
  if (ref.is_string()) {
    const auto name = ref.get<std::string>();
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) {
      throw Error(ErrorKind::BadParameter, "bad parameter definition: no column named '" + name + "'");
    }
    return static_cast<int>(it - columns.begin());
  }
  throw Error(ErrorKind::BadParameter, "bad parameter definition: column must be a name or 1-based index");
}

std::vector<int> resolve_columns(const Json& p, const std::vector<std::string>& columns) {
  std::vector<int> out;
  if (p.contains("column")) out.push_back(resolve_column(p.at("column"), columns));
  if (p.contains("columns")) {
    if (!p.at("columns").is_array()) bad("'columns' must be an array");
    for (const auto& c : p.at("columns")) out.push_back(resolve_column(c, columns));
  }
  return out;
}

ParameterDef<double> custom(const std::string& tag, const std::vector<int>& cols, std::string label) {
  using Row = ParameterDef<double>::Row;
  if (cols.size() != 1) {
    throw Error(ErrorKind::BadParameter, "bad parameter definition: '" + tag + "' takes one column");
  }
  const int q = cols[0];
  CustomMoment<double> m{tag, cols, {}};
  if (tag == "square") {
    m.fn = [q](const Row& x) { return x(q) * x(q); };
  } else if (tag == "log") {
    m.fn = [q](const Row& x) { return std::log(x(q)); };
  } else if (tag == "abs") {
    m.fn = [q](const Row& x) { return std::abs(x(q)); };
  } else {
    throw Error(ErrorKind::BadParameter, "bad parameter definition: unknown custom tag '" + tag + "'");
  }
  return ParameterDef<double>(std::move(m), label.empty() ? tag + "(" + std::to_string(q) + ")" : label);
}

std::vector<sim::PatternWeight> pattern_weights(const Json& j) {
  if (!j.contains("patterns") || !j.at("patterns").is_array()) bad("mechanism needs a 'patterns' array");
  std::vector<sim::PatternWeight> out;
  for (const auto& w : j.at("patterns")) {
    const auto flags = get<std::vector<int>>(w, "pattern");
    for (int f : flags)
      if (f != 0 && f != 1) bad("pattern flags must be 0 or 1");
    out.push_back({MissingPattern::from_flags(flags), get<double>(w, "probability")});
  }
  return out;
}

}  // namespace

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    bad(e.what());
  }
}

Eigen::MatrixXd matrix_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.empty()) bad(std::string("'") + what + "' must be a non-empty array of rows");
  const auto rows = static_cast<Index>(j.size());
  const auto cols = j.at(0).is_array() ? static_cast<Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) bad(std::string("'") + what + "' is ragged");
    for (Index c = 0; c < cols; ++c) {
      const auto& v = row.at(static_cast<std::size_t>(c));
      if (!v.is_number()) bad(std::string("'") + what + "' holds a non-number");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

EstimateConfig parse_estimate(const Json& j) {
  if (!j.is_object()) bad("top level must be an object");
  EstimateConfig cfg;
  cfg.parameters = j.value("parameters", Json::array());
  if (!cfg.parameters.is_array()) bad("'parameters' must be an array");
  cfg.mode = get_opt<std::string>(j, "mode");
  if (cfg.mode && *cfg.mode != "known" && *cfg.mode != "plugin") bad("mode must be 'known' or 'plugin'");
  if (j.contains("known_covariance")) cfg.known_covariance = matrix_from_json(j.at("known_covariance"), "known_covariance");
  cfg.monotone = get_opt<bool>(j, "monotone").value_or(false);
  cfg.missing_token = get_opt<std::string>(j, "missing_token");
  return cfg;
}

std::vector<ParameterDef<double>> estimate_parameters(const EstimateConfig& cfg,
                                                      const std::vector<std::string>& columns) {
  const int q = static_cast<int>(columns.size());
  if (cfg.parameters.empty()) {
    std::vector<ParameterDef<double>> out;
    for (int c = 0; c < q; ++c) out.emplace_back(ComponentMean{c}, "mean(" + columns[c] + ")");
    return out;
  }
  std::vector<ParameterDef<double>> out;
  for (const auto& p : cfg.parameters) {
    if (!p.is_object()) bad("each parameter must be an object");
    const auto kind = get<std::string>(p, "kind");
    const auto label = get_opt<std::string>(p, "label").value_or("");
    const auto cols = resolve_columns(p, columns);
    const auto need = [&](std::size_t n) {
      if (cols.size() != n) {
        throw Error(ErrorKind::BadParameter, "bad parameter definition: '" + kind + "' takes " +
                                                 std::to_string(n) + " column(s)");
      }
    };
    if (kind == "mean") {
      need(1);
      out.emplace_back(ComponentMean{cols[0]}, label.empty() ? "mean(" + columns[cols[0]] + ")" : label);
    } else if (kind == "indicator") {
      need(1);
      const double t = get<double>(p, "threshold");
      out.emplace_back(Indicator<double>{cols[0], t}, label);
    } else if (kind == "product") {
      need(2);
      out.emplace_back(ProductMoment{cols[0], cols[1]},
                       label.empty() ? "product(" + columns[cols[0]] + "," + columns[cols[1]] + ")" : label);
    } else if (kind == "custom") {
      out.push_back(custom(get<std::string>(p, "tag"), cols, label));
    } else {
      throw Error(ErrorKind::BadParameter, "bad parameter definition: unknown kind '" + kind + "'");
    }
    out.back().validate(q);
  }
  return out;
}

BivariateInput parse_bivariate(const Json& j) {
  if (!j.is_object()) bad("top level must be an object");
  BivariateInput in;
  if (j.contains("means")) {
    const auto& m = j.at("means");
    in.means = BivariateMeans<double>{get<double>(m, "x111"), get<double>(m, "x112"),
                                      get_opt<double>(m, "x211").value_or(0.0),
                                      get_opt<double>(m, "x222").value_or(0.0)};
  }
  if (j.contains("sizes")) {
    const auto& s = j.at("sizes");
    in.sizes = std::array<double, 3>{get<double>(s, "J11"), get_opt<double>(s, "J21").value_or(0.0),
                                     get_opt<double>(s, "J22").value_or(0.0)};
  }
  if (j.contains("sigma")) {
    const auto m = matrix_from_json(j.at("sigma"), "sigma");
    if (m.rows() != 2 || m.cols() != 2) bad("'sigma' must be 2x2");
    in.sigma = m;
  }
  in.sd = get_opt<double>(j, "sd");
  in.rho = get_opt<double>(j, "rho");
  in.missing_token = get_opt<std::string>(j, "missing_token");
  return in;
}

StudyConfig parse_study(const Json& j) {
  if (!j.is_object()) bad("top level must be an object");
  StudyConfig out;
  auto& spec = out.spec;
  if (!j.contains("population")) bad("missing 'population'");
  const auto& pop = j.at("population");
  const auto mean = get<std::vector<double>>(pop, "mean");
  spec.population.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Index>(mean.size()));
  if (!pop.contains("covariance")) bad("missing 'population.covariance'");
  spec.population.cov = matrix_from_json(pop.at("covariance"), "covariance");

  if (!j.contains("mechanism")) bad("missing 'mechanism'");
  const auto& m = j.at("mechanism");
  const auto type = get<std::string>(m, "type");
  if (type == "mcar") {
    spec.mechanism = sim::Mcar{pattern_weights(m)};
  } else if (type == "monotone") {
    const auto& d = m.contains("dropout") ? m.at("dropout") : Json();
    std::vector<double> probs;
    if (d.is_number()) {
      probs = {d.get<double>()};
    } else if (d.is_array()) {
      probs = d.get<std::vector<double>>();
    } else {
      bad("monotone mechanism needs 'dropout' (number or array)");
    }
    spec.mechanism = sim::MonotoneDropout{probs};
  } else if (type == "delta_shift") {
    spec.mechanism = sim::DeltaShift{pattern_weights(m), get<double>(m, "delta")};
  } else {
    bad("unknown mechanism type '" + type + "'");
  }

  spec.n = get<Index>(j, "n");
  spec.replicates = get<Index>(j, "replicates");
  for (const auto& name : get<std::vector<std::string>>(j, "estimators")) {
    spec.estimators.push_back(sim::estimator_from_string(name));
  }
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    spec.tolerances.mean_se = get_opt<double>(t, "mean_se").value_or(spec.tolerances.mean_se);
    spec.tolerances.variance_rel = get_opt<double>(t, "variance_rel").value_or(spec.tolerances.variance_rel);
  }
  spec.monotone = get_opt<bool>(j, "monotone").value_or(false);
  spec.threads = get_opt<unsigned>(j, "threads").value_or(0u);
  if (j.contains("ladder")) out.ladder = get<std::vector<Index>>(j, "ladder");
  return out;
}

}  // namespace hmest::config
