#pragma once

// JSON configuration for the command line front end. Columns may be named
// or given as 1-based integers.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hmest/bivariate.hpp"
#include "hmest/estimator.hpp"
#include "hmest/parameter.hpp"
#include "hmest/sim.hpp"

namespace hmest::config {

using Json = nlohmann::json;

/// Parses JSON text; throws InvalidSpec with the parser's message.
Json parse_json(std::string_view text);

struct EstimateConfig {
  Json parameters;  // resolved against the CSV header by estimate_parameters()
  std::optional<std::string> mode;
  std::optional<Eigen::MatrixXd> known_covariance;
  bool monotone = false;
  std::optional<std::string> missing_token;
};

EstimateConfig parse_estimate(const Json& j);

/// One mean per column when the config lists no parameters.
/// Built-in custom tags: square, log, abs.
std::vector<ParameterDef<double>> estimate_parameters(const EstimateConfig& cfg,
                                                      const std::vector<std::string>& columns);

struct BivariateInput {
  std::optional<BivariateMeans<double>> means;
  std::optional<std::array<double, 3>> sizes;  // J11, J21, J22
  std::optional<Eigen::Matrix2d> sigma;
  std::optional<double> sd;
  std::optional<double> rho;
  std::optional<std::string> missing_token;
};

BivariateInput parse_bivariate(const Json& j);

struct StudyConfig {
  sim::StudySpec spec;
  std::vector<Index> ladder;
};

/// The seed is not read from JSON; callers set it.
StudyConfig parse_study(const Json& j);

Eigen::MatrixXd matrix_from_json(const Json& j, const char* what);

}  // namespace hmest::config
