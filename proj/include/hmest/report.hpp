#pragma once

// Report emission. JSON objects keep keys sorted, so output is stable and
// re-serialising a parsed report reproduces it byte for byte. CSV output is
// one header line plus data rows; matrices are flattened row-major under
// indexed headers such as theta[0] and cov[0][1]. Tables are for people.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmest/bivariate.hpp"
#include "hmest/estimator.hpp"
#include "hmest/km.hpp"
#include "hmest/sim.hpp"

namespace hmest::report {

using Json = nlohmann::json;

enum class Format { Json, Csv, Table };

Format format_from_string(const std::string& s);

/// Two-space indented JSON with a trailing newline.
std::string dump(const Json& j);

std::string format_number(double v);

struct EstimateInfo {
  std::vector<std::string> labels;
  std::string mode;
};

Json estimate_json(const HierarchicalResult<double>& res, const EstimateInfo& info);
std::string render_estimate(const HierarchicalResult<double>& res, const EstimateInfo& info, Format f);

/// `oracle` is the product-limit curve when a cross-check was requested.
Json km_json(const StepCdf<double>& cdf, const std::optional<StepCdf<double>>& oracle);
std::string render_km(const StepCdf<double>& cdf, const std::optional<StepCdf<double>>& oracle, Format f);

struct BivariateResult {
  std::string variant;
  BivariateMeans<double> means;
  BivariateConfig<double> config;
  std::optional<MeanVectorEstimate<double>> mean_vector;
  std::optional<DeltaEstimate<double>> delta;
};

Json bivariate_json(const BivariateResult& r);
std::string render_bivariate(const BivariateResult& r, Format f);

Json study_json(const sim::StudyReport& r, const std::vector<sim::ConvergenceRow>& ladder);
std::string render_study(const sim::StudyReport& r, const std::vector<sim::ConvergenceRow>& ladder, Format f);

}  // namespace hmest::report
