#pragma once

// RFC 4180 style CSV input. Diagnostics name the 1-based line and column.

#include <string>
#include <string_view>
#include <vector>

#include "hmest/dataset.hpp"
#include "hmest/km.hpp"

namespace hmest::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// Line on which each row starts.
  std::vector<std::size_t> lines;
};

/// Splits text into a header and data rows. Quoted fields may hold commas,
/// doubled quotes and newlines. Blank lines are skipped. Throws MalformedRow
/// on ragged rows or broken quoting, NoData when there is no header.
Table parse(std::string_view text);

/// Numeric table; a cell equal to `missing_token` after trimming, or empty,
/// is missing. Throws BadCell on anything else that is not a finite number.
Dataset<double> read_dataset(std::string_view text, const std::string& missing_token = "NA");

/// Two columns: time, event flag in {0, 1}.
CensoredSample<double> read_censored(std::string_view text);

/// Whole file as a string; throws Io when it cannot be read.
std::string read_file(const std::string& path);

}  // namespace hmest::csv
