#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hmest/error.hpp"
#include "hmest/pattern.hpp"

namespace hmest {

/// Rectangular N x Q table of optional reals.
///
/// Missing cells hold quiet NaN in `values` and false in `observed`; the
/// mask is authoritative.
template <typename Scalar>
struct Dataset {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix values;
  Mask observed;
  std::vector<std::string> names;

  Index rows() const noexcept { return values.rows(); }
  int dimension() const noexcept { return static_cast<int>(values.cols()); }

  /// Throws MalformedRow on ragged input, BadCell on non-finite values.
  static Dataset from_rows(std::vector<std::string> column_names,
                           const std::vector<std::vector<std::optional<Scalar>>>& rows) {
    if (rows.empty()) throw Error(ErrorKind::NoData, "no data");
    const Index q = column_names.empty() ? static_cast<Index>(rows.front().size())
                                         : static_cast<Index>(column_names.size());
    if (q == 0) throw Error(ErrorKind::NoData, "no data");
    Dataset d;
    d.values.setConstant(static_cast<Index>(rows.size()), q,
                         std::numeric_limits<Scalar>::quiet_NaN());
    d.observed.setConstant(static_cast<Index>(rows.size()), q, false);
    for (std::size_t n = 0; n < rows.size(); ++n) {
      if (static_cast<Index>(rows[n].size()) != q) {
        throw Error(ErrorKind::MalformedRow,
                    "malformed row " + std::to_string(n) + ": expected " +
                        std::to_string(q) + " cells, got " +
                        std::to_string(rows[n].size()));
      }
      for (Index c = 0; c < q; ++c) {
        const auto& cell = rows[n][static_cast<std::size_t>(c)];
        if (!cell) continue;
        if (!std::isfinite(*cell)) {
          throw Error(ErrorKind::BadCell, "bad cell at row " + std::to_string(n) +
                                              ", column " + std::to_string(c));
        }
        d.values(static_cast<Index>(n), c) = *cell;
        d.observed(static_cast<Index>(n), c) = true;
      }
    }
    if (column_names.empty()) {
      for (Index c = 0; c < q; ++c) column_names.push_back("x" + std::to_string(c + 1));
    }
    d.names = std::move(column_names);
    return d;
  }

  /// Complete dataset from a dense matrix.
  static Dataset from_matrix(const Matrix& m) {
    Dataset d;
    d.values = m;
    d.observed.setConstant(m.rows(), m.cols(), true);
    for (Index c = 0; c < m.cols(); ++c) d.names.push_back("x" + std::to_string(c + 1));
    return d;
  }

  void set_missing(Index row, Index col) {
    values(row, col) = std::numeric_limits<Scalar>::quiet_NaN();
    observed(row, col) = false;
  }
};

template <typename Scalar>
PatternPartition partition(const Dataset<Scalar>& data) {
  return partition(data.observed);
}

}  // namespace hmest
