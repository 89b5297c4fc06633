#pragma once

// Hierarchical correction of pattern-subsample moment estimates.
//
// Every missing pattern p with J_p >= 1 rows yields a raw estimate of the
// parameters it can see. Working from the deepest level up, each pattern's
// raw estimate is corrected by the already-corrected estimates of its
// children (patterns with one more missing component):
//
//   theta~ = theta^ - K (K*)^-1 (b^ - b~)
//   Cov(theta~) = Cov(theta^) - K (K*)^-1 K'
//
// where b^ stacks the parent's estimates of the parameters it shares with
// each child, b~ stacks the children's corrected estimates of the same, K is
// Cov(theta^, b^) and K* = Cov(b^) + blockdiag(Cov(b~)). The root (complete
// pattern) estimate is the final answer.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "hmest/dataset.hpp"
#include "hmest/error.hpp"
#include "hmest/linalg.hpp"
#include "hmest/parameter.hpp"
#include "hmest/pattern.hpp"

namespace hmest {

/// Covariances of the phi values are estimated from each subsample.
struct PlugIn {};

/// Population Cov(phi_s(X), phi_r(X)) over all S parameters is supplied.
template <typename Scalar>
struct KnownMoments {
  MatrixX<Scalar> phi_cov;
};

template <typename Scalar>
using CovarianceMode = std::variant<PlugIn, KnownMoments<Scalar>>;

template <typename Scalar>
struct SubsampleEstimate {
  MissingPattern pattern;
  std::vector<int> param_ids;
  VectorX<Scalar> theta_hat;
  MatrixX<Scalar> cov_hat;
  Index J = 0;
};

/// One stacked coordinate of the correction vectors.
struct BlockEntry {
  MissingPattern child;
  int param_id = 0;

  friend bool operator==(const BlockEntry&, const BlockEntry&) = default;
};

template <typename Scalar>
struct CorrectionBlocks {
  VectorX<Scalar> b_hat;
  VectorX<Scalar> b_tilde;
  MatrixX<Scalar> b_tilde_cov;
  std::vector<BlockEntry> index_map;
  /// Position in the parent's theta_hat of each stacked coordinate.
  std::vector<Index> parent_rows;

  Index size() const noexcept { return b_hat.size(); }
};

template <typename Scalar>
struct GainSystem {
  MatrixX<Scalar> K;
  MatrixX<Scalar> K_star;
};

enum class Outcome {
  NoChildren,
  Corrected,
  SingularFallback,
};

inline const char* to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::NoChildren: return "no correction possible";
    case Outcome::Corrected: return "corrected";
    case Outcome::SingularFallback: return "fallback: singular K*";
  }
  return "unknown";
}

struct Provenance {
  Outcome outcome = Outcome::NoChildren;
  std::vector<MissingPattern> contributors;
  /// Every pattern whose rows reached this estimate, itself included.
  std::vector<MissingPattern> absorbed;
  /// Two contributing children share a donor deeper down, so their b~ blocks
  /// are correlated although K* treats them as independent.
  bool correlated_donors = false;
  /// Eigenvalue ratio of K* when the correction was applied, else 0.
  double k_star_condition = 0;
};

template <typename Scalar>
struct UpdatedEstimate {
  MissingPattern pattern;
  std::vector<int> param_ids;
  VectorX<Scalar> theta_tilde;
  MatrixX<Scalar> cov_tilde;
  Index J = 0;
  /// K (K*)^-1, S* x L. Empty unless the correction was applied.
  MatrixX<Scalar> gain;
  std::vector<BlockEntry> gain_columns;
  Provenance provenance;
};

namespace detail {

template <typename Scalar>
MatrixX<Scalar> select(const MatrixX<Scalar>& m, std::span<const int> rows,
                       std::span<const int> cols) {
  MatrixX<Scalar> out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Index>(i), static_cast<Index>(j)) = m(rows[i], cols[j]);
  return out;
}

inline Index position_of(const std::vector<int>& ids, int id) {
  auto it = std::find(ids.begin(), ids.end(), id);
  return it == ids.end() ? -1 : static_cast<Index>(it - ids.begin());
}

}  // namespace detail

/// Raw moment estimate from the rows of one pattern subsample.
///
/// Plug-in: cov_hat = (sample covariance of the per-row phi vectors) / J and
/// needs J >= 2. Known: cov_hat = phi_cov restricted to the estimable set / J.
template <typename Scalar>
SubsampleEstimate<Scalar> subsample_estimate(const Dataset<Scalar>& data,
                                             std::span<const Index> rows,
                                             const MissingPattern& pattern,
                                             const std::vector<ParameterDef<Scalar>>& params,
                                             const CovarianceMode<Scalar>& mode) {
  SubsampleEstimate<Scalar> out;
  out.pattern = pattern;
  out.param_ids = estimable(pattern, params);
  out.J = static_cast<Index>(rows.size());
  const auto s_star = static_cast<Index>(out.param_ids.size());
  if (out.J < 1) throw Error(ErrorKind::NoData, "empty subsample " + pattern.to_string());

  MatrixX<Scalar> phi(out.J, s_star);
  VectorX<Scalar> row(data.dimension());
  for (Index n = 0; n < out.J; ++n) {
    const Index r = rows[static_cast<std::size_t>(n)];
    if (r < 0 || r >= data.rows()) {
      throw Error(ErrorKind::MalformedRow, "row index " + std::to_string(r) + " out of range");
    }
    row = data.values.row(r).transpose();
    for (Index s = 0; s < s_star; ++s) {
      const Scalar v = params[static_cast<std::size_t>(out.param_ids[s])](row);
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::BadCell, "bad cell: parameter '" +
                                            params[out.param_ids[s]].label() +
                                            "' is not finite at row " + std::to_string(r));
      }
      phi(n, s) = v;
    }
  }
  out.theta_hat = phi.colwise().mean().transpose();

  if (const auto* known = std::get_if<KnownMoments<Scalar>>(&mode)) {
    const auto S = static_cast<Index>(params.size());
    if (known->phi_cov.rows() != S || known->phi_cov.cols() != S) {
      throw Error(ErrorKind::InvalidSpec,
                  "known covariance must be " + std::to_string(S) + "x" + std::to_string(S));
    }
    out.cov_hat = detail::select(known->phi_cov, out.param_ids, out.param_ids) /
                  static_cast<Scalar>(out.J);
  } else {
    if (out.J < 2) {
      throw Error(ErrorKind::CovarianceInestimable,
                  "covariance inestimable: pattern " + pattern.to_string() + " has J = 1");
    }
    out.cov_hat = sample_covariance(phi) / static_cast<Scalar>(out.J);
  }
  out.cov_hat = symmetrized(out.cov_hat);
  return out;
}

/// An estimate that absorbed nothing from deeper levels.
template <typename Scalar>
UpdatedEstimate<Scalar> uncorrected(const SubsampleEstimate<Scalar>& parent,
                                    Outcome outcome = Outcome::NoChildren) {
  UpdatedEstimate<Scalar> out;
  out.pattern = parent.pattern;
  out.param_ids = parent.param_ids;
  out.theta_tilde = parent.theta_hat;
  out.cov_tilde = parent.cov_hat;
  out.J = parent.J;
  out.provenance.outcome = outcome;
  out.provenance.absorbed = {parent.pattern};
  return out;
}

/// Stacks one block per child, holding the parameters the parent and that
/// child can both estimate. Children are taken in canonical pattern order.
/// Returns nullopt when no child shares any parameter with the parent.
template <typename Scalar>
std::optional<CorrectionBlocks<Scalar>> assemble_blocks(
    const SubsampleEstimate<Scalar>& parent,
    std::span<const UpdatedEstimate<Scalar>> child_updates) {
  std::vector<const UpdatedEstimate<Scalar>*> ordered;
  for (const auto& c : child_updates) ordered.push_back(&c);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](auto* a, auto* b) { return a->pattern < b->pattern; });

  struct Piece {
    const UpdatedEstimate<Scalar>* child;
    std::vector<int> parent_pos;
    std::vector<int> child_pos;
  };
  std::vector<Piece> pieces;
  Index total = 0;
  for (const auto* c : ordered) {
    Piece piece{c, {}, {}};
    for (std::size_t k = 0; k < parent.param_ids.size(); ++k) {
      const Index pos = detail::position_of(c->param_ids, parent.param_ids[k]);
      if (pos < 0) continue;
      piece.parent_pos.push_back(static_cast<int>(k));
      piece.child_pos.push_back(static_cast<int>(pos));
    }
    if (piece.parent_pos.empty()) continue;
    total += static_cast<Index>(piece.parent_pos.size());
    pieces.push_back(std::move(piece));
  }
  if (pieces.empty()) return std::nullopt;

  CorrectionBlocks<Scalar> out;
  out.b_hat.resize(total);
  out.b_tilde.resize(total);
  out.b_tilde_cov = MatrixX<Scalar>::Zero(total, total);
  Index offset = 0;
  for (const auto& piece : pieces) {
    const auto len = static_cast<Index>(piece.parent_pos.size());
    for (Index k = 0; k < len; ++k) {
      out.b_hat(offset + k) = parent.theta_hat(piece.parent_pos[k]);
      out.b_tilde(offset + k) = piece.child->theta_tilde(piece.child_pos[k]);
      out.index_map.push_back({piece.child->pattern, parent.param_ids[piece.parent_pos[k]]});
      out.parent_rows.push_back(piece.parent_pos[k]);
    }
    out.b_tilde_cov.block(offset, offset, len, len) =
        detail::select(piece.child->cov_tilde, piece.child_pos, piece.child_pos);
    offset += len;
  }
  return out;
}

/// K = Cov(theta^, b^) and K* = Cov(b^) + blockdiag(Cov(b~)). Since b^ is a
/// (possibly repeated) subvector of theta^, both come from cov_hat; b^ and b~
/// come from disjoint row sets, so they are uncorrelated.
template <typename Scalar>
GainSystem<Scalar> gain_system(const SubsampleEstimate<Scalar>& parent,
                               const CorrectionBlocks<Scalar>& blocks) {
  const Index s_star = parent.theta_hat.size();
  const Index l = blocks.size();
  GainSystem<Scalar> g;
  g.K.resize(s_star, l);
  g.K_star.resize(l, l);
  for (Index c = 0; c < l; ++c) {
    g.K.col(c) = parent.cov_hat.col(blocks.parent_rows[c]);
    for (Index r = 0; r < l; ++r) {
      g.K_star(r, c) = parent.cov_hat(blocks.parent_rows[r], blocks.parent_rows[c]);
    }
  }
  g.K_star += blocks.b_tilde_cov;
  g.K_star = symmetrized(g.K_star);
  return g;
}

/// Applies the variance-minimising correction. When K* fails the
/// positive-definiteness gate the parent is returned uncorrected with a
/// SingularFallback outcome.
template <typename Scalar>
UpdatedEstimate<Scalar> update(const SubsampleEstimate<Scalar>& parent,
                               const CorrectionBlocks<Scalar>& blocks,
                               const GainSystem<Scalar>& gains,
                               Scalar gate_eps = Scalar(1e-10)) {
  if (!passes_pd_gate(gains.K_star, gate_eps)) {
    return uncorrected(parent, Outcome::SingularFallback);
  }
  Eigen::LLT<MatrixX<Scalar>> llt(gains.K_star);
  if (llt.info() != Eigen::Success) return uncorrected(parent, Outcome::SingularFallback);

  UpdatedEstimate<Scalar> out;
  out.pattern = parent.pattern;
  out.param_ids = parent.param_ids;
  out.J = parent.J;
  out.gain = llt.solve(gains.K.transpose()).transpose();
  out.gain_columns = blocks.index_map;
  out.theta_tilde = parent.theta_hat - out.gain * (blocks.b_hat - blocks.b_tilde);
  out.cov_tilde = symmetrized(parent.cov_hat - out.gain * gains.K.transpose());
  out.provenance.outcome = Outcome::Corrected;
  out.provenance.k_star_condition = static_cast<double>(condition_number(gains.K_star));
  out.provenance.absorbed = {parent.pattern};
  for (const auto& e : blocks.index_map) {
    if (out.provenance.contributors.empty() || !(out.provenance.contributors.back() == e.child))
      out.provenance.contributors.push_back(e.child);
  }
  return out;
}

/// Linear functional w' theta~ of an estimate and its variance w' Cov w.
/// `weights` is indexed by the estimate's parameter positions.
template <typename Scalar>
std::pair<Scalar, Scalar> contrast(const UpdatedEstimate<Scalar>& est,
                                   const VectorX<Scalar>& weights) {
  return {weights.dot(est.theta_tilde), weights.dot(est.cov_tilde * weights)};
}

struct HierarchyOptions {
  /// Restrict the lattice to one chain: each pattern's only child drops its
  /// last observed component.
  bool monotone = false;
  double gate_eps = 1e-10;
};

enum class NodeStatus {
  Estimated,
  NoEstimableParameters,
  CovarianceInestimable,
};

template <typename Scalar>
struct NodeReport {
  MissingPattern pattern;
  Index J = 0;
  NodeStatus status = NodeStatus::Estimated;
  std::optional<UpdatedEstimate<Scalar>> estimate;
  /// Whether this node's estimate fed the root, directly or transitively.
  bool reaches_root = false;
};

template <typename Scalar>
struct HierarchicalResult {
  UpdatedEstimate<Scalar> root;
  /// Raw complete-case estimate at the root, before any correction.
  SubsampleEstimate<Scalar> root_raw;
  std::vector<NodeReport<Scalar>> nodes;  // deepest level first
  PatternPartition partition;
};

/// Bottom-up recursion over every observed pattern. Throws NoCompleteCases
/// when no row is fully observed.
template <typename Scalar>
HierarchicalResult<Scalar> hierarchical_estimate(const Dataset<Scalar>& data,
                                                 const std::vector<ParameterDef<Scalar>>& params,
                                                 const CovarianceMode<Scalar>& mode,
                                                 const HierarchyOptions& opts = {}) {
  if (params.empty()) throw Error(ErrorKind::BadParameter, "bad parameter definition: none given");
  for (const auto& p : params) p.validate(data.dimension());

  HierarchicalResult<Scalar> result;
  result.partition = partition(data);
  const MissingPattern root = MissingPattern::complete(data.dimension());
  if (!result.partition.contains(root)) {
    throw Error(ErrorKind::NoCompleteCases, "no complete cases");
  }

  std::vector<MissingPattern> order;
  for (const auto& [p, rows] : result.partition.groups) order.push_back(p);
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    return a.level() > b.level();
  });

  std::map<MissingPattern, std::size_t> node_of;
  for (const auto& p : order) {
    const auto& rows = result.partition.groups.at(p);
    NodeReport<Scalar> node;
    node.pattern = p;
    node.J = static_cast<Index>(rows.size());
    if (estimable(p, params).empty()) {
      node.status = NodeStatus::NoEstimableParameters;
      result.nodes.push_back(std::move(node));
      continue;
    }

    SubsampleEstimate<Scalar> raw;
    try {
      raw = subsample_estimate<Scalar>(data, rows, p, params, mode);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::CovarianceInestimable || p == root) throw;
      node.status = NodeStatus::CovarianceInestimable;
      result.nodes.push_back(std::move(node));
      continue;
    }

    std::vector<UpdatedEstimate<Scalar>> kids;
    for (const auto& c : opts.monotone ? monotone_children(p) : children(p)) {
      auto it = node_of.find(c);
      if (it == node_of.end()) continue;
      const auto& child_node = result.nodes[it->second];
      if (child_node.estimate) kids.push_back(*child_node.estimate);
    }

    UpdatedEstimate<Scalar> est;
    const auto blocks = assemble_blocks<Scalar>(raw, kids);
    if (!blocks) {
      est = uncorrected(raw);
    } else {
      est = update(raw, *blocks, gain_system(raw, *blocks), static_cast<Scalar>(opts.gate_eps));
    }
    if (est.provenance.outcome == Outcome::Corrected) {
      // Donor bookkeeping for the shared-grandchild caveat.
      std::vector<MissingPattern> seen;
      for (const auto& c : est.provenance.contributors) {
        const auto& child_est = *result.nodes[node_of.at(c)].estimate;
        for (const auto& d : child_est.provenance.absorbed) {
          if (std::find(seen.begin(), seen.end(), d) != seen.end()) {
            est.provenance.correlated_donors = true;
          } else {
            seen.push_back(d);
          }
        }
        est.provenance.correlated_donors |= child_est.provenance.correlated_donors;
      }
      for (const auto& d : seen) est.provenance.absorbed.push_back(d);
    }
    if (p == root) result.root_raw = raw;
    node.estimate = std::move(est);
    node_of[p] = result.nodes.size();
    result.nodes.push_back(std::move(node));
  }

  auto& root_node = result.nodes[node_of.at(root)];
  result.root = *root_node.estimate;
  for (auto& node : result.nodes) {
    const auto& absorbed = result.root.provenance.absorbed;
    node.reaches_root =
        node.estimate && std::find(absorbed.begin(), absorbed.end(), node.pattern) != absorbed.end();
  }
  return result;
}

}  // namespace hmest
