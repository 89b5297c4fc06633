#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace hmest {

using Index = Eigen::Index;

/// Observedness mask of one row: bit q set means component q was observed.
///
/// Components are numbered 0..Q-1. Patterns order "observed before missing",
/// reading components left to right, so for Q = 2 the canonical order is
/// (1,1) < (1,0) < (0,1) < (0,0). Children are visited in this order when
/// correction blocks are stacked.
class MissingPattern {
 public:
  static constexpr int kMaxComponents = 64;

  MissingPattern() = default;
  MissingPattern(std::uint64_t observed_bits, int dimension);

  /// Builds a pattern from a 0/1 list, e.g. {1,0,1}.
  static MissingPattern from_flags(const std::vector<int>& flags);
  static MissingPattern complete(int dimension);

  int dimension() const noexcept { return dimension_; }
  std::uint64_t bits() const noexcept { return bits_; }
  bool observed(int q) const noexcept { return (bits_ >> q) & 1U; }
  int observed_count() const noexcept;
  int missing_count() const noexcept { return dimension_ - observed_count(); }
  bool empty() const noexcept { return bits_ == 0; }
  bool is_complete() const noexcept { return missing_count() == 0; }

  /// Hierarchy level: number of unobserved components plus one.
  int level() const noexcept { return missing_count() + 1; }

  bool covers(std::uint64_t required) const noexcept {
    return (required & ~bits_) == 0;
  }

  /// "(1,0,1)"
  std::string to_string() const;

  friend bool operator==(const MissingPattern& a, const MissingPattern& b) {
    return a.bits_ == b.bits_ && a.dimension_ == b.dimension_;
  }
  friend bool operator<(const MissingPattern& a, const MissingPattern& b);

 private:
  std::uint64_t bits_ = 0;
  int dimension_ = 0;
};

/// Patterns one level deeper: exactly one observed component switched off.
/// All-missing results are excluded, so a single-component pattern has none.
std::vector<MissingPattern> children(const MissingPattern& p);

/// The single child kept on a monotone chain: the last observed component
/// dropped. Empty when p has one observed component.
std::vector<MissingPattern> monotone_children(const MissingPattern& p);

struct PatternPartition {
  std::map<MissingPattern, std::vector<Index>> groups;
  Index dropped = 0;
  int dimension = 0;

  Index size_of(const MissingPattern& p) const;
  bool contains(const MissingPattern& p) const { return groups.count(p) != 0; }
};

/// Groups row indices by observedness mask. Rows with nothing observed are
/// only counted. Throws Error(NoData) on an empty mask.
PatternPartition partition(
    const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& observed);

}  // namespace hmest
