#include "hmest/pattern.hpp"

#include <algorithm>
#include <bit>

#include "hmest/error.hpp"

namespace hmest {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NoData: return "no data";
    case ErrorKind::MalformedRow: return "malformed row";
    case ErrorKind::BadCell: return "bad cell";
    case ErrorKind::BadParameter: return "bad parameter definition";
    case ErrorKind::CovarianceInestimable: return "covariance inestimable";
    case ErrorKind::NoCompleteCases: return "no complete cases";
    case ErrorKind::NoEstimableCdf: return "no estimable CDF";
    case ErrorKind::InvalidVariance: return "invalid variance";
    case ErrorKind::SingularSystem: return "singular system";
    case ErrorKind::DegenerateVariance: return "degenerate variance";
    case ErrorKind::InvalidCorrelation: return "invalid correlation";
    case ErrorKind::InvalidPopulation: return "invalid population";
    case ErrorKind::InvalidSpec: return "invalid spec";
    case ErrorKind::LadderTooShort: return "ladder too short";
    case ErrorKind::Io: return "i/o error";
  }
  return "unknown";
}

MissingPattern::MissingPattern(std::uint64_t observed_bits, int dimension)
    : bits_(observed_bits), dimension_(dimension) {
  if (dimension < 1 || dimension > kMaxComponents) {
    throw Error(ErrorKind::InvalidSpec,
                "pattern dimension must be in [1, 64], got " +
                    std::to_string(dimension));
  }
  if (dimension < kMaxComponents) {
    bits_ &= (std::uint64_t{1} << dimension) - 1;
  }
}

MissingPattern MissingPattern::from_flags(const std::vector<int>& flags) {
  std::uint64_t bits = 0;
  for (std::size_t q = 0; q < flags.size(); ++q) {
    if (flags[q] != 0) bits |= std::uint64_t{1} << q;
  }
  return MissingPattern(bits, static_cast<int>(flags.size()));
}

MissingPattern MissingPattern::complete(int dimension) {
  return MissingPattern(~std::uint64_t{0}, dimension);
}

int MissingPattern::observed_count() const noexcept {
  return std::popcount(bits_);
}

std::string MissingPattern::to_string() const {
  std::string out = "(";
  for (int q = 0; q < dimension_; ++q) {
    if (q) out += ',';
    out += observed(q) ? '1' : '0';
  }
  out += ')';
  return out;
}

bool operator<(const MissingPattern& a, const MissingPattern& b) {
  if (a.dimension_ != b.dimension_) return a.dimension_ < b.dimension_;
  // First differing component decides; observed sorts first.
  const std::uint64_t diff = a.bits_ ^ b.bits_;
  if (diff == 0) return false;
  const int q = std::countr_zero(diff);
  return a.observed(q);
}

std::vector<MissingPattern> children(const MissingPattern& p) {
  std::vector<MissingPattern> out;
  if (p.observed_count() <= 1) return out;
  for (int q = 0; q < p.dimension(); ++q) {
    if (p.observed(q)) {
      out.emplace_back(p.bits() & ~(std::uint64_t{1} << q), p.dimension());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<MissingPattern> monotone_children(const MissingPattern& p) {
  if (p.observed_count() <= 1) return {};
  const int last = 63 - std::countl_zero(p.bits());
  return {MissingPattern(p.bits() & ~(std::uint64_t{1} << last), p.dimension())};
}

Index PatternPartition::size_of(const MissingPattern& p) const {
  auto it = groups.find(p);
  return it == groups.end() ? 0 : static_cast<Index>(it->second.size());
}

PatternPartition partition(
    const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& observed) {
  if (observed.rows() == 0 || observed.cols() == 0) {
    throw Error(ErrorKind::NoData, "no data");
  }
  PatternPartition out;
  out.dimension = static_cast<int>(observed.cols());
  if (out.dimension > MissingPattern::kMaxComponents) {
    throw Error(ErrorKind::InvalidSpec, "at most 64 components are supported");
  }
  for (Index n = 0; n < observed.rows(); ++n) {
    std::uint64_t bits = 0;
    for (Index q = 0; q < observed.cols(); ++q) {
      if (observed(n, q)) bits |= std::uint64_t{1} << q;
    }
    if (bits == 0) {
      ++out.dropped;
      continue;
    }
    out.groups[MissingPattern(bits, out.dimension)].push_back(n);
  }
  return out;
}

}  // namespace hmest
