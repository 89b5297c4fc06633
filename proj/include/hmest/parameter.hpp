#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "hmest/error.hpp"
#include "hmest/pattern.hpp"

namespace hmest {

/// phi(x) = x_q
struct ComponentMean {
  int q;
};

/// phi(x) = 1[x_q <= threshold]; the mean of this is a CDF ordinate.
template <typename Scalar>
struct Indicator {
  int q;
  Scalar threshold;
};

/// phi(x) = x_a * x_b
struct ProductMoment {
  int a;
  int b;
};

/// Arbitrary moment functional. `fn` receives the full row; it may only read
/// the components listed in `reads`.
template <typename Scalar>
struct CustomMoment {
  std::string tag;
  std::vector<int> reads;
  std::function<Scalar(const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>&)> fn;
};

/// One target theta_s = E[phi_s(X)].
template <typename Scalar>
class ParameterDef {
 public:
  using Row = Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;
  using Kind = std::variant<ComponentMean, Indicator<Scalar>, ProductMoment,
                            CustomMoment<Scalar>>;

  explicit ParameterDef(Kind kind, std::string label = {})
      : kind_(std::move(kind)), label_(std::move(label)) {
    if (label_.empty()) label_ = default_label();
  }

  static ParameterDef mean(int q) { return ParameterDef(ComponentMean{q}); }
  static ParameterDef indicator(int q, Scalar t) {
    return ParameterDef(Indicator<Scalar>{q, t});
  }
  static ParameterDef product(int a, int b) { return ParameterDef(ProductMoment{a, b}); }

  const Kind& kind() const noexcept { return kind_; }
  const std::string& label() const noexcept { return label_; }

  /// Components phi reads, as a bitmask.
  std::uint64_t required() const {
    std::uint64_t bits = 0;
    for (int q : components()) bits |= std::uint64_t{1} << q;
    return bits;
  }

  std::vector<int> components() const {
    return std::visit(
        [](const auto& k) -> std::vector<int> {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ComponentMean>) {
            return {k.q};
          } else if constexpr (std::is_same_v<K, Indicator<Scalar>>) {
            return {k.q};
          } else if constexpr (std::is_same_v<K, ProductMoment>) {
            return {k.a, k.b};
          } else {
            return k.reads;
          }
        },
        kind_);
  }

  Scalar operator()(const Row& x) const {
    return std::visit(
        [&x](const auto& k) -> Scalar {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ComponentMean>) {
            return x(k.q);
          } else if constexpr (std::is_same_v<K, Indicator<Scalar>>) {
            return x(k.q) <= k.threshold ? Scalar(1) : Scalar(0);
          } else if constexpr (std::is_same_v<K, ProductMoment>) {
            return x(k.a) * x(k.b);
          } else {
            return k.fn(x);
          }
        },
        kind_);
  }

  /// Throws BadParameter if any referenced component is outside [0, Q).
  void validate(int dimension) const {
    const auto comps = components();
    if (comps.empty()) {
      throw Error(ErrorKind::BadParameter,
                  "bad parameter definition: '" + label_ + "' reads no components");
    }
    for (int q : comps) {
      if (q < 0 || q >= dimension) {
        throw Error(ErrorKind::BadParameter,
                    "bad parameter definition: '" + label_ + "' references component " +
                        std::to_string(q) + " but Q = " + std::to_string(dimension));
      }
    }
  }

 private:
  std::string default_label() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ComponentMean>) {
            return "mean(" + std::to_string(k.q) + ")";
          } else if constexpr (std::is_same_v<K, Indicator<Scalar>>) {
            return "indicator(" + std::to_string(k.q) + "," + std::to_string(k.threshold) + ")";
          } else if constexpr (std::is_same_v<K, ProductMoment>) {
            return "product(" + std::to_string(k.a) + "," + std::to_string(k.b) + ")";
          } else {
            return k.tag;
          }
        },
        kind_);
  }

  Kind kind_;
  std::string label_;
};

/// Indices of the parameters whose required components are all observed in p,
/// in input order.
template <typename Scalar>
std::vector<int> estimable(const MissingPattern& p,
                           const std::vector<ParameterDef<Scalar>>& params) {
  std::vector<int> out;
  for (std::size_t s = 0; s < params.size(); ++s) {
    params[s].validate(p.dimension());
    if (p.covers(params[s].required())) out.push_back(static_cast<int>(s));
  }
  return out;
}

/// Convenience: one mean parameter per component.
template <typename Scalar>
std::vector<ParameterDef<Scalar>> component_means(int dimension) {
  std::vector<ParameterDef<Scalar>> out;
  for (int q = 0; q < dimension; ++q) out.push_back(ParameterDef<Scalar>::mean(q));
  return out;
}

}  // namespace hmest
