#pragma once

#include <array>

namespace branchtrace {

/// A point in [0,1]^d, d ≤ 2. Unused coordinates are zero.
using Point = std::array<double, 2>;

/// A scalar field sampled at one point together with its first derivatives
/// and pure second derivatives ∂²/∂x_i². Mixed partials are never needed.
struct Jet {
  double value = 0.0;
  std::array<double, 2> grad{};
  std::array<double, 2> second{};
};

}  // namespace branchtrace
