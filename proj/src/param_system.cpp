#include "branchtrace/param_system.hpp"

#include <cmath>

namespace branchtrace {

Vector ParamSystem::extrapolate(std::span<const double> last, std::span<const double> before, double tau,
                                BranchNorm) const {
  Vector z(last.begin(), last.end());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += tau * (last[i] - before[i]);
  return z;
}

double arclength_distance(const ParamSystem& sys, std::span<const double> z, double mu, const ArclengthAnchor& a) {
  return std::hypot(sys.norm(z, a.which) - a.norm, mu - a.mu);
}

Vector arclength_residual(const ParamSystem& sys, std::span<const double> x, const ArclengthAnchor& a) {
  const auto z = x.first(x.size() - 1);
  const double mu = x.back();
  Vector r = sys.residual(z, mu);
  r.push_back(std::sqrt(a.beta) * (arclength_distance(sys, z, mu, a) - a.delta));
  return r;
}

DenseMatrix arclength_jacobian(const ParamSystem& sys, std::span<const double> x, const ArclengthAnchor& a) {
  const std::size_t m = x.size() - 1;
  const auto z = x.first(m);
  const double mu = x.back();
  const DenseMatrix jz = sys.jacobian(z, mu);
  const Vector jmu = sys.param_derivative(z, mu);
  const std::size_t k = jz.rows();
  DenseMatrix j(k + 1, m + 1);
  for (std::size_t r = 0; r < k; ++r) {
    auto src = jz.row(r);
    auto dst = j.row(r);
    for (std::size_t c = 0; c < m; ++c) dst[c] = src[c];
    dst[m] = jmu[r];
  }
  const double dn = sys.norm(z, a.which) - a.norm;
  const double dmu = mu - a.mu;
  const double dist = std::hypot(dn, dmu);
  if (dist > 0.0) {
    const double sb = std::sqrt(a.beta);
    const Vector g = sys.norm_gradient(z, a.which);
    for (std::size_t c = 0; c < m; ++c) j(k, c) = sb * dn / dist * g[c];
    j(k, m) = sb * dmu / dist;
  }
  return j;
}

}  // namespace branchtrace
