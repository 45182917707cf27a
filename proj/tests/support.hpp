#ifndef HETVR_TESTS_SUPPORT_HPP
#define HETVR_TESTS_SUPPORT_HPP

#include <functional>

#include "hetvr/problems.hpp"
#include "hetvr/sampling.hpp"

namespace hetvr::testing {

inline Vector random_vector(Index n, SeededRng& rng, double scale = 1.0) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = scale * rng.normal();
  return v;
}

// Central differences, independent of any analytic gradient.
inline Vector numeric_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                               double h = 1e-5) {
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    xp[j] = x[j] + h;
    const double fp = f(xp);
    xp[j] = x[j] - h;
    const double fm = f(xp);
    xp[j] = x[j];
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace hetvr::testing

#endif  // HETVR_TESTS_SUPPORT_HPP
