#pragma once

#include "framebound/config.hpp"

#include <random>

namespace fbt {

using namespace framebound;

inline Point pt(std::initializer_list<double> xs) {
  Point p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) p(i++) = x;
  return p;
}

inline RationalMatrix rmat(std::initializer_list<std::initializer_list<Rational>> rows) {
  RationalMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (const auto& x : r) m(i, j++) = x;
    ++i;
  }
  return m;
}

inline RationalMatrix scalar(Rational x) { return rmat({{x}}); }

inline RationalVector rvec(std::initializer_list<Rational> xs) {
  RationalVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (const auto& x : xs) v(i++) = x;
  return v;
}

inline AnnihilatorPoint annihilator(const SystemSpec& sys, const RationalVector& alpha) {
  AnnihilatorPoint p;
  p.exact = alpha;
  p.alpha = alpha.unaryExpr([](const Rational& r) { return r.to_double(); });
  p.order = p.alpha.norm();
  auto groups = sys.groups();
  p.kappa = annihilating_groups(groups, p);
  return p;
}

/// Random invertible rational matrix with small entries.
inline RationalMatrix random_rational(std::mt19937_64& rng, int d) {
  std::uniform_int_distribution<int> num(-4, 4), den(1, 3);
  for (;;) {
    RationalMatrix m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = Rational(num(rng), den(rng));
    if (!determinant<Rational>(m).is_zero()) return m;
  }
}

}  // namespace fbt
