#include "support.hpp"

#include <doctest.h>

#include <set>

using namespace fbt;

TEST_SUITE("lattice") {

TEST_CASE("dual basis of small lattices") {
  CHECK(LatticeQ(rmat({{1, 0}, {0, 1}})).dual_basis() == rmat({{1, 0}, {0, 1}}));
  CHECK(LatticeQ(rmat({{2, 0}, {0, 2}})).dual_basis() == rmat({{Rational(1, 2), 0}, {0, Rational(1, 2)}}));
  CHECK(LatticeQ(rmat({{1, 1}, {0, 1}})).dual_basis() == rmat({{1, 0}, {-1, 1}}));
}

TEST_CASE("membership") {
  CHECK(LatticeQ::integer(2).contains(rvec({3, -5})));
  CHECK_FALSE(LatticeQ(rmat({{Rational(1, 2), 0}, {0, Rational(1, 2)}})).contains(rvec({Rational(1, 4), 0})));

  Eigen::MatrixXd root2(1, 1);
  root2 << std::sqrt(2.0);
  Eigen::VectorXd one(1);
  one << 1.0;
  CHECK_FALSE(LatticeR(root2).contains(one, 1e-9));
}

TEST_CASE("irrational dilation without certificate is rejected") {
  Eigen::MatrixXd a(1, 1);
  a << std::sqrt(2.0);
  Dilation dil{a, false};
  CHECK_THROWS_AS(wavelet_system({builtin("meyer_wavelet_hat")}, dil, scalar(1), -2, 2), std::invalid_argument);
  dil.disjoint_certificate = true;
  SystemSpec sys = wavelet_system({builtin("meyer_wavelet_hat")}, dil, scalar(1), -2, 2);
  CHECK(sys.disjoint_certified);
}

TEST_CASE("degenerate lattice") {
  CHECK_THROWS_AS(LatticeQ(rmat({{1, 2}, {2, 4}})), std::domain_error);
}

TEST_CASE("annihilators of Z in a ball") {
  std::vector<TranslationGroup> g = {TranslationGroup::exact(LatticeQ::integer(1))};
  auto pts = enumerate_annihilator_union(g, 2.5, 1000);
  std::set<double> vals;
  for (const auto& p : pts) {
    vals.insert(p.alpha(0));
    CHECK(p.kappa == std::vector<int>{0});
  }
  CHECK(vals == std::set<double>{-2, -1, 0, 1, 2});
  CHECK(pts.front().is_zero());
}

TEST_CASE("kappa in a dyadic nest matches per-lattice membership") {
  std::vector<TranslationGroup> g;
  std::vector<LatticeQ> duals;
  for (int j = -2; j <= 2; ++j) {
    LatticeQ l(scalar(j >= 0 ? Rational(1, 1 << j) : Rational(1 << -j)));
    g.push_back(TranslationGroup::exact(l));
    duals.push_back(l.dual());
  }
  auto pts = enumerate_annihilator_union(g, 3.0, 10000);
  bool saw_quarter = false;
  for (const auto& p : pts) {
    std::vector<int> expect;
    for (int i = 0; i < 5; ++i)
      if (duals[static_cast<std::size_t>(i)].contains(*p.exact)) expect.push_back(i);
    CHECK(p.kappa == expect);
    if ((*p.exact)(0) == Rational(1, 4)) {
      saw_quarter = true;
      CHECK(p.kappa == std::vector<int>{0});
    }
  }
  CHECK(saw_quarter);
}

TEST_CASE("kappa on the torus for 3-adic moduli") {
  std::vector<TranslationGroup> g;
  for (std::int64_t m = 3; m <= 81; m *= 3) g.push_back(TranslationGroup::modular(m));
  auto pts = enumerate_annihilator_union(g, 81, 1000);
  CHECK(pts.size() == 81);
  for (const auto& p : pts) {
    const Rational a = (*p.exact)(0);
    CHECK(a >= Rational(0));
    CHECK(a < Rational(1));
    int m = 0;
    for (std::int64_t d = a.den(); d > 1; d /= 3) ++m;
    std::vector<int> expect;
    for (int j = std::max(m, 1); j <= 4; ++j) expect.push_back(j - 1);
    CHECK(p.kappa == expect);
  }
}

TEST_CASE("nested difference sets") {
  auto q1 = difference_points(LatticeQ::integer(1), LatticeQ(scalar(2)), 4.0);
  std::set<double> got;
  for (const auto& q : q1) got.insert(q(0).to_double());
  CHECK(got == std::set<double>{-3, -1, 1, 3});

  const RationalMatrix a = rmat({{4, 0}, {0, 2}});
  auto q2 = difference_points(LatticeQ::integer(2), LatticeQ(a), 1.5);
  std::size_t expect = 0;
  for (int x = -2; x <= 2; ++x)
    for (int y = -2; y <= 2; ++y)
      if (x * x + y * y <= 2.25 && !(x % 4 == 0 && y % 2 == 0)) ++expect;
  CHECK(q2.size() == expect);
  for (const auto& q : q2) CHECK_FALSE((q(0).num() % 4 == 0 && q(1).num() % 2 == 0));

  CHECK_THROWS_AS(difference_points(LatticeQ::integer(2), LatticeQ(rmat({{Rational(1, 2), 0}, {0, 1}})), 2.0),
                  std::invalid_argument);
}

TEST_CASE("random rational lattices: covolume duality and dual of dual") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 1 + trial % 3;
    LatticeQ l(random_rational(rng, d));
    CHECK(l.covolume() * l.dual().covolume() == Rational(1));
    CHECK(l.dual().dual() == l);
  }
}

TEST_CASE("membership consistency on random lattices") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> coord(-6, 6);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 3;
    LatticeQ l(random_rational(rng, d));
    for (int s = 0; s < 20; ++s) {
      RationalVector nu(d);
      for (int i = 0; i < d; ++i) nu(i) = coord(rng);
      RationalVector x = l.basis() * nu;
      CHECK(l.contains(x));
      RationalVector off = x;
      off(0) += Rational(1, 1000003);
      CHECK_FALSE(l.contains(off));
    }
  }
}

TEST_CASE("single-lattice enumeration equals dual points in the ball") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 1 + trial % 2;
    LatticeQ l(random_rational(rng, d));
    std::vector<TranslationGroup> g = {TranslationGroup::exact(l)};
    const double r = 3.0;
    auto pts = enumerate_annihilator_union(g, r, 100000);

    const Eigen::MatrixXd dual = to_double(l.dual_basis());
    // nu = C^T x, so |nu_i| <= |row i of C^T| r
    const Eigen::MatrixXd ct = to_double(l.basis()).transpose();
    auto key = [](const Eigen::VectorXd& x) {
      std::vector<long long> k;
      for (Eigen::Index i = 0; i < x.size(); ++i) k.push_back(std::llround(x(i) * 1e9));
      return k;
    };
    std::set<std::vector<long long>> expect, got;
    const long b0 = static_cast<long>(ct.row(0).norm() * r) + 1;
    const long b1 = d == 2 ? static_cast<long>(ct.row(1).norm() * r) + 1 : 0;
    for (long a = -b0; a <= b0; ++a)
      for (long b = -b1; b <= b1; ++b) {
        Eigen::VectorXd nu(d);
        nu(0) = static_cast<double>(a);
        if (d == 2) nu(1) = static_cast<double>(b);
        Eigen::VectorXd x = dual * nu;
        if (x.norm() <= r * (1 - 1e-9)) expect.insert(key(x));
      }
    for (const auto& p : pts)
      if (p.alpha.norm() <= r * (1 - 1e-9)) got.insert(key(Eigen::VectorXd(p.alpha)));
    CHECK(got == expect);
  }
}

TEST_CASE("kappa of the origin is every layer") {
  std::vector<TranslationGroup> g = {TranslationGroup::exact(LatticeQ::integer(1)),
                                     TranslationGroup::exact(LatticeQ(scalar(Rational(1, 3)))),
                                     TranslationGroup::exact(LatticeQ(scalar(5)))};
  auto pts = enumerate_annihilator_union(g, 1.0, 1000);
  REQUIRE(pts.front().is_zero());
  CHECK(pts.front().kappa == std::vector<int>{0, 1, 2});
}

}
