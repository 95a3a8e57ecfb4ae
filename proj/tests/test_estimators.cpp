#include "support.hpp"

#include <doctest.h>

using namespace fbt;

namespace {

SystemSpec meyer(int j = 12, Rational c = Rational(1)) {
  return wavelet_system({builtin("meyer_wavelet_hat")}, Dilation{scalar(2)}, scalar(c), -j, j);
}

SystemSpec shannon() { return wavelet_system({builtin("shannon_wavelet_hat")}, Dilation{scalar(2)}, scalar(1), -12, 12); }

SystemSpec gauss_gabor(Rational a, Rational b) {
  BuiltinParams p;
  p.sigma = 1;
  return gabor_system({builtin("gaussian_hat", p)}, scalar(a), scalar(b), 12.0);
}

Grid one(double w) { return Grid{{pt({w})}, pt({1e-3}), "single point"}; }

Grid annulus(int n) { return Grid::dilation_annulus(Eigen::MatrixXd::Constant(1, 1, 2.0), n); }

}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("N-adic Calderon sums") {
  SystemSpec s2 = nadic_counterexample(2, 12).system;
  SumEvaluator ev(s2, {});
  for (const auto& w : Grid::torus(64).points) CHECK(std::abs(ev.evaluate(w).t0 - 1.0) <= std::ldexp(1.0, -12));

  SystemSpec s3 = nadic_counterexample(3, 8).system;
  AnnihilatorPoint third = annihilator(s3, rvec({Rational(1, 3)}));
  for (const auto& w : Grid::torus(64).points) CHECK(std::abs(t_alpha_at(s3, third, w)) >= 1.0 / 6 - 1e-12);
}

TEST_CASE("Shannon t_1 against a direct double loop") {
  SystemSpec sys = shannon();
  Generator psi = builtin("shannon_wavelet_hat");
  AnnihilatorPoint a1 = annihilator(sys, rvec({1}));
  for (double w = -3.9; w < 4; w += 0.173) {
    Complex direct = 0;
    for (int j = -12; j <= 12; ++j) {
      const double step = std::ldexp(1.0, j);  // dual of 2^{-j}Z
      if (std::fmod(1.0, step) != 0.0) continue;
      direct += psi(pt({w / step})) * std::conj(psi(pt({(w + 1) / step})));
    }
    CHECK(std::abs(t_alpha_at(sys, a1, pt({w})) - direct) < 1e-14);
  }
}

TEST_CASE("Meyer and Gaussian Gabor Calderon sums") {
  auto f = calderon_sum(meyer(), annulus(128));
  for (const auto& v : f.samples) CHECK(std::abs(v.real() - 1.0) < 1e-9);

  BuiltinParams p;
  p.sigma = 1;
  Generator g = builtin("gaussian_hat", p);
  SystemSpec sys = gauss_gabor(Rational(1, 2), Rational(1, 2));
  for (double w = 0; w < 0.5; w += 0.05) {
    double direct = 0;
    for (int l = -60; l <= 60; ++l) direct += 2.0 * std::norm(g(pt({w - l / 2.0})));
    CHECK(calderon_sum(sys, one(w)).samples[0].real() == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("continuous indicator generator is not a frame") {
  BuiltinParams p;
  p.lo = pt({0});
  p.hi = pt({1});
  SystemSpec sys = continuous_ti_system({{builtin("box_hat", p), 1.0}}, 1);
  BoundsReport r = bounds(sys, Grid::interval(-1, 2, 300, 0.5), {});
  CHECK(r.Ainf.value() == 0.0);
  CHECK(r.B1.value() == 1.0);
  CHECK_FALSE(r.tight.has_value());
}

TEST_CASE("remainders of tight and non-tight systems") {
  for (const auto& sys : {shannon(), meyer()}) {
    Field r = remainder_R(sys, annulus(128), {});
    for (double v : r.values) CHECK(v < 1e-10);
  }
  Truncation t;
  t.alpha_radius = 2000;
  Field r3 = remainder_R(nadic_counterexample(3, 8).system, Grid::torus(32), t);
  CHECK(r3.divergent);
  Field a2 = remainder_abs(nadic_counterexample(2, 12).system, Grid::torus(32), t);
  CHECK(a2.divergent);
}

TEST_CASE("Meyer absolute remainder against a direct double loop") {
  SystemSpec sys = meyer();
  Generator psi = builtin("meyer_wavelet_hat");
  for (double w : {1.0, 1.3, 1.77}) {
    double direct = 0;
    for (int j = -12; j <= 12; ++j) {
      const double step = std::ldexp(1.0, j);
      const double a = std::abs(psi(pt({w / step})));
      if (a == 0) continue;
      for (long k = -64; k <= 64; ++k)
        if (k != 0) direct += a * std::abs(psi(pt({(w + k * step) / step})));
    }
    Field f = remainder_abs(sys, one(w), {});
    CHECK(f.values[0] == doctest::Approx(direct).epsilon(1e-12));
    if (w == 1.0) CHECK(direct == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("Haar remainder: nested form equals the generic sum") {
  BuiltinParams p;
  p.tail_eps = 1e-3;
  SystemSpec sys = wavelet_system({builtin("haar_wavelet_hat", p)}, Dilation{scalar(2)}, scalar(1), -6, 6);
  Truncation t;
  t.alpha_radius = 24;
  Grid g = Grid::interval(1.05, 1.95, 7, 0.0);
  Field generic = remainder_R(sys, g, t);
  Field nested = remainder_nested(sys, g, t);
  for (std::size_t i = 0; i < g.points.size(); ++i) {
    CHECK(std::isfinite(generic.values[i]));
    CHECK(nested.values[i] == doctest::Approx(generic.values[i]).epsilon(1e-9));
  }
}

TEST_CASE("Hermitian symmetry of auto-correlations") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-3, 3);
  std::vector<SystemSpec> systems = {meyer(8, Rational(1, 2)), gauss_gabor(Rational(1, 2), Rational(1, 3))};
  for (const auto& sys : systems) {
    auto groups = sys.groups();
    auto pts = enumerate_annihilator_union(groups, 6.0, 100000);
    for (int s = 0; s < 40; ++s) {
      const auto& a = pts[static_cast<std::size_t>(s) % pts.size()];
      AnnihilatorPoint neg = annihilator(sys, RationalVector(-*a.exact));
      const Point w = pt({u(rng)});
      const Complex lhs = t_alpha_at(sys, neg, w);
      const Complex rhs = std::conj(t_alpha_at(sys, a, Point(w - a.alpha)));
      CHECK(std::abs(lhs - rhs) < 1e-10);
    }
  }
}

TEST_CASE("estimate ordering invariants") {
  std::vector<std::pair<SystemSpec, Grid>> cases;
  cases.emplace_back(meyer(10, Rational(1, 2)), annulus(64));
  cases.emplace_back(gauss_gabor(Rational(1, 2), Rational(1, 2)), Grid::fundamental_domain(Eigen::MatrixXd::Constant(1, 1, 0.5), 64));
  cases.emplace_back(gauss_gabor(Rational(2, 3), Rational(1, 2)), Grid::fundamental_domain(Eigen::MatrixXd::Constant(1, 1, 0.5), 64));
  const double tol = 1e-12;
  for (const auto& [sys, grid] : cases) {
    BoundsReport r = bounds(sys, grid, {});
    for (const auto& row : r.rows) {
      CHECK(row.R <= row.R_abs + tol);
      CHECK(row.l2 <= row.t0 + row.R + tol);
    }
    CHECK(r.B2.value() <= r.B1.value() + tol);
    CHECK(r.A1.value() <= r.Ainf.value() + tol);
    CHECK(r.Aprime.value() <= r.A1.value() + tol);
    CHECK(r.B1.value() <= r.Bprime.value() + tol);
    CHECK(r.chain_ok);
  }
}

TEST_CASE("monotone alpha truncation") {
  SystemSpec sys = gauss_gabor(Rational(1, 2), Rational(1, 2));
  Grid g = Grid::fundamental_domain(Eigen::MatrixXd::Constant(1, 1, 0.5), 64);
  BoundsOptions o;
  o.refine = false;
  double a_prev = kInf, b_prev = -kInf;
  for (double radius : {2.5, 4.5, 8.5}) {
    Truncation t;
    t.alpha_radius = radius;
    BoundsReport r = bounds(sys, g, t, o);
    CHECK(r.A1.value() <= a_prev);
    CHECK(r.B1.value() >= b_prev);
    a_prev = r.A1.value();
    b_prev = r.B1.value();
  }
}

TEST_CASE("remainder is independent of the summation order") {
  SystemSpec sys = gauss_gabor(Rational(1, 2), Rational(1, 3));
  auto groups = sys.groups();
  auto pts = enumerate_annihilator_union(groups, 30.0, 100000);
  Truncation t;
  t.alpha_radius = 30.0;
  SumEvaluator ev(sys, t);
  for (double w : {0.01, 0.2, 0.41}) {
    std::vector<double> terms;
    for (const auto& a : pts)
      if (!a.is_zero()) terms.push_back(std::abs(t_alpha_at(sys, a, pt({w}))));
    double fwd = 0, bwd = 0;
    for (double x : terms) fwd += x;
    for (auto it = terms.rbegin(); it != terms.rend(); ++it) bwd += *it;
    CHECK(fwd == doctest::Approx(bwd).epsilon(1e-13));
    CHECK(ev.evaluate(pt({w})).R == doctest::Approx(fwd).epsilon(1e-12));
  }
}

TEST_CASE("dilation periodicity of nested wavelet sums") {
  SystemSpec sys = meyer(14, Rational(1, 2));
  SumEvaluator ev(sys, {});
  for (const auto& w : annulus(48).points) {
    Sample s1 = ev.evaluate(w), s2 = ev.evaluate(Point(2 * w));
    CHECK(std::abs(s1.t0 - s2.t0) < 1e-8);
    CHECK(std::abs(s1.R - s2.R) < 1e-8);
  }
}

TEST_CASE("bounds of the N-adic systems") {
  BoundsReport r2 = bounds(nadic_counterexample(2, 12).system, Grid::torus(64), {});
  const double tol = std::ldexp(1.0, -12) + 1e-10;
  for (const Estimate* e : {&r2.A1, &r2.B1, &r2.B2, &r2.Ainf}) CHECK(std::abs(e->value() - 1.0) <= tol);
  CHECK(r2.divergent_R_abs);
  CHECK(r2.tight.has_value());

  BoundsReport r3 = bounds(nadic_counterexample(3, 8).system, Grid::torus(64), {});
  CHECK(r3.B1.sentinel);
  CHECK(r3.B1.value() == kInf);
  CHECK(r3.A1.value() == -kInf);
  CHECK(r3.divergent_R);
  CHECK(r3.divergent_R_abs);
  CHECK(r3.Ainf.value() == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("Meyer bounds") {
  BoundsReport r = bounds(meyer(), annulus(256), {});
  CHECK(std::abs(r.A1.value() - 1) < 1e-6);
  CHECK(std::abs(r.B1.value() - 1) < 1e-6);
  REQUIRE(r.tight.has_value());
  CHECK(std::abs(*r.tight - 1) < 1e-8);
  // Pointwise absolute remainder reaches t0 at w = 1 (see the direct double loop above).
  CHECK(r.Aprime.value() == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(r.Bprime.value() == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("tightness") {
  auto t = tightness(shannon(), annulus(128), {});
  REQUIRE(t.has_value());
  CHECK(*t == doctest::Approx(1.0).epsilon(1e-12));

  BoundsReport g = bounds(gauss_gabor(Rational(1, 2), Rational(1, 2)),
                          Grid::fundamental_domain(Eigen::MatrixXd::Constant(1, 1, 0.5), 64), {});
  CHECK_FALSE(g.tight.has_value());
  CHECK(g.A1.value() < g.B1.value());

  // Log-midpoint scales aligned with the dyadic band: exactly k nodes fall in every octave.
  SystemSpec cw = continuous_wavelet_ti(builtin("shannon_wavelet_hat"), 1.0 / 64, 64.0, 12 * 16);
  auto tc = tightness(cw, Grid::interval(1.0 / 16, 16.0, 200, 0.5), {});
  REQUIRE(tc.has_value());
  CHECK(*tc == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("time side and frequency side agree for the self-dual Gaussian") {
  GaborTimeSide ts{{space_gaussian(1.0)}, Rational(1, 2), Rational(1, 2)};
  std::vector<double> x;
  for (int i = 0; i < 256; ++i) x.push_back(0.5 * (i + 0.5) / 256);
  TimeBounds tb = time_side_bounds(ts, x, 12.0);
  BoundsReport r = bounds(gauss_gabor(Rational(1, 2), Rational(1, 2)),
                          Grid::fundamental_domain(Eigen::MatrixXd::Constant(1, 1, 0.5), 256), {});
  CHECK(tb.A1 == doctest::Approx(r.A1.value()).epsilon(1e-4));
  CHECK(tb.B1 == doctest::Approx(r.B1.value()).epsilon(1e-4));
  CHECK(tb.Ainf == doctest::Approx(r.Ainf.value()).epsilon(1e-4));
}

TEST_CASE("band safety") {
  SystemSpec sys = wavelet_system({builtin("meyer_wavelet_hat")}, Dilation{scalar(2)}, scalar(1), -2, 2);
  CHECK_THROWS_AS(check_band(sys, Grid::interval(1.0, 16.0, 64)), std::domain_error);
  CHECK_NOTHROW(check_band(sys, Grid::interval(1.0, 2.0, 64)));
}

}
