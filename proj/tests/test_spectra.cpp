#include "support.hpp"

#include <doctest.h>

using namespace fbt;

namespace {

constexpr double kPi = 3.14159265358979323846;

double dyadic_sum(const Generator& g, double w) {
  double s = 0.0;
  for (int j = -40; j <= 40; ++j) s += std::norm(g(pt({std::ldexp(w, j)})));
  return s;
}

}  // namespace

TEST_SUITE("spectra") {

TEST_CASE("built-in values") {
  Generator sh = builtin("shannon_wavelet_hat");
  CHECK(sh(pt({0.75})) == Complex(1.0));
  CHECK(sh(pt({0.25})) == Complex(0.0));

  BuiltinParams p;
  p.tau = 1;
  Generator d = builtin(Builtin::discrete_delta, p);
  CHECK(std::abs(d(pt({1.0 / 3})) - std::polar(1.0, 2 * kPi / 3)) < 1e-14);
}

TEST_CASE("Calderon identity of Meyer and Shannon") {
  Generator meyer = builtin("meyer_wavelet_hat");
  CHECK(dyadic_sum(meyer, 0.7) == doctest::Approx(1.0).epsilon(1e-10));
  Generator shannon = builtin("shannon_wavelet_hat");
  for (int i = 0; i < 200; ++i) {
    const double w = std::pow(10.0, -4.0 + 8.0 * i / 199.0);
    for (double s : {w, -w}) {
      CHECK(std::abs(dyadic_sum(meyer, s) - 1.0) < 1e-10);
      CHECK(std::abs(dyadic_sum(shannon, s) - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("Meyer auxiliary polynomial") {
  CHECK(meyer_nu(0.0) == 0.0);
  CHECK(meyer_nu(1.0) == doctest::Approx(1.0));
  CHECK(meyer_nu(-1.0) == 0.0);
  CHECK(meyer_nu(2.0) == 1.0);
  for (double x = 0; x <= 1; x += 0.01) CHECK(meyer_nu(x) + meyer_nu(1 - x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dilation actions") {
  BuiltinParams p;
  p.sigma = 1.0;
  Generator g = builtin("gaussian_hat", p);

  SmallMatrix id = SmallMatrix::Identity(1, 1);
  Generator gi = dilate(g, id);
  for (double w = -3; w <= 3; w += 0.25) CHECK(gi(pt({w})) == g(pt({w})));

  SmallMatrix two(1, 1);
  two << 2.0;
  Generator g2 = dilate(g, two);
  for (double w = -3; w <= 3; w += 0.25)
    CHECK(std::abs(g2(pt({w})) - g(pt({w / 2})) / std::sqrt(2.0)) < 1e-15);

  SmallMatrix half(1, 1);
  half << 0.5;
  Generator back = dilate(g2, half);
  for (double w = -3; w <= 3; w += 0.1) CHECK(std::abs(back(pt({w})) - g(pt({w}))) < 1e-12);
}

TEST_CASE("sheared box agrees with direct substitution") {
  BuiltinParams p;
  p.lo = pt({0, 0});
  p.hi = pt({1, 1});
  Generator box = builtin("box_hat", p);
  SmallMatrix s(2, 2);
  s << 1, 1, 0, 1;
  Generator sb = dilate(box, s);
  Eigen::Matrix2d sinv_t = Eigen::Matrix2d(s).inverse().transpose();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    Point w = pt({u(rng), u(rng)});
    Eigen::Vector2d v = sinv_t * Eigen::Vector2d(w(0), w(1));
    const bool inside = v(0) >= 0 && v(0) < 1 && v(1) >= 0 && v(1) < 1;
    CHECK(std::abs(sb(w) - Complex(inside ? 1.0 : 0.0)) < 1e-15);
    if (inside) CHECK(sb.support().may_be_nonzero(w));
  }
}

TEST_CASE("modulation round trip") {
  Generator g = builtin("meyer_wavelet_hat");
  Generator m = modulate(modulate(g, pt({0.37})), pt({-0.37}));
  for (double w = -3; w <= 3; w += 0.05) CHECK(std::abs(m(pt({w})) - g(pt({w}))) < 1e-12);
}

TEST_CASE("support hints are sound") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (const auto& name : {"meyer_wavelet_hat", "meyer_scaling_hat", "shannon_wavelet_hat", "haar_wavelet_hat",
                           "gaussian_hat", "bspline_hat"}) {
    Generator g = builtin(name);
    SmallMatrix a(1, 1);
    a << 3.0;
    Generator gd = dilate(g, a);
    for (const Generator* h : {&g, &gd}) {
      for (int i = 0; i < 2000; ++i) {
        Point w = pt({u(rng)});
        if (!h->support().may_be_nonzero(w)) CHECK(std::abs((*h)(w)) <= h->support().tail_eps + 1e-15);
      }
    }
  }
  Generator sh = builtin("shearlet_hat");
  std::uniform_real_distribution<double> v(-3.0, 3.0);
  for (int i = 0; i < 2000; ++i) {
    Point w = pt({v(rng), v(rng)});
    if (!sh.support().may_be_nonzero(w)) CHECK(sh(w) == Complex(0.0));
  }
}

TEST_CASE("dilation preserves energy") {
  Generator g = builtin("meyer_wavelet_hat");
  SmallMatrix a(1, 1);
  a << 4.0;
  Generator gd = dilate(g, a);
  auto energy = [](const Generator& h, int n) {
    const double lo = -8, hi = 8, dx = (hi - lo) / n;
    double s = 0;
    for (int i = 0; i < n; ++i) s += std::norm(h(pt({lo + (i + 0.5) * dx}))) * dx;
    return s;
  };
  const double e0 = energy(g, 1 << 16);
  CHECK(energy(gd, 1 << 16) == doctest::Approx(e0).epsilon(1e-6));
}

TEST_CASE("tensor products and unknown names") {
  Generator t = tensor(builtin("meyer_scaling_hat"), builtin("shannon_wavelet_hat"));
  CHECK(t.dim() == 2);
  CHECK(t(pt({0.1, 0.75})) == builtin("meyer_scaling_hat")(pt({0.1})));
  CHECK_FALSE(builtin_from_name("morlet").has_value());
  CHECK_THROWS(builtin("morlet"));
}

}
