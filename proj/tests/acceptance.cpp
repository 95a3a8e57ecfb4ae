// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <sstream>

using namespace fbt;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = true;
  std::vector<std::string> details;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

std::string num(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("framebound-acceptance-" + name);
  std::filesystem::remove_all(p);
  return p.string();
}

RunSummary run_scenario(const std::string& name) {
  std::ostringstream log;
  return run_single(scenario(name), scratch(name), 0, log);
}

Verdict criterion1() {
  Verdict v;
  const auto t0 = Clock::now();
  RunSummary s = run_scenario("nadic2");
  const double secs = seconds_since(t0);
  const double tol = std::ldexp(1.0, -12) + 1e-10;
  const BoundsReport& r = s.report;
  for (auto [name, e] : {std::pair{"A1", &r.A1}, {"B1", &r.B1}, {"Ainf", &r.Ainf}, {"B2", &r.B2}})
    v.require(std::abs(e->value() - 1) <= tol, std::string(name) + " = " + num(e->value()));
  v.require(s.oracle && std::abs(s.oracle->A - 1) <= 1e-10 && std::abs(s.oracle->B - 1) <= 1e-10,
            "oracle (" + num(s.oracle->A) + ", " + num(s.oracle->B) + ")");
  v.require(secs < 10, "runtime " + num(secs) + " s");
  return v;
}

Verdict criterion2() {
  Verdict v;
  RunSummary s = run_scenario("nadic3");
  const BoundsReport& r = s.report;
  v.require(r.B1.sentinel && r.B1.value() == kInf, "B1 sentinel (B1 = " + num(r.B1.value()) + ")");
  v.require(r.B2.sentinel && r.B2.value() == kInf, "B2 sentinel (B2 = " + num(r.B2.value()) + ")");
  v.require(r.divergent_R_abs, "absolute remainder divergence flag");

  SystemSpec sys = build_system(scenario("nadic3").system);
  Grid g = Grid::torus(64);
  std::size_t checked = 0;
  double worst = kInf;
  bool ok = true;
  std::int64_t pm = 1;
  for (int m = 1; m <= 4; ++m) {
    pm *= 3;
    for (std::int64_t k = 1; k < pm; ++k) {
      if (k % 3 == 0) continue;
      AnnihilatorPoint a = annihilator(sys, rvec({Rational(k, pm)}));
      for (const auto& w : g.points) {
        const double t = std::abs(t_alpha_at(sys, a, w));
        const double ratio = t * static_cast<double>(pm) * 2;
        worst = std::min(worst, ratio);
        ok = ok && t >= 0.5 / static_cast<double>(pm) - 1e-12;
      }
      ++checked;
    }
  }
  v.require(ok, "|t_{k 3^-m}| >= 3^-m / 2 for " + std::to_string(checked) + " (k, m), m <= 4 (min ratio " + num(worst) + ")");
  v.require(s.oracle && std::abs(s.oracle->A - 1) <= 1e-10 && std::abs(s.oracle->B - 1) <= 1e-10,
            "oracle (" + num(s.oracle->A) + ", " + num(s.oracle->B) + ")");
  return v;
}

Verdict criterion3() {
  Verdict v;
  RunSummary s = run_scenario("meyer");
  const BoundsReport& r = s.report;
  v.require(std::abs(r.A1.value() - 1) <= 1e-6, "A1 = " + num(r.A1.value()));
  v.require(std::abs(r.B1.value() - 1) <= 1e-6, "B1 = " + num(r.B1.value()));
  v.require(r.Aprime.value() <= -0.9, "A' = " + num(r.Aprime.value()) + " (target <= -0.9)");
  v.require(r.Bprime.value() >= 2.9 && r.Bprime.value() <= 3.1, "B' = " + num(r.Bprime.value()) + " (target [2.9, 3.1])");
  v.require(r.tight && std::abs(*r.tight - 1) <= 1e-8, "tightness = " + (r.tight ? num(*r.tight) : std::string("none")));
  return v;
}

Verdict criterion4() {
  Verdict v;
  std::mt19937_64 rng(20240601);
  const std::vector<Rational> steps = {Rational(1, 2), Rational(1, 3), Rational(2, 3), Rational(1, 4), Rational(3, 4),
                                       Rational(3, 5)};
  std::uniform_int_distribution<std::size_t> pick(0, steps.size() - 1);
  std::uniform_real_distribution<double> sigma(0.7, 1.4), phase(-0.5, 0.5), amp(0.2, 0.9);
  int systems = 0, passed = 0, attempts = 0;

  // Shift-invariant: Gaussian Gabor systems, dual Gramian fibers as the oracle.
  int gabor = 0;
  while (gabor < 12 && attempts < 200) {
    ++attempts;
    BuiltinParams p;
    p.sigma = sigma(rng);
    const Rational a = steps[pick(rng)], b = steps[pick(rng)];
    SystemSpec sys = gabor_system({builtin("gaussian_hat", p)}, scalar(a), scalar(b));
    const Eigen::MatrixXd period = to_double(*sys.period);
    BoundsReport r = bounds(sys, Grid::fundamental_domain(period, 64), {});
    if (!(r.A1.value() > 0)) continue;
    FiberBounds fb = fiber_bounds(sys, Grid::fundamental_domain(period, 32));
    ChainVerdict c = verify_chain(r, OptimalBounds{fb.A, fb.B, 0, "fiber"});
    ++gabor;
    ++systems;
    if (c.ok) ++passed;
    else v.details.push_back("FAIL gabor sigma=" + num(p.sigma) + " a=" + a.str() + " b=" + b.str() + ": " + c.summary);
  }

  // Dyadic wavelets: Meyer plus a phase-shifted, scaled copy; discretized frame operator as the oracle.
  int wav = 0;
  while (wav < 12 && attempts < 400) {
    ++attempts;
    BuiltinParams p;
    p.amplitude = amp(rng);
    Generator g2 = apply({Phase{pt({phase(rng)})}}, builtin(Builtin::meyer_wavelet_hat, p));
    const Rational c = rng() % 2 ? Rational(1) : Rational(1, 2);
    SystemSpec sys = wavelet_system({builtin("meyer_wavelet_hat"), g2}, Dilation{scalar(2)}, scalar(c), -12, 12);
    BoundsReport r = bounds(sys, Grid::dilation_annulus(Eigen::MatrixXd::Constant(1, 1, 2.0), 128), {});
    if (!(r.A1.value() > 0)) continue;
    OptimalBounds ob = optimal_bounds(discretize(sys, 512, 8));
    ChainVerdict cv = verify_chain(r, ob);
    ++wav;
    ++systems;
    if (cv.ok) ++passed;
    else v.details.push_back("FAIL wavelet amp=" + num(p.amplitude) + " c=" + c.str() + ": " + cv.summary);
  }
  v.require(systems >= 20, std::to_string(systems) + " systems with A1 > 0 (" + std::to_string(gabor) + " Gabor, " +
                               std::to_string(wav) + " wavelet)");
  v.require(passed == systems, std::to_string(passed) + "/" + std::to_string(systems) + " chains hold at 2%");
  return v;
}

Verdict criterion5() {
  Verdict v;
  const auto t0 = Clock::now();
  SystemSpec meyer_half = wavelet_system({builtin("meyer_wavelet_hat")}, Dilation{scalar(2)}, scalar(Rational(1, 2)), -14, 14);
  BuiltinParams gp;
  gp.sigma = 1;
  SystemSpec gabor = gabor_system({builtin("gaussian_hat", gp)}, scalar(Rational(1, 2)), scalar(Rational(1, 3)));

  // Hermitian symmetry.
  double herm = 0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (const SystemSpec* sys : {&meyer_half, &gabor}) {
    auto groups = sys->groups();
    auto pts = enumerate_annihilator_union(groups, 6.0, 100000);
    for (const auto& a : pts) {
      AnnihilatorPoint neg = annihilator(*sys, RationalVector(-*a.exact));
      const Point w = pt({u(rng)});
      herm = std::max(herm, std::abs(t_alpha_at(*sys, neg, w) - std::conj(t_alpha_at(*sys, a, Point(w - a.alpha)))));
    }
  }
  v.require(herm < 1e-10, "Hermitian symmetry residue " + num(herm));

  // R <= R~ pointwise and B2 <= B1.
  bool rle = true, b2le = true;
  for (const auto& [sys, grid] :
       {std::pair{&meyer_half, Grid::dilation_annulus(Eigen::MatrixXd::Constant(1, 1, 2.0), 128)},
        std::pair{&gabor, Grid::fundamental_domain(Eigen::MatrixXd::Constant(1, 1, 1.0 / 3), 128)}}) {
    BoundsReport r = bounds(*sys, grid, {});
    for (const auto& row : r.rows) rle = rle && row.R <= row.R_abs + 1e-12;
    b2le = b2le && r.B2.value() <= r.B1.value() + 1e-12;
  }
  v.require(rle, "R <= R_abs at every grid point");
  v.require(b2le, "B2 <= B1");

  // kappa(0) = J.
  auto groups = meyer_half.groups();
  auto pts = enumerate_annihilator_union(groups, 1.0, 100000);
  std::vector<int> all(meyer_half.layers.size());
  std::iota(all.begin(), all.end(), 0);
  v.require(pts.front().is_zero() && pts.front().kappa == all, "kappa(0) contains all " + std::to_string(all.size()) + " layers");

  // Dual of dual.
  bool dd = true;
  std::mt19937_64 lr(9);
  for (int i = 0; i < 50; ++i) {
    LatticeQ l(random_rational(lr, 1 + i % 3));
    dd = dd && l.dual().dual() == l && l.covolume() * l.dual().covolume() == Rational(1);
  }
  v.require(dd, "dual of dual equals the lattice (50 random rational lattices)");

  // Dilation periodicity of t0 and R.
  double per = 0;
  SumEvaluator ev(meyer_half, {});
  for (const auto& w : Grid::dilation_annulus(Eigen::MatrixXd::Constant(1, 1, 2.0), 64).points) {
    Sample s1 = ev.evaluate(w), s2 = ev.evaluate(Point(2 * w));
    per = std::max({per, std::abs(s1.t0 - s2.t0), std::abs(s1.R - s2.R)});
  }
  v.require(per < 1e-8, "dilation periodicity residue " + num(per));

  // Tight systems have R = 0.
  double rmax = 0;
  for (const char* name : {"meyer_wavelet_hat", "shannon_wavelet_hat"}) {
    SystemSpec sys = wavelet_system({builtin(name)}, Dilation{scalar(2)}, scalar(1), -12, 12);
    Field f = remainder_R(sys, Grid::dilation_annulus(Eigen::MatrixXd::Constant(1, 1, 2.0), 128), {});
    for (double x : f.values) rmax = std::max(rmax, x);
  }
  v.require(rmax < 1e-10, "tight systems: max R = " + num(rmax));
  const double secs = seconds_since(t0);
  v.require(secs < 120, "runtime " + num(secs) + " s");
  return v;
}

Verdict criterion6() {
  Verdict v;
  // psi and its half-step translate on Z: layer-j cross terms carry 1 + e^{i pi k}, which vanishes for odd k.
  Generator psi = builtin("meyer_wavelet_hat");
  Generator shifted = apply({Phase{pt({-0.5})}}, psi);
  SystemSpec sys = wavelet_system({psi, shifted}, Dilation{scalar(2)}, scalar(1), -12, 12);
  BoundsReport r = bounds(sys, Grid::dilation_annulus(Eigen::MatrixXd::Constant(1, 1, 2.0), 256), {});
  OptimalBounds ob = optimal_bounds(discretize(sys, 512, 8));
  const double gain = 1 - r.B1.value() / r.Bprime.value();
  v.require(r.B1.value() <= 0.9 * r.Bprime.value(),
            "B1 = " + num(r.B1.value()) + ", B' = " + num(r.Bprime.value()) + " (gain " + num(100 * gain) + "%)");
  const double slack = 0.02 * ob.B;
  v.require(ob.B <= r.B1.value() + slack && ob.B <= r.Bprime.value() + slack,
            "B_opt = " + num(ob.B) + " bracketed by B1 and B'");
  v.require(verify_chain(r, ob).ok, "snug chain holds");
  return v;
}

Verdict criterion7() {
  Verdict v;
  struct Case {
    const char* name;
    BuiltinParams params;
    double lo, hi;
  };
  BuiltinParams none, box, gauss;
  box.lo = pt({0});
  box.hi = pt({1});
  gauss.sigma = 1;
  const std::vector<Case> cases = {{"gaussian_hat", gauss, -2, 2},        {"box_hat", box, -1, 2},
                                   {"box_hat", box, 0.1, 0.9},            {"shannon_wavelet_hat", none, 0.5, 0.99},
                                   {"shannon_wavelet_hat", none, 0.25, 1}, {"meyer_wavelet_hat", none, 0.4, 1.2},
                                   {"meyer_wavelet_hat", none, 0.2, 1.2}};
  int agree = 0;
  for (const auto& c : cases) {
    Generator g = builtin(c.name, c.params);
    SystemSpec sys = continuous_ti_system({{g, 1.0}}, 1);
    BoundsReport r = bounds(sys, Grid::interval(c.lo, c.hi, 256, 0.5), {});
    const bool verdict = r.Ainf.value() > 0 && std::isfinite(r.B1.value());
    double inf = kInf;
    const int n = 20000;
    for (int i = 0; i < n; ++i) inf = std::min(inf, std::norm(g(pt({c.lo + (c.hi - c.lo) * (i + 0.5) / n}))));
    const bool truth = inf > 1e-12;
    if (verdict == truth) ++agree;
    else v.details.push_back(std::string("FAIL ") + c.name + " on [" + num(c.lo) + ", " + num(c.hi) + "]");
  }
  v.require(agree == static_cast<int>(cases.size()),
            "single-generator verdicts match ess inf |g^|^2 > 0 (" + std::to_string(agree) + "/" +
                std::to_string(cases.size()) + ")");

  AlphaShearletOptions coarse;
  coarse.alpha = 0.5;
  AlphaShearletOptions fine = coarse;
  fine.n_a *= 2;
  fine.n_r *= 2;
  Generator psi = builtin("shearlet_hat");
  Grid g = Grid::box(pt({2, -1}), pt({4, 1}), {24, 24}, 0.5);
  auto t1 = calderon_sum(alpha_shearlet_ti(psi, coarse), g), t2 = calderon_sum(alpha_shearlet_ti(psi, fine), g);
  double rel = 0;
  for (std::size_t i = 0; i < g.points.size(); ++i)
    rel = std::max(rel, std::abs(t1.samples[i].real() - t2.samples[i].real()) / std::abs(t2.samples[i].real()));
  v.require(rel <= 0.01, "alpha-shearlet t0 table: max relative change under quadrature doubling " + num(100 * rel) + "%");
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Verdict (*)()>> criteria = {
      {"nadic2 bounds and oracle", criterion1},       {"nadic3 divergence and oracle", criterion2},
      {"Meyer estimates", criterion3},                 {"snug-chain property suite", criterion4},
      {"invariant suite", criterion5},                 {"phase cancellation", criterion6},
      {"continuous TI", criterion7}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    std::cout << "criterion " << i + 1 << ": " << (v.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << "\n";
    for (const auto& d : v.details) std::cout << "    " << d << "\n";
    std::cout.flush();
    if (!v.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
