#include "framebound/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace framebound {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string num(double x) {
  std::ostringstream os;
  os.precision(8);
  os << x;
  return os.str();
}

// -------------------------------------------------------------- Z windows

struct Delta {
  std::int64_t position;
};

// Greedy offsets recomputed inside [-n/2, n/2): tau_j is the first uncovered integer in
// the order 0, 1, -1, 2, -2, ...; layers continue until the window is covered.
std::vector<std::int64_t> window_offsets(std::int64_t base, std::int64_t n, std::vector<Delta>& out) {
  const std::int64_t lo = -n / 2, hi = lo + n;  // [lo, hi)
  std::vector<char> covered(static_cast<std::size_t>(n), 0);
  std::int64_t remaining = n;
  std::vector<std::int64_t> tau;
  __int128 modulus = 1;
  while (remaining > 0) {
    if (modulus < n) modulus *= base;  // beyond n every coset meets the window at most once
    std::int64_t t = 0;
    bool found = false;
    for (std::int64_t r = 0; r <= n && !found; ++r) {
      for (std::int64_t cand : {r, -r}) {
        if (cand < lo || cand >= hi) continue;
        if (!covered[static_cast<std::size_t>(cand - lo)]) {
          t = cand;
          found = true;
          break;
        }
      }
    }
    if (!found) break;
    tau.push_back(t);
    // members of t + modulus * Z inside the window
    if (modulus >= n) {
      covered[static_cast<std::size_t>(t - lo)] = 1;
      --remaining;
      out.push_back({t});
      continue;
    }
    const auto m = static_cast<std::int64_t>(modulus);
    std::int64_t first = t - ((t - lo) / m) * m;
    for (std::int64_t p = first; p < hi; p += m) {
      out.push_back({p});
      if (!covered[static_cast<std::size_t>(p - lo)]) {
        covered[static_cast<std::size_t>(p - lo)] = 1;
        --remaining;
      }
    }
  }
  return tau;
}

FiniteModel discretize_integer(const SystemSpec& sys, int n) {
  FiniteModel m;
  m.domain = Domain::integer;
  m.n = n;
  m.dim = 1;
  const std::int64_t lo = -n / 2, hi = lo + n;
  std::vector<Delta> deltas;
  if (sys.nadic_base > 0) {
    m.window_tau = window_offsets(sys.nadic_base, n, deltas);
    const std::size_t overlap = std::min(m.window_tau.size(), sys.tau.size());
    for (std::size_t j = 0; j < overlap; ++j) {
      if (std::llabs(sys.tau[j]) >= n / 2) break;
      if (sys.tau[j] != m.window_tau[j])
        throw std::logic_error("N-adic offsets disagree at j=" + std::to_string(j + 1) + ": system " +
                               std::to_string(sys.tau[j]) + ", window " + std::to_string(m.window_tau[j]));
    }
    m.provenance = "N-adic window [" + std::to_string(lo) + ", " + std::to_string(hi) + "), N=" +
                   std::to_string(sys.nadic_base) + ", " + std::to_string(m.window_tau.size()) + " layers";
  } else {
    for (const auto& l : sys.layers) {
      if (l.group.kind() != TranslationGroup::Kind::modular)
        throw std::invalid_argument("oracle on Z needs subgroups N*Z");
      const std::int64_t mod = l.group.modular_lattice().modulus;
      for (const auto& c : l.components) {
        if (!c.g.character()) throw std::invalid_argument("oracle on Z supports delta generators only");
        const std::int64_t t = *c.g.character();
        std::int64_t r = ((t - lo) % mod + mod) % mod;
        for (std::int64_t p = lo + r; p < hi; p += mod) deltas.push_back({p});
      }
    }
    m.provenance = "window [" + std::to_string(lo) + ", " + std::to_string(hi) + ")";
  }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i)
    trip.emplace_back(static_cast<int>(i), static_cast<int>(deltas[i].position - lo), 1.0);
  m.synthesis.resize(static_cast<Eigen::Index>(deltas.size()), n);
  m.synthesis.setFromTriplets(trip.begin(), trip.end());
  m.elements = deltas.size();
  Eigen::SparseMatrix<double> s = Eigen::SparseMatrix<double>(m.synthesis.transpose()) * m.synthesis;
  m.frame_sparse = s;
  return m;
}

// -------------------------------------------------------------- R^d windows

// frac(x) for a rational x, in [0, 1).
double frac(const Rational& x) {
  const Rational f = x - Rational(x.floor());
  return f.to_double();
}

FiniteModel discretize_real(const SystemSpec& sys, int n, double rate, const DiscretizeOptions& opt) {
  const int d = sys.dim;
  if (d > 2) throw std::invalid_argument("discretize supports dimension 1 and 2");
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("window size must be even");
  Rational L;
  try {
    L = Rational::from_double(static_cast<double>(n) / rate, 1e-12, 1'000'000);
  } catch (const std::domain_error&) {
    throw std::invalid_argument("incommensurable lattices: window length n/rate is not rational");
  }
  FiniteModel m;
  m.domain = Domain::real;
  m.n = n;
  m.rate = rate;
  m.dim = d;

  // frequencies k / L, k in [-n/2, n/2)^d
  std::vector<IntVec> ks;
  IntVec klo = IntVec::Constant(d, -n / 2), khi = IntVec::Constant(d, n / 2 - 1);
  const double ld = L.to_double();
  for_each_in_box(klo, khi, [&](const IntVec& k) {
    Point w = k.cast<double>() / ld;
    if (k.isZero()) {
      bool any = false;
      for (const auto& l : sys.layers)
        for (const auto& c : l.components)
          if (c.g(w) != Complex(0.0)) any = true;
      if (!any) {
        m.notes.push_back("zero frequency dropped: every generator vanishes there");
        return;
      }
    }
    ks.push_back(k);
    m.frequencies.push_back(w);
  });
  const Eigen::Index nf = static_cast<Eigen::Index>(ks.size());
  m.frame = Eigen::MatrixXcd::Zero(nf, nf);
  Rational ld_pow(1);
  for (int i = 0; i < d; ++i) ld_pow *= L;

  std::size_t used = 0;
  for (std::size_t li = 0; li < sys.layers.size(); ++li) {
    const Layer& layer = sys.layers[li];
    std::vector<Eigen::Index> idx;
    for (Eigen::Index a = 0; a < nf; ++a)
      for (const auto& c : layer.components)
        if (c.g(m.frequencies[static_cast<std::size_t>(a)]) != Complex(0.0)) {
          idx.push_back(a);
          break;
        }
    if (idx.empty()) continue;
    ++used;
    if (layer.group.kind() == TranslationGroup::Kind::full) {
      for (auto a : idx)
        for (const auto& c : layer.components)
          m.frame(a, a) += c.weight * std::norm(c.g(m.frequencies[static_cast<std::size_t>(a)]));
      continue;
    }
    if (layer.group.kind() != TranslationGroup::Kind::lattice || !layer.group.exact_lattice())
      throw std::invalid_argument("oracle restricted to rational data; layer " + layer.label + " gives estimates only");
    const LatticeQ& lat = *layer.group.exact_lattice();
    const RationalMatrix cinv = inverse<Rational>(lat.basis());
    for (int i = 0; i < d; ++i) {
      RationalVector e = RationalVector::Zero(d);
      e(i) = L;
      const RationalVector c = cinv * e;
      for (int r = 0; r < d; ++r)
        if (!c(r).is_integer())
          throw std::invalid_argument("incommensurable lattices: L*e" + std::to_string(i + 1) + " not in the lattice of layer " +
                                      layer.label);
    }
    const Rational reps_q = ld_pow / lat.covolume();
    if (!reps_q.is_integer()) throw std::invalid_argument("incommensurable lattices: non-integral coset count");
    const auto reps = reps_q.num();
    const double cost = static_cast<double>(idx.size()) * static_cast<double>(idx.size()) * static_cast<double>(reps);
    const auto sz = static_cast<Eigen::Index>(idx.size());

    if (!opt.force_closed_form && cost <= opt.brute_force_budget) {
      // coset representatives gamma = C nu in [0, L)^d
      std::vector<RationalVector> gammas;
      const Eigen::MatrixXd cinv_d = to_double(cinv);
      IntVec lo(d), hi(d);
      for (int r = 0; r < d; ++r) {
        double mn = 0, mx = 0;
        for (int c = 0; c < d; ++c) {
          const double v = cinv_d(r, c) * ld;
          mn += std::min(0.0, v);
          mx += std::max(0.0, v);
        }
        lo(r) = static_cast<std::int64_t>(std::floor(mn)) - 1;
        hi(r) = static_cast<std::int64_t>(std::ceil(mx)) + 1;
      }
      for_each_in_box(lo, hi, [&](const IntVec& nu) {
        RationalVector nq(d);
        for (int i = 0; i < d; ++i) nq(i) = Rational(nu(i));
        RationalVector g = lat.basis() * nq;
        for (int i = 0; i < d; ++i)
          if (g(i) < Rational(0) || !(g(i) < L)) return;
        gammas.push_back(std::move(g));
      });
      if (static_cast<std::int64_t>(gammas.size()) != reps)
        throw std::logic_error("coset representative count mismatch on layer " + layer.label);
      // phase(a, r) = exp(-2 pi i gamma_r . k_a / L)
      Eigen::MatrixXcd phase(sz, static_cast<Eigen::Index>(gammas.size()));
      for (Eigen::Index a = 0; a < sz; ++a) {
        const IntVec& k = ks[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])];
        for (std::size_t r = 0; r < gammas.size(); ++r) {
          Rational s(0);
          for (int i = 0; i < d; ++i) s += gammas[r](i) * Rational(k(i));
          phase(a, static_cast<Eigen::Index>(r)) = std::polar(1.0, -kTwoPi * frac(s / L));
        }
      }
      Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(sz, sz);
      for (const auto& c : layer.components) {
        Eigen::VectorXcd gv(sz);
        for (Eigen::Index a = 0; a < sz; ++a) gv(a) = c.g(m.frequencies[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])]);
        const Eigen::MatrixXcd v = gv.asDiagonal() * phase;
        acc.noalias() += (c.weight / ld_pow.to_double()) * (v * v.adjoint());
      }
      for (Eigen::Index a = 0; a < sz; ++a)
        for (Eigen::Index b = 0; b < sz; ++b) m.frame(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]) += acc(a, b);
    } else {
      // sum over cosets collapses to covol^{-1} on k_a - k_b in L Gamma^perp
      const RationalMatrix ct = lat.basis().transpose();
      const double inv_cov = 1.0 / lat.covolume().to_double();
      std::vector<Eigen::VectorXcd> gv;
      std::vector<double> wt;
      for (const auto& c : layer.components) {
        Eigen::VectorXcd v(sz);
        for (Eigen::Index a = 0; a < sz; ++a) v(a) = c.g(m.frequencies[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])]);
        gv.push_back(std::move(v));
        wt.push_back(c.weight);
      }
      for (Eigen::Index a = 0; a < sz; ++a) {
        const IntVec& ka = ks[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])];
        for (Eigen::Index b = 0; b < sz; ++b) {
          const IntVec& kb = ks[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
          bool member = true;
          for (int r = 0; r < d && member; ++r) {
            Rational s(0);
            for (int c = 0; c < d; ++c) s += ct(r, c) * Rational(ka(c) - kb(c));
            member = (s / L).is_integer();
          }
          if (!member) continue;
          Complex v(0.0);
          for (std::size_t p = 0; p < gv.size(); ++p) v += wt[p] * gv[p](a) * std::conj(gv[p](b));
          m.frame(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]) += inv_cov * v;
        }
      }
    }
  }
  m.elements = used;
  std::ostringstream os;
  os << "periodized window L=" << L << ", rate " << rate << ", " << nf << " frequencies, " << used << " layers";
  m.provenance = os.str();
  return m;
}

}  // namespace

Eigen::Index FiniteModel::size() const { return sparse() ? frame_sparse.rows() : frame.rows(); }

double FiniteModel::symmetry_residue() const {
  if (sparse()) {
    Eigen::SparseMatrix<double> t = frame_sparse.transpose();
    Eigen::SparseMatrix<double> diff = frame_sparse - t;
    double r = 0.0;
    for (int k = 0; k < diff.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(diff, k); it; ++it) r = std::max(r, std::abs(it.value()));
    return r;
  }
  return (frame - frame.adjoint()).cwiseAbs().maxCoeff();
}

FiniteModel discretize(const SystemSpec& sys, int n, double rate, const DiscretizeOptions& opt) {
  if (n < 1) throw std::invalid_argument("window size must be positive");
  return sys.domain == Domain::integer ? discretize_integer(sys, n) : discretize_real(sys, n, rate, opt);
}

Eigen::SparseMatrix<double> gram(const FiniteModel& model) {
  if (!model.sparse()) throw std::invalid_argument("Gram matrix available for models on Z only");
  return Eigen::SparseMatrix<double>(model.synthesis * Eigen::SparseMatrix<double>(model.synthesis.transpose()));
}

OptimalBounds lanczos_extremes(Eigen::Index n, const std::function<void(const Eigen::VectorXcd&, Eigen::VectorXcd&)>& op,
                               int max_steps, double tol) {
  if (n <= 0) throw std::invalid_argument("empty operator");
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> nd;
  auto random_vector = [&] {
    Eigen::VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = Complex(nd(rng), nd(rng));
    return v;
  };
  Eigen::Index steps = std::min<Eigen::Index>(n, 64);
  const Eigen::Index limit = std::min<Eigen::Index>(n, std::max(max_steps, 64));
  OptimalBounds out;
  out.method = "lanczos";
  while (true) {
    Eigen::MatrixXcd V(n, steps);
    std::vector<double> alpha, beta;
    Eigen::VectorXcd v = random_vector();
    v.normalize();
    Eigen::VectorXcd w(n);
    Eigen::Index k = 0;
    for (; k < steps; ++k) {
      V.col(k) = v;
      op(v, w);
      const double a = V.col(k).dot(w).real();
      alpha.push_back(a);
      for (int pass = 0; pass < 2; ++pass) w -= V.leftCols(k + 1) * (V.leftCols(k + 1).adjoint() * w);
      double b = w.norm();
      if (k + 1 == steps) {
        beta.push_back(b);
        break;
      }
      if (b < 1e-10 * std::max(1.0, std::abs(a))) {
        // invariant subspace found: continue with a fresh orthogonal direction
        Eigen::VectorXcd r = random_vector();
        for (int pass = 0; pass < 2; ++pass) r -= V.leftCols(k + 1) * (V.leftCols(k + 1).adjoint() * r);
        if (r.norm() < 1e-12) {
          beta.push_back(0.0);
          ++k;
          break;
        }
        beta.push_back(0.0);
        v = r.normalized();
      } else {
        beta.push_back(b);
        v = w / b;
      }
    }
    const Eigen::Index m = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      T(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    double worst = 0.0;
    double values[2];
    for (int e = 0; e < 2; ++e) {
      const Eigen::Index col = e == 0 ? 0 : m - 1;
      const double theta = es.eigenvalues()(col);
      const Eigen::VectorXcd x = V.leftCols(m) * es.eigenvectors().col(col).cast<Complex>();
      Eigen::VectorXcd ax(n);
      op(x, ax);
      worst = std::max(worst, (ax - theta * x).norm() / std::max(1.0, std::abs(theta)));
      values[e] = theta;
    }
    out.A = values[0];
    out.B = values[1];
    out.residual = worst;
    if (worst <= tol || steps >= limit) break;
    steps = std::min(limit, steps * 2);
  }
  if (out.residual > 1e-8)
    throw std::runtime_error("eigenvalue iteration did not converge: residual " + num(out.residual));
  return out;
}

OptimalBounds optimal_bounds(const FiniteModel& model) {
  const Eigen::Index n = model.size();
  if (n == 0) throw std::invalid_argument("empty finite model");
  if (model.symmetry_residue() > 1e-10) throw std::runtime_error("frame operator is not Hermitian");
  OptimalBounds out;
  if (n <= 1024) {
    Eigen::VectorXd ev;
    if (model.sparse()) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(model.frame_sparse), Eigen::EigenvaluesOnly);
      ev = es.eigenvalues();
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(model.frame, Eigen::EigenvaluesOnly);
      ev = es.eigenvalues();
    }
    out.A = ev(0);
    out.B = ev(n - 1);
    out.method = "dense";
    return out;
  }
  if (model.sparse()) {
    const auto& s = model.frame_sparse;
    return lanczos_extremes(n, [&s](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
      y = s.cast<Complex>() * x;
    });
  }
  const auto& f = model.frame;
  return lanczos_extremes(n, [&f](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) { y.noalias() = f * x; });
}

// ------------------------------------------------------------------ fibers

FiberMatrix fiber_matrix(const SystemSpec& sys, const Point& omega, double radius) {
  if (!sys.single_lattice()) throw std::invalid_argument("fiber oracle requires a single lattice");
  const auto& group = sys.layers.front().group;
  FiberMatrix f;
  f.omega = omega;
  switch (group.kind()) {
    case TranslationGroup::Kind::full:
      f.index.push_back(Point::Zero(sys.dim));
      break;
    case TranslationGroup::Kind::modular: {
      const std::int64_t mod = group.modular_lattice().modulus;
      for (std::int64_t k = 0; k < mod; ++k) f.index.push_back(Point::Constant(1, static_cast<double>(k) / mod));
      break;
    }
    case TranslationGroup::Kind::lattice: {
      const Eigen::MatrixXd dual = group.numeric().dual_basis();
      for (const auto& nu : lattice_points_in_ball(dual, Point::Zero(sys.dim), radius))
        f.index.push_back(Point(dual * nu.cast<double>()));
      std::sort(f.index.begin(), f.index.end(), [](const Point& a, const Point& b) {
        const double na = a.norm(), nb = b.norm();
        if (na != nb) return na < nb;
        for (Eigen::Index i = 0; i < a.size(); ++i)
          if (a(i) != b(i)) return a(i) < b(i);
        return false;
      });
      break;
    }
  }
  const auto m = static_cast<Eigen::Index>(f.index.size());
  f.G = Eigen::MatrixXcd::Zero(m, m);
  Eigen::VectorXcd u(m);
  for (const auto& l : sys.layers)
    for (const auto& c : l.components) {
      for (Eigen::Index a = 0; a < m; ++a) u(a) = c.g(Point(omega + f.index[static_cast<std::size_t>(a)]));
      f.G.noalias() += (l.prefix * c.weight) * (u.conjugate() * u.transpose());
    }
  return f;
}

FiberBounds fiber_bounds(const SystemSpec& sys, const Grid& grid, double radius, unsigned threads) {
  if (!sys.single_lattice()) throw std::invalid_argument("fiber oracle requires a single lattice");
  if (grid.points.empty()) throw std::invalid_argument("empty grid");
  if (radius <= 0) {
    double reach = 0.0;
    for (const auto& l : sys.layers)
      for (const auto& c : l.components) reach = std::max(reach, c.g.support().reach());
    if (!std::isfinite(reach)) throw std::invalid_argument("unbounded generator support: give an index radius");
    radius = reach / 2;
  }
  struct Ext {
    double a, b, ah, bh;
    std::size_t size;
  };
  std::vector<Ext> ext(grid.points.size());
  parallel_for(grid.points.size(), threads, [&](std::size_t i) {
    const FiberMatrix f = fiber_matrix(sys, grid.points[i], radius);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(f.G, Eigen::EigenvaluesOnly);
    Eigen::Index half = 0;
    while (half < static_cast<Eigen::Index>(f.index.size()) &&
           f.index[static_cast<std::size_t>(half)].norm() <= radius / 2 * (1 + 1e-12))
      ++half;
    half = std::max<Eigen::Index>(half, 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eh(f.G.topLeftCorner(half, half), Eigen::EigenvaluesOnly);
    const auto& v = es.eigenvalues();
    const auto& vh = eh.eigenvalues();
    ext[i] = {v(0), v(v.size() - 1), vh(0), vh(vh.size() - 1), f.index.size()};
  });
  FiberBounds out{kInf, -kInf, kInf, -kInf, 0};
  for (const auto& e : ext) {
    out.A = std::min(out.A, e.a);
    out.B = std::max(out.B, e.b);
    out.A_half = std::min(out.A_half, e.ah);
    out.B_half = std::max(out.B_half, e.bh);
    out.window = std::max(out.window, e.size);
  }
  return out;
}

// ------------------------------------------------------------------- chain

ChainVerdict verify_chain(const BoundsReport& report, const OptimalBounds& oracle, double tol) {
  ChainVerdict v;
  const double a1 = report.A1.value(), b1 = report.B1.value(), b2 = report.B2.value(), ai = report.Ainf.value();
  auto check = [&](const char* name, double lhs, double rhs) {
    if (!std::isfinite(lhs) || !std::isfinite(rhs)) return;
    const double slack = tol * std::max({std::abs(lhs), std::abs(rhs), 1e-12});
    if (lhs > rhs + slack) v.violations.push_back(std::string(name) + ": " + num(lhs) + " > " + num(rhs));
  };
  check("A1 <= A_opt", a1, oracle.A);
  check("A_opt <= Ainf", oracle.A, ai);
  if (oracle.A > tol * std::max(1e-12, std::abs(oracle.B))) check("Ainf <= B2", ai, b2);
  check("B2 <= B_opt", b2, oracle.B);
  check("B_opt <= B1", oracle.B, b1);
  v.hypotheses_violated = report.A1.sentinel || report.B1.sentinel || report.B2.sentinel || report.Ainf.sentinel;
  v.ok = v.violations.empty() && !v.hypotheses_violated;
  if (v.hypotheses_violated) {
    v.summary = "estimator hypotheses violated (1-UCP fails)";
  } else if (v.ok) {
    v.summary = "chain holds: A1 <= A_opt <= Ainf <= B2 <= B_opt <= B1";
  } else {
    v.summary = "chain violated";
  }
  for (const auto& s : v.violations) v.summary += "; " + s;
  return v;
}

}  // namespace framebound
