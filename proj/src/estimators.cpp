#include "framebound/estimators.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace framebound {

unsigned default_threads() {
  if (const char* env = std::getenv("FRAMEBOUND_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& f) {
  if (threads == 0) threads = default_threads();
  const std::size_t workers = std::min<std::size_t>(threads, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t t = 0; t < workers; ++t) {
    const std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

// -------------------------------------------------------------------- grids

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

std::string fmt_point(const Point& p) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < p.size(); ++i) s += (i ? ", " : "") + fmt(p(i));
  return s + ")";
}

Grid product_grid(const Point& lo, const Point& hi, const std::vector<int>& n, double offset) {
  const Eigen::Index d = lo.size();
  if (hi.size() != d || static_cast<Eigen::Index>(n.size()) != d || d < 1 || d > kMaxDim)
    throw std::invalid_argument("grid bounds and resolution must agree in dimension 1..4");
  Grid g;
  g.spacing = Point(d);
  IntVec a = IntVec::Zero(d), b(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (n[static_cast<std::size_t>(i)] < 1) throw std::invalid_argument("grid resolution must be positive");
    if (!(hi(i) > lo(i))) throw std::invalid_argument("empty grid interval");
    g.spacing(i) = (hi(i) - lo(i)) / n[static_cast<std::size_t>(i)];
    b(i) = n[static_cast<std::size_t>(i)] - 1;
  }
  for_each_in_box(a, b, [&](const IntVec& k) {
    Point p(d);
    for (Eigen::Index i = 0; i < d; ++i) p(i) = lo(i) + (static_cast<double>(k(i)) + offset) * g.spacing(i);
    g.points.push_back(p);
  });
  return g;
}

}  // namespace

Grid Grid::box(const Point& lo, const Point& hi, const std::vector<int>& n, double offset) {
  Grid g = product_grid(lo, hi, n, offset);
  g.lo = lo;
  g.hi = hi;
  g.description = "band " + fmt_point(lo) + " to " + fmt_point(hi) + ", " + std::to_string(g.points.size()) + " points";
  return g;
}

Grid Grid::interval(double lo, double hi, int n, double offset) {
  Point a(1), b(1);
  a << lo;
  b << hi;
  return box(a, b, {n}, offset);
}

Grid Grid::torus(int n) {
  Point a(1), b(1);
  a << 0.0;
  b << 1.0;
  Grid g = product_grid(a, b, {n}, 0.0);
  g.description = "torus [0,1), " + std::to_string(n) + " points";
  return g;
}

Grid Grid::dilation_annulus(const Eigen::MatrixXd& b, int n) {
  const Eigen::Index d = b.rows();
  if (d != b.cols() || d < 1 || d > kMaxDim) throw std::invalid_argument("dilation must be square");
  if (n < 1) throw std::invalid_argument("grid resolution must be positive");
  Grid g;
  if (d == 1) {
    const double beta = std::abs(b(0, 0));
    if (!(beta > 1)) throw std::invalid_argument("dilation annulus needs an expanding dilation");
    const double h = (beta - 1.0) / n;
    for (int s : {-1, 1})
      for (int i = 0; i < n; ++i) {
        Point p(1);
        p << s * (1.0 + (i + 0.5) * h);
        g.points.push_back(p);
      }
    g.spacing = Point::Constant(1, h);
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b);
    const double rho = svd.singularValues().maxCoeff();
    if (!(svd.singularValues().minCoeff() > 1)) throw std::invalid_argument("dilation annulus needs an expanding dilation");
    const Eigen::MatrixXd binv = inverse<double>(b);
    Grid box = product_grid(Point::Constant(d, -rho), Point::Constant(d, rho), std::vector<int>(static_cast<std::size_t>(d), n), 0.5);
    for (const auto& p : box.points) {
      if (p.norm() < 1.0) continue;
      if ((binv * Eigen::VectorXd(p)).norm() >= 1.0) continue;
      g.points.push_back(p);
    }
    g.spacing = box.spacing;
  }
  g.description = "dilation annulus B(B(0,1)) minus B(0,1), " + std::to_string(g.points.size()) + " points";
  return g;
}

Grid Grid::fundamental_domain(const Eigen::MatrixXd& basis, int n) {
  const Eigen::Index d = basis.rows();
  if (d != basis.cols()) throw std::invalid_argument("basis must be square");
  Grid u = product_grid(Point::Zero(d), Point::Ones(d), std::vector<int>(static_cast<std::size_t>(d), n), 0.5);
  Grid g;
  for (const auto& p : u.points) g.points.push_back(Point(basis * Eigen::VectorXd(p)));
  g.spacing = Point(d);
  for (Eigen::Index i = 0; i < d; ++i) g.spacing(i) = basis.row(i).cwiseAbs().sum() / n;
  g.description = "fundamental domain, " + std::to_string(g.points.size()) + " points";
  return g;
}

Grid Grid::around(const Point& p) const {
  const Eigen::Index d = p.size();
  Grid g;
  g.spacing = spacing / 4.0;
  for_each_in_box(IntVec::Constant(d, -4), IntVec::Constant(d, 4), [&](const IntVec& k) {
    Point q = p;
    for (Eigen::Index i = 0; i < d; ++i) q(i) += static_cast<double>(k(i)) * g.spacing(i);
    if (lo.size() == d && ((q - lo).minCoeff() < 0 || (hi - q).minCoeff() < 0)) return;
    g.points.push_back(q);
  });
  g.lo = lo;
  g.hi = hi;
  g.description = "local refinement around " + fmt_point(p);
  return g;
}

// ------------------------------------------------------------ single alpha

namespace {

AnnihilatorPoint zero_point(int dim) {
  AnnihilatorPoint z;
  z.alpha = Point::Zero(dim);
  z.exact = RationalVector::Constant(dim, Rational(0));
  return z;
}

// Largest contribution prefix*w*|g|^2 of the template layers just outside
// [j_min, j_max] on the grid; throws when a compactly supported one is hit.
double band_tail(const SystemSpec& sys, const std::vector<Point>& points) {
  if (!sys.template_layer) return 0.0;
  double tail = 0.0;
  for (int j : {sys.j_min - 1, sys.j_max + 1}) {
    const Layer layer = sys.template_layer(j);
    for (const auto& c : layer.components) {
      const bool compact = c.g.support().compact();
      for (const auto& w : points) {
        const double v = layer.prefix * c.weight * std::norm(c.g(w));
        if (compact && v > 1e-15)
          throw std::domain_error("grid outside truncation-safe band: layer j=" + std::to_string(j) +
                                  " contributes " + fmt(v) + " at omega=" + fmt_point(w) +
                                  " (tail bound 0 required for compact support)");
        tail = std::max(tail, v);
      }
    }
  }
  return tail;
}

}  // namespace

void check_band(const SystemSpec& sys, const Grid& grid) { (void)band_tail(sys, grid.points); }

Complex t_alpha_at(const SystemSpec& sys, const AnnihilatorPoint& alpha, const Point& w) {
  std::vector<int> kappa = alpha.kappa;
  if (kappa.empty()) {
    const auto groups = sys.groups();
    kappa = annihilating_groups(groups, alpha, 1e-9, sys.disjoint_certified);
  }
  Complex t(0.0);
  for (int j : kappa) {
    const Layer& l = sys.layers.at(static_cast<std::size_t>(j));
    Complex s(0.0);
    for (const auto& c : l.components) s += c.weight * c.g.cross(w, alpha);
    t += l.prefix * s;
  }
  return t;
}

AutoCorrField t_alpha(const SystemSpec& sys, const AnnihilatorPoint& alpha, const Grid& grid) {
  const double tail = sys.tail_bound + band_tail(sys, grid.points);
  AutoCorrField f;
  f.alpha = alpha;
  if (f.alpha.kappa.empty()) {
    const auto groups = sys.groups();
    f.alpha.kappa = annihilating_groups(groups, alpha, 1e-9, sys.disjoint_certified);
  }
  f.omega = grid.points;
  f.samples.resize(grid.points.size());
  f.tail.assign(grid.points.size(), tail);
  for (std::size_t i = 0; i < grid.points.size(); ++i) f.samples[i] = t_alpha_at(sys, f.alpha, grid.points[i]);
  return f;
}

AutoCorrField calderon_sum(const SystemSpec& sys, const Grid& grid) {
  AutoCorrField f = t_alpha(sys, zero_point(sys.dim), grid);
  for (std::size_t i = 0; i < f.samples.size(); ++i) {
    const Complex v = f.samples[i];
    if (std::abs(v.imag()) > 1e-12 || v.real() < -1e-12)
      throw std::logic_error("Calderon sum not real nonnegative at omega=" + fmt_point(f.omega[i]));
  }
  return f;
}

// ------------------------------------------------------------ sum evaluator

namespace {

struct LayerGeometry {
  bool lattice = false;
  bool exact = false;
  Eigen::MatrixXd dual;      // D = C^{-T}
  Eigen::MatrixXd dual_inv;  // C^T
  RationalMatrix dual_q;
  double reach = kInf;
};

struct Candidate {
  AlphaKey key{};
  int tag = -1;  // -1 exact, else originating layer of a float point
  int layer = 0;
  Point alpha;
  std::optional<RationalVector> exact;
};

AlphaKey key_of(const Point& a) {
  AlphaKey k{};
  for (Eigen::Index i = 0; i < a.size(); ++i) k[static_cast<std::size_t>(i)] = a(i);
  return k;
}

void merge_sup(AlphaSupMap& sups, const AlphaKey& key, const Point& alpha, const std::optional<RationalVector>& exact,
               double value, int kappa) {
  auto [it, inserted] = sups.try_emplace(key);
  if (inserted) {
    it->second.alpha = alpha;
    it->second.exact = exact;
  }
  it->second.sup = std::max(it->second.sup, value);
  it->second.kappa_size = std::max(it->second.kappa_size, kappa);
}

}  // namespace

struct SumEvaluator::Impl {
  SystemSpec sys;
  Truncation trunc;
  bool integer = false;
  bool any_float = false;
  std::vector<double> checkpoints;

  // Z: enumerated non-zero points.
  std::vector<AnnihilatorPoint> points;
  bool z_truncated = false;

  // R^d: per-layer geometry.
  std::vector<LayerGeometry> geom;
  mutable std::atomic<bool> r_truncated{false};
  mutable std::atomic<std::size_t> max_alphas{0};

  Impl(const SystemSpec& s, const Truncation& t) : sys(s), trunc(t) {
    if (sys.layers.empty()) throw std::invalid_argument("system has no layers");
    integer = sys.domain == Domain::integer;
    if (integer) init_integer();
    else init_real();
  }

  void init_integer() {
    const auto groups = sys.groups();
    EnumerationOptions opt;
    opt.max_points = trunc.max_points;
    opt.radius = 0.0;
    for (std::size_t j = 0; j < groups.size(); ++j) {
      const auto& g = groups[j];
      const bool on = sys.layers[j].enumerable && g.kind() == TranslationGroup::Kind::modular &&
                      static_cast<double>(g.modular_lattice().modulus) <= trunc.alpha_radius;
      opt.reach.push_back(on ? 1.0 : 0.0);
      if (on) opt.radius = std::max(opt.radius, static_cast<double>(g.modular_lattice().modulus));
      if (!on && g.kind() == TranslationGroup::Kind::modular) z_truncated = true;
      if (g.kind() == TranslationGroup::Kind::lattice) throw std::invalid_argument("lattice group in a system on Z");
    }
    if (sys.tail_bound > 0) z_truncated = true;
    if (opt.radius > 0) {
      auto all = enumerate_annihilators(groups, opt);
      for (auto& p : all)
        if (!p.is_zero()) points.push_back(std::move(p));
    }
    std::vector<double> dens;
    for (const auto& p : points) dens.push_back(static_cast<double>((*p.exact)(0).den()));
    std::sort(dens.begin(), dens.end());
    dens.erase(std::unique(dens.begin(), dens.end()), dens.end());
    const std::size_t k = std::min<std::size_t>(4, dens.size());
    checkpoints.assign(dens.end() - static_cast<std::ptrdiff_t>(k), dens.end());
  }

  void init_real() {
    for (const auto& l : sys.layers) {
      LayerGeometry g;
      if (l.group.kind() == TranslationGroup::Kind::modular) throw std::invalid_argument("modular group in a system on R^d");
      if (l.group.kind() == TranslationGroup::Kind::lattice) {
        g.lattice = true;
        g.exact = l.group.exact_lattice().has_value();
        if (!g.exact) {
          any_float = true;
          if (!sys.disjoint_certified)
            throw std::invalid_argument("kappa(alpha) undecidable; supply disjointness certificate or rational data");
        }
        g.dual = l.group.numeric().dual_basis();
        g.dual_inv = l.group.numeric().basis().transpose();
        if (g.exact) g.dual_q = l.group.exact_lattice()->dual_basis();
        g.reach = 0.0;
        for (const auto& c : l.components) g.reach = std::max(g.reach, c.g.support().reach());
      }
      geom.push_back(std::move(g));
    }
    if (std::isfinite(trunc.alpha_radius))
      for (int k = 0; k < 4; ++k) checkpoints.push_back(trunc.alpha_radius * std::ldexp(1.0, k - 3));
  }

  int checkpoint_from(double order) const {
    for (std::size_t k = 0; k < checkpoints.size(); ++k)
      if (order <= checkpoints[k] * (1 + 1e-12)) return static_cast<int>(k);
    return 4;
  }

  static void accumulate(Sample& s, double abs_t, double abs_r, int from) {
    s.R += abs_t;
    s.R_abs += abs_r;
    s.l2sq += abs_t * abs_t;
    for (int k = from; k < 4; ++k) {
      s.R_part[k] += abs_t;
      s.R_abs_part[k] += abs_r;
      s.l2sq_part[k] += abs_t * abs_t;
    }
  }

  Sample evaluate(const Point& w, AlphaSupMap* sups) const {
    if (w.size() != sys.dim) throw std::invalid_argument("frequency dimension mismatch");
    Sample s;
    s.tail = sys.tail_bound;
    // g_{j,p}(w) cache and t0.
    std::vector<std::vector<Complex>> gw(sys.layers.size());
    for (std::size_t j = 0; j < sys.layers.size(); ++j) {
      const Layer& l = sys.layers[j];
      gw[j].reserve(l.components.size());
      for (const auto& c : l.components) {
        const Complex v = c.g(w);
        gw[j].push_back(v);
        s.t0 += l.prefix * c.weight * std::norm(v);
      }
    }
    s.l2sq = s.t0 * s.t0;
    for (int k = 0; k < 4; ++k) s.l2sq_part[k] = s.l2sq;
    if (sups) merge_sup(*sups, key_of(Point::Zero(sys.dim)), Point::Zero(sys.dim),
                        RationalVector::Constant(sys.dim, Rational(0)), std::abs(s.t0), 0);
    if (integer) evaluate_integer(w, gw, s, sups);
    else evaluate_real(w, gw, s, sups);
    return s;
  }

  void evaluate_integer(const Point& w, const std::vector<std::vector<Complex>>& gw, Sample& s, AlphaSupMap* sups) const {
    for (const auto& p : points) {
      Complex t(0.0);
      double r = 0.0;
      for (int j : p.kappa) {
        const Layer& l = sys.layers[static_cast<std::size_t>(j)];
        Complex acc(0.0);
        double acc_abs = 0.0;
        for (std::size_t c = 0; c < l.components.size(); ++c) {
          if (gw[static_cast<std::size_t>(j)][c] == Complex(0.0)) continue;
          const Complex x = l.components[c].g.cross(w, p);
          acc += l.components[c].weight * x;
          acc_abs += l.components[c].weight * std::abs(x);
        }
        t += l.prefix * acc;
        r += l.prefix * acc_abs;
      }
      const double at = std::abs(t);
      accumulate(s, at, r, checkpoint_from(p.order));
      if (sups) merge_sup(*sups, key_of(p.alpha), p.alpha, p.exact, at, static_cast<int>(p.kappa.size()));
    }
  }

  void evaluate_real(const Point& w, const std::vector<std::vector<Complex>>& gw, Sample& s, AlphaSupMap* sups) const {
    const Eigen::Index d = w.size();
    const double ar = trunc.alpha_radius;
    const double wn = w.norm();
    std::vector<Candidate> cand;
    for (std::size_t j = 0; j < sys.layers.size(); ++j) {
      const LayerGeometry& g = geom[j];
      if (!g.lattice) continue;
      const Layer& l = sys.layers[j];
      bool active = false;
      for (const auto& v : gw[j])
        if (v != Complex(0.0)) { active = true; break; }
      if (!active || !l.active_at(w)) continue;
      if (!std::isfinite(g.reach) && !std::isfinite(ar))
        throw std::invalid_argument("unbounded generator support on layer " + l.label + ": set alpha_radius");
      // alpha in ball(-w, reach) intersected with ball(0, alpha_radius)
      Eigen::VectorXd center;
      double radius;
      if (g.reach <= ar) {
        center = -Eigen::VectorXd(w);
        radius = g.reach;
      } else {
        center = Eigen::VectorXd::Zero(d);
        radius = ar;
        if (ar < g.reach + wn) r_truncated = true;
      }
      const Eigen::VectorXd c = g.dual_inv * center;
      IntVec lo(d), hi(d);
      double volume = 1.0;
      for (Eigen::Index i = 0; i < d; ++i) {
        const double half = radius * g.dual_inv.row(i).norm() * (1 + 1e-12) + 1e-9;
        lo(i) = static_cast<std::int64_t>(std::ceil(c(i) - half));
        hi(i) = static_cast<std::int64_t>(std::floor(c(i) + half));
        volume *= static_cast<double>(hi(i) - lo(i) + 1);
      }
      if (volume > static_cast<double>(trunc.max_points)) throw EnumerationLimit(cand.size(), trunc.max_points);
      for_each_in_box(lo, hi, [&](const IntVec& nu) {
        if (nu.isZero()) return;
        const Point a = g.dual * nu.cast<double>();
        const double an = a.norm();
        if (an > ar * (1 + 1e-12)) return;
        const Point x = w + a;
        if (x.norm() > g.reach * (1 + 1e-12)) return;
        bool hit = false;
        for (const auto& comp : l.components)
          if (comp.g.support().may_be_nonzero(x)) { hit = true; break; }
        if (!hit) return;
        Candidate cd;
        cd.layer = static_cast<int>(j);
        if (g.exact) {
          RationalVector nq(d);
          for (Eigen::Index i = 0; i < d; ++i) nq(i) = Rational(nu(i));
          RationalVector e = g.dual_q * nq;
          cd.alpha = Point(d);
          for (Eigen::Index i = 0; i < d; ++i) cd.alpha(i) = e(i).to_double();
          cd.exact = std::move(e);
        } else {
          cd.alpha = a;
          cd.tag = static_cast<int>(j);
        }
        cd.key = key_of(cd.alpha);
        cand.push_back(std::move(cd));
        if (cand.size() > trunc.max_points) throw EnumerationLimit(cand.size(), trunc.max_points);
      });
    }
    std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
      if (a.key != b.key) return a.key < b.key;
      if (a.tag != b.tag) return a.tag < b.tag;
      return a.layer < b.layer;
    });
    std::size_t groups = 0;
    for (std::size_t i = 0; i < cand.size();) {
      std::size_t e = i;
      while (e < cand.size() && cand[e].key == cand[i].key && cand[e].tag == cand[i].tag) ++e;
      const Point x = w + cand[i].alpha;
      Complex t(0.0);
      double r = 0.0;
      for (std::size_t k = i; k < e; ++k) {
        const std::size_t j = static_cast<std::size_t>(cand[k].layer);
        const Layer& l = sys.layers[j];
        Complex acc(0.0);
        double acc_abs = 0.0;
        for (std::size_t c = 0; c < l.components.size(); ++c) {
          const Complex a = gw[j][c];
          if (a == Complex(0.0)) continue;
          const Complex x_val = a * std::conj(l.components[c].g(x));
          acc += l.components[c].weight * x_val;
          acc_abs += l.components[c].weight * std::abs(x_val);
        }
        t += l.prefix * acc;
        r += l.prefix * acc_abs;
      }
      const double at = std::abs(t);
      accumulate(s, at, r, checkpoint_from(cand[i].alpha.norm()));
      if (sups) merge_sup(*sups, cand[i].key, cand[i].alpha, cand[i].exact, at, static_cast<int>(e - i));
      ++groups;
      i = e;
    }
    std::size_t prev = max_alphas.load();
    while (groups > prev && !max_alphas.compare_exchange_weak(prev, groups)) {
    }
  }
};

SumEvaluator::SumEvaluator(const SystemSpec& sys, const Truncation& trunc) : impl_(new Impl(sys, trunc)) {}
SumEvaluator::~SumEvaluator() { delete impl_; }

Sample SumEvaluator::evaluate(const Point& w, AlphaSupMap* sups) const { return impl_->evaluate(w, sups); }
bool SumEvaluator::truncated() const { return impl_->integer ? impl_->z_truncated : impl_->r_truncated.load(); }
const std::vector<double>& SumEvaluator::checkpoints() const { return impl_->checkpoints; }
bool SumEvaluator::float_kappa() const { return impl_->any_float; }
std::size_t SumEvaluator::alpha_count() const {
  return impl_->integer ? impl_->points.size() : impl_->max_alphas.load();
}

// ----------------------------------------------------------- remainder fields

namespace {

std::vector<Sample> evaluate_all(const SumEvaluator& ev, const std::vector<Point>& points, unsigned threads,
                                 AlphaSupMap* sups) {
  std::vector<Sample> out(points.size());
  if (!sups) {
    parallel_for(points.size(), threads, [&](std::size_t i) { out[i] = ev.evaluate(points[i]); });
    return out;
  }
  std::mutex mu;
  const unsigned t = threads ? threads : default_threads();
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(t, points.size()));
  const std::size_t chunk = (points.size() + workers - 1) / workers;
  parallel_for(workers, static_cast<unsigned>(workers), [&](std::size_t c) {
    AlphaSupMap local;
    const std::size_t lo = c * chunk, hi = std::min(points.size(), lo + chunk);
    for (std::size_t i = lo; i < hi; ++i) out[i] = ev.evaluate(points[i], &local);
    std::lock_guard<std::mutex> lock(mu);
    for (const auto& [k, v] : local) merge_sup(*sups, k, v.alpha, v.exact, v.sup, v.kappa_size);
  });
  return out;
}

// Three consecutive checkpoint increments of the sup of a partial sum all reach delta.
bool diverges(const SumEvaluator& ev, const std::vector<Sample>& samples, double Sample::*, const double (Sample::*part)[4],
              double delta) {
  if (!ev.truncated() || ev.checkpoints().size() < 4 || samples.empty()) return false;
  double sup[4] = {0, 0, 0, 0};
  for (const auto& s : samples)
    for (int k = 0; k < 4; ++k) sup[k] = std::max(sup[k], (s.*part)[k]);
  for (int k = 1; k < 4; ++k)
    if (!(sup[k] - sup[k - 1] >= delta)) return false;
  return true;
}

Field remainder_field(const SystemSpec& sys, const Grid& grid, const Truncation& trunc, unsigned threads, bool abs_form) {
  Field f;
  f.omega = grid.points;
  check_band(sys, grid);
  SumEvaluator ev(sys, trunc);
  try {
    auto samples = evaluate_all(ev, grid.points, threads, nullptr);
    for (const auto& s : samples) f.values.push_back(abs_form ? s.R_abs : s.R);
    f.divergent = abs_form ? diverges(ev, samples, &Sample::R_abs, &Sample::R_abs_part, trunc.divergence_delta)
                           : diverges(ev, samples, &Sample::R, &Sample::R_part, trunc.divergence_delta);
  } catch (const EnumerationLimit&) {
    f.values.assign(grid.points.size(), kInf);
    f.divergent = true;
  }
  return f;
}

Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& m, int k) {
  Eigen::MatrixXd base = k < 0 ? inverse<double>(m) : m;
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(m.rows(), m.cols());
  for (int i = 0; i < std::abs(k); ++i) out = out * base;
  return out;
}

RationalMatrix rational_power(const RationalMatrix& m, int k) {
  RationalMatrix base = k < 0 ? inverse<Rational>(m) : m;
  RationalMatrix out = RationalMatrix::Identity(m.rows(), m.cols());
  for (int i = 0; i < std::abs(k); ++i) out = out * base;
  return out;
}

}  // namespace

Field remainder_R(const SystemSpec& sys, const Grid& grid, const Truncation& trunc, unsigned threads) {
  return remainder_field(sys, grid, trunc, threads, false);
}

Field remainder_abs(const SystemSpec& sys, const Grid& grid, const Truncation& trunc, unsigned threads) {
  return remainder_field(sys, grid, trunc, threads, true);
}

Field remainder_nested(const SystemSpec& sys, const Grid& grid, const Truncation& trunc) {
  if (!sys.nesting) throw std::invalid_argument("nested-lattice decomposition inapplicable");
  const Nesting& n = *sys.nesting;
  const Eigen::MatrixXd b = to_double(n.B);
  {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b);
    if (!(svd.singularValues().minCoeff() > 1.0))
      throw std::invalid_argument("nested form requires an expanding dilation");
  }
  double radius = trunc.alpha_radius;
  if (!std::isfinite(radius)) {
    double wmax = 0.0, reach = 0.0;
    for (const auto& w : grid.points) wmax = std::max(wmax, w.norm());
    for (const auto& l : sys.layers)
      for (const auto& c : l.components) reach = std::max(reach, c.g.support().reach());
    if (!std::isfinite(reach)) throw std::invalid_argument("unbounded generator support: set alpha_radius");
    radius = wmax + reach;
  }
  const LatticeQ dual(n.dual_basis);
  const LatticeQ fine(RationalMatrix(n.B * n.dual_basis));
  // shortest non-zero dual vector bounds the useful levels
  double shortest = kInf;
  {
    const Eigen::MatrixXd db = to_double(n.dual_basis);
    double r0 = 0.0;
    for (Eigen::Index i = 0; i < db.cols(); ++i) r0 = std::max(r0, db.col(i).norm());
    for (const auto& nu : lattice_points_in_ball(db, Point::Zero(db.rows()), r0))
      if (!nu.isZero()) shortest = std::min(shortest, (db * nu.cast<double>()).norm());
  }

  struct Level {
    int m;
    std::vector<Point> alpha;                 // B^m q
    std::vector<std::vector<Point>> shifted;  // per j: B^{m-j} q
  };
  std::vector<Level> levels;
  const int j_lo = n.j_min;
  for (int m = j_lo;; ++m) {
    const double bound = radius * matrix_power(b, -m).norm();
    if (bound < shortest * (1 - 1e-12)) break;
    if (m > j_lo + 400) throw std::runtime_error("nested level enumeration did not terminate");
    Level lv;
    lv.m = m;
    const RationalMatrix bm = rational_power(n.B, m);
    for (const auto& q : difference_points(dual, fine, bound)) {
      RationalVector a = bm * q;
      Point p(a.size());
      for (Eigen::Index i = 0; i < a.size(); ++i) p(i) = a(i).to_double();
      if (p.norm() > radius * (1 + 1e-12)) continue;
      lv.alpha.push_back(p);
    }
    levels.push_back(std::move(lv));
  }

  Field f;
  f.omega = grid.points;
  f.values.resize(grid.points.size());
  const double inv_det_c = 1.0 / n.det_c;
  std::vector<Eigen::MatrixXd> binv;  // B^{-j}, j = j_min..j_max
  for (int j = n.j_min; j <= n.j_max; ++j) binv.push_back(matrix_power(b, -j));
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    const Point& w = grid.points[i];
    double total = 0.0;
    for (const auto& lv : levels) {
      for (const auto& a : lv.alpha) {
        Complex t(0.0);
        const Point x = w + a;
        for (int j = n.j_min; j <= std::min(lv.m, n.j_max); ++j) {
          const std::size_t idx = static_cast<std::size_t>(j - n.j_min);
          const Layer& layer = sys.layers[idx];
          if (!layer.active_at(w)) continue;
          const Point u = binv[idx] * Eigen::VectorXd(w);
          const Point v = binv[idx] * Eigen::VectorXd(x);
          for (std::size_t l = 0; l < n.psi.size(); ++l) {
            if (!layer.components[l].g.support().may_be_nonzero(x)) continue;
            t += n.psi[l](u) * std::conj(n.psi[l](v));
          }
        }
        total += std::abs(t);
      }
    }
    f.values[i] = inv_det_c * total;
  }
  return f;
}

// ------------------------------------------------------------------ bounds

namespace {

enum class Extremum { min, max };

struct Quantity {
  Estimate* est;
  Extremum kind;
  double (*value)(const Sample&);
};

double q_a1(const Sample& s) { return s.t0 - s.R; }
double q_b1(const Sample& s) { return s.t0 + s.R; }
double q_b2(const Sample& s) { return std::sqrt(s.l2sq); }
double q_ainf(const Sample& s) { return s.t0; }
double q_aprime(const Sample& s) { return s.t0 - s.R_abs; }
double q_bprime(const Sample& s) { return s.t0 + s.R_abs; }

bool better(Extremum k, double a, double b) { return k == Extremum::min ? a < b : a > b; }

}  // namespace

BoundsReport bounds(const SystemSpec& sys, const Grid& grid, const Truncation& trunc, const BoundsOptions& opt) {
  if (grid.points.empty()) throw std::invalid_argument("empty grid");
  BoundsReport rep;
  rep.grid = grid.description;
  rep.alpha_radius = trunc.alpha_radius;
  rep.ucp_asserted = sys.ucp_asserted;
  rep.tail = sys.tail_bound + band_tail(sys, grid.points);

  SumEvaluator ev(sys, trunc);
  rep.float_kappa = ev.float_kappa();
  AlphaSupMap sups;
  std::vector<Sample> samples;
  bool limit = false;
  try {
    samples = evaluate_all(ev, grid.points, opt.threads, opt.collect_alphas ? &sups : nullptr);
  } catch (const EnumerationLimit& e) {
    limit = true;
    rep.notes.push_back(std::string("alpha enumeration stopped: ") + e.what());
  }

  if (limit) {
    rep.divergent_R = rep.divergent_R_abs = rep.divergent_l2 = true;
    rep.truncated = true;
  } else {
    rep.truncated = ev.truncated();
    rep.divergent_R = diverges(ev, samples, &Sample::R, &Sample::R_part, trunc.divergence_delta);
    rep.divergent_R_abs = diverges(ev, samples, &Sample::R_abs, &Sample::R_abs_part, trunc.divergence_delta);
    rep.divergent_l2 = diverges(ev, samples, &Sample::l2sq, &Sample::l2sq_part, trunc.divergence_delta);
  }

  const Quantity qs[] = {
      {&rep.A1, Extremum::min, q_a1},         {&rep.B1, Extremum::max, q_b1},
      {&rep.B2, Extremum::max, q_b2},         {&rep.Ainf, Extremum::min, q_ainf},
      {&rep.Aprime, Extremum::min, q_aprime}, {&rep.Bprime, Extremum::max, q_bprime},
  };

  if (!limit) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      rep.rows.push_back({grid.points[i], s.t0, s.R, s.R_abs, std::sqrt(s.l2sq)});
    }
    for (const auto& q : qs) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < samples.size(); ++i)
        if (better(q.kind, q.value(samples[i]), q.value(samples[best]))) best = i;
      q.est->coarse = q.est->refined = q.value(samples[best]);
      q.est->where = grid.points[best];
    }
    if (opt.refine) {
      for (const auto& q : qs) {
        const Grid local = grid.around(q.est->where);
        std::vector<Sample> ls;
        try {
          ls = evaluate_all(ev, local.points, opt.threads, nullptr);
        } catch (const EnumerationLimit&) {
          continue;
        }
        for (std::size_t i = 0; i < ls.size(); ++i) {
          const double v = q.value(ls[i]);
          if (better(q.kind, v, q.est->refined)) {
            q.est->refined = v;
            q.est->where = local.points[i];
          }
        }
        q.est->error = std::abs(q.est->refined - q.est->coarse);
        if (q.est->error > opt.refine_tolerance * std::max(1.0, std::abs(q.est->coarse))) rep.refinement_converged = false;
      }
      if (!rep.refinement_converged)
        rep.notes.push_back("grid refinement changed an estimate by more than " + fmt(100 * opt.refine_tolerance) +
                            "%; increase the resolution");
    }
  }

  auto sentinel = [](Estimate& e, double v) {
    e.coarse = e.refined = v;
    e.error = 0.0;
    e.sentinel = true;
  };
  if (rep.divergent_R) {
    sentinel(rep.A1, -kInf);
    sentinel(rep.B1, kInf);
    rep.notes.push_back("partial sums of R grow without bound: A1 = -inf, B1 = +inf");
  }
  if (rep.divergent_l2) {
    sentinel(rep.B2, kInf);
    rep.notes.push_back("partial sums of sum |t_alpha|^2 grow without bound: B2 = +inf");
  }
  if (rep.divergent_R_abs) {
    sentinel(rep.Aprime, -kInf);
    sentinel(rep.Bprime, kInf);
    rep.notes.push_back("partial sums of the absolute remainder grow without bound: A' = -inf, B' = +inf");
  }
  if (limit) sentinel(rep.Ainf, -kInf);

  const double tol = opt.chain_tolerance;
  const double a1 = rep.A1.value(), b1 = rep.B1.value(), b2 = rep.B2.value(), ai = rep.Ainf.value();
  rep.chain_ok = (a1 <= ai + tol) && (!(a1 > 0) || ai <= b2 + tol) && (b2 <= b1 + tol);

  rep.alpha_count = limit ? 0 : std::max<std::size_t>(ev.alpha_count(), sups.empty() ? 0 : sups.size() - 1);
  for (auto& [k, v] : sups) rep.alphas.push_back(std::move(v));
  if (!limit) rep.tight = tightness(rep, opt.tight_tolerance);

  if (sys.ucp_asserted)
    rep.notes.push_back("1-UCP asserted by the user, not verified: B2 and Ainf bound the optimal constants only "
                        "if it holds");
  else
    rep.notes.push_back("1-UCP not asserted: A1/B1 need the local integrability condition; B2 and Ainf are "
                        "necessary-condition bounds only under it");
  if (grid.description.rfind("band", 0) == 0)
    rep.notes.push_back("grid is a band, not a period domain: sup over the band only lower-bounds the true sup");
  if (rep.truncated && !rep.divergent())
    rep.notes.push_back("alpha set truncated at radius " + fmt(trunc.alpha_radius) + "; omitted tail <= " + fmt(rep.tail));
  if (rep.float_kappa) rep.notes.push_back("kappa(alpha) for floating lattices relies on the disjointness certificate");
  return rep;
}

std::optional<double> tightness(const BoundsReport& report, double tol) {
  if (report.divergent_R || report.divergent_l2 || report.rows.empty()) return std::nullopt;
  double sup_r = 0.0, mean = 0.0;
  for (const auto& r : report.rows) {
    sup_r = std::max(sup_r, r.R);
    mean += r.t0;
  }
  for (const auto& a : report.alphas)
    if (!a.alpha.isZero(0.0)) sup_r = std::max(sup_r, a.sup);
  if (!(sup_r < tol)) return std::nullopt;
  mean /= static_cast<double>(report.rows.size());
  for (const auto& r : report.rows)
    if (!(std::abs(r.t0 - mean) < tol)) return std::nullopt;
  return mean;
}

std::optional<double> tightness(const SystemSpec& sys, const Grid& grid, const Truncation& trunc, double tol) {
  BoundsOptions opt;
  opt.refine = false;
  opt.tight_tolerance = tol;
  return bounds(sys, grid, trunc, opt).tight;
}

TimeBounds time_side_bounds(const GaborTimeSide& sys, const std::vector<double>& x, double radius) {
  if (x.empty()) throw std::invalid_argument("empty time grid");
  const double step = 1.0 / sys.b.to_double();
  const auto kmax = static_cast<long>(std::floor(radius / step + 1e-12));
  std::vector<double> s0(x.size()), rest(x.size(), 0.0);
  const auto base = gabor_time_autocorr(sys, 0.0, x);
  for (std::size_t i = 0; i < x.size(); ++i) s0[i] = base[i].real();
  for (long k = -kmax; k <= kmax; ++k) {
    if (k == 0) continue;
    const auto s = gabor_time_autocorr(sys, static_cast<double>(k) * step, x);
    for (std::size_t i = 0; i < x.size(); ++i) rest[i] += std::abs(s[i]);
  }
  TimeBounds tb{kInf, -kInf, kInf};
  for (std::size_t i = 0; i < x.size(); ++i) {
    tb.A1 = std::min(tb.A1, s0[i] - rest[i]);
    tb.B1 = std::max(tb.B1, s0[i] + rest[i]);
    tb.Ainf = std::min(tb.Ainf, s0[i]);
  }
  return tb;
}

}  // namespace framebound
