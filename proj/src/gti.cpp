#include "framebound/gti.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace framebound {

namespace {

RationalMatrix identity(Eigen::Index d) { return RationalMatrix::Identity(d, d); }

RationalMatrix power(const RationalMatrix& a, int k) {
  RationalMatrix base = k >= 0 ? a : inverse<Rational>(a);
  RationalMatrix out = identity(a.rows());
  for (int i = 0; i < std::abs(k); ++i) out = out * base;
  return out;
}

Eigen::MatrixXd power(const Eigen::MatrixXd& a, int k) {
  Eigen::MatrixXd base = k >= 0 ? a : inverse<double>(a);
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  for (int i = 0; i < std::abs(k); ++i) out = out * base;
  return out;
}

SmallMatrix small(const Eigen::MatrixXd& m) { return SmallMatrix(m); }

void require_square(const RationalMatrix& m, Eigen::Index d, const char* what) {
  if (m.rows() != d || m.cols() != d)
    throw std::invalid_argument(std::string("dimension mismatch: ") + what);
}

void require_dims(const std::vector<Generator>& gs, int d) {
  if (gs.empty()) throw std::invalid_argument("at least one generator required");
  for (const auto& g : gs)
    if (g.dim() != d) throw std::invalid_argument("dimension mismatch: generator '" + g.label() + "'");
}

std::string matrix_str(const RationalMatrix& m) {
  std::ostringstream os;
  os << "[";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    os << (r ? ", [" : "[");
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? ", " : "") << m(r, c);
    os << "]";
  }
  os << "]";
  return os.str();
}

bool same_lattice(const LatticeQ& a, const LatticeQ& b) { return a == b; }

std::optional<RationalMatrix> try_rational(const Eigen::MatrixXd& m) {
  try {
    RationalMatrix r(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        r(i, j) = Rational::from_double(m(i, j), 1e-15, 1'000'000);
        if (std::abs(r(i, j).to_double() - m(i, j)) > 1e-15 * std::max(1.0, std::abs(m(i, j))))
          return std::nullopt;
      }
    return r;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

Layer exact_layer(const std::vector<Generator>& psi, const RationalMatrix& m, const RationalMatrix& gamma) {
  // D_M T_gamma psi: translations along M^{-1} Gamma, generator |det M|^{-1/2} psi^(M^{-T} w)
  LatticeQ lat(RationalMatrix(inverse<Rational>(m) * gamma));
  Layer layer;
  layer.group = TranslationGroup::exact(lat);
  layer.prefix = 1.0 / lat.covolume().to_double();
  const SmallMatrix md = small(to_double(m));
  for (const auto& g : psi) layer.components.push_back({dilate(g, md), 1.0});
  return layer;
}

}  // namespace

bool Layer::active_at(const Point& w) const {
  for (const auto& c : components)
    if (c.g.support().may_be_nonzero(w)) return true;
  return false;
}

std::vector<TranslationGroup> SystemSpec::groups() const {
  std::vector<TranslationGroup> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back(l.group);
  return out;
}

bool SystemSpec::single_lattice() const {
  if (layers.empty()) return false;
  const auto& g0 = layers.front().group;
  for (const auto& l : layers) {
    const auto& g = l.group;
    if (g.kind() != g0.kind()) return false;
    switch (g.kind()) {
      case TranslationGroup::Kind::full:
        break;
      case TranslationGroup::Kind::modular:
        if (g.modular_lattice().modulus != g0.modular_lattice().modulus) return false;
        break;
      case TranslationGroup::Kind::lattice:
        if (g.exact_lattice() && g0.exact_lattice()) {
          if (!same_lattice(*g.exact_lattice(), *g0.exact_lattice())) return false;
        } else if (!(g.numeric() == g0.numeric())) {
          return false;
        }
        break;
    }
  }
  return true;
}

// ------------------------------------------------------------------- Gabor

SystemSpec gabor_system(const std::vector<Generator>& generators, const RationalMatrix& gamma,
                        const Modulations& lambda, double modulation_radius) {
  const int d = static_cast<int>(gamma.rows());
  require_square(gamma, d, "translation lattice");
  require_dims(generators, d);
  LatticeQ lat(gamma);

  SystemSpec sys;
  sys.label = "gabor";
  sys.domain = Domain::real;
  sys.dim = d;
  sys.shift_invariant = true;

  Layer layer;
  layer.group = TranslationGroup::exact(lat);
  layer.prefix = 1.0 / lat.covolume().to_double();
  layer.label = "gabor";

  if (const auto* lm = std::get_if<RationalMatrix>(&lambda)) {
    require_square(*lm, d, "modulation lattice");
    LatticeQ mod(*lm);
    const Eigen::MatrixXd mb = to_double(mod.basis());
    double radius = modulation_radius;
    if (radius <= 0) {
      double reach = 0.0;
      for (const auto& g : generators) reach = std::max(reach, g.support().reach());
      if (!std::isfinite(reach))
        throw std::invalid_argument("gabor_system: generator without support hint needs modulation_radius");
      double diam = 0.0;
      for (Eigen::Index c = 0; c < mb.cols(); ++c) diam += mb.col(c).norm();
      radius = 2 * reach + 2 * diam;
    }
    for (const auto& nu : lattice_points_in_ball(mb, Point::Zero(d), radius)) {
      Point l = mb * nu.cast<double>();
      for (const auto& g : generators) layer.components.push_back({modulate(g, l), 1.0});
    }
    sys.period = *lm;
  } else {
    const auto& q = std::get<ModulationQuadrature>(lambda);
    if (q.nodes.size() != q.weights.size()) throw std::invalid_argument("quadrature nodes/weights size mismatch");
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
      if (!(q.weights[i] > 0)) throw std::invalid_argument("nonpositive quadrature weight");
      if (q.nodes[i].size() != d) throw std::invalid_argument("dimension mismatch: modulation node");
      for (const auto& g : generators) layer.components.push_back({modulate(g, q.nodes[i]), q.weights[i]});
    }
  }
  sys.layers.push_back(std::move(layer));
  return sys;
}

std::vector<Complex> gabor_time_autocorr(const GaborTimeSide& sys, double alpha, const std::vector<double>& x) {
  const double a = sys.a.to_double();
  const double b = sys.b.to_double();
  if (!(a > 0) || !(b > 0)) throw std::invalid_argument("gabor time side requires a, b > 0");
  for (const auto& g : sys.generators)
    if (!g.eval || !std::isfinite(g.support_lo) || !std::isfinite(g.support_hi))
      throw std::invalid_argument("generator lacks a space-domain eval with bounded support");
  std::vector<Complex> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Complex s = 0.0;
    for (const auto& g : sys.generators) {
      // x - gamma in [lo, hi] and x - gamma - alpha in [lo, hi]
      const double lo = std::max(x[i] - g.support_hi, x[i] - alpha - g.support_hi);
      const double hi = std::min(x[i] - g.support_lo, x[i] - alpha - g.support_lo);
      const auto k0 = static_cast<std::int64_t>(std::ceil(lo / a - 1e-12));
      const auto k1 = static_cast<std::int64_t>(std::floor(hi / a + 1e-12));
      for (std::int64_t k = k0; k <= k1; ++k) {
        const double gam = static_cast<double>(k) * a;
        s += std::conj(g.eval(x[i] - gam - alpha)) * g.eval(x[i] - gam);
      }
    }
    out[i] = s / b;
  }
  return out;
}

// ----------------------------------------------------------------- wavelets

SystemSpec wavelet_system(const std::vector<Generator>& psi, const Dilation& a, const LatticeBasis& gamma, int j_min,
                          int j_max) {
  if (j_min > j_max) throw std::invalid_argument("empty scale range");
  std::optional<RationalMatrix> aq, cq;
  Eigen::MatrixXd ad, cd;
  if (const auto* r = std::get_if<RationalMatrix>(&a.matrix)) {
    aq = *r;
    ad = to_double(*r);
  } else {
    ad = std::get<Eigen::MatrixXd>(a.matrix);
    aq = try_rational(ad);
  }
  if (const auto* r = std::get_if<RationalMatrix>(&gamma)) {
    cq = *r;
    cd = to_double(*r);
  } else {
    cd = std::get<Eigen::MatrixXd>(gamma);
    cq = try_rational(cd);
  }
  const int d = static_cast<int>(ad.rows());
  if (ad.cols() != d || cd.rows() != d || cd.cols() != d) throw std::invalid_argument("dimension mismatch: dilation/lattice");
  require_dims(psi, d);
  if (determinant<double>(ad) == 0.0) throw std::domain_error("singular dilation");

  const bool exact = aq && cq;
  if (!exact && !a.disjoint_certificate)
    throw std::invalid_argument("κ(α) undecidable; supply disjointness certificate or rational data");

  SystemSpec sys;
  sys.label = "wavelet";
  sys.domain = Domain::real;
  sys.dim = d;
  sys.j_min = j_min;
  sys.j_max = j_max;
  sys.disjoint_certified = !exact;

  std::function<Layer(int)> make;
  if (exact) {
    const RationalMatrix A = *aq, C = *cq;
    make = [psi, A, C](int j) {
      Layer l = exact_layer(psi, power(A, j), C);
      l.scale = j;
      l.label = "j=" + std::to_string(j);
      return l;
    };
  } else {
    make = [psi, ad, cd](int j) {
      const Eigen::MatrixXd m = power(ad, j);
      LatticeR lat(Eigen::MatrixXd(inverse<double>(m) * cd));
      Layer l;
      l.group = TranslationGroup::approximate(lat);
      l.prefix = 1.0 / lat.covolume();
      for (const auto& g : psi) l.components.push_back({dilate(g, small(m)), 1.0});
      l.scale = j;
      l.label = "j=" + std::to_string(j);
      return l;
    };
  }
  for (int j = j_min; j <= j_max; ++j) sys.layers.push_back(make(j));
  sys.template_layer = make;

  if (exact) {
    const RationalMatrix B = aq->transpose();
    LatticeQ dual = LatticeQ(*cq).dual();
    if (LatticeQ(RationalMatrix(B * dual.basis())).is_sublattice_of(dual)) {
      Nesting n;
      n.B = B;
      n.dual_basis = dual.basis();
      n.det_c = LatticeQ(*cq).covolume().to_double();
      n.j_min = j_min;
      n.j_max = j_max;
      n.psi = psi;
      sys.nesting = std::move(n);
    }
  }
  return sys;
}

SystemSpec wavelet_system(const std::vector<Generator>& psi, const std::vector<RationalMatrix>& dilations,
                          const RationalMatrix& gamma) {
  const int d = static_cast<int>(gamma.rows());
  require_square(gamma, d, "translation lattice");
  require_dims(psi, d);
  SystemSpec sys;
  sys.label = "wavelet";
  sys.dim = d;
  int j = 0;
  for (const auto& a : dilations) {
    require_square(a, d, "dilation");
    if (determinant<Rational>(a).is_zero()) throw std::domain_error("singular dilation");
    Layer l = exact_layer(psi, a, gamma);
    l.scale = j;
    l.label = "j=" + std::to_string(j);
    ++j;
    sys.layers.push_back(std::move(l));
  }
  return sys;
}

SystemSpec composite_wavelet_system(const std::vector<Generator>& psi, const std::vector<RationalMatrix>& a_list,
                                    const std::vector<RationalMatrix>& b_list, const RationalMatrix& gamma) {
  const int d = static_cast<int>(gamma.rows());
  require_square(gamma, d, "translation lattice");
  require_dims(psi, d);
  const LatticeQ dual = LatticeQ(gamma).dual();
  for (std::size_t i = 0; i < a_list.size(); ++i) {
    require_square(a_list[i], d, "composite dilation A_i");
    bool ok = false;
    try {
      ok = LatticeQ(RationalMatrix(a_list[i].transpose() * dual.basis())) == dual;
    } catch (const std::domain_error&) {
      ok = false;
    }
    if (!ok)
      throw std::invalid_argument("composite invariance violated by A_" + std::to_string(i) + " = " +
                                  matrix_str(a_list[i]) + ": A_i^T Gamma^* != Gamma^*");
  }
  SystemSpec sys;
  sys.label = "composite";
  sys.dim = d;
  for (std::size_t i = 0; i < a_list.size(); ++i)
    for (std::size_t j = 0; j < b_list.size(); ++j) {
      require_square(b_list[j], d, "composite dilation B_j");
      Layer l = exact_layer(psi, RationalMatrix(a_list[i] * b_list[j]), gamma);
      l.family = static_cast<int>(i);
      l.scale = static_cast<int>(j);
      l.label = "i=" + std::to_string(i) + ",j=" + std::to_string(j);
      sys.layers.push_back(std::move(l));
    }
  return sys;
}

RationalMatrix shearlet_dilation(int cone) {
  RationalMatrix a = RationalMatrix::Zero(2, 2);
  a(0, 0) = Rational(cone == 2 ? 2 : 4);
  a(1, 1) = Rational(cone == 2 ? 4 : 2);
  return a;
}

RationalMatrix shearlet_shear(int cone) {
  RationalMatrix s = identity(2);
  if (cone == 2)
    s(1, 0) = Rational(1);
  else
    s(0, 1) = Rational(1);
  return s;
}

SystemSpec classical_shearlet_system(const std::vector<Generator>& psi, const RationalMatrix& gamma, int j_min,
                                     int j_max, int k_min, int k_max) {
  if (j_min > j_max || k_min > k_max) throw std::invalid_argument("empty scale or shear range");
  require_square(gamma, 2, "shearlet lattice");
  require_dims(psi, 2);
  const RationalMatrix A = shearlet_dilation(1), S = shearlet_shear(1);
  SystemSpec sys;
  sys.label = "shearlet_classical";
  sys.dim = 2;
  for (int j = j_min; j <= j_max; ++j)
    for (int k = k_min; k <= k_max; ++k) {
      Layer l = exact_layer(psi, RationalMatrix(power(S, k) * power(A, j)), gamma);
      l.scale = j;
      l.shear = k;
      l.family = 1;
      l.label = "j=" + std::to_string(j) + ",k=" + std::to_string(k);
      sys.layers.push_back(std::move(l));
    }
  sys.j_min = j_min;
  sys.j_max = j_max;
  return sys;
}

SystemSpec cone_adapted_shearlet_system(const Generator& phi, const Generator& psi1, const Generator& psi2,
                                        const RationalMatrix& gamma, int j_max) {
  if (j_max < 0) throw std::invalid_argument("j_max must be >= 0");
  if (j_max > 20) throw std::invalid_argument("j_max too large");
  require_square(gamma, 2, "shearlet lattice");
  require_dims({phi, psi1, psi2}, 2);
  SystemSpec sys;
  sys.label = "shearlet_cone";
  sys.dim = 2;
  Layer low = exact_layer({phi}, identity(2), gamma);
  low.family = 0;
  low.label = "phi";
  sys.layers.push_back(std::move(low));
  const Generator* psi[] = {&psi1, &psi2};
  for (int i = 1; i <= 2; ++i) {
    const RationalMatrix A = shearlet_dilation(i), S = shearlet_shear(i);
    for (int j = 0; j <= j_max; ++j) {
      const int kk = 1 << j;
      for (int k = -kk; k <= kk; ++k) {
        Layer l = exact_layer({*psi[i - 1]}, RationalMatrix(power(S, k) * power(A, j)), gamma);
        l.family = i;
        l.scale = j;
        l.shear = k;
        l.label = "cone" + std::to_string(i) + ",j=" + std::to_string(j) + ",k=" + std::to_string(k);
        sys.layers.push_back(std::move(l));
      }
    }
  }
  sys.j_min = 0;
  sys.j_max = j_max;
  return sys;
}

int nested_level(const RationalVector& alpha, const RationalMatrix& a, const RationalMatrix& gamma) {
  const RationalMatrix dual = LatticeQ(gamma).dual_basis();
  auto in = [&](const RationalMatrix& basis) { return LatticeQ(basis).contains(alpha); };
  if (alpha.isZero() || !in(dual)) throw std::logic_error("alpha-decomposition failure: alpha not in Gamma^* \\ {0}");
  RationalMatrix m = dual;
  for (int level = 0; level < 64; ++level) {
    RationalMatrix next = a * m;
    if (!in(next)) return level;
    m = next;
  }
  throw std::logic_error("alpha-decomposition failure: no finite level");
}

// --------------------------------------------------------- continuous TI

SystemSpec continuous_ti_system(const std::vector<Component>& nodes, int dim) {
  if (nodes.empty()) throw std::invalid_argument("empty quadrature");
  Layer l;
  l.group = TranslationGroup::full(dim);
  l.prefix = 1.0;
  l.label = "full";
  for (const auto& c : nodes) {
    if (!(c.weight > 0)) throw std::invalid_argument("nonpositive quadrature weight");
    if (c.g.dim() != dim) throw std::invalid_argument("dimension mismatch: quadrature generator");
    l.components.push_back(c);
  }
  SystemSpec sys;
  sys.label = "continuous_ti";
  sys.dim = dim;
  sys.shift_invariant = true;
  sys.layers.push_back(std::move(l));
  return sys;
}

SystemSpec alpha_shearlet_ti(const Generator& psi, const AlphaShearletOptions& o) {
  if (psi.dim() != 2) throw std::invalid_argument("alpha-shearlet generator must be bivariate");
  if (o.n_a < 1 || o.n_r < 1 || !(o.a_min > 0) || !(o.a_min < 1)) throw std::invalid_argument("invalid quadrature");
  std::vector<Component> nodes;
  const double la = std::log(o.a_min);
  const double dla = -la / o.n_a;
  for (int ia = 0; ia < o.n_a; ++ia) {
    const double a = std::exp(la + (ia + 0.5) * dla);
    const double da = a * dla;
    const double rmax = o.cone ? 1.0 + std::pow(a, 1.0 - o.alpha) : o.r_max;
    const double dr = 2 * rmax / o.n_r;
    for (int ir = 0; ir < o.n_r; ++ir) {
      const double r = -rmax + (ir + 0.5) * dr;
      // w -> (a w1, a^alpha (r w1 + w2)) is M w; D_{M^{-T}} realizes a^{(1+alpha)/2} psi^(M w).
      SmallMatrix m(2, 2);
      m << a, 0.0, std::pow(a, o.alpha) * r, std::pow(a, o.alpha);
      SmallMatrix dil = inverse<double>(Eigen::MatrixXd(m)).transpose();
      nodes.push_back({dilate(psi, dil), da * dr / (a * a * a)});
    }
  }
  SystemSpec sys = continuous_ti_system(nodes, 2);
  sys.label = "alpha_shearlet_ti";
  return sys;
}

SystemSpec continuous_wavelet_ti(const Generator& psi, double a_min, double a_max, int nodes) {
  if (psi.dim() != 1) throw std::invalid_argument("continuous wavelet generator must be univariate");
  if (!(a_min > 0) || !(a_max > a_min) || nodes < 1) throw std::invalid_argument("invalid quadrature");
  std::vector<Component> comps;
  const double la = std::log(a_min), dla = (std::log(a_max) - la) / nodes;
  for (int i = 0; i < nodes; ++i) {
    const double a = std::exp(la + (i + 0.5) * dla);
    SmallMatrix m(1, 1);
    m(0, 0) = 1.0 / a;
    comps.push_back({dilate(psi, m), dla / a});  // da / a^2 with da = a dla
  }
  SystemSpec sys = continuous_ti_system(comps, 1);
  sys.label = "continuous_wavelet_ti";
  return sys;
}

// -------------------------------------------------------- N-adic example

namespace {

using i128 = __int128;

i128 mod(i128 a, i128 m) {
  i128 r = a % m;
  return r < 0 ? r + m : r;
}

struct ResidueClass {
  i128 rep;  // least-|.| representative, positive on ties
  i128 r;
  i128 modulus;
  int level;
};

i128 least_rep(i128 r, i128 m) {
  const i128 r0 = mod(r, m);
  const i128 r1 = r0 - m;
  return (-r1 < r0) ? r1 : r0;
}

i128 abs128(i128 x) { return x < 0 ? -x : x; }

struct ClassOrder {
  bool operator()(const ResidueClass& a, const ResidueClass& b) const {
    // min-heap on (|rep|, rep < 0)
    const i128 aa = abs128(a.rep), bb = abs128(b.rep);
    if (aa != bb) return aa > bb;
    return (a.rep < 0) > (b.rep < 0);
  }
};

}  // namespace

std::vector<std::int64_t> nadic_offsets(std::int64_t n, int count) {
  if (n < 2) throw std::invalid_argument("N must be >= 2");
  std::vector<std::int64_t> tau;
  std::vector<i128> mods;  // N^i for i = 1..
  i128 m = 1;
  for (int j = 1; j <= count; ++j) {
    m *= n;
    if (m > (static_cast<i128>(1) << 62)) throw std::overflow_error("N^j exceeds 62 bits");
    mods.push_back(m);
  }
  for (int j = 1; j <= count; ++j) {
    // best-first search for the least uncovered integer
    std::priority_queue<ResidueClass, std::vector<ResidueClass>, ClassOrder> heap;
    heap.push({0, 0, 1, 0});
    bool found = false;
    while (!heap.empty()) {
      ResidueClass c = heap.top();
      heap.pop();
      bool covered = false, split = false;
      for (std::size_t i = 0; i < tau.size(); ++i) {
        const int level = static_cast<int>(i) + 1;  // coset tau_i + N^level Z
        if (level <= c.level) {
          if (mod(c.r - tau[i], mods[i]) == 0) { covered = true; break; }
        } else if (mod(tau[i] - c.r, c.modulus) == 0) {
          split = true;
        }
      }
      if (covered) continue;
      if (!split) {
        tau.push_back(static_cast<std::int64_t>(c.rep));
        found = true;
        break;
      }
      const i128 child = c.modulus * n;
      for (std::int64_t t = 0; t < n; ++t) {
        const i128 r = c.r + t * c.modulus;
        heap.push({least_rep(r, child), r, child, c.level + 1});
      }
    }
    if (!found) throw std::logic_error("N-adic cosets already cover Z");
  }
  return tau;
}

bool nadic_cosets_disjoint(std::int64_t n, const std::vector<std::int64_t>& tau) {
  i128 mi = 1;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    mi *= n;
    for (std::size_t j = i + 1; j < tau.size(); ++j)
      if (mod(static_cast<i128>(tau[j]) - tau[i], mi) == 0) return false;
  }
  return true;
}

NadicSystem nadic_counterexample(std::int64_t n, int j_max) {
  if (n < 2) throw std::invalid_argument("N must be >= 2");
  if (j_max < 1) throw std::invalid_argument("j_max must be >= 1");
  int depth = 0;
  i128 m = 1;
  while (m * n <= (static_cast<i128>(1) << 61)) {
    m *= n;
    ++depth;
  }
  if (j_max > depth) throw std::invalid_argument("j_max exceeds the representable depth for this N");
  NadicSystem out;
  out.tau = nadic_offsets(n, depth);
  if (!nadic_cosets_disjoint(n, out.tau)) throw std::logic_error("N-adic cosets not disjoint");

  SystemSpec& sys = out.system;
  sys.label = "nadic" + std::to_string(n);
  sys.domain = Domain::integer;
  sys.dim = 1;
  sys.nadic_base = n;
  sys.tau = out.tau;
  sys.j_min = 1;
  sys.j_max = j_max;
  std::int64_t nj = 1;
  for (int j = 1; j <= depth; ++j) {
    nj *= n;
    Layer l;
    l.group = TranslationGroup::modular(nj);
    l.prefix = 1.0 / static_cast<double>(nj);
    BuiltinParams p;
    p.tau = out.tau[static_cast<std::size_t>(j - 1)];
    l.components.push_back({builtin(Builtin::discrete_delta, p), 1.0});
    l.scale = j;
    l.enumerable = j <= j_max;
    l.label = "j=" + std::to_string(j);
    sys.layers.push_back(std::move(l));
  }
  sys.tail_bound = std::pow(static_cast<double>(n), -depth) / static_cast<double>(n - 1);
  return out;
}

}  // namespace framebound
