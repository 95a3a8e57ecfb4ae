#include "framebound/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

namespace framebound {

TranslationGroup TranslationGroup::exact(LatticeQ l) {
  TranslationGroup g;
  g.kind_ = Kind::lattice;
  g.dim_ = static_cast<int>(l.dim());
  g.numeric_ = l.numeric();
  g.exact_ = std::move(l);
  return g;
}

TranslationGroup TranslationGroup::approximate(LatticeR l) {
  TranslationGroup g;
  g.kind_ = Kind::lattice;
  g.dim_ = static_cast<int>(l.dim());
  g.numeric_ = std::move(l);
  return g;
}

double TranslationGroup::covolume() const {
  switch (kind_) {
    case Kind::lattice: return numeric_->covolume();
    case Kind::modular: return static_cast<double>(modular_->modulus);
    case Kind::full: return 1.0;
  }
  return 1.0;
}

namespace {

struct RationalVectorLess {
  bool operator()(const RationalVector& a, const RationalVector& b) const {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (a(i) < b(i)) return true;
      if (b(i) < a(i)) return false;
    }
    return false;
  }
};

Point to_point(const RationalVector& v) {
  Point p(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) p(i) = v(i).to_double();
  return p;
}

// Calls f(nu) for every integer vector in the box |nu_i| <= bound_i.
template <typename F>
void scan_box(const std::vector<std::int64_t>& bound, F&& f) {
  const std::size_t d = bound.size();
  std::vector<std::int64_t> nu(d);
  for (std::size_t i = 0; i < d; ++i) nu[i] = -bound[i];
  while (true) {
    f(nu);
    std::size_t i = 0;
    while (i < d) {
      if (nu[i] < bound[i]) { ++nu[i]; break; }
      nu[i] = -bound[i];
      ++i;
    }
    if (i == d) return;
  }
}

std::vector<std::int64_t> preimage_bounds(const Eigen::MatrixXd& basis_t, double radius) {
  // nu = C^T alpha, so |nu_i| <= |C column i| * |alpha|.
  std::vector<std::int64_t> b(static_cast<std::size_t>(basis_t.rows()));
  for (Eigen::Index i = 0; i < basis_t.rows(); ++i)
    b[static_cast<std::size_t>(i)] =
        static_cast<std::int64_t>(std::floor(radius * basis_t.row(i).norm() * (1 + 1e-12) + 1e-9));
  return b;
}

bool in_annihilator(const TranslationGroup& g, const AnnihilatorPoint& p, double tol) {
  switch (g.kind()) {
    case TranslationGroup::Kind::full:
      return p.is_zero();
    case TranslationGroup::Kind::modular:
      return p.exact.has_value() && g.modular_lattice().annihilated_by((*p.exact)(0));
    case TranslationGroup::Kind::lattice: {
      if (g.exact_lattice() && p.exact) {
        // alpha in Gamma^perp  <=>  C^T alpha in Z^d
        RationalVector v = g.exact_lattice()->basis().transpose() * (*p.exact);
        for (Eigen::Index i = 0; i < v.size(); ++i)
          if (!v(i).is_integer()) return false;
        return true;
      }
      Eigen::VectorXd v = g.numeric().basis().transpose() * Eigen::VectorXd(p.alpha);
      for (Eigen::Index i = 0; i < v.size(); ++i)
        if (std::abs(v(i) - std::round(v(i))) >= tol) return false;
      return true;
    }
  }
  return false;
}

}  // namespace

std::vector<int> annihilating_groups(std::span<const TranslationGroup> groups,
                                     const AnnihilatorPoint& point, double tolerance,
                                     bool disjoint_certified, int origin_group) {
  std::vector<int> kappa;
  const bool zero = point.is_zero();
  for (std::size_t j = 0; j < groups.size(); ++j) {
    const auto& g = groups[j];
    if (zero) { kappa.push_back(static_cast<int>(j)); continue; }
    if (disjoint_certified && !(g.is_exact() && point.exact)) {
      if (static_cast<int>(j) == origin_group) kappa.push_back(static_cast<int>(j));
      continue;
    }
    if (in_annihilator(g, point, tolerance)) kappa.push_back(static_cast<int>(j));
  }
  return kappa;
}

std::vector<AnnihilatorPoint> enumerate_annihilator_union(std::span<const TranslationGroup> groups,
                                                          double radius, std::size_t max_points) {
  EnumerationOptions opt;
  opt.radius = radius;
  opt.max_points = max_points;
  return enumerate_annihilators(groups, opt);
}

std::vector<AnnihilatorPoint> enumerate_annihilators(std::span<const TranslationGroup> groups,
                                                     const EnumerationOptions& options) {
  if (!(options.radius > 0)) throw std::invalid_argument("enumeration radius must be positive");
  if (groups.empty()) return {};

  std::map<RationalVector, AnnihilatorPoint, RationalVectorLess> exact_points;
  std::vector<AnnihilatorPoint> float_points;
  // Tolerance-mode dedup: bucketed by rounded coordinates.
  std::unordered_map<std::string, std::size_t> float_index;
  bool any_float = false;
  std::size_t count = 0;

  auto reach_of = [&](std::size_t j) {
    if (options.reach.empty()) return options.radius;
    return std::min(options.reach.at(j), options.radius);
  };

  auto add_exact = [&](RationalVector v, int origin) {
    auto it = exact_points.find(v);
    if (it != exact_points.end()) return;
    if (++count > options.max_points) throw EnumerationLimit(count - 1, options.max_points);
    AnnihilatorPoint p;
    p.alpha = to_point(v);
    p.exact = v;
    p.order = p.alpha.norm();
    (void)origin;
    exact_points.emplace(std::move(v), std::move(p));
  };

  const int dim = groups.front().dim();
  // alpha = 0 is always present.
  add_exact(RationalVector::Constant(dim, Rational(0)), -1);

  for (std::size_t j = 0; j < groups.size(); ++j) {
    const auto& g = groups[j];
    double reach = reach_of(j);
    if (reach <= 0) continue;
    switch (g.kind()) {
      case TranslationGroup::Kind::full:
        break;
      case TranslationGroup::Kind::modular: {
        const std::int64_t n = g.modular_lattice().modulus;
        if (static_cast<double>(n) > options.radius) break;
        for (std::int64_t k = 0; k < n; ++k) {
          RationalVector v(1);
          v(0) = Rational(k, n);
          add_exact(std::move(v), static_cast<int>(j));
        }
        break;
      }
      case TranslationGroup::Kind::lattice: {
        auto bounds = preimage_bounds(g.numeric().basis().transpose(), reach);
        const Eigen::MatrixXd dual = g.numeric().dual_basis();
        scan_box(bounds, [&](const std::vector<std::int64_t>& nu) {
          Eigen::VectorXd nv(static_cast<Eigen::Index>(nu.size()));
          for (std::size_t i = 0; i < nu.size(); ++i) nv(static_cast<Eigen::Index>(i)) = static_cast<double>(nu[i]);
          Eigen::VectorXd a = dual * nv;
          if (a.norm() > reach * (1 + 1e-12)) return;
          if (g.exact_lattice()) {
            RationalVector rv(static_cast<Eigen::Index>(nu.size()));
            for (std::size_t i = 0; i < nu.size(); ++i) rv(static_cast<Eigen::Index>(i)) = Rational(nu[i]);
            add_exact(RationalVector(g.exact_lattice()->dual_basis() * rv), static_cast<int>(j));
            return;
          }
          if (nv.isZero()) return;
          any_float = true;
          if (!options.disjoint_certified) {
            // bucket key on a tolerance grid; probe neighbours to merge near-duplicates
            const double h = std::max(options.tolerance, 1e-12) * 4;
            std::vector<std::int64_t> key(static_cast<std::size_t>(a.size()));
            for (Eigen::Index i = 0; i < a.size(); ++i) key[static_cast<std::size_t>(i)] = std::llround(a(i) / h);
            bool found = false;
            std::vector<std::int64_t> ones(key.size(), 1);
            scan_box(ones, [&](const std::vector<std::int64_t>& off) {
              if (found) return;
              std::string s;
              for (std::size_t i = 0; i < key.size(); ++i) s += std::to_string(key[i] + off[i]) + ",";
              if (float_index.count(s)) found = true;
            });
            if (found) return;
            std::string s;
            for (auto k : key) s += std::to_string(k) + ",";
            float_index.emplace(s, float_points.size());
          }
          if (++count > options.max_points) throw EnumerationLimit(count - 1, options.max_points);
          AnnihilatorPoint p;
          p.alpha = a;
          p.order = a.norm();
          p.exact_flag = options.disjoint_certified;
          p.kappa = {static_cast<int>(j)};  // origin; completed below
          float_points.push_back(std::move(p));
        });
        break;
      }
    }
  }

  std::vector<AnnihilatorPoint> out;
  out.reserve(exact_points.size() + float_points.size());
  for (auto& [key, p] : exact_points) {
    if (dim == 1 && groups.front().kind() == TranslationGroup::Kind::modular)
      p.order = static_cast<double>((*p.exact)(0).den());
    p.kappa = annihilating_groups(groups, p, options.tolerance, options.disjoint_certified);
    if (!p.is_zero())
      for (int j : p.kappa)
        if (!groups[static_cast<std::size_t>(j)].is_exact()) p.exact_flag = options.disjoint_certified;
    out.push_back(std::move(p));
  }
  for (auto& p : float_points) {
    int origin = p.kappa.empty() ? -1 : p.kappa.front();
    p.kappa = annihilating_groups(groups, p, options.tolerance, options.disjoint_certified, origin);
    if (std::find(p.kappa.begin(), p.kappa.end(), origin) == p.kappa.end()) {
      p.kappa.push_back(origin);
      std::sort(p.kappa.begin(), p.kappa.end());
    }
    out.push_back(std::move(p));
  }
  (void)any_float;

  std::stable_sort(out.begin(), out.end(), [](const AnnihilatorPoint& a, const AnnihilatorPoint& b) {
    if (a.is_zero() != b.is_zero()) return a.is_zero();
    if (a.order != b.order) return a.order < b.order;
    for (Eigen::Index i = 0; i < a.alpha.size(); ++i)
      if (a.alpha(i) != b.alpha(i)) return a.alpha(i) < b.alpha(i);
    return false;
  });
  return out;
}

std::vector<RationalVector> difference_points(const LatticeQ& coarse, const LatticeQ& fine_image,
                                              double radius) {
  if (coarse.dim() != fine_image.dim() || !fine_image.is_sublattice_of(coarse))
    throw std::invalid_argument("nested-lattice decomposition inapplicable");
  std::vector<RationalVector> out;
  const Eigen::MatrixXd c = to_double(coarse.basis());
  // points q = C nu with |q| <= radius: |nu_i| <= |row i of C^{-1}| * radius
  const Eigen::MatrixXd cinv = to_double(inverse<Rational>(coarse.basis()));
  auto bounds = preimage_bounds(cinv, radius);
  scan_box(bounds, [&](const std::vector<std::int64_t>& nu) {
    Eigen::VectorXd nv(static_cast<Eigen::Index>(nu.size()));
    for (std::size_t i = 0; i < nu.size(); ++i) nv(static_cast<Eigen::Index>(i)) = static_cast<double>(nu[i]);
    if ((c * nv).norm() > radius * (1 + 1e-12)) return;
    RationalVector rv(static_cast<Eigen::Index>(nu.size()));
    for (std::size_t i = 0; i < nu.size(); ++i) rv(static_cast<Eigen::Index>(i)) = Rational(nu[i]);
    RationalVector q = coarse.basis() * rv;
    if (!fine_image.contains(q)) out.push_back(std::move(q));
  });
  std::sort(out.begin(), out.end(), [](const RationalVector& a, const RationalVector& b) {
    double na = to_point(a).norm(), nb = to_point(b).norm();
    if (na != nb) return na < nb;
    return RationalVectorLess{}(a, b);
  });
  return out;
}

std::vector<IntVec> lattice_points_in_ball(const Eigen::MatrixXd& basis, const Point& center, double radius,
                                           std::size_t max_points) {
  const Eigen::Index d = basis.rows();
  const Eigen::MatrixXd inv = inverse<double>(basis);
  const Eigen::VectorXd c = inv * Eigen::VectorXd(center);
  IntVec lo(d), hi(d);
  double volume = 1.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double w = radius * inv.row(i).norm() * (1 + 1e-12) + 1e-9;
    lo(i) = static_cast<std::int64_t>(std::ceil(c(i) - w));
    hi(i) = static_cast<std::int64_t>(std::floor(c(i) + w));
    volume *= static_cast<double>(hi(i) - lo(i) + 1);
  }
  if (volume > 4.0 * static_cast<double>(max_points) + 64) throw EnumerationLimit(0, max_points);
  std::vector<IntVec> out;
  for_each_in_box(lo, hi, [&](const IntVec& nu) {
    Eigen::VectorXd x = basis * nu.cast<double>();
    if ((x - Eigen::VectorXd(center)).norm() > radius * (1 + 1e-12)) return;
    if (out.size() >= max_points) throw EnumerationLimit(out.size(), max_points);
    out.push_back(nu);
  });
  return out;
}

RationalMatrix parse_rational_matrix(const std::vector<std::vector<std::string>>& rows) {
  if (rows.empty()) throw std::invalid_argument("empty matrix");
  RationalMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) throw std::invalid_argument("ragged matrix rows");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = Rational::parse(rows[r][c]);
  }
  return m;
}

RationalMatrix to_rational(const Eigen::MatrixXd& m, double tol) {
  RationalMatrix out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out(r, c) = Rational::from_double(m(r, c), tol);
  return out;
}

}  // namespace framebound
