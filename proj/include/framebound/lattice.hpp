#pragma once

// Full-rank lattices in R^d (templated on scalar: double or exact Rational),
// arithmetic-progression subgroups N*Z of Z, their annihilators, and
// enumeration of annihilator unions with kappa(alpha) index sets.

#include "framebound/rational.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace framebound {

inline constexpr int kMaxDim = 4;

/// Frequency/space point; stack-allocated up to kMaxDim coordinates.
using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RationalMatrix = Mat<Rational>;
using RationalVector = Vec<Rational>;

namespace detail {

inline bool is_zero(const double& x) { return x == 0.0; }
inline bool is_zero(const Rational& x) { return x.is_zero(); }
inline double magnitude(const double& x) { return std::abs(x); }
inline double magnitude(const Rational& x) { return std::abs(x.to_double()); }

}  // namespace detail

/// Determinant by Gaussian elimination (exact for Rational).
template <typename Scalar>
Scalar determinant(Mat<Scalar> a) {
  const Eigen::Index n = a.rows();
  if (n != a.cols()) throw std::invalid_argument("determinant of non-square matrix");
  Scalar det(1);
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index piv = -1;
    double best = 0.0;
    for (Eigen::Index r = c; r < n; ++r) {
      double m = detail::magnitude(a(r, c));
      if (!detail::is_zero(a(r, c)) && m > best) { best = m; piv = r; }
    }
    if (piv < 0) return Scalar(0);
    if (piv != c) { a.row(piv).swap(a.row(c)); det = -det; }
    det = det * a(c, c);
    for (Eigen::Index r = c + 1; r < n; ++r) {
      if (detail::is_zero(a(r, c))) continue;
      Scalar f = a(r, c) / a(c, c);
      for (Eigen::Index k = c; k < n; ++k) a(r, k) = a(r, k) - f * a(c, k);
    }
  }
  return det;
}

/// Gauss-Jordan inverse; throws std::domain_error("degenerate lattice") when singular.
template <typename Scalar>
Mat<Scalar> inverse(const Mat<Scalar>& m) {
  const Eigen::Index n = m.rows();
  if (n != m.cols() || n == 0) throw std::invalid_argument("inverse of non-square matrix");
  Mat<Scalar> a = m;
  Mat<Scalar> inv = Mat<Scalar>::Identity(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index piv = -1;
    double best = 0.0;
    for (Eigen::Index r = c; r < n; ++r) {
      double mag = detail::magnitude(a(r, c));
      if (!detail::is_zero(a(r, c)) && mag > best) { best = mag; piv = r; }
    }
    if (piv < 0 || (std::is_same_v<Scalar, double> && best < 1e-300))
      throw std::domain_error("degenerate lattice");
    if (piv != c) { a.row(piv).swap(a.row(c)); inv.row(piv).swap(inv.row(c)); }
    Scalar p = a(c, c);
    for (Eigen::Index k = 0; k < n; ++k) { a(c, k) = a(c, k) / p; inv(c, k) = inv(c, k) / p; }
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == c || detail::is_zero(a(r, c))) continue;
      Scalar f = a(r, c);
      for (Eigen::Index k = 0; k < n; ++k) {
        a(r, k) = a(r, k) - f * a(c, k);
        inv(r, k) = inv(r, k) - f * inv(c, k);
      }
    }
  }
  return inv;
}

inline Eigen::MatrixXd to_double(const RationalMatrix& m) {
  return m.unaryExpr([](const Rational& r) { return r.to_double(); });
}
inline Eigen::MatrixXd to_double(const Eigen::MatrixXd& m) { return m; }

/// Full-rank lattice Gamma = C Z^d with cached dual basis (C^T)^{-1} and covolume |det C|.
template <typename Scalar>
class Lattice {
 public:
  using Matrix = Mat<Scalar>;
  using Vector = Vec<Scalar>;

  explicit Lattice(Matrix basis) : basis_(std::move(basis)) {
    if (basis_.rows() != basis_.cols() || basis_.rows() == 0 || basis_.rows() > kMaxDim)
      throw std::invalid_argument("lattice basis must be square with dimension 1..4");
    Scalar det = determinant<Scalar>(basis_);
    if (detail::is_zero(det)) throw std::domain_error("degenerate lattice");
    covolume_ = det < Scalar(0) ? Scalar(-det) : det;
    inverse_ = framebound::inverse<Scalar>(basis_);
    dual_basis_ = inverse_.transpose();
  }

  static Lattice integer(Eigen::Index d) { return Lattice(Matrix::Identity(d, d)); }

  Eigen::Index dim() const { return basis_.rows(); }
  const Matrix& basis() const { return basis_; }
  /// C^# = (C^T)^{-1}; columns generate the dual lattice.
  const Matrix& dual_basis() const { return dual_basis_; }
  const Scalar& covolume() const { return covolume_; }

  Lattice dual() const { return Lattice(dual_basis_); }

  /// C^{-1} x.
  Vector coordinates(const Vector& x) const { return inverse_ * x; }

  /// Exact membership for Rational; tolerance-based (sup-distance of C^{-1}x to Z^d) for double.
  bool contains(const Vector& x, double eps = 1e-9) const {
    Vector c = coordinates(x);
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      if constexpr (std::is_same_v<Scalar, Rational>) {
        (void)eps;
        if (!c(i).is_integer()) return false;
      } else {
        if (std::abs(c(i) - std::round(c(i))) >= eps) return false;
      }
    }
    return true;
  }

  /// True iff every basis vector of this lattice lies in `other`.
  bool is_sublattice_of(const Lattice& other, double eps = 1e-9) const {
    for (Eigen::Index i = 0; i < dim(); ++i)
      if (!other.contains(basis_.col(i), eps)) return false;
    return true;
  }

  /// Image lattice M * Gamma.
  Lattice transformed(const Matrix& m) const { return Lattice(Matrix(m * basis_)); }

  Lattice<double> numeric() const {
    if constexpr (std::is_same_v<Scalar, double>) {
      return *this;
    } else {
      return Lattice<double>(to_double(basis_));
    }
  }

  friend bool operator==(const Lattice& a, const Lattice& b) {
    return a.is_sublattice_of(b) && b.is_sublattice_of(a);
  }

 private:
  Matrix basis_;
  Matrix inverse_;
  Matrix dual_basis_;
  Scalar covolume_;
};

using LatticeR = Lattice<double>;
using LatticeQ = Lattice<Rational>;

template <typename Scalar>
Lattice<Scalar> dual_lattice(const Lattice<Scalar>& l) {
  return l.dual();
}

/// Subgroup N*Z of Z; its annihilator in T = [0,1) is (1/N)Z mod 1.
struct ModularLattice {
  std::int64_t modulus = 1;

  explicit ModularLattice(std::int64_t n) : modulus(n) {
    if (n < 1) throw std::domain_error("modulus must be positive");
  }
  std::int64_t covolume() const { return modulus; }
  bool contains(std::int64_t x) const { return x % modulus == 0; }
  /// alpha in [0,1) annihilates N*Z iff N*alpha is an integer.
  bool annihilated_by(const Rational& alpha) const { return modulus % alpha.den() == 0; }
};

/// Translation subgroup of one layer: a full-rank lattice in R^d, N*Z in Z,
/// or the whole group (continuous translation, annihilator {0}).
class TranslationGroup {
 public:
  enum class Kind { lattice, modular, full };

  static TranslationGroup exact(LatticeQ l);
  /// Irrational or float-only data; membership is tolerance based.
  static TranslationGroup approximate(LatticeR l);
  static TranslationGroup modular(std::int64_t n) { return TranslationGroup(ModularLattice(n)); }
  static TranslationGroup full(int dim) {
    TranslationGroup g;
    g.kind_ = Kind::full;
    g.dim_ = dim;
    return g;
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  bool is_exact() const { return kind_ != Kind::lattice || exact_.has_value(); }
  double covolume() const;
  const LatticeR& numeric() const { return numeric_.value(); }
  const std::optional<LatticeQ>& exact_lattice() const { return exact_; }
  const ModularLattice& modular_lattice() const { return modular_.value(); }

 private:
  TranslationGroup() = default;
  explicit TranslationGroup(ModularLattice m) : kind_(Kind::modular), dim_(1), modular_(m) {}

  Kind kind_ = Kind::full;
  int dim_ = 1;
  std::optional<LatticeR> numeric_;
  std::optional<LatticeQ> exact_;
  std::optional<ModularLattice> modular_;
};

/// A point of the union of annihilators together with kappa(alpha).
struct AnnihilatorPoint {
  Point alpha;                          // numeric value (torus points in [0,1))
  std::optional<RationalVector> exact;  // certified rational value when available
  std::vector<int> kappa;               // sorted indices of groups whose annihilator contains alpha
  bool exact_flag = true;               // false when kappa relied on float tolerance
  double order = 0.0;                   // sort key: Euclidean norm, or denominator on the torus

  bool is_zero() const { return alpha.isZero(0.0); }
};

/// Raised when an enumeration would exceed its point budget.
class EnumerationLimit : public std::runtime_error {
 public:
  EnumerationLimit(std::size_t partial, std::size_t limit)
      : std::runtime_error("annihilator enumeration exceeded max_points=" + std::to_string(limit) +
                           " (partial count " + std::to_string(partial) + ")"),
        partial_count(partial) {}
  std::size_t partial_count;
};

struct EnumerationOptions {
  double radius = 1.0;
  std::size_t max_points = 1'000'000;
  double tolerance = 1e-9;
  /// Builder-supplied certificate: the non-exact lattices pairwise meet only at 0.
  bool disjoint_certified = false;
  /// Optional per-group enumeration radius (<= 0: membership only, no enumeration).
  /// For modular groups any positive reach enumerates the whole annihilator.
  std::vector<double> reach;
};

/// Every alpha with |alpha| <= radius in the union of annihilators, each exactly once, with
/// complete kappa; sorted by order, alpha = 0 first. For subgroups of Z, `radius` bounds the
/// modulus of the groups whose annihilators are enumerated.
std::vector<AnnihilatorPoint> enumerate_annihilator_union(std::span<const TranslationGroup> groups,
                                                          double radius, std::size_t max_points);

std::vector<AnnihilatorPoint> enumerate_annihilators(std::span<const TranslationGroup> groups,
                                                     const EnumerationOptions& options);

/// kappa(alpha) computed against every group (exact where possible).
std::vector<int> annihilating_groups(std::span<const TranslationGroup> groups,
                                     const AnnihilatorPoint& point, double tolerance = 1e-9,
                                     bool disjoint_certified = false, int origin_group = -1);

/// Points of coarse \ fine_image inside the ball of the given radius.
/// Throws std::invalid_argument("nested-lattice decomposition inapplicable") unless fine_image ⊆ coarse.
std::vector<RationalVector> difference_points(const LatticeQ& coarse, const LatticeQ& fine_image,
                                              double radius);

/// Exact membership test; tolerance mode when `eps` is given for double data.
inline bool contains(const LatticeQ& l, const RationalVector& x) { return l.contains(x); }
inline bool contains(const LatticeR& l, const Eigen::VectorXd& x, double eps) { return l.contains(x, eps); }

using IntVec = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

/// Calls f(nu) for every integer vector with lo <= nu <= hi (componentwise).
template <typename F>
void for_each_in_box(const IntVec& lo, const IntVec& hi, F&& f) {
  const Eigen::Index d = lo.size();
  for (Eigen::Index i = 0; i < d; ++i)
    if (lo(i) > hi(i)) return;
  IntVec nu = lo;
  while (true) {
    f(static_cast<const IntVec&>(nu));
    Eigen::Index i = 0;
    while (i < d) {
      if (nu(i) < hi(i)) { ++nu(i); break; }
      nu(i) = lo(i);
      ++i;
    }
    if (i == d) return;
  }
}

/// Coordinates nu with |basis * nu - center| <= radius; throws EnumerationLimit past max_points.
std::vector<IntVec> lattice_points_in_ball(const Eigen::MatrixXd& basis, const Point& center, double radius,
                                           std::size_t max_points = 1'000'000);

RationalMatrix parse_rational_matrix(const std::vector<std::vector<std::string>>& rows);
RationalMatrix to_rational(const Eigen::MatrixXd& m, double tol = 1e-12);

}  // namespace framebound
