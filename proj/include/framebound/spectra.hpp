#pragma once

// Fourier-domain generators g^ : G^ -> C with support metadata, analytic
// built-ins, and the unitary actions (dilation, modulation, phase) used by the
// system builders.

#include "framebound/lattice.hpp"

#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace framebound {

using Complex = std::complex<double>;
using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Region outside of which |g^| <= tail_eps. The region is the annulus
/// inner <= |w - center| <= outer, optionally intersected with the
/// parallelotope {offset + P u : lo <= u <= hi}.
struct SupportHint {
  Point center;
  double inner = 0.0;
  double outer = kInf;
  double tail_eps = 0.0;

  struct Parallelotope {
    SmallMatrix map;
    Point offset;
    Point lo;
    Point hi;
  };
  std::optional<Parallelotope> box;
  /// Support is all of T (periodic generators on Z); never restricts.
  bool periodic = false;

  static SupportHint everywhere(int dim);
  static SupportHint annulus(int dim, double inner, double outer, double tail_eps = 0.0);
  static SupportHint box_region(const Point& lo, const Point& hi);

  bool compact() const { return std::isfinite(outer) && tail_eps == 0.0; }
  /// False only where the hint guarantees |g^(w)| <= tail_eps.
  bool may_be_nonzero(const Point& w) const;
  /// Radius of a ball about the origin containing the region.
  double reach() const;
  /// Smallest |w| over the region (lower bound).
  double min_norm() const;

  SupportHint transformed(const SmallMatrix& at) const;  // image under w -> A^T w
  SupportHint shifted(const Point& lambda) const;
};

/// An immutable Fourier-domain generator. Copies share the evaluation closure.
class Generator {
 public:
  using Eval = std::function<Complex(const Point&)>;

  Generator() = default;
  Generator(std::string label, int dim, Eval eval, SupportHint support);

  Complex operator()(const Point& w) const {
    return support_.may_be_nonzero(w) || support_.tail_eps > 0.0 ? (*eval_)(w) : Complex(0.0);
  }

  /// g^(w) * conj(g^(w + alpha)); uses exact phase arithmetic for characters on Z.
  Complex cross(const Point& w, const AnnihilatorPoint& alpha) const;

  int dim() const { return dim_; }
  const std::string& label() const { return label_; }
  const SupportHint& support() const { return support_; }
  /// tau for discrete deltas 1_tau on Z (g^(w) = e^{2 pi i tau w}).
  const std::optional<std::int64_t>& character() const { return character_; }

  Generator with_character(std::int64_t tau) const {
    Generator g = *this;
    g.character_ = tau;
    return g;
  }
  Generator with_label(std::string label) const {
    Generator g = *this;
    g.label_ = std::move(label);
    return g;
  }

 private:
  std::string label_;
  int dim_ = 1;
  std::shared_ptr<const Eval> eval_;
  SupportHint support_;
  std::optional<std::int64_t> character_;
};

/// Space-domain function, used only on the Gabor time side.
struct SpaceFunction {
  std::string label;
  std::function<Complex(double)> eval;
  double support_lo = -kInf;  // |g| <= tail_eps outside [lo, hi]
  double support_hi = kInf;
};

struct Dilate { SmallMatrix matrix; };
struct Modulate { Point lambda; };
struct Phase { Point tau; };
using Transform = std::variant<Dilate, Modulate, Phase>;
using TransformChain = std::vector<Transform>;

/// Applies the chain left to right:
///   dilate(A):   g^ -> |det A|^{-1/2} g^(A^{-T} w)
///   modulate(l): g^ -> g^(w - l)
///   phase(t):    g^ -> e^{2 pi i t.w} g^(w)
Generator apply(const TransformChain& chain, const Generator& g);
Generator dilate(const Generator& g, const SmallMatrix& a);
Generator modulate(const Generator& g, const Point& lambda);

enum class Builtin {
  meyer_wavelet_hat,
  meyer_scaling_hat,
  shannon_wavelet_hat,
  haar_wavelet_hat,
  gaussian_hat,
  box_hat,
  bspline_hat,
  discrete_delta,
  shearlet_hat,
};

struct BuiltinParams {
  double sigma = 1.0;
  int order = 1;
  Point lo;
  Point hi;
  std::int64_t tau = 0;
  /// Tail level advertised by slowly decaying built-ins (Haar, B-splines).
  double tail_eps = 1e-3;
  /// Global scaling of the generator values.
  double amplitude = 1.0;
};

Generator builtin(Builtin kind, const BuiltinParams& params = {});
Generator builtin(const std::string& name, const BuiltinParams& params = {});
std::optional<Builtin> builtin_from_name(const std::string& name);
std::vector<std::string> builtin_names();

/// Tensor product g1^(w1) g2^(w2) of two univariate generators.
Generator tensor(const Generator& g1, const Generator& g2);
/// Pointwise scaled generator c * g^.
Generator scaled(const Generator& g, Complex c);

/// Meyer auxiliary polynomial nu(x) = x^4 (35 - 84x + 70x^2 - 20x^3), clipped to [0,1].
double meyer_nu(double x);

SpaceFunction space_box(double lo, double hi);
SpaceFunction space_bspline(int order);
SpaceFunction space_gaussian(double sigma);

}  // namespace framebound
