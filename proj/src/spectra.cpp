#include "framebound/spectra.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace framebound {

namespace {

constexpr double kPi = std::numbers::pi;

Point zeros(int dim) { return Point::Zero(dim); }

SmallMatrix inverse_transpose(const SmallMatrix& a) {
  Eigen::MatrixXd m = a;
  return framebound::inverse<double>(m).transpose();
}

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x); }

// Exact phase e^{-2 pi i tau alpha} for alpha = p/q.
Complex character_phase(std::int64_t tau, const Rational& alpha) {
  const __int128 q = alpha.den();
  __int128 t = static_cast<__int128>(tau) % q;
  if (t < 0) t += q;
  __int128 p = static_cast<__int128>(alpha.num()) % q;
  if (p < 0) p += q;
  const __int128 r = (t * p) % q;  // tau*alpha mod 1 = r/q
  const double frac = static_cast<double>(static_cast<long double>(r) / static_cast<long double>(q));
  return std::polar(1.0, -2.0 * kPi * frac);
}

}  // namespace

// ---------------------------------------------------------------- SupportHint

SupportHint SupportHint::everywhere(int dim) {
  SupportHint h;
  h.center = zeros(dim);
  return h;
}

SupportHint SupportHint::annulus(int dim, double inner, double outer, double tail_eps) {
  SupportHint h;
  h.center = zeros(dim);
  h.inner = inner;
  h.outer = outer;
  h.tail_eps = tail_eps;
  return h;
}

SupportHint SupportHint::box_region(const Point& lo, const Point& hi) {
  const int d = static_cast<int>(lo.size());
  SupportHint h;
  h.center = zeros(d);
  Point far = lo.cwiseAbs().cwiseMax(hi.cwiseAbs());
  h.outer = far.norm();
  Parallelotope p;
  p.map = SmallMatrix::Identity(d, d);
  p.offset = zeros(d);
  p.lo = lo;
  p.hi = hi;
  h.box = p;
  return h;
}

bool SupportHint::may_be_nonzero(const Point& w) const {
  if (periodic) return true;
  const double r = (w - center).norm();
  constexpr double slack = 1e-12;
  if (r < inner * (1 - slack) - slack || r > outer * (1 + slack) + slack) return false;
  if (box) {
    Eigen::MatrixXd m = box->map;
    Point u = framebound::inverse<double>(m) * (w - box->offset);
    for (Eigen::Index i = 0; i < u.size(); ++i)
      if (u(i) < box->lo(i) - 1e-12 || u(i) >= box->hi(i) + 1e-12) return false;
  }
  return true;
}

double SupportHint::reach() const {
  if (periodic) return kInf;
  return center.norm() + outer;
}

double SupportHint::min_norm() const {
  if (periodic) return 0.0;
  return std::max(0.0, inner - center.norm());
}

SupportHint SupportHint::transformed(const SmallMatrix& at) const {
  SupportHint h = *this;
  if (periodic) return h;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd{Eigen::MatrixXd(at)};
  const double smax = svd.singularValues().maxCoeff();
  const double smin = svd.singularValues().minCoeff();
  h.center = at * center;
  h.inner = inner * smin;
  h.outer = outer * smax;
  if (box) {
    h.box->map = at * box->map;
    h.box->offset = at * box->offset;
  }
  return h;
}

SupportHint SupportHint::shifted(const Point& lambda) const {
  SupportHint h = *this;
  if (periodic) return h;
  h.center = center + lambda;
  if (box) h.box->offset = box->offset + lambda;
  return h;
}

// ------------------------------------------------------------------ Generator

Generator::Generator(std::string label, int dim, Eval eval, SupportHint support)
    : label_(std::move(label)),
      dim_(dim),
      eval_(std::make_shared<const Eval>(std::move(eval))),
      support_(std::move(support)) {}

Complex Generator::cross(const Point& w, const AnnihilatorPoint& alpha) const {
  if (character_ && alpha.exact && alpha.exact->size() == 1) return character_phase(*character_, (*alpha.exact)(0));
  const Complex a = (*this)(w);
  if (a == Complex(0.0)) return Complex(0.0);
  return a * std::conj((*this)(Point(w + alpha.alpha)));
}

Generator dilate(const Generator& g, const SmallMatrix& a) {
  if (a.rows() != g.dim() || a.cols() != g.dim()) throw std::invalid_argument("dilation dimension mismatch");
  const double det = determinant<double>(Eigen::MatrixXd(a));
  if (det == 0.0) throw std::domain_error("singular dilation");
  const SmallMatrix ait = inverse_transpose(a);
  const double scale = 1.0 / std::sqrt(std::abs(det));
  SupportHint hint = g.support().transformed(a.transpose());
  hint.tail_eps = g.support().tail_eps * scale;
  return Generator(
      g.label(), g.dim(), [g, ait, scale](const Point& w) { return scale * g(Point(ait * w)); }, hint);
}

Generator modulate(const Generator& g, const Point& lambda) {
  return Generator(
      g.label(), g.dim(), [g, lambda](const Point& w) { return g(Point(w - lambda)); },
      g.support().shifted(lambda));
}

Generator apply(const TransformChain& chain, const Generator& g) {
  Generator out = g;
  for (const auto& t : chain) {
    if (const auto* d = std::get_if<Dilate>(&t)) {
      out = dilate(out, d->matrix);
    } else if (const auto* m = std::get_if<Modulate>(&t)) {
      out = modulate(out, m->lambda);
    } else if (const auto* p = std::get_if<Phase>(&t)) {
      const Point tau = p->tau;
      Generator prev = out;
      out = Generator(
          prev.label(), prev.dim(),
          [prev, tau](const Point& w) { return std::polar(1.0, 2 * kPi * tau.dot(w)) * prev(w); },
          prev.support());
    }
  }
  return out;
}

Generator scaled(const Generator& g, Complex c) {
  SupportHint hint = g.support();
  hint.tail_eps *= std::abs(c);
  return Generator(g.label(), g.dim(), [g, c](const Point& w) { return c * g(w); }, hint);
}

Generator tensor(const Generator& g1, const Generator& g2) {
  if (g1.dim() != 1 || g2.dim() != 1) throw std::invalid_argument("tensor expects univariate factors");
  SupportHint hint = SupportHint::everywhere(2);
  const double r1 = g1.support().reach(), r2 = g2.support().reach();
  if (std::isfinite(r1) && std::isfinite(r2)) {
    Point lo(2), hi(2);
    lo << -r1, -r2;
    hi << r1, r2;
    hint = SupportHint::box_region(lo, hi);
  }
  hint.tail_eps = std::max(g1.support().tail_eps, g2.support().tail_eps);
  return Generator(
      g1.label() + "x" + g2.label(), 2,
      [g1, g2](const Point& w) {
        Point a(1), b(1);
        a(0) = w(0);
        b(0) = w(1);
        return g1(a) * g2(b);
      },
      hint);
}

double meyer_nu(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double x4 = x * x * x * x;
  return x4 * (35.0 - 84.0 * x + 70.0 * x * x - 20.0 * x * x * x);
}

namespace {

// |psi^| of the Meyer wavelet; support 1/3 <= |w| <= 4/3.
double meyer_wavelet_modulus(double w) {
  const double a = std::abs(w);
  if (a <= 1.0 / 3.0 || a >= 4.0 / 3.0) return 0.0;
  if (a <= 2.0 / 3.0) return std::sin(kPi / 2 * meyer_nu(3 * a - 1));
  return std::cos(kPi / 2 * meyer_nu(1.5 * a - 1));
}

double meyer_scaling_modulus(double w) {
  const double a = std::abs(w);
  if (a <= 1.0 / 3.0) return 1.0;
  if (a >= 2.0 / 3.0) return 0.0;
  return std::cos(kPi / 2 * meyer_nu(3 * a - 1));
}

double decay_radius(double bound_at_one, int power, double eps) {
  // bound_at_one / r^power = eps
  return std::pow(bound_at_one / eps, 1.0 / power);
}

}  // namespace

std::optional<Builtin> builtin_from_name(const std::string& name) {
  static const std::map<std::string, Builtin> names = {
      {"meyer_wavelet_hat", Builtin::meyer_wavelet_hat},
      {"meyer_scaling_hat", Builtin::meyer_scaling_hat},
      {"shannon_wavelet_hat", Builtin::shannon_wavelet_hat},
      {"haar_wavelet_hat", Builtin::haar_wavelet_hat},
      {"gaussian_hat", Builtin::gaussian_hat},
      {"box_hat", Builtin::box_hat},
      {"bspline_hat", Builtin::bspline_hat},
      {"discrete_delta", Builtin::discrete_delta},
      {"shearlet_hat", Builtin::shearlet_hat},
  };
  auto it = names.find(name);
  if (it == names.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> builtin_names() {
  return {"meyer_wavelet_hat", "meyer_scaling_hat", "shannon_wavelet_hat", "haar_wavelet_hat", "gaussian_hat",
          "box_hat",           "bspline_hat",       "discrete_delta",      "shearlet_hat"};
}

Generator builtin(const std::string& name, const BuiltinParams& params) {
  auto kind = builtin_from_name(name);
  if (!kind) throw std::invalid_argument("unknown generator '" + name + "'");
  return builtin(*kind, params);
}

Generator builtin(Builtin kind, const BuiltinParams& p) {
  const double amp = p.amplitude;
  switch (kind) {
    case Builtin::meyer_wavelet_hat:
      return Generator(
          "meyer", 1,
          [amp](const Point& w) {
            const double m = meyer_wavelet_modulus(w(0));
            if (m == 0.0) return Complex(0.0);
            return amp * std::polar(m, kPi * w(0));
          },
          SupportHint::annulus(1, 1.0 / 3.0, 4.0 / 3.0));
    case Builtin::meyer_scaling_hat:
      return Generator(
          "meyer_phi", 1, [amp](const Point& w) { return Complex(amp * meyer_scaling_modulus(w(0))); },
          SupportHint::annulus(1, 0.0, 2.0 / 3.0));
    case Builtin::shannon_wavelet_hat:
      return Generator(
          "shannon", 1,
          [amp](const Point& w) {
            const double x = w(0);
            return Complex((x >= 0.5 && x < 1.0) || (x >= -1.0 && x < -0.5) ? amp : 0.0);
          },
          SupportHint::annulus(1, 0.5, 1.0));
    case Builtin::haar_wavelet_hat: {
      const double eps = p.tail_eps;
      return Generator(
          "haar", 1,
          [amp](const Point& w) {
            const double x = w(0);
            if (x == 0.0) return Complex(0.0);
            const double s = std::sin(kPi * x / 2);
            const double mag = s * s / (kPi * x / 2);
            return amp * Complex(0.0, 1.0) * std::polar(mag, -kPi * x);
          },
          SupportHint::annulus(1, 0.0, decay_radius(2.0 / kPi * std::abs(amp), 1, eps), eps));
    }
    case Builtin::gaussian_hat: {
      if (!(p.sigma > 0)) throw std::invalid_argument("gaussian_hat requires sigma > 0");
      const double sigma = p.sigma;
      const int d = p.lo.size() > 0 ? static_cast<int>(p.lo.size()) : 1;
      const double norm = amp * std::pow(2.0 * sigma * sigma, d / 4.0);
      // radius where the value drops below 1e-17 relative to the peak
      const double r = std::sqrt(std::log(1e17) / (kPi * sigma * sigma));
      return Generator(
          "gaussian", d,
          [norm, sigma](const Point& w) { return Complex(norm * std::exp(-kPi * sigma * sigma * w.squaredNorm())); },
          SupportHint::annulus(d, 0.0, r, norm * 1e-17));
    }
    case Builtin::box_hat: {
      if (p.lo.size() == 0 || p.lo.size() != p.hi.size()) throw std::invalid_argument("box_hat requires lo/hi corners");
      for (Eigen::Index i = 0; i < p.lo.size(); ++i)
        if (!(p.hi(i) > p.lo(i))) throw std::invalid_argument("box_hat requires lo < hi");
      const Point lo = p.lo, hi = p.hi;
      return Generator(
          "box", static_cast<int>(lo.size()),
          [lo, hi, amp](const Point& w) {
            for (Eigen::Index i = 0; i < w.size(); ++i)
              if (w(i) < lo(i) || w(i) >= hi(i)) return Complex(0.0);
            return Complex(amp);
          },
          SupportHint::box_region(lo, hi));
    }
    case Builtin::bspline_hat: {
      if (p.order < 1) throw std::invalid_argument("bspline_hat requires order >= 1");
      const int order = p.order;
      return Generator(
          "bspline" + std::to_string(order), 1,
          [order, amp](const Point& w) { return Complex(amp * std::pow(sinc(w(0)), order)); },
          SupportHint::annulus(1, 0.0, decay_radius(std::abs(amp) * std::pow(1.0 / kPi, order), order, p.tail_eps),
                               p.tail_eps));
    }
    case Builtin::discrete_delta: {
      const std::int64_t tau = p.tau;
      SupportHint hint = SupportHint::everywhere(1);
      hint.periodic = true;
      return Generator(
                 "delta" + std::to_string(tau), 1,
                 [tau, amp](const Point& w) {
                   // reduce tau*w mod 1 before the exponential to keep the phase accurate
                   const long double x = static_cast<long double>(tau) * static_cast<long double>(w(0));
                   const long double f = x - std::floor(x);
                   return amp * std::polar(1.0, 2.0 * kPi * static_cast<double>(f));
                 },
                 hint)
          .with_character(tau);
    }
    case Builtin::shearlet_hat: {
      // psi^(x) = W(x1) V(x2/x1): W^2(x) = |meyer(x)|^2 + |meyer(2x)|^2 partitions unity
      // under 4-adic dilation; V is the Meyer scaling profile (integer-shift partition).
      Point lo(2), hi(2);
      lo << -4.0 / 3.0, -8.0 / 9.0;
      hi << 4.0 / 3.0, 8.0 / 9.0;
      SupportHint hint = SupportHint::box_region(lo, hi);
      hint.inner = 1.0 / 6.0;
      return Generator(
          "shearlet", 2,
          [amp](const Point& w) {
            const double x1 = w(0);
            if (x1 == 0.0) return Complex(0.0);
            const double a = meyer_wavelet_modulus(x1), b = meyer_wavelet_modulus(2 * x1);
            const double wpart = std::sqrt(a * a + b * b);
            if (wpart == 0.0) return Complex(0.0);
            return Complex(amp * wpart * meyer_scaling_modulus(w(1) / x1));
          },
          hint);
    }
  }
  throw std::invalid_argument("unknown builtin");
}

SpaceFunction space_box(double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("space_box requires lo < hi");
  return {"box", [lo, hi](double x) { return Complex(x >= lo && x < hi ? 1.0 : 0.0); }, lo, hi};
}

SpaceFunction space_bspline(int order) {
  if (order < 1) throw std::invalid_argument("space_bspline requires order >= 1");
  // centred cardinal B-spline of the given order (order 1: indicator of [-1/2, 1/2))
  auto eval = [order](double x) {
    const double t = x + order / 2.0;  // shift to support [0, order)
    if (t < 0.0 || t >= order) return Complex(0.0);
    // closed form: (1/(m-1)!) sum_k (-1)^k C(m,k) (t-k)_+^{m-1}
    double s = 0.0, binom = 1.0, fact = 1.0;
    for (int i = 2; i < order; ++i) fact *= i;
    for (int k = 0; k <= order; ++k) {
      if (k > 0) binom = binom * (order - k + 1) / k;
      const double u = t - k;
      if (u > 0.0) s += ((k % 2) ? -1.0 : 1.0) * binom * (order == 1 ? 1.0 : std::pow(u, order - 1));
    }
    return Complex(s / fact);
  };
  return {"bspline" + std::to_string(order), eval, -order / 2.0, order / 2.0};
}

SpaceFunction space_gaussian(double sigma) {
  if (!(sigma > 0)) throw std::invalid_argument("space_gaussian requires sigma > 0");
  const double norm = std::pow(2.0 / (sigma * sigma), 0.25);
  const double r = sigma * std::sqrt(std::log(1e17) / kPi);
  return {"gaussian", [norm, sigma](double x) { return Complex(norm * std::exp(-kPi * x * x / (sigma * sigma))); }, -r,
          r};
}

}  // namespace framebound
