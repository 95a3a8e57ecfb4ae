#pragma once

// Auto-correlation functions t_alpha, remainders R and R~, and the six bound
// estimates A1, B1, B2, Ainf, A', B' evaluated on frequency grids.

#include "framebound/gti.hpp"

#include <array>
#include <cstddef>
#include <map>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace framebound {

/// Runs f(i) for i in [0, n) on up to `threads` workers (0: hardware or FRAMEBOUND_THREADS).
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& f);
unsigned default_threads();

struct Grid {
  std::vector<Point> points;
  Point spacing;
  std::string description;
  /// Closed bounds for refinement on bands; empty on periodic domains.
  Point lo, hi;

  int dim() const { return points.empty() ? 0 : static_cast<int>(points.front().size()); }

  /// n points per axis: lo + (i + offset) * h with h = (hi - lo) / n.
  static Grid box(const Point& lo, const Point& hi, const std::vector<int>& n, double offset = 0.0);
  static Grid interval(double lo, double hi, int n, double offset = 0.0);
  /// T = [0, 1) for systems on Z.
  static Grid torus(int n);
  /// B(B(0,1)) \ B(0,1) sampled with n points per axis of its bounding box (n per side in d = 1).
  static Grid dilation_annulus(const Eigen::MatrixXd& b, int n);
  /// Fundamental domain {P u : u in [0,1)^d} of a lattice with basis P.
  static Grid fundamental_domain(const Eigen::MatrixXd& basis, int n);

  /// Local grid of spacing h/4 on [p - h, p + h], clipped to [lo, hi] when set.
  Grid around(const Point& p) const;
};

struct Truncation {
  /// Largest |alpha| kept on R^d; largest modulus whose annihilator is enumerated on Z.
  double alpha_radius = kInf;
  std::size_t max_points = 2'000'000;
  double divergence_delta = 0.1;
};

struct AutoCorrField {
  AnnihilatorPoint alpha;
  std::vector<Point> omega;
  std::vector<Complex> samples;
  std::vector<double> tail;
};

/// Generic single-alpha evaluation: sum over kappa(alpha) of every layer.
Complex t_alpha_at(const SystemSpec& sys, const AnnihilatorPoint& alpha, const Point& w);
AutoCorrField t_alpha(const SystemSpec& sys, const AnnihilatorPoint& alpha, const Grid& grid);
AutoCorrField calderon_sum(const SystemSpec& sys, const Grid& grid);

/// Throws std::domain_error when a compactly supported layer just outside the
/// template range contributes on the grid.
void check_band(const SystemSpec& sys, const Grid& grid);

/// Per-frequency sums over the annihilator union.
struct Sample {
  double t0 = 0.0;
  double R = 0.0;
  double R_abs = 0.0;
  double l2sq = 0.0;  // sum over all alpha of |t_alpha|^2 (alpha = 0 included)
  double tail = 0.0;
  /// Partial sums at the four divergence checkpoints (cumulative).
  double R_part[4] = {0, 0, 0, 0};
  double R_abs_part[4] = {0, 0, 0, 0};
  double l2sq_part[4] = {0, 0, 0, 0};
};

struct AlphaSup {
  Point alpha;
  std::optional<RationalVector> exact;
  double sup = 0.0;
  int kappa_size = 0;
};

using AlphaKey = std::array<double, kMaxDim>;
using AlphaSupMap = std::map<AlphaKey, AlphaSup>;

/// Evaluator of all sums at arbitrary frequencies. Construction enumerates what can be
/// enumerated once (Z systems); R^d systems scan per frequency.
class SumEvaluator {
 public:
  SumEvaluator(const SystemSpec& sys, const Truncation& trunc);
  ~SumEvaluator();
  SumEvaluator(const SumEvaluator&) = delete;
  SumEvaluator& operator=(const SumEvaluator&) = delete;

  /// When `sups` is non-null, |t_alpha(w)| maxima are merged into it.
  Sample evaluate(const Point& w, AlphaSupMap* sups = nullptr) const;

  /// True when some annihilator point was dropped by the alpha truncation.
  bool truncated() const;
  /// Checkpoint values (radii on R^d, moduli on Z).
  const std::vector<double>& checkpoints() const;
  bool float_kappa() const;
  std::size_t alpha_count() const;

 private:
  struct Impl;
  Impl* impl_;
};

struct Field {
  std::vector<Point> omega;
  std::vector<double> values;
  bool divergent = false;
};

Field remainder_R(const SystemSpec& sys, const Grid& grid, const Truncation& trunc, unsigned threads = 0);
Field remainder_abs(const SystemSpec& sys, const Grid& grid, const Truncation& trunc, unsigned threads = 0);

/// Nested (Tchamitchian) form of R for systems with B Gamma^* contained in Gamma^*:
/// (1/|det C|) sum_m sum_{q in Gamma^* \ B Gamma^*} |sum_{j <= m} sum_l psi^_l(B^{-j} w) conj psi^_l(B^{-j} w + B^{m-j} q)|.
Field remainder_nested(const SystemSpec& sys, const Grid& grid, const Truncation& trunc);

struct Estimate {
  double coarse = 0.0;
  double refined = 0.0;
  double error = 0.0;
  Point where;
  bool sentinel = false;

  double value() const { return refined; }
};

struct GridRow {
  Point omega;
  double t0, R, R_abs, l2;
};

struct BoundsReport {
  Estimate A1, B1, B2, Ainf, Aprime, Bprime;
  double alpha_radius = kInf;
  std::size_t alpha_count = 0;
  std::string grid;
  bool chain_ok = false;
  std::optional<double> tight;
  bool divergent_R = false;
  bool divergent_R_abs = false;
  bool divergent_l2 = false;
  bool truncated = false;
  bool float_kappa = false;
  bool refinement_converged = true;
  double tail = 0.0;
  bool ucp_asserted = false;
  std::vector<GridRow> rows;
  std::vector<AlphaSup> alphas;
  std::vector<std::string> notes;

  bool divergent() const { return divergent_R || divergent_R_abs || divergent_l2; }
};

struct BoundsOptions {
  bool refine = true;
  double refine_tolerance = 0.005;
  double chain_tolerance = 1e-9;
  double tight_tolerance = 1e-8;
  unsigned threads = 0;
  bool collect_alphas = true;
};

BoundsReport bounds(const SystemSpec& sys, const Grid& grid, const Truncation& trunc, const BoundsOptions& opt = {});

/// A when max_{alpha != 0} sup|t_alpha| < tol and sup|t0 - mean t0| < tol.
std::optional<double> tightness(const BoundsReport& report, double tol = 1e-8);
std::optional<double> tightness(const SystemSpec& sys, const Grid& grid, const Truncation& trunc, double tol = 1e-8);

/// Time-side Gabor estimates from s_alpha, alpha in (1/b)Z with |alpha| <= radius.
struct TimeBounds {
  double A1, B1, Ainf;
};
TimeBounds time_side_bounds(const GaborTimeSide& sys, const std::vector<double>& x, double radius);

}  // namespace framebound
